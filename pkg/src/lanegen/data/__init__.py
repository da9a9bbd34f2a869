from .dataset import (
    SPLIT_NAMES,
    ConditionedInput,
    DatasetSplit,
    SamplePair,
    load_dataset,
    load_split,
    make_conditioned_input,
)
from .synth import synth_dataset, synth_scene

__all__ = [
    "SPLIT_NAMES",
    "ConditionedInput",
    "DatasetSplit",
    "SamplePair",
    "load_dataset",
    "load_split",
    "make_conditioned_input",
    "synth_dataset",
    "synth_scene",
]
