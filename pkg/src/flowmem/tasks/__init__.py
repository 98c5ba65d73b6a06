from .dataset import (
    Dataset,
    DatasetConfig,
    Demonstration,
    build_dataset,
    load_dataset,
    save_dataset,
)
from .families import (
    ACTION_DIM,
    CONTEXT_DIM,
    FAMILIES,
    N_FAMILIES,
    WORKSPACE_SCALE,
    FamilySpec,
    TaskDescriptor,
    curvature_bound,
    expert_trajectory,
    featurize,
    observation,
    sample_task,
)

__all__ = [
    "Dataset", "DatasetConfig", "Demonstration", "build_dataset", "load_dataset",
    "save_dataset", "ACTION_DIM", "CONTEXT_DIM", "FAMILIES", "N_FAMILIES",
    "WORKSPACE_SCALE", "FamilySpec", "TaskDescriptor", "curvature_bound",
    "expert_trajectory", "featurize", "observation", "sample_task",
]
