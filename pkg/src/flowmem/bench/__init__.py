from .rollout import (
    MODES,
    ArtifactBundle,
    EpisodeResult,
    MissingArtifactError,
    RolloutConfig,
    discontinuity_metric,
    rollout_episode,
)
from .sweep import (
    SweepCell,
    SweepRow,
    ablation_report,
    ablation_to_csv,
    default_grid,
    episode_tasks,
    episodes_to_csv,
    run_cell,
    sweep,
    sweep_to_csv,
    timing_to_csv,
)

__all__ = [
    "MODES", "ArtifactBundle", "EpisodeResult", "MissingArtifactError", "RolloutConfig",
    "discontinuity_metric", "rollout_episode", "SweepCell", "SweepRow", "ablation_report",
    "ablation_to_csv", "default_grid", "episode_tasks", "episodes_to_csv", "run_cell",
    "sweep", "sweep_to_csv", "timing_to_csv",
]
