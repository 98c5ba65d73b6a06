"""Parametric families of smooth planar trajectories.

Each family draws a start, a goal and a via point inside the unit
workspace and traces a quadratic Bezier curve through them under a
minimum-jerk time profile, so paths start and stop at rest and have
bounded discrete curvature. Families differ in how strongly and to which
side the via point bends the path, and in how long the segments are, which
makes their action distributions distinct enough for retrieval to matter.

Actions are absolute planar positions; executing a chunk means appending
its rows to the motion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTION_DIM = 2
WORKSPACE_SCALE = 1.0

# max |sigma'| and |sigma''| of the min-jerk profile 10u^3 - 15u^4 + 6u^5
_SIGMA_D1_MAX = 1.875
_SIGMA_D2_MAX = 10.0 / np.sqrt(3.0)


@dataclass(frozen=True)
class FamilySpec:
    name: str
    bend_range: tuple[float, float]     # signed, fraction of segment length
    length_range: tuple[float, float]   # fraction of workspace scale


FAMILIES: tuple[FamilySpec, ...] = (
    FamilySpec("reach", (-0.03, 0.03), (0.25, 0.50)),
    FamilySpec("arc-left", (0.20, 0.40), (0.30, 0.60)),
    FamilySpec("arc-right", (-0.40, -0.20), (0.30, 0.60)),
    FamilySpec("hook-left", (0.45, 0.70), (0.20, 0.45)),
    FamilySpec("hook-right", (-0.70, -0.45), (0.20, 0.45)),
    FamilySpec("drift-left", (0.08, 0.18), (0.45, 0.80)),
    FamilySpec("drift-right", (-0.18, -0.08), (0.45, 0.80)),
    FamilySpec("long-reach", (-0.05, 0.05), (0.60, 0.95)),
)

N_FAMILIES = len(FAMILIES)
# one-hot family + start + goal + via + scale + (position, goal offset)
CONTEXT_DIM = N_FAMILIES + 7 + 2 * ACTION_DIM

# fraction of the length range reserved as the held-out parameter region
EDGE_FRACTION = 0.15


@dataclass(frozen=True)
class TaskDescriptor:
    family: int
    task_id: str
    start: np.ndarray
    goal: np.ndarray
    via: np.ndarray
    scale: float
    seed: int

    def __post_init__(self):
        for name in ("start", "goal", "via"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))

    @property
    def family_name(self) -> str:
        return FAMILIES[self.family].name


def _length_interval(spec: FamilySpec, param_region: str) -> tuple[float, float]:
    lo, hi = spec.length_range
    cut = hi - EDGE_FRACTION * (hi - lo)
    if param_region == "main":
        return lo, cut
    if param_region == "edge":
        return cut, hi
    if param_region == "full":
        return lo, hi
    raise ValueError(f"unknown param_region {param_region!r}")


def sample_task(family: int, seed: int, param_region: str = "full",
                task_id: str | None = None) -> TaskDescriptor:
    """Draw a task instance with parameters uniform in the family ranges."""
    if not 0 <= family < N_FAMILIES:
        raise ValueError(f"unknown family index {family}")
    spec = FAMILIES[family]
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), family]))
    lo, hi = _length_interval(spec, param_region)
    for _ in range(1000):
        start = rng.uniform(0.05, 0.95, size=2)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        length = rng.uniform(lo, hi)
        direction = np.array([np.cos(angle), np.sin(angle)])
        goal = start + length * direction
        if np.all((goal >= 0.05) & (goal <= 0.95)):
            break
    else:
        raise RuntimeError("could not place task inside the workspace")
    bend = rng.uniform(*spec.bend_range)
    perp = np.array([-direction[1], direction[0]])
    via = (start + goal) / 2.0 + bend * length * perp
    if task_id is None:
        task_id = f"{spec.name}-{seed}"
    return TaskDescriptor(family=family, task_id=task_id, start=start, goal=goal,
                          via=via, scale=float(length), seed=int(seed))


# trailing fraction of each demonstration spent settled at the goal; the
# min-jerk profile ends with zero velocity and acceleration, so the dwell
# joins the motion smoothly
DWELL_FRACTION = 0.3


def _minjerk(u: np.ndarray) -> np.ndarray:
    return 10.0 * u**3 - 15.0 * u**4 + 6.0 * u**5


def _progress_profile(u: np.ndarray) -> np.ndarray:
    """Min-jerk progress that completes early and dwells at the goal."""
    return _minjerk(np.minimum(u / (1.0 - DWELL_FRACTION), 1.0))


def _bezier(task: TaskDescriptor, s: np.ndarray) -> np.ndarray:
    s = s[:, None]
    return ((1.0 - s) ** 2 * task.start
            + 2.0 * s * (1.0 - s) * task.via
            + s**2 * task.goal)


# smooth per-demonstration variation: number of sine modes and their scale
_WOBBLE_MODES = 3


def expert_trajectory(task: TaskDescriptor, length: int, noise_sigma: float = 0.0,
                      rng: np.random.Generator | None = None,
                      wobble_sigma: float = 0.0) -> np.ndarray:
    """Smooth demonstration of `length` steps from start to goal via the via point.

    Demonstrations of one task are not carbon copies: a zero-mean Gaussian
    wobble built from low-frequency sine modes (vanishing at both
    endpoints, so every demo still starts at the start and settles on the
    goal) gives each demo its own valid mid-path realization, on top of
    small white observation noise. Retrieval and the consistency residual
    have something real to say only because this spread exists.
    """
    if length < 2:
        raise ValueError("trajectory length must be >= 2")
    u = np.linspace(0.0, 1.0, length)
    path = _bezier(task, _progress_profile(u))
    if (noise_sigma > 0 or wobble_sigma > 0) and rng is None:
        raise ValueError("noisy trajectories need a generator")
    if wobble_sigma > 0:
        coeffs = rng.normal(0.0, 1.0, size=(_WOBBLE_MODES, path.shape[1]))
        modes = np.stack([np.sin((j + 1) * np.pi * u) / (j + 1)
                          for j in range(_WOBBLE_MODES)], axis=0)
        path = path + wobble_sigma * task.scale * np.einsum("ju,ja->ua", modes, coeffs)
    if noise_sigma > 0:
        path = path + rng.normal(0.0, noise_sigma, size=path.shape)
    return path


def curvature_bound(task: TaskDescriptor, length: int) -> float:
    """Bound on the second difference of the noise-free path.

    The path is B(sigma(u)) sampled at spacing h = 1/(length-1), so each
    second difference is h^2 times a second derivative, and
    |p''| <= |B''| sigma'^2 + |B'| sigma''. The goal dwell rescales the
    progress profile by 1/(1 - DWELL_FRACTION) in time.
    """
    leg = 2.0 * max(np.linalg.norm(task.via - task.start),
                    np.linalg.norm(task.goal - task.via))
    quad = 2.0 * np.linalg.norm(task.goal - 2.0 * task.via + task.start)
    stretch = 1.0 / (1.0 - DWELL_FRACTION)
    p2_max = quad * (_SIGMA_D1_MAX * stretch) ** 2 + leg * _SIGMA_D2_MAX * stretch**2
    return 1.05 * p2_max / (length - 1) ** 2


def observation(task: TaskDescriptor, position: np.ndarray) -> np.ndarray:
    """Current position plus the remaining offset to the goal."""
    p = np.asarray(position, dtype=np.float64)
    return np.concatenate([p, task.goal - p])


def featurize(task: TaskDescriptor, obs: np.ndarray) -> np.ndarray:
    """Deterministic context vector: family one-hot, parameters, observation."""
    onehot = np.zeros(N_FAMILIES)
    onehot[task.family] = 1.0
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (2 * ACTION_DIM,):
        raise ValueError(f"observation must have shape ({2 * ACTION_DIM},)")
    return np.concatenate([onehot, task.start, task.goal, task.via,
                           [task.scale], obs])
