"""Synthetic environments and dataset builders.

Two worlds:

* driving — a point-mass ego car with a trapezoidal speed profile across two
  tasks (following a lead car on a highway; yielding to a crossing car at an
  intersection). Styles are the cruise-speed cap (km/h) and the minimum gap
  the car keeps from other vehicles (feet).
* polynomial — curves y = (sum_i a_i x^i) * b over a fixed x range; the sign
  b is the task and the coefficient vector is the style.

Generators are pure functions of their arguments; the ground-truth style
attached to each trajectory equals the controller/polynomial parameters
exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from .core import LabeledDataset, StyleLabelGroup, StyleSpec, Trajectory, ValidationError

# Driving world constants
HIGHWAY, INTERSECTION = 0, 1
DRIVING_TASK_NAMES = ("highway", "intersection")
DT = 0.1                       # seconds per raw step
KMH_TO_MS = 1.0 / 3.6
FT_TO_M = 0.3048
V_MAX_RANGE = (40.0, 100.0)    # km/h
D_MIN_RANGE = (10.0, 30.0)     # feet
ACCEL = 6.0                    # m/s^2
BRAKE = 8.0                    # m/s^2, comfort braking for the approach rule
SENSOR_RANGE = 200.0           # m; a lead car farther than this is ignored
EGO_START_Y = -60.0            # m, approach start shared by both tasks
LEAD_SPEED = 30.0 * KMH_TO_MS  # highway lead car cruises at a fixed speed
GAP_D_MULT = 12.0              # drivers with a larger gap preference start farther back
GAP_BASE = 4.0                 # m
CROSS_SPEED = 30.0 * KMH_TO_MS
CROSS_WAIT = 1.5               # s the ego holds at the stop point
CLEAR_MULT = 6.0               # clearance margin before entering, in gap-preference units

FIXED_D_MIN = 20.0             # feet, used when the style is 1D (speed only)

POLY_X_RANGE = (-1.0, 1.0)
POLY_GRID_VALUES = (-1.0, 0.0, 1.0)
POLY_SAMPLES = 20


@dataclass(frozen=True)
class DrivingStyle:
    """v_max in km/h, d_min in feet."""

    v_max: float
    d_min: float

    def clamped(self) -> "DrivingStyle":
        return DrivingStyle(
            v_max=float(np.clip(self.v_max, *V_MAX_RANGE)),
            d_min=float(np.clip(self.d_min, *D_MIN_RANGE)),
        )


@dataclass(frozen=True)
class PolySpec:
    """Task sign b in {+1, -1} and polynomial coefficients a_0..a_n."""

    b: int
    coeffs: tuple

    def __post_init__(self):
        if self.b not in (1, -1):
            raise ValidationError(f"b must be +1 or -1, got {self.b}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def task_id(self) -> int:
        return 0 if self.b == 1 else 1


@dataclass(frozen=True)
class DatasetSpec:
    """What to generate: environment, style dimensionality, counts, labeling."""

    environment: str = "driving"     # driving | polynomial
    style_dims: int = 2
    total: int = 16                  # training demonstrations
    grid_resolution: int = 9         # grid points per style dim (driving)
    label_mode: str = "extremes"     # extremes | intermediates | none
    seed: int = 0
    horizon: int = 100               # raw rollout steps (driving)

    def __post_init__(self):
        if self.environment not in ("driving", "polynomial"):
            raise ValidationError(f"unknown environment '{self.environment}'")
        if self.label_mode not in ("extremes", "intermediates", "none"):
            raise ValidationError(f"unknown label_mode '{self.label_mode}'")
        if self.environment == "driving":
            if self.style_dims not in (1, 2):
                raise ValidationError("driving styles are 1D or 2D")
            if self.total % 2 != 0:
                raise ValidationError("driving demo count must split evenly across 2 tasks")
            if self.total < 2 * self.num_extremes:
                raise ValidationError(
                    f"need at least {2 * self.num_extremes} demos to cover "
                    f"{self.num_extremes} extreme styles in both tasks"
                )
        else:
            if not 1 <= self.style_dims <= 8:
                raise ValidationError("polynomial style_dims out of supported range")
            if self.total < self.num_extremes:
                raise ValidationError("demo count below the number of style extremes")

    @property
    def num_extremes(self) -> int:
        return 2 ** self.style_dims


def polynomial_spec(style_dims: int = 4, seed: int = 0,
                    label_mode: str = "extremes") -> DatasetSpec:
    """Appendix-style polynomial spec: half the style grid as training demos."""
    total = 3 ** style_dims // 2
    return DatasetSpec(environment="polynomial", style_dims=style_dims, total=total,
                       grid_resolution=3, label_mode=label_mode, seed=seed,
                       horizon=POLY_SAMPLES)


# ---------------------------------------------------------------------------
# Rollouts


def _speed_step(v_prev: float, v_des: float) -> float:
    return float(np.clip(v_des, v_prev - BRAKE * DT, v_prev + ACCEL * DT))


def _stop_point_arrival(v_cap: float, gap_floor: float) -> float:
    """Unobstructed travel time from the approach start to the stop point."""
    dist = -EGO_START_Y - gap_floor
    brake_dist = v_cap * v_cap / (2 * BRAKE)
    if brake_dist >= dist:
        return float(np.sqrt(2 * dist / BRAKE))  # brakes the whole way
    return (dist - brake_dist) / v_cap + v_cap / BRAKE


def simulate_driving(task, style: DrivingStyle, horizon: int = 100,
                     lead_gap: float | None = None):
    """Deterministic kinematic rollout. Returns (Trajectory, StyleSpec).

    State per step is [x_ego, y_ego, x_other, y_other] in meters; the action
    is the ego displacement [dx, dy] per step. The controller caps speed at
    v_max and never lets the gap to the other car drop below d_min.

    Highway: the ego closes in on a slower lead car and settles toward its
    preferred gap; drivers who keep larger gaps also start proportionally
    farther back. Pass `lead_gap` to override the initial separation (e.g.
    beyond sensor range). Intersection: a crossing car is timed so every
    style briefly yields at its stop point before proceeding once the
    crossing car has cleared by a margin proportional to the gap preference.
    """
    if isinstance(task, str):
        task = DRIVING_TASK_NAMES.index(task)
    style = style.clamped()
    v_cap = style.v_max * KMH_TO_MS
    gap_floor = style.d_min * FT_TO_M

    states = np.zeros((horizon, 4))
    actions = np.zeros((horizon, 2))

    # The ego car is northbound on the x=0 lane in both tasks; the tasks
    # differ in what the other car does (leads the lane vs crosses it).
    if task == HIGHWAY:
        gap0 = GAP_D_MULT * gap_floor + GAP_BASE if lead_gap is None else float(lead_gap)
        ego, lead, v = EGO_START_Y, EGO_START_Y + gap0, v_cap
        for t in range(horizon):
            gap = lead - ego
            if gap > SENSOR_RANGE:
                v_des = v_cap
            else:
                v_des = min(v_cap, LEAD_SPEED + np.sqrt(2 * BRAKE * max(0.0, gap - gap_floor)))
            v_next = _speed_step(v, v_des)
            # hard safety clamp: the post-step gap never drops below d_min
            v_next = min(v_next, LEAD_SPEED + (gap - gap_floor) / DT)
            v = max(0.0, v_next)
            states[t] = (0.0, ego, 0.0, lead)
            actions[t] = (0.0, v * DT)
            ego += v * DT
            lead += LEAD_SPEED * DT
    elif task == INTERSECTION:
        # time the crossing car so it reaches the clearance margin CROSS_WAIT
        # seconds after the ego could reach its stop point
        t_arrive = _stop_point_arrival(v_cap, gap_floor)
        clear_at = CLEAR_MULT * gap_floor
        other0 = clear_at - CROSS_SPEED * (t_arrive + CROSS_WAIT)
        ego, other, v = EGO_START_Y, other0, v_cap
        for t in range(horizon):
            cleared = other > clear_at
            if cleared:
                v_des = v_cap
            else:
                dist = -ego  # distance to the conflict point
                v_des = min(v_cap, np.sqrt(2 * BRAKE * max(0.0, dist - gap_floor)))
            v_next = _speed_step(v, v_des)
            if not cleared:
                v_next = min(v_next, (-ego - gap_floor) / DT)
            v = max(0.0, v_next)
            states[t] = (0.0, ego, other, 0.0)
            actions[t] = (0.0, v * DT)
            ego += v * DT
            other += CROSS_SPEED * DT
    else:
        raise ValidationError(f"unknown driving task {task}")

    traj = Trajectory(states=states, actions=actions)
    spec = StyleSpec(task_id=task, style=np.array([style.v_max, style.d_min]))
    return traj, spec


def gen_polynomial(spec: PolySpec, samples: int = POLY_SAMPLES):
    """Curve rollout: states (x, y); actions are consecutive state deltas."""
    x = np.linspace(*POLY_X_RANGE, samples)
    y = np.polynomial.polynomial.polyval(x, np.asarray(spec.coeffs)) * spec.b
    states = np.column_stack([x, y])
    actions = np.zeros_like(states)
    actions[:-1] = np.diff(states, axis=0)  # final step holds position
    traj = Trajectory(states=states, actions=actions)
    return traj, StyleSpec(task_id=spec.task_id, style=np.array(spec.coeffs))


# ---------------------------------------------------------------------------
# Style grids


def style_grid(spec: DatasetSpec) -> np.ndarray:
    """All grid style vectors, row-major over dimensions, shape (P, style_dims)."""
    if spec.environment == "driving":
        axes = [np.linspace(*V_MAX_RANGE, spec.grid_resolution)]
        if spec.style_dims == 2:
            axes.append(np.linspace(*D_MIN_RANGE, spec.grid_resolution))
    else:
        axes = [np.array(POLY_GRID_VALUES)] * spec.style_dims
    return np.array(list(itertools.product(*axes)))


def _is_corner(style: np.ndarray, grid: np.ndarray) -> bool:
    lo, hi = grid.min(axis=0), grid.max(axis=0)
    return bool(np.all((style == lo) | (style == hi)))


def _corner_styles(grid: np.ndarray) -> np.ndarray:
    lo, hi = grid.min(axis=0), grid.max(axis=0)
    return np.array(list(itertools.product(*zip(lo, hi))))


def _quarter_styles(grid: np.ndarray) -> np.ndarray:
    """Midpoints between each corner and the grid center (intermediate styles)."""
    lo, hi = grid.min(axis=0), grid.max(axis=0)
    q1 = lo + (hi - lo) * 0.25
    q3 = lo + (hi - lo) * 0.75
    return np.array(list(itertools.product(*zip(q1, q3))))


def _make_driving(style: np.ndarray, task: int, horizon: int):
    if style.shape[0] == 1:
        ds = DrivingStyle(v_max=float(style[0]), d_min=FIXED_D_MIN)
    else:
        ds = DrivingStyle(v_max=float(style[0]), d_min=float(style[1]))
    traj, spec = simulate_driving(task, ds, horizon=horizon)
    # 1D variants report only the varied dimension as ground truth
    if style.shape[0] == 1:
        spec = StyleSpec(task_id=spec.task_id, style=style.copy())
    return traj, spec


def _make_poly(style: np.ndarray, task: int, samples: int):
    return gen_polynomial(PolySpec(b=1 if task == 0 else -1, coeffs=tuple(style)),
                          samples=samples)


def _make(spec: DatasetSpec, style: np.ndarray, task: int):
    if spec.environment == "driving":
        return _make_driving(style, task, spec.horizon)
    return _make_poly(style, task, spec.horizon)


# ---------------------------------------------------------------------------
# Dataset builders


def build_eval_set(spec: DatasetSpec) -> LabeledDataset:
    """Every grid style in every task, unlabeled, with ground-truth specs.

    Guarantees exact cross-task style matches for the consistency metric.
    """
    trajs, specs = [], []
    for style in style_grid(spec):
        for task in range(2):
            traj, ss = _make(spec, style, task)
            trajs.append(traj)
            specs.append(ss)
    return LabeledDataset(trajectories=trajs, labels=(), num_tasks=2, specs=specs)


def _sample_intermediates(spec: DatasetSpec, count_per_task: int,
                          exclude: np.ndarray, rng: np.random.Generator):
    """Per-task random draw of grid styles outside `exclude`, without replacement."""
    grid = style_grid(spec)
    mask = np.ones(len(grid), dtype=bool)
    for row in exclude:
        mask &= ~np.all(grid == row, axis=1)
    pool = grid[mask]
    if count_per_task > len(pool):
        raise ValidationError(
            f"cannot draw {count_per_task} distinct intermediate styles "
            f"from a pool of {len(pool)}"
        )
    picks = []
    for _task in range(2):
        idx = rng.choice(len(pool), size=count_per_task, replace=False)
        picks.append(pool[idx])
    return picks


def build_dataset(spec: DatasetSpec) -> LabeledDataset:
    """Training set: labeled style anchors plus random intermediate styles."""
    if spec.environment == "driving":
        return _build_driving_train(spec)
    return _build_polynomial_train(spec)


def _build_driving_train(spec: DatasetSpec) -> LabeledDataset:
    rng = np.random.default_rng(spec.seed)
    grid = style_grid(spec)
    if spec.label_mode == "intermediates":
        anchors = _quarter_styles(grid)
    else:
        anchors = _corner_styles(grid)
    m = len(anchors)
    trajs, specs, labels = [], [], []
    for c, style in enumerate(anchors):
        members = []
        for task in range(2):
            traj, ss = _make(spec, style, task)
            members.append(len(trajs))
            trajs.append(traj)
            specs.append(ss)
        labels.append(StyleLabelGroup(class_index=c, member_ids=tuple(members),
                                      num_classes=m))
    per_task = spec.total // 2 - m
    for task, styles in enumerate(_sample_intermediates(spec, per_task, anchors, rng)):
        for style in styles:
            traj, ss = _make(spec, style, task)
            trajs.append(traj)
            specs.append(ss)
    ds = LabeledDataset(trajectories=trajs, labels=labels, num_tasks=2, specs=specs)
    if spec.label_mode == "none":
        ds = ds.without_labels()
    return ds


def _build_polynomial_train(spec: DatasetSpec) -> LabeledDataset:
    rng = np.random.default_rng(spec.seed)
    grid = style_grid(spec)
    corners = _corner_styles(grid)
    if spec.label_mode == "intermediates":
        anchors = _quarter_styles(grid)
    else:
        anchors = corners
    m = len(anchors)
    trajs, specs, labels = [], [], []
    # one anchor demonstration per extreme, alternating tasks across corners
    for c, style in enumerate(anchors):
        task = c % 2
        traj, ss = _make(spec, style, task)
        labels.append(StyleLabelGroup(class_index=c, member_ids=(len(trajs),),
                                      num_classes=m))
        trajs.append(traj)
        specs.append(ss)
    remaining = spec.total - m
    if remaining < 0:
        raise ValidationError("demo count below the number of style extremes")
    mask = np.ones(len(grid), dtype=bool)
    for row in anchors:
        mask &= ~np.all(grid == row, axis=1)
    pool = grid[mask]
    idx = rng.choice(len(pool), size=min(remaining, len(pool)), replace=False)
    extra = list(pool[idx])
    while len(extra) < remaining:  # tiny grids may need repeats
        extra.append(pool[rng.integers(len(pool))])
    for i, style in enumerate(extra):
        traj, ss = _make(spec, np.asarray(style), i % 2)
        trajs.append(traj)
        specs.append(ss)
    ds = LabeledDataset(trajectories=trajs, labels=labels, num_tasks=2, specs=specs)
    if spec.label_mode == "none":
        ds = ds.without_labels()
    return ds


def sweep_datasets(base: DatasetSpec, sizes) -> list:
    """Nested training sets: shared extreme demos, growing random intermediates."""
    sizes = list(sizes)
    anchor_count = 2 * base.num_extremes
    for size in sizes:
        if size < anchor_count:
            raise ValidationError(f"size {size} below extreme demo count {anchor_count}")
        if size % 2 != 0:
            raise ValidationError("sizes must split evenly across 2 tasks")
    big = replace(base, total=max(sizes))
    full = build_dataset(big)
    out = []
    for size in sizes:
        per_task = (size - anchor_count) // 2
        keep = list(range(anchor_count))
        # intermediates of task 0 follow the anchors, then task 1's block
        half = (max(sizes) - anchor_count) // 2
        keep += list(range(anchor_count, anchor_count + per_task))
        keep += list(range(anchor_count + half, anchor_count + half + per_task))
        trajs = [full.trajectories[i] for i in keep]
        specs = [full.specs[i] for i in keep]
        out.append(LabeledDataset(trajectories=trajs, labels=full.labels,
                                  num_tasks=2, specs=specs))
    return out
