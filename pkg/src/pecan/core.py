"""Domain types and versioned JSON serialization for datasets and checkpoints.

Trajectories are stored at full resolution; downsampling to the model's
waypoint count happens at model-input time. All containers are immutable
after construction so snapshots can be shared freely across evaluators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

DATASET_VERSION = 1
CHECKPOINT_VERSION = 1


class SchemaError(ValueError):
    """A file does not match the expected schema (bad field, bad JSON)."""


class ValidationError(ValueError):
    """Structurally well-formed data violates a domain invariant."""


class VersionError(SchemaError):
    """File format version is incompatible with this code."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Trajectory:
    """Fixed-length sequence of state-action pairs.

    states:  (T, state_dim) array in environment units.
    actions: (T, action_dim) array, displacement per step.
    """

    states: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "states", _readonly(np.atleast_2d(self.states)))
        object.__setattr__(self, "actions", _readonly(np.atleast_2d(self.actions)))
        if self.states.shape[0] != self.actions.shape[0]:
            raise ValidationError(
                f"states ({self.states.shape[0]}) and actions "
                f"({self.actions.shape[0]}) must have equal length"
            )
        if self.states.shape[0] < 2:
            raise ValidationError("trajectory needs at least 2 steps")
        if not (np.isfinite(self.states).all() and np.isfinite(self.actions).all()):
            raise ValidationError("trajectory contains non-finite entries")

    @property
    def horizon(self) -> int:
        return self.states.shape[0]

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    @property
    def action_dim(self) -> int:
        return self.actions.shape[1]

    def flatten(self) -> np.ndarray:
        """Row-per-step [state, action] layout, flattened to 1D."""
        return np.hstack([self.states, self.actions]).ravel()

    @staticmethod
    def unflatten(v: np.ndarray, horizon: int, state_dim: int, action_dim: int) -> "Trajectory":
        v = np.asarray(v, dtype=np.float64)
        width = state_dim + action_dim
        if v.size != horizon * width:
            raise ValidationError(
                f"flat vector of size {v.size} does not match "
                f"{horizon}x({state_dim}+{action_dim})"
            )
        rows = v.reshape(horizon, width)
        return Trajectory(states=rows[:, :state_dim], actions=rows[:, state_dim:])

    def downsample(self, waypoints: int) -> "Trajectory":
        """Linear interpolation per dimension onto `waypoints` uniform indices."""
        if waypoints == self.horizon:
            return self
        src = np.arange(self.horizon, dtype=np.float64)
        dst = np.linspace(0.0, self.horizon - 1, waypoints)
        states = np.column_stack([np.interp(dst, src, self.states[:, j])
                                  for j in range(self.state_dim)])
        actions = np.column_stack([np.interp(dst, src, self.actions[:, j])
                                   for j in range(self.action_dim)])
        return Trajectory(states=states, actions=actions)


@dataclass(frozen=True)
class StyleSpec:
    """Ground-truth task id and style vector. Evaluation-only metadata."""

    task_id: int
    style: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "style", _readonly(np.atleast_1d(self.style)))
        if self.task_id < 0:
            raise ValidationError(f"task_id must be non-negative, got {self.task_id}")
        if not np.isfinite(self.style).all():
            raise ValidationError("style contains non-finite entries")


@dataclass(frozen=True)
class StyleLabelGroup:
    """One style class: trajectories judged to share the same (extreme) style."""

    class_index: int
    member_ids: tuple
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "member_ids", tuple(sorted(int(i) for i in self.member_ids)))
        if not self.member_ids:
            raise ValidationError(f"label group {self.class_index} has no members")
        if not 0 <= self.class_index < self.num_classes:
            raise ValidationError(
                f"class_index {self.class_index} outside [0, {self.num_classes})"
            )

    @property
    def one_hot(self) -> np.ndarray:
        code = np.zeros(self.num_classes)
        code[self.class_index] = 1.0
        return code


@dataclass(frozen=True)
class LabeledDataset:
    """Demonstrations plus style-extreme label groups.

    `specs` is ground truth attached by generators for evaluation only;
    training code paths never read it.
    """

    trajectories: tuple
    labels: tuple
    num_tasks: int
    specs: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.specs is not None:
            object.__setattr__(self, "specs", tuple(self.specs))
        n = len(self.trajectories)
        if self.specs is not None and len(self.specs) != n:
            raise ValidationError(
                f"specs length {len(self.specs)} != number of trajectories {n}"
            )
        seen: dict[int, int] = {}
        for group in self.labels:
            for i in group.member_ids:
                if not 0 <= i < n:
                    raise ValidationError(
                        f"label group {group.class_index} references trajectory {i} "
                        f"outside dataset of size {n}"
                    )
                if i in seen:
                    raise ValidationError(
                        f"trajectory {i} appears in label groups {seen[i]} "
                        f"and {group.class_index}"
                    )
                seen[i] = group.class_index
            if self.specs is not None:
                tasks = [self.specs[i].task_id for i in group.member_ids]
                if len(set(tasks)) != len(tasks):
                    raise ValidationError(
                        f"label group {group.class_index} has two members from task "
                        f"{max(set(tasks), key=tasks.count)}; labels must span tasks"
                    )
        if self.specs is not None:
            for i, spec in enumerate(self.specs):
                if spec.task_id >= self.num_tasks:
                    raise ValidationError(
                        f"spec {i} has task_id {spec.task_id} >= num_tasks {self.num_tasks}"
                    )

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def num_classes(self) -> int:
        return self.labels[0].num_classes if self.labels else 0

    def without_labels(self) -> "LabeledDataset":
        return LabeledDataset(trajectories=self.trajectories, labels=(),
                              num_tasks=self.num_tasks, specs=self.specs)


@dataclass(frozen=True)
class TrajShape:
    """Model-input trajectory geometry (after downsampling)."""

    horizon: int
    state_dim: int
    action_dim: int

    @property
    def flat_dim(self) -> int:
        return self.horizon * (self.state_dim + self.action_dim)


@dataclass(frozen=True)
class Checkpoint:
    """Parameter tensors, latent dims, normalization constants, and metadata."""

    d_tau: int
    d_theta: int
    traj_shape: TrajShape
    norm_offset: np.ndarray
    norm_scale: np.ndarray
    params: dict
    seed: int
    meta: dict = field(default_factory=dict)
    version: int = CHECKPOINT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "norm_offset", _readonly(self.norm_offset))
        object.__setattr__(self, "norm_scale", _readonly(self.norm_scale))
        object.__setattr__(
            self, "params", {k: _readonly(v) for k, v in self.params.items()}
        )
        flat = self.traj_shape.flat_dim
        if self.norm_offset.shape != (flat,) or self.norm_scale.shape != (flat,):
            raise ValidationError(
                f"normalization constants must have shape ({flat},), got "
                f"{self.norm_offset.shape} / {self.norm_scale.shape}"
            )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Checkpoint):
            return NotImplemented
        return (
            self.version == other.version
            and self.d_tau == other.d_tau
            and self.d_theta == other.d_theta
            and self.traj_shape == other.traj_shape
            and self.seed == other.seed
            and self.meta == other.meta
            and np.array_equal(self.norm_offset, other.norm_offset)
            and np.array_equal(self.norm_scale, other.norm_scale)
            and set(self.params) == set(other.params)
            and all(np.array_equal(self.params[k], other.params[k]) for k in self.params)
        )


# ---------------------------------------------------------------------------
# JSON schemas


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise SchemaError(f"{where}: missing field '{key}'")
    return obj[key]


def _load_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        with open(path) as f:
            obj = json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: top-level value must be an object")
    return obj


def _dump_json(obj: dict, path) -> None:
    # sort_keys + fixed separators: saving the same object twice is byte-identical
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, separators=(",", ":"))


def dataset_to_dict(ds: LabeledDataset) -> dict:
    return {
        "version": DATASET_VERSION,
        "num_tasks": ds.num_tasks,
        "trajectories": [
            {"states": t.states.tolist(), "actions": t.actions.tolist()}
            for t in ds.trajectories
        ],
        "specs": None if ds.specs is None else [
            {"task_id": s.task_id, "style": s.style.tolist()} for s in ds.specs
        ],
        "labels": [
            {"class_index": g.class_index, "members": list(g.member_ids)}
            for g in ds.labels
        ],
    }


def dataset_from_dict(obj: dict, where: str = "dataset") -> LabeledDataset:
    version = _require(obj, "version", where)
    if version != DATASET_VERSION:
        raise VersionError(f"{where}: version {version} != supported {DATASET_VERSION}")
    num_tasks = _require(obj, "num_tasks", where)
    raw_trajs = _require(obj, "trajectories", where)
    trajs = []
    for i, t in enumerate(raw_trajs):
        states = _require(t, "states", f"{where}.trajectories[{i}]")
        actions = _require(t, "actions", f"{where}.trajectories[{i}]")
        try:
            trajs.append(Trajectory(states=np.array(states), actions=np.array(actions)))
        except (ValueError, ValidationError) as e:
            raise ValidationError(f"{where}.trajectories[{i}]: {e}") from e
    raw_specs = _require(obj, "specs", where)
    specs = None
    if raw_specs is not None:
        specs = [
            StyleSpec(task_id=int(_require(s, "task_id", f"{where}.specs[{i}]")),
                      style=np.array(_require(s, "style", f"{where}.specs[{i}]")))
            for i, s in enumerate(raw_specs)
        ]
    raw_labels = _require(obj, "labels", where)
    m = len(raw_labels)
    labels = [
        StyleLabelGroup(
            class_index=int(_require(g, "class_index", f"{where}.labels[{i}]")),
            member_ids=tuple(_require(g, "members", f"{where}.labels[{i}]")),
            num_classes=m,
        )
        for i, g in enumerate(raw_labels)
    ]
    return LabeledDataset(trajectories=trajs, labels=labels,
                          num_tasks=int(num_tasks), specs=specs)


def load_dataset(path) -> LabeledDataset:
    return dataset_from_dict(_load_json(path), where=str(path))


def save_dataset(ds: LabeledDataset, path) -> None:
    _dump_json(dataset_to_dict(ds), path)


def checkpoint_to_dict(ckpt: Checkpoint) -> dict:
    return {
        "version": ckpt.version,
        "d_tau": ckpt.d_tau,
        "d_theta": ckpt.d_theta,
        "traj_shape": {
            "horizon": ckpt.traj_shape.horizon,
            "state_dim": ckpt.traj_shape.state_dim,
            "action_dim": ckpt.traj_shape.action_dim,
        },
        "norm": {
            "offset": ckpt.norm_offset.tolist(),
            "scale": ckpt.norm_scale.tolist(),
        },
        "params": {
            name: {"shape": list(p.shape), "data": p.ravel().tolist()}
            for name, p in ckpt.params.items()
        },
        "seed": ckpt.seed,
        "meta": ckpt.meta,
    }


def checkpoint_from_dict(obj: dict, where: str = "checkpoint") -> Checkpoint:
    version = _require(obj, "version", where)
    if version != CHECKPOINT_VERSION:
        raise VersionError(f"{where}: version {version} != supported {CHECKPOINT_VERSION}")
    shape = _require(obj, "traj_shape", where)
    traj_shape = TrajShape(
        horizon=int(_require(shape, "horizon", f"{where}.traj_shape")),
        state_dim=int(_require(shape, "state_dim", f"{where}.traj_shape")),
        action_dim=int(_require(shape, "action_dim", f"{where}.traj_shape")),
    )
    norm = _require(obj, "norm", where)
    params = {}
    for name, p in _require(obj, "params", where).items():
        data = np.array(_require(p, "data", f"{where}.params[{name}]"), dtype=np.float64)
        shape_ = _require(p, "shape", f"{where}.params[{name}]")
        if data.size != int(np.prod(shape_)):
            raise SchemaError(
                f"{where}.params[{name}]: data length {data.size} != shape {shape_}"
            )
        params[name] = data.reshape(shape_)
    return Checkpoint(
        d_tau=int(_require(obj, "d_tau", where)),
        d_theta=int(_require(obj, "d_theta", where)),
        traj_shape=traj_shape,
        norm_offset=np.array(_require(norm, "offset", f"{where}.norm")),
        norm_scale=np.array(_require(norm, "scale", f"{where}.norm")),
        params=params,
        seed=int(_require(obj, "seed", where)),
        meta=obj.get("meta", {}),
    )


def load_checkpoint(path) -> Checkpoint:
    return checkpoint_from_dict(_load_json(path), where=str(path))


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    _dump_json(checkpoint_to_dict(ckpt), path)


# ---------------------------------------------------------------------------
# Normalization: per-dimension min-max of flattened trajectories to [-1, 1]


def fit_normalizer(flat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Offset/scale so that (x - offset) / scale maps the data into [-1, 1].

    Constant dimensions get scale 1 (they normalize to exactly 0).
    """
    lo = flat.min(axis=0)
    hi = flat.max(axis=0)
    offset = (hi + lo) / 2.0
    scale = (hi - lo) / 2.0
    scale[scale == 0.0] = 1.0
    return offset, scale


def normalize(flat: np.ndarray, offset: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return (flat - offset) / scale


def denormalize(flat: np.ndarray, offset: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return flat * scale + offset
