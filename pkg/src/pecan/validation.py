"""Input validation helpers shared by the estimator and the service."""

from __future__ import annotations

import numpy as np

from .core import LabeledDataset, Trajectory, ValidationError


def as_trajectory_list(X) -> list:
    """Accept a LabeledDataset or any iterable of Trajectory."""
    if isinstance(X, LabeledDataset):
        return list(X.trajectories)
    items = list(X)
    for i, t in enumerate(items):
        if not isinstance(t, Trajectory):
            raise ValidationError(f"X[{i}] is not a Trajectory (got {type(t).__name__})")
    return items


def as_labeled_dataset(X, y=None, num_tasks: int | None = None) -> LabeledDataset:
    """Build a LabeledDataset from (X, y) in estimator style.

    X may already be a LabeledDataset (then y must be None); otherwise X is a
    sequence of Trajectory and y an optional sequence of StyleLabelGroup.
    """
    if isinstance(X, LabeledDataset):
        if y is not None:
            raise ValidationError("y must be None when X is already a LabeledDataset")
        return X
    trajs = as_trajectory_list(X)
    labels = tuple(y) if y is not None else ()
    if num_tasks is None:
        num_tasks = max((len(g.member_ids) for g in labels), default=1)
    return LabeledDataset(trajectories=trajs, labels=labels, num_tasks=num_tasks)


def check_latent_matrix(Z, d_tau: int, d_theta: int) -> np.ndarray:
    """Validate a (n, d_tau + d_theta) latent block: one-hot head, bounded tail."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[None, :]
    if Z.shape[1] != d_tau + d_theta:
        raise ValidationError(
            f"latent width {Z.shape[1]} != d_tau + d_theta = {d_tau + d_theta}"
        )
    head, tail = Z[:, :d_tau], Z[:, d_tau:]
    if not np.all(((head == 0) | (head == 1)) & np.isfinite(head)):
        raise ValidationError("task block must be exactly one-hot rows")
    if not np.all(head.sum(axis=1) == 1.0):
        raise ValidationError("task block rows must sum to 1")
    if not np.isfinite(tail).all() or np.abs(tail).max(initial=0.0) > 1.0:
        raise ValidationError("style block must lie in [-1, 1]")
    return Z
