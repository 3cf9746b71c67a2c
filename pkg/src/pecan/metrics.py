"""Evaluation suite for learned canonical spaces.

Metrics live on (model, eval_set) pairs where the eval set carries ground
truth task ids and style vectors. All functions are deterministic given a
model snapshot and eval set, and pure (no mutation).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, asdict

import numpy as np
from scipy import stats
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import pdist

from .core import LabeledDataset

METRIC_NAMES = ("task_accuracy", "trajectory_error", "inconsistency",
                "monotonicity", "disentanglement")


class MetricError(ValueError):
    """A metric cannot be computed on this eval set (fail loud, never 0)."""


@dataclass(frozen=True)
class EvalReport:
    """Per-seed metric bundle."""

    task_accuracy: float
    trajectory_error: float
    inconsistency: float
    monotonicity: float
    disentanglement: float
    seed: int
    n_eval: int

    def __post_init__(self):
        for name in METRIC_NAMES:
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} is not finite: {v}")
        if not 0.0 <= self.task_accuracy <= 1.0:
            raise ValueError(f"task_accuracy out of range: {self.task_accuracy}")
        if self.trajectory_error < 0 or self.inconsistency < 0:
            raise ValueError("error metrics must be non-negative")
        if not (0.0 <= self.monotonicity <= 1.0 and 0.0 <= self.disentanglement <= 1.0):
            raise ValueError("correlation metrics must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def spearman_rho(u, v) -> float:
    """Rank correlation with average ranks for ties; 0 for constant input."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1 or len(u) < 2:
        raise ValueError("need two equal-length vectors of size >= 2")
    if np.ptp(u) == 0 or np.ptp(v) == 0:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rho = stats.spearmanr(u, v).statistic
    return 0.0 if np.isnan(rho) else float(rho)


def pearson_rho(u, v) -> float:
    """Linear correlation; 0 when either input has zero variance."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1 or len(u) < 2:
        raise ValueError("need two equal-length vectors of size >= 2")
    if np.ptp(u) == 0 or np.ptp(v) == 0:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rho = stats.pearsonr(u, v).statistic
    return 0.0 if np.isnan(rho) else float(rho)


def task_accuracy(pred_one_hots: np.ndarray, true_tasks) -> float:
    """Accuracy under the best one-to-one assignment of latents to task ids."""
    pred_one_hots = np.asarray(pred_one_hots)
    true_tasks = np.asarray(true_tasks, dtype=np.intp)
    if len(pred_one_hots) != len(true_tasks):
        raise ValueError("prediction/label length mismatch")
    pred = np.argmax(pred_one_hots, axis=-1)
    d_latent = pred_one_hots.shape[-1]
    k = int(true_tasks.max()) + 1
    counts = np.zeros((d_latent, k))
    np.add.at(counts, (pred, true_tasks), 1.0)
    rows, cols = linear_sum_assignment(counts, maximize=True)
    return float(counts[rows, cols].sum() / len(true_tasks))


def _require_specs(eval_set: LabeledDataset, metric: str):
    if eval_set.specs is None:
        raise MetricError(f"{metric} requires ground-truth specs on the eval set")
    return np.array([s.task_id for s in eval_set.specs]), \
        np.stack([s.style for s in eval_set.specs])


def _encode(model, eval_set: LabeledDataset):
    X = model.prepare_batch(eval_set.trajectories)
    return X, model.encode_task_flat(X), model.encode_style_flat(X)


def model_task_accuracy(model, eval_set: LabeledDataset) -> float:
    tasks, _ = _require_specs(eval_set, "task_accuracy")
    _, z_tau, _ = _encode(model, eval_set)
    return task_accuracy(z_tau, tasks)


def trajectory_error(model, eval_set: LabeledDataset) -> float:
    """Mean over trajectories of per-element squared error, normalized space."""
    X, z_tau, z_theta = _encode(model, eval_set)
    recon, _ = model.decoder.forward(np.hstack([z_tau, z_theta]))
    return float(((recon - X) ** 2).mean(axis=1).mean())


def inconsistency(model, eval_set: LabeledDataset) -> float:
    """Mean latent style distance over exact-style, different-task pairs."""
    tasks, styles = _require_specs(eval_set, "inconsistency")
    _, _, z_theta = _encode(model, eval_set)
    by_style: dict = {}
    for i, s in enumerate(map(tuple, styles)):
        by_style.setdefault(s, []).append(i)
    gaps = []
    for members in by_style.values():
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                i, j = members[a], members[b]
                if tasks[i] != tasks[j]:
                    gaps.append(np.linalg.norm(z_theta[i] - z_theta[j]))
    if not gaps:
        raise MetricError("no cross-task pairs with exactly equal styles in eval set")
    return float(np.mean(gaps))


def monotonicity(model, eval_set: LabeledDataset) -> float:
    """|Spearman| between pairwise style distances and latent style distances.

    Style dimensions are scaled to unit range over the eval set first, so the
    metric is insensitive to measurement units (km/h vs feet).
    """
    _, styles = _require_specs(eval_set, "monotonicity")
    if len(eval_set) < 3:
        raise MetricError("monotonicity needs at least 3 eval trajectories")
    _, _, z_theta = _encode(model, eval_set)
    spans = np.ptp(styles, axis=0)
    spans[spans == 0] = 1.0
    d_style = pdist(styles / spans)
    d_latent = pdist(np.atleast_2d(z_theta))
    return abs(spearman_rho(d_style, d_latent))


def disentanglement(model, eval_set: LabeledDataset) -> float:
    """Best injective alignment of latent dims to style dims by mean |Pearson|."""
    _, styles = _require_specs(eval_set, "disentanglement")
    _, _, z_theta = _encode(model, eval_set)
    z_theta = np.atleast_2d(z_theta)
    d_latent, d_style = z_theta.shape[1], styles.shape[1]
    corr = np.zeros((d_latent, d_style))
    for i in range(d_latent):
        for j in range(d_style):
            corr[i, j] = abs(pearson_rho(z_theta[:, i], styles[:, j]))
    rows, cols = linear_sum_assignment(corr, maximize=True)
    return float(corr[rows, cols].sum() / min(d_latent, d_style))


def evaluate(model, eval_set: LabeledDataset, seed: int = 0) -> EvalReport:
    """All five metrics on one eval set."""
    return EvalReport(
        task_accuracy=model_task_accuracy(model, eval_set),
        trajectory_error=trajectory_error(model, eval_set),
        inconsistency=inconsistency(model, eval_set),
        monotonicity=monotonicity(model, eval_set),
        disentanglement=disentanglement(model, eval_set),
        seed=seed,
        n_eval=len(eval_set),
    )
