"""Dual-encoder trajectory autoencoder with a style classifier.

A task encoder maps flattened trajectories to a discrete one-hot latent via
the straight-through Gumbel estimator; a style encoder maps them into a
tanh-bounded continuous cube (the canonical style space); a decoder
reconstructs trajectories from the pair; a single-layer classifier pushes
labeled style groups toward distinct corners. All networks train jointly on
summed reconstruction + cross-entropy losses with Adam.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Checkpoint, LabeledDataset, TrajShape, Trajectory, ValidationError
from .core import fit_normalizer, normalize, denormalize
from .nn import (
    Adam,
    GumbelConfig,
    Mlp,
    gumbel_st,
    gumbel_st_backward,
    sample_gumbel,
    softmax,
    softmax_ce,
)

DEFAULT_HIDDEN = 128
DEFAULT_WAYPOINTS = 20
ABLATION_MODES = ("pecan", "no_labels", "intermediate_labels")


class TrainingDiverged(RuntimeError):
    """Raised when the training loss becomes non-finite."""

    def __init__(self, epoch: int, traj_loss: float, ce_loss: float):
        super().__init__(
            f"non-finite loss at epoch {epoch} "
            f"(reconstruction={traj_loss}, cross-entropy={ce_loss})"
        )
        self.epoch = epoch
        self.traj_loss = traj_loss
        self.ce_loss = ce_loss


@dataclass
class TrainConfig:
    epochs: int = 5000
    lr: float = 0.0008
    lambda_traj: float = 1.0
    lambda_ce: float = 1.0
    seed: int = 0
    ablation_mode: str = "pecan"
    temperature: float = 1.0

    def __post_init__(self):
        if self.epochs < 0:
            raise ValidationError("epochs must be non-negative")
        if self.lambda_traj < 0 or self.lambda_ce < 0:
            raise ValidationError("loss weights must be non-negative")
        if self.ablation_mode not in ABLATION_MODES:
            raise ValidationError(f"unknown ablation_mode '{self.ablation_mode}'")


class StyleSpaceModel:
    """Parameter bundle: two encoders, decoder, classifier, and normalization."""

    def __init__(self, task_encoder: Mlp, style_encoder: Mlp, decoder: Mlp,
                 classifier: Mlp, traj_shape: TrajShape,
                 norm_offset: np.ndarray, norm_scale: np.ndarray,
                 seed: int = 0, meta: dict | None = None):
        self.task_encoder = task_encoder
        self.style_encoder = style_encoder
        self.decoder = decoder
        self.classifier = classifier
        self.traj_shape = traj_shape
        self.norm_offset = np.asarray(norm_offset, dtype=np.float64)
        self.norm_scale = np.asarray(norm_scale, dtype=np.float64)
        self.seed = seed
        self.meta = dict(meta or {})
        if decoder.input_dim != self.d_tau + self.d_theta:
            raise ValidationError(
                f"decoder input {decoder.input_dim} != d_tau+d_theta "
                f"{self.d_tau + self.d_theta}"
            )

    @property
    def d_tau(self) -> int:
        return self.task_encoder.output_dim

    @property
    def d_theta(self) -> int:
        return self.style_encoder.output_dim

    @property
    def num_classes(self) -> int:
        return self.classifier.output_dim

    @classmethod
    def init(cls, dataset: LabeledDataset, d_theta: int, d_tau: int | None = None,
             num_classes: int | None = None, hidden: int = DEFAULT_HIDDEN,
             waypoints: int = DEFAULT_WAYPOINTS, seed: int = 0,
             meta: dict | None = None) -> "StyleSpaceModel":
        """Fresh random-weight model sized for `dataset`, with normalization
        constants fitted to it."""
        first = dataset.trajectories[0]
        shape = TrajShape(horizon=waypoints, state_dim=first.state_dim,
                          action_dim=first.action_dim)
        flat = np.stack([t.downsample(waypoints).flatten() for t in dataset.trajectories])
        offset, scale = fit_normalizer(flat)
        d_tau = dataset.num_tasks if d_tau is None else d_tau
        m = num_classes if num_classes is not None else max(dataset.num_classes, 1)
        d = shape.flat_dim
        rng = np.random.default_rng(seed)
        task_encoder = Mlp([d, hidden, hidden, hidden, d_tau],
                           ["relu", "relu", "relu", "linear"])
        style_encoder = Mlp([d, hidden, hidden, hidden, d_theta],
                            ["relu", "relu", "relu", "tanh"])
        decoder = Mlp([d_tau + d_theta, hidden, hidden, hidden, d],
                      ["relu", "relu", "relu", "tanh"])
        classifier = Mlp([d_theta, m], ["linear"])
        for net in (task_encoder, style_encoder, decoder, classifier):
            net.init_params(rng)
        return cls(task_encoder, style_encoder, decoder, classifier, shape,
                   offset, scale, seed=seed, meta=meta)

    def copy(self) -> "StyleSpaceModel":
        return StyleSpaceModel(
            self.task_encoder.copy(), self.style_encoder.copy(),
            self.decoder.copy(), self.classifier.copy(), self.traj_shape,
            self.norm_offset.copy(), self.norm_scale.copy(),
            seed=self.seed, meta=dict(self.meta),
        )

    def networks(self) -> dict:
        return {
            "task_encoder": self.task_encoder,
            "style_encoder": self.style_encoder,
            "decoder": self.decoder,
            "classifier": self.classifier,
        }

    # -- model-input preparation ------------------------------------------

    def prepare(self, traj: Trajectory) -> np.ndarray:
        """Downsample, flatten, and normalize one trajectory."""
        if (traj.state_dim != self.traj_shape.state_dim
                or traj.action_dim != self.traj_shape.action_dim):
            raise ValidationError(
                f"trajectory dims ({traj.state_dim}, {traj.action_dim}) do not match "
                f"model ({self.traj_shape.state_dim}, {self.traj_shape.action_dim})"
            )
        flat = traj.downsample(self.traj_shape.horizon).flatten()
        return normalize(flat, self.norm_offset, self.norm_scale)

    def prepare_batch(self, trajectories) -> np.ndarray:
        return np.stack([self.prepare(t) for t in trajectories])

    # -- deterministic evaluation paths ------------------------------------

    def encode_task_flat(self, flat: np.ndarray) -> np.ndarray:
        """Pure argmax one-hot (no sampling noise); ties break to lowest index."""
        logits, _ = self.task_encoder.forward(flat)
        idx = np.argmax(logits, axis=-1)
        hard = np.zeros_like(logits)
        if logits.ndim == 1:
            hard[idx] = 1.0
        else:
            hard[np.arange(len(idx)), idx] = 1.0
        return hard

    def encode_style_flat(self, flat: np.ndarray) -> np.ndarray:
        z, _ = self.style_encoder.forward(flat)
        return z

    def encode_task(self, traj: Trajectory) -> np.ndarray:
        return self.encode_task_flat(self.prepare(traj))

    def encode_style(self, traj: Trajectory) -> np.ndarray:
        return self.encode_style_flat(self.prepare(traj))

    def decode_flat(self, z_tau: np.ndarray, z_theta: np.ndarray) -> np.ndarray:
        """Normalized reconstruction from validated latents."""
        z_tau = np.asarray(z_tau, dtype=np.float64)
        z_theta = np.asarray(z_theta, dtype=np.float64)
        check_one_hot(z_tau, self.d_tau)
        check_style_bounds(z_theta, self.d_theta)
        out, _ = self.decoder.forward(np.concatenate([z_tau, z_theta], axis=-1))
        return out

    def decode(self, z_tau: np.ndarray, z_theta: np.ndarray) -> Trajectory:
        """Decode to a trajectory in environment units."""
        flat = denormalize(self.decode_flat(z_tau, z_theta),
                           self.norm_offset, self.norm_scale)
        s = self.traj_shape
        return Trajectory.unflatten(flat, s.horizon, s.state_dim, s.action_dim)

    def decode_task(self, task_id: int, z_theta: np.ndarray) -> Trajectory:
        if not 0 <= task_id < self.d_tau:
            raise ValidationError(f"task_id {task_id} outside [0, {self.d_tau})")
        z_tau = np.zeros(self.d_tau)
        z_tau[task_id] = 1.0
        return self.decode(z_tau, z_theta)

    def classify_style(self, z_theta: np.ndarray) -> np.ndarray:
        logits, _ = self.classifier.forward(z_theta)
        return softmax(logits)

    # -- checkpointing ------------------------------------------------------

    def to_checkpoint(self) -> Checkpoint:
        params = {}
        for name, net in self.networks().items():
            for i, (w, b) in enumerate(zip(net.weights, net.biases)):
                params[f"{name}.L{i}.W"] = w.copy()
                params[f"{name}.L{i}.b"] = b.copy()
        return Checkpoint(
            d_tau=self.d_tau, d_theta=self.d_theta, traj_shape=self.traj_shape,
            norm_offset=self.norm_offset.copy(), norm_scale=self.norm_scale.copy(),
            params=params, seed=self.seed, meta=dict(self.meta),
        )

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "StyleSpaceModel":
        def layer_count(prefix):
            return sum(1 for k in ckpt.params if k.startswith(prefix) and k.endswith(".W"))

        def build(prefix, activations):
            n = layer_count(prefix)
            if n != len(activations):
                raise ValidationError(
                    f"checkpoint has {n} layers for {prefix}, expected {len(activations)}"
                )
            dims = [ckpt.params[f"{prefix}.L0.W"].shape[0]]
            for i in range(n):
                dims.append(ckpt.params[f"{prefix}.L{i}.W"].shape[1])
            net = Mlp(dims, list(activations))
            net.set_parameters(
                [ckpt.params[f"{prefix}.L{i}.{p}"].copy()
                 for i in range(n) for p in ("W", "b")]
            )
            return net

        deep = ["relu", "relu", "relu"]
        model = cls(
            task_encoder=build("task_encoder", deep + ["linear"]),
            style_encoder=build("style_encoder", deep + ["tanh"]),
            decoder=build("decoder", deep + ["tanh"]),
            classifier=build("classifier", ["linear"]),
            traj_shape=ckpt.traj_shape,
            norm_offset=ckpt.norm_offset.copy(),
            norm_scale=ckpt.norm_scale.copy(),
            seed=ckpt.seed, meta=dict(ckpt.meta),
        )
        if model.d_tau != ckpt.d_tau or model.d_theta != ckpt.d_theta:
            raise ValidationError("checkpoint latent dims disagree with parameter shapes")
        return model


def check_one_hot(z: np.ndarray, width: int) -> None:
    z = np.asarray(z)
    if z.shape[-1] != width:
        raise ValidationError(f"one-hot width {z.shape[-1]} != {width}")
    ok = np.all((z == 0.0) | (z == 1.0)) and np.all(z.sum(axis=-1) == 1.0)
    if not ok:
        raise ValidationError("task latent must be exactly one-hot")


def check_style_bounds(z: np.ndarray, width: int) -> None:
    z = np.asarray(z)
    if z.shape[-1] != width:
        raise ValidationError(f"style latent width {z.shape[-1]} != {width}")
    if not np.isfinite(z).all():
        raise ValidationError("style latent must be finite")
    bad = np.abs(z) > 1.0
    if bad.any():
        i = int(np.argmax(bad.ravel()))
        raise ValidationError(f"style latent component z[{i % width}] outside [-1, 1]")


def _labeled_arrays(dataset: LabeledDataset):
    """Indices and class targets of labeled trajectories (never touches specs)."""
    idx, targets = [], []
    for group in dataset.labels:
        for i in group.member_ids:
            idx.append(i)
            targets.append(group.class_index)
    return np.array(idx, dtype=np.intp), np.array(targets, dtype=np.intp)


def compute_losses(model: StyleSpaceModel, dataset: LabeledDataset,
                   lambda_traj: float = 1.0, lambda_ce: float = 1.0,
                   use_labels: bool = True):
    """Deterministic (argmax, no noise) loss report: (traj, ce, combined)."""
    X = model.prepare_batch(dataset.trajectories)
    z_tau = model.encode_task_flat(X)
    z_theta = model.encode_style_flat(X)
    recon, _ = model.decoder.forward(np.hstack([z_tau, z_theta]))
    l_traj = float(((recon - X) ** 2).sum())
    l_ce = 0.0
    if use_labels and dataset.labels:
        idx, targets = _labeled_arrays(dataset)
        logits, _ = model.classifier.forward(z_theta[idx])
        l_ce = float(softmax_ce(logits, targets)[0])
    return l_traj, l_ce, lambda_traj * l_traj + lambda_ce * l_ce


def train(model: StyleSpaceModel, dataset: LabeledDataset, cfg: TrainConfig):
    """Full-batch joint training. Returns (trained copy, loss history).

    Deterministic for a fixed seed; the input model is left untouched.
    """
    trained = model.copy()
    X = trained.prepare_batch(dataset.trajectories)
    use_labels = cfg.ablation_mode != "no_labels" and len(dataset.labels) > 0
    idx, targets = _labeled_arrays(dataset) if use_labels else (None, None)

    rng = np.random.default_rng(cfg.seed)
    task_enc, style_enc = trained.task_encoder, trained.style_encoder
    decoder, classifier = trained.decoder, trained.classifier
    params = (task_enc.parameters() + style_enc.parameters()
              + decoder.parameters() + classifier.parameters())
    opt = Adam(params, lr=cfg.lr)
    d_tau = trained.d_tau
    history = []

    for epoch in range(cfg.epochs):
        logits_tau, tape_t = task_enc.forward(X)
        noise = sample_gumbel(rng, logits_tau.shape)
        hard, soft = gumbel_st(
            logits_tau, GumbelConfig(temperature=cfg.temperature, noise=noise))
        z_theta, tape_s = style_enc.forward(X)
        dec_in = np.hstack([hard, z_theta])
        recon, tape_d = decoder.forward(dec_in)

        resid = recon - X
        l_traj = float((resid ** 2).sum())
        d_recon = (2.0 * cfg.lambda_traj) * resid
        dec_grads, d_dec_in = decoder.backward(tape_d, d_recon)
        d_hard = d_dec_in[:, :d_tau]
        d_z_theta = d_dec_in[:, d_tau:].copy()

        l_ce = 0.0
        if use_labels:
            logits_c, tape_c = classifier.forward(z_theta[idx])
            l_ce_raw, d_logits_c = softmax_ce(logits_c, targets)
            l_ce = float(l_ce_raw)
            cls_grads, d_z_labeled = classifier.backward(
                tape_c, cfg.lambda_ce * d_logits_c)
            np.add.at(d_z_theta, idx, d_z_labeled)
        else:
            cls_grads = [np.zeros_like(p) for p in classifier.parameters()]

        style_grads, _ = style_enc.backward(tape_s, d_z_theta)
        d_logits_tau = gumbel_st_backward(soft, d_hard, cfg.temperature)
        task_grads, _ = task_enc.backward(tape_t, d_logits_tau)

        total = cfg.lambda_traj * l_traj + cfg.lambda_ce * l_ce
        if not np.isfinite(total):
            raise TrainingDiverged(epoch, l_traj, l_ce)
        history.append((l_traj, l_ce, total))
        opt.step(params, task_grads + style_grads + dec_grads + cls_grads)

    return trained, history


def fit_model(dataset: LabeledDataset, d_theta: int, cfg: TrainConfig | None = None,
              d_tau: int | None = None, hidden: int = DEFAULT_HIDDEN,
              waypoints: int = DEFAULT_WAYPOINTS, meta: dict | None = None):
    """Initialize a fresh model for `dataset` and train it. Returns (model, history)."""
    cfg = cfg or TrainConfig()
    m = None
    if cfg.ablation_mode == "no_labels":
        m = max(dataset.num_classes, 1)  # classifier exists but stays untrained
    model = StyleSpaceModel.init(dataset, d_theta=d_theta, d_tau=d_tau,
                                 num_classes=m, hidden=hidden, waypoints=waypoints,
                                 seed=cfg.seed, meta=meta)
    return train(model, dataset, cfg)
