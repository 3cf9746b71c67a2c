"""Scikit-learn style facade over the style-space model.

`fit` consumes demonstrations (a LabeledDataset, or trajectories plus label
groups), `transform` embeds trajectories into the joint latent block
[task one-hot | canonical style], and `inverse_transform` decodes latent
blocks back into environment-unit trajectories.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .model import (
    DEFAULT_HIDDEN,
    DEFAULT_WAYPOINTS,
    StyleSpaceModel,
    TrainConfig,
    fit_model,
)
from .validation import as_labeled_dataset, as_trajectory_list, check_latent_matrix


class StyleSpaceEstimator(BaseEstimator, TransformerMixin):
    """Learns a discrete task latent and a continuous canonical style space."""

    def __init__(self, d_theta: int = 2, d_tau: int | None = None,
                 hidden: int = DEFAULT_HIDDEN, waypoints: int = DEFAULT_WAYPOINTS,
                 epochs: int = 5000, lr: float = 0.0008, lambda_traj: float = 1.0,
                 lambda_ce: float = 1.0, temperature: float = 1.0,
                 ablation_mode: str = "pecan", seed: int = 0):
        self.d_theta = d_theta
        self.d_tau = d_tau
        self.hidden = hidden
        self.waypoints = waypoints
        self.epochs = epochs
        self.lr = lr
        self.lambda_traj = lambda_traj
        self.lambda_ce = lambda_ce
        self.temperature = temperature
        self.ablation_mode = ablation_mode
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, lr=self.lr,
                           lambda_traj=self.lambda_traj, lambda_ce=self.lambda_ce,
                           seed=self.seed, ablation_mode=self.ablation_mode,
                           temperature=self.temperature)

    def fit(self, X, y=None):
        dataset = as_labeled_dataset(X, y)
        self.model_, self.loss_history_ = fit_model(
            dataset, d_theta=self.d_theta, cfg=self._config(), d_tau=self.d_tau,
            hidden=self.hidden, waypoints=self.waypoints)
        return self

    def _check_fitted(self) -> StyleSpaceModel:
        if not hasattr(self, "model_"):
            raise NotFittedError("call fit before using this estimator")
        return self.model_

    def transform(self, X) -> np.ndarray:
        """Embed trajectories into (n, d_tau + d_theta) latent blocks."""
        model = self._check_fitted()
        flat = model.prepare_batch(as_trajectory_list(X))
        return np.hstack([model.encode_task_flat(flat), model.encode_style_flat(flat)])

    def predict(self, X) -> np.ndarray:
        """Discrete task index for each trajectory."""
        model = self._check_fitted()
        flat = model.prepare_batch(as_trajectory_list(X))
        return np.argmax(model.encode_task_flat(flat), axis=-1)

    def encode_style(self, X) -> np.ndarray:
        model = self._check_fitted()
        return np.atleast_2d(model.encode_style_flat(model.prepare_batch(
            as_trajectory_list(X))))

    def inverse_transform(self, Z) -> list:
        """Decode latent blocks back to trajectories in environment units."""
        model = self._check_fitted()
        Z = check_latent_matrix(Z, model.d_tau, model.d_theta)
        return [model.decode(row[:model.d_tau], row[model.d_tau:]) for row in Z]

    def score(self, X, y=None) -> float:
        """Negative reconstruction MSE in normalized space (higher is better)."""
        model = self._check_fitted()
        flat = model.prepare_batch(as_trajectory_list(X))
        z = np.hstack([model.encode_task_flat(flat), model.encode_style_flat(flat)])
        recon, _ = model.decoder.forward(z)
        return -float(((recon - flat) ** 2).mean())
