"""Metric unit oracles: direct-formula correlations, brute-force assignment,
and Monte Carlo checks, exercised through lightweight stub models."""

import itertools

import numpy as np
import pytest

from pecan.core import LabeledDataset, StyleSpec, Trajectory
from pecan.metrics import (
    EvalReport,
    MetricError,
    disentanglement,
    inconsistency,
    model_task_accuracy,
    monotonicity,
    pearson_rho,
    spearman_rho,
    task_accuracy,
    trajectory_error,
)


def spearman_direct(u, v):
    """Independent oracle: 1 - 6*sum(d^2)/(n(n^2-1)), tie-free inputs only."""
    n = len(u)
    ru = np.argsort(np.argsort(u))
    rv = np.argsort(np.argsort(v))
    d = ru - rv
    return 1 - 6 * float(d @ d) / (n * (n * n - 1))


def pearson_direct(u, v):
    """Independent oracle: covariance over product of standard deviations."""
    u, v = np.asarray(u, float), np.asarray(v, float)
    uc, vc = u - u.mean(), v - v.mean()
    return float((uc @ vc) / np.sqrt((uc @ uc) * (vc @ vc)))


class TestSpearman:
    def test_perfect_monotone(self):
        assert spearman_rho([1, 2, 3, 4], [2, 4, 6, 8]) == pytest.approx(1.0)

    def test_partial_rank_value(self):
        assert spearman_rho([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_perfect_reversal(self):
        assert spearman_rho([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)

    def test_constant_vector_is_zero(self):
        assert spearman_rho([1, 1, 1], [1, 2, 3]) == 0.0

    def test_matches_direct_formula_on_random_vectors(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            n = rng.integers(3, 30)
            u = rng.permutation(n).astype(float)  # distinct -> no ties
            v = rng.permutation(n).astype(float)
            assert spearman_rho(u, v) == pytest.approx(spearman_direct(u, v), abs=1e-9)


class TestPearson:
    def test_affine(self):
        u = np.array([0.3, 1.0, 2.5, -1.0])
        assert pearson_rho(u, 2 * u + 1) == pytest.approx(1.0)

    def test_zero_correlation_case(self):
        assert pearson_rho([1, 2, 3], [1, 0, 1]) == pytest.approx(0.0, abs=1e-12)

    def test_negation(self):
        u = np.array([1.0, 2.0, 5.0])
        assert pearson_rho(u, -u) == pytest.approx(-1.0)

    def test_zero_variance_is_zero(self):
        assert pearson_rho([2, 2, 2], [1, 2, 3]) == 0.0

    def test_matches_direct_formula_on_random_vectors(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            n = int(rng.integers(2, 40))
            u = rng.standard_normal(n)
            v = rng.standard_normal(n)
            assert pearson_rho(u, v) == pytest.approx(pearson_direct(u, v), abs=1e-9)


def one_hots(indices, width):
    z = np.zeros((len(indices), width))
    z[np.arange(len(indices)), indices] = 1.0
    return z


def brute_force_accuracy(pred, true, d_latent, k):
    """Oracle: enumerate all injective latent-to-task assignments."""
    best = 0
    for perm in itertools.permutations(range(k), min(d_latent, k)):
        matched = sum(1 for p, t in zip(pred, true)
                      if p < len(perm) and perm[p] == t)
        best = max(best, matched)
    if d_latent > k:  # try every subset of latents mapped to tasks
        for latents in itertools.permutations(range(d_latent), k):
            mapping = {latent: task for task, latent in enumerate(latents)}
            matched = sum(1 for p, t in zip(pred, true) if mapping.get(p) == t)
            best = max(best, matched)
    return best / len(true)


class TestTaskAccuracy:
    def test_perfect_consistent_mapping(self):
        pred = one_hots([1, 1, 0, 0], 2)
        assert task_accuracy(pred, [0, 0, 1, 1]) == 1.0

    def test_collapse_gives_chance_level(self):
        pred = one_hots([0, 0, 0, 0], 2)
        assert task_accuracy(pred, [0, 1, 0, 1]) == 0.5

    def test_confusion_matrix_example(self):
        # counts [[2,1],[0,3]]: best assignment keeps the diagonal, 5/6
        pred = one_hots([0, 0, 0, 1, 1, 1], 2)
        true = [0, 0, 1, 1, 1, 1]
        assert task_accuracy(pred, true) == pytest.approx(5 / 6)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        true = rng.integers(0, 3, size=30)
        pred = rng.integers(0, 3, size=30)
        base = task_accuracy(one_hots(pred, 3), true)
        for perm in itertools.permutations(range(3)):
            relabeled = np.array([perm[p] for p in pred])
            assert task_accuracy(one_hots(relabeled, 3), true) == pytest.approx(base)

    def test_matches_brute_force_on_random_confusions(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            d_latent = int(rng.integers(1, 4))
            k = int(rng.integers(2, 4))
            n = int(rng.integers(k, 7))
            true = rng.integers(0, k, size=n)
            pred = rng.integers(0, d_latent, size=n)
            got = task_accuracy(one_hots(pred, d_latent), true)
            assert got == pytest.approx(brute_force_accuracy(pred, true, d_latent, k))

    def test_never_below_chance(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            true = rng.integers(0, 2, size=20)
            pred = rng.integers(0, 2, size=20)
            assert task_accuracy(one_hots(pred, 2), true) >= 0.5 - 1e-12


# ---------------------------------------------------------------------------
# Stub model plumbing for the model-level metrics


def index_traj(i):
    return Trajectory(states=np.full((2, 1), float(i)), actions=np.zeros((2, 1)))


def make_eval_set(tasks, styles):
    styles = np.atleast_2d(styles)
    trajs = [index_traj(i) for i in range(len(tasks))]
    specs = [StyleSpec(task_id=int(t), style=styles[i]) for i, t in enumerate(tasks)]
    return LabeledDataset(trajectories=trajs, labels=(), specs=specs,
                          num_tasks=int(max(tasks)) + 1)


class StubDecoder:
    def __init__(self, owner, offset):
        self.owner = owner
        self.offset = offset

    def forward(self, dec_in):
        return self.owner.last_X + self.offset, None


class StubModel:
    """Metrics see: prepare_batch, encode_*_flat, decoder.forward."""

    def __init__(self, z_style, z_task=None, recon_offset=0.0):
        self.z_style = np.atleast_2d(np.asarray(z_style, float))
        self.z_task = z_task
        self.recon_offset = recon_offset
        self.decoder = StubDecoder(self, recon_offset)
        self.last_X = None

    def prepare_batch(self, trajs):
        self.last_X = np.stack([t.flatten() for t in trajs])
        return self.last_X

    def _idx(self, X):
        return X[:, 0].astype(int)

    def encode_style_flat(self, X):
        return self.z_style[self._idx(X)]

    def encode_task_flat(self, X):
        if self.z_task is None:
            return one_hots(np.zeros(len(X), dtype=int), 2)
        return one_hots(np.asarray(self.z_task)[self._idx(X)], 2)


class TestTrajectoryError:
    def test_identity_reconstruction(self):
        ev = make_eval_set([0, 1], [[0.0], [1.0]])
        model = StubModel(z_style=[[0.0], [0.0]], recon_offset=0.0)
        assert trajectory_error(model, ev) == 0.0

    def test_constant_offset(self):
        ev = make_eval_set([0, 1], [[0.0], [1.0]])
        model = StubModel(z_style=[[0.0], [0.0]], recon_offset=0.25)
        assert trajectory_error(model, ev) == pytest.approx(0.25 ** 2)


class TestInconsistency:
    def test_identical_latents_give_zero(self):
        ev = make_eval_set([0, 1, 0, 1], [[1.0], [1.0], [2.0], [2.0]])
        model = StubModel(z_style=[[0.3], [0.3], [-0.7], [-0.7]])
        assert inconsistency(model, ev) == 0.0

    def test_mean_of_pair_gaps(self):
        ev = make_eval_set([0, 1, 0, 1], [[1.0], [1.0], [2.0], [2.0]])
        model = StubModel(z_style=[[0.0], [0.2], [0.0], [0.4]])
        assert inconsistency(model, ev) == pytest.approx(0.3)

    def test_same_task_pairs_do_not_count(self):
        ev = make_eval_set([0, 0], [[1.0], [1.0]])
        model = StubModel(z_style=[[0.0], [1.0]])
        with pytest.raises(MetricError):
            inconsistency(model, ev)

    def test_no_equal_styles_is_error_not_zero(self):
        ev = make_eval_set([0, 1], [[1.0], [2.0]])
        model = StubModel(z_style=[[0.0], [0.0]])
        with pytest.raises(MetricError):
            inconsistency(model, ev)


def grid_styles_2d(n=6):
    g = np.linspace(-1, 1, n)
    return np.array([(a, b) for a in g for b in g])


class TestMonotonicity:
    def test_identity_encoder(self):
        styles = grid_styles_2d()
        ev = make_eval_set(np.zeros(len(styles), int), styles)
        assert monotonicity(StubModel(z_style=styles), ev) == pytest.approx(1.0)

    def test_sign_flip_invariance(self):
        styles = grid_styles_2d()
        ev = make_eval_set(np.zeros(len(styles), int), styles)
        assert monotonicity(StubModel(z_style=-styles), ev) == pytest.approx(1.0)

    def test_unit_insensitive(self):
        # same geometry, one style axis in much larger units
        styles = grid_styles_2d()
        scaled = styles * np.array([60.0, 2.0])
        ev = make_eval_set(np.zeros(len(styles), int), scaled)
        assert monotonicity(StubModel(z_style=styles), ev) == pytest.approx(1.0)

    def test_monotone_rescaling_invariance(self):
        styles = grid_styles_2d()
        ev = make_eval_set(np.zeros(len(styles), int), styles)
        base = StubModel(z_style=styles)
        cubed = StubModel(z_style=np.sign(styles) * np.abs(styles))
        assert monotonicity(base, ev) == pytest.approx(monotonicity(cubed, ev))

    def test_random_assignment_scores_low(self):
        rng = np.random.default_rng(7)
        styles = grid_styles_2d(5)
        ev = make_eval_set(np.zeros(len(styles), int), styles)
        scores = []
        for _ in range(100):
            scores.append(monotonicity(StubModel(z_style=rng.permutation(styles)), ev))
        assert np.mean(scores) < 0.15

    def test_too_few_points(self):
        ev = make_eval_set([0, 0], [[0.0], [1.0]])
        with pytest.raises(MetricError):
            monotonicity(StubModel(z_style=[[0.0], [1.0]]), ev)


class TestDisentanglement:
    def test_identity(self):
        styles = grid_styles_2d()
        ev = make_eval_set(np.zeros(len(styles), int), styles)
        assert disentanglement(StubModel(z_style=styles), ev) == pytest.approx(1.0)

    def test_swapped_dimensions(self):
        styles = grid_styles_2d()
        ev = make_eval_set(np.zeros(len(styles), int), styles)
        model = StubModel(z_style=styles[:, ::-1])
        assert disentanglement(model, ev) == pytest.approx(1.0)

    def test_rotation_gives_inverse_sqrt2(self):
        # 45-degree rotation of independent uniforms: corr = 1/sqrt(2)
        rng = np.random.default_rng(8)
        styles = rng.uniform(-1, 1, size=(10_000, 2))
        c, s = np.cos(np.pi / 4), np.sin(np.pi / 4)
        rot = styles @ np.array([[c, -s], [s, c]]).T
        ev = make_eval_set(np.zeros(len(styles), int), styles)
        got = disentanglement(StubModel(z_style=rot), ev)
        assert abs(got - 1 / np.sqrt(2)) < 0.03

    def test_matches_brute_force_alignment_search(self):
        rng = np.random.default_rng(9)
        styles = rng.uniform(-1, 1, size=(200, 3))
        z = rng.uniform(-1, 1, size=(200, 2))
        ev = make_eval_set(np.zeros(len(styles), int), styles)
        got = disentanglement(StubModel(z_style=z), ev)

        corr = np.array([[abs(pearson_rho(z[:, i], styles[:, j])) for j in range(3)]
                         for i in range(2)])
        best = max(np.mean([corr[i, p[i]] for i in range(2)])
                   for p in itertools.permutations(range(3), 2))
        assert got == pytest.approx(best)


class TestEvalReport:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            EvalReport(task_accuracy=1.2, trajectory_error=0, inconsistency=0,
                       monotonicity=0, disentanglement=0, seed=0, n_eval=1)

    def test_round_trips_to_dict(self):
        r = EvalReport(task_accuracy=0.9, trajectory_error=0.01, inconsistency=0.1,
                       monotonicity=0.8, disentanglement=0.7, seed=3, n_eval=10)
        d = r.to_dict()
        assert d["seed"] == 3 and d["monotonicity"] == 0.8


def test_model_task_accuracy_uses_assignment():
    ev = make_eval_set([0, 0, 1, 1], np.zeros((4, 1)))
    model = StubModel(z_style=np.zeros((4, 1)), z_task=[1, 1, 0, 0])
    assert model_task_accuracy(model, ev) == 1.0
