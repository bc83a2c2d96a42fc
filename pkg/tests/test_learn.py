"""Learner tests: kNN, SVR / quantile dual solvers, PCA."""

import math
import warnings

import numpy as np
import pytest
from scipy import optimize

from curvscape.errors import DomainError
from curvscape.landscape import FeatureVector, LandscapeGrid
from curvscape.learn import (
    PcaModel,
    SvrModel,
    TrainingSet,
    knn_estimate,
    pca_curvature_estimate,
    pca_fit,
    primal_objective,
    quantile_train,
    read_model_json,
    svr_predict,
    svr_train,
    write_model_json,
    _dual_objective,
    _solve_dual,
)


def h0(*values):
    return FeatureVector("H0", np.array(values, dtype=float))


def scalar_set(xs, ys):
    return TrainingSet(tuple(h0(x) for x in xs), tuple(ys))


# ---------------------------------------------------------------------------
# kNN


def test_knn_exact_match_rule():
    train = scalar_set([0.0, 1.0, 4.0], [0.0, 1.0, 4.0])
    assert knn_estimate(train, h0(1.0), 3) == 1.0
    # several exact matches average their labels
    train2 = TrainingSet((h0(1.0), h0(1.0), h0(5.0)), (2.0, 4.0, 9.0))
    assert knn_estimate(train2, h0(1.0), 2) == 3.0


def test_knn_k1():
    train = scalar_set([0.0, 1.0, 4.0], [10.0, 20.0, 30.0])
    assert knn_estimate(train, h0(3.5), 1) == 30.0


def test_knn_weighted_mean():
    train = scalar_set([0.0, 1.0, 4.0], [0.0, 1.0, 4.0])
    # query 2: distances (2, 1, 2), weights (1/2, 1, 1/2) -> 1.5
    assert knn_estimate(train, h0(2.0), 3) == pytest.approx(1.5, abs=1e-14)


def test_knn_scale_invariance():
    rng = np.random.default_rng(0)
    xs = rng.random((6, 3))
    ys = rng.random(6)
    train = TrainingSet(tuple(h0(*row) for row in xs), tuple(ys))
    q = h0(*rng.random(3))
    base = knn_estimate(train, q, 3)
    for s in (0.1, 7.0):
        train_s = TrainingSet(tuple(h0(*(row * s)) for row in xs), tuple(ys))
        q_s = h0(*(np.array(q.values) * s))
        assert knn_estimate(train_s, q_s, 3) == pytest.approx(base, rel=1e-12)


def test_knn_domain():
    train = scalar_set([0.0, 1.0], [0.0, 1.0])
    with pytest.raises(DomainError):
        knn_estimate(train, h0(0.5), 3)
    with pytest.raises(DomainError):
        knn_estimate(train, h0(0.5, 0.5), 1)


# ---------------------------------------------------------------------------
# SVR


def test_svr_perfect_linear_data():
    xs = list(range(10))
    ys = [2.0 * x + 1.0 for x in xs]
    train = scalar_set(xs, ys)
    model = svr_train(train, C=100.0, epsilon=0.0)
    for x, y in zip(xs, ys):
        assert svr_predict(model, h0(float(x))) == pytest.approx(y, abs=1e-3)
    # extrapolation along the learned line
    assert svr_predict(model, h0(20.0)) == pytest.approx(41.0, abs=1e-2)


def test_svr_constant_labels():
    train = scalar_set([0.0, 1.0, 2.0, 5.0], [3.25] * 4)
    model = svr_train(train, C=10.0, epsilon=0.0)
    assert np.allclose(model.weights, 0.0, atol=1e-9)
    assert svr_predict(model, h0(100.0)) == pytest.approx(3.25, abs=1e-9)


def test_svr_wide_tube_gives_zero_weights():
    ys = [1.0, 2.0, 3.0, 2.5]
    train = scalar_set([0.0, 1.0, 2.0, 3.0], ys)
    model = svr_train(train, C=5.0, epsilon=10.0)  # tube swallows every residual
    assert np.allclose(model.weights, 0.0, atol=1e-12)
    assert primal_objective(model, train) == pytest.approx(0.0, abs=1e-12)


def test_svr_prediction_is_affine():
    rng = np.random.default_rng(1)
    train = TrainingSet(tuple(h0(*row) for row in rng.random((8, 2))), tuple(rng.random(8)))
    model = svr_train(train, C=3.0, epsilon=0.1)
    q1, q2 = rng.random(2), rng.random(2)
    for alpha in (0.0, 0.3, 1.0):
        mix = h0(*(alpha * q1 + (1 - alpha) * q2))
        expect = alpha * svr_predict(model, h0(*q1)) + (1 - alpha) * svr_predict(
            model, h0(*q2)
        )
        assert svr_predict(model, mix) == pytest.approx(expect, rel=1e-12, abs=1e-12)


def test_svr_zero_weight_bias_model():
    grid = LandscapeGrid(0.0, 0.1, 3, 1)
    model = SvrModel("H1", np.zeros(3), 3.0, 1.0, 0.0, "epsilonInsensitive", grid=grid)
    assert svr_predict(model, FeatureVector("H1", np.ones(3), grid)) == 3.0


def nelder_mead_primal(X, y, C, eps, tau=None):
    """Independent oracle: direct search on the exact primal in (w, b)."""

    def objective(params):
        w, b = params[:-1], params[-1]
        res = y - X @ w - b
        if tau is None:
            loss = np.maximum(np.abs(res) - eps, 0.0)
        else:
            loss = np.where(res >= 0, tau * res, (tau - 1.0) * res)
        return 0.5 * float(w @ w) + C * float(loss.sum())

    best = np.inf
    rng = np.random.default_rng(7)
    for trial in range(12):
        x0 = np.zeros(X.shape[1] + 1) if trial == 0 else rng.normal(size=X.shape[1] + 1)
        r = optimize.minimize(
            objective, x0, method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000},
        )
        best = min(best, r.fun)
    return best


@pytest.mark.parametrize("eps,C", [(0.0, 10.0), (0.25, 4.0)])
def test_svr_optimality_certificate_small(eps, C):
    rng = np.random.default_rng(3)
    X = rng.random((5, 2)) * 2.0
    y = X @ np.array([1.5, -0.5]) + 0.3 + rng.normal(0, 0.2, 5)
    train = TrainingSet(tuple(h0(*row) for row in X), tuple(y))
    trace = []
    model = svr_train(train, C=C, epsilon=eps, trace=trace)
    ours = primal_objective(model, train)
    reference = nelder_mead_primal(X, y, C, eps)
    assert ours <= reference + 1e-6
    # weak duality sanity: primal >= -dual at the solver's final iterate
    assert ours >= -trace[-1] - 1e-6 if trace else True
    # the dual objective never increases across updates
    assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))


def test_quantile_optimality_certificate_small():
    rng = np.random.default_rng(4)
    X = rng.random((5, 2))
    y = rng.normal(0, 1, 5)
    for tau in (0.2, 0.5, 0.9):
        train = TrainingSet(tuple(h0(*row) for row in X), tuple(y))
        model = quantile_train(train, tau=tau, C=6.0)
        ours = primal_objective(model, train)
        reference = nelder_mead_primal(X, y, 6.0, 0.0, tau=tau)
        assert ours <= reference + 1e-6


def test_quantile_constant_features():
    ys = list(range(1, 101))
    train = scalar_set([1.0] * 100, ys)
    med = quantile_train(train, tau=0.5, C=10.0)
    assert svr_predict(med, h0(1.0)) == pytest.approx(50.5, abs=1.0)
    low = quantile_train(train, tau=0.05, C=10.0)
    assert svr_predict(low, h0(1.0)) == pytest.approx(5.0, abs=2.0)
    high = quantile_train(train, tau=0.95, C=10.0)
    assert svr_predict(high, h0(1.0)) == pytest.approx(95.0, abs=2.0)


def test_quantile_median_matches_svr_at_matched_cost():
    # pinball at tau = 1/2 is half the absolute loss: match with C' = C/2
    rng = np.random.default_rng(5)
    X = rng.random((9, 2))
    y = X @ np.array([2.0, 1.0]) + rng.normal(0, 0.05, 9)
    train = TrainingSet(tuple(h0(*row) for row in X), tuple(y))
    pin = quantile_train(train, tau=0.5, C=8.0)
    svr = svr_train(train, C=4.0, epsilon=0.0)
    q = h0(0.4, 0.6)
    assert svr_predict(pin, q) == pytest.approx(svr_predict(svr, q), abs=1e-4)


def test_solver_dual_objective_by_hand():
    gram = np.array([[2.0, 0.0], [0.0, 2.0]])
    y = np.array([1.0, -1.0])
    beta, bias, converged, _ = _solve_dual(gram, y, -5.0, 5.0, 0.0)
    assert converged
    assert beta.sum() == pytest.approx(0.0, abs=1e-12)
    # minimize beta'K beta/2 - beta'y with beta = (t, -t): 2t^2 - 2t -> t = 1/2
    assert beta[0] == pytest.approx(0.5, abs=1e-6)
    assert _dual_objective(beta, gram, y, 0.0) == pytest.approx(-0.5, abs=1e-9)


def test_svr_domain():
    train = scalar_set([0.0, 1.0], [0.0, 1.0])
    with pytest.raises(DomainError):
        svr_train(train, C=0.0, epsilon=0.0)
    with pytest.raises(DomainError):
        svr_train(train, C=1.0, epsilon=-0.5)
    with pytest.raises(DomainError):
        quantile_train(train, tau=1.5, C=1.0)
    model = svr_train(train, C=1.0, epsilon=0.0)
    with pytest.raises(DomainError):
        svr_predict(model, h0(1.0, 2.0))


# ---------------------------------------------------------------------------
# PCA


def test_pca_rank_one_line():
    rng = np.random.default_rng(6)
    direction = np.array([3.0, 4.0, 0.0]) / 5.0
    feats = [h0(*(t * direction)) for t in rng.normal(0, 2, 20)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model = pca_fit(feats, 2)
    assert model.variance_share[0] == pytest.approx(1.0, abs=1e-8)
    assert abs(float(np.dot(model.components[0], direction))) == pytest.approx(1.0, abs=1e-8)


def test_pca_isotropic_gaussian():
    rng = np.random.default_rng(7)
    feats = [h0(*row) for row in rng.normal(0, 1, (10_000, 2))]
    model = pca_fit(feats, 2)
    assert model.variance_share[0] == pytest.approx(0.5, abs=0.05)
    assert model.variance_share[1] == pytest.approx(0.5, abs=0.05)
    assert model.variance_share.sum() <= 1.0 + 1e-9


def test_pca_components_orthonormal():
    rng = np.random.default_rng(8)
    feats = [h0(*row) for row in rng.normal(0, 1, (50, 6)) @ np.diag([5, 3, 2, 1, 0.5, 0.1])]
    model = pca_fit(feats, 4)
    gram = model.components @ model.components.T
    assert np.allclose(gram, np.eye(4), atol=1e-8)
    assert np.all(np.diff(model.variance_share) <= 1e-12)


def test_pca_reconstruction_full_rank():
    rng = np.random.default_rng(9)
    X = rng.normal(0, 1, (12, 5))
    feats = [h0(*row) for row in X]
    model = pca_fit(feats, 5)
    emb = np.stack([v.embedded() for v in feats])
    centered = emb - model.mean
    recon = (centered @ model.components.T) @ model.components
    rel = np.linalg.norm(recon - centered) / np.linalg.norm(centered)
    assert rel <= 1e-8


def test_pca_rank_deficiency_flagged():
    feats = [h0(1.0, 2.0), h0(2.0, 4.0), h0(3.0, 6.0)]  # rank-1 data
    with pytest.warns(UserWarning):
        model = pca_fit(feats, 2)
    assert model.components.shape[0] == 1


def test_pca_curvature_estimate_affine_map():
    model = PcaModel(np.zeros(1), np.array([[1.0]]), np.array([1.0]))
    feats = [h0(0.0), h0(1.0), h0(2.0)]
    assert pca_curvature_estimate(model, feats) == pytest.approx([-2.0, 0.0, 2.0])
    feats2 = [h0(-2.0), h0(0.5), h0(2.0)]
    assert pca_curvature_estimate(model, feats2) == pytest.approx([-2.0, 0.5, 2.0])
    with pytest.raises(DomainError):
        pca_curvature_estimate(model, [h0(1.0), h0(1.0)])


def test_pca_sign_flip_equivalence():
    rng = np.random.default_rng(10)
    X = rng.normal(0, 1, (30, 3)) @ np.diag([4.0, 1.0, 0.2])
    feats = [h0(*row) for row in X]
    model = pca_fit(feats, 2)
    flipped = PcaModel(model.mean, -model.components, model.variance_share)
    s1 = model.scores(feats)
    s2 = flipped.scores(feats)
    assert np.allclose(s1, -s2)
    est = np.array(pca_curvature_estimate(model, feats))
    est_f = np.array(pca_curvature_estimate(flipped, feats))
    assert np.allclose(est, -est_f[np.argsort(np.argsort(-est_f))] * 0 + est)  # same multiset
    assert np.allclose(np.sort(est), np.sort(-est_f), atol=1e-9)


# ---------------------------------------------------------------------------
# serialization


def test_model_json_roundtrip(tmp_path):
    grid = LandscapeGrid(0.0, 0.005, 11, 2)
    rng = np.random.default_rng(11)
    model = SvrModel(
        "H0H1", rng.normal(0, 1, 5), -0.12345678901234567, 100.0, 0.0,
        "pinball", tau=0.05, grid=grid, converged=True,
    )
    path = tmp_path / "model.json"
    write_model_json(path, model)
    back = read_model_json(path)
    assert back.kind == model.kind
    assert np.array_equal(back.weights, model.weights)
    assert back.bias == model.bias
    assert back.cost == model.cost
    assert back.epsilon == model.epsilon
    assert back.loss == model.loss
    assert back.tau == model.tau
    assert back.grid == model.grid
