"""Regression stack over feature vectors: weighted k-nearest-neighbors, linear
support vector regression (epsilon-insensitive and pinball losses) and PCA.

All methods operate in the feature geometry: coordinates are rescaled so the
plain dot product realizes the landscape inner product (see
``FeatureVector.embedded``).  The SVR and quantile solvers minimize the exact
dual by pairwise coordinate descent with exact one-dimensional line searches,
so small instances reach the true optimum of

    1/2 ||w||^2 + C sum_i L(y_i - <w, x_i> - b)

with an unregularized bias.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError
from .landscape import FEATURE_KINDS, FeatureVector, LandscapeGrid

# KKT violation threshold: tight enough that the duality gap on desk-scale
# problems stays well below the 1e-6 optimality budget of the certificates.
SOLVER_TOL = 1e-9
SOLVER_MAX_ITER = 500_000


@dataclass(frozen=True)
class TrainingSet:
    """Feature vectors of one kind with their curvature labels."""

    features: tuple
    labels: tuple

    def __post_init__(self):
        features = tuple(self.features)
        labels = tuple(float(y) for y in self.labels)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        if not features:
            raise DomainError("training set is empty")
        if len(features) != len(labels):
            raise DomainError(
                f"{len(features)} features but {len(labels)} labels"
            )
        first = features[0]
        for v in features[1:]:
            if not first.compatible_with(v):
                raise DomainError("training features must share kind, length and grid")
        if not all(np.isfinite(y) for y in labels):
            raise DomainError("labels must be finite")

    @property
    def kind(self):
        return self.features[0].kind

    def matrix(self):
        return np.stack([v.embedded() for v in self.features])

    def label_array(self):
        return np.array(self.labels)


def _check_query(train, query):
    if not train.features[0].compatible_with(query):
        raise DomainError("query feature does not match the training geometry")


def knn_estimate(train, query, k):
    """Inverse-distance weighted average of the k nearest training labels.

    An exact match (zero distance) short-circuits to the matching label; ties
    among several exact matches average their labels.
    """
    _check_query(train, query)
    if not 1 <= k <= len(train.features):
        raise DomainError(f"k={k} out of range for {len(train.features)} training points")
    dists = np.linalg.norm(train.matrix() - query.embedded()[None, :], axis=1)
    labels = train.label_array()
    exact = dists == 0.0
    if np.any(exact):
        return float(labels[exact].mean())
    nearest = np.argsort(dists, kind="stable")[:k]
    weights = 1.0 / dists[nearest]
    return float(np.dot(weights, labels[nearest]) / weights.sum())


# ---------------------------------------------------------------------------
# dual solver shared by epsilon-SVR and pinball quantile regression


def _dual_objective(beta, gram, y, eps):
    return 0.5 * float(beta @ gram @ beta) - float(beta @ y) + eps * float(np.abs(beta).sum())


def _line_search(a, lin, eps, bi, bj, lo, hi):
    """Exact minimizer of the 1-d restriction

        f(delta) = lin * delta + a/2 delta^2 + eps(|bi + delta| + |bj - delta|)

    over [lo, hi]; returns (delta, f(delta) - f(0))."""

    def val(d):
        return lin * d + 0.5 * a * d * d + eps * (abs(bi + d) + abs(bj - d) - abs(bi) - abs(bj))

    candidates = [lo, hi]
    kinks = [t for t in (-bi, bj) if lo < t < hi]
    candidates.extend(kinks)
    pieces = sorted(set(candidates))
    if a > 0.0:
        for left, right in zip(pieces, pieces[1:]):
            mid = 0.5 * (left + right)
            si = 1.0 if bi + mid >= 0 else -1.0
            sj = 1.0 if bj - mid >= 0 else -1.0
            stat = -(lin + eps * (si - sj)) / a
            if left <= stat <= right:
                candidates.append(stat)
    best_d, best_v = 0.0, 0.0
    for d in candidates:
        v = val(d)
        if v < best_v:
            best_d, best_v = d, v
    return best_d, best_v


def _solve_dual(gram, y, box_lo, box_hi, eps, tol=SOLVER_TOL, max_iter=SOLVER_MAX_ITER,
                trace=None):
    """Minimize 1/2 b'Kb - b'y + eps|b|_1 over box constraints with sum(b) = 0.

    Pairwise updates on the most violating KKT pair with exact line search;
    the dual objective is nonincreasing by construction.  Returns
    (beta, bias, converged, violation); ``converged`` is False when the KKT
    tolerance was not reached before the iteration budget or a numerical
    stall (callers then judge by the primal-dual gap).
    """
    n = y.shape[0]
    beta = np.zeros(n)
    g = -y.copy()  # gradient of the smooth part: K beta - y
    converged = False
    violation = np.inf
    check_every = max(64, 2 * n)
    last_obj = np.inf
    for it in range(max_iter):
        up = g + np.where(beta >= 0, eps, -eps)
        dn = -g + np.where(beta <= 0, eps, -eps)
        can_up = beta < box_hi - 1e-14
        can_dn = beta > box_lo + 1e-14
        if not (np.any(can_up) and np.any(can_dn)):
            break
        i = int(np.argmin(np.where(can_up, up, np.inf)))
        j = int(np.argmin(np.where(can_dn, dn, np.inf)))
        violation = -(up[i] + dn[j])
        if violation < tol:
            converged = True
            break
        # up_i + dn_i >= 0 always, so a violating pair has i != j
        a = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
        lin = g[i] - g[j]
        lo = max(box_lo - beta[i], beta[j] - box_hi)
        hi = min(box_hi - beta[i], beta[j] - box_lo)
        delta, _ = _line_search(a, lin, eps, beta[i], beta[j], lo, hi)
        if delta == 0.0:
            converged = violation < tol
            break
        beta[i] += delta
        beta[j] -= delta
        g += delta * (gram[:, i] - gram[:, j])
        if trace is not None:
            trace.append(_dual_objective(beta, gram, y, eps))
        if (it + 1) % check_every == 0:
            g = gram @ beta - y  # refresh against incremental drift
            obj = _dual_objective(beta, gram, y, eps)
            if last_obj - obj <= 1e-15 * (1.0 + abs(obj)):
                break  # numerical stall; leave converged to the gap check
            last_obj = obj
    # bias from the KKT stationarity interval
    up = g + np.where(beta >= 0, eps, -eps)
    dn = -g + np.where(beta <= 0, eps, -eps)
    can_up = beta < box_hi - 1e-14
    can_dn = beta > box_lo + 1e-14
    lo_b = np.max(-up[can_up]) if np.any(can_up) else -np.inf
    hi_b = np.min(dn[can_dn]) if np.any(can_dn) else np.inf
    if np.isfinite(lo_b) and np.isfinite(hi_b):
        bias = 0.5 * (lo_b + hi_b)
    elif np.isfinite(lo_b):
        bias = lo_b
    elif np.isfinite(hi_b):
        bias = hi_b
    else:
        bias = 0.0
    return beta, float(bias), converged, float(violation)


@dataclass(frozen=True)
class SvrModel:
    """Linear predictor <w, x> + b in the embedded feature geometry."""

    kind: str
    weights: np.ndarray
    bias: float
    cost: float
    epsilon: float
    loss: str  # "epsilonInsensitive" or "pinball"
    tau: float | None = None
    grid: LandscapeGrid | None = None
    converged: bool = True

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", weights)
        if self.kind not in FEATURE_KINDS:
            raise DomainError(f"unknown feature kind {self.kind!r}")
        if not np.all(np.isfinite(weights)) or not np.isfinite(self.bias):
            raise DomainError("model parameters must be finite")


def _fit_linear(train, C, eps, box, loss, tau, trace=None):
    X = train.matrix()
    y = train.label_array()
    gram = X @ X.T
    beta, bias, converged, violation = _solve_dual(gram, y, box[0], box[1], eps, trace=trace)
    weights = X.T @ beta
    grid = train.features[0].grid
    model = SvrModel(train.kind, weights, bias, C, eps, loss, tau, grid, True)
    if not converged:
        # judge the iterate by its primal-dual gap before flagging
        primal = primal_objective(model, train)
        dual = -_dual_objective(beta, gram, y, eps)
        gap = primal - dual
        if gap > 1e-6 * max(1.0, abs(primal)):
            warnings.warn(
                f"{loss} solver stopped early: KKT violation {violation:.3e}, "
                f"duality gap {gap:.3e}; returning the current iterate",
                stacklevel=3,
            )
            model = SvrModel(train.kind, weights, bias, C, eps, loss, tau, grid, False)
    return model


def svr_train(train, C, epsilon, trace=None):
    """Support vector regression with the epsilon-insensitive (linear) loss."""
    if C <= 0 or epsilon < 0:
        raise DomainError(f"need C > 0 and epsilon >= 0, got C={C}, epsilon={epsilon}")
    return _fit_linear(train, C, epsilon, (-C, C), "epsilonInsensitive", None, trace)


def quantile_train(train, tau, C, trace=None):
    """Quantile regression via the pinball loss: dual box [C(tau-1), C tau]."""
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must be in (0, 1), got {tau}")
    if C <= 0:
        raise DomainError(f"need C > 0, got C={C}")
    return _fit_linear(train, C, 0.0, (C * (tau - 1.0), C * tau), "pinball", tau, trace)


def svr_predict(model, query):
    """Evaluate <w, query> + b under the feature inner product."""
    emb = query.embedded()
    if emb.shape != model.weights.shape:
        raise DomainError(
            f"query length {emb.shape[0]} does not match model length "
            f"{model.weights.shape[0]}"
        )
    if query.kind != model.kind:
        raise DomainError(f"query kind {query.kind} does not match model kind {model.kind}")
    return float(np.dot(model.weights, emb) + model.bias)


def primal_objective(model, train):
    """Primal value 1/2||w||^2 + C sum L(y - f(x)) of a fitted model."""
    preds = np.array([svr_predict(model, v) for v in train.features])
    res = train.label_array() - preds
    if model.loss == "pinball":
        loss = np.where(res >= 0, model.tau * res, (model.tau - 1.0) * res)
    else:
        loss = np.maximum(np.abs(res) - model.epsilon, 0.0)
    return 0.5 * float(np.dot(model.weights, model.weights)) + model.cost * float(loss.sum())


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PcaModel:
    """Mean and orthonormal principal directions in the embedded geometry."""

    mean: np.ndarray
    components: np.ndarray  # shape (n_components, dim)
    variance_share: np.ndarray

    def scores(self, features, component=None):
        X = np.stack([v.embedded() for v in features]) - self.mean[None, :]
        if component is None:
            return X @ self.components.T
        return X @ self.components[component]


def pca_fit(features, components, *, tol=1e-10, max_iter=2000):
    """Principal directions of the feature covariance via orthogonal iteration.

    The covariance operator is applied implicitly through the centered data
    matrix, so no dim x dim matrix is formed.  If the data rank falls below
    the request, fewer components are returned with a warning.
    """
    if len(features) < 2:
        raise DomainError("PCA needs at least 2 feature vectors")
    first = features[0]
    for v in features[1:]:
        if not first.compatible_with(v):
            raise DomainError("PCA features must share kind, length and grid")
    X = np.stack([v.embedded() for v in features])
    n, dim = X.shape
    if not 1 <= components <= dim:
        raise DomainError(f"components={components} out of range for dimension {dim}")
    mean = X.mean(axis=0)
    Xc = X - mean[None, :]
    denom = n - 1
    total_var = float(np.sum(Xc * Xc)) / denom
    if total_var == 0.0:
        raise DomainError("features are all identical; PCA is undefined")
    p = min(components, n - 1, dim)
    if p < components:
        warnings.warn(
            f"only {n} samples: at most {p} principal components are identifiable",
            stacklevel=2,
        )
    rng = np.random.default_rng(0x5CA1E)  # fixed seed: deterministic fits
    V = np.linalg.qr(rng.standard_normal((dim, p)))[0]
    prev = np.full(p, np.inf)
    for _ in range(max_iter):
        Y = Xc.T @ (Xc @ V) / denom
        V, _ = np.linalg.qr(Y)
        lam = np.einsum("ij,ij->j", V, Xc.T @ (Xc @ V) / denom)
        if np.max(np.abs(lam - prev) / max(total_var, 1e-300)) < tol:
            break
        prev = lam
    # Rayleigh-Ritz rotation inside the converged subspace
    B = V.T @ (Xc.T @ (Xc @ V)) / denom
    evals, evecs = np.linalg.eigh(0.5 * (B + B.T))
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    V = V @ evecs[:, order]
    keep = evals > max(tol, 1e-12) * total_var
    if not np.all(keep):
        kept = int(keep.sum())
        warnings.warn(
            f"feature rank {kept} below the {components} requested components; "
            "returning fewer",
            stacklevel=2,
        )
        evals = evals[:kept]
        V = V[:, :kept]
    if V.shape[1] == 0:
        raise NumericalError("orthogonal iteration found no usable components")
    return PcaModel(mean, V.T.copy(), evals / total_var)


def pca_curvature_estimate(model, features):
    """First-PC scores rescaled affinely from [min, max] onto [-2, 2].

    The component sign is not identifiable, so callers score the estimate up
    to a global sign flip.
    """
    scores = model.scores(features, component=0)
    lo, hi = float(scores.min()), float(scores.max())
    if hi == lo:
        raise DomainError("degenerate first-component score range")
    return [float(-2.0 + 4.0 * (s - lo) / (hi - lo)) for s in scores]


# ---------------------------------------------------------------------------
# model serialization


def write_model_json(path, model):
    """Model file: full-precision JSON that round-trips exactly."""
    payload = {
        "kind": model.kind,
        "weights": [float(x) for x in model.weights],
        "bias": model.bias,
        "C": model.cost,
        "epsilon": model.epsilon,
        "loss": model.loss,
        "grid": None if model.grid is None else model.grid.to_dict(),
        "converged": model.converged,
    }
    if model.tau is not None:
        payload["tau"] = model.tau
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_model_json(path):
    with open(path, "r", encoding="ascii") as fh:
        payload = json.load(fh)
    return SvrModel(
        kind=payload["kind"],
        weights=np.array(payload["weights"], dtype=float),
        bias=float(payload["bias"]),
        cost=float(payload["C"]),
        epsilon=float(payload["epsilon"]),
        loss=payload["loss"],
        tau=payload.get("tau"),
        grid=None if payload["grid"] is None else LandscapeGrid.from_dict(payload["grid"]),
        converged=bool(payload.get("converged", True)),
    )
