"""Experiment orchestration: sampling -> distances -> persistence -> features
-> averaging -> train/test -> report, in distance and ordinal modes.

Every random draw is keyed by (seed, domain, curvature-index, repetition)
through numpy SeedSequence spawn keys, so results are byte-identical for a
fixed config regardless of the parallelism setting.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError
from .geometry import _distances, sample_disk_arrays
from .landscape import (
    DISTANCE_GRID,
    ORDINAL_GRID,
    FeatureVector,
    LandscapeGrid,
    average_vectors,
    concat_feature,
    death_vector_feature,
    landscape_feature,
    landscape_from_diagram,
    write_features_csv,
)
from .learn import (
    TrainingSet,
    knn_estimate,
    pca_curvature_estimate,
    pca_fit,
    quantile_train,
    svr_predict,
    svr_train,
    write_model_json,
)
from .persistence import DistanceMatrix, PersistenceDiagram, h0_death_vector, h1_diagram

# SeedSequence spawn-key domains
TRAIN_DOMAIN = 0
TEST_DOMAIN = 1
TEST_CURVATURE_DOMAIN = 2


def distance_matrix(points, k):
    """Pairwise geodesic distances of unit-disk points on the curvature-K surface."""
    if len(points) < 2:
        raise DomainError("need at least 2 points for a distance matrix")
    r = np.array([p[0] for p in points], dtype=float)
    theta = np.array([p[1] for p in points], dtype=float)
    return _distance_matrix_arrays(r, theta, k)


def _distance_matrix_arrays(r, theta, k):
    iu, ju = np.triu_indices(r.shape[0], k=1)
    entries = _distances(r[iu], theta[iu], r[ju], theta[ju], k)
    return DistanceMatrix(r.shape[0], entries)


def ordinal_transform(d):
    """Replace the nonzero pairwise distances by their 1-based ranks.

    Sorting is by (value, index-lexicographic) so ties break stably; absent
    ties the output entry multiset is exactly {1, ..., C(m, 2)}.
    """
    iu, ju = np.triu_indices(d.m, k=1)
    order = np.lexsort((ju, iu, d.entries))
    ranks = np.empty(d.entries.shape[0])
    ranks[order] = np.arange(1, d.entries.shape[0] + 1, dtype=float)
    return DistanceMatrix(d.m, ranks)


def rmse(estimates, truths):
    """Root mean squared error between two equal-length lists."""
    est = np.asarray(estimates, dtype=float)
    tru = np.asarray(truths, dtype=float)
    if est.shape != tru.shape or est.size == 0:
        raise DomainError(f"rmse needs equal nonempty lengths, got {est.shape} vs {tru.shape}")
    return float(np.sqrt(np.mean((est - tru) ** 2)))


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one estimation experiment.

    JSON serialization uses the same field names; ``trainGrid``, ``svr`` and
    ``grid`` are nested objects.
    """

    mode: str = "distance"
    pointsPerSample: int = 200
    repetitions: int = 20
    trainLo: float = -2.0
    trainHi: float = 2.0
    trainStep: float = 0.2
    testCount: int = 30
    featureKind: str = "H0H1"
    knnK: int = 3
    svrC: float = 100.0
    svrEpsilon: float = 0.0
    quantileTaus: tuple = (0.05, 0.5, 0.95)
    seed: int = 0
    grid: LandscapeGrid = field(default_factory=lambda: DISTANCE_GRID)
    parallelism: int = 1

    def __post_init__(self):
        if self.mode not in ("distance", "ordinal"):
            raise DomainError(f"mode must be 'distance' or 'ordinal', got {self.mode!r}")
        if self.pointsPerSample < 3:
            raise DomainError("pointsPerSample must be at least 3")
        if self.repetitions < 1:
            raise DomainError("repetitions must be at least 1")
        if self.testCount < 0:
            raise DomainError("testCount must be >= 0")
        if self.trainStep <= 0 or self.trainLo > self.trainHi:
            raise DomainError("train grid needs lo <= hi and step > 0")
        if self.trainLo < -2.0 - 1e-12 or self.trainHi > 2.0 + 1e-12:
            raise DomainError("train grid must lie within [-2, 2]")
        if self.featureKind not in ("H0", "H1", "H0H1"):
            raise DomainError(f"unknown featureKind {self.featureKind!r}")
        if self.knnK < 1 or self.parallelism < 1:
            raise DomainError("knnK and parallelism must be positive")
        if not all(0.0 < t < 1.0 for t in self.quantileTaus):
            raise DomainError("quantile taus must lie in (0, 1)")
        object.__setattr__(self, "quantileTaus", tuple(float(t) for t in self.quantileTaus))

    @classmethod
    def ordinal_defaults(cls, **overrides):
        """Ordinal-mode defaults: k = 5 neighbors, C = 10, eps = 0.2, unit grid."""
        base = dict(
            mode="ordinal",
            featureKind="H1",
            knnK=5,
            svrC=10.0,
            svrEpsilon=0.2,
            grid=ORDINAL_GRID,
        )
        base.update(overrides)
        return cls(**base)

    def train_curvatures(self):
        count = int(round((self.trainHi - self.trainLo) / self.trainStep)) + 1
        ks = self.trainLo + self.trainStep * np.arange(count)
        return np.clip(ks, self.trainLo, self.trainHi)

    def to_dict(self):
        return {
            "mode": self.mode,
            "pointsPerSample": self.pointsPerSample,
            "repetitions": self.repetitions,
            "trainGrid": {"lo": self.trainLo, "hi": self.trainHi, "step": self.trainStep},
            "testCount": self.testCount,
            "featureKind": self.featureKind,
            "knnK": self.knnK,
            "svr": {"C": self.svrC, "epsilon": self.svrEpsilon},
            "quantileTaus": list(self.quantileTaus),
            "seed": self.seed,
            "grid": self.grid.to_dict(),
            "parallelism": self.parallelism,
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        kwargs = {}
        plain = (
            "mode",
            "pointsPerSample",
            "repetitions",
            "testCount",
            "featureKind",
            "knnK",
            "seed",
            "parallelism",
        )
        base = cls.ordinal_defaults() if data.get("mode") == "ordinal" else cls()
        for name in plain:
            if name in data:
                kwargs[name] = data.pop(name)
        if "trainGrid" in data:
            tg = data.pop("trainGrid")
            kwargs["trainLo"] = float(tg["lo"])
            kwargs["trainHi"] = float(tg["hi"])
            kwargs["trainStep"] = float(tg["step"])
        if "svr" in data:
            sv = data.pop("svr")
            kwargs["svrC"] = float(sv["C"])
            kwargs["svrEpsilon"] = float(sv["epsilon"])
        if "quantileTaus" in data:
            kwargs["quantileTaus"] = tuple(data.pop("quantileTaus"))
        if "grid" in data:
            kwargs["grid"] = LandscapeGrid.from_dict(data.pop("grid"))
        data.pop("mode", None)
        if data:
            raise DomainError(f"unknown config fields: {sorted(data)}")
        return replace(base, **kwargs)

    def with_override(self, dotted_key, raw_value):
        """Apply one '--key=value' override using the JSON field names."""
        data = self.to_dict()
        parts = dotted_key.split(".")
        node = data
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise DomainError(f"unknown config field {dotted_key!r}")
            node = node[p]
        leaf = parts[-1]
        if leaf not in node:
            raise DomainError(f"unknown config field {dotted_key!r}")
        node[leaf] = _parse_override(node[leaf], raw_value, dotted_key)
        return ExperimentConfig.from_dict(data)


def _parse_override(current, raw, key):
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, str):
        return raw
    if isinstance(current, list):
        return [float(x) for x in raw.split(",") if x.strip()]
    raise DomainError(f"field {key!r} cannot be overridden from the command line")


# ---------------------------------------------------------------------------
# feature construction


def feature_stream(seed, domain, index):
    """SeedSequence for one (domain, curvature-index) cell of the experiment."""
    return np.random.SeedSequence(entropy=seed, spawn_key=(domain, index))


def single_sample_feature(k, cfg, rng):
    """Feature vector of one m-point sample: the full per-sample pipeline."""
    m = cfg.pointsPerSample
    r, theta = sample_disk_arrays(k, m, rng)
    d = _distance_matrix_arrays(r, theta, k)
    scale = 1.0
    if cfg.mode == "ordinal":
        d = ordinal_transform(d)
        expected = np.arange(1, m * (m - 1) // 2 + 1, dtype=float)
        if not np.array_equal(np.sort(d.entries), expected):
            raise DomainError("ordinal invariant violated: entries are not {1..C(m,2)}")
        scale = 1.0 / (m * (m - 1) // 2)
    h0_part = None
    h1_part = None
    if cfg.featureKind in ("H0", "H0H1"):
        deaths = h0_death_vector(d).deaths * scale
        h0_part = FeatureVector("H0", deaths)
    if cfg.featureKind in ("H1", "H0H1"):
        diag = h1_diagram(d)
        if scale != 1.0:
            diag = PersistenceDiagram(1, diag.pairs * scale)
        h1_part = landscape_feature(landscape_from_diagram(diag, cfg.grid))
    if cfg.featureKind == "H0":
        return h0_part
    if cfg.featureKind == "H1":
        return h1_part
    return concat_feature(h0_part, h1_part)


def average_features(k, cfg, stream):
    """Average the per-sample features of ``repetitions`` independent samples.

    ``stream`` is the SeedSequence of this curvature cell; repetition r uses
    its r-th spawned child, so the result does not depend on scheduling.
    """
    children = stream.spawn(cfg.repetitions)
    samples = [
        single_sample_feature(k, cfg, np.random.default_rng(child)) for child in children
    ]
    return average_vectors(samples)


def _feature_task(args):
    cfg, domain, index, k = args
    return domain, index, average_features(k, cfg, feature_stream(cfg.seed, domain, index))


def _compute_features(cfg, tasks):
    """Run (domain, index, K) feature tasks, possibly on a process pool."""
    out = {}
    if cfg.parallelism <= 1 or len(tasks) <= 1:
        for task in tasks:
            domain, index, feat = _feature_task((cfg,) + task)
            out[(domain, index)] = feat
        return out
    with ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
        for domain, index, feat in pool.map(
            _feature_task, [(cfg,) + t for t in tasks], chunksize=1
        ):
            out[(domain, index)] = feat
    return out


# ---------------------------------------------------------------------------
# experiment


@dataclass(frozen=True)
class ExperimentReport:
    """Per-test estimates, aggregate errors and experiment metadata."""

    perTest: tuple
    rmse: dict
    pcaVarianceShare: tuple
    pcaProjection: tuple
    quantileCrossFraction: float
    timing: dict
    configEcho: ExperimentConfig

    def to_dict(self, include_timing=False):
        data = {
            "perTest": [list(row) for row in self.perTest],
            "rmse": dict(self.rmse),
            "pcaVarianceShare": list(self.pcaVarianceShare),
            "pcaProjection": [list(row) for row in self.pcaProjection],
            "quantileCrossFraction": self.quantileCrossFraction,
            "configEcho": self.configEcho.to_dict(),
        }
        if include_timing:
            data["timing"] = dict(self.timing)
        return data


def run_experiment(cfg, out_dir=None):
    """Train on the curvature grid, estimate the test curvatures, report errors.

    Writes training/test features, fitted models, ``report.json`` and
    ``timing.json`` under ``out_dir`` when given.  The report (and every file
    except timing.json) is a deterministic function of the config.
    """
    t_start = time.perf_counter()
    timing = {}
    train_ks = cfg.train_curvatures()
    tasks = [(TRAIN_DOMAIN, i, float(k)) for i, k in enumerate(train_ks)]
    rng_testk = np.random.default_rng(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(TEST_CURVATURE_DOMAIN, 0))
    )
    test_ks = rng_testk.uniform(cfg.trainLo, cfg.trainHi, cfg.testCount)
    tasks += [(TEST_DOMAIN, i, float(k)) for i, k in enumerate(test_ks)]

    t0 = time.perf_counter()
    features = _compute_features(cfg, tasks)
    timing["features"] = time.perf_counter() - t0

    train_feats = [features[(TRAIN_DOMAIN, i)] for i in range(len(train_ks))]
    test_feats = [features[(TEST_DOMAIN, i)] for i in range(cfg.testCount)]

    out = _Outputs(out_dir)
    out.features("train_features.csv", train_feats, train_ks)
    if test_feats:
        out.features("test_features.csv", test_feats, test_ks)

    t0 = time.perf_counter()
    train_set = TrainingSet(tuple(train_feats), tuple(float(k) for k in train_ks))
    svr_model = svr_train(train_set, cfg.svrC, cfg.svrEpsilon)
    quant_models = {
        tau: quantile_train(train_set, tau, cfg.svrC) for tau in cfg.quantileTaus
    }
    out.model("svr_model.json", svr_model)
    for tau, model in quant_models.items():
        out.model(f"quantile_{_tau_tag(tau)}.json", model)
    timing["fit"] = time.perf_counter() - t0

    per_test = []
    rmse_map = {}
    variance_share = ()
    projection = ()
    cross_fraction = 0.0
    if test_feats:
        t0 = time.perf_counter()
        pca_components = min(10, len(test_feats) - 1)
        pca_model = pca_fit(test_feats, pca_components)
        pca_est = pca_curvature_estimate(pca_model, test_feats)
        scores = pca_model.scores(test_feats)
        variance_share = tuple(float(x) for x in pca_model.variance_share)
        projection = tuple(
            (float(s[0]), float(s[1]) if s.shape[0] > 1 else 0.0) for s in scores
        )
        taus = sorted(cfg.quantileTaus)
        for i, k_true in enumerate(test_ks):
            feat = test_feats[i]
            knn_val = knn_estimate(train_set, feat, cfg.knnK)
            svr_val = svr_predict(svr_model, feat)
            quants = [svr_predict(quant_models[tau], feat) for tau in taus]
            row = [float(k_true), knn_val, svr_val, pca_est[i]] + quants
            per_test.append(tuple(row))
        truths = [row[0] for row in per_test]
        rmse_map["knn"] = rmse([r[1] for r in per_test], truths)
        rmse_map["svr"] = rmse([r[2] for r in per_test], truths)
        pca_vals = [r[3] for r in per_test]
        rmse_map["pca"] = min(
            rmse(pca_vals, truths), rmse([-v for v in pca_vals], truths)
        )
        if 0.5 in taus:
            idx = 4 + taus.index(0.5)
            rmse_map["quantile50"] = rmse([r[idx] for r in per_test], truths)
        crossings = 0
        for row in per_test:
            qs = row[4:]
            if any(b < a for a, b in zip(qs, qs[1:])):
                crossings += 1
        cross_fraction = crossings / len(per_test)
        timing["estimate"] = time.perf_counter() - t0

    timing["total"] = time.perf_counter() - t_start
    report = ExperimentReport(
        perTest=tuple(per_test),
        rmse=rmse_map,
        pcaVarianceShare=variance_share,
        pcaProjection=projection,
        quantileCrossFraction=cross_fraction,
        timing=timing,
        configEcho=cfg,
    )
    out.report(report)
    return report


def _tau_tag(tau):
    return f"{int(round(tau * 100)):03d}"


class _Outputs:
    """Artifact writer; inert when no output directory was requested."""

    def __init__(self, out_dir):
        self.dir = None
        if out_dir is not None:
            import os

            os.makedirs(out_dir, exist_ok=True)
            self.dir = str(out_dir)

    def _path(self, name):
        import os

        return os.path.join(self.dir, name)

    def features(self, name, feats, labels):
        if self.dir is not None and feats:
            write_features_csv(self._path(name), feats, [float(k) for k in labels])

    def model(self, name, model):
        if self.dir is not None:
            write_model_json(self._path(name), model)

    def report(self, report):
        if self.dir is None:
            return
        with open(self._path("report.json"), "w", encoding="ascii") as fh:
            json.dump(report.to_dict(include_timing=False), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(self._path("timing.json"), "w", encoding="ascii") as fh:
            json.dump(report.timing, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_report(path):
    with open(path, "r", encoding="ascii") as fh:
        data = json.load(fh)
    return ExperimentReport(
        perTest=tuple(tuple(row) for row in data["perTest"]),
        rmse=data["rmse"],
        pcaVarianceShare=tuple(data["pcaVarianceShare"]),
        pcaProjection=tuple(tuple(r) for r in data["pcaProjection"]),
        quantileCrossFraction=data["quantileCrossFraction"],
        timing=data.get("timing", {}),
        configEcho=ExperimentConfig.from_dict(data["configEcho"]),
    )


# ---------------------------------------------------------------------------
# plot data


def emit_plot_data(report, out_dir, svg=False):
    """Write plot-ready CSVs (scatter, quantile bands, PCA projection and
    variance share) and optionally minimal SVG scatters; returns the paths."""
    import os

    os.makedirs(out_dir, exist_ok=True)
    paths = []

    def _write(name, header, rows):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
        paths.append(path)
        return path

    taus = sorted(report.configEcho.quantileTaus)
    tau_cols = [f"q{_tau_tag(t)}" for t in taus]
    _write("scatter.csv", ",".join(["trueK", "knn", "svr", "pca"] + tau_cols), report.perTest)
    band_rows = sorted((r[0],) + tuple(r[4:]) for r in report.perTest)
    _write("quantile_bands.csv", ",".join(["trueK"] + tau_cols), band_rows)
    proj_rows = [
        (row[0], pc[0], pc[1]) for row, pc in zip(report.perTest, report.pcaProjection)
    ]
    _write("pca_projection.csv", "trueK,pc1,pc2", proj_rows)
    _write(
        "variance_share.csv",
        "component,share",
        [(i + 1, s) for i, s in enumerate(report.pcaVarianceShare)],
    )
    if svg and report.perTest:
        for col, name in ((1, "knn"), (2, "svr"), (3, "pca")):
            path = os.path.join(out_dir, f"scatter_{name}.svg")
            _scatter_svg(
                path,
                [r[0] for r in report.perTest],
                [r[col] for r in report.perTest],
                name,
            )
            paths.append(path)
    return paths


def _scatter_svg(path, xs, ys, title, size=360, pad=40):
    lo = min(min(xs), min(ys), -2.0)
    hi = max(max(xs), max(ys), 2.0)
    span = hi - lo or 1.0

    def sx(v):
        return pad + (v - lo) / span * (size - 2 * pad)

    def sy(v):
        return size - pad - (v - lo) / span * (size - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<line x1="{sx(lo)}" y1="{sy(lo)}" x2="{sx(hi)}" y2="{sy(hi)}" '
        'stroke="#bbbbbb" stroke-dasharray="4,3"/>',
        f'<text x="{size // 2}" y="18" text-anchor="middle" font-size="13">'
        f"{title}: estimated vs true curvature</text>",
    ]
    for x, y in zip(xs, ys):
        parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="#1f6fb2"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
