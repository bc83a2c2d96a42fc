"""Persistence landscapes on a fixed grid, death-vector features, averaging
and the inner-product geometry consumed by the learners.

A diagram pair (b, d) contributes the tent function
``t -> max(0, min(t - b, d - t))``; the level-k landscape value at t is the
k-th largest tent value.  Discretized landscapes are stored level-major on a
shared grid so that vectors from different samples can be averaged and
compared coordinatewise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

FEATURE_KINDS = ("H0", "H1", "H0H1")


@dataclass(frozen=True)
class LandscapeGrid:
    """Evaluation grid: t_i = start + i * step for i < points, with `levels` levels."""

    start: float
    step: float
    points: int
    levels: int

    def __post_init__(self):
        if self.step <= 0 or self.points < 2 or self.levels < 1:
            raise DomainError(
                f"invalid grid (start={self.start}, step={self.step}, "
                f"points={self.points}, levels={self.levels})"
            )

    def ticks(self):
        return self.start + self.step * np.arange(self.points)

    def to_dict(self):
        return {
            "start": self.start,
            "step": self.step,
            "points": self.points,
            "levels": self.levels,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            float(data["start"]), float(data["step"]), int(data["points"]), int(data["levels"])
        )


# Defaults for the two experiment modes.  Distance-mode VR values lie in the
# unit-disk diameter range [0, 2]; ordinal values are normalized to [0, 1]
# before gridding.
DISTANCE_GRID = LandscapeGrid(0.0, 2.0 / 400.0, 401, 30)
ORDINAL_GRID = LandscapeGrid(0.0, 1.0 / 400.0, 401, 30)


@dataclass(frozen=True)
class LandscapeVector:
    """Discretized landscape: values[k][i] = level-(k+1) landscape at tick i."""

    grid: LandscapeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.grid.levels, self.grid.points):
            raise DomainError(
                f"landscape values shaped {values.shape}, expected "
                f"{(self.grid.levels, self.grid.points)}"
            )


def landscape_from_diagram(diag, grid):
    """Evaluate the discretized persistence landscape of a diagram.

    values[k][i] is the (k+1)-th largest of max(0, min(t_i - b, d - t_i)) over
    the diagram's pairs; zero where fewer than k+1 pairs cover t_i.
    """
    out = np.zeros((grid.levels, grid.points))
    pairs = diag.pairs
    if pairs.shape[0] == 0:
        return LandscapeVector(grid, out)
    ticks = grid.ticks()[None, :]
    births = pairs[:, 0][:, None]
    deaths = pairs[:, 1][:, None]
    tents = np.minimum(ticks - births, deaths - ticks)
    np.maximum(tents, 0.0, out=tents)
    k = min(grid.levels, tents.shape[0])
    if tents.shape[0] > k:
        part = np.partition(tents, tents.shape[0] - k, axis=0)[-k:, :]
    else:
        part = tents
    part = np.sort(part, axis=0)[::-1, :]
    out[:k, :] = part
    return LandscapeVector(grid, out)


@dataclass(frozen=True)
class FeatureVector:
    """Flat feature values of one sample or average: death vector, landscape, or both.

    For kind H0H1 the first ``death_count`` coordinates are the death vector
    and the rest is the level-major landscape block; ``grid`` describes the
    landscape part (None for pure H0).
    """

    kind: str
    values: np.ndarray
    grid: LandscapeGrid | None = None

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise DomainError(f"unknown feature kind {self.kind!r}")
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or not np.all(np.isfinite(values)):
            raise DomainError("feature values must be a finite 1-d array")
        if self.kind != "H0":
            if self.grid is None:
                raise DomainError(f"kind {self.kind} requires a landscape grid")
            if values.shape[0] < self.landscape_length:
                raise DomainError("feature vector shorter than its landscape block")
        if self.kind == "H1" and values.shape[0] != self.landscape_length:
            raise DomainError("H1 feature length must equal levels * points")

    @property
    def landscape_length(self):
        if self.grid is None:
            return 0
        return self.grid.levels * self.grid.points

    @property
    def death_count(self):
        return self.values.shape[0] - self.landscape_length

    def inner_weights(self):
        """Coordinate weights of the L2-style inner product.

        Landscape coordinates carry the grid step (a Riemann approximation of
        the landscape L2 inner product); death-vector coordinates weigh 1.
        """
        w = np.ones(self.values.shape[0])
        if self.grid is not None:
            w[self.death_count:] = self.grid.step
        return w

    def embedded(self):
        """Coordinates rescaled so the plain dot product realizes l2_inner."""
        return self.values * np.sqrt(self.inner_weights())

    def compatible_with(self, other):
        return (
            self.kind == other.kind
            and self.values.shape == other.values.shape
            and self.grid == other.grid
        )


def death_vector_feature(dv):
    """H0 feature: the death vector used raw (no gridding)."""
    return FeatureVector("H0", dv.deaths)


def landscape_feature(lv):
    """H1 feature: the level-major flattened landscape."""
    return FeatureVector("H1", lv.values.reshape(-1), lv.grid)


def concat_feature(h0, h1):
    """H0-and-H1 feature: concatenation with no rescaling between blocks."""
    if h0.kind != "H0" or h1.kind != "H1":
        raise DomainError("concat_feature takes an H0 and an H1 feature")
    return FeatureVector("H0H1", np.concatenate([h0.values, h1.values]), h1.grid)


def average_vectors(vs):
    """Pointwise mean of feature vectors of identical kind, length and grid."""
    if not vs:
        raise DomainError("cannot average an empty collection")
    first = vs[0]
    for v in vs[1:]:
        if not first.compatible_with(v):
            raise DomainError("heterogeneous feature vectors cannot be averaged")
    mean = np.mean(np.stack([v.values for v in vs]), axis=0)
    return FeatureVector(first.kind, mean, first.grid)


def l2_inner(v, w):
    """Inner product: step-weighted dot on the landscape block, plain dot on deaths."""
    if not v.compatible_with(w):
        raise DomainError("inner product requires matching kind, length and grid")
    return float(np.dot(v.values * v.inner_weights(), w.values))


# ---------------------------------------------------------------------------
# serialization


def write_features_csv(path, features, labels=None):
    """Feature CSV: one row per vector, first column K (empty if unknown).

    A sidecar JSON (same path + '.meta.json') records the kind and grid.
    """
    features = list(features)
    if not features:
        raise DomainError("no feature vectors to write")
    first = features[0]
    for v in features[1:]:
        if not first.compatible_with(v):
            raise DomainError("cannot mix feature kinds in one file")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for idx, v in enumerate(features):
            label = "" if labels is None else repr(float(labels[idx]))
            row = ",".join(repr(float(x)) for x in v.values)
            fh.write(f"{label},{row}\n")
    meta = {
        "kind": first.kind,
        "grid": None if first.grid is None else first.grid.to_dict(),
        "length": int(first.values.shape[0]),
    }
    with open(str(path) + ".meta.json", "w", encoding="ascii") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_features_csv(path):
    """Read features + labels written by :func:`write_features_csv`.

    Returns (features, labels) where labels entries are None when unknown.
    """
    with open(str(path) + ".meta.json", "r", encoding="ascii") as fh:
        meta = json.load(fh)
    grid = None if meta["grid"] is None else LandscapeGrid.from_dict(meta["grid"])
    features = []
    labels = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            label_str, _, rest = line.partition(",")
            labels.append(float(label_str) if label_str else None)
            values = np.array([float(x) for x in rest.split(",")])
            if values.shape[0] != meta["length"]:
                raise DomainError(
                    f"{path}: row has {values.shape[0]} values, expected {meta['length']}"
                )
            features.append(FeatureVector(meta["kind"], values, grid))
    return features, labels
