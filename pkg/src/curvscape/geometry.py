"""Geometry of unit disks in surfaces of constant Gaussian curvature.

The model surface for curvature K is the Euclidean plane (K = 0), the sphere
of radius 1/sqrt(K) (K > 0) or the Poincare disk of curvature K (K < 0).
Points live on the unit geodesic disk and are addressed by polar coordinates
(r, theta) with r the geodesic distance to the disk center.

All distance-like quantities are evaluated through half-angle ("haversine")
rearrangements of the spherical/hyperbolic laws of cosines.  These agree with
the textbook formulas exactly in real arithmetic but stay accurate for nearby
points and for |K| approaching zero, where the naive acos/acosh forms lose
all precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, NumericalError

TWO_PI = 2.0 * math.pi

# Largest spherical curvature for which the unit disk still fits on the sphere
# (radial coordinate r = 1 reaches the antipode exactly at K = pi^2).
MAX_SPHERICAL_K = math.pi ** 2

# Below this |K| closed forms switch to series expansions of the K-dependence.
SMALL_K = 1e-6

_EQUILATERAL_FLAT = 2.0 / math.sqrt(3.0)


class PolarPoint(NamedTuple):
    """A point of the unit disk: geodesic radius r in [0, 1], angle in [0, 2pi)."""

    r: float
    theta: float


def _check_curvature(k):
    if not math.isfinite(k):
        raise DomainError(f"curvature must be finite, got {k!r}")
    if k > MAX_SPHERICAL_K:
        raise DomainError(
            f"curvature {k} exceeds {MAX_SPHERICAL_K:.6f}; the unit disk no longer "
            "embeds in the model sphere"
        )


def _check_point(p):
    r, theta = p
    if not (0.0 <= r <= 1.0) or not math.isfinite(theta):
        raise DomainError(f"invalid polar point {p!r}: need 0 <= r <= 1 and finite angle")


def model_radius(k):
    """Radius 1/sqrt(|K|) of the model sphere or Poincare disk (K != 0)."""
    if k == 0.0:
        raise DomainError("the flat plane has no model radius")
    _check_curvature(k)
    return 1.0 / math.sqrt(abs(k))


# ---------------------------------------------------------------------------
# geodesic distance


def _dist_euclidean(r1, th1, r2, th2):
    # |p - q|^2 = (r1 - r2)^2 + 4 r1 r2 sin^2((th1 - th2)/2), cancellation-free.
    dr = r1 - r2
    s = np.sin(0.5 * (th1 - th2))
    return np.sqrt(dr * dr + 4.0 * r1 * r2 * s * s)


def _dist_spherical(r1, th1, r2, th2, k):
    # Central angle via atan2(|x cross y|, x dot y) with both products expanded
    # in polar form; colatitudes a_i = r_i sqrt(K).
    sq = np.sqrt(k)
    a1 = r1 * sq
    a2 = r2 * sq
    sh = np.sin(0.5 * (th1 - th2))
    hav_th = sh * sh
    da = (r2 - r1) * sq
    cross_t = np.sin(a2) * np.sin(th1 - th2)
    cross_r = np.sin(da) - 2.0 * np.cos(a1) * np.sin(a2) * hav_th
    dot = np.cos(da) - 2.0 * np.sin(a1) * np.sin(a2) * hav_th
    return np.arctan2(np.hypot(cross_t, cross_r), dot) / sq


def _dist_hyperbolic(r1, th1, r2, th2, k):
    # sinh^2(d sqrt(-K)/2) = sinh^2(dp/2) + sinh(p1) sinh(p2) sin^2(dth/2),
    # the hyperbolic half-angle form of 2R atanh(|z-w| / |1 - z conj(w)|).
    sq = np.sqrt(-k)
    p1 = r1 * sq
    p2 = r2 * sq
    sh = np.sin(0.5 * (th1 - th2))
    dp = 0.5 * (r1 - r2) * sq
    shd = np.sinh(dp)
    h = shd * shd + np.sinh(p1) * np.sinh(p2) * sh * sh
    return 2.0 * np.arcsinh(np.sqrt(h)) / sq


def _distances(r1, th1, r2, th2, k):
    """Geodesic distance in M_K, elementwise over numpy arrays or scalars."""
    if k > 0.0:
        return _dist_spherical(r1, th1, r2, th2, k)
    if k < 0.0:
        return _dist_hyperbolic(r1, th1, r2, th2, k)
    return _dist_euclidean(r1, th1, r2, th2)


def geodesic_distance(p, q, k):
    """Geodesic distance between two unit-disk points on the surface of curvature K.

    Symmetric by construction (arguments are canonically ordered before
    evaluation) and zero exactly when the points coincide.
    """
    _check_curvature(k)
    _check_point(p)
    _check_point(q)
    if (q[0], q[1]) < (p[0], p[1]):
        p, q = q, p
    d = float(_distances(p[0], p[1], q[0], q[1], k))
    if not math.isfinite(d) or d < 0.0:
        raise NumericalError(f"geodesic distance of {p}, {q} at K={k} gave {d}")
    return d


# ---------------------------------------------------------------------------
# disk areas and inversion sampling


def _sinc_like(x, hyperbolic):
    """sin(x)/x or sinh(x)/x with a series guard near zero."""
    if abs(x) < 1e-4:
        x2 = x * x
        if hyperbolic:
            return 1.0 + x2 / 6.0 + x2 * x2 / 120.0
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    return math.sinh(x) / x if hyperbolic else math.sin(x) / x


def disk_area(r, k):
    """Area of the geodesic disk of radius r on the surface of curvature K.

    Evaluates (4 pi / K) sin^2(r sqrt(K) / 2) and its hyperbolic analogue in
    the factored form pi r^2 (sin(x)/x)^2, which is exact and stays finite as
    K -> 0.
    """
    _check_curvature(k)
    if not (r >= 0.0 and math.isfinite(r)):
        raise DomainError(f"disk radius must be finite and >= 0, got {r!r}")
    if k > 0.0 and r > math.pi / math.sqrt(k):
        raise DomainError(f"radius {r} exceeds the sphere diameter pi/sqrt({k})")
    if k == 0.0:
        return math.pi * r * r
    x = 0.5 * r * math.sqrt(abs(k))
    s = _sinc_like(x, hyperbolic=k < 0.0)
    return math.pi * r * r * s * s


def inverse_cdf_radius(u, k):
    """Radius r in [0, 1] with area-fraction CDF value u on the curvature-K disk.

    Inverts F(r) = A(r)/A(1); sampling r = F^{-1}(U) with U uniform yields the
    radial law of the uniform area measure.
    """
    _check_curvature(k)
    if not (0.0 <= u <= 1.0):
        raise DomainError(f"CDF argument must lie in [0, 1], got {u!r}")
    if u == 0.0:
        return 0.0
    if u == 1.0:
        return 1.0
    return float(_inverse_cdf_array(u, k))


def _inverse_cdf_array(u, k):
    u = np.asarray(u, dtype=float)
    if abs(k) < SMALL_K:
        # Unified expansion in K (identical for both signs), truncation < 1e-12.
        su = np.sqrt(u)
        return su * (
            1.0
            + k * (u - 1.0) / 24.0
            + (k * k / 16.0) * (1.0 / 120.0 - u / 12.0 + 3.0 * u * u / 40.0)
        )
    if k > 0.0:
        s = math.sqrt(k)
        return (2.0 / s) * np.arcsin(np.sqrt(u) * math.sin(0.5 * s))
    s = math.sqrt(-k)
    return (2.0 / s) * np.arcsinh(np.sqrt(u) * math.sinh(0.5 * s))


def sample_disk(k, m, rng):
    """Draw m points uniformly (area measure) from the unit disk of curvature K.

    Angles are uniform on [0, 2pi); radii come from inversion sampling of the
    disk-area CDF.  Replay is deterministic for an equally seeded generator.
    """
    r, theta = sample_disk_arrays(k, m, rng)
    return [PolarPoint(float(ri), float(ti)) for ri, ti in zip(r, theta)]


def sample_disk_arrays(k, m, rng):
    """Array-valued variant of :func:`sample_disk`: returns (r, theta)."""
    _check_curvature(k)
    if m < 1:
        raise DomainError(f"need at least one sample point, got m={m}")
    theta = TWO_PI * rng.random(m)
    theta[theta >= TWO_PI] = 0.0  # guard the half-open interval
    u = rng.random(m)
    r = np.clip(_inverse_cdf_array(u, k), 0.0, 1.0)
    return r, theta


# ---------------------------------------------------------------------------
# triangles


@dataclass(frozen=True)
class TriangleSides:
    """Side lengths of a geodesic triangle on M_K, ordered a >= b >= c > 0.

    Construction canonicalizes the order and rejects degenerate inputs:
    collinear triples (a = b + c), non-positive lengths, and, for K > 0,
    triangles containing an antipodal pair (a >= pi/sqrt(K)).
    """

    a: float
    b: float
    c: float
    k: float

    def __post_init__(self):
        _check_curvature(self.k)
        sides = sorted((float(self.a), float(self.b), float(self.c)), reverse=True)
        if not all(math.isfinite(s) for s in sides):
            raise DomainError(f"triangle sides must be finite, got {sides}")
        object.__setattr__(self, "a", sides[0])
        object.__setattr__(self, "b", sides[1])
        object.__setattr__(self, "c", sides[2])
        if self.c <= 0.0:
            raise DomainError(f"triangle sides must be positive, got {sides}")
        if self.a >= self.b + self.c:
            raise DomainError(f"collinear or impossible triangle: {sides}")
        if self.k > 0.0 and self.a >= math.pi / math.sqrt(self.k):
            raise DomainError(
                f"side {self.a} reaches an antipodal pair on the K={self.k} sphere"
            )

    @classmethod
    def from_vertices(cls, p, q, r, k):
        """Build sides from three unit-disk points via geodesic distances."""
        return cls(
            geodesic_distance(q, r, k),
            geodesic_distance(p, r, k),
            geodesic_distance(p, q, k),
            k,
        )


@dataclass(frozen=True)
class TriangleBirthDeath:
    """Birth a/2, death and multiplicative persistence of a triangle's 1-cycle.

    ``death > birth`` (equivalently ``has_cycle``) holds exactly when the
    triangle contributes an interval to degree-1 persistence; the death then
    equals the circumradius.
    """

    birth: float
    death: float
    persistence: float
    has_cycle: bool


def _law_cos_angle(p, q, opp, k):
    """Cosine of the angle between sides p and q, given the opposite side.

    Spherical/hyperbolic branches use versine rearrangements so the Euclidean
    limit (p^2 + q^2 - opp^2) / (2 p q) is recovered smoothly as K -> 0.
    """
    if k == 0.0:
        val = (p * p + q * q - opp * opp) / (2.0 * p * q)
    elif k > 0.0:
        s = math.sqrt(k)
        vp = 2.0 * math.sin(0.5 * p * s) ** 2
        vq = 2.0 * math.sin(0.5 * q * s) ** 2
        vo = 2.0 * math.sin(0.5 * opp * s) ** 2
        val = (vp + vq - vo - vp * vq) / (math.sin(p * s) * math.sin(q * s))
    else:
        s = math.sqrt(-k)
        up = 2.0 * math.sinh(0.5 * p * s) ** 2
        uq = 2.0 * math.sinh(0.5 * q * s) ** 2
        uo = 2.0 * math.sinh(0.5 * opp * s) ** 2
        val = (up + uq + up * uq - uo) / (math.sinh(p * s) * math.sinh(q * s))
    return min(1.0, max(-1.0, val))


def _law_cos_side(p, q, cos_gamma, k):
    """Side opposite the angle gamma enclosed by sides p and q.

    Half-angle form: sin^2(x s / 2) = sin^2((p-q) s / 2) + sin(ps) sin(qs) hav(gamma)
    (sinh for K < 0), which stays accurate for small K and nearby endpoints.
    """
    hav = 0.5 * (1.0 - cos_gamma)
    if k == 0.0:
        dpq = p - q
        return math.sqrt(max(0.0, dpq * dpq + 4.0 * p * q * hav))
    if k > 0.0:
        s = math.sqrt(k)
        sd = math.sin(0.5 * (p - q) * s)
        h = sd * sd + math.sin(p * s) * math.sin(q * s) * hav
        h = min(1.0, max(0.0, h))
        return 2.0 * math.atan2(math.sqrt(h), math.sqrt(1.0 - h)) / s
    s = math.sqrt(-k)
    sd = math.sinh(0.5 * (p - q) * s)
    h = sd * sd + math.sinh(p * s) * math.sinh(q * s) * hav
    return 2.0 * math.asinh(math.sqrt(max(0.0, h))) / s


_BISECT_TOL = 1e-12
_BISECT_MAX_ITER = 200


def triangle_chart(sides):
    """Polar coordinates, about the midpoint M of the longest side, of the
    triangle's vertices and derived data.

    Returns a dict with the vertex positions ``A`` = (m, phi), ``B`` = (a/2, pi),
    ``C`` = (a/2, 0), the median length ``m`` and ``cos_phi``/``sin_phi`` of the
    angle at M between the rays M->A and M->C.  The perpendicular bisector of
    BC is the ray at angle pi/2.
    """
    a, b, c, k = sides.a, sides.b, sides.c, sides.k
    cos_beta = _law_cos_angle(c, a, b, k)
    m = _law_cos_side(c, 0.5 * a, cos_beta, k)
    cos_phi = _law_cos_angle(m, 0.5 * a, b, k)
    sin_phi = math.sqrt(max(0.0, 1.0 - cos_phi * cos_phi))
    return {
        "A": (m, math.acos(cos_phi)),
        "B": (0.5 * a, math.pi),
        "C": (0.5 * a, 0.0),
        "median": m,
        "cos_phi": cos_phi,
        "sin_phi": sin_phi,
    }


def circumcenter_offset(sides):
    """Distance from the midpoint of the longest side to the circumcenter.

    Bisects g(t) = d(P_t, A) - d(P_t, B) along the perpendicular bisector of
    the longest side, where P_t sits at distance t from the midpoint on the
    side of A.  Only valid when the triangle has persistent H1 (median > a/2);
    the root is bracketed in [0, median].
    """
    a, k = sides.a, sides.k
    chart = triangle_chart(sides)
    m = chart["median"]
    half_a = 0.5 * a
    if m <= half_a:
        raise DomainError("triangle has no interior circumcenter: median <= a/2")
    sin_phi = chart["sin_phi"]

    def g(t):
        return _law_cos_side(t, m, sin_phi, k) - _law_cos_side(t, half_a, 0.0, k)

    lo, hi = 0.0, m
    g_hi = g(hi)
    if g_hi > _BISECT_TOL:
        raise NumericalError(
            f"circumcenter bracket failed for sides {(a, sides.b, sides.c)} at K={k}"
        )
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if abs(g_mid) <= _BISECT_TOL:
            return mid
        if g_mid > 0.0:
            lo = mid
        else:
            hi = mid
    raise NumericalError(
        f"circumcenter bisection did not converge for sides "
        f"{(a, sides.b, sides.c)} at K={k}"
    )


def triangle_birth_death(sides):
    """Birth, death and persistence of the 1-cycle spanned by a triangle.

    The birth is half the longest side.  The cycle is persistent exactly when
    the median to the longest side exceeds the birth; its death is then the
    circumradius, located by bisection on the perpendicular bisector.
    """
    a, k = sides.a, sides.k
    birth = 0.5 * a
    chart = triangle_chart(sides)
    if chart["median"] <= birth:
        return TriangleBirthDeath(birth, birth, 1.0, False)
    t_star = circumcenter_offset(sides)
    death = _law_cos_side(t_star, birth, 0.0, k)
    return TriangleBirthDeath(birth, death, death / birth, True)


def equilateral_persistence(a, k):
    """Persistence death/birth of the equilateral triangle with side a on M_K.

    Closed form: (2/(a sqrt(K))) asin((2/sqrt(3)) sin(a sqrt(K)/2)) for K > 0,
    the sinh analogue for K < 0 and 2/sqrt(3) at K = 0; near K = 0 a unified
    series in K keeps the evaluation continuous.
    """
    _check_curvature(k)
    if not (a > 0.0 and math.isfinite(a)):
        raise DomainError(f"side length must be positive, got {a!r}")
    if k > 0.0 and a >= (2.0 * math.pi / 3.0) / math.sqrt(k):
        raise DomainError(
            f"no equilateral triangle of side {a} exists on the K={k} sphere"
        )
    if abs(k) < SMALL_K:
        a2k = a * a * k
        return _EQUILATERAL_FLAT * (1.0 + a2k / 72.0 + 11.0 * a2k * a2k / 5760.0)
    if k > 0.0:
        x = 0.5 * a * math.sqrt(k)
        return math.asin(min(1.0, _EQUILATERAL_FLAT * math.sin(x))) / x
    x = 0.5 * a * math.sqrt(-k)
    return math.asinh(_EQUILATERAL_FLAT * math.sinh(x)) / x


# ---------------------------------------------------------------------------
# serialization


def write_points_csv(path, points):
    """Write points as CSV with header ``r,theta`` at full double precision."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("r,theta\n")
        for r, theta in points:
            fh.write(f"{float(r)!r},{float(theta)!r}\n")


def read_points_csv(path):
    """Read a point list written by :func:`write_points_csv`."""
    points = []
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip()
        if header != "r,theta":
            raise DomainError(f"{path}: expected header 'r,theta', got {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            r_str, theta_str = line.split(",")
            points.append(PolarPoint(float(r_str), float(theta_str)))
    return points
