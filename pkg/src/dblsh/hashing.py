"""Gaussian projection families, collision probabilities, and parameter derivation.

Two hash families live here. The dynamic family is the plain projection
h(o) = a . o with a standard-normal direction a; two points "collide" at
width w when their projections differ by at most w/2. The static family
adds a uniform offset and floor-quantizes, h(o) = floor((a . o + b) / w);
it backs the fixed-bucket baseline only.

A key scale property of the dynamic family makes one index serve every
search radius: the collision probability at distance r under width w0*r
equals the probability at distance 1 under width w0, so widening the
query window by the radius re-creates the exact bucket geometry of a
purpose-built index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "HashFamily",
    "IndexParams",
    "CollisionProfile",
    "dynamic_collision_probability",
    "static_collision_probability",
    "derive_alpha",
    "derive_params",
    "project",
    "project_many",
    "quantize",
    "radius_schedule",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _normal_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def _normal_upper_tail(x: float) -> float:
    return 0.5 * math.erfc(x / _SQRT2)


def dynamic_collision_probability(tau: float, w: float) -> float:
    """P[|a.o1 - a.o2| <= w/2] for points at distance tau, a standard normal.

    The projected difference is tau * N(0,1), so the probability is the
    standard normal mass of [-w/(2 tau), w/(2 tau)], evaluated in closed
    form through erf. Strictly decreasing in tau, strictly increasing in w.
    """
    if tau <= 0:
        raise ParameterError(f"tau must be > 0, got {tau}")
    if w < 0:
        raise ParameterError(f"w must be >= 0, got {w}")
    return math.erf(w / (2.0 * tau) / _SQRT2)


def static_collision_probability(tau: float, w: float) -> float:
    """Collision probability of the floor-quantized family at width w.

    Equals 2 * integral_0^w (1/tau) f(t/tau) (1 - t/w) dt with f the
    standard normal pdf, evaluated by adaptive Simpson quadrature to an
    absolute tolerance of 1e-9.
    """
    if tau <= 0:
        raise ParameterError(f"tau must be > 0, got {tau}")
    if w <= 0:
        raise ParameterError(f"w must be > 0, got {w}")

    def integrand(t: float) -> float:
        return 2.0 / tau * _normal_pdf(t / tau) * (1.0 - t / w)

    # The integrand is negligible beyond ~10 standard deviations of the
    # projection gap; truncating there keeps the recursion from falsely
    # converging on huge near-zero intervals. The dropped tail is below
    # Q(10) < 8e-24, far under the 1e-9 tolerance.
    upper = min(w, 10.0 * tau)
    return _adaptive_simpson(integrand, 0.0, upper, 1e-9)


def _adaptive_simpson(f, a: float, b: float, tol: float, panels: int = 8) -> float:
    """Adaptive Simpson with an initial even split to seed the recursion."""
    edges = np.linspace(a, b, panels + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        flo, fhi = f(lo), f(hi)
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
        total += _simpson_refine(f, lo, hi, flo, fmid, fhi, whole, tol / panels, 50)
    return total


def _simpson_refine(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    return _simpson_refine(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + \
        _simpson_refine(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)


def derive_alpha(gamma: float) -> float:
    """Exponent of the query-cost bound 1/c**alpha for initial width 2*gamma*c**2.

    alpha = gamma * f(gamma) / Q(gamma), with f the standard normal pdf and
    Q its upper tail. Strictly increasing in gamma.
    """
    if gamma <= 0:
        raise ParameterError(f"gamma must be > 0, got {gamma}")
    return gamma * _normal_pdf(gamma) / _normal_upper_tail(gamma)


@dataclass(frozen=True)
class CollisionProfile:
    """Probabilities and exponents induced by a (c, w0) choice.

    p1 is the collision probability at distance 1, p2 at distance c, both
    at width w0. rho_star = ln(1/p1) / ln(1/p2) governs how the table
    count scales with n. alpha is the bound exponent for the gamma implied
    by w0 = 2 * gamma * c**2.
    """

    p1: float
    p2: float
    rho_star: float
    alpha: float

    def __post_init__(self) -> None:
        # p1 < 1 mathematically for any finite width, but float64 erf
        # saturates above ~8 sigma, so only p2 is held strictly below 1.
        if not (0.0 < self.p2 < self.p1 <= 1.0):
            raise ParameterError(
                f"need 0 < p2 < p1, got p1={self.p1}, p2={self.p2}"
            )
        if not (0.0 < self.rho_star < 1.0):
            raise ParameterError(f"rho_star must be in (0, 1), got {self.rho_star}")


def _log_inv_collision_probability(tau: float, w: float) -> float:
    """ln(1/p(tau; w)) for the dynamic family, stable when p is close to 1.

    Goes through erfc and log1p so widths far past erf saturation still
    resolve; gives up only when even erfc underflows.
    """
    tail2 = math.erfc(w / (2.0 * tau) / _SQRT2)  # both tails outside the window
    if tail2 <= 0.0:
        raise ParameterError(
            f"width {w} at distance {tau} leaves no representable miss probability"
        )
    return -math.log1p(-tail2)


def derive_params(n: int, t: int, c: float, w0: float) -> tuple[int, int, CollisionProfile]:
    """Derive (K, L) giving the constant success probability at budget 2tL.

    K = ceil(log_{1/p2}(n/t)) and L = ceil((n/t)**rho_star), both floored
    at 1; rounding up preserves the probability targets.
    """
    if t < 1:
        raise ParameterError(f"t must be >= 1, got {t}")
    if n <= t:
        raise ParameterError(f"n must exceed t, got n={n}, t={t}")
    if c <= 1:
        raise ParameterError(f"c must be > 1, got {c}")
    if w0 <= 0:
        raise ParameterError(f"w0 must be > 0, got {w0}")

    log_inv_p1 = _log_inv_collision_probability(1.0, w0)
    log_inv_p2 = _log_inv_collision_probability(c, w0)
    rho_star = log_inv_p1 / log_inv_p2
    gamma = w0 / (2.0 * c * c)
    profile = CollisionProfile(
        p1=dynamic_collision_probability(1.0, w0),
        p2=dynamic_collision_probability(c, w0),
        rho_star=rho_star,
        alpha=derive_alpha(gamma),
    )

    ratio = n / t
    K = max(1, math.ceil(math.log(ratio) / log_inv_p2))
    L = max(1, math.ceil(ratio**rho_star))
    return K, L, profile


@dataclass(frozen=True)
class IndexParams:
    """Everything needed to rebuild an index deterministically."""

    c: float
    w0: float
    t: int
    K: int
    L: int
    mode: str = "practical"  # "theoretical" | "practical"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.c <= 1:
            raise ParameterError(f"c must be > 1, got {self.c}")
        if self.w0 <= 0:
            raise ParameterError(f"w0 must be > 0, got {self.w0}")
        if self.t < 1:
            raise ParameterError(f"t must be >= 1, got {self.t}")
        if self.K < 1 or self.L < 1:
            raise ParameterError(f"K and L must be >= 1, got K={self.K}, L={self.L}")
        if self.mode not in ("theoretical", "practical"):
            raise ParameterError(f"mode must be theoretical or practical, got {self.mode!r}")
        if self.seed < 0:
            raise ParameterError(f"seed must be non-negative, got {self.seed}")

    @classmethod
    def theoretical(cls, n: int, t: int, c: float, w0: float, seed: int = 0) -> "IndexParams":
        K, L, _ = derive_params(n, t, c, w0)
        return cls(c=c, w0=w0, t=t, K=K, L=L, mode="theoretical", seed=seed)

    @classmethod
    def practical(cls, K: int, L: int, t: int, c: float, w0: float, seed: int = 0) -> "IndexParams":
        return cls(c=c, w0=w0, t=t, K=K, L=L, mode="practical", seed=seed)

    def validate_for(self, n: int) -> None:
        """In theoretical mode, K and L must match the derivation for this n."""
        if self.mode != "theoretical":
            return
        K, L, _ = derive_params(n, self.t, self.c, self.w0)
        if (K, L) != (self.K, self.L):
            raise ParameterError(
                f"theoretical params out of date for n={n}: stored (K={self.K}, "
                f"L={self.L}), derived (K={K}, L={L})"
            )


def _box_muller(bitgen: np.random.PCG64, count: int) -> np.ndarray:
    """Standard normals from the raw PCG64 stream via Box-Muller.

    Consumes two raw 64-bit words per pair of normals, mapping each word to
    a double in [0, 1) by taking the top 53 bits. The raw stream is fixed
    by the PCG64 algorithm, so the output is identical across platforms
    and library versions.
    """
    pairs = (count + 1) // 2
    raw = bitgen.random_raw(2 * pairs)
    u = (raw >> np.uint64(11)).astype(np.float64) * (2.0**-53)
    u1 = 1.0 - u[0::2]  # (0, 1]: keeps the log finite
    u2 = u[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = (2.0 * np.pi) * u2
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:count]


@dataclass(frozen=True)
class HashFamily:
    """L tables of K Gaussian projection directions over R^dim.

    ``directions`` has shape (L, K, dim) with i.i.d. standard-normal
    entries. ``offsets`` has shape (L, K) with entries uniform in [0, 1);
    they are unit offsets, scaled by the active bucket width when the
    static family quantizes, which keeps the additive term uniform over a
    cell at every width a query may use. The dynamic family ignores them.
    """

    L: int
    K: int
    dim: int
    directions: np.ndarray
    offsets: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        if self.directions.shape != (self.L, self.K, self.dim):
            raise ParameterError(
                f"directions shape {self.directions.shape} != {(self.L, self.K, self.dim)}"
            )
        if self.offsets.shape != (self.L, self.K):
            raise ParameterError(
                f"offsets shape {self.offsets.shape} != {(self.L, self.K)}"
            )
        self.directions.setflags(write=False)
        self.offsets.setflags(write=False)

    @classmethod
    def from_seed(cls, seed: int, L: int, K: int, dim: int) -> "HashFamily":
        """Generate the family from one seed.

        Stream order: all L*K*dim direction entries first, laid out
        table-major then function then coordinate, followed by the L*K
        unit offsets. Regeneration from the same (seed, L, K, dim) is
        bit-identical.
        """
        if L < 1 or K < 1 or dim < 1:
            raise ParameterError(f"L, K, dim must be >= 1, got {(L, K, dim)}")
        bitgen = np.random.PCG64(seed)
        directions = _box_muller(bitgen, L * K * dim).reshape(L, K, dim)
        raw = bitgen.random_raw(L * K)
        offsets = ((raw >> np.uint64(11)).astype(np.float64) * (2.0**-53)).reshape(L, K)
        return cls(L=L, K=K, dim=dim, directions=directions, offsets=offsets, seed=seed)


def project(fam: HashFamily, o: np.ndarray) -> np.ndarray:
    """All L compound hashes of one point: an (L, K) array of dot products."""
    o = np.asarray(o, dtype=np.float64)
    if o.shape != (fam.dim,):
        raise ParameterError(f"point has shape {o.shape}, family expects ({fam.dim},)")
    return fam.directions @ o


def project_many(fam: HashFamily, coords: np.ndarray, table: int) -> np.ndarray:
    """Projections of an (n, dim) matrix under one table: an (n, K) array."""
    if coords.shape[1] != fam.dim:
        raise ParameterError(
            f"points have dimension {coords.shape[1]}, family expects {fam.dim}"
        )
    return coords @ fam.directions[table].T


def quantize(fam: HashFamily, o: np.ndarray, w: float) -> np.ndarray:
    """Static bucket ids floor((a.o + b)/w) with b = offsets * w, as (L, K) ints."""
    if w <= 0:
        raise ParameterError(f"w must be > 0, got {w}")
    return np.floor(project(fam, o) / w + fam.offsets).astype(np.int64)


def radius_schedule(c: float, r_max: float) -> list[float]:
    """Geometric radii 1, c, c**2, ... up to and including the first >= r_max.

    Entries are computed as exact powers c**i rather than by cumulative
    multiplication so the ratio between neighbors is exact in exponent form.
    """
    if c <= 1:
        raise ParameterError(f"c must be > 1, got {c}")
    if r_max < 1:
        raise ParameterError(f"r_max must be >= 1, got {r_max}")
    radii: list[float] = []
    i = 0
    while True:
        r = c**i
        radii.append(r)
        if r >= r_max:
            return radii
        i += 1
