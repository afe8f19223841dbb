"""Shared numeric kernel: reproducible random streams, quadrature rules,
and the special functions the rest of the package is built on.

Everything here is deterministic given its inputs. Random streams are
counter-based (keyed Philox), so a (seed, stream_id) pair plus a draw count
identifies every variate ever produced, independent of platform or process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtri

__all__ = [
    "StochlabError",
    "DomainError",
    "NumericError",
    "RngStream",
    "QuadratureRule",
    "DEFAULT_GL_ORDER",
    "DEFAULT_GH_ORDER",
    "DEFAULT_CONTOUR_POINTS",
    "heat_kernel",
    "bessel_i",
    "gauss_2f1",
    "hermite",
    "theta3",
    "zeta_dirichlet",
    "xi_reference",
    "xi_moment_function",
    "det_and_solve",
]

DEFAULT_GL_ORDER = 128
DEFAULT_GH_ORDER = 64
DEFAULT_CONTOUR_POINTS = 256

_BESSEL_SERIES_CUTOFF = 30.0
_TWO53 = float(1 << 53)


class StochlabError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(StochlabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericError(StochlabError, ArithmeticError):
    """A computation could not reach its accuracy target within budget."""


def _mix64(a: int, b: int) -> int:
    """splitmix64-style finalizer combining two ints into one 64-bit id."""
    x = (a * 0x9E3779B97F4A7C15 + b) & 0xFFFFFFFFFFFFFFFF
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return x ^ (x >> 31)


@dataclass
class RngStream:
    """Counter-based random stream keyed by (seed, stream_id).

    Substreams for parallel shards are derived by index via `substream`,
    never from time or pid, so any sharded computation replays exactly.
    Gaussian variates use the inverse CDF applied to uniforms that are
    strictly inside (0, 1) by construction.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        if not (0 <= self.seed < 2**64) or not (0 <= self.stream_id < 2**64):
            raise DomainError("seed and stream_id must fit in uint64")
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def substream(self, index: int) -> "RngStream":
        """Independent child stream; the id mixing is collision-resistant."""
        return RngStream(self.seed, _mix64(self.stream_id, index))

    def uniforms(self, shape: int | tuple[int, ...]) -> np.ndarray:
        """Uniforms in the open interval (0, 1), 53-bit resolution."""
        k = self._gen.integers(0, 1 << 53, size=shape, dtype=np.uint64)
        return (k.astype(np.float64) + 0.5) / _TWO53

    def normals(self, shape: int | tuple[int, ...]) -> np.ndarray:
        return ndtri(self.uniforms(shape))

    def choice_index(self, cumprobs: np.ndarray) -> int:
        """Draw an index with P(i) = cumprobs[i] - cumprobs[i-1]."""
        u = float(self.uniforms(1)[0]) * cumprobs[-1]
        return int(np.searchsorted(cumprobs, u, side="left"))


@dataclass
class QuadratureRule:
    """Nodes and weights for sum(w * f(x)) approximations of integrals.

    For the contour rule the nodes are complex and `integrate` computes the
    normalized contour integral (2 pi i)^(-1) * closed integral of f, so a
    simple pole of residue r inside the circle integrates to r.
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str = "custom"

    @classmethod
    def gauss_legendre(cls, a: float, b: float, order: int = DEFAULT_GL_ORDER) -> "QuadratureRule":
        if not (b > a):
            raise DomainError("gauss_legendre needs b > a")
        x, w = np.polynomial.legendre.leggauss(order)
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        return cls(mid + half * x, half * w, kind="gauss_legendre")

    @classmethod
    def composite_gauss_legendre(
        cls, breakpoints: Sequence[float], order: int = DEFAULT_GL_ORDER
    ) -> "QuadratureRule":
        """One Gauss-Legendre panel per consecutive breakpoint pair."""
        pts = list(breakpoints)
        if len(pts) < 2 or any(b <= a for a, b in zip(pts, pts[1:])):
            raise DomainError("breakpoints must be strictly increasing")
        panels = [cls.gauss_legendre(a, b, order) for a, b in zip(pts, pts[1:])]
        return cls(
            np.concatenate([p.nodes for p in panels]),
            np.concatenate([p.weights for p in panels]),
            kind="composite_gauss_legendre",
        )

    @classmethod
    def gauss_hermite(
        cls, order: int = DEFAULT_GH_ORDER, loc: float = 0.0, scale: float = 1.0
    ) -> "QuadratureRule":
        """Rule computing E[f(W)] for W normal with mean loc, sd scale."""
        if scale <= 0.0:
            raise DomainError("gauss_hermite needs scale > 0")
        x, w = np.polynomial.hermite.hermgauss(order)
        return cls(loc + scale * math.sqrt(2.0) * x, w / math.sqrt(math.pi), kind="gauss_hermite")

    @classmethod
    def trapezoid_contour(
        cls, center: complex, radius: float, n: int = DEFAULT_CONTOUR_POINTS
    ) -> "QuadratureRule":
        """Equispaced circle rule; spectrally accurate for analytic f."""
        if radius <= 0.0:
            raise DomainError("trapezoid_contour needs radius > 0")
        theta = 2.0 * math.pi * np.arange(n) / n
        offs = radius * np.exp(1j * theta)
        return cls(center + offs, offs / n, kind="trapezoid_contour")

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> complex | float:
        vals = f(self.nodes)
        out = np.sum(self.weights * vals)
        return complex(out) if np.iscomplexobj(out) else float(out)


def heat_kernel(t: float, a, b):
    """Gaussian transition density exp(-(b-a)^2 / 2t) / sqrt(2 pi t).

    Accepts real or complex positions (analytic continuation in a and b);
    the time must be real and positive.
    """
    if not np.isreal(t) or not t > 0.0:
        raise DomainError(f"heat_kernel needs t > 0, got {t!r}")
    d = np.asarray(b) - np.asarray(a)
    return np.exp(-(d * d) / (2.0 * t)) / math.sqrt(2.0 * math.pi * t)


def _bessel_i_series(nu: float, z: np.ndarray) -> np.ndarray:
    # sum_m (z/2)^(2m+nu) / (m! Gamma(m+nu+1)), stable for z <= ~30
    # z = 0: the leading power gives 1 at nu = 0, 0 for nu > 0, +inf for
    # -1 < nu < 0 (integrable singularity of the density at the origin)
    at_zero = np.inf if nu < 0.0 else (1.0 if nu == 0.0 else 0.0)
    out = np.full_like(z, at_zero)
    pos = z > 0.0
    if not np.any(pos):
        return out
    half = z[pos] / 2.0
    term = np.exp(nu * np.log(half) - math.lgamma(nu + 1.0))
    total = term.copy()
    zz4 = half * half
    for m in range(1, 400):
        term = term * zz4 / (m * (m + nu))
        total += term
        if np.all(term <= 1e-17 * np.abs(total)):
            out[pos] = total
            return out
    raise NumericError("bessel_i series did not converge in 400 terms")


def _bessel_i_scaled_asymptotic(nu: float, z: np.ndarray) -> np.ndarray:
    # exp(-z) I_nu(z) ~ (2 pi z)^(-1/2) sum_k (-1)^k a_k(nu) / z^k, z large;
    # truncation at the smallest term leaves an error ~exp(-2z), negligible
    # beyond the series cutoff.
    mu = 4.0 * nu * nu
    term = np.ones_like(z)
    total = term.copy()
    prev = np.full_like(z, np.inf)
    for k in range(1, 60):
        term = -term * (mu - (2 * k - 1) ** 2) / (8.0 * z * k)
        if np.all(np.abs(term) >= np.abs(prev)):
            break
        total += term
        prev = np.abs(term)
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total / np.sqrt(2.0 * math.pi * z)


def bessel_i(nu: float, z, scaled: bool = False):
    """Modified Bessel function I_nu(z) for real order nu > -1 and z >= 0.

    With scaled=True returns exp(-z) * I_nu(z), which stays bounded for
    large z and is what density evaluations should combine with their own
    exponent bookkeeping.
    """
    if nu <= -1.0:
        raise DomainError("bessel_i requires nu > -1")
    arr = np.asarray(z, dtype=np.float64)
    if np.any(arr < 0.0):
        raise DomainError("bessel_i requires z >= 0")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    small = arr <= _BESSEL_SERIES_CUTOFF
    if np.any(small):
        v = _bessel_i_series(nu, arr[small])
        out[small] = v * np.exp(-arr[small]) if scaled else v
    if np.any(~small):
        v = _bessel_i_scaled_asymptotic(nu, arr[~small])
        out[~small] = v if scaled else v * np.exp(arr[~small])
    return float(out[0]) if scalar else out


def gauss_2f1(a: float, b: float, c: float, z: float, max_terms: int = 20000) -> float:
    """Gauss hypergeometric series 2F1(a, b; c; z) for |z| < 1.

    Plain power series with a partial-sum error estimate; raises
    NumericError if the term budget cannot reach ~1e-13 relative accuracy.
    A terminating series (a or b a nonpositive integer) is summed exactly.
    """
    if abs(z) >= 1.0:
        raise DomainError("gauss_2f1 series needs |z| < 1")
    terminates = (a <= 0.0 and a == int(a)) or (b <= 0.0 and b == int(b))
    if c <= 0.0 and c == int(c):
        ca, cb = int(-a) if a == int(a) and a <= 0 else None, int(-b) if b == int(b) and b <= 0 else None
        stop = min(x for x in (ca, cb) if x is not None) if (ca is not None or cb is not None) else None
        if stop is None or stop >= -int(c) + 1:
            raise DomainError("gauss_2f1 pole: c is a nonpositive integer")
    term = 1.0
    total = 1.0
    for m in range(max_terms):
        term *= (a + m) * (b + m) / ((c + m) * (1.0 + m)) * z
        total += term
        if term == 0.0:
            return total
        if abs(term) <= 1e-16 * abs(total) and not terminates:
            return total
    bound = abs(term) / max(1e-300, 1.0 - abs(z))
    if bound > 1e-13 * abs(total):
        raise NumericError(
            f"gauss_2f1 did not converge: partial-sum bound {bound:.3e} after {max_terms} terms"
        )
    return total


def hermite(n: int, x):
    """Physicists' Hermite polynomial H_n(x), exact integer coefficients."""
    if n < 0 or n != int(n):
        raise DomainError("hermite needs integer n >= 0")
    if n > 200:
        raise DomainError("hermite order capped at 200")
    xa = np.asarray(x)
    xa = xa.astype(np.complex128) if np.iscomplexobj(xa) else xa.astype(np.float64)
    total = np.zeros_like(xa)
    fn = math.factorial(n)
    for m in range(n // 2 + 1):
        coef = (-1) ** m * fn // (math.factorial(m) * math.factorial(n - 2 * m))
        total = total + float(coef) * (2.0 * xa) ** (n - 2 * m)
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return complex(total) if np.iscomplexobj(total) else float(total)
    return total


def theta3(v: complex, tau: complex, n_cap: int = 10**6) -> complex:
    """Jacobi theta function sum_n exp(i pi tau n^2 + 2 pi i n v).

    The truncation index is chosen adaptively from Im tau and Im v so the
    dropped tail is below 1e-16 of the leading term; raises DomainError for
    Im tau < 1e-3 where the sum is effectively intractable, and NumericError
    if the adaptive index exceeds the cap.
    """
    tau = complex(tau)
    v = complex(v)
    it = tau.imag
    if it < 1e-3:
        raise DomainError(f"theta3 needs Im tau >= 1e-3, got {it:.3e}")
    iv = abs(v.imag)
    # need pi*it*n^2 - 2*pi*iv*n > 37 for the dropped terms
    disc = iv * iv + 37.0 * it / math.pi
    n_max = int(math.ceil((iv + math.sqrt(disc)) / it)) + 2
    if n_max > n_cap:
        raise NumericError(f"theta3 truncation index {n_max} exceeds cap {n_cap}")
    n = np.arange(1, n_max + 1)
    terms = np.exp(1j * math.pi * tau * n * n) * 2.0 * np.cos(2.0 * math.pi * n * v)
    return 1.0 + complex(np.sum(terms))


def zeta_dirichlet(s: float, terms: int = 10**6) -> float:
    """Riemann zeta for real s > 1 by direct summation plus tail estimate.

    The tail past M = terms is replaced by its Euler-Maclaurin form
    M^(1-s)/(s-1) + M^(-s)/2 + s M^(-s-1)/12, leaving an error O(s^3 M^-s-3).
    """
    if s <= 1.0:
        raise DomainError("zeta_dirichlet needs s > 1")
    m = np.arange(1, terms, dtype=np.float64)
    head = float(np.sum(m ** (-s)))
    tail = terms ** (1.0 - s) / (s - 1.0) + 0.5 * terms ** (-s) + s * terms ** (-s - 1.0) / 12.0
    return head + tail


def xi_reference(s: float) -> float:
    """Completed-zeta product s(s-1)/2 * pi^(-s/2) Gamma(s/2) zeta(s), s > 1."""
    if s <= 1.0:
        raise DomainError("xi_reference needs s > 1")
    return 0.5 * s * (s - 1.0) * math.pi ** (-0.5 * s) * math.gamma(0.5 * s) * zeta_dirichlet(s)


def _theta_tail_cutoff(p: float) -> float:
    """Smallest convenient U with u^p exp(-pi u) < 1e-18 for all u >= U."""
    u = 10.0
    for _ in range(60):
        if math.pi * u - p * math.log(u) > 41.5:
            return u
        u *= 1.25
    raise NumericError("theta integral cutoff search failed")


def xi_moment_function(s: float, order: int = DEFAULT_GL_ORDER) -> float:
    """Entire completed-zeta function via the theta-kernel integral.

    Computes 1/2 + (s(s-1)/4) * integral_1^inf (u^(s/2-1) + u^((1-s)/2-1))
    (theta3(0, iu) - 1) du, valid for all real s in (0, 60]; for s > 1.01
    the value is cross-checked against the product form and a NumericError
    is raised on disagreement beyond 1e-9 relative.
    """
    if not (0.0 < s <= 60.0):
        raise DomainError("xi_moment_function supports 0 < s <= 60")
    p = max(0.5 * s - 1.0, 0.5 * (1.0 - s) - 1.0, 0.0)
    upper = _theta_tail_cutoff(p)
    breaks = [1.0]
    while breaks[-1] < upper:
        breaks.append(min(breaks[-1] * 2.0, upper))
    rule = QuadratureRule.composite_gauss_legendre(breaks, order)

    def integrand(u: np.ndarray) -> np.ndarray:
        th = np.array([theta3(0.0, 1j * ui).real - 1.0 for ui in u])
        return (u ** (0.5 * s - 1.0) + u ** (0.5 * (1.0 - s) - 1.0)) * th

    val = 0.5 + 0.25 * s * (s - 1.0) * rule.integrate(integrand)
    if s > 1.01:
        ref = xi_reference(s)
        if abs(val - ref) > 1e-9 * abs(ref):
            raise NumericError(
                f"xi route disagreement at s={s}: integral {val!r} vs product {ref!r}"
            )
    return val


def det_and_solve(matrix: np.ndarray, rhs: np.ndarray | None = None):
    """Determinant, optionally with a linear solve against rhs.

    Returns (det, None) without rhs; with rhs returns (det, x) solving
    matrix @ x = rhs and raises NumericError if the matrix is singular to
    working precision.
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DomainError("det_and_solve needs a square matrix")
    d = np.linalg.det(a)
    if rhs is None:
        return d, None
    try:
        x = np.linalg.solve(a, np.asarray(rhs))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"singular matrix in det_and_solve: {exc}") from exc
    return d, x
