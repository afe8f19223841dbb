"""Correlation kernels of noncolliding diffusions and their scaling limits.

Finite starting configurations get two interchangeable kernel evaluators:
a direct sum over the support points (Gaussian-averaged interpolation
weights) and a closed-contour form that also handles multiple points.
Both carry the time-ordering correction -1(s>t) p_{s-t}(x|y), so they are
asymmetric in (s,x) <-> (t,y).

The integer-lattice start has an explicit kernel: the extended sine kernel
plus a correction series whose terms are damped by exp(-2 pi^2 s n^2).  The
correction is implemented twice (term-by-term series and a Jacobi-theta
integral) as a cross-check, and its decay under a common time shift is what
the relaxation study measures.

Multipoint correlations are determinants of these kernels, and generating
functionals are Fredholm determinants discretized by block Nystrom
quadrature over a space-time grid.  The moment functionals at the end of
the module quantify how lopsided or heavy-tailed an infinite configuration
is; they are the well-posedness diagnostics for such starts.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core_numerics import (
    DomainError,
    NumericError,
    QuadratureRule,
    heat_kernel,
    theta3,
)
from .dyson import PointConfiguration, interpolation_weight

__all__ = [
    "LATTICE",
    "CorrelationKernel",
    "SpaceTimeGrid",
    "sine_kernel",
    "extended_sine_kernel",
    "lattice_kernel",
    "lattice_truncation",
    "finite_kernel",
    "contour_kernel",
    "correlation_function",
    "fredholm_generating",
    "condition_functionals",
    "relaxation_study",
]

LATTICE = "lattice"

DEFAULT_HERMITE_ORDER = 64
DEFAULT_CONTOUR_NODES = 256

_GH_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_GL_UNIT_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_hermite(order: int) -> tuple[np.ndarray, np.ndarray]:
    # expectation rule for a standard normal
    if order not in _GH_CACHE:
        rule = QuadratureRule.gauss_hermite(order)
        _GH_CACHE[order] = (rule.nodes, rule.weights)
    return _GH_CACHE[order]


def _gauss_legendre_unit(order: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes and weights on [0, 1]
    if order not in _GL_UNIT_CACHE:
        rule = QuadratureRule.gauss_legendre(0.0, 1.0, order)
        _GL_UNIT_CACHE[order] = (rule.nodes, rule.weights)
    return _GL_UNIT_CACHE[order]


def sine_kernel(x: float, y: float) -> float:
    """sin(pi (y-x)) / (pi (y-x)), with the diagonal limit 1."""
    v = math.pi * (y - x)
    if abs(v) < 1e-8:
        return 1.0 - v * v / 6.0
    return math.sin(v) / v


def _decay_cutoff(rate: float) -> float:
    # u with exp(-rate (u^2 - 1)) below 1e-18
    return math.sqrt(1.0 + 41.5 / rate)


def extended_sine_kernel(s: float, x: float, t: float, y: float, order: int = DEFAULT_HERMITE_ORDER) -> float:
    """Translation-invariant equilibrium kernel of the unit-density limit.

    Three branches: a finite oscillatory integral for t > s, the sine
    kernel at equal times, and minus a Gaussian-damped tail integral for
    t < s (the time-ordering correction is already folded in, which is why
    swapping (s,x) and (t,y) changes the value).
    """
    if s < 0.0 or t < 0.0:
        raise DomainError("times must be nonnegative")
    diff = y - x
    if t == s:
        return sine_kernel(x, y)
    if t > s:
        nodes, weights = _gauss_legendre_unit(order)
        vals = np.exp(0.5 * math.pi**2 * nodes**2 * (t - s)) * np.cos(math.pi * nodes * diff)
        return float(np.dot(weights, vals))
    rate = 0.5 * math.pi**2 * (s - t)
    top = _decay_cutoff(rate)
    panels = max(2, int(math.ceil(top - 1.0)), int(math.ceil(abs(diff))))
    rule = QuadratureRule.composite_gauss_legendre(np.linspace(1.0, top, panels + 1), order)
    vals = np.exp(-rate * rule.nodes**2) * np.cos(math.pi * rule.nodes * diff)
    return -float(np.dot(rule.weights, vals))


def lattice_truncation(s: float, t: float, tol: float = 1e-14) -> int:
    """Smallest series order whose dropped terms fall below tol.

    Term n of the lattice correction is bounded by
    exp(-2 pi^2 s n (n-1)) * exp(max(0, pi^2 (t-s)/2)).
    """
    if not (s > 0.0 and t > 0.0):
        raise DomainError("times must be positive")
    lead = max(0.0, 0.5 * math.pi**2 * (t - s))
    need = (lead - math.log(tol)) / (2.0 * math.pi**2 * s)
    n = 1
    while n * (n - 1) < need:
        n += 1
    return n


def _lattice_term_bound(s: float, t: float, n: int) -> float:
    lead = max(0.0, 0.5 * math.pi**2 * (t - s))
    return math.exp(lead - 2.0 * math.pi**2 * s * n * (n - 1.0))


def _lattice_correction_series(s, x, t, y, n_max, order):
    nodes, weights = _gauss_legendre_unit(order)
    grow = np.exp(0.5 * math.pi**2 * nodes**2 * (t - s))
    total = 0.0
    for n in range(1, n_max + 1):
        c = (y - x) - 2.0j * math.pi * s * n
        integral = np.dot(weights, grow * np.cos(math.pi * nodes * c))
        term = cmath.exp(2.0j * math.pi * x * n - 2.0 * math.pi**2 * s * n * n) * integral
        total += 2.0 * term.real
    return total


def _lattice_correction_theta(s, x, t, y, order):
    # Fourier-window integral; the theta factor is sharply peaked at the
    # window edges for large s, so the panels are kept narrow throughout
    rule = QuadratureRule.composite_gauss_legendre(np.linspace(-math.pi, math.pi, 33), order)
    acc = 0.0
    for k, w in zip(rule.nodes, rule.weights):
        th = theta3(complex(x, -k * s), 2j * math.pi * s) - 1.0
        acc += w * (cmath.exp(0.5 * k * k * (t - s) + 1j * k * (y - x)) * th).real
    return acc / (2.0 * math.pi)


def lattice_kernel(
    s: float,
    x: float,
    t: float,
    y: float,
    n_max: int | None = None,
    *,
    form: str = "series",
    order: int = DEFAULT_HERMITE_ORDER,
) -> float:
    """Kernel for one particle on every integer: extended sine plus a
    damped correction series.

    The two forms of the correction (explicit n-sum vs. theta-function
    integral) agree and are both kept for cross-checking.  An explicit
    n_max that leaves a truncation bound above 1e-10 raises NumericError
    with the bound.
    """
    if not (s > 0.0 and t > 0.0):
        raise DomainError("times must be positive")
    base = extended_sine_kernel(s, x, t, y, order=order)
    if form == "theta":
        return base + _lattice_correction_theta(s, x, t, y, order)
    if form != "series":
        raise DomainError(f"unknown form {form!r}")
    if n_max is None:
        n_max = lattice_truncation(s, t)
    else:
        bound = _lattice_term_bound(s, t, n_max + 1)
        if bound > 1e-10:
            raise NumericError(f"truncation bound {bound:.3e} at n_max={n_max} exceeds 1e-10")
    return base + _lattice_correction_series(s, x, t, y, n_max, order)


def _time_order_term(s: float, x: float, t: float, y: float) -> float:
    if s > t:
        return float(heat_kernel(s - t, y, x))
    return 0.0


def finite_kernel(
    xi: PointConfiguration,
    s: float,
    x: float,
    t: float,
    y: float,
    *,
    order: int = DEFAULT_HERMITE_ORDER,
) -> float:
    """Kernel of a finite simple configuration as a sum over its points.

    Each point contributes its Gaussian transition density times the
    Gaussian average (along the vertical line through y) of the
    interpolation weight pinned there.  The weight is a polynomial of
    degree n-1, so the Hermite average is exact for any order >= n/2.
    """
    if not xi.is_simple:
        raise DomainError("configuration has multiple points; use the contour form")
    if not (s > 0.0 and t > 0.0):
        raise DomainError("times must be positive")
    u_nodes, u_weights = _gauss_hermite(order)
    w_line = y + 1j * math.sqrt(t) * u_nodes
    total = 0.0
    for v in xi.support:
        avg = np.dot(u_weights, interpolation_weight(xi, v, w_line).real)
        total += float(heat_kernel(s, v, x)) * avg
    return total - _time_order_term(s, x, t, y)


def contour_kernel(
    xi: PointConfiguration,
    s: float,
    x: float,
    t: float,
    y: float,
    *,
    order: int = DEFAULT_HERMITE_ORDER,
    n_nodes: int = DEFAULT_CONTOUR_NODES,
    radius_scale: float = 1.0,
) -> float:
    """Closed-contour kernel; allows multiple points in the configuration.

    The circle encloses the support once; each support point contributes a
    pole of its multiplicity's order.  The integrand's extra simple pole at
    the Gaussian-average argument w is removed by subtracting its value
    there (the subtracted piece integrates to zero around the support), so
    the quadrature value is independent of the radius.

    The transition factor grows like exp(radius^2 / 2s) on the circle, and
    the quadrature recovers an O(1) value by cancellation, so oversized
    radii at small times destroy the available precision; such requests
    raise NumericError instead of returning noise. The same applies to
    t > s, where the Gaussian average along the line through y grows like
    exp(u^2 (t - s) / 2s) and the average itself diverges; the finite-sum
    construction covers that orientation.
    """
    if not (s > 0.0 and t > 0.0):
        raise DomainError("times must be positive")
    if t > s * (1.0 + 1e-12):
        raise NumericError("contour average diverges for t > s; use the finite-sum construction")
    support, mult = xi.multiplicities()
    center = 0.5 * (support[0] + support[-1])
    half_width = 0.5 * (support[-1] - support[0])
    radius = radius_scale * (1.5 * half_width + 1.0)
    if radius - half_width < 0.25:
        raise DomainError("contour passes too near the support; increase radius_scale")
    if radius * radius / (2.0 * s) > 25.0:
        raise NumericError("contour amplification exp(radius^2/2s) exceeds the precision budget")
    ring_rule = QuadratureRule.trapezoid_contour(complex(center), radius, n_nodes)
    z = ring_rule.nodes

    u_nodes, u_weights = _gauss_hermite(order)
    # the Gaussian average runs along the horizontal line through y, which
    # turns its weight into the standard normal one
    w_line = y + 1j * math.sqrt(t) * u_nodes

    gauss_z = heat_kernel(s, z, x)
    prod = np.ones((order, n_nodes), dtype=complex)
    wz = w_line[:, None] - z[None, :]
    for p, m in zip(support, mult):
        prod *= (1.0 - wz / (p - z[None, :])) ** int(m)
    phi = gauss_z[None, :] * prod
    at_pole = heat_kernel(s, w_line, x)
    ring = np.dot((phi - at_pole[:, None]) / wz, ring_rule.weights)
    value = float(np.dot(u_weights, ring.real))
    return value - _time_order_term(s, x, t, y)


@dataclass(frozen=True)
class CorrelationKernel:
    """A space-time kernel plus the flags the plumbing needs.

    evaluate(s, x, t, y) is pure and real-valued; symmetric declares
    invariance under the full (s,x) <-> (t,y) swap (false for every kernel
    carrying the time-ordering term); kind names the construction.
    """

    evaluate: Callable[[float, float, float, float], float]
    symmetric: bool
    kind: str

    @classmethod
    def finite(cls, xi: PointConfiguration, order: int = DEFAULT_HERMITE_ORDER) -> "CorrelationKernel":
        return cls(lambda s, x, t, y: finite_kernel(xi, s, x, t, y, order=order), False, "finite-sum")

    @classmethod
    def contour(cls, xi: PointConfiguration, order: int = DEFAULT_HERMITE_ORDER) -> "CorrelationKernel":
        return cls(lambda s, x, t, y: contour_kernel(xi, s, x, t, y, order=order), False, "contour")

    @classmethod
    def sine(cls) -> "CorrelationKernel":
        return cls(lambda s, x, t, y: sine_kernel(x, y), True, "sine")

    @classmethod
    def extended_sine(cls) -> "CorrelationKernel":
        return cls(lambda s, x, t, y: extended_sine_kernel(s, x, t, y), False, "extended-sine")

    @classmethod
    def lattice(cls, n_max: int | None = None) -> "CorrelationKernel":
        return cls(lambda s, x, t, y: lattice_kernel(s, x, t, y, n_max), False, "lattice")


def correlation_function(kernel: CorrelationKernel, points: Sequence[tuple[float, float]]) -> float:
    """Determinant of the kernel matrix over the given (time, position) list."""
    if len(points) == 0:
        raise DomainError("need at least one space-time point")
    m = len(points)
    mat = np.empty((m, m))
    for i, (ti, xi_) in enumerate(points):
        for j, (tj, xj) in enumerate(points):
            mat[i, j] = kernel.evaluate(ti, xi_, tj, xj)
    return float(np.linalg.det(mat))


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Times plus one Nystrom node/weight set per time on [-L, L]."""

    times: tuple
    nodes: tuple
    weights: tuple
    half_width: float

    def __post_init__(self):
        if len(self.times) == 0:
            raise DomainError("need at least one time")
        ts = np.asarray(self.times, dtype=float)
        if not (np.all(ts > 0.0) and np.all(np.diff(ts) > 0.0)):
            raise DomainError("times must be positive and strictly increasing")
        if len(self.nodes) != len(self.times) or len(self.weights) != len(self.times):
            raise DomainError("one node/weight set per time is required")
        for nd, wt in zip(self.nodes, self.weights):
            if nd.shape != wt.shape or nd.ndim != 1:
                raise DomainError("node and weight arrays must match in shape")
            if not np.all(wt > 0.0):
                raise DomainError("weights must be positive")
            if np.max(np.abs(nd)) > self.half_width:
                raise DomainError("nodes fall outside the window")

    @classmethod
    def build(
        cls,
        times: Sequence[float],
        half_width: float,
        order: int = 128,
        interior: Sequence[float] = (),
    ) -> "SpaceTimeGrid":
        """Shared composite Gauss-Legendre rule over [-L, L] for every time.

        interior points (e.g. discontinuities of the test functions) become
        panel boundaries so piecewise-smooth integrands stay spectral.
        """
        if not half_width > 0.0:
            raise DomainError("half_width must be positive")
        cuts = sorted({-half_width, half_width, *map(float, interior)})
        if cuts[0] != -half_width or cuts[-1] != half_width:
            raise DomainError("interior points must lie inside the window")
        rule = QuadratureRule.composite_gauss_legendre(np.array(cuts), order)
        k = len(times)
        return cls(
            times=tuple(float(t) for t in times),
            nodes=tuple(rule.nodes.copy() for _ in range(k)),
            weights=tuple(rule.weights.copy() for _ in range(k)),
            half_width=float(half_width),
        )


def fredholm_generating(
    kernel: CorrelationKernel,
    grid: SpaceTimeGrid,
    chi: Sequence[Callable[[np.ndarray], np.ndarray]],
) -> float:
    """Generating functional det(I + K chi) on the block Nystrom grid.

    chi supplies one vectorized test-function factor per grid time; each is
    required to vanish at the window edge (otherwise the window is too
    small and the truncated determinant is meaningless).
    """
    if len(chi) != len(grid.times):
        raise DomainError("need one test function per time")
    edge = np.array([-grid.half_width, grid.half_width])
    for fn in chi:
        if np.max(np.abs(np.asarray(fn(edge), dtype=float))) > 1e-12:
            raise DomainError("test function does not vanish at the window edge")
    sizes = [nd.size for nd in grid.nodes]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = offsets[-1]
    a = np.eye(total)
    chi_vals = [np.asarray(fn(nd), dtype=float) for fn, nd in zip(chi, grid.nodes)]
    for mi, (tm, xm) in enumerate(zip(grid.times, grid.nodes)):
        for ni, (tn, xn) in enumerate(zip(grid.times, grid.nodes)):
            scale = chi_vals[ni] * grid.weights[ni]
            if not np.any(scale):
                continue
            block = np.empty((xm.size, xn.size))
            for i in range(xm.size):
                for j in range(xn.size):
                    block[i, j] = kernel.evaluate(tm, xm[i], tn, xn[j])
            a[offsets[mi] : offsets[mi + 1], offsets[ni] : offsets[ni + 1]] += block * scale[None, :]
    return float(np.linalg.det(a))


def _lattice_points(bound: float) -> tuple[np.ndarray, np.ndarray]:
    top = int(math.floor(bound))
    pts = np.arange(-top, top + 1, dtype=float)
    return pts, np.ones_like(pts)


def condition_functionals(xi, window: float, alpha: float) -> dict:
    """Moment functionals of a configuration over [-L, L], excluding {0}.

    Returns the signed reciprocal sum M, the alpha-norm M_alpha, and, for
    every support point a in the window, the reciprocal-moment of the
    squared configuration recentred at a^2 (the tail-control quantity for
    infinite starts).
    """
    if not window > 0.0:
        raise DomainError("window must be positive")
    if not 1.0 < alpha < 2.0:
        raise DomainError("alpha must lie in (1, 2)")
    if isinstance(xi, str):
        if xi != LATTICE:
            raise DomainError(f"unknown configuration spec {xi!r}")
        pts, mult = _lattice_points(window)
        all_pts, all_mult = _lattice_points(math.sqrt(window + window * window) + 1.0)
    elif isinstance(xi, PointConfiguration):
        pts, mult = xi.multiplicities()
        keep = np.abs(pts) <= window
        pts, mult = pts[keep], mult[keep]
        all_pts, all_mult = xi.multiplicities()
    else:
        raise DomainError("xi must be a PointConfiguration or the lattice spec")

    live = pts != 0.0
    m_signed = float(np.sum(mult[live] / pts[live]))
    m_alpha = float(np.sum(mult[live] / np.abs(pts[live]) ** alpha) ** (1.0 / alpha))

    shifts = pts.copy()
    shifted_moment = np.empty(shifts.size)
    for idx, a in enumerate(shifts):
        if isinstance(xi, str):
            reach = math.sqrt(window + a * a) + 1.0
            src, src_m = _lattice_points(reach)
        else:
            src, src_m = all_pts, all_mult
        q = src * src - a * a
        keep = (q != 0.0) & (np.abs(q) <= window)
        shifted_moment[idx] = float(np.sum(src_m[keep] / np.abs(q[keep])))
    return {
        "M": m_signed,
        "M_alpha": m_alpha,
        "shifts": shifts,
        "M1_shifted": shifted_moment,
    }


def relaxation_study(
    s: float,
    t: float,
    u_values: Sequence[float],
    *,
    grid_points: np.ndarray | None = None,
    order: int = DEFAULT_HERMITE_ORDER,
) -> dict:
    """Sup distance between the shifted lattice kernel and its limit.

    For each time shift u the kernel is evaluated at (u+s, x; u+t, y) over
    the (x, y) grid and compared against the extended sine kernel at
    (s, x; t, y); the curve of sup differences is returned for reporting.
    """
    if grid_points is None:
        grid_points = np.linspace(-1.0, 1.0, 5)
    grid_points = np.asarray(grid_points, dtype=float)
    u_values = np.asarray(list(u_values), dtype=float)
    if u_values.size == 0 or np.any(u_values <= 0.0):
        raise DomainError("time shifts must be positive")
    sup = np.empty(u_values.size)
    for k, u in enumerate(u_values):
        worst = 0.0
        for xv in grid_points:
            for yv in grid_points:
                d = lattice_kernel(u + s, xv, u + t, yv, order=order) - extended_sine_kernel(
                    s, xv, t, yv, order=order
                )
                worst = max(worst, abs(d))
        sup[k] = worst
    return {
        "u_values": u_values,
        "sup_difference": sup,
        "grid_points": grid_points,
        "s": float(s),
        "t": float(t),
    }
