"""Noncolliding Brownian particles and the Hermitian-matrix viewpoint.

The two aspects are kept independently computable so they can be used as
cross-oracles: exact single-time eigenvalue sampling of the matrix flow,
and Euler-Maruyama for the interacting SDE with pairwise repulsion. The
transition density of the conditioned system is the determinant of heat
kernels times the ratio of Vandermonde factors.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .core_numerics import (
    DomainError,
    NumericError,
    RngStream,
    det_and_solve,
    heat_kernel,
)

HALVING_LEVELS = 10


@dataclass(frozen=True)
class WeylPoint:
    """Strictly increasing coordinate vector."""

    coordinates: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coordinates, dtype=float)
        object.__setattr__(self, "coordinates", coords)
        if coords.ndim != 1 or coords.size < 1:
            raise DomainError("coordinates must form a nonempty 1-d vector")
        if not np.all(np.isfinite(coords)):
            raise DomainError("coordinates must be finite")
        if coords.size > 1 and not np.all(np.diff(coords) > 0.0):
            raise DomainError("coordinates must be strictly increasing")

    @property
    def n(self) -> int:
        return self.coordinates.size

    def __len__(self) -> int:
        return self.coordinates.size


@dataclass(frozen=True)
class PointConfiguration:
    """Finite multiset of real points, kept sorted; multiplicity-aware."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.sort(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 1:
            raise DomainError("points must form a nonempty 1-d collection")
        if not np.all(np.isfinite(pts)):
            raise DomainError("points must be finite")

    @property
    def support(self) -> np.ndarray:
        return np.unique(self.points)

    def multiplicities(self) -> tuple[np.ndarray, np.ndarray]:
        return np.unique(self.points, return_counts=True)

    @property
    def is_simple(self) -> bool:
        return self.support.size == self.points.size

    def count_in(self, lo: float, hi: float) -> int:
        return int(np.count_nonzero((self.points >= lo) & (self.points <= hi)))

    def to_weyl(self) -> WeylPoint:
        if not self.is_simple:
            raise DomainError("configuration has multiple points; no chamber vector")
        return WeylPoint(self.points)

    def __len__(self) -> int:
        return self.points.size


@dataclass
class HermitianBmState:
    """Matrix-valued Brownian state: diagonal start plus n^2 real drivers.

    drivers[i, i] carries the i-th diagonal Brownian motion; for i < j,
    drivers[i, j] and drivers[j, i] carry the real and imaginary drivers
    of the (i, j) entry, each entering with weight 1/sqrt(2) so that the
    off-diagonal entry has variance t.
    """

    start: np.ndarray
    drivers: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=float)
        self.drivers = np.asarray(self.drivers, dtype=float)
        n = self.start.size
        if self.drivers.shape != (n, n):
            raise DomainError("drivers must be an n-by-n real array")

    @classmethod
    def initial(cls, x: WeylPoint) -> "HermitianBmState":
        n = x.n
        return cls(start=x.coordinates.copy(), drivers=np.zeros((n, n)))

    @property
    def n(self) -> int:
        return self.start.size

    def matrix(self) -> np.ndarray:
        n = self.n
        m = np.diag(self.start + np.diag(self.drivers)).astype(complex)
        for i in range(n):
            for j in range(i + 1, n):
                entry = (self.drivers[i, j] + 1j * self.drivers[j, i]) / math.sqrt(2.0)
                m[i, j] = entry
                m[j, i] = entry.conjugate()
        return m


def _coords(x) -> np.ndarray:
    if isinstance(x, WeylPoint):
        return x.coordinates
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise DomainError("expected a 1-d coordinate vector")
    return arr


def vandermonde(x) -> float:
    """Product of pairwise differences prod_{i<j} (x_j - x_i)."""
    c = _coords(x)
    out = 1.0
    for i in range(c.size):
        for j in range(i + 1, c.size):
            out *= c[j] - c[i]
    return float(out)


def km_determinant(t: float, x, y) -> float:
    """Determinant of heat kernels det[p_t(y_i | x_j)].

    Accepts chamber points or raw vectors; raw vectors are useful for the
    antisymmetry algebra, chamber points for the probabilistic meaning.
    """
    if not t > 0.0:
        raise DomainError("t must be positive")
    cx = _coords(x)
    cy = _coords(y)
    if cx.size != cy.size:
        raise DomainError("x and y must have equal length")
    kernel = heat_kernel(t, cx[None, :], cy[:, None])
    det, _ = det_and_solve(kernel)
    return float(det.real)


def noncolliding_density(t: float, x, y) -> float:
    """Chamber transition density: Vandermonde ratio times km_determinant."""
    hx = vandermonde(x)
    if hx == 0.0:
        raise DomainError("start point lies on a chamber wall")
    hy = vandermonde(y)
    if hy == 0.0:
        return 0.0
    return (hy / hx) * km_determinant(t, x, y)


@dataclass(frozen=True)
class ParticlePath:
    """Vector-valued path on a uniform grid with optional collision record."""

    times: np.ndarray
    values: np.ndarray
    collision_time: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.shape[0] != self.times.size:
            raise DomainError("values must have one row per grid time")


def _step_count(dt: float, horizon: float) -> int:
    if not dt > 0.0 or not horizon > dt / 2.0:
        raise DomainError("need 0 < dt < horizon")
    k = int(round(horizon / dt))
    if not math.isclose(k * dt, horizon, rel_tol=1e-9, abs_tol=0.0):
        raise DomainError("horizon must be an integer number of steps")
    return k


def _pair_drift(x: np.ndarray, beta: float) -> np.ndarray:
    # x: (..., n); sum over j != i of 1/(x_i - x_j), scaled by beta/2.
    # the diagonal (and any tied pair, already an ordering violation)
    # contributes zero and is resolved by the halving guard instead
    diff = x[..., :, None] - x[..., None, :]
    with np.errstate(divide="ignore"):
        inv = np.where(diff != 0.0, 1.0 / diff, 0.0)
    return 0.5 * beta * inv.sum(axis=-1)


def _dyson_step(x: np.ndarray, dw: np.ndarray, dt: float, beta: float, depth: int = 0):
    """One ordered EM step; halves the step on ordering violation.

    Returns None when the violation survives the full halving budget,
    which the callers record as a collision.
    """
    y = x + dw + _pair_drift(x, beta) * dt
    if x.ndim == 1:
        ok = np.all(np.diff(y) > 0.0) if y.size > 1 else True
        if ok:
            return y
        if depth >= HALVING_LEVELS:
            return None
        mid = _dyson_step(x, 0.5 * dw, 0.5 * dt, beta, depth + 1)
        if mid is None:
            return None
        return _dyson_step(mid, 0.5 * dw, 0.5 * dt, beta, depth + 1)
    bad = ~np.all(np.diff(y, axis=-1) > 0.0, axis=-1)
    if bad.any():
        if depth >= HALVING_LEVELS:
            y[bad] = np.nan
            return y
        mid = _dyson_step(x[bad], 0.5 * dw[bad], 0.5 * dt, beta, depth + 1)
        y[bad] = _dyson_step(mid, 0.5 * dw[bad], 0.5 * dt, beta, depth + 1)
    return y


def simulate_dyson(
    beta: float,
    x: WeylPoint,
    dt: float,
    horizon: float,
    rng: RngStream,
) -> ParticlePath:
    """Interacting EM path with pairwise repulsion beta/2 / (x_i - x_j).

    For beta >= 1 the continuum process never collides and the halving
    guard only absorbs discretization stiffness; for beta < 1 a surviving
    ordering violation is recorded as the collision time and the path is
    frozen there.
    """
    if not beta > 0.0:
        raise DomainError("beta must be positive")
    k = _step_count(dt, horizon)
    n = x.n
    sq = math.sqrt(dt)
    values = np.empty((k + 1, n))
    values[0] = x.coordinates
    collision = None
    cur = x.coordinates.copy()
    for i in range(k):
        if collision is None:
            nxt = _dyson_step(cur, rng.normals(n) * sq, dt, beta)
            if nxt is None:
                collision = (i + 1) * dt
            else:
                cur = nxt
        values[i + 1] = cur
    return ParticlePath(times=np.arange(k + 1) * dt, values=values, collision_time=collision)


def simulate_dyson_batch(
    beta: float,
    x: WeylPoint,
    dt: float,
    horizon: float,
    rng: RngStream,
    n_paths: int,
) -> dict:
    """Terminal marginals of many EM paths; step-major normal draws."""
    if not beta > 0.0:
        raise DomainError("beta must be positive")
    if n_paths < 1:
        raise DomainError("need at least one path")
    k = _step_count(dt, horizon)
    n = x.n
    sq = math.sqrt(dt)
    cur = np.tile(x.coordinates, (n_paths, 1))
    collided = np.zeros(n_paths, dtype=bool)
    collision_time = np.full(n_paths, np.nan)
    for i in range(k):
        dw = rng.normals((n_paths, n)) * sq
        live = ~collided
        nxt = _dyson_step(cur[live], dw[live], dt, beta)
        dead = np.any(np.isnan(nxt), axis=-1)
        if dead.any():
            idx = np.flatnonzero(live)[dead]
            collided[idx] = True
            collision_time[idx] = (i + 1) * dt
            nxt[dead] = cur[idx]
        cur[live] = nxt
    return {"final": cur, "collided": collided, "collision_time": collision_time}


def evolve_dyson_ensemble(
    beta: float,
    initial: np.ndarray,
    dt: float,
    horizon: float,
    rng: RngStream,
) -> dict:
    """Terminal marginals of EM paths with a separate start per row.

    Same stepping and draw order as simulate_dyson_batch, so a tiled
    initial array reproduces it draw for draw.
    """
    if not beta > 0.0:
        raise DomainError("beta must be positive")
    initial = np.asarray(initial, dtype=float)
    if initial.ndim != 2 or initial.shape[0] < 1:
        raise DomainError("initial must be a (paths, particles) array")
    if np.any(np.diff(initial, axis=1) < 0.0):
        raise DomainError("each starting row must be sorted ascending")
    k = _step_count(dt, horizon)
    n_paths, n = initial.shape
    sq = math.sqrt(dt)
    cur = initial.copy()
    collided = np.zeros(n_paths, dtype=bool)
    collision_time = np.full(n_paths, np.nan)
    for i in range(k):
        dw = rng.normals((n_paths, n)) * sq
        live = ~collided
        nxt = _dyson_step(cur[live], dw[live], dt, beta)
        dead = np.any(np.isnan(nxt), axis=-1)
        if dead.any():
            idx = np.flatnonzero(live)[dead]
            collided[idx] = True
            collision_time[idx] = (i + 1) * dt
            nxt[dead] = cur[idx]
        cur[live] = nxt
    return {"final": cur, "collided": collided, "collision_time": collision_time}


def simulate_hermitian_bm(
    state: HermitianBmState,
    dt: float,
    horizon: float,
    rng: RngStream,
) -> dict:
    """Advance the n^2 drivers and eigensolve per step.

    Returns the grid, sorted eigenvalue rows, the running diagonal sums
    (for the trace identity), and the final driver state.
    """
    k = _step_count(dt, horizon)
    n = state.n
    sq = math.sqrt(dt)
    eigenvalues = np.empty((k + 1, n))
    diagonal_sum = np.empty(k + 1)
    drivers = state.drivers.copy()
    try:
        eigenvalues[0] = np.linalg.eigvalsh(state.matrix())
    except np.linalg.LinAlgError as exc:
        raise NumericError("eigensolve failed") from exc
    diagonal_sum[0] = float(np.sum(state.start + np.diag(drivers)))
    work = HermitianBmState(start=state.start, drivers=drivers, time=state.time)
    for i in range(k):
        drivers += rng.normals((n, n)) * sq
        work.drivers = drivers
        try:
            eigenvalues[i + 1] = np.linalg.eigvalsh(work.matrix())
        except np.linalg.LinAlgError as exc:
            raise NumericError("eigensolve failed") from exc
        diagonal_sum[i + 1] = float(np.sum(state.start + np.diag(drivers)))
    return {
        "times": state.time + np.arange(k + 1) * dt,
        "eigenvalues": eigenvalues,
        "diagonal_sum": diagonal_sum,
        "final_state": HermitianBmState(start=state.start.copy(), drivers=drivers, time=state.time + k * dt),
    }


def sample_eigenvalues(x: WeylPoint, t: float, rng: RngStream, n_samples: int) -> np.ndarray:
    """Exact sorted eigenvalue samples of the matrix flow at one time.

    The matrix at time t is diag(x) plus a Gaussian Hermitian perturbation
    with entry variance t, so no discretization enters.
    """
    if not t > 0.0:
        raise DomainError("t must be positive")
    if n_samples < 1:
        raise DomainError("need at least one sample")
    n = x.n
    sq = math.sqrt(t)
    diag = rng.normals((n_samples, n)) * sq
    m = np.zeros((n_samples, n, n), dtype=complex)
    step = np.arange(n)
    m[:, step, step] = x.coordinates + diag
    for i in range(n):
        for j in range(i + 1, n):
            re = rng.normals(n_samples)
            im = rng.normals(n_samples)
            entry = (re + 1j * im) * (sq / math.sqrt(2.0))
            m[:, i, j] = entry
            m[:, j, i] = entry.conj()
    return np.linalg.eigvalsh(m)


def interpolation_weight(xi: PointConfiguration, u: float, z) -> complex | np.ndarray:
    """Canonical product pinned at u: prod over other support points of
    (1 - (z-u)/(x-u)). Equals the Kronecker delta on the support."""
    support = xi.support
    hits = np.isclose(support, u, rtol=0.0, atol=1e-12)
    if not hits.any():
        raise DomainError("u must belong to the support of xi")
    others = support[~hits]
    zz = np.asarray(z, dtype=complex)
    out = np.ones_like(zz)
    for point in others:
        out = out * (1.0 - (zz - u) / (point - u))
    if np.isscalar(z) or zz.ndim == 0:
        return complex(out)
    return out


def lattice_interpolation_weight(u: float, z) -> complex | np.ndarray:
    """Symmetric-window limit of the canonical product over the integer
    lattice: sin(pi v)/(pi v) with v = z - u."""
    if not math.isclose(u, round(u), rel_tol=0.0, abs_tol=1e-12):
        raise DomainError("u must be a lattice point")
    zz = np.asarray(z, dtype=complex)
    v = (zz - u) * math.pi
    small = np.abs(v) < 1e-8
    safe = np.where(small, 1.0, v)
    out = np.where(small, 1.0 - v * v / 6.0, np.sin(safe) / safe)
    if np.isscalar(z) or zz.ndim == 0:
        return complex(out)
    return out


def lattice_interpolation_partial(u: float, z, window: int) -> complex:
    """Truncated symmetric product over lattice points within `window` of
    u; converges to the closed form like O(1/window)."""
    if window < 1:
        raise DomainError("window must be positive")
    v = complex(z) - u
    out = 1.0 + 0.0j
    for m in range(1, window + 1):
        out *= 1.0 - v * v / (m * m)
    return out


_HCIZ_RESTRICTION = (1, 2)


def _haar_unitaries(rng: RngStream, n_samples: int, n: int) -> np.ndarray:
    g = rng.normals((n_samples, n, n)) + 1j * rng.normals((n_samples, n, n))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=-2, axis2=-1).copy()
    d /= np.abs(d)
    return q * d.conj()[:, None, :]


def hciz_check(
    x: WeylPoint,
    y: WeylPoint,
    sigma2: float,
    samples: int,
    rng: RngStream,
) -> dict:
    """Monte Carlo unitary-group average against the determinant formula.

    Left side: E_U exp(-||diag(x) - U diag(y) U*||_F^2 / (2 sigma^2)) with
    U Haar on U(n). Right side: C_n sigma^{n^2} / (h(x) h(y)) times the
    heat-kernel determinant at time parameter t = sigma^2, with
    C_n = (2 pi)^{n/2} prod_{j<=n} Gamma(j). The t = sigma^2
    identification is recorded in the output.
    """
    if x.n != y.n or x.n not in _HCIZ_RESTRICTION:
        raise DomainError("only n in {1, 2} is supported")
    if not sigma2 > 0.0:
        raise DomainError("sigma2 must be positive")
    n = x.n
    c_n = (2.0 * math.pi) ** (n / 2.0) * float(np.prod([math.gamma(j) for j in range(1, n + 1)]))
    rhs = (
        c_n
        * sigma2 ** (n * n / 2.0)
        / (vandermonde(x) * vandermonde(y))
        * km_determinant(sigma2, x, y)
    )
    if n == 1:
        val = math.exp(-((x.coordinates[0] - y.coordinates[0]) ** 2) / (2.0 * sigma2))
        return {
            "mc_estimate": val,
            "rhs": rhs,
            "stderr": 0.0,
            "samples": 0,
            "time_parameter": sigma2,
        }
    u = _haar_unitaries(rng, samples, n)
    rotated = (u * y.coordinates[None, None, :]) @ np.conjugate(np.swapaxes(u, -2, -1))
    delta = np.diag(x.coordinates)[None, :, :] - rotated
    frob2 = np.sum(np.abs(delta) ** 2, axis=(-2, -1))
    vals = np.exp(-frob2 / (2.0 * sigma2))
    mc = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(samples))
    return {
        "mc_estimate": mc,
        "rhs": rhs,
        "stderr": stderr,
        "samples": samples,
        "time_parameter": sigma2,
    }
