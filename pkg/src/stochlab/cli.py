"""Seeded experiment harness: every verification suite as a subcommand.

Each subcommand runs one study, evaluates its tolerance checks, and
writes a JSON run record with sorted keys, floats at 17 significant
digits, and no timestamps, so reruns with an identical resolved config
are byte-identical. `--csv` additionally writes a plot-ready table with
columns (x, y, yerr). Exit status: 0 when every check passes, 1 when a
tolerance check fails or a computation refuses, 2 for invalid
configuration. The seed resolves from --seed, then the config file,
then STOCHLAB_SEED, then 0.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .bessel import (
    DEFAULT_C_EQ,
    BesselSpec,
    bessel_cdf,
    bessel_density,
    cardy_probability,
    flow_frequency_study,
)
from .charpoly import (
    GueSpec,
    ishikawa_random_trials,
    mgue_det,
    mgue_det_block,
    mgue_mc,
    timeshift_equivalence_check,
)
from .core_numerics import (
    DomainError,
    NumericError,
    QuadratureRule,
    RngStream,
    xi_moment_function,
    xi_reference,
)
from .detkernels import (
    CorrelationKernel,
    SpaceTimeGrid,
    contour_kernel,
    finite_kernel,
    fredholm_generating,
    relaxation_study,
)
from .dyson import PointConfiguration, WeylPoint, sample_eigenvalues, simulate_dyson_batch
from .extremes import (
    bridge_max_study,
    max_cdf_h1,
    max_cdf_hN,
    moment_h1,
    moment_h1_from_cdf,
)
from .lerw import (
    DivergenceError,
    brute_force_fomin,
    example_networks,
    fomin_determinant,
    parse_network,
)
from .sle import (
    DEFAULT_EPS_SWALLOW,
    DrivingFunction,
    LoewnerChain,
    evolve_point,
    hausdorff_dimension,
    phase,
    swallow_statistics,
    trace,
)

__all__ = ["ExperimentConfig", "emit_plotdata", "main"]


# ---------------------------------------------------------------------------
# config plumbing


def _as_float(v) -> float:
    return float(v)


def _as_int(v) -> int:
    return int(v)


def _as_str(v) -> str:
    return str(v)


def _as_floats(v) -> list[float]:
    if isinstance(v, (list, tuple)):
        out = [float(x) for x in v]
    else:
        out = [float(tok) for tok in str(v).split(",") if tok.strip()]
    if not out:
        raise ValueError("empty number list")
    return out


def _as_ints(v) -> list[int]:
    if isinstance(v, (list, tuple)):
        out = [int(x) for x in v]
    else:
        out = [int(tok) for tok in str(v).split(",") if tok.strip()]
    if not out:
        raise ValueError("empty integer list")
    return out


@dataclass(frozen=True)
class Flag:
    name: str
    dest: str
    convert: Callable
    default: object
    help: str
    tol: bool = False
    aliases: tuple = ()


@dataclass(frozen=True)
class ExperimentConfig:
    """One resolved run: subcommand, parameters, seed, outputs, tolerances."""

    name: str
    params: dict
    tolerances: dict
    seed: int
    workers: int
    out: str | None
    csv: str | None


def _check(name: str, passed, **info) -> dict:
    rec = {"name": name, "passed": bool(passed)}
    rec.update(info)
    return rec


# ---------------------------------------------------------------------------
# serialization: sorted keys, 17 significant digits, deterministic bytes


def _plain(value):
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return {"im": value.imag, "re": value.real}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


def _float17(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _render(v, buf: list) -> None:
    if v is None:
        buf.append("null")
    elif isinstance(v, bool):
        buf.append("true" if v else "false")
    elif isinstance(v, int):
        buf.append(str(v))
    elif isinstance(v, float):
        buf.append(_float17(v))
    elif isinstance(v, str):
        buf.append(json.dumps(v))
    elif isinstance(v, list):
        buf.append("[")
        for i, item in enumerate(v):
            if i:
                buf.append(", ")
            _render(item, buf)
        buf.append("]")
    elif isinstance(v, dict):
        buf.append("{")
        for i, key in enumerate(sorted(v)):
            if i:
                buf.append(", ")
            buf.append(json.dumps(key))
            buf.append(": ")
            _render(v[key], buf)
        buf.append("}")
    else:
        raise NumericError(f"cannot serialize {type(v).__name__}")


def dumps_record(record: dict) -> str:
    buf: list = []
    _render(_plain(record), buf)
    return "".join(buf)


def emit_plotdata(rows, path: str) -> None:
    """Write (x, y, yerr) rows as a plot-ready CSV, no rendering deps."""
    lines = ["x,y,yerr"]
    for row in rows:
        x, y, e = (float(v) for v in row)
        lines.append(",".join(format(v, ".17g") for v in (x, y, e)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# suite runners: each returns (payload, checks, plot rows)


def _gauss(t: float, u):
    return np.exp(-np.asarray(u) ** 2 / (2.0 * t)) / math.sqrt(2.0 * math.pi * t)


def _run_bessel_density(cfg: ExperimentConfig):
    p, tol = cfg.params, cfg.tolerances
    t = p["t"]
    xs = np.linspace(p["x_min"], p["x_max"], p["grid_points"])
    ys = np.linspace(p["y_min"], p["y_max"], p["grid_points"])
    worst3 = worst1 = 0.0
    for x in xs:
        d3 = bessel_density(BesselSpec(3.0, x), t, ys)
        d1 = bessel_density(BesselSpec(1.0, x), t, ys)
        e3 = (ys / x) * (_gauss(t, ys - x) - _gauss(t, ys + x))
        e1 = _gauss(t, ys - x) + _gauss(t, ys + x)
        worst3 = max(worst3, float(np.max(np.abs(d3 - e3))))
        worst1 = max(worst1, float(np.max(np.abs(d1 - e1))))
    # log-graded panels absorb the integrable origin singularity for D < 2
    start = p["start"]
    hi = start + 12.0 * math.sqrt(t) + 2.0
    rule = QuadratureRule.composite_gauss_legendre([0.0] + list(np.geomspace(1e-8, hi, 40)), 32)
    norm_err = {}
    for d in p["dims"]:
        total = rule.integrate(lambda y: bessel_density(BesselSpec(d, start), t, y))
        norm_err[format(d, "g")] = abs(total - 1.0)
    worst_norm = max(norm_err.values())
    checks = [
        _check("d3_closed_form", worst3 <= tol["tol_pair"], value=worst3, tolerance=tol["tol_pair"]),
        _check("d1_closed_form", worst1 <= tol["tol_pair"], value=worst1, tolerance=tol["tol_pair"]),
        _check("normalization", worst_norm <= tol["tol_norm"], value=worst_norm, tolerance=tol["tol_norm"]),
    ]
    payload = {"normalization_error": norm_err, "t": t, "x_grid": xs, "y_grid": ys}
    dens = bessel_density(BesselSpec(p["dims"][0], start), t, ys)
    rows = [(float(y), float(v), 0.0) for y, v in zip(ys, dens)]
    return payload, checks, rows


def _run_cardy(cfg: ExperimentConfig):
    p, tol = cfg.params, cfg.tolerances
    d = p["dimension"]
    study = flow_frequency_study(
        d, p["x"], p["y"], p["dt"], p["eps"], p["c_eq"], p["paths"],
        RngStream(cfg.seed, 0), horizon=p["horizon"], workers=cfg.workers,
    )
    freq = study.frequencies
    se = study.stderr
    lo, hi = study.intervals[-1]
    margin = study.discretization_margin
    try:
        exact = cardy_probability(d, p["x"], p["y"])
    except DomainError:
        exact = None
    if exact is None:
        # outside the intermediate phase: simultaneity must die out
        checks = [_check(
            "control_frequency", freq[-1] < tol["control_tol"],
            value=float(freq[-1]), tolerance=tol["control_tol"],
        )]
    else:
        slack = 3.0 * float(se[-1]) + margin
        inside = (lo - slack) <= exact <= (hi + slack)
        checks = [_check(
            "bracket", inside, exact=exact, mc=float(freq[-1]),
            stderr=float(se[-1]), margin=margin, interval=[lo, hi],
        )]
    payload = {
        "exact": exact,
        "mc": float(freq[-1]),
        "stderr": float(se[-1]),
        "eps_ladder": study.eps_ladder,
        "frequencies": freq,
        "intervals": study.intervals,
        "unresolved": study.unresolved,
        "margin": margin,
        "ordering_violation_rate": study.ordering_violation_rate,
        "horizon": study.horizon,
        "dt": study.dt,
        "paths": study.n_paths,
    }
    rows = [(float(e), float(f), float(s)) for e, f, s in zip(study.eps_ladder, freq, se)]
    return payload, checks, rows


def _run_sle_trace(cfg: ExperimentConfig):
    p, tol = cfg.params, cfg.tolerances
    d, dt, horizon = p["dimension"], p["dt"], p["horizon"]
    drive = DrivingFunction.sample(d, dt, horizon, RngStream(cfg.seed, 0))
    chain = LoewnerChain(drive)
    tr = trace(chain)
    cap = chain.capacity(horizon)
    worst = 0.0
    for theta in (0.3, 1.2, 2.8):
        z = p["probe_radius"] * complex(math.cos(theta), math.sin(theta))
        g = evolve_point(chain, z, horizon)
        worst = max(worst, abs(g - z - cap / z))
    zero = trace(LoewnerChain(DrivingFunction.zero(d, dt, horizon)))
    imag_dev = float(np.max(np.abs(zero.real)))
    checks = [
        _check("hydrodynamic_normalization", worst <= tol["tol_residual"],
               value=worst, tolerance=tol["tol_residual"], probe_radius=p["probe_radius"]),
        _check("zero_drive_imaginary", imag_dev <= tol["tol_imag"],
               value=imag_dev, tolerance=tol["tol_imag"]),
    ]
    payload = {
        "phase": phase(d),
        "hausdorff_dimension": hausdorff_dimension(d),
        "kappa": drive.kappa,
        "n_steps": drive.n_steps,
        "capacity": cap,
        "trace_end": complex(tr[-1]),
    }
    rows = [(float(z.real), float(z.imag), 0.0) for z in tr]
    return payload, checks, rows


def _run_sle_swallow(cfg: ExperimentConfig):
    p, tol = cfg.params, cfg.tolerances
    pt = p["point"]
    if len(pt) != 2:
        raise DomainError("--point needs re,im")
    z = complex(pt[0], pt[1])
    rep = swallow_statistics(
        p["dimension"], p["dt"], p["horizon"], [z],
        RngStream(cfg.seed, 0), samples=p["chains"], eps_swallow=p["eps_swallow"],
    )
    freq = float(rep["frequency"][0])
    regime = phase(p["dimension"])
    if regime == "simple":
        checks = [_check("swallow_frequency_low", freq < tol["simple_tol"],
                         value=freq, tolerance=tol["simple_tol"])]
    else:
        checks = [_check("swallow_observed", freq > 0.0, value=freq)]
    times = np.sort(rep["swallow_times"][np.isfinite(rep["swallow_times"])])
    payload = {
        "frequency": freq,
        "count": int(rep["counts"][0]),
        "samples": int(rep["samples"]),
        "phase": regime,
        "point": z,
    }
    rows = [(float(tm), (i + 1.0) / p["chains"], 0.0) for i, tm in enumerate(times)]
    if not rows:
        rows = [(p["horizon"], 0.0, 0.0)]
    return payload, checks, rows


def _run_dyson_compare(cfg: ExperimentConfig):
    p, tol = cfg.params, cfg.tolerances
    n, t = p["n"], p["t"]
    x = p["x_starts"] if p["x_starts"] else np.linspace(-0.5 * (n - 1), 0.5 * (n - 1), n).tolist()
    if len(x) != n:
        raise DomainError("--x must list exactly n starts")
    x = np.sort(np.asarray(x, dtype=float))
    start = WeylPoint(x)
    base = RngStream(cfg.seed, 0)
    exact = sample_eigenvalues(start, t, base.substream(0), p["samples"])
    sde = simulate_dyson_batch(2.0, start, p["dt"], t, base.substream(1), p["samples"])
    keep = ~sde["collided"]
    finals = sde["final"][keep]
    pvals = [float(stats.ks_2samp(exact[:, k], finals[:, k]).pvalue) for k in range(n)]
    level = tol["level"] / n
    checks = [_check("marginals_two_sample", min(pvals) >= level,
                     pvalues=pvals, level=level)]
    payload = {
        "pvalues": pvals,
        "collided": int(np.count_nonzero(sde["collided"])),
        "samples": p["samples"],
        "x": x,
        "dt": p["dt"],
        "t": t,
    }
    rows = []
    if n == 2:
        emp = np.sort((finals[:, 1] - finals[:, 0]) / math.sqrt(2.0))
        r0 = float((x[1] - x[0]) / math.sqrt(2.0))
        fex = np.asarray(bessel_cdf(BesselSpec(3.0, r0), t, emp))
        m = emp.size
        i = np.arange(1, m + 1)
        dist = float(max(np.max(np.abs(i / m - fex)), np.max(np.abs((i - 1) / m - fex))))
        checks.append(_check("gap_bes3_distance", dist < tol["gap_tol"],
                             value=dist, tolerance=tol["gap_tol"]))
        payload["gap_distance"] = dist
        step = max(1, m // 200)
        rows = [(float(emp[j]), float(i[j]) / m, 0.0) for j in range(0, m, step)]
    if not rows:
        first = np.sort(finals[:, 0])
        m = first.size
        step = max(1, m // 200)
        rows = [(float(first[j]), (j + 1.0) / m, 0.0) for j in range(0, m, step)]
    return payload, checks, rows


def _run_kernel_table(cfg: ExperimentConfig):
    p, tol = cfg.params, cfg.tolerances
    xi = PointConfiguration(p["xi"])
    radius = float(np.max(np.abs(xi.points)))
    masses = {}
    worst_mass = 0.0
    for t in p["times"]:
        wing = radius + 12.0 * math.sqrt(t)
        rule = QuadratureRule.composite_gauss_legendre(np.linspace(-wing, wing, 25), 24)
        vals = np.array([finite_kernel(xi, t, v, t, v) for v in rule.nodes])
        mass = float(np.dot(rule.weights, vals))
        masses[format(t, "g")] = mass
        worst_mass = max(worst_mass, abs(mass - len(xi)))
    xg = np.linspace(-1.5, 1.5, 3)
    worst_eq = 0.0
    for s in p["times"]:
        for t in p["times"]:
            if t > s:
                continue  # the contour average only converges for t <= s
            for xv in xg:
                for yv in xg:
                    a = finite_kernel(xi, s, xv, t, yv)
                    b = contour_kernel(xi, s, xv, t, yv)
                    worst_eq = max(worst_eq, abs(a - b))
    checks = [
        _check("mass_identity", worst_mass <= tol["tol_mass"],
               value=worst_mass, tolerance=tol["tol_mass"], target=len(xi)),
        _check("construction_equivalence", worst_eq <= tol["tol_equiv"],
               value=worst_eq, tolerance=tol["tol_equiv"]),
    ]
    payload = {"masses": masses, "n_points": len(xi), "points": xi.points,
               "equivalence_deviation": worst_eq}
    t0 = p["times"][0]
    wing = radius + 6.0 * math.sqrt(t0)
    xs = np.linspace(-wing, wing, 81)
    rows = [(float(v), float(finite_kernel(xi, t0, v, t0, v)), 0.0) for v in xs]
    return payload, checks, rows


def _run_relax_curve(cfg: ExperimentConfig):
    p, tol = cfg.params, cfg.tolerances
    grid = np.linspace(-p["grid_extent"], p["grid_extent"], p["grid_points"])
    res = relaxation_study(p["s"], p["t"], p["u"], grid_points=grid)
    sup = res["sup_difference"]
    decreasing = bool(np.all(np.diff(sup) < 0.0))
    final = float(sup[-1])
    checks = [
        _check("strictly_decreasing", decreasing, curve=sup),
        _check("final_below_tolerance", final <= tol["tol_final"],
               value=final, tolerance=tol["tol_final"], u_final=float(res["u_values"][-1])),
    ]
    payload = {"u_values": res["u_values"], "sup_difference": sup,
               "s": res["s"], "t": res["t"], "grid_points": grid}
    rows = [(float(u), float(v), 0.0) for u, v in zip(res["u_values"], sup)]
    return payload, checks, rows


def _run_fredholm(cfg: ExperimentConfig):
    p, tol = cfg.params, cfg.tolerances
    t, a, b = p["t"], p["a"], p["b"]
    if not a < b:
        raise DomainError("need a < b")
    xi = PointConfiguration(p["xi"])
    radius = float(np.max(np.abs(xi.points)))
    grid = SpaceTimeGrid.build([t], radius + 5.0 * math.sqrt(t), order=p["order"], interior=[a, b])
    nodes, weights = grid.nodes[0], grid.weights[0]
    box = ((nodes >= a) & (nodes <= b)).astype(float)
    kernel = CorrelationKernel.finite(xi)
    rho1 = np.array([kernel.evaluate(t, v, t, v) for v in nodes])
    linear = float(np.dot(weights, rho1 * box))

    def run(eps):
        chi = [lambda v, e=eps: e * ((v >= a) & (v <= b)).astype(float)]
        det = fredholm_generating(kernel, grid, chi)
        return det, abs(det - 1.0 - eps * linear)

    eps = p["eps"]
    det1, r1 = run(eps)
    det2, r2 = run(0.5 * eps)
    ratio = r1 / r2 if r2 > 0.0 else math.inf
    checks = [
        _check("first_order_residual", r1 <= tol["tol_linear"],
               value=r1, tolerance=tol["tol_linear"]),
        _check("quadratic_falloff", abs(ratio - 4.0) <= tol["ratio_tol"],
               value=ratio, tolerance=tol["ratio_tol"]),
    ]
    payload = {"linear_term": linear, "eps": eps, "determinants": [det1, det2],
               "residuals": [r1, r2], "ratio": ratio, "window": [a, b], "t": t}
    rows = [(eps, r1, 0.0), (0.5 * eps, r2, 0.0)]
    return payload, checks, rows


def _run_extremes(cfg: ExperimentConfig):
    p, tol = cfg.params, cfg.tolerances
    study = bridge_max_study(
        p["h"], p["dt"], p["paths"], RngStream(cfg.seed, 0),
        chunk=p["chunk"], workers=cfg.workers,
    )
    gap = study["cdf_mc"] - study["cdf_exact"]
    se3 = 3.0 * study["stderr"]
    margin = study["bias_margin"]
    excess = np.maximum(-gap - se3, gap - se3 - margin)
    band_ok = bool(np.all(excess <= 0.0))
    m2_tail = moment_h1_from_cdf(2.0)
    target = math.pi * math.pi / 6.0
    stieltjes_dev = abs(m2_tail - target)
    closed_dev = abs(moment_h1(2.0) - target)
    xi_dev = abs(xi_moment_function(2.0) - xi_reference(2.0))
    reduction = max(abs(max_cdf_hN(1, h) - max_cdf_h1(h)) for h in p["h"])
    checks = [
        _check("mc_within_band", band_ok, worst_excess=float(np.max(excess))),
        _check("second_moment_stieltjes", stieltjes_dev <= tol["tol_moment"],
               value=stieltjes_dev, tolerance=tol["tol_moment"]),
        _check("second_moment_closed_form", max(closed_dev, xi_dev) <= 1e-12,
               value=max(closed_dev, xi_dev), tolerance=1e-12),
        _check("n1_reduction", reduction <= tol["tol_reduce"],
               value=reduction, tolerance=tol["tol_reduce"]),
    ]
    payload = dict(study)
    payload["second_moment"] = {"stieltjes": m2_tail, "closed": moment_h1(2.0), "target": target}
    rows = [(float(h), float(m), float(s))
            for h, m, s in zip(study["h_values"], study["cdf_mc"], study["stderr"])]
    return payload, checks, rows


def _distinct_points(rng: RngStream, k: int) -> np.ndarray:
    # rejection keeps the Cauchy-style denominators well conditioned
    while True:
        u = np.sort(rng.uniforms(k) * 4.0 - 2.0)
        if k == 1 or np.min(np.diff(u)) > 5e-2:
            return u


def _run_charpoly(cfg: ExperimentConfig):
    p, tol = cfg.params, cfg.tolerances
    var = p["variance"]
    base = RngStream(cfg.seed, 0)
    sub = base.substream(0)
    worst_pair = 0.0
    for size in (1, 2, 3):
        for half in (1, 2):
            for _ in range(3):
                alpha = _distinct_points(sub, 2 * half)
                spec = GueSpec(size, var)
                block = mgue_det_block(alpha, spec)
                flat = mgue_det(alpha, spec)
                worst_pair = max(worst_pair, abs(block - flat) / max(1.0, abs(flat)))
    spec = GueSpec(p["size"], var)
    alpha = _distinct_points(base.substream(1), 2 * p["half"])
    det_val = mgue_det(alpha, spec)
    est = mgue_mc(alpha, spec, p["mc_samples"], base.substream(2))
    z = abs(est.value - det_val) / est.stderr
    if p["trials"] < 2:
        raise DomainError("--trials must be at least 2")
    w2 = ishikawa_random_trials(2, (p["trials"] + 1) // 2, base.substream(3))
    w3 = ishikawa_random_trials(3, p["trials"] // 2, base.substream(4))
    worst_ish = max(w2, w3)
    reports = {}
    shift_ok = True
    for i, size in enumerate(p["sizes"]):
        rep = timeshift_equivalence_check(
            GueSpec(size, var), p["t_shift"], p["ks_samples"],
            base.substream(5 + i), dt=p["ks_dt"],
        )
        reports[str(size)] = rep
        shift_ok = shift_ok and rep["passed"]
    checks = [
        _check("hermite_pair_identity", worst_pair <= tol["tol_pair"],
               value=worst_pair, tolerance=tol["tol_pair"]),
        _check("mc_vs_determinant", z <= tol["z_max"], value=float(z), tolerance=tol["z_max"]),
        _check("ishikawa_identity", worst_ish <= tol["tol_ishikawa"],
               value=worst_ish, tolerance=tol["tol_ishikawa"]),
        _check("timeshift_two_sample", shift_ok,
               statistics={k: r["max_statistic"] for k, r in reports.items()}),
    ]
    payload = {
        "pair_deviation": worst_pair,
        "mc": {"value": est.value, "stderr": est.stderr, "det": det_val,
               "z": float(z), "alpha": alpha, "samples": est.n_samples},
        "ishikawa": {"n2": w2, "n3": w3, "trials": p["trials"]},
        "timeshift": reports,
    }
    rows = [(float(k), float(r["max_statistic"]), float(r["critical_value"]))
            for k, r in sorted(reports.items())]
    return payload, checks, rows


def _run_fomin(cfg: ExperimentConfig):
    p, tol = cfg.params, cfg.tolerances
    if p["net"]:
        with open(p["net"]) as fh:
            nets = {os.path.basename(p["net"]): parse_network(fh.read())}
    elif p["fixture"]:
        bank = example_networks()
        if p["fixture"] not in bank:
            raise DomainError(f"unknown fixture; have {', '.join(sorted(bank))}")
        nets = {p["fixture"]: bank[p["fixture"]]}
    else:
        nets = example_networks()
    results = {}
    checks = []
    rows = []
    for idx, name in enumerate(sorted(nets)):
        net = nets[name]
        det = fomin_determinant(net)
        rec = brute_force_fomin(net, p["l_max"], tolerance=tol["tol_tail"])
        diff = abs(det - rec["value"])
        ok = bool(rec["conclusive"] and diff <= rec["tail_bound"])
        results[name] = {
            "det": det, "brute": rec["value"], "tail_bound": rec["tail_bound"],
            "difference": diff, "l_max": rec["l_max"], "pass": ok,
            "conclusive": rec["conclusive"], "n_pairs": net.n_pairs,
            "n_vertices": len(net.vertices),
        }
        checks.append(_check(f"identity[{name}]", ok, difference=diff,
                             tail_bound=rec["tail_bound"]))
        rows.append((float(idx), diff, rec["tail_bound"]))
    payload = {"networks": results, "n_networks": len(results)}
    return payload, checks, rows


# ---------------------------------------------------------------------------
# command table


@dataclass(frozen=True)
class CommandSpec:
    help: str
    flags: tuple
    runner: Callable


COMMANDS = {
    "bessel-density": CommandSpec(
        "transition density closed-form cross-checks and normalization",
        (
            Flag("--t", "t", _as_float, 0.8, "evaluation time"),
            Flag("--start", "start", _as_float, 0.5, "start point for the normalization integral"),
            Flag("--x-min", "x_min", _as_float, 0.2, "grid lower start"),
            Flag("--x-max", "x_max", _as_float, 2.0, "grid upper start"),
            Flag("--y-min", "y_min", _as_float, 0.1, "grid lower target"),
            Flag("--y-max", "y_max", _as_float, 2.5, "grid upper target"),
            Flag("--grid-points", "grid_points", _as_int, 10, "grid size per axis"),
            Flag("--dims", "dims", _as_floats, [1.4, 2.0, 2.5, 3.0], "dimensions to normalize"),
            Flag("--tol-pair", "tol_pair", _as_float, 1e-12, "closed-form tolerance", tol=True),
            Flag("--tol-norm", "tol_norm", _as_float, 1e-10, "normalization tolerance", tol=True),
        ),
        _run_bessel_density,
    ),
    "cardy": CommandSpec(
        "simultaneous-vanishing frequency vs the exact hypergeometric value",
        (
            Flag("--D", "dimension", _as_float, 5.0 / 3.0, "process dimension", aliases=("--dimension",)),
            Flag("--x", "x", _as_float, 0.5, "lower start"),
            Flag("--y", "y", _as_float, 1.0, "upper start"),
            Flag("--paths", "paths", _as_int, 20000, "Monte Carlo paths"),
            Flag("--dt", "dt", _as_float, 1e-3, "Euler step"),
            Flag("--eps", "eps", _as_floats, [1e-2, 3e-3, 1e-3], "hit threshold ladder"),
            Flag("--c-eq", "c_eq", _as_float, DEFAULT_C_EQ, "simultaneity window multiplier"),
            Flag("--horizon", "horizon", _as_float, 4.0, "time horizon"),
            Flag("--control-tol", "control_tol", _as_float, 0.01,
                 "frequency bound outside the intermediate phase", tol=True),
        ),
        _run_cardy,
    ),
    "sle-trace": CommandSpec(
        "trace computation with hydrodynamic and symmetry checks",
        (
            Flag("--D", "dimension", _as_float, 3.0, "process dimension", aliases=("--dimension",)),
            Flag("--dt", "dt", _as_float, 1e-3, "driving grid step"),
            Flag("--horizon", "horizon", _as_float, 1.0, "chain horizon"),
            Flag("--probe-radius", "probe_radius", _as_float, 1e3, "radius for the far-field probe"),
            Flag("--tol-residual", "tol_residual", _as_float, 1e-3, "far-field residual bound", tol=True),
            Flag("--tol-imag", "tol_imag", _as_float, 1e-10, "zero-drive real-part bound", tol=True),
        ),
        _run_sle_trace,
    ),
    "sle-swallow": CommandSpec(
        "swallowing frequency of a test point over independent chains",
        (
            Flag("--D", "dimension", _as_float, 3.0, "process dimension", aliases=("--dimension",)),
            Flag("--dt", "dt", _as_float, 1e-3, "driving grid step"),
            Flag("--horizon", "horizon", _as_float, 1.0, "chain horizon"),
            Flag("--point", "point", _as_floats, [0.5, 0.5], "test point re,im"),
            Flag("--chains", "chains", _as_int, 100, "independent chains"),
            Flag("--eps-swallow", "eps_swallow", _as_float, DEFAULT_EPS_SWALLOW, "absorption threshold"),
            Flag("--simple-tol", "simple_tol", _as_float, 0.01,
                 "max frequency in the simple phase", tol=True),
        ),
        _run_sle_swallow,
    ),
    "dyson-compare": CommandSpec(
        "eigenvalue-process marginals vs the noncolliding SDE",
        (
            Flag("--n", "n", _as_int, 2, "particle count"),
            Flag("--t", "t", _as_float, 1.0, "comparison time"),
            Flag("--dt", "dt", _as_float, 5e-4, "SDE step"),
            Flag("--samples", "samples", _as_int, 20000, "sample count per side"),
            Flag("--x", "x_starts", _as_floats, [], "starting points (default: unit-spaced)"),
            Flag("--level", "level", _as_float, 0.01, "two-sample significance level", tol=True),
            Flag("--gap-tol", "gap_tol", _as_float, 0.015,
                 "Kolmogorov bound for the scaled gap law", tol=True),
        ),
        _run_dyson_compare,
    ),
    "kernel-table": CommandSpec(
        "correlation kernel mass identity and construction equivalence",
        (
            Flag("--xi", "xi", _as_floats, [-1.0, 1.0], "configuration points"),
            Flag("--times", "times", _as_floats, [0.2, 1.0], "evaluation times"),
            Flag("--tol-mass", "tol_mass", _as_float, 1e-6, "mass identity tolerance", tol=True),
            Flag("--tol-equiv", "tol_equiv", _as_float, 1e-8, "construction agreement tolerance", tol=True),
        ),
        _run_kernel_table,
    ),
    "relax-curve": CommandSpec(
        "distance from the shifted lattice kernel to its equilibrium limit",
        (
            Flag("--s", "s", _as_float, 0.5, "first time offset"),
            Flag("--t", "t", _as_float, 1.0, "second time offset"),
            Flag("--u", "u", _as_floats, [1.0, 2.0, 4.0, 8.0], "time shifts"),
            Flag("--grid-extent", "grid_extent", _as_float, 1.0, "space grid half-width"),
            Flag("--grid-points", "grid_points", _as_int, 5, "space grid size per axis"),
            Flag("--tol-final", "tol_final", _as_float, 1e-6,
                 "required sup distance at the largest shift", tol=True),
        ),
        _run_relax_curve,
    ),
    "fredholm": CommandSpec(
        "generating functional first-order expansion with quadratic falloff",
        (
            Flag("--t", "t", _as_float, 0.5, "evaluation time"),
            Flag("--xi", "xi", _as_floats, [-1.0, 1.0], "configuration points"),
            Flag("--a", "a", _as_float, -0.5, "test window lower edge"),
            Flag("--b", "b", _as_float, 0.4, "test window upper edge"),
            Flag("--order", "order", _as_int, 48, "quadrature order per panel"),
            Flag("--eps", "eps", _as_float, 1e-2, "test function amplitude"),
            Flag("--tol-linear", "tol_linear", _as_float, 1e-3, "first-order residual bound", tol=True),
            Flag("--ratio-tol", "ratio_tol", _as_float, 0.3,
                 "allowed deviation of the halving ratio from 4", tol=True),
        ),
        _run_fredholm,
    ),
    "extremes": CommandSpec(
        "bridge maximum law vs Monte Carlo plus moment identities",
        (
            Flag("--h", "h", _as_floats, [0.8, 1.0, 1.5, 2.0], "thresholds"),
            Flag("--dt", "dt", _as_float, 1e-3, "bridge grid step"),
            Flag("--paths", "paths", _as_int, 10000, "Monte Carlo paths"),
            Flag("--chunk", "chunk", _as_int, 512, "paths per shard"),
            Flag("--tol-moment", "tol_moment", _as_float, 1e-4,
                 "second-moment tolerance (Stieltjes route)", tol=True),
            Flag("--tol-reduce", "tol_reduce", _as_float, 1e-12,
                 "single-path reduction tolerance", tol=True),
        ),
        _run_extremes,
    ),
    "charpoly": CommandSpec(
        "characteristic polynomial moment identities and the time-shift law",
        (
            Flag("--size", "size", _as_int, 2, "matrix size for the MC cross-check"),
            Flag("--half", "half", _as_int, 1, "half the number of evaluation points"),
            Flag("--variance", "variance", _as_float, 1.0, "entry variance"),
            Flag("--mc-samples", "mc_samples", _as_int, 200000, "MC sample count"),
            Flag("--ks-samples", "ks_samples", _as_int, 20000, "two-sample size per side"),
            Flag("--ks-dt", "ks_dt", _as_float, 2e-3, "SDE step for the time-shift check"),
            Flag("--t-shift", "t_shift", _as_float, 0.5, "time shift"),
            Flag("--trials", "trials", _as_int, 100, "random identity instances"),
            Flag("--sizes", "sizes", _as_ints, [1, 2], "matrix sizes for the time-shift check"),
            Flag("--tol-pair", "tol_pair", _as_float, 1e-10, "determinant pair tolerance", tol=True),
            Flag("--tol-ishikawa", "tol_ishikawa", _as_float, 1e-10, "identity tolerance", tol=True),
            Flag("--z-max", "z_max", _as_float, 3.0, "MC z-score bound", tol=True),
        ),
        _run_charpoly,
    ),
    "fomin": CommandSpec(
        "walk-matrix determinant vs truncated nonintersecting enumeration",
        (
            Flag("--net", "net", _as_str, "", "network description file"),
            Flag("--fixture", "fixture", _as_str, "", "built-in fixture name (default: all)"),
            Flag("--Lmax", "l_max", _as_int, 30, "enumeration length cutoff", aliases=("--l-max",)),
            Flag("--tol-tail", "tol_tail", _as_float, 1e-8, "required tail bound", tol=True),
        ),
        _run_fomin,
    ),
}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochlab",
        description="seeded verification suites with machine-readable reports",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="suite")
    for name, spec in COMMANDS.items():
        sp = sub.add_parser(name, help=spec.help)
        sp.add_argument("--config", default=None, metavar="JSON",
                        help="parameter file; explicit flags take precedence")
        sp.add_argument("--seed", type=int, default=None,
                        help="RNG seed (fallback: STOCHLAB_SEED, then 0)")
        sp.add_argument("--workers", type=int, default=None,
                        help="shard count for parallel Monte Carlo")
        sp.add_argument("--out", default=None, metavar="PATH",
                        help="write the JSON run record here instead of stdout")
        sp.add_argument("--csv", default=None, metavar="PATH",
                        help="also write a plot-ready CSV (x, y, yerr)")
        for f in spec.flags:
            sp.add_argument(f.name, *f.aliases, dest=f.dest, type=f.convert,
                            default=argparse.SUPPRESS, help=f.help)
    return parser


def _resolve_config(args: argparse.Namespace, spec: CommandSpec) -> ExperimentConfig:
    file_cfg = {}
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        if not isinstance(file_cfg, dict):
            raise DomainError("config file must hold a JSON object")
    known = {f.dest for f in spec.flags} | {"seed", "workers", "out", "csv"}
    unknown = sorted(set(file_cfg) - known)
    if unknown:
        raise DomainError("unknown config keys: " + ", ".join(unknown))
    params = {}
    tols = {}
    for f in spec.flags:
        if hasattr(args, f.dest):
            val = getattr(args, f.dest)
        elif f.dest in file_cfg:
            val = f.convert(file_cfg[f.dest])
        else:
            val = f.default
        (tols if f.tol else params)[f.dest] = val
    seed = args.seed
    if seed is None and "seed" in file_cfg:
        seed = int(file_cfg["seed"])
    if seed is None:
        env = os.environ.get("STOCHLAB_SEED", "")
        seed = int(env) if env else 0
    workers = args.workers
    if workers is None:
        workers = int(file_cfg.get("workers", 1))
    if workers < 1:
        raise DomainError("workers must be positive")
    out = args.out if args.out is not None else file_cfg.get("out")
    csv_path = args.csv if args.csv is not None else file_cfg.get("csv")
    return ExperimentConfig(
        name=args.command, params=params, tolerances=tols,
        seed=seed, workers=workers, out=out, csv=csv_path,
    )


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    spec = COMMANDS[args.command]
    try:
        cfg = _resolve_config(args, spec)
    except (ValueError, OSError, DomainError) as exc:
        print(f"stochlab: invalid config: {exc}", file=sys.stderr)
        return 2
    try:
        payload, checks, rows = spec.runner(cfg)
    except (DomainError, DivergenceError) as exc:
        print(f"stochlab {cfg.name}: invalid config: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"stochlab {cfg.name}: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"stochlab {cfg.name}: numeric failure: {exc}", file=sys.stderr)
        return 1
    passed = all(c["passed"] for c in checks)
    record = {
        "command": cfg.name,
        "config": {
            "seed": cfg.seed,
            "workers": cfg.workers,
            "params": cfg.params,
            "tolerances": cfg.tolerances,
            "out": cfg.out,
            "csv": cfg.csv,
        },
        "results": payload,
        "checks": checks,
        "passed": passed,
    }
    text = dumps_record(record) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if cfg.csv and rows:
        emit_plotdata(rows, cfg.csv)
    if not passed:
        failing = ", ".join(c["name"] for c in checks if not c["passed"])
        print(f"stochlab {cfg.name}: FAILED {failing}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
