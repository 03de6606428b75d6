"""Reproducible experiments: certification, averaged-vs-original runs and epsilon sweeps."""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .averaging import (
    build_averaged_field_quasiperiodic,
    error_bound_constant,
    estimate_constants,
)
from .config import ConfigError, ExperimentConfig
from .errors import DegenerateFunction
from .shifts import PeriodicityCertificate, verify_delta_periodic, verify_quasiperiodic
from .solver import DynamicSystem, Trajectory, compare_trajectories, solve

log = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ("t", "x", "xi", "absdiff")
SUMMARY_COLUMNS = ("row", "q", "epsilon", "max_diff", "ratio", "bound", "horizon", "slope")


class CertificationError(RuntimeError):
    pass


def fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------


def _state_samples(cfg: ExperimentConfig):
    xs = cfg.verify.get("x_samples")
    if xs:
        return [np.atleast_1d(np.asarray(x, dtype=float)) for x in xs]
    return [np.array(cfg.x0, dtype=float)]


def certify(cfg: ExperimentConfig, q=None, check: Optional[str] = None) -> PeriodicityCertificate:
    """Run the periodicity check named by ``check`` on the configured field.

    The field is frozen at every state in ``verify.x_samples`` (default:
    ``x0``) and the frozen functions are checked together.
    """
    check = check or cfg.verify.get("check") or cfg.verify.get("expect") or "delta_periodic"
    ts = cfg.build_scale(q)
    op = cfg.build_shift(ts, q)
    fld = cfg.build_field(ts, q)
    xs = _state_samples(cfg)

    def frozen(t):
        return np.concatenate([fld(t, x) for x in xs])

    tol = float(cfg.verify.get("tolerance", 1e-9))
    T = cfg.period
    if check == "delta_periodic":
        return verify_delta_periodic(op, frozen, T, tol=tol,
                                     check_backward=bool(cfg.verify.get("backward", False)))
    if check == "quasi_periodic":
        try:
            return verify_quasiperiodic(op, frozen, T, tol=tol)
        except DegenerateFunction as exc:
            log.warning("quasiperiodic check degenerate: %s", exc)
            return PeriodicityCertificate("none", T, float("nan"), float("inf"), 0, float("inf"), tol)
    raise ConfigError(f"unknown check {check!r}")


def write_certificates(path: Path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q", "check", "kind", "period", "gamma", "max_residual",
                    "max_abs_residual", "sample_count", "tolerance"])
        for q, check, c in rows:
            w.writerow([fmt(q), check, c.kind, fmt(c.period), fmt(c.gamma), fmt(c.max_residual),
                        fmt(c.max_abs_residual), c.sample_count, fmt(c.tolerance)])


def verify_command(cfg: ExperimentConfig, out_dir=None, stream=None):
    """Print and store certificates; return ``(exit_code, rows)``.

    Exit code 3 when ``verify.expect`` names a kind and some ``q`` fails it.
    """
    expect = cfg.verify.get("expect")
    check = cfg.verify.get("check") or expect or "delta_periodic"
    rows = []
    for q in cfg.q_values:
        cert = certify(cfg, q, check)
        rows.append((q, check, cert))
        line = (f"q={fmt(q) or '-'} check={check} kind={cert.kind} T={fmt(cert.period)} "
                f"gamma={fmt(cert.gamma)} max_residual={cert.max_residual:.3e} "
                f"samples={cert.sample_count}")
        print(line, file=stream)
    out = Path(out_dir or cfg.out_dir)
    write_certificates(out / "certificates.csv", rows)
    failed = expect is not None and any(c.kind == "none" for _, _, c in rows)
    return (3 if failed else 0), rows


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    q: Optional[float]
    epsilon: float
    original: Trajectory
    averaged: Trajectory
    max_diff: float
    bound_constant: float
    K: float
    M: float
    lipschitz: float
    horizon: float
    gamma: float
    runtime: float = 0.0

    @property
    def bound(self) -> float:
        return self.bound_constant * self.epsilon

    @property
    def ratio(self) -> float:
        return self.max_diff / self.epsilon if self.epsilon > 0 else float("nan")


def _constants(cfg, fld, ts):
    M, lam = fld.bound, fld.lipschitz
    if M is None or lam is None:
        box = cfg.build_domain()
        est = estimate_constants(fld, ts.all_points()[:64], box.lo, box.hi, seed=cfg.seed)
        log.info("estimated M=%g lambda=%g from %d samples", est.bound, est.lipschitz,
                 est.sample_count)
        M = est.bound if M is None else M
        lam = est.lipschitz if lam is None else lam
    return M, lam


def prepare(cfg: ExperimentConfig, q=None):
    """Certify the field and build the averaged field for one ``q``."""
    cert = certify(cfg, q, "quasi_periodic")
    if cert.kind == "none":
        raise CertificationError(
            f"field is not geometric Delta-quasiperiodic for q={q} "
            f"(residual {cert.max_residual:.3e})"
        )
    ts = cfg.build_scale(q)
    op = cfg.build_shift(ts, q)
    fld = cfg.build_field(ts, q).with_certificate(cert)
    avg = build_averaged_field_quasiperiodic(fld, op, cfg.period, cfg.t0, cert.gamma)
    return ts, op, fld, avg, cert


def run_single(cfg: ExperimentConfig, q, epsilon, prepared=None) -> RunResult:
    start = time.perf_counter()
    ts, op, fld, avg, cert = prepared if prepared is not None else prepare(cfg, q)
    box = cfg.build_domain()
    sys_x = DynamicSystem(fld, epsilon, cfg.t0, cfg.x0, box)
    sys_xi = DynamicSystem(avg, epsilon, cfg.t0, cfg.x0, box)
    x = solve(sys_x, ts, L=cfg.L)
    xi = solve(sys_xi, ts, horizon_end=x.times[-1])
    report = compare_trajectories(x, xi)
    M, lam = _constants(cfg, fld, ts)
    K = avg.K
    C = error_bound_constant(M, lam, cfg.L, K)
    return RunResult(q, epsilon, x, xi, report.max_diff, C, K, M, lam, float(x.times[-1]),
                     cert.gamma, time.perf_counter() - start)


def run_grid(cfg: ExperimentConfig):
    """Every (q, epsilon) pair of the config, sorted by q then descending epsilon."""
    jobs = []
    for q in cfg.q_values:
        prepared = prepare(cfg, q)
        for eps in sorted(cfg.epsilons, reverse=True):
            jobs.append((q, eps, prepared))
    if cfg.parallel > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallel) as pool:
            results = list(pool.map(lambda j: run_single(cfg, *j), jobs))
    else:
        results = [run_single(cfg, *j) for j in jobs]
    return results


def trajectory_filename(q, eps) -> str:
    qs = "none" if q is None else format(q, "g")
    return f"trajectory_q{qs}_eps{format(eps, 'g')}.csv"


def write_trajectory(path: Path, res: RunResult):
    x, xi = res.original, res.averaged
    n = x.states.shape[1]
    if n == 1:
        header = list(TRAJECTORY_COLUMNS)
    else:
        header = (["t"] + [f"x{j}" for j in range(n)] + [f"xi{j}" for j in range(n)]
                  + ["absdiff"])
    diffs = np.linalg.norm(x.states - xi.states, axis=1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, a, b, d in zip(x.times, x.states, xi.states, diffs):
            w.writerow([fmt(t)] + [fmt(v) for v in a] + [fmt(v) for v in b] + [fmt(d)])


def write_summary(path: Path, results, slopes=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in results:
            w.writerow(["run", fmt(r.q), fmt(r.epsilon), fmt(r.max_diff), fmt(r.ratio),
                        fmt(r.bound), fmt(r.horizon), ""])
        for q, s in (slopes or {}).items():
            w.writerow(["slope", fmt(q), "", "", "", "", "", fmt(s)])


def run_example(cfg: ExperimentConfig, out_dir=None, stream=None):
    """Solve original and averaged systems for every (q, eps) and write CSV (and SVG)."""
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = run_grid(cfg)
    paths = []
    for r in results:
        p = out / trajectory_filename(r.q, r.epsilon)
        write_trajectory(p, r)
        paths.append(p)
        print(f"q={fmt(r.q) or '-'} eps={r.epsilon:g} max_diff={r.max_diff:.6e} "
              f"bound={r.bound:.6e} horizon={r.horizon:.17g} status={r.original.status} "
              f"({r.runtime:.3f}s)", file=stream)
    write_summary(out / "summary.csv", results)
    if cfg.fmt == "csv+svg":
        from .plots import render_trajectory_svg

        for p in paths:
            render_trajectory_svg(p, p.with_suffix(".svg"))
    return results


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepRow:
    q: Optional[float]
    epsilon: float
    max_diff: float
    ratio: float
    bound: float
    horizon: float
    runtime: float


@dataclass
class SweepReport:
    rows: list
    slopes: dict = field(default_factory=dict)


def loglog_slope(eps, diffs) -> float:
    """Least-squares slope of ``log(diff)`` against ``log(eps)``."""
    eps, diffs = np.asarray(eps, dtype=float), np.asarray(diffs, dtype=float)
    if len(eps) < 2 or np.any(eps <= 0) or np.any(diffs <= 0):
        return float("nan")
    return float(np.polyfit(np.log(eps), np.log(diffs), 1)[0])


def run_sweep(cfg: ExperimentConfig, out_dir=None, stream=None) -> SweepReport:
    if len(set(cfg.epsilons)) < 2:
        raise ConfigError("a sweep needs at least two distinct epsilon values")
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = run_grid(cfg)
    rows = [SweepRow(r.q, r.epsilon, r.max_diff, r.ratio, r.bound, r.horizon, r.runtime)
            for r in results]
    slopes = {}
    for q in cfg.q_values:
        sel = [r for r in rows if r.q == q]
        slopes[q] = loglog_slope([r.epsilon for r in sel], [r.max_diff for r in sel])
    for r in results:
        write_trajectory(out / trajectory_filename(r.q, r.epsilon), r)
    write_summary(out / "summary.csv", results, slopes)
    for r in rows:
        print(f"q={fmt(r.q) or '-'} eps={r.epsilon:g} max_diff={r.max_diff:.6e} "
              f"ratio={r.ratio:.6f} bound={r.bound:.6e} ({r.runtime:.3f}s)", file=stream)
    for q, s in slopes.items():
        print(f"q={fmt(q) or '-'} slope={s:.6f}", file=stream)
    if cfg.fmt == "csv+svg":
        from .plots import render_sweep_svg, render_trajectory_svg

        render_sweep_svg(out / "summary.csv", out / "sweep.svg")
        for r in results:
            p = out / trajectory_filename(r.q, r.epsilon)
            render_trajectory_svg(p, p.with_suffix(".svg"))
    return SweepReport(rows, slopes)


def read_trajectory_csv(path):
    """Return ``(times, x, xi, absdiff)`` arrays from a trajectory CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(v) for v in row] for row in r])
    n = (len(header) - 2) // 2
    return data[:, 0], data[:, 1:1 + n], data[:, 1 + n:1 + 2 * n], data[:, -1]
