"""Run a scenario: continuation sweep, per-eps diagnostics, verification checks, files."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, barriers, plots
from .config import ScenarioConfig, build_exponent, build_problem, build_solver_config
from .grid import Grid, field_to_csv, fmt
from .oracle import compose_full_profile, profile_quadrature
from .reaction import lambda_star
from .solver import DirichletProblem, SolveResult, continuation_sweep

log = logging.getLogger(__name__)

TABLE_COLUMNS = (
    "eps",
    "h",
    "max_grad_interior",
    "fb_mean_slope",
    "fb_max_rel_err",
    "reaction_concentration",
    "chi_transition_fraction",
    "harnack_max_quotient",
    "identity42_gap",
)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECKS = 0, 1, 2, 3


@dataclass
class StageDiagnostics:
    eps: float
    h: float
    max_grad_interior: float
    report: analysis.FreeBoundaryReport | None
    concentration: float | None = None
    chi_fraction: float | None = None
    harnack_max: float | None = None
    identity_gap: float | None = None

    def row(self) -> list[str]:
        has_fb = self.report is not None and len(self.report) > 0
        return [
            fmt(self.eps),
            fmt(self.h),
            fmt(self.max_grad_interior),
            fmt(self.report.mean_slope) if has_fb else "",
            fmt(self.report.max_rel_error) if has_fb else "",
            fmt(self.concentration),
            fmt(self.chi_fraction),
            fmt(self.harnack_max),
            fmt(self.identity_gap),
        ]


@dataclass
class CheckRow:
    check: str
    value: float | None
    reference: float | None = None
    tolerance: float | None = None
    status: str = "info"
    note: str = ""


@dataclass
class ScenarioRun:
    config: ScenarioConfig
    problem: DirichletProblem
    results: list[SolveResult]
    stages: list[StageDiagnostics] = field(default_factory=list)
    checks: list[CheckRow] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.results)


# -- diagnostics -------------------------------------------------------------------


def identity_bump(u, report: analysis.FreeBoundaryReport | None, radius: float) -> analysis.Bump:
    """Bump centred on the free-boundary point farthest from the boundary (domain centre if none)."""
    grid = u.grid
    if report is not None and len(report):
        pos = report.positions
        dist = grid.distance_to_boundary(pos)
        k = int(np.argmax(dist))
        center, room = pos[k], float(dist[k])
    else:
        center = 0.5 * (np.asarray(grid.lower) + np.asarray(grid.upper))
        room = float(grid.distance_to_boundary(center)[0])
    return analysis.Bump(tuple(center), min(radius, 0.9 * room))


def diagnose_stage(cfg: ScenarioConfig, prob: DirichletProblem, res: SolveResult) -> StageDiagnostics:
    u, eps, grid = res.u, res.eps, prob.grid
    vf = cfg.verify
    margin = vf["lipschitz_margin"]
    gmax = analysis.lipschitz_monitor([res], margin)[0]
    fb = analysis.extract_free_boundary_report(u, eps)
    if len(fb):
        fb = analysis.slope_report(u, prob.p, fb, cfg.mass, eps, skip_outside=True)
    out = StageDiagnostics(eps, grid.h, gmax, fb)
    if vf["concentration"] and len(fb):
        out.concentration = analysis.reaction_concentration(
            u, eps, prob.reaction, prob.p, fb, 10 * eps, allow_clipping=True
        )
    if vf["chi"]:
        out.chi_fraction = analysis.transition_fraction(analysis.chi_field(u, eps, prob.reaction), cfg.mass)
    if vf["harnack"]:
        balls = analysis.admissible_balls(u, vf["harnack_balls"], positivity=eps, seed=0)
        if balls:
            out.harnack_max = max(
                analysis.harnack_quotient(u, prob.f, prob.p, c, R).quotient for c, R in balls
            )
    if vf["identity42"]:
        bump = identity_bump(u, fb, vf["bump_radius"])
        out.identity_gap = analysis.identity_4_2_check(u, eps, prob.p, prob.f, bump, prob.reaction)[2]
    return out


def emit_convergence_table(stages: list[StageDiagnostics]) -> str:
    if not stages:
        raise ValueError("empty sweep")
    lines = [",".join(TABLE_COLUMNS)]
    lines += [",".join(s.row()) for s in stages]
    return "\n".join(lines) + "\n"


def free_boundary_csv(stages: list[StageDiagnostics], dim: int) -> str:
    axes = ["x", "y"][:dim]
    head = ["eps", "index"] + axes + [f"n{a}" for a in axes] + ["slope", "lambda_star", "rel_error"]
    lines = [",".join(head)]
    for s in stages:
        if s.report is None:
            continue
        for k, pt in enumerate(s.report.points):
            vals = [fmt(s.eps), str(k)] + [fmt(v) for v in pt.position] + [fmt(v) for v in pt.normal]
            vals += [fmt(pt.slope), fmt(pt.lambda_star), fmt(pt.rel_error)]
            lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def checks_csv(rows: list[CheckRow]) -> str:
    lines = ["check,value,reference,tolerance,status,note"]
    for r in rows:
        lines.append(",".join([r.check, fmt(r.value), fmt(r.reference), fmt(r.tolerance), r.status,
                               r.note.replace(",", ";")]))
    return "\n".join(lines) + "\n"


# -- verification ----------------------------------------------------------------------


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def barrier_fixture_grid(dim: int, cells_per_delta: int = 256) -> Grid:
    """[0, 2]^dim with the barrier centred at 1 and delta = 1."""
    n = 2 * cells_per_delta + 1
    return Grid.uniform([n] * dim, 0.0, 2.0)


def run_checks(run: ScenarioRun, only: set[str] | None = None) -> list[CheckRow]:
    cfg, prob = run.config, run.problem
    vf = cfg.verify
    enabled = {k for k in ("harnack", "barrier", "identity42", "nondegeneracy", "chi", "concentration") if vf[k]}
    if only is not None:
        enabled &= only
    final, last = run.results[-1], run.stages[-1]
    rows: list[CheckRow] = []

    gm = [s.max_grad_interior for s in run.stages]
    rows.append(CheckRow("lipschitz_max", max(gm), note="max interior |grad u| over the sweep"))
    fb = last.report
    if fb is not None and len(fb):
        tol = 0.02 if cfg.dim == 1 else None
        err = abs(fb.mean_slope - float(np.mean([pt.lambda_star for pt in fb.points])))
        rel = err / float(np.mean([pt.lambda_star for pt in fb.points]))
        rows.append(CheckRow("fb_slope_rel_err", rel, 0.0, tol, _status(rel <= tol) if tol else "info"))

    if "chi" in enabled:
        fr = [s.chi_fraction for s in run.stages]
        ok = all(b <= a for a, b in zip(fr, fr[1:]))
        rows.append(CheckRow("chi_fraction_decreasing", fr[-1], None, None, _status(ok)))
    if "concentration" in enabled and fb is not None and len(fb):
        expect = analysis.expected_concentration(fb, prob.p, cfg.mass)
        try:
            val = analysis.reaction_concentration(final.u, final.eps, prob.reaction, prob.p, fb, 10 * final.eps)
            note = ""
        except ValueError:
            val = last.concentration
            note = "strip clipped by the domain"
        rel = abs(val - expect) / expect
        rows.append(CheckRow("reaction_concentration", val, expect, 0.05, _status(rel <= 0.05), note))
    if "identity42" in enabled:
        rows.append(CheckRow("identity42_gap", last.identity_gap, note="final eps"))
    if "harnack" in enabled:
        rows.append(CheckRow("harnack_max_quotient", last.harnack_max, None, None,
                             _status(last.harnack_max is not None and np.isfinite(last.harnack_max))))
    if "nondegeneracy" in enabled and fb is not None and len(fb):
        h = prob.grid.h
        radii = h * np.array([4, 8, 12, 16, 20])
        keep = [pt for pt in fb.points if prob.grid.distance_to_boundary(pt.position)[0] >= radii[-1]]
        note = f"{len(keep)} of {len(fb)} points have unclipped balls"
        if keep:
            nd = analysis.nondegeneracy_report(final.u, keep, radii, final.eps**2)
            rows.append(CheckRow("nondegeneracy_min_ratio", nd.min_ratio(), 0.0, None,
                                 _status(nd.min_ratio() > 0), note))
            rows.append(CheckRow("nondegeneracy_spread", nd.spread(), 10.0, None,
                                 _status(nd.spread() <= 10.0)))
            rows.append(CheckRow("zero_density_min", float(nd.zero_density.min()), 0.0, None,
                                 _status(nd.zero_density.min() > 0)))
        else:
            rows.append(CheckRow("nondegeneracy_min_ratio", None, status="skipped", note=note))
    if "barrier" in enabled:
        grid = barrier_fixture_grid(cfg.dim)
        p = build_exponent(cfg, grid)
        spec = barriers.BarrierSpec((1.0,) * cfg.dim, 64.0, 1.0, 1.0)
        chk = barriers.barrier_subsolution_check(spec, p)
        rows.append(CheckRow("barrier_minimum", chk.minimum, 0.0, None, _status(chk.holds),
                             "mu=64 delta=1 A=1 on [0;2]^d with 256 cells per delta"))
    return rows


# -- orchestration ----------------------------------------------------------------------


def sweep(cfg: ScenarioConfig, refine: int = 1) -> ScenarioRun:
    prob = build_problem(cfg, refine)
    results = continuation_sweep(prob, cfg.eps, build_solver_config(cfg))
    run = ScenarioRun(cfg, prob, results)
    run.stages = [diagnose_stage(cfg, prob, r) for r in results]
    return run


def _oracle_field(run: ScenarioRun):
    cfg, prob = run.config, run.problem
    if cfg.dim != 1 or not prob.p.is_constant or cfg.boundary["kind"] != "ends":
        return None
    if cfg.boundary["right"] != 0 or not np.all(prob.f.values == 0):
        return None
    try:
        prof = profile_quadrature(prob.reaction, prob.p.p_min, run.results[-1].eps)
        return compose_full_profile(prof, cfg.boundary["left"], prob.grid)
    except ValueError:
        return None


def write_outputs(run: ScenarioRun, out: Path, mode: str) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name: str, text: str):
        path = out / name
        path.write_text(text, encoding="utf-8", newline="\n")
        written.append(path)

    cfg = run.config
    put("config.json", cfg.to_json())
    put("solution.csv", field_to_csv(run.results[-1].u, "u"))
    put("free_boundary.csv", free_boundary_csv(run.stages if mode != "solve" else run.stages[-1:], cfg.dim))
    if mode == "solve":
        return written
    put("convergence_table.csv", emit_convergence_table(run.stages))
    if cfg.dim == 1:
        fields = [(r.eps, r.u) for r in run.results]
        written.append(plots.profile_overlay(fields, out / "profile_overlay.svg", _oracle_field(run))[0])
    else:
        written.append(plots.heat_map(run.results[-1].u, run.stages[-1].report, out / "heat_map.svg")[0])
    ref = None
    last = run.stages[-1].report
    if last is not None and len(last):
        ref = float(np.mean([pt.lambda_star for pt in last.points]))
    elif run.problem.p.is_constant:
        ref = lambda_star(run.problem.p.p_min, cfg.mass)
    slopes = [s.report.mean_slope if s.report is not None and len(s.report) else np.nan for s in run.stages]
    written.append(plots.slope_convergence([s.eps for s in run.stages], slopes, ref, out / "slope_convergence.svg")[0])
    if mode == "verify":
        put("verification.csv", checks_csv(run.checks))
    return written


def run_scenario(cfg: ScenarioConfig, out: Path | str | None = None, mode: str = "sweep",
                 only: set[str] | None = None) -> int:
    """Execute a scenario and write its files; returns a process exit status."""
    if mode not in ("solve", "sweep", "verify"):
        raise ValueError(f"unknown mode {mode!r}")
    out = Path(out or cfg.output or f"out/{cfg.name}")
    run = sweep(cfg)
    status = EXIT_OK
    if not run.converged:
        bad = [f"{r.eps:g}: {r.message}" for r in run.results if not r.converged]
        log.error("solver did not converge at eps %s", "; ".join(bad))
        status = EXIT_SOLVER
    if mode == "verify":
        run.checks = run_checks(run, only)
        if status == EXIT_OK and any(c.status == "fail" for c in run.checks):
            status = EXIT_CHECKS
    write_outputs(run, out, mode)
    return status
