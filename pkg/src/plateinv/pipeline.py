"""Stages of the batch driver and the oracle suite.

Stages exchange data only through files in the output directory, so each one
can be re-run on its own once its inputs exist.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import config as K
from .asymptotics import ExpansionTable, analytic_expansion, fit_expansion
from .errors import InputError
from .exterior import continue_traces
from .forward import (MediumConfig, MeasurementSet, default_kappas, measure, solve,
                      solve_dense, solve_neumann, sweep)
from .geometry import DomainSpec, ScalarField, SphereMesh, VoxelGrid
from .kernels import neumann_bound
from .moments import (InvariantSupport, MomentTable, ProductIntegrals, extract_moments,
                      oracle_table, reconstruct_invariant_product,
                      recover_constant_density, recover_inclusion_contrast)

MEASUREMENTS = "measurements.csv"
EXPANSION_ANALYTIC = "expansion_analytic.csv"
EXPANSION_FITTED = "expansion_fitted.csv"
CONT_INNER = "continuation_inner.csv"
CONT_DIRECT = "continuation_direct.csv"
CONT_RESULT = "continuation_result.csv"


# -- building objects from the configuration -------------------------------------

def shape_contains(shape, points: np.ndarray) -> np.ndarray:
    if isinstance(shape, K.Ball):
        d = points - np.asarray(shape.center)
        return np.einsum("ij,ij->i", d, d) <= shape.radius ** 2
    if isinstance(shape, K.Box):
        return np.all((points >= np.asarray(shape.lower)) & (points <= np.asarray(shape.upper)),
                      axis=1)
    d = points - np.asarray(shape.center)
    cross = [a for a in range(3) if a != shape.axis]
    if shape.square:
        inside = np.all(np.abs(d[:, cross]) <= shape.radius, axis=1)
    else:
        inside = np.sum(d[:, cross] ** 2, axis=1) <= shape.radius ** 2
    return inside & (np.abs(d[:, shape.axis]) <= shape.half_length)


def eval_profile(p, points: np.ndarray) -> np.ndarray:
    if isinstance(p, K.Constant):
        return np.full(len(points), p.value)
    if isinstance(p, K.Gaussian):
        d = points - np.asarray(p.center)
        return p.amplitude * np.exp(-np.einsum("ij,ij->i", d, d) / (2 * p.width ** 2))
    if isinstance(p, K.Polynomial):
        return p.c0 + points @ np.asarray(p.c)
    if isinstance(p, K.Indicator):
        return p.value * shape_contains(p.region, points)
    return sum((eval_profile(t, points) for t in p.terms), np.zeros(len(points)))


@dataclass
class Problem:
    run: K.RunConfig
    medium: MediumConfig
    mesh: SphereMesh

    @property
    def grid(self) -> VoxelGrid:
        return self.medium.grid


def build_problem(run: K.RunConfig) -> Problem:
    geo = run.geometry
    grid = VoxelGrid(tuple(geo.grid.n), tuple(geo.grid.lower), tuple(geo.grid.upper))
    X = grid.centers
    omega = shape_contains(geo.omega, X)
    if not omega.any():
        raise InputError("omega contains no voxel centers")
    inc = shape_contains(geo.inclusion, X) & omega if geo.inclusion is not None else None
    domain = DomainSpec(grid, omega, geo.R, inc)
    med = run.medium
    P = X
    if med.iota is not None:
        iota = np.asarray(med.iota, dtype=float)
        iota = iota / np.linalg.norm(iota)
        P = X - np.outer(X @ iota, iota)

    def on_omega(profile, outside):
        return np.where(omega, eval_profile(profile, P), outside)

    rho0 = varrho = None
    if med.rho is not None:
        rho = ScalarField(grid, on_omega(med.rho, 1.0))
    else:
        if inc is None:
            raise InputError("inclusion_density needs geometry.inclusion")
        rho0 = ScalarField(grid, on_omega(med.inclusion_density.rho0, 1.0))
        varrho = med.inclusion_density.varrho
        rho = ScalarField(grid, rho0.values + varrho * inc)
    f = ScalarField(grid, on_omega(med.f, 0.0))
    g = ScalarField(grid, on_omega(med.g, 0.0))
    medium = MediumConfig(domain, rho, f, g, med.iota, rho0, varrho)
    mesh = SphereMesh.gauss_product(geo.R, run.mesh.n_theta, run.mesh.n_phi)
    return Problem(run, medium, mesh)


def kappa_list(run: K.RunConfig) -> np.ndarray:
    s = run.sweep
    if s.kappas is not None:
        return np.asarray(s.kappas, dtype=float)
    return default_kappas(run.geometry.R, s.count, s.lo, s.hi)


def _continuation_meshes(prob: Problem):
    c = prob.run.continuation
    return SphereMesh.for_degree(c.inner_radius, c.degree), prob.mesh


# -- stages --------------------------------------------------------------------------

class Context:
    def __init__(self, prob: Problem, digest: str, out: str):
        self.prob = prob
        self.digest = digest
        self.out = out

    @property
    def comment(self) -> str:
        return f"config_sha256: {self.digest}"

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def need(self, name: str) -> str:
        p = self.path(name)
        if not os.path.exists(p):
            raise InputError(f"missing input artifact {name}; run the producing stage first")
        return p

    def write_json(self, name: str, payload: dict):
        write_json(self.path(name), {"config_sha256": self.digest, **payload})

    def measured_mesh(self) -> SphereMesh:
        meas = MeasurementSet.from_csv(self.need(MEASUREMENTS))
        if meas.nodes.shape != self.prob.mesh.nodes.shape or \
                np.max(np.abs(meas.nodes - self.prob.mesh.nodes)) > 1e-12:
            raise InputError("measurement nodes do not match the configured sphere mesh")
        return self.prob.mesh


def write_json(path: str, payload: dict):
    with open(path, "w") as fh:
        json.dump(_plain(payload), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return _plain(obj.item())
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def stage_forward(ctx: Context):
    prob = ctx.prob
    cfg = prob.medium
    ks = kappa_list(prob.run)
    meas = sweep(cfg, ks, prob.mesh, prob.run.sweep.method)
    meas.to_csv(ctx.path(MEASUREMENTS), ctx.comment)
    analytic_expansion(cfg, prob.mesh).to_csv(ctx.path(EXPANSION_ANALYTIC), ctx.comment)
    summary = {"kappas": ks, "nodes": prob.mesh.size, "voxels": prob.grid.size,
               "neumann_bound_k2": neumann_bound(cfg.max_contrast, cfg.domain.R)}
    if prob.run.continuation is not None:
        inner, outer = _continuation_meshes(prob)
        k = prob.run.continuation.kappa
        u = solve(cfg, k)
        for mesh, name in ((inner, CONT_INNER), (outer, CONT_DIRECT)):
            a, b = measure(cfg, u, k, mesh)
            MeasurementSet(np.array([k]), mesh.nodes, a[None], b[None]).to_csv(
                ctx.path(name), ctx.comment)
    ctx.write_json("forward_summary.json", summary)


def stage_fit(ctx: Context):
    meas = MeasurementSet.from_csv(ctx.need(MEASUREMENTS))
    fit = ctx.prob.run.fit
    table = fit_expansion(meas, fit.powers_u, fit.powers_lap)
    table.to_csv(ctx.path(EXPANSION_FITTED), ctx.comment)
    d = table.diagnostics
    ctx.write_json("fit_summary.json", {
        "powers_u": sorted(table.M), "powers_lap": sorted(table.N),
        "cond_u": d["cond_u"], "cond_lap": d["cond_lap"], "dropped": d["dropped"],
        "max_residual_u": float(np.max(table.residual_u)),
        "max_residual_lap": float(np.max(table.residual_lap))})


def _fitted_table(ctx: Context) -> ExpansionTable:
    mesh = ctx.measured_mesh()
    return ExpansionTable.from_csv(ctx.need(EXPANSION_FITTED), mesh.nodes)


def stage_extract(ctx: Context):
    table = _fitted_table(ctx)
    m_max = ctx.prob.run.moments.m_max
    summary = {}
    for target in ("rho_g", "rho_f"):
        mt = extract_moments(table, ctx.prob.mesh, target, m_max)
        mt.to_csv(ctx.path(f"moments_{target}.csv"), ctx.comment)
        summary[f"{target}_mass"] = complex(mt[(0, 0)] * np.sqrt(4 * np.pi))
        summary[f"{target}_conjugate_symmetry_defect"] = mt.conjugate_symmetry_defect()
    ctx.write_json("extract_summary.json", summary)


def stage_reconstruct(ctx: Context):
    prob = ctx.prob
    cfg = prob.medium
    run = prob.run
    summary = {}
    fields = {"rho_f": cfg.rho_f, "rho_g": cfg.rho_g}
    products_source = "configuration"
    if cfg.iota is not None:
        axis = int(np.argmax(np.abs(np.asarray(cfg.iota))))
        support = InvariantSupport(prob.grid, axis, cfg.domain.omega_mask)
        recovered = {}
        for target in ("rho_g", "rho_f"):
            mt = MomentTable.from_csv(ctx.need(f"moments_{target}.csv"))
            prof = reconstruct_invariant_product(mt, support, rel_reg=run.reconstruct.rel_reg)
            prof.to_csv(ctx.path(f"profile_{target}.csv"), ctx.comment)
            truth = support.sample(fields[target])
            summary[f"profile_{target}"] = {
                "relative_l2_error": prof.relative_l2_error(truth), **prof.diagnostics}
            recovered[target] = support.extrude(prof.values)
        fields = recovered
        products_source = "reconstructed"
    mode = run.reconstruct.density
    if mode != "none":
        table = _fitted_table(ctx)
        P = ProductIntegrals.from_fields(fields["rho_f"], fields["rho_g"])
        if mode == "constant":
            res = recover_constant_density(table, prob.mesh, P, prob.grid,
                                           cfg.domain.omega_mask)
            om = cfg.domain.omega_mask
            truth = float(np.mean(cfg.rho.values[om]))
        else:
            if cfg.rho0 is None:
                raise InputError("inclusion recovery needs medium.inclusion_density")
            res = recover_inclusion_contrast(table, prob.mesh, P, cfg.rho0,
                                             cfg.domain.inclusion_mask)
            truth = cfg.varrho
        summary["density"] = {"mode": mode, "recovered": res.value, "truth": truth,
                              "products_source": products_source, **res.summary()}
    ctx.write_json("reconstruct_summary.json", summary)


def stage_continue(ctx: Context):
    prob = ctx.prob
    c = prob.run.continuation
    inner, outer = _continuation_meshes(prob)
    src = MeasurementSet.from_csv(ctx.need(CONT_INNER))
    direct = MeasurementSet.from_csv(ctx.need(CONT_DIRECT))
    k = float(src.kappas[0])
    u, lap = continue_traces(inner, src.u[0], src.lap_u[0], k, outer.nodes, c.gamma)
    MeasurementSet(np.array([k]), outer.nodes, u[None], lap[None]).to_csv(
        ctx.path(CONT_RESULT), ctx.comment)
    err_u = float(np.max(np.abs(u - direct.u[0])) / np.max(np.abs(direct.u[0])))
    err_l = float(np.max(np.abs(lap - direct.lap_u[0])) / np.max(np.abs(direct.lap_u[0])))
    ctx.write_json("continue_summary.json", {"kappa": k, "relative_error_u": err_u,
                                              "relative_error_lap_u": err_l})


STAGE_FUNCS: dict[str, Callable[[Context], None]] = {
    "forward": stage_forward, "fit": stage_fit, "extract": stage_extract,
    "reconstruct": stage_reconstruct, "continue": stage_continue,
}


def run_pipeline(ctx: Context):
    os.makedirs(ctx.out, exist_ok=True)
    for stage in ctx.prob.run.pipeline:
        STAGE_FUNCS[stage](ctx)
    merged = {}
    for stage in K.STAGES:
        p = ctx.path(f"{stage}_summary.json")
        if os.path.exists(p):
            with open(p) as fh:
                data = json.load(fh)
            data.pop("config_sha256", None)
            merged[stage] = data
    ctx.write_json("summary.json", {"stages": list(ctx.prob.run.pipeline), **merged})


# -- oracle suite ---------------------------------------------------------------------

@dataclass
class Row:
    name: str
    measured: str
    tolerance: str
    passed: bool


def _row_moments(prob: Problem) -> Row:
    cfg = prob.medium
    run = prob.run
    meas = sweep(cfg, kappa_list(run), prob.mesh, run.sweep.method)
    table = fit_expansion(meas, run.fit.powers_u, run.fit.powers_lap)
    worst = 0.0
    m = min(4, run.moments.m_max)
    for target, q in (("rho_g", cfg.rho_g), ("rho_f", cfg.rho_f)):
        if not np.any(q.values):
            continue
        err = extract_moments(table, prob.mesh, target, m).per_degree_error(
            oracle_table(q, target, m))
        worst = max(worst, float(np.max(err)))
    tol = run.tolerances.moment_relative
    return Row("moment_extraction", f"{worst:.3e}", f"<= {tol:g}", bool(worst <= tol))


def _row_neumann(prob: Problem) -> Row:
    cfg = prob.medium
    bound = neumann_bound(cfg.max_contrast, cfg.domain.R)
    k = np.sqrt(0.5 * bound) if np.isfinite(bound) else float(kappa_list(prob.run)[-1])
    a = solve_neumann(cfg, k).values
    b = solve_dense(cfg, k).values
    err = float(np.max(np.abs(a - b)) / np.max(np.abs(b))) if np.any(b) else 0.0
    tol = prob.run.tolerances.neumann_dense
    return Row("neumann_vs_dense", f"{err:.3e}", f"<= {tol:g}", bool(err <= tol))


def expansion_slope(cfg: MediumConfig, mesh: SphereMesh, kappas) -> tuple[float, np.ndarray]:
    table = analytic_expansion(cfg, mesh)
    errs = []
    for k in kappas:
        u, _ = measure(cfg, solve_dense(cfg, k), k, mesh)
        errs.append(np.max(np.abs(u - table.u_series(k))))
    errs = np.asarray(errs)
    return float(np.polyfit(np.log(kappas), np.log(errs), 1)[0]), errs


def _row_order(prob: Problem) -> Row:
    s = prob.run.sweep
    ks = np.geomspace(s.lo, s.hi, 6) / prob.run.geometry.R
    slope, _ = expansion_slope(prob.medium, prob.mesh, ks)
    lo, hi = prob.run.tolerances.slope_window
    return Row("expansion_order", f"{slope:.3f}", f"in [{lo:g}, {hi:g}]", bool(lo <= slope <= hi))


def _row_continuation(prob: Problem) -> Row:
    c = prob.run.continuation
    inner, outer = _continuation_meshes(prob)
    cfg = prob.medium
    u = solve(cfg, c.kappa)
    ui, li = measure(cfg, u, c.kappa, inner)
    uo, lo = measure(cfg, u, c.kappa, outer)
    uc, lc = continue_traces(inner, ui, li, c.kappa, outer.nodes, c.gamma)
    err = max(float(np.max(np.abs(uc - uo)) / np.max(np.abs(uo))),
              float(np.max(np.abs(lc - lo)) / np.max(np.abs(lo))))
    tol = prob.run.tolerances.continuation_relative
    return Row("continuation", f"{err:.3e}", f"<= {tol:g}", bool(err <= tol))


def oracle_rows(prob: Problem) -> list:
    stages = set(prob.run.pipeline)
    plan = []
    if "forward" in stages:
        plan += [_row_neumann, _row_order]
    if "extract" in stages:
        plan.append(_row_moments)
    if "continue" in stages:
        plan.append(_row_continuation)
    return [f(prob) for f in plan]


def format_rows(rows: list) -> str:
    lines = [f"{'check':<20} {'measured':>12}  {'tolerance':<16} result"]
    for r in rows:
        lines.append(f"{r.name:<20} {r.measured:>12}  {r.tolerance:<16} "
                     f"{'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
