"""Acceptance suite: one test per criterion, each reported in the terminal summary."""

import json
from pathlib import Path

import numpy as np

from conftest import (EXTENDED_LAP, EXTENDED_U, bump, config_a, make_ball_config,
                      record_acceptance)
from plateinv import cli
from plateinv.asymptotics import analytic_expansion, fit_expansion, general_order_coeff
from plateinv.config import load_config
from plateinv.errors import IllPosedError
from plateinv.exterior import continue_traces
from plateinv.forward import (default_kappas, field_evaluator, measure, neumann_bound,
                              radiation_defect, solve, solve_dense, solve_neumann,
                              source_potential, sweep)
from plateinv.geometry import SphereMesh
from plateinv.moments import (ProductIntegrals, check_ordering_uniqueness, extract_moments,
                              oracle_table, recover_constant_density)
from plateinv.pipeline import _continuation_meshes, build_problem, expansion_slope

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
WINDOW = np.geomspace(0.02, 0.2, 6)


def run_cli(tmp_path, payload, name):
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(payload))
    out = tmp_path / name
    assert cli.main(["run", str(path), "--out", str(out)]) == 0
    return json.loads((out / "summary.json").read_text())


def ball_run(medium, reconstruct, geometry_extra=None):
    geometry = {"grid": {"n": [12, 12, 12], "lower": [-0.5] * 3, "upper": [0.5] * 3},
                "R": 1.0, "omega": {"shape": "ball", "radius": 0.5}}
    geometry.update(geometry_extra or {})
    return {"geometry": geometry, "medium": medium, "reconstruct": {"density": reconstruct},
            "pipeline": ["forward", "fit", "reconstruct"]}


SOURCES = {"f": {"profile": "gaussian", "width": 0.2, "center": [-0.1, 0.1, 0.0]},
           "g": {"profile": "gaussian", "width": 0.18, "center": [0.1, 0.0, -0.05]}}


def test_01_expansion_order(cfg_a, mesh):
    slope, errs = expansion_slope(cfg_a, mesh, WINDOW)
    ok = 3.6 <= slope <= 4.4
    record_acceptance(1, "expansion order", ok, f"slope {slope:.3f} in [3.6, 4.4]")
    assert ok


def test_02_born_order(cfg_a):
    errs = []
    for k in WINDOW:
        u = solve_dense(cfg_a, k).values
        errs.append(np.linalg.norm(u - source_potential(cfg_a, k).values) / np.linalg.norm(u))
    slope = np.polyfit(np.log(WINDOW), np.log(errs), 1)[0]
    ok = slope >= 2.6
    record_acceptance(2, "Born-correction order", ok, f"slope {slope:.3f} >= 2.6")
    assert ok


def test_03_neumann_vs_dense(cfg_a, cfg_b):
    worst = 0.0
    for cfg in (cfg_a, cfg_b):
        k = np.sqrt(0.5 * neumann_bound(cfg.max_contrast, cfg.domain.R))
        a, b = solve_neumann(cfg, k).values, solve_dense(cfg, k).values
        worst = max(worst, np.max(np.abs(a - b)) / np.max(np.abs(b)))
    ok = worst <= 1e-8
    record_acceptance(3, "Neumann vs dense", ok, f"max relative difference {worst:.2e} <= 1e-8")
    assert ok


def test_04_moment_extraction(cfg_a, sweep_a, cfg_b, mesh):
    cases = {"a": (cfg_a, sweep_a), "b": (cfg_b, sweep(cfg_b, default_kappas(1.0, count=12), mesh))}
    worst = 0.0
    for cfg, meas in cases.values():
        table = fit_expansion(meas, EXTENDED_U, EXTENDED_LAP)
        for target, q in (("rho_g", cfg.rho * cfg.g), ("rho_f", cfg.rho * cfg.f)):
            err = extract_moments(table, mesh, target, 4).per_degree_error(oracle_table(q, target, 4))
            worst = max(worst, float(np.max(err)))
    ok = worst <= 1e-2
    record_acceptance(4, "moment extraction", ok, f"worst per-degree error {worst:.2e} <= 1e-2")
    assert ok


def test_05_invariant_reconstruction(tmp_path):
    payload = json.loads((CONFIGS / "closed_loop_invariant.json").read_text())
    payload["reconstruct"] = {"density": "none"}
    assert payload["geometry"]["grid"]["n"][:2] == [16, 16]
    rec = run_cli(tmp_path, payload, "inv")["reconstruct"]
    errs = {t: rec[f"profile_{t}"]["relative_l2_error"] for t in ("rho_g", "rho_f")}
    ok = all(e <= 5e-2 for e in errs.values())
    record_acceptance(5, "translation-invariant reconstruction", ok,
                      f"L2 errors rho_g {errs['rho_g']:.2e}, rho_f {errs['rho_f']:.2e} <= 5e-2")
    assert ok


def test_06_constant_density(tmp_path, mesh):
    analytic, fitted = {}, {}
    for rho in (0.5, 2.0):
        cfg = config_a(rho=rho)
        prod = ProductIntegrals.from_fields(cfg.rho * cfg.f, cfg.rho * cfg.g)
        rec = recover_constant_density(analytic_expansion(cfg, mesh), mesh, prod, cfg.grid,
                                       cfg.domain.omega_mask)
        analytic[rho] = abs(rec.value - rho) / rho
        medium = {"rho": {"profile": "constant", "value": rho}, **SOURCES}
        got = run_cli(tmp_path, ball_run(medium, "constant"), f"rho{rho}")
        fitted[rho] = abs(got["reconstruct"]["density"]["recovered"] - rho) / rho
    cfg = make_ball_config(lambda X: np.full(len(X), 2.0), bump((0, 0, 0), 0.2), lambda X: X[:, 0])
    prod = ProductIntegrals.from_fields(cfg.rho * cfg.f, cfg.rho * cfg.g)
    try:
        recover_constant_density(analytic_expansion(cfg, mesh), mesh, prod, cfg.grid,
                                 cfg.domain.omega_mask)
        refused = False
    except IllPosedError:
        refused = True
    ok = max(analytic.values()) <= 1e-2 and max(fitted.values()) <= 5e-2 and refused
    record_acceptance(6, "constant-density recovery", ok,
                      f"analytic {max(analytic.values()):.1e} <= 1e-2, fitted "
                      f"{max(fitted.values()):.1e} <= 5e-2, zero-mass refusal {refused}")
    assert ok


def test_07_inclusion_contrast(tmp_path):
    base = json.loads((CONFIGS / "inclusion.json").read_text())
    results = {}
    for varrho in (0.5, 0.0):
        base["medium"]["inclusion_density"]["varrho"] = varrho
        rec = run_cli(tmp_path, base, f"inc{varrho}")["reconstruct"]["density"]
        results[varrho] = rec["recovered"]
    rho0 = base["medium"]["inclusion_density"]["rho0"]["value"]
    err_half = abs(results[0.5] - 0.5) / 0.5
    err_zero = abs(results[0.0]) / rho0
    ok = err_half <= 2e-2 and err_zero <= 1e-2
    record_acceptance(7, "inclusion contrast", ok,
                      f"varrho 0.5 rel {err_half:.1e} <= 2e-2, varrho 0 abs {err_zero:.1e} <= 1e-2")
    assert ok


def test_08_exterior_continuation():
    run, _ = load_config(CONFIGS / "verify_default.json")
    prob = build_problem(run)
    c = run.continuation
    cfg = prob.medium
    inner, outer = _continuation_meshes(prob)
    u = solve(cfg, c.kappa)
    ui, li = measure(cfg, u, c.kappa, inner)
    uo, lo = measure(cfg, u, c.kappa, outer)
    fields = {g: continue_traces(inner, ui, li, c.kappa, outer.nodes, g) for g in (1.0, -0.5, 2.5)}
    uc, lc = fields[1.0]
    err = max(np.max(np.abs(uc - uo)) / np.max(np.abs(uo)),
              np.max(np.abs(lc - lo)) / np.max(np.abs(lo)))
    spread = max(max(np.max(np.abs(fields[g][0] - uc)) / np.max(np.abs(uc)),
                     np.max(np.abs(fields[g][1] - lc)) / np.max(np.abs(lc)))
                 for g in (-0.5, 2.5))
    R = run.geometry.R
    dirs = SphereMesh.gauss_product(1.0, 6).directions
    defect = radiation_defect(field_evaluator(cfg, u, c.kappa), c.kappa,
                              [2 * R, 4 * R, 8 * R], dirs)
    decays = bool(np.all(np.diff(defect, axis=0) < 0))
    ok = err <= 1e-4 and spread <= 1e-6 and decays
    record_acceptance(8, "exterior continuation", ok,
                      f"continuation {err:.1e} <= 1e-4, gamma spread {spread:.1e} <= 1e-6, "
                      f"radiation decay {decays}")
    assert ok


def test_09_identity_suite(mesh):
    f = lambda X: bump((-0.1, 0.1, 0), 0.29)(X) * (1 + X[:, 2])
    g = lambda X: bump((0.1, 0, -0.05), 0.25)(X) + 0.2 * X[:, 1] + 0.3
    r1 = lambda X: 1.5 + 0.3 * X[:, 0]
    r2 = lambda X: 1.0 + 0.4 * X[:, 1] ** 2
    ks = default_kappas(1.0, count=12)

    def tables(cfg):
        fit = fit_expansion(sweep(cfg, ks, mesh), EXTENDED_U, EXTENDED_LAP)
        return {t: extract_moments(fit, mesh, t, 4) for t in ("rho_g", "rho_f")}

    c1 = make_ball_config(r1, f, g)
    c2 = make_ball_config(r2, lambda X: f(X) * r1(X) / r2(X), lambda X: g(X) * r1(X) / r2(X))
    t1, t2 = tables(c1), tables(c2)
    equal = max(np.max(np.abs(t1[t].values - t2[t].values)) / np.max(np.abs(t1[t].values))
                for t in t1)

    a, b, c = 0.2, 0.1, 0.15
    c3 = make_ball_config(lambda X: r1(X) + a, lambda X: f(X) + b, lambda X: g(X) + c)
    t3 = tables(c3)
    signs, match = [], []
    for t, q1, q3 in (("rho_g", c1.rho * c1.g, c3.rho * c3.g), ("rho_f", c1.rho * c1.f, c3.rho * c3.f)):
        v = check_ordering_uniqueness(t1[t], t3[t], "monotone_perturbation")
        signs.append("strictly negative" in v.conclusion)
        expect = (oracle_table(q1, t, 0).values - oracle_table(q3, t, 0).values)[0]
        match.append(abs(v.degree0_difference - expect) / abs(expect))
    ok = equal <= 1e-6 and all(signs) and max(match) <= 1e-2
    record_acceptance(9, "identity suite", ok,
                      f"equal-product tables differ {equal:.1e} <= 1e-6, perturbed degree-0 "
                      f"differences negative {all(signs)} (quadrature match {max(match):.1e})")
    assert ok


def test_10_recursion(cfg_a, mesh):
    tab = analytic_expansion(cfg_a, mesh)
    M2, _ = general_order_coeff(cfg_a, mesh, 0)
    M3, _ = general_order_coeff(cfg_a, mesh, 1)
    err = max(np.max(np.abs(M2 - tab.M[2])) / np.max(np.abs(tab.M[2])),
              np.max(np.abs(M3 - tab.M[3])) / np.max(np.abs(tab.M[3])))
    ok = err <= 1e-12
    record_acceptance(10, "recursion", ok, f"relative difference {err:.1e} <= 1e-12")
    assert ok
