import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.spatial.distance import cdist

from conftest import EXTENDED_LAP, EXTENDED_U, bump, make_ball_config
from plateinv.asymptotics import (ExpansionTable, analytic_expansion, fit_expansion,
                                  general_order_coeff, voxel_coefficients)
from plateinv.errors import ConditioningError, GeometryError, InputError
from plateinv.forward import (MeasurementSet, default_kappas, measure, solve_dense,
                              solve_neumann, source_potential, sweep)
from plateinv.geometry import SHIndex, SphereMesh, harmonic_moment_oracle

PI = np.pi


def rel(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


@pytest.fixture(scope="module")
def analytic_a(cfg_a, mesh):
    return analytic_expansion(cfg_a, mesh)


# -- closed forms ---------------------------------------------------------------------

def test_g_zero_degenerate_case(mesh):
    cfg = make_ball_config(lambda X: 1.3 + 0 * X[:, 0], bump((0.1, 0, 0), 0.2), None)
    tab = analytic_expansion(cfg, mesh)
    for p in (-1, 0):
        assert np.all(tab.M[p] == 0)
    for p in (0, 1):
        assert np.all(tab.N[p] == 0)
    # M_1 keeps only its f term: a constant times the mass of rho f
    mass_f = np.sum(cfg.rho.values * cfg.f.values) * cfg.grid.voxel_volume
    assert_allclose(tab.M[1], (-1j / (2 * PI)) * (1 + 1j) / (8 * PI) * mass_f, rtol=1e-13)


def test_homogeneous_density_drops_contrast_terms(mesh):
    f, g = bump((0.1, 0, 0), 0.2), bump((0, 0.1, 0), 0.2)
    cfg1 = make_ball_config(None, f, g)
    cfg2 = make_ball_config(lambda X: 1.0 + 0.5 * np.exp(-20 * np.sum(X ** 2, axis=1)), f, g)
    t1 = analytic_expansion(cfg1, mesh)
    # with rho = 1 the remaining M_2 is the f-potential term alone
    X, grid = mesh.nodes, cfg1.grid
    f1 = cdist(X, grid.centers) @ (cfg1.f.values * grid.voxel_volume)
    assert_allclose(t1.M[2], (-1j / (2 * PI)) * (-f1 / (8 * PI)), rtol=1e-12)
    # the contrast terms are the only difference once products are matched
    t2 = analytic_expansion(cfg2, mesh)
    assert rel(t1.M[2], t2.M[2]) > 1e-6


def test_m_minus1_against_moment_oracle(cfg_a, analytic_a):
    q = cfg_a.rho * cfg_a.g
    mass = harmonic_moment_oracle(q, SHIndex(0, 0)) * np.sqrt(4 * PI)
    expect = (1 / (2 * PI)) * ((1j + 1) / (8 * PI)) * mass
    assert_allclose(analytic_a.M[-1], expect, rtol=1e-12)
    spread = np.ptp(np.abs(analytic_a.M[-1])) / np.abs(analytic_a.M[-1][0])
    assert spread <= 1e-12
    assert np.ptp(np.abs(analytic_a.N[1])) <= 1e-12 * np.abs(analytic_a.N[1][0])


def test_low_order_laplacian_terms_independent(cfg_a, mesh, analytic_a):
    grid = cfg_a.grid
    h3 = grid.voxel_volume
    g0 = 1 / (4 * PI * cdist(mesh.nodes, grid.centers))
    rg = cfg_a.rho.values * cfg_a.g.values * h3
    rf = cfg_a.rho.values * cfg_a.f.values * h3
    assert_allclose(analytic_a.N[0], -(1 / (2 * PI)) * (g0 @ rg), rtol=1e-12)
    assert_allclose(analytic_a.N[1], (1 / (2 * PI)) * ((1 - 1j) / (8 * PI)) * rg.sum(), rtol=1e-12)
    assert_allclose(analytic_a.N[2], (1j / (2 * PI)) * (g0 @ rf), rtol=1e-12)


def test_analytic_rejects_nodes_inside(cfg_a):
    with pytest.raises(GeometryError):
        analytic_expansion(cfg_a, SphereMesh.gauss_product(0.2, 6))


# -- general recursion ----------------------------------------------------------------

def test_recursion_reproduces_printed_orders(cfg_a, mesh, analytic_a):
    M2, N3 = general_order_coeff(cfg_a, mesh, 0)
    assert np.max(np.abs(M2 - analytic_a.M[2])) <= 1e-12 * np.max(np.abs(analytic_a.M[2]))
    assert np.max(np.abs(N3 - analytic_a.N[3])) <= 1e-12 * np.max(np.abs(analytic_a.N[3]))
    M3, _ = general_order_coeff(cfg_a, mesh, 1)
    assert np.max(np.abs(M3 - analytic_a.M[3])) <= 1e-12 * np.max(np.abs(analytic_a.M[3]))


def test_recursion_bracket_at_m0():
    from plateinv.asymptotics import _gamma
    assert _gamma(1) == pytest.approx((1j + 1) / (8 * PI), abs=1e-17)


def test_recursion_with_explicit_base(cfg_a, mesh):
    base = voxel_coefficients(cfg_a, [-1, 0])
    M3a, N4a = general_order_coeff(cfg_a, mesh, 1, base=base)
    M3b, N4b = general_order_coeff(cfg_a, mesh, 1)
    assert_allclose(M3a, M3b, rtol=1e-13)
    assert_allclose(N4a, N4b, rtol=1e-13)
    with pytest.raises(InputError):
        general_order_coeff(cfg_a, mesh, 2, base=base)


def test_remainder_slope(cfg_a, mesh, analytic_a):
    kappas = default_kappas(1.0)
    errs = []
    for k in kappas:
        u, _ = measure(cfg_a, solve_dense(cfg_a, k), k, mesh)
        errs.append(np.max(np.abs(u - analytic_a.u_series(k))))
    slope = np.polyfit(np.log(kappas), np.log(errs), 1)[0]
    assert 3.6 <= slope <= 4.4


def test_born_approximation_order(cfg_a):
    kappas = default_kappas(1.0)
    errs = []
    for k in kappas:
        u = solve_neumann(cfg_a, k).values
        errs.append(np.max(np.abs(u - source_potential(cfg_a, k).values)) / np.max(np.abs(u)))
    assert np.polyfit(np.log(kappas), np.log(errs), 1)[0] >= 2.6


# -- fitting ------------------------------------------------------------------------------

def test_fit_exact_model(analytic_a):
    kappas = default_kappas(1.0)
    u = np.array([analytic_a.u_series(k) for k in kappas])
    lap = np.array([analytic_a.lap_series(k) for k in kappas])
    ft = fit_expansion(MeasurementSet(kappas, analytic_a.nodes, u, lap))
    assert ft.provenance == "fitted"
    for p in analytic_a.M:
        assert rel(ft.M[p], analytic_a.M[p]) <= 1e-10
    for p in analytic_a.N:
        assert rel(ft.N[p], analytic_a.N[p]) <= 1e-10


def test_fit_default_basis_vs_analytic(sweep_a8, analytic_a):
    ft = fit_expansion(sweep_a8)
    low = [rel(ft.M[p], analytic_a.M[p]) for p in (-1, 0, 1)]
    low += [rel(ft.N[p], analytic_a.N[p]) for p in (0, 1, 2)]
    cubic = [rel(ft.M[3], analytic_a.M[3]), rel(ft.N[3], analytic_a.N[3])]
    assert max(cubic) <= 5e-2
    assert max(low) <= 1e-3, f"low-order relative errors {np.array(low)}"


def test_fit_extended_basis_vs_analytic(sweep_a, analytic_a):
    ft = fit_expansion(sweep_a, EXTENDED_U, EXTENDED_LAP)
    for p in (-1, 0, 1, 2):
        assert rel(ft.M[p], analytic_a.M[p]) <= 1e-6
    for p in (0, 1, 2):
        assert rel(ft.N[p], analytic_a.N[p]) <= 1e-6
    assert rel(ft.M[3], analytic_a.M[3]) <= 1e-4
    assert rel(ft.N[3], analytic_a.N[3]) <= 1e-4
    spread = np.ptp(np.abs(ft.M[-1])) / np.mean(np.abs(ft.M[-1]))
    assert spread <= 1e-6


def test_dropping_cubic_column_bias_scales_with_kappa_max(cfg_a, mesh, analytic_a):
    bias = []
    for hi in (0.2, 0.1):
        ms = sweep(cfg_a, default_kappas(1.0, hi=hi, lo=hi / 10), mesh)
        ft = fit_expansion(ms, (-1, 0, 1, 2), (0, 1, 2, 3))
        bias.append(rel(ft.M[2], analytic_a.M[2]))
    assert 1.6 <= bias[0] / bias[1] <= 2.4


def test_fit_drops_vanishing_pole(mesh):
    cfg = make_ball_config(lambda X: 1.3 + 0 * X[:, 0], bump((0.1, 0, 0), 0.2), None)
    ms = sweep(cfg, default_kappas(1.0, count=12), mesh)
    ft = fit_expansion(ms, EXTENDED_U, EXTENDED_LAP)
    assert ft.diagnostics["dropped"] == [-1]
    assert np.all(ft.M[-1] == 0)
    # exact model data in the default basis
    tab = analytic_expansion(cfg, mesh)
    kappas = default_kappas(1.0)
    u = np.array([tab.u_series(k) for k in kappas])
    lap = np.array([tab.lap_series(k) for k in kappas])
    ft = fit_expansion(MeasurementSet(kappas, tab.nodes, u, lap))
    assert ft.diagnostics["dropped"] == [-1]
    assert rel(ft.M[1], tab.M[1]) <= 1e-10


def test_fit_needs_enough_kappas(analytic_a):
    kappas = np.array([0.05, 0.1, 0.15])
    u = np.array([analytic_a.u_series(k) for k in kappas])
    with pytest.raises(ConditioningError):
        fit_expansion(MeasurementSet(kappas, analytic_a.nodes, u, u))


def test_fit_clustered_kappas(analytic_a):
    kappas = 0.1 + 1e-9 * np.arange(8)
    u = np.array([analytic_a.u_series(k) for k in kappas])
    with pytest.raises(ConditioningError):
        fit_expansion(MeasurementSet(kappas, analytic_a.nodes, u, u))


def test_expansion_csv_roundtrip(tmp_path, analytic_a):
    path = tmp_path / "e.csv"
    analytic_a.to_csv(path, comment="x")
    back = ExpansionTable.from_csv(path, analytic_a.nodes)
    assert back.provenance == "analytic"
    for p in analytic_a.M:
        assert np.array_equal(back.M[p], analytic_a.M[p])
    for p in analytic_a.N:
        assert np.array_equal(back.N[p], analytic_a.N[p])
