import numpy as np
import pytest

from plateinv.forward import MediumConfig, default_kappas, sweep
from plateinv.geometry import (DomainSpec, ScalarField, SphereMesh, VoxelGrid, ball_mask,
                               cylinder_mask, invariant_profile)

EXTENDED_U = tuple(range(-1, 8))
EXTENDED_LAP = tuple(range(0, 8))

_ACCEPTANCE = []


def record_acceptance(number, name, passed, detail):
    _ACCEPTANCE.append((number, name, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(
            f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {name}: {detail}")


def make_ball_config(rho_fn=None, f_fn=None, g_fn=None, n=12, half=0.5, radius=0.5, R=1.0):
    grid = VoxelGrid.cube(n, half)
    om = ball_mask(grid, radius)
    X = grid.centers

    def field(fn, outside):
        if fn is None:
            return np.full(grid.size, outside)
        return np.where(om, fn(X), outside)

    return MediumConfig(DomainSpec(grid, om, R), ScalarField(grid, field(rho_fn, 1.0)),
                        ScalarField(grid, field(f_fn, 0.0)), ScalarField(grid, field(g_fn, 0.0)))


def bump(center, width, amp=1.0):
    c = np.asarray(center, dtype=float)
    return lambda X: amp * np.exp(-np.sum((X - c) ** 2, axis=1) / (2 * width ** 2))


def config_a(rho=None):
    """Non-symmetric smooth sources with a varying density."""
    rho_fn = (lambda X: 1.5 + 0.3 * X[:, 0]) if rho is None else (lambda X: np.full(len(X), rho))
    return make_ball_config(
        rho_fn,
        lambda X: bump((-0.1, 0.1, 0.0), 0.29)(X) * (1 + X[:, 2]),
        lambda X: bump((0.1, 0.0, -0.05), 0.25)(X) + 0.2 * X[:, 1])


def config_b():
    """A second non-symmetric configuration with off-axis structure."""
    return make_ball_config(
        lambda X: 1.2 + 0.4 * X[:, 1] ** 2 + 0.2 * X[:, 2],
        lambda X: bump((0.12, -0.08, 0.1), 0.2)(X) + 0.5 * bump((-0.15, 0.0, -0.1), 0.15)(X),
        lambda X: bump((-0.05, 0.15, 0.08), 0.22)(X) * (1 - X[:, 0]))


def invariant_config(rho=1.5, width=0.15):
    grid = VoxelGrid((16, 16, 8), (-0.5, -0.5, -0.25), (0.5, 0.5, 0.25))
    om = cylinder_mask(grid, 2, 0.5, 0.25)
    pg = lambda a, b: np.exp(-((a - 0.15) ** 2 + (b + 0.1) ** 2) / (2 * width ** 2))
    pf = lambda a, b: np.exp(-((a + 0.1) ** 2 + (b - 0.12) ** 2) / (2 * width ** 2)) * (1 + 0.5 * a)
    g = invariant_profile(grid, 2, pg, om)
    f = invariant_profile(grid, 2, pf, om)
    rho_f = ScalarField(grid, np.where(om, rho, 1.0))
    return MediumConfig(DomainSpec(grid, om, 1.0), rho_f, f, g, iota=(0.0, 0.0, 1.0))


@pytest.fixture(scope="session")
def mesh():
    return SphereMesh.gauss_product(1.0, 26)


@pytest.fixture(scope="session")
def cfg_a():
    return config_a()


@pytest.fixture(scope="session")
def cfg_b():
    return config_b()


@pytest.fixture(scope="session")
def sweep_a(cfg_a, mesh):
    return sweep(cfg_a, default_kappas(1.0, count=12), mesh)


@pytest.fixture(scope="session")
def sweep_a8(cfg_a, mesh):
    return sweep(cfg_a, default_kappas(1.0), mesh)
