"""Forward solver: the Lippmann-Schwinger form of the frequency-domain plate equation.

The field solves ``u = K u + s`` with

    (K u)(x) = k^4 int (rho - 1) u G_k(|x - y|) dy,
    s(x)     = int [-(i k^2 / 2 pi) rho f + (1 / 2 pi) rho g] G_k(|x - y|) dy,

discretized by midpoint collocation on the voxel grid. ``G_k`` is continuous,
so the diagonal simply takes its limit ``(i + 1) / (8 pi k)``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from . import constants as C
from .errors import (BoundViolationError, ConditioningError, DivergenceError,
                     GeometryError, GridMismatchError, InputError)
from .geometry import DomainSpec, ScalarField, SphereMesh, axis_of
from .kernels import (biharmonic_green, laplacian_biharmonic_green, neumann_bound)

DENSE_MAX_VOXELS = 16384


@dataclass(frozen=True, eq=False)
class MediumConfig:
    """Density and sources on the voxel grid of ``domain``.

    ``iota`` declares invariance along a grid axis; ``rho0``/``varrho``
    declare the inclusion form ``rho = rho0 + varrho * chi(inclusion)``.
    """

    domain: DomainSpec
    rho: ScalarField
    f: ScalarField
    g: ScalarField
    iota: Optional[tuple] = None
    rho0: Optional[ScalarField] = None
    varrho: Optional[float] = None

    def __post_init__(self):
        grid = self.domain.grid
        for name in ("rho", "f", "g"):
            fld = getattr(self, name)
            if fld.grid != grid:
                raise GridMismatchError(f"{name} is not on the domain grid")
            if fld.is_complex:
                raise InputError(f"{name} must be real")
        omega = self.domain.omega_mask
        rho = self.rho.values
        if np.any(rho < 0):
            raise InputError("density must be nonnegative")
        if np.any(rho[~omega] != 1.0):
            raise InputError("density must equal 1 outside omega")
        for name in ("f", "g"):
            if np.any(getattr(self, name).values[~omega] != 0):
                raise InputError(f"{name} must be supported in omega")
        if self.iota is not None:
            axis = axis_of(self.iota)
            for name in ("rho", "f", "g"):
                _check_invariant(getattr(self, name).values, omega, grid.shape, axis, name)
        if self.rho0 is not None or self.varrho is not None:
            inc = self.domain.inclusion_mask
            if self.rho0 is None or self.varrho is None or inc is None:
                raise InputError("inclusion form needs rho0, varrho and an inclusion mask")
            expect = self.rho0.values + self.varrho * inc
            if np.max(np.abs(expect - rho)) > 1e-12 * max(1.0, np.max(np.abs(rho))):
                raise InputError("rho does not match rho0 + varrho * chi(inclusion)")

    @property
    def grid(self):
        return self.domain.grid

    @property
    def contrast(self) -> np.ndarray:
        return self.rho.values - 1.0

    @property
    def contrast_mask(self) -> np.ndarray:
        return self.contrast != 0

    @property
    def source_mask(self) -> np.ndarray:
        return (self.f.values != 0) | (self.g.values != 0)

    @property
    def support_mask(self) -> np.ndarray:
        return self.contrast_mask | self.source_mask

    @property
    def max_contrast(self) -> float:
        return float(np.max(np.abs(self.contrast)))

    @property
    def rho_f(self) -> ScalarField:
        return self.rho * self.f

    @property
    def rho_g(self) -> ScalarField:
        return self.rho * self.g

    def neumann_admissible(self, kappa: float) -> bool:
        return kappa ** 2 < neumann_bound(self.max_contrast, self.domain.R)


def _check_invariant(values, omega, shape, axis, name):
    v = values.reshape(shape)
    o = omega.reshape(shape)
    both = np.diff(o.astype(int), axis=axis) == 0
    both &= np.take(o, range(1, shape[axis]), axis=axis)
    jump = np.abs(np.diff(v, axis=axis))
    if np.any(jump[both] > 0):
        raise InputError(f"{name} varies along the declared invariance direction")


@dataclass(eq=False)
class MeasurementSet:
    """Traces of ``u`` and ``Delta u`` at mesh nodes, one row per wavenumber."""

    kappas: np.ndarray
    nodes: np.ndarray
    u: np.ndarray
    lap_u: np.ndarray

    def __post_init__(self):
        self.kappas = np.asarray(self.kappas, dtype=float)
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.u = np.atleast_2d(np.asarray(self.u, dtype=complex))
        self.lap_u = np.atleast_2d(np.asarray(self.lap_u, dtype=complex))
        if np.any(np.diff(self.kappas) <= 0):
            raise InputError("wavenumbers must be strictly increasing")
        shape = (self.kappas.size, self.nodes.shape[0])
        if self.u.shape != shape or self.lap_u.shape != shape:
            raise InputError("trace arrays must be (number of kappas, number of nodes)")

    COLUMNS = ("kappa", "node_index", "x", "y", "z", "re_u", "im_u", "re_lap_u", "im_lap_u")

    def to_csv(self, path, comment: Optional[str] = None):
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for a, k in enumerate(self.kappas):
                for i, (x, y, z) in enumerate(self.nodes):
                    u, lu = complex(self.u[a, i]), complex(self.lap_u[a, i])
                    w.writerow([repr(float(k)), i, repr(float(x)), repr(float(y)), repr(float(z)),
                                repr(u.real), repr(u.imag), repr(lu.real), repr(lu.imag)])

    @classmethod
    def from_csv(cls, path) -> "MeasurementSet":
        rows = _read_rows(path, cls.COLUMNS)
        data = np.array([[float(v) for v in r] for r in rows])
        kappas = np.unique(data[:, 0])
        n_nodes = int(data[:, 1].max()) + 1
        if data.shape[0] != kappas.size * n_nodes:
            raise InputError("measurement CSV is not a complete (kappa, node) table")
        order = np.lexsort((data[:, 1], data[:, 0]))
        data = data[order]
        nodes = data[:n_nodes, 2:5]
        u = (data[:, 5] + 1j * data[:, 6]).reshape(kappas.size, n_nodes)
        lap = (data[:, 7] + 1j * data[:, 8]).reshape(kappas.size, n_nodes)
        return cls(kappas, nodes, u, lap)


def _read_rows(path, columns):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    if tuple(header) != tuple(columns):
        raise InputError(f"unexpected CSV header {header}, expected {list(columns)}")
    return [r for r in reader if r]


# -- kernel sums --------------------------------------------------------------

def _green_block(kappa, targets, sources):
    return biharmonic_green(kappa, cdist(targets, sources))


def rhs_field(cfg: MediumConfig, kappa: float) -> ScalarField:
    """``-(i k^2 / 2 pi) rho f + (1 / 2 pi) rho g``."""
    rho = cfg.rho.values
    vals = C.RHS_F * kappa ** 2 * rho * cfg.f.values + C.RHS_G * rho * cfg.g.values
    return ScalarField(cfg.grid, vals.astype(complex))


def volume_potential(kappa, points, q: ScalarField, kernel=biharmonic_green) -> np.ndarray:
    """``int q(y) kernel(|x - y|) dy`` at ``points`` by the midpoint rule."""
    mask = q.values != 0
    if not mask.any():
        return np.zeros(len(points), dtype=complex)
    K = kernel(kappa, cdist(np.atleast_2d(points), q.grid.centers[mask]))
    return K @ q.values[mask] * q.grid.voxel_volume


def source_potential(cfg: MediumConfig, kappa: float) -> ScalarField:
    """First Born approximation: the potential of the right-hand side on the grid."""
    return ScalarField(cfg.grid, volume_potential(kappa, cfg.grid.centers, rhs_field(cfg, kappa)))


def ls_apply_K(cfg: MediumConfig, kappa: float, u: ScalarField) -> ScalarField:
    if u.grid != cfg.grid:
        raise GridMismatchError("field is not on the configuration grid")
    q = ScalarField(cfg.grid, kappa ** 4 * cfg.contrast * u.values)
    return ScalarField(cfg.grid, volume_potential(kappa, cfg.grid.centers, q))


def solve_neumann(cfg: MediumConfig, kappa: float, tol: Optional[float] = None,
                  max_terms: int = 500, history: Optional[list] = None) -> ScalarField:
    """Sum the Neumann series ``sum_j K^j s`` until an increment is below ``tol``.

    ``tol`` is absolute; by default it is ``1e-15 * max|s|``. Increment
    max-norms are appended to ``history`` when a list is given.
    """
    bound = neumann_bound(cfg.max_contrast, cfg.domain.R)
    if not kappa ** 2 < bound:
        raise BoundViolationError(
            f"k^2={kappa ** 2:.6g} violates the Neumann bound 2/(M R^2)={bound:.6g}; "
            "use solve_dense")
    grid = cfg.grid
    s = source_potential(cfg, kappa).values
    if tol is None:
        tol = 1e-15 * max(np.max(np.abs(s)), np.finfo(float).tiny)
    elif not tol > 0:
        raise InputError("tolerance must be positive")
    c = cfg.contrast_mask
    if not c.any():
        if history is not None:
            history.append(0.0)
        return ScalarField(grid, s)
    Gc = _green_block(kappa, grid.centers, grid.centers[c])
    weight = kappa ** 4 * cfg.contrast[c] * grid.voxel_volume
    u = s.copy()
    term = s
    for _ in range(max_terms):
        term = Gc @ (weight * term[c])
        u += term
        inc = float(np.max(np.abs(term)))
        if history is not None:
            history.append(inc)
        if inc <= tol:
            return ScalarField(grid, u)
    raise DivergenceError(f"Neumann series did not reach tol={tol:.3g} in {max_terms} terms")


def solve_dense(cfg: MediumConfig, kappa: float,
                max_voxels: int = DENSE_MAX_VOXELS) -> ScalarField:
    """Direct collocation solve restricted to the contrast voxels."""
    grid = cfg.grid
    if grid.size > max_voxels:
        raise InputError(f"grid of {grid.size} voxels exceeds the dense limit {max_voxels}")
    s = source_potential(cfg, kappa).values
    c = cfg.contrast_mask
    if not c.any():
        return ScalarField(grid, s)
    Gc = _green_block(kappa, grid.centers, grid.centers[c])
    weight = kappa ** 4 * cfg.contrast[c] * grid.voxel_volume
    A = -Gc[c] * weight[None, :]
    A[np.diag_indices_from(A)] += 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            uc = scipy.linalg.solve(A, s[c])
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning) as exc:
            cond = np.linalg.cond(A, 1)
            raise ConditioningError(
                f"dense Lippmann-Schwinger system is singular (cond_1 ~ {cond:.3g})") from exc
    u = s + Gc @ (weight * uc)
    return ScalarField(grid, u)


def solve(cfg: MediumConfig, kappa: float) -> ScalarField:
    """Neumann series inside its sufficient bound, dense solve otherwise."""
    if cfg.neumann_admissible(kappa):
        try:
            return solve_neumann(cfg, kappa)
        except DivergenceError:
            pass
    return solve_dense(cfg, kappa)


def ls_residual(cfg: MediumConfig, kappa: float, u: ScalarField) -> float:
    s = source_potential(cfg, kappa).values
    return float(np.max(np.abs(u.values - ls_apply_K(cfg, kappa, u).values - s)))


# -- measurement -----------------------------------------------------------------

def _check_off_support(cfg: MediumConfig, points: np.ndarray):
    supp = cfg.support_mask
    if not supp.any():
        return
    half = 0.5 * cfg.grid.spacing
    centers = cfg.grid.centers[supp]
    for start in range(0, len(points), 256):
        p = points[start:start + 256]
        inside = np.all(np.abs(p[:, None, :] - centers[None, :, :]) <= half, axis=2)
        if inside.any():
            raise GeometryError("evaluation point lies inside the support of the medium or sources")


def field_evaluator(cfg: MediumConfig, u: ScalarField, kappa: float
                    ) -> Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]:
    """Callable returning ``(u, Delta u)`` at points off the support.

    Both come from the integral representation; ``Delta u`` uses the analytic
    Laplacian of the kernel.
    """
    if u.grid != cfg.grid:
        raise GridMismatchError("field is not on the configuration grid")
    density = kappa ** 4 * cfg.contrast * u.values + rhs_field(cfg, kappa).values
    supp = cfg.support_mask
    centers = cfg.grid.centers[supp]
    w = density[supp] * cfg.grid.voxel_volume

    def evaluate(points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        _check_off_support(cfg, points)
        if centers.shape[0] == 0:
            z = np.zeros(len(points), dtype=complex)
            return z, z.copy()
        r = cdist(points, centers)
        return biharmonic_green(kappa, r) @ w, laplacian_biharmonic_green(kappa, r) @ w

    return evaluate


def measure(cfg: MediumConfig, u: ScalarField, kappa: float, mesh: SphereMesh):
    """Traces ``(u, Delta u)`` at the mesh nodes."""
    return field_evaluator(cfg, u, kappa)(mesh.nodes)


def default_kappas(R: float, count: int = 8, lo: float = 0.02, hi: float = 0.2) -> np.ndarray:
    return np.geomspace(lo, hi, count) / R


def sweep(cfg: MediumConfig, kappas: Sequence[float], mesh: SphereMesh,
          method: str = "auto") -> MeasurementSet:
    kappas = np.asarray(kappas, dtype=float)
    if kappas.ndim != 1 or kappas.size == 0 or np.any(np.diff(kappas) <= 0):
        raise InputError("wavenumbers must be a strictly increasing list")
    if np.any(kappas <= 0):
        raise InputError("wavenumbers must be positive")
    solver = {"auto": solve, "dense": solve_dense, "neumann": solve_neumann}[method]
    us, laps = [], []
    for k in kappas:
        u, lap = measure(cfg, solver(cfg, k), k, mesh)
        us.append(u)
        laps.append(lap)
    return MeasurementSet(kappas, mesh.nodes, np.array(us), np.array(laps))


def radiation_defect(evaluate, kappa: float, radii: Sequence[float],
                     directions: np.ndarray, step_rel: float = 1e-5) -> np.ndarray:
    """Max over directions of ``|r (d_r v - i k v)|`` for ``v = u`` and ``v = Delta u``.

    The radial derivative is a central difference. Returns shape ``(len(radii), 2)``.
    """
    dirs = np.atleast_2d(directions)
    out = np.empty((len(radii), 2))
    for a, r in enumerate(radii):
        h = step_rel * r
        u0, l0 = evaluate(r * dirs)
        up, lp = evaluate((r + h) * dirs)
        um, lm = evaluate((r - h) * dirs)
        for b, (v0, vp, vm) in enumerate(((u0, up, um), (l0, lp, lm))):
            dv = (vp - vm) / (2 * h)
            out[a, b] = np.max(np.abs(r * (dv - 1j * kappa * v0)))
    return out
