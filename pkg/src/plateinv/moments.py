"""Harmonic moments from boundary coefficients and the constructive recoveries.

The ``k^0`` and ``k^2`` coefficients of ``Delta u`` on a centred sphere are
Newtonian potentials of ``rho g`` and ``rho f``; projecting them onto
spherical harmonics yields every moment ``int q(y) |y|^m conj(Y_m^n)(y/|y|) dy``.
The ``k^3`` coefficient carries the density through
``E(x) = int rho g * int (rho - 1) g_0(|x - y|) dy + int rho f - int rho g |x - y|^2 / 6``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from math import factorial
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from . import constants as C
from .asymptotics import ExpansionTable
from .errors import (ConditioningError, ConsistencyError, GeometryError,
                     IllPosedError, InputError, TruncationError)
from .forward import _read_rows
from .geometry import (ScalarField, SHIndex, SphereMesh, VoxelGrid, sh_basis, sh_count,
                       sh_indices, solid_harmonics_conj)
from .kernels import laplace_green

TARGETS = ("rho_f", "rho_g", "rho_contrast")
TAIL_TOL = 1e-6


def _degrees(m_max: int) -> np.ndarray:
    return np.concatenate([np.full(2 * m + 1, m) for m in range(m_max + 1)])


@dataclass(eq=False)
class MomentTable:
    """Moments ``int q |y|^m conj(Y_m^n)`` for ``m <= m_max``, in flat index order."""

    target: str
    m_max: int
    values: np.ndarray

    def __post_init__(self):
        if self.target not in TARGETS:
            raise InputError(f"unknown moment target {self.target!r}")
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (sh_count(self.m_max),):
            raise InputError(f"expected {sh_count(self.m_max)} moments for m_max={self.m_max}")

    def __getitem__(self, idx) -> complex:
        idx = idx if isinstance(idx, SHIndex) else SHIndex(*idx)
        if idx.m > self.m_max:
            raise KeyError(idx)
        return complex(self.values[idx.flat])

    @property
    def entries(self) -> dict:
        return {i: complex(self.values[i.flat]) for i in sh_indices(self.m_max)}

    def degree(self, m: int) -> np.ndarray:
        return self.values[m * m:(m + 1) ** 2]

    def truncated(self, m_max: int) -> "MomentTable":
        if m_max > self.m_max:
            raise InputError(f"table only holds degrees up to {self.m_max}")
        return MomentTable(self.target, m_max, self.values[:sh_count(m_max)].copy())

    def conjugate_symmetry_defect(self) -> float:
        """Max of ``|Q(m,-n) - (-1)^n conj(Q(m,n))|``; zero for real fields."""
        worst = 0.0
        for i in sh_indices(self.m_max):
            j = SHIndex(i.m, -i.n)
            d = abs(self.values[j.flat] - (-1) ** i.n * np.conj(self.values[i.flat]))
            worst = max(worst, float(d))
        return worst

    def per_degree_error(self, reference: "MomentTable") -> np.ndarray:
        """``||Q_m - R_m|| / ||R_m||`` for each degree ``m``."""
        m_max = min(self.m_max, reference.m_max)
        out = np.empty(m_max + 1)
        for m in range(m_max + 1):
            ref = np.linalg.norm(reference.degree(m))
            diff = np.linalg.norm(self.degree(m) - reference.degree(m))
            out[m] = diff / ref if ref > 0 else diff
        return out

    COLUMNS = ("m", "n", "re", "im", "target", "m_max")

    def to_csv(self, path, comment: Optional[str] = None):
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for i in sh_indices(self.m_max):
                c = complex(self.values[i.flat])
                w.writerow([i.m, i.n, repr(c.real), repr(c.imag), self.target, self.m_max])

    @classmethod
    def from_csv(cls, path) -> "MomentTable":
        rows = _read_rows(path, cls.COLUMNS)
        if not rows:
            raise InputError(f"{path}: no moments")
        target, m_max = rows[0][4], int(rows[0][5])
        vals = np.zeros(sh_count(m_max), dtype=complex)
        for m, n, re, im, *_ in rows:
            vals[SHIndex(int(m), int(n)).flat] = complex(float(re), float(im))
        return cls(target, m_max, vals)


def oracle_table(q: ScalarField, target: str, m_max: int) -> MomentTable:
    """Moment table of a known field by direct volume quadrature."""
    mask = q.values != 0
    basis = solid_harmonics_conj(q.grid.centers[mask], m_max)
    return MomentTable(target, m_max, (q.values[mask] @ basis) * q.grid.voxel_volume)


def _check_centred(mesh: SphereMesh):
    if np.any(np.asarray(mesh.center) != 0):
        raise GeometryError("moment extraction needs a sphere centred at the origin")


def potential_to_moments(values: np.ndarray, mesh: SphereMesh, prefactor: complex,
                         m_max: int) -> np.ndarray:
    """Invert ``V(x) = prefactor * int q g_0(|x - y|) dy`` sampled on a centred sphere."""
    _check_centred(mesh)
    proj = mesh.project(values, m_max)
    deg = _degrees(m_max)
    return proj * (2 * deg + 1) * mesh.radius ** (deg + 1) / prefactor


def extract_moments(table: ExpansionTable, mesh: SphereMesh, target: str,
                    m_max: int = 12) -> MomentTable:
    """Moments of ``rho g`` (from ``N_0``) or ``rho f`` (from ``N_2``)."""
    if target not in C.POTENTIAL_POWER:
        raise InputError(f"target must be one of {sorted(C.POTENTIAL_POWER)}")
    power, prefactor = C.potential_prefactor(target)
    if power not in table.N:
        raise InputError(f"expansion table lacks the k^{power} coefficient of Delta u")
    return MomentTable(target, m_max,
                       potential_to_moments(table.N[power], mesh, prefactor, m_max))


def multipole_partial_sums(x: np.ndarray, y: np.ndarray, m_max: int) -> np.ndarray:
    """Partial sums over degree of the harmonic expansion of ``g_0(|x - y|)``, ``|x| > |y|``."""
    rx, ry = np.linalg.norm(x), np.linalg.norm(y)
    if not rx > ry:
        raise InputError("the expansion needs |x| > |y|")
    Yx = sh_basis(x / rx, m_max)[0]
    Yy = sh_basis(y / ry, m_max)[0] if ry > 0 else sh_basis(np.array([0.0, 0.0, 1.0]), m_max)[0]
    out = np.empty(m_max + 1)
    total = 0.0
    for m in range(m_max + 1):
        s = slice(m * m, (m + 1) ** 2)
        term = np.sum(Yx[s] * np.conj(Yy[s])) * ry ** m / ((2 * m + 1) * rx ** (m + 1))
        total += term.real
        out[m] = total
    return out


# -- harmonic test functions ------------------------------------------------------

@dataclass(frozen=True)
class HarmonicTest:
    """Either ``|y|^m conj(Y_m^n)(y/|y|)`` or ``exp(i xi . y)`` with ``xi . xi = 0``."""

    kind: str
    m: int = 0
    n: int = 0
    xi: tuple = (0j, 0j, 0j)

    def __post_init__(self):
        if self.kind == "polynomial":
            SHIndex(self.m, self.n)
        elif self.kind == "exponential":
            xi = np.asarray(self.xi, dtype=complex)
            scale = max(float(np.sum(np.abs(xi) ** 2)), 1.0)
            if abs(np.sum(xi * xi)) > 1e-12 * scale:
                raise InputError("exponential test is not harmonic: xi . xi != 0")
        else:
            raise InputError(f"unknown harmonic test kind {self.kind!r}")

    @classmethod
    def polynomial(cls, m: int, n: int) -> "HarmonicTest":
        return cls("polynomial", m, n)

    @classmethod
    def exponential(cls, xi1: float, xi2: float, xi3: float) -> "HarmonicTest":
        """``xi = (xi1, xi2, i xi3)``; requires ``xi1^2 + xi2^2 = xi3^2``."""
        if abs(xi1 ** 2 + xi2 ** 2 - xi3 ** 2) > 1e-12 * max(1.0, xi3 ** 2):
            raise InputError("exponential test needs xi1^2 + xi2^2 = xi3^2")
        return cls("exponential", xi=(complex(xi1), complex(xi2), 1j * xi3))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        if self.kind == "polynomial":
            return solid_harmonics_conj(pts, self.m)[:, SHIndex(self.m, self.n).flat]
        return np.exp(1j * pts @ np.asarray(self.xi))

    def tail_bound(self, radius: float, m_max: int) -> float:
        """Sup over ``|y| <= radius`` of the series remainder beyond degree ``m_max``."""
        t = float(np.linalg.norm(np.asarray(self.xi))) * radius
        return t ** (m_max + 1) / factorial(m_max + 1) * np.exp(t)

    def required_degree(self, radius: float, tol: float = TAIL_TOL, limit: int = 200) -> int:
        for m in range(limit + 1):
            if self.tail_bound(radius, m) <= tol:
                return m
        raise TruncationError("no admissible truncation degree", required_order=None)

    def coefficients(self, m_max: int) -> np.ndarray:
        """``a`` with ``h(y) = sum a_mn |y|^m conj(Y_m^n)(y/|y|)`` up to ``m_max``."""
        a = np.zeros(sh_count(m_max), dtype=complex)
        if self.kind == "polynomial":
            if self.m <= m_max:
                a[SHIndex(self.m, self.n).flat] = 1.0
            return a
        # the degree-m part (i xi . y)^m / m! is harmonic; project it on the unit sphere
        mesh = SphereMesh.for_degree(1.0, max(m_max, 1))
        Y = sh_basis(mesh.directions, m_max)
        s = mesh.directions @ np.asarray(self.xi)
        for m in range(m_max + 1):
            part = (1j * s) ** m / factorial(m)
            sl = slice(m * m, (m + 1) ** 2)
            a[sl] = Y[:, sl].T @ (mesh.weights * part)
        return a


def eval_harmonic_functional(mt: MomentTable, h: HarmonicTest,
                             support_radius: Optional[float] = None,
                             tol: float = TAIL_TOL) -> complex:
    """``int q h dy`` assembled from the moment table."""
    if h.kind == "polynomial":
        if h.m > mt.m_max:
            raise TruncationError(f"test degree {h.m} exceeds table degree {mt.m_max}",
                                  required_order=h.m)
        return mt[SHIndex(h.m, h.n)]
    if support_radius is None:
        raise InputError("exponential tests need the support radius")
    bound = h.tail_bound(support_radius, mt.m_max)
    if bound > tol:
        need = h.required_degree(support_radius, tol)
        raise TruncationError(
            f"truncation tail {bound:.3g} exceeds {tol:.1g}; need m_max >= {need}",
            required_order=need)
    return complex(np.sum(h.coefficients(mt.m_max) * mt.values))


# -- translation-invariant reconstruction -------------------------------------

@dataclass(eq=False)
class InvariantSupport:
    """Known support ``D x slab`` of a field that is constant along ``axis``."""

    grid: VoxelGrid
    axis: int
    mask: np.ndarray

    def __post_init__(self):
        if self.axis not in (0, 1, 2):
            raise InputError("axis must be 0, 1 or 2")
        self.mask = np.asarray(self.mask, dtype=bool).reshape(-1)
        if self.mask.shape[0] != self.grid.size:
            raise InputError("support mask does not match the grid")
        if not self.mask.any():
            raise InputError("empty support")

    @property
    def cross_axes(self) -> tuple:
        return tuple(a for a in range(3) if a != self.axis)

    def columns(self):
        """Transverse indices of the occupied columns and each voxel's column number."""
        idx = np.stack(np.unravel_index(np.flatnonzero(self.mask), self.grid.shape), axis=1)
        cross = idx[:, list(self.cross_axes)]
        cols, inverse = np.unique(cross, axis=0, return_inverse=True)
        return cols, inverse.reshape(-1)

    def column_coords(self) -> np.ndarray:
        cols, _ = self.columns()
        a, b = self.cross_axes
        return np.stack([self.grid.axis_centers(a)[cols[:, 0]],
                         self.grid.axis_centers(b)[cols[:, 1]]], axis=1)

    def extrude(self, values: np.ndarray) -> ScalarField:
        """Field equal to the column values on the support, zero elsewhere."""
        _, inv = self.columns()
        out = np.zeros(self.grid.size)
        out[self.mask] = np.asarray(values, dtype=float)[inv]
        return ScalarField(self.grid, out)

    def sample(self, q: ScalarField) -> np.ndarray:
        """Column values of an invariant field (mean along each column)."""
        _, inv = self.columns()
        vals = q.values[self.mask]
        return np.bincount(inv, weights=vals) / np.bincount(inv)


@dataclass(eq=False)
class Profile2D:
    coords: np.ndarray
    values: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def relative_l2_error(self, truth: np.ndarray) -> float:
        truth = np.asarray(truth, dtype=float)
        return float(np.linalg.norm(self.values - truth) / np.linalg.norm(truth))

    def to_csv(self, path, comment: Optional[str] = None):
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("column", "s", "t", "value"))
            for i, ((s, t), v) in enumerate(zip(self.coords, self.values)):
                w.writerow([i, repr(float(s)), repr(float(t)), repr(float(v))])


def invariant_moment_matrix(support: InvariantSupport, m_max: int) -> np.ndarray:
    """Column values of the profile to moments: ``A[mn, col]``."""
    cols, inv = support.columns()
    pts = support.grid.centers[support.mask]
    basis = solid_harmonics_conj(pts, m_max) * support.grid.voxel_volume
    A = np.zeros((sh_count(m_max), cols.shape[0]), dtype=complex)
    for k in range(A.shape[0]):
        A[k] = np.bincount(inv, weights=basis[:, k].real, minlength=cols.shape[0]) \
            + 1j * np.bincount(inv, weights=basis[:, k].imag, minlength=cols.shape[0])
    return A


def reconstruct_invariant_product(mt: MomentTable, support: InvariantSupport,
                                  reg: Optional[float] = None,
                                  rel_reg: float = 1e-8) -> Profile2D:
    """Ridge-regularized solve of ``A p = Q`` for the real column profile ``p``.

    Rows of degree ``m`` are scaled by ``a^-m`` with ``a`` the support radius.
    ``reg`` defaults to ``rel_reg * ||A||^2`` of the scaled system.
    """
    m_max = mt.m_max
    A = invariant_moment_matrix(support, m_max)
    pts = support.grid.centers[support.mask]
    a = float(np.max(np.linalg.norm(pts, axis=1)))
    scale = a ** -_degrees(m_max).astype(float)
    A = A * scale[:, None]
    b = mt.values * scale
    Ar = np.vstack([A.real, A.imag])
    br = np.concatenate([b.real, b.imag])
    U, s, Vt = np.linalg.svd(Ar, full_matrices=False)
    floor = np.finfo(float).eps * s[0] ** 2 * max(Ar.shape)
    lam = rel_reg * s[0] ** 2 if reg is None else float(reg)
    rank = int(np.sum(s > np.sqrt(floor)))
    if lam < floor and rank < Ar.shape[1]:
        raise ConditioningError(
            f"regularization {lam:.3g} is below the numeric floor {floor:.3g} and the "
            f"moment matrix is rank deficient (effective rank {rank} of {Ar.shape[1]})")
    filt = s / (s * s + lam)
    p = Vt.T @ (filt * (U.T @ br))
    resid = float(np.linalg.norm(Ar @ p - br) / max(np.linalg.norm(br), np.finfo(float).tiny))
    diag = {"reg": lam, "effective_rank": rank, "columns": int(Ar.shape[1]),
            "cond": float(s[0] / s[-1]) if s[-1] > 0 else float("inf"),
            "relative_residual": resid, "support_radius": a}
    return Profile2D(support.column_coords(), p, diag)


# -- density recovery ---------------------------------------------------------------

@dataclass(frozen=True)
class ProductIntegrals:
    """Integrals of the products entering the ``k^3`` coefficient of ``Delta u``."""

    mass_f: float
    mass_g: float
    dipole_g: tuple
    second_g: float
    l1_g: float

    @classmethod
    def from_fields(cls, rho_f: ScalarField, rho_g: ScalarField) -> "ProductIntegrals":
        h3 = rho_g.grid.voxel_volume
        c = rho_g.grid.centers
        q = rho_g.values
        return cls(float(np.sum(rho_f.values) * h3), float(np.sum(q) * h3),
                   tuple(float(v) for v in (q @ c) * h3),
                   float(np.sum(q * np.einsum("ij,ij->i", c, c)) * h3),
                   float(np.sum(np.abs(q)) * h3))

    def quadratic_potential(self, x: np.ndarray) -> np.ndarray:
        """``int rho g |x - y|^2 dy`` from mass, dipole and second moment."""
        x = np.atleast_2d(x)
        return (self.mass_g * np.einsum("ij,ij->i", x, x)
                - 2 * x @ np.asarray(self.dipole_g) + self.second_g)


MASS_TOL = 1e-8


def kappa3_bracket(table: ExpansionTable) -> np.ndarray:
    """``E(x)`` from the ``k^3`` coefficient of ``Delta u``."""
    if 3 not in table.N:
        raise InputError("expansion table lacks the k^3 coefficient of Delta u")
    return table.N[3] / C.N3_BRACKET


def _known_part(products: ProductIntegrals, nodes):
    return products.mass_f - products.quadratic_potential(nodes) / 6


def _require_mass(products: ProductIntegrals, tol: float):
    if not abs(products.mass_g) > tol * max(products.l1_g, np.finfo(float).tiny):
        raise IllPosedError(
            f"int rho g = {products.mass_g:.3g} vanishes; the density is not determined "
            "by the k^3 coefficient without a nonzero source mass")


def volume_newton_potential(grid: VoxelGrid, mask: np.ndarray, x: np.ndarray,
                            weights: Optional[np.ndarray] = None) -> np.ndarray:
    """``int_mask w(y) g_0(|x - y|) dy`` by the midpoint rule."""
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    w = np.ones(int(mask.sum())) if weights is None else np.asarray(weights)[mask]
    return laplace_green(cdist(np.atleast_2d(x), grid.centers[mask])) @ w * grid.voxel_volume


def _scalar_lsq(a: np.ndarray, r: np.ndarray):
    c = float(np.real(np.vdot(a, r)) / np.real(np.vdot(a, a)))
    resid = float(np.linalg.norm(r - c * a) / max(np.linalg.norm(r), np.finfo(float).tiny))
    return c, resid


@dataclass
class DensityRecovery:
    value: float
    residual: float
    mass_g: float
    f: Optional[ScalarField] = None
    g: Optional[ScalarField] = None

    def summary(self) -> dict:
        return {"value": self.value, "relative_residual": self.residual, "mass_g": self.mass_g}


def recover_constant_density(table: ExpansionTable, mesh: SphereMesh,
                             products: ProductIntegrals, grid: VoxelGrid,
                             omega_mask: np.ndarray,
                             fields: Optional[tuple] = None,
                             mass_tol: float = MASS_TOL) -> DensityRecovery:
    """Constant density on ``omega`` from the ``k^3`` coefficient of ``Delta u``.

    ``fields`` may hold the product fields ``(rho f, rho g)``; then ``f`` and
    ``g`` are returned as well.
    """
    _require_mass(products, mass_tol)
    omega_mask = np.asarray(omega_mask, dtype=bool).reshape(-1)
    if not omega_mask.any():
        raise InputError("omega mask is empty")
    r = kappa3_bracket(table) - _known_part(products, mesh.nodes)
    a = products.mass_g * volume_newton_potential(grid, omega_mask, mesh.nodes)
    c, resid = _scalar_lsq(a, r)
    rho = 1.0 + c
    if not rho > 0:
        raise ConsistencyError(f"recovered density {rho:.6g} is not positive")
    out = DensityRecovery(rho, resid, products.mass_g)
    if fields is not None:
        rf, rg = fields
        out.f, out.g = rf / rho, rg / rho
    return out


def recover_inclusion_contrast(table: ExpansionTable, mesh: SphereMesh,
                               products: ProductIntegrals, rho0: ScalarField,
                               omega0_mask: np.ndarray,
                               mass_tol: float = MASS_TOL) -> DensityRecovery:
    """Contrast ``varrho`` of ``rho = rho0 + varrho * chi(omega0)`` with ``rho0`` known."""
    omega0_mask = np.asarray(omega0_mask, dtype=bool).reshape(-1)
    if not omega0_mask.any():
        raise InputError("inclusion mask is empty")
    _require_mass(products, mass_tol)
    grid = rho0.grid
    background = rho0.values - 1.0
    known = _known_part(products, mesh.nodes)
    if np.any(background != 0):
        known = known + products.mass_g * volume_newton_potential(
            grid, background != 0, mesh.nodes, background)
    r = kappa3_bracket(table) - known
    a = products.mass_g * volume_newton_potential(grid, omega0_mask, mesh.nodes)
    c, resid = _scalar_lsq(a, r)
    rho_min = float(np.min(rho0.values[omega0_mask])) + c
    if rho_min < 0:
        raise ConsistencyError(f"recovered density reaches {rho_min:.6g} < 0 in the inclusion")
    return DensityRecovery(c, resid, products.mass_g)


def extract_density_moments(table: ExpansionTable, mesh: SphereMesh,
                            products: ProductIntegrals, m_max: int = 4,
                            mass_tol: float = MASS_TOL) -> MomentTable:
    """Moments of ``rho - 1`` from the ``k^3`` coefficient, given the product integrals."""
    _require_mass(products, mass_tol)
    D = kappa3_bracket(table) - _known_part(products, mesh.nodes)
    return MomentTable("rho_contrast", m_max,
                       potential_to_moments(D, mesh, products.mass_g, m_max))


# -- ordering-based verdicts ---------------------------------------------------------

MODES = ("product_g", "density", "monotone_perturbation")


@dataclass
class OrderingVerdict:
    mode: str
    degree0_difference: complex
    max_difference: float
    scale: float
    tolerance: float
    moments_agree: bool
    conclusion: str

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        z = complex(self.degree0_difference)
        d["degree0_difference"] = [z.real, z.imag]
        return d


def check_ordering_uniqueness(mtA: MomentTable, mtB: MomentTable, mode: str,
                              rtol: float = 1e-8) -> OrderingVerdict:
    """Compare two moment tables under a declared pointwise ordering.

    ``product_g`` and ``density``: under an ordering, equal degree-0 moments
    force equality of the ordered quantities. ``monotone_perturbation``: the
    second configuration dominates the first, so the degree-0 difference
    ``A - B`` must be strictly negative and equal data is impossible.
    """
    if mode not in MODES:
        raise InputError(f"mode must be one of {MODES}")
    if mtA.target != mtB.target:
        raise InputError("tables have different targets")
    m = min(mtA.m_max, mtB.m_max)
    diff = mtA.truncated(m).values - mtB.truncated(m).values
    scale = max(np.max(np.abs(mtA.values)), np.max(np.abs(mtB.values)), np.finfo(float).tiny)
    tol = rtol * scale
    d0 = complex(diff[0])
    agree = bool(np.max(np.abs(diff)) <= tol)
    zero_mass = abs(d0) <= tol
    if mode == "monotone_perturbation":
        negative = d0.real < -tol and abs(d0.imag) <= tol
        conclusion = ("strictly negative degree-0 difference: equal measurements are impossible"
                      if negative else "degree-0 difference is not strictly negative")
    elif zero_mass:
        what = "products rho g" if mode == "product_g" else "densities"
        conclusion = f"degree-0 moments agree: ordered {what} must coincide"
    else:
        conclusion = "degree-0 moments differ: the two data sets cannot coincide"
    return OrderingVerdict(mode, d0, float(np.max(np.abs(diff))), float(scale), float(tol),
                           agree, conclusion)


def harmonic_self_pairing(delta: MomentTable, coeffs: np.ndarray) -> complex:
    """``int F h dy`` for ``h`` given by solid-harmonic coefficients, from moments of ``F``.

    If the difference ``F`` of two products is itself the harmonic ``h``,
    this is ``int F^2`` and vanishes only for ``F = 0``.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.shape[0] > delta.values.shape[0]:
        raise TruncationError("harmonic degree exceeds the table", required_order=None)
    return complex(np.sum(coeffs * delta.values[:coeffs.shape[0]]))


def write_summary(path, payload: dict, comment: Optional[str] = None):
    """Deterministic JSON with sorted keys."""
    data = dict(payload)
    if comment:
        data = {"config_sha256": comment, **data}
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)}")
