"""Voxel grids, volume quadrature, sphere meshes and spherical harmonics.

Volume integrals use the voxel midpoint rule. Sphere integrals use a
Gauss-Legendre rule in ``cos(theta)`` times a uniform rule in longitude,
which integrates every spherical harmonic product up to the mesh degree
exactly.

Spherical harmonics are the fully orthonormal complex ones with the
Condon-Shortley phase, ``Y_m^n`` with degree ``m`` and order ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterator, Optional, Sequence

import numpy as np
from scipy.special import sph_harm_y

from .errors import GeometryError, GridMismatchError, InputError

UNIT_TOL = 1e-12


@dataclass(frozen=True)
class VoxelGrid:
    """Regular axis-aligned voxel grid.

    Voxels are enumerated in C order over ``(ix, iy, iz)``; every array of
    per-voxel values in this package uses that order.
    """

    shape: tuple[int, int, int]
    lower: tuple[float, float, float]
    upper: tuple[float, float, float]

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        if len(shape) != 3 or min(shape) < 2:
            raise InputError(f"grid needs three axes with >= 2 voxels, got {self.shape}")
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if any(u <= lo for lo, u in zip(lower, upper)):
            raise InputError("grid box must have positive extent on every axis")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, n: int, half_width: float) -> "VoxelGrid":
        return cls((n, n, n), (-half_width,) * 3, (half_width,) * 3)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def spacing(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / np.array(self.shape)

    @property
    def voxel_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def half_diagonal(self) -> float:
        return float(0.5 * np.linalg.norm(self.spacing))

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return self.lower[axis] + h * (np.arange(self.shape[axis]) + 0.5)

    @cached_property
    def centers(self) -> np.ndarray:
        """Voxel centers, shape ``(size, 3)``."""
        axes = [self.axis_centers(a) for a in range(3)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        pts.setflags(write=False)
        return pts

    def empty_mask(self) -> np.ndarray:
        return np.zeros(self.size, dtype=bool)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One real or complex value per voxel of ``grid``."""

    grid: VoxelGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 1:
            vals = vals.reshape(-1)
        if vals.shape[0] != self.grid.size:
            raise InputError(
                f"field has {vals.shape[0]} values for a grid of {self.grid.size} voxels"
            )
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid: VoxelGrid, value, mask: Optional[np.ndarray] = None):
        vals = np.full(grid.size, value, dtype=np.result_type(value, float))
        if mask is not None:
            vals = np.where(mask, vals, 0)
        return cls(grid, vals)

    @classmethod
    def from_function(cls, grid: VoxelGrid, fn: Callable[[np.ndarray], np.ndarray],
                      mask: Optional[np.ndarray] = None):
        vals = np.asarray(fn(grid.centers))
        if mask is not None:
            vals = np.where(mask, vals, 0)
        return cls(grid, vals)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def support(self, atol: float = 0.0) -> np.ndarray:
        return np.abs(self.values) > atol

    def _check(self, other: "ScalarField"):
        if other.grid != self.grid:
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other: "ScalarField") -> "ScalarField":
        self._check(other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        self._check(other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            self._check(other)
            return ScalarField(self.grid, self.values * other.values)
        return ScalarField(self.grid, self.values * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ScalarField):
            self._check(other)
            return ScalarField(self.grid, self.values / other.values)
        return ScalarField(self.grid, self.values / other)


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """Compact set Omega as a voxel mask, plus the measurement radius R."""

    grid: VoxelGrid
    omega_mask: np.ndarray
    R: float
    inclusion_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.R > 0:
            raise InputError(f"measurement radius must be positive, got {self.R}")
        omega = np.asarray(self.omega_mask, dtype=bool).reshape(-1)
        if omega.shape[0] != self.grid.size:
            raise GridMismatchError("omega mask does not match the grid")
        if not omega.any():
            raise InputError("omega mask is empty")
        reach = np.linalg.norm(self.grid.centers[omega], axis=1) + self.grid.half_diagonal
        if reach.max() >= self.R:
            raise GeometryError(
                f"omega reaches radius {reach.max():.6g}, not strictly inside B_R (R={self.R})"
            )
        omega.setflags(write=False)
        object.__setattr__(self, "omega_mask", omega)
        if self.inclusion_mask is not None:
            inc = np.asarray(self.inclusion_mask, dtype=bool).reshape(-1)
            if inc.shape[0] != self.grid.size:
                raise GridMismatchError("inclusion mask does not match the grid")
            if np.any(inc & ~omega):
                raise InputError("inclusion mask must be a subset of omega")
            inc.setflags(write=False)
            object.__setattr__(self, "inclusion_mask", inc)


# -- masks for the default shapes ---------------------------------------------

def ball_mask(grid: VoxelGrid, radius: float, center=(0.0, 0.0, 0.0)) -> np.ndarray:
    d = grid.centers - np.asarray(center, dtype=float)
    return np.einsum("ij,ij->i", d, d) <= radius * radius


def box_mask(grid: VoxelGrid, lower, upper) -> np.ndarray:
    c = grid.centers
    return np.all((c >= np.asarray(lower)) & (c <= np.asarray(upper)), axis=1)


def cylinder_mask(grid: VoxelGrid, axis: int, radius: float, half_length: float,
                  center=(0.0, 0.0, 0.0), square: bool = False) -> np.ndarray:
    """Cylinder along a coordinate axis; ``square=True`` gives a square cross-section."""
    d = grid.centers - np.asarray(center, dtype=float)
    cross = [a for a in range(3) if a != axis]
    if square:
        inside = np.all(np.abs(d[:, cross]) <= radius, axis=1)
    else:
        inside = np.sum(d[:, cross] ** 2, axis=1) <= radius * radius
    return inside & (np.abs(d[:, axis]) <= half_length)


def integrate_volume(field: ScalarField, mask: Optional[np.ndarray] = None):
    """Midpoint-rule integral of ``field`` over the voxels selected by ``mask``."""
    vals = field.values
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).reshape(-1)
        if mask.shape[0] != field.grid.size:
            raise GridMismatchError("mask does not match the field's grid")
        vals = vals[mask]
    total = np.sum(vals) * field.grid.voxel_volume
    return complex(total) if np.iscomplexobj(total) else float(total)


# -- spherical harmonics --------------------------------------------------------

@dataclass(frozen=True, order=True)
class SHIndex:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 0 or abs(self.n) > self.m:
            raise InputError(f"invalid spherical harmonic index (m={self.m}, n={self.n})")

    @property
    def flat(self) -> int:
        return self.m * self.m + self.m + self.n


def sh_indices(m_max: int) -> Iterator[SHIndex]:
    for m in range(m_max + 1):
        for n in range(-m, m + 1):
            yield SHIndex(m, n)


def sh_count(m_max: int) -> int:
    return (m_max + 1) ** 2


def _angles(dirs: np.ndarray):
    theta = np.arccos(np.clip(dirs[..., 2], -1.0, 1.0))
    phi = np.arctan2(dirs[..., 1], dirs[..., 0])
    return theta, phi


def eval_sh(idx: SHIndex, direction) -> complex:
    d = np.asarray(direction, dtype=float)
    if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > UNIT_TOL:
        raise InputError(f"direction must be a unit 3-vector, got {direction}")
    theta, phi = _angles(d)
    return complex(sph_harm_y(idx.m, idx.n, theta, phi))


def sh_basis(dirs: np.ndarray, m_max: int) -> np.ndarray:
    """``Y_m^n(dirs)`` for all ``m <= m_max``; columns in :attr:`SHIndex.flat` order."""
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    theta, phi = _angles(dirs)
    out = np.empty((dirs.shape[0], sh_count(m_max)), dtype=complex)
    for m in range(m_max + 1):
        ns = np.arange(-m, m + 1)
        out[:, m * m: (m + 1) ** 2] = sph_harm_y(m, ns[None, :], theta[:, None], phi[:, None])
    return out


def solid_harmonics_conj(points: np.ndarray, m_max: int) -> np.ndarray:
    """``|y|^m conj(Y_m^n(y/|y|))`` at each point; harmless at the origin."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.linalg.norm(pts, axis=1)
    dirs = np.where(r[:, None] > 0, pts / np.where(r > 0, r, 1.0)[:, None], [0.0, 0.0, 1.0])
    Y = np.conj(sh_basis(dirs, m_max))
    degrees = np.concatenate([np.full(2 * m + 1, m) for m in range(m_max + 1)])
    return Y * r[:, None] ** degrees[None, :]


def harmonic_moment_oracle(q: ScalarField, idx: SHIndex, origin=(0.0, 0.0, 0.0)) -> complex:
    """Direct quadrature of ``int q(y) |y|^m conj(Y_m^n)(y/|y|) dy``."""
    mask = q.values != 0
    pts = q.grid.centers[mask] - np.asarray(origin, dtype=float)
    basis = solid_harmonics_conj(pts, idx.m)[:, idx.flat]
    return complex(np.sum(q.values[mask] * basis) * q.grid.voxel_volume)


def moment_vector_oracle(q: ScalarField, m_max: int) -> np.ndarray:
    """All oracle moments up to ``m_max`` in flat order."""
    mask = q.values != 0
    basis = solid_harmonics_conj(q.grid.centers[mask], m_max)
    return (q.values[mask] @ basis) * q.grid.voxel_volume


# -- sphere meshes --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SphereMesh:
    """Product quadrature on a sphere.

    ``degree`` is the largest harmonic degree ``L`` for which projections of
    degree-``<= L`` functions onto ``Y_m^n`` (``m <= L``) are exact.
    """

    radius: float
    nodes: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    degree: int
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.radius > 0:
            raise InputError("sphere radius must be positive")
        rel = np.linalg.norm(self.nodes - np.asarray(self.center), axis=1) / self.radius
        if np.max(np.abs(rel - 1.0)) > UNIT_TOL:
            raise GeometryError("mesh nodes are not on the sphere")
        area = 4 * np.pi * self.radius ** 2
        if abs(self.weights.sum() - area) > 1e-10 * area:
            raise InputError("sphere weights do not sum to the sphere area")
        for arr in (self.nodes, self.weights, self.normals):
            arr.setflags(write=False)

    @classmethod
    def gauss_product(cls, radius: float, n_theta: int, n_phi: Optional[int] = None,
                      center=(0.0, 0.0, 0.0)) -> "SphereMesh":
        n_phi = 2 * n_theta if n_phi is None else n_phi
        if n_theta < 1 or n_phi < 1:
            raise InputError("sphere mesh needs at least one node per direction")
        t, wt = np.polynomial.legendre.leggauss(n_theta)
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        st = np.sqrt(1 - t * t)
        dirs = np.stack([
            np.outer(st, np.cos(phi)).ravel(),
            np.outer(st, np.sin(phi)).ravel(),
            np.repeat(t, n_phi),
        ], axis=1)
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        w = np.repeat(wt, n_phi) * (2 * np.pi / n_phi) * radius ** 2
        c = np.asarray(center, dtype=float)
        degree = min(n_theta - 1, (n_phi - 1) // 2)
        return cls(float(radius), c + radius * dirs, w, dirs.copy(), degree, tuple(c))

    @classmethod
    def for_degree(cls, radius: float, degree: int, center=(0.0, 0.0, 0.0)) -> "SphereMesh":
        return cls.gauss_product(radius, degree + 1, 2 * degree + 2, center)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def directions(self) -> np.ndarray:
        return self.normals

    def project(self, values: np.ndarray, m_max: int) -> np.ndarray:
        """Coefficients ``int_{S^2} v conj(Y_m^n) dS`` (unit-sphere measure)."""
        if m_max > self.degree:
            raise InputError(f"m_max={m_max} exceeds the mesh's exact degree {self.degree}")
        Y = sh_basis(self.directions, m_max)
        w = self.weights / self.radius ** 2
        return np.conj(Y).T @ (w * np.asarray(values))


def orthonormality_defect(mesh: SphereMesh, m_max: int) -> float:
    Y = sh_basis(mesh.directions, m_max)
    w = mesh.weights / mesh.radius ** 2
    gram = np.conj(Y).T @ (w[:, None] * Y)
    return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))


def invariant_profile(grid: VoxelGrid, axis: int,
                      profile: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      mask: Optional[np.ndarray] = None) -> ScalarField:
    """Field that depends only on the two coordinates transverse to ``axis``."""
    cross = [a for a in range(3) if a != axis]
    c = grid.centers
    vals = np.asarray(profile(c[:, cross[0]], c[:, cross[1]]), dtype=float)
    vals = np.broadcast_to(vals, (grid.size,)).copy()
    if mask is not None:
        vals = np.where(mask, vals, 0.0)
    return ScalarField(grid, vals)


def axis_of(direction: Sequence[float]) -> int:
    """Index of the coordinate axis parallel to ``direction``."""
    d = np.asarray(direction, dtype=float)
    if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > 1e-9:
        raise InputError(f"invariance direction must be a unit vector, got {direction}")
    hits = np.flatnonzero(np.isclose(np.abs(d), 1.0, atol=1e-9))
    if hits.size != 1:
        raise InputError("invariance directions must be grid-aligned on a voxel grid")
    return int(hits[0])
