"""Exterior boundary-value problem for ``Delta^2 - k^4`` outside a sphere.

The field is split as ``u = u_H + u_M`` with ``(Delta + k^2) u_H = 0`` and
``(Delta - k^2) u_M = 0``; each part is a combined double/single layer
``v_d - i gamma v_s`` on the sphere. Boundary operators are diagonal in
spherical harmonics, so each is assembled from its eigenvalues. These are
computed by a Funk-Hecke integral along a great circle. After rotating the
target to the pole the ``1/r`` singularity cancels against ``sin(theta)``, so
plain Gauss-Legendre quadrature converges spectrally.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import pi
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import eval_legendre

from .errors import ConditioningError, GeometryError, InputError
from .geometry import SphereMesh, sh_basis
from .kernels import (helmholtz_green, helmholtz_green_dr, modified_helmholtz_green,
                      modified_helmholtz_green_dr)

N_ANGLE = 256
COND_LIMIT = 1e12


def _kernels(kappa: float, kind: str):
    if kind == "H":
        return (lambda r: helmholtz_green(kappa, r)), (lambda r: helmholtz_green_dr(kappa, r))
    if kind == "M":
        return ((lambda r: modified_helmholtz_green(kappa, r)),
                (lambda r: modified_helmholtz_green_dr(kappa, r)))
    raise InputError(f"unknown kernel kind {kind!r}")


def layer_eigenvalues(radius: float, kappa: float, kind: str, degree: int,
                      n_angle: int = N_ANGLE):
    """Eigenvalues ``(s_l, k_l)``, ``l = 0..degree``, of the single and double layer.

    ``s_l = 2 pi a^2 int_0^pi G(r) P_l(cos t) sin t dt`` with
    ``r = 2 a sin(t/2)``; the double layer uses ``dG/dnu_y = G'(r) r / (2a)``.
    """
    G, dG = _kernels(kappa, kind)
    x, w = np.polynomial.legendre.leggauss(n_angle)
    t = 0.5 * pi * (x + 1)
    w = 0.5 * pi * w
    r = 2 * radius * np.sin(t / 2)
    base = 2 * pi * radius ** 2 * w * np.sin(t)
    single = base * G(r)
    double = base * dG(r) * r / (2 * radius)
    s = np.empty(degree + 1, dtype=complex)
    k = np.empty(degree + 1, dtype=complex)
    for l in range(degree + 1):
        P = eval_legendre(l, np.cos(t))
        s[l] = np.sum(single * P)
        k[l] = np.sum(double * P)
    return s, k


@dataclass(eq=False)
class BoundaryOperators:
    SH: np.ndarray
    SM: np.ndarray
    KH: np.ndarray
    KM: np.ndarray
    kappa: float
    degree: int


def _check_sphere(mesh: SphereMesh):
    d = mesh.nodes - np.asarray(mesh.center)
    nu = d / np.linalg.norm(d, axis=1)[:, None]
    if np.max(np.abs(nu - mesh.normals)) > 1e-12:
        raise GeometryError("boundary mesh normals are not the outward sphere normals")


def assemble_boundary_ops(mesh: SphereMesh, kappa: float,
                          degree: Optional[int] = None) -> BoundaryOperators:
    """Nystrom matrices of ``S^H, S^M, K^H, K^M`` on a sphere mesh."""
    if not kappa > 0:
        raise InputError("wavenumber must be positive")
    _check_sphere(mesh)
    L = mesh.degree if degree is None else int(degree)
    if L > mesh.degree:
        raise InputError(f"degree {L} exceeds the mesh's exact degree {mesh.degree}")
    Y = sh_basis(mesh.directions, L)
    W = mesh.weights / mesh.radius ** 2
    YW = np.conj(Y).T * W[None, :]
    ls = np.concatenate([np.full(2 * l + 1, l) for l in range(L + 1)])
    ops = {}
    for kind in ("H", "M"):
        s, k = layer_eigenvalues(mesh.radius, kappa, kind, L)
        ops["S" + kind] = (Y * s[ls][None, :]) @ YW
        ops["K" + kind] = (Y * k[ls][None, :]) @ YW
    return BoundaryOperators(ops["SH"], ops["SM"], ops["KH"], ops["KM"], float(kappa), L)


@dataclass(eq=False)
class ExteriorBoundaryData:
    """Traces ``u = phi1`` and ``Delta u = phi2`` on the boundary sphere."""

    mesh: SphereMesh
    phi1: np.ndarray
    phi2: np.ndarray
    kappa: float

    def __post_init__(self):
        self.phi1 = np.asarray(self.phi1, dtype=complex)
        self.phi2 = np.asarray(self.phi2, dtype=complex)
        n = self.mesh.size
        if self.phi1.shape != (n,) or self.phi2.shape != (n,):
            raise InputError(f"traces must have one value per node ({n})")
        if not self.kappa > 0:
            raise InputError("wavenumber must be positive")


@dataclass(eq=False)
class LayerDensities:
    mesh: SphereMesh
    varphi: np.ndarray
    psi: np.ndarray
    gamma: float
    kappa: float
    cond: tuple = (np.nan, np.nan)

    def __post_init__(self):
        if self.gamma == 0:
            raise InputError("coupling constant gamma must be nonzero")


def _solve(A, b, label):
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise ConditioningError(
            f"{label} boundary system is near-singular (cond ~ {cond:.3g}); try another gamma")
    return np.linalg.solve(A, b), float(cond)


def solve_combined(data: ExteriorBoundaryData, gamma: Optional[float] = None,
                   ops: Optional[BoundaryOperators] = None) -> LayerDensities:
    """Densities of the combined-layer representation matching ``(phi1, phi2)``.

    ``gamma`` defaults to ``kappa``.
    """
    k = data.kappa
    gamma = k if gamma is None else float(gamma)
    if gamma == 0:
        raise InputError("coupling constant gamma must be nonzero")
    ops = assemble_boundary_ops(data.mesh, k) if ops is None else ops
    I = np.eye(data.mesh.size)
    AH = -1j * gamma * ops.SH + ops.KH + 0.5 * I
    AM = -1j * gamma * ops.SM + ops.KM + 0.5 * I
    varphi, cH = _solve(AH, 0.5 * (data.phi1 - data.phi2 / k ** 2), "Helmholtz")
    psi, cM = _solve(AM, 0.5 * (data.phi1 + data.phi2 / k ** 2), "modified Helmholtz")
    return LayerDensities(data.mesh, varphi, psi, gamma, k, (cH, cM))


def eval_parts(dens: LayerDensities, points: np.ndarray):
    """Helmholtz and modified-Helmholtz parts ``(u_H, u_M)`` at exterior points."""
    mesh = dens.mesh
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    c = np.asarray(mesh.center)
    if np.any(np.linalg.norm(pts - c, axis=1) <= mesh.radius * (1 + 1e-12)):
        raise GeometryError("exterior evaluation point is on or inside the boundary")
    r = cdist(pts, mesh.nodes)
    # d/dnu_y G(|x-y|) = G'(r) (y - x) . nu_y / r
    proj = (np.einsum("jk,jk->j", mesh.nodes, mesh.normals)[None, :]
            - pts @ mesh.normals.T) / r
    out = []
    for kind, density in (("H", dens.varphi), ("M", dens.psi)):
        G, dG = _kernels(dens.kappa, kind)
        kern = dG(r) * proj - 1j * dens.gamma * G(r)
        out.append(kern @ (mesh.weights * density))
    return out[0], out[1]


def eval_exterior(dens: LayerDensities, points: np.ndarray):
    """``(u, Delta u)`` at exterior points."""
    uH, uM = eval_parts(dens, points)
    k2 = dens.kappa ** 2
    return uH + uM, -k2 * uH + k2 * uM


def continue_traces(mesh_inner: SphereMesh, u: np.ndarray, lap_u: np.ndarray,
                    kappa: float, targets: np.ndarray, gamma: Optional[float] = None):
    """Continue ``(u, Delta u)`` from the inner sphere to exterior targets."""
    dens = solve_combined(ExteriorBoundaryData(mesh_inner, u, lap_u, kappa), gamma)
    return eval_exterior(dens, targets)
