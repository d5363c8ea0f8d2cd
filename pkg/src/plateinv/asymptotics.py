"""Low-frequency expansion of the boundary traces.

As ``k -> 0``

    u(k, x)       = sum_{m=-1}^{3} M_m(x) k^m + O(k^4),
    Delta u(k, x) = sum_{m=0}^{3}  N_m(x) k^m + O(k^4).

:func:`analytic_expansion` evaluates the closed forms of ``M_{-1} .. M_3`` and
``N_0 .. N_3`` by voxel quadrature. :func:`general_order_coeff` implements the
general recursion for ``M_{n+2}`` and ``N_{n+3}``; for ``n = 0, 1`` it must
agree with the closed forms. :func:`fit_expansion` recovers the same
coefficients from a wavenumber sweep by least squares.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import factorial, pi
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from . import constants as C
from .errors import ConditioningError, InputError
from .forward import MediumConfig, MeasurementSet, _check_off_support, _read_rows
from .geometry import SphereMesh

U_POWERS = (-1, 0, 1, 2, 3)
LAP_POWERS = (0, 1, 2, 3)


@dataclass(eq=False)
class ExpansionTable:
    """Coefficients ``M_m`` (for ``u``) and ``N_m`` (for ``Delta u``) per node."""

    nodes: np.ndarray
    M: dict
    N: dict
    provenance: str = "analytic"
    residual_u: Optional[np.ndarray] = None
    residual_lap: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    def u_series(self, kappa: float, powers: Optional[Sequence[int]] = None) -> np.ndarray:
        powers = sorted(self.M) if powers is None else powers
        return sum(self.M[p] * kappa ** p for p in powers)

    def lap_series(self, kappa: float, powers: Optional[Sequence[int]] = None) -> np.ndarray:
        powers = sorted(self.N) if powers is None else powers
        return sum(self.N[p] * kappa ** p for p in powers)

    COLUMNS = ("node_index", "series", "power", "re", "im", "residual", "provenance")

    def to_csv(self, path, comment: Optional[str] = None):
        n = self.nodes.shape[0]
        res = {"M": self.residual_u, "N": self.residual_lap}
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for name, table in (("M", self.M), ("N", self.N)):
                r = res[name] if res[name] is not None else np.zeros(n)
                for p in sorted(table):
                    for i in range(n):
                        c = complex(table[p][i])
                        w.writerow([i, name, p, repr(c.real), repr(c.imag),
                                    repr(float(r[i])), self.provenance])

    @classmethod
    def from_csv(cls, path, nodes: np.ndarray) -> "ExpansionTable":
        rows = _read_rows(path, cls.COLUMNS)
        n = nodes.shape[0]
        tables = {"M": {}, "N": {}}
        resid = {"M": np.zeros(n), "N": np.zeros(n)}
        prov = "analytic"
        for idx, series, power, re, im, r, prov in rows:
            i, p = int(idx), int(power)
            arr = tables[series].setdefault(p, np.zeros(n, dtype=complex))
            arr[i] = complex(float(re), float(im))
            resid[series][i] = float(r)
        return cls(np.asarray(nodes), tables["M"], tables["N"], prov, resid["M"], resid["N"])


def _gamma(j: int) -> complex:
    """``(i^j - (-1)^j) / (8 pi)``."""
    return (1j ** j - (-1) ** j) / (8 * pi)


class _Integrals:
    """Voxel sums of ``q(y) |x - y|^p`` for the products and the contrast."""

    def __init__(self, cfg: MediumConfig):
        self.cfg = cfg
        grid = cfg.grid
        h3 = grid.voxel_volume
        s = cfg.source_mask
        self.src = grid.centers[s]
        self.wf = (cfg.rho.values * cfg.f.values)[s] * h3
        self.wg = (cfg.rho.values * cfg.g.values)[s] * h3
        c = cfg.contrast_mask
        self.con = grid.centers[c]
        self.wc = cfg.contrast[c] * h3
        self.mass_f = float(np.sum(self.wf))
        self.mass_g = float(np.sum(self.wg))
        self.M_minus1 = C.MASS_G_TO_M_MINUS1 * self.mass_g
        self._voxel_M = {}

    def products(self, X, p):
        """``(int rho f |x-y|^p, int rho g |x-y|^p)`` at points ``X``."""
        if self.src.shape[0] == 0:
            z = np.zeros(len(X))
            return z, z.copy()
        r = cdist(X, self.src)
        rp = r ** p if p != -1 else 1.0 / r
        return rp @ self.wf, rp @ self.wg

    def contrast_sum(self, X, values, p):
        """``int (rho - 1) v(y) |x-y|^p`` with ``v`` given on contrast voxels."""
        if self.con.shape[0] == 0:
            return np.zeros(len(X), dtype=complex)
        r = cdist(X, self.con)
        if p == 0:
            rp = np.ones_like(r)
        elif p == -1:
            rp = 1.0 / r
        else:
            rp = r ** p
        return rp @ (self.wc * values)

    # printed closed forms ----------------------------------------------------

    def M_closed(self, k, X):
        n = len(X)
        if k == -1:
            return np.full(n, self.M_minus1, dtype=complex)
        if k == 0:
            _, g1 = self.products(X, 1)
            return C.RHS_G * (-g1 / (8 * pi)) + 0j
        if k == 1:
            _, g2 = self.products(X, 2)
            return C.RHS_F * C.C_POLE * self.mass_f + C.RHS_G * C.C_CUBIC * g2 / 6
        if k == 2:
            f1, _ = self.products(X, 1)
            ones = np.full(self.con.shape[0], self.M_minus1, dtype=complex)
            return C.C_POLE * self.contrast_sum(X, ones, 0) + C.RHS_F * (-f1 / (8 * pi))
        if k == 3:
            ones = np.full(self.con.shape[0], self.M_minus1, dtype=complex)
            f2, _ = self.products(X, 2)
            _, g4 = self.products(X, 4)
            return (self.contrast_sum(X, ones, 1) * (-1 / (8 * pi))
                    + C.C_POLE * self.contrast_sum(X, self.voxel_M(0), 0)
                    + C.RHS_F * C.C_CUBIC * f2 / 6
                    + C.RHS_G * C.C_POLE * g4 / 120)
        raise InputError(f"no closed form for M_{k}")

    def N_closed(self, k, X):
        n = len(X)
        if k == 0:
            _, gi = self.products(X, -1)
            # Delta G_k -> -g_0 as k -> 0
            return -C.RHS_G * gi / (4 * pi) + 0j
        if k == 1:
            return np.full(n, C.N1_MASS * self.mass_g, dtype=complex)
        if k == 2:
            fi, _ = self.products(X, -1)
            return -C.RHS_F * fi / (4 * pi)
        if k == 3:
            ones = np.full(self.con.shape[0], self.M_minus1, dtype=complex)
            _, g2 = self.products(X, 2)
            return (-self.contrast_sum(X, ones, -1) / (4 * pi)
                    + C.RHS_F * C.C_CUBIC * self.mass_f
                    + C.RHS_G * C.C_POLE * g2 / 6)
        raise InputError(f"no closed form for N_{k}")

    # general recursion -------------------------------------------------------

    def voxel_M(self, k):
        """``M_k`` on the contrast voxels (closed forms for k <= 1, recursion above)."""
        if k not in self._voxel_M:
            if k <= 1:
                self._voxel_M[k] = self.M_closed(k, self.con)
            else:
                self._voxel_M[k] = self.M_recursive(k - 2, self.con, None)
        return self._voxel_M[k]

    def M_recursive(self, n, X, base):
        total = np.zeros(len(X), dtype=complex)
        for m in range(n + 1):
            total += (_gamma(m + 1) / factorial(m + 1)) * self.contrast_sum(
                X, _base(base, n - m - 1, self), m)
        f, _ = self.products(X, n + 1)
        _, g = self.products(X, n + 3)
        total += C.RHS_F * _gamma(n + 2) * f / factorial(n + 2)
        total += C.RHS_G * _gamma(n + 4) * g / factorial(n + 4)
        return total

    def N_recursive(self, n, X, base):
        total = np.zeros(len(X), dtype=complex)
        for m in range(1, n + 2):
            total += (_gamma(m + 1) / factorial(m - 1)) * self.contrast_sum(
                X, _base(base, n - m, self), m - 2)
        f, _ = self.products(X, n) if n > 0 else (np.full(len(X), self.mass_f), None)
        _, g = self.products(X, n + 2)
        total += C.RHS_F * _gamma(n + 3) * f / factorial(n + 1)
        total += C.RHS_G * _gamma(n + 5) * g / factorial(n + 3)
        return total


def _base(base, k, integrals):
    if base is None:
        return integrals.voxel_M(k)
    if k not in base:
        raise InputError(f"recursion base is missing M_{k} on the contrast voxels")
    return base[k]


def analytic_expansion(cfg: MediumConfig, mesh: SphereMesh) -> ExpansionTable:
    """Closed-form ``M_{-1..3}`` and ``N_{0..3}`` at the mesh nodes."""
    X = mesh.nodes
    _check_off_support(cfg, X)
    I = _Integrals(cfg)
    M = {k: I.M_closed(k, X) for k in U_POWERS}
    N = {k: I.N_closed(k, X) for k in LAP_POWERS}
    return ExpansionTable(X, M, N, "analytic")


def general_order_coeff(cfg: MediumConfig, mesh: SphereMesh, n: int,
                        base: Optional[dict] = None):
    """``(M_{n+2}, N_{n+3})`` at the mesh nodes via the general recursion.

    ``base`` maps ``k`` to ``M_k`` on the contrast voxels (in voxel order of
    ``cfg.contrast_mask``); when omitted it is computed. Orders
    ``-1 .. n-1`` are required.
    """
    if n < 0:
        raise InputError("recursion order must be nonnegative")
    X = mesh.nodes
    _check_off_support(cfg, X)
    I = _Integrals(cfg)
    if base is not None:
        for k in range(-1, n):
            _base(base, k, I)
    return I.M_recursive(n, X, base), I.N_recursive(n, X, base)


def voxel_coefficients(cfg: MediumConfig, orders: Sequence[int]) -> dict:
    """``M_k`` on the contrast voxels, usable as a recursion base."""
    I = _Integrals(cfg)
    return {k: I.voxel_M(k) for k in orders}


# -- fitting -----------------------------------------------------------------------

def _lstsq(kappas, data, powers, weight_power, max_cond):
    V = kappas[:, None] ** np.array(powers, dtype=float)[None, :]
    w = kappas ** weight_power
    A = V * w[:, None]
    scale = np.linalg.norm(A, axis=0)
    A = A / scale
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > max_cond:
        raise ConditioningError(
            f"wavenumber grid too clustered for powers {list(powers)} (cond={cond:.3g})")
    B = data * w[:, None]
    coef, *_ = np.linalg.lstsq(A, B, rcond=None)
    coef = coef / scale[:, None]
    resid = np.sqrt(np.mean(np.abs(A @ (coef * scale[:, None]) - B) ** 2, axis=0))
    return coef, resid, cond


def fit_expansion(meas: MeasurementSet, powers_u: Sequence[int] = U_POWERS,
                  powers_lap: Sequence[int] = LAP_POWERS, pole_tol: float = 1e-10,
                  max_cond: float = 1e12) -> ExpansionTable:
    """Per-node least-squares fit of the monomials ``k^m`` to a sweep.

    Rows of the ``u`` fit are weighted by ``k`` to balance the ``1/k`` column.
    If the fitted ``k^-1`` coefficient is negligible (vanishing mass of
    ``rho g``) the fit is repeated without that column.
    """
    kappas = np.asarray(meas.kappas, dtype=float)
    powers_u = sorted(set(int(p) for p in powers_u))
    powers_lap = sorted(set(int(p) for p in powers_lap))
    for label, powers in (("u", powers_u), ("lap_u", powers_lap)):
        if kappas.size < 2 + len(powers):
            raise ConditioningError(
                f"{label} fit needs at least {2 + len(powers)} distinct wavenumbers, "
                f"got {kappas.size}")
    cu, ru, cond_u = _lstsq(kappas, meas.u, powers_u, 1, max_cond)
    diagnostics = {"cond_u": cond_u, "dropped": []}
    if -1 in powers_u:
        scale = np.max(np.abs(meas.u * kappas[:, None]))
        pole = np.max(np.abs(cu[powers_u.index(-1)]))
        if pole <= pole_tol * scale:
            powers_u = [p for p in powers_u if p != -1]
            cu, ru, cond_u = _lstsq(kappas, meas.u, powers_u, 1, max_cond)
            diagnostics.update(cond_u=cond_u, dropped=[-1])
    cl, rl, cond_l = _lstsq(kappas, meas.lap_u, powers_lap, 0, max_cond)
    diagnostics["cond_lap"] = cond_l
    diagnostics["kappa_max"] = float(kappas.max())
    M = {p: cu[i] for i, p in enumerate(powers_u)}
    if -1 not in M and -1 in U_POWERS:
        M[-1] = np.zeros(meas.nodes.shape[0], dtype=complex)
    N = {p: cl[i] for i, p in enumerate(powers_lap)}
    return ExpansionTable(meas.nodes, M, N, "fitted", ru, rl, diagnostics)
