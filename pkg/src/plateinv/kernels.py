"""Closed-form kernels for the frequency-domain plate operator.

All kernels depend on the distance ``r`` only and accept scalars or arrays.
``G_k`` is the outgoing fundamental solution of ``Delta^2 - k^4``; it splits
as ``(Phi_H - Phi_M) / (2 k^2)`` into Helmholtz and modified-Helmholtz parts.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial, pi

import numpy as np

from .errors import InputError, SingularityError

SERIES_THRESHOLD = 1e-3
SERIES_ORDER = 5


@dataclass(frozen=True)
class WaveNumber:
    kappa: float

    def __post_init__(self):
        if not self.kappa >= 0:
            raise InputError(f"wavenumber must be nonnegative, got {self.kappa}")

    @property
    def omega(self) -> float:
        return self.kappa ** 2


def _kappa(kappa) -> float:
    k = kappa.kappa if isinstance(kappa, WaveNumber) else float(kappa)
    if not k > 0:
        raise InputError(f"wavenumber must be positive, got {k}")
    return k


def _radius(r, allow_zero=True) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(~np.isfinite(r)):
        raise InputError("distances must be finite and nonnegative")
    if not allow_zero and np.any(r == 0):
        raise SingularityError("kernel evaluated at r = 0")
    return r


def _out(x):
    return x[()] if isinstance(x, np.ndarray) and x.ndim == 0 else x


def osc_coeff(j: int) -> complex:
    """Coefficient of ``(k r)^j`` in ``exp(i k r) - exp(-k r)``."""
    return (1j ** j - (-1) ** j) / factorial(j)


def osc_series_coeffs(order: int) -> list[complex]:
    """``[c_1, ..., c_order]`` for ``order`` in 1..5."""
    if not 1 <= order <= 5:
        raise InputError(f"series order must be in 1..5, got {order}")
    return [osc_coeff(j) for j in range(1, order + 1)]


def biharmonic_green(kappa, r, series_threshold: float = SERIES_THRESHOLD,
                     series_order: int = SERIES_ORDER):
    """``(exp(i k r) - exp(-k r)) / (8 pi k^2 r)``, with its limit at ``r = 0``.

    Below ``k r < series_threshold`` the truncated power series is used.
    """
    k = _kappa(kappa)
    r = _radius(r)
    kr = k * r
    small = kr < series_threshold
    out = np.empty(r.shape, dtype=complex)
    if np.any(~small):
        rr = r[~small]
        out[~small] = (np.expm1(1j * k * rr) - np.expm1(-k * rr)) / (8 * pi * k * k * rr)
    if np.any(small):
        rr = r[small]
        acc = np.zeros(rr.shape, dtype=complex)
        for j in range(series_order, 0, -1):
            acc = acc * (k * rr) + osc_coeff(j)
        out[small] = acc / (8 * pi * k)
    return _out(out)


def biharmonic_green_zero(r):
    """Fundamental solution of ``Delta^2``: ``-r / (8 pi)``."""
    return _out(-_radius(r) / (8 * pi))


def laplace_green(r):
    """Fundamental solution of ``-Delta``: ``1 / (4 pi r)``."""
    r = _radius(r, allow_zero=False)
    return _out(1.0 / (4 * pi * r))


def helmholtz_green(kappa, r):
    k = float(kappa)
    r = _radius(r, allow_zero=False)
    return _out(np.exp(1j * k * r) / (4 * pi * r))


def modified_helmholtz_green(kappa, r):
    k = float(kappa)
    r = _radius(r, allow_zero=False)
    return _out(np.exp(-k * r) / (4 * pi * r))


def laplacian_biharmonic_green(kappa, r):
    """``Delta_x G_k(|x - y|) = -(Phi_H + Phi_M) / 2`` away from the source."""
    k = _kappa(kappa)
    r = _radius(r, allow_zero=False)
    return _out(-(np.exp(1j * k * r) + np.exp(-k * r)) / (8 * pi * r))


def helmholtz_green_dr(kappa, r):
    """Radial derivative of ``Phi_H``."""
    k = float(kappa)
    r = _radius(r, allow_zero=False)
    return _out((1j * k * r - 1) * np.exp(1j * k * r) / (4 * pi * r * r))


def modified_helmholtz_green_dr(kappa, r):
    """Radial derivative of ``Phi_M``."""
    k = float(kappa)
    r = _radius(r, allow_zero=False)
    return _out(-(k * r + 1) * np.exp(-k * r) / (4 * pi * r * r))


def neumann_bound(M: float, R: float) -> float:
    """Sufficient bound on ``k^2`` for the Neumann series: ``2 / (M R^2)``."""
    if M <= 0:
        return np.inf
    return 2.0 / (M * R * R)
