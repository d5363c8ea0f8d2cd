"""Prefactors linking boundary coefficients to source integrals.

Every sign and factor of ``2 pi`` that connects a low-frequency coefficient of
``u`` or ``Delta u`` to an integral of the products ``rho f`` and ``rho g``
lives here, so that each one is tested exactly once.
"""

from math import pi

# right-hand side: -(i k^2 / 2 pi) rho f + (1 / 2 pi) rho g
RHS_F = -1j / (2 * pi)
RHS_G = 1 / (2 * pi)

# G_k(r) = (i+1)/(8 pi k) - r/(8 pi) + ...
C_POLE = (1 + 1j) / (8 * pi)
C_CUBIC = (1 - 1j) / (8 * pi)

# u ~ M_{-1}/k with M_{-1} = MASS_G_TO_M_MINUS1 * int rho g
MASS_G_TO_M_MINUS1 = RHS_G * C_POLE

# Delta u coefficients
# N_0(x) = N0_POTENTIAL * int rho g g_0(|x - y|) dy
N0_POTENTIAL = -1 / (2 * pi)
# N_1 = N1_MASS * int rho g
N1_MASS = RHS_G * C_CUBIC
# N_2(x) = N2_POTENTIAL * int rho f g_0(|x - y|) dy
N2_POTENTIAL = 1j / (2 * pi)
# N_3(x) = N3_BRACKET * E(x), where
#   E(x) = int (rho-1) g_0 dy * int rho g + int rho f - int rho g |x-y|^2 / 6
N3_BRACKET = -(1 + 1j) / (16 * pi * pi)

# which Delta u coefficient carries the Newtonian potential of each product
POTENTIAL_POWER = {"rho_g": 0, "rho_f": 2}


def potential_prefactor(target: str) -> tuple[int, complex]:
    """``(power, prefactor)`` of the coefficient holding ``int q g_0``; read at call time."""
    if target == "rho_g":
        return 0, N0_POTENTIAL
    if target == "rho_f":
        return 2, N2_POTENTIAL
    raise KeyError(target)
