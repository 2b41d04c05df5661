"""Physical constants (CODATA 2018, exact where defined) and unit conversions.

All internal computation is SI; unit conversion happens once at the
configuration boundary (see :mod:`levitas.config`).
"""

import math

BOLTZMANN = 1.380649e-23           # J/K (exact)
ELEMENTARY_CHARGE = 1.602176634e-19  # C (exact)
HBAR = 1.054571817e-34             # J s
VACUUM_PERMITTIVITY = 8.8541878128e-12  # F/m
ATOMIC_MASS = 1.66053906660e-27    # kg

# Mean molecular mass of dry air, default residual gas for Epstein drag.
AIR_MOLECULE_MASS = 28.97 * ATOMIC_MASS

MBAR_TO_PA = 100.0


def mbar(p: float) -> float:
    """Convert a pressure in mbar to Pa."""
    return p * MBAR_TO_PA


def khz(f: float) -> float:
    """Convert a frequency in kHz to angular frequency in rad/s."""
    return 2.0 * math.pi * f * 1e3
