"""Unit conversions used only at configuration boundaries.

Everything downstream of the configuration layer works in SI units
(W, Hz, s, m).  Telecom-customary units (dBm, ps/nm/km, ps/sqrt(km))
are converted here and nowhere else.
"""

import numpy as np
from scipy.constants import c as C_VACUUM

REFERENCE_WAVELENGTH = 1550e-9  # m, matches a 193.4 THz carrier grid


def db_to_lin(db):
    """Power ratio from dB."""
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def lin_to_db(lin):
    """dB from power ratio."""
    return 10.0 * np.log10(lin)


def dbm_to_watt(dbm):
    return 1e-3 * db_to_lin(dbm)


def watt_to_dbm(watt):
    return lin_to_db(np.asarray(watt, dtype=float) / 1e-3)


def attenuation_db_km_to_neper_m(att_db_km):
    """Field attenuation in Neper/m from a power loss in dB/km.

    The returned value is the field coefficient: power decays as
    exp(-2 * alpha * z).
    """
    return att_db_km * np.log(10.0) / 20.0 / 1e3


def dispersion_ps_nm_km_to_si(d_ps_nm_km):
    """Dispersion parameter D in s/m^2 from ps/(nm km)."""
    return d_ps_nm_km * 1e-12 / (1e-9 * 1e3)


def beta2_from_dispersion(d_si, wavelength=REFERENCE_WAVELENGTH):
    """Group-velocity dispersion beta2 (s^2/m) from D (s/m^2).

    Sign convention: D > 0 (anomalous dispersion at 1550 nm) gives
    beta2 < 0, via beta2 = -D * lambda^2 / (2 pi c).
    """
    return -d_si * wavelength**2 / (2.0 * np.pi * C_VACUUM)


def accumulated_dispersion_ps_nm_to_si(d_ps_nm):
    """Accumulated dispersion D*L in s/m from ps/nm."""
    return d_ps_nm * 1e-12 / 1e-9


def pmd_ps_sqrtkm_to_si(pmd_ps_sqrt_km):
    """PMD coefficient in s/sqrt(m) from ps/sqrt(km)."""
    return pmd_ps_sqrt_km * 1e-12 / np.sqrt(1e3)


def nonlinear_coefficient(n2, a_eff, wavelength=REFERENCE_WAVELENGTH):
    """Kerr coefficient gamma in 1/(W m).

    Standard convention gamma = 2 pi n2 / (lambda A_eff); with
    n2 = 2.25e-20 m^2/W and A_eff = 84.95e-12 m^2 this gives about
    1.07 / (W km) at 1550 nm.
    """
    return 2.0 * np.pi * n2 / (wavelength * a_eff)
