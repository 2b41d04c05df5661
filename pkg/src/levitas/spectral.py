"""Power spectral density estimation and Lorentzian oscillator fits.

Convention: all spectra here are double-sided densities over angular
frequency, normalized so that sum(S * d_omega) over the full (negative and
positive) grid equals the signal variance.  The thermal oscillator model
in these units is

    S(w) = gamma_cal^2 * (k_B T / (pi m)) * Gamma / ((w0^2 - w^2)^2 + Gamma^2 w^2)

whose full-grid integral is gamma_cal^2 k_B T / (m w0^2), i.e.
equipartition holds exactly.  One-sided densities per Hz are larger by
4*pi; exporters note the factor where applicable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares

from .constants import BOLTZMANN
from .errors import (
    DomainError,
    FitFailureError,
    InsufficientDataError,
    InversionError,
    NoPeakError,
)
from .model import cm_temperature, epstein_radius, mass_from_radius

CONVENTION = "double-sided-angular"

_WINDOWS = ("hann", "rectangular")

# Flatness threshold: peak/median below this means nothing to fit.
_PEAK_SIGNIFICANCE = 10.0

# Windowing correlates neighbouring periodogram bins, so residuals are not
# independent and the naive covariance is too small.  For the Hann window
# the bin correlations are 4/9 (adjacent) and 1/36 (next), inflating the
# variance of bin-averaged quantities by 1 + 2*(4/9 + 1/36).
_BIN_CORRELATION_INFLATION = {"hann": 1.0 + 2.0 * (4.0 / 9.0 + 1.0 / 36.0),
                              "rectangular": 1.0}


@dataclass(frozen=True)
class PsdEstimate:
    """Averaged periodogram over a symmetric angular-frequency grid."""

    omega: np.ndarray          # rad/s, strictly increasing, two-sided
    density: np.ndarray        # m^2 s (or du^2 s before calibration)
    segment_count: int
    window: str
    resolution_bandwidth: float  # rad/s
    convention: str = CONVENTION
    parseval_ok: bool = True

    def __post_init__(self):
        self.omega.setflags(write=False)
        self.density.setflags(write=False)

    @property
    def d_omega(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def integral(self) -> float:
        """sum(S * d_omega), equals the signal variance up to window bias."""
        return float(np.sum(self.density) * self.d_omega)


@dataclass(frozen=True)
class FitResult:
    """Lorentzian fit S(w) = amplitude / ((w0^2-w^2)^2 + Gamma^2 w^2)."""

    omega0_hat: float
    gamma_total_hat: float
    amplitude_hat: float
    covariance: np.ndarray     # 3x3, order (omega0, gamma, amplitude)
    residual_norm: float
    n_points: int
    # Derived quantities, populated by particle_params_from_fit.
    t_cm: float | None = None
    gamma0: float | None = None
    delta_gamma: float | None = None
    radius: float | None = None
    mass: float | None = None
    calibration_gamma: float | None = None

    def __post_init__(self):
        if self.omega0_hat <= 0 or self.gamma_total_hat <= 0:
            raise DomainError("fitted omega0 and gamma must be > 0")
        self.covariance.setflags(write=False)

    def sigma(self, index: int) -> float:
        """1-sigma uncertainty of parameter 0=omega0, 1=gamma, 2=amplitude."""
        return float(np.sqrt(max(self.covariance[index, index], 0.0)))


def welch_psd(trajectory, segment_length: int, overlap: float = 0.5,
              window: str = "hann") -> PsdEstimate:
    """Welch-averaged two-sided PSD of a trajectory's position series.

    Segments are mean-subtracted and windowed; densities are scaled by the
    window power so Parseval holds against the windowed sample variance.
    Averaging N segments shrinks the estimator variance as 1/N.
    """
    z = np.asarray(trajectory.positions, dtype=float)
    dt = trajectory.dt
    return welch_psd_samples(z, dt, segment_length, overlap, window)


def welch_psd_samples(z: np.ndarray, dt: float, segment_length: int,
                      overlap: float = 0.5, window: str = "hann") -> PsdEstimate:
    if window not in _WINDOWS:
        raise DomainError(f"window must be one of {_WINDOWS}")
    if not 0 <= overlap < 1:
        raise DomainError("overlap must be in [0, 1)")
    n = z.size
    seg = int(segment_length)
    if seg < 8:
        raise DomainError("segment_length must be >= 8")
    if seg > n:
        raise InsufficientDataError(f"trajectory ({n}) shorter than one segment ({seg})")

    if window == "hann":
        w = np.hanning(seg)
    else:
        w = np.ones(seg)
    w_power = np.mean(w**2)

    hop = max(1, int(round(seg * (1.0 - overlap))))
    starts = range(0, n - seg + 1, hop)
    acc = np.zeros(seg)
    count = 0
    for s in starts:
        chunk = z[s:s + seg]
        chunk = (chunk - chunk.mean()) * w
        spec = np.fft.fft(chunk)
        acc += (spec.real**2 + spec.imag**2)
        count += 1
    density = acc * (dt / (2.0 * math.pi * seg * w_power * count))
    omega = np.fft.fftshift(np.fft.fftfreq(seg, d=dt)) * 2.0 * math.pi
    density = np.fft.fftshift(density)
    rbw = 2.0 * math.pi / (seg * dt)

    variance = float(np.var(z))
    integral = float(np.sum(density) * (omega[1] - omega[0]))
    parseval_ok = variance == 0.0 or abs(integral / variance - 1.0) < 0.02

    return PsdEstimate(omega=omega, density=density, segment_count=count,
                       window=window, resolution_bandwidth=rbw,
                       parseval_ok=parseval_ok)


def analytic_psd(omega, t0: float, mass: float, omega0: float,
                 gamma_total: float, calibration_gamma: float = 1.0):
    """Thermal oscillator PSD in the package convention (see module doc)."""
    if t0 < 0 or mass <= 0 or omega0 <= 0 or gamma_total <= 0:
        raise DomainError("analytic_psd parameters must be positive")
    w = np.asarray(omega, dtype=float)
    num = calibration_gamma**2 * BOLTZMANN * t0 * gamma_total / (math.pi * mass)
    out = num / ((omega0**2 - w**2) ** 2 + gamma_total**2 * w**2)
    return out if out.shape else float(out)


def _initial_guess(omega: np.ndarray, density: np.ndarray):
    ipk = int(np.argmax(density))
    w0 = omega[ipk]
    peak = density[ipk]
    half = peak / 2.0
    lo = ipk
    while lo > 0 and density[lo] > half:
        lo -= 1
    hi = ipk
    while hi < density.size - 1 and density[hi] > half:
        hi += 1
    width = max(omega[hi] - omega[lo], 2.0 * (omega[1] - omega[0]))
    amp = peak * width**2 * w0**2
    return w0, width, amp


def fit_lorentzian(psd: PsdEstimate, initial_guess=None,
                   exclude_omega: float | None = None) -> FitResult:
    """Weighted nonlinear least squares of the Lorentzian oscillator model.

    Weights are 1/S_model^2 (log-consistent for exponentially distributed
    periodogram ordinates), re-evaluated every iteration; positivity is
    enforced by fitting log(omega0, Gamma, amplitude) with a
    Levenberg-Marquardt damping schedule.  When an AC drive frequency is
    declared, +-2 resolution bandwidths around it are masked out.
    """
    pos = psd.omega > 0
    omega = psd.omega[pos]
    density = psd.density[pos]
    if exclude_omega is not None:
        keep = np.abs(omega - exclude_omega) > 2.0 * psd.resolution_bandwidth
        omega, density = omega[keep], density[keep]
    good = density > 0
    omega, density = omega[good], density[good]
    if omega.size < 50:
        raise InsufficientDataError("need >= 50 positive-frequency points to fit")

    peak = float(np.max(density))
    if peak / float(np.median(density)) < _PEAK_SIGNIFICANCE:
        raise NoPeakError("spectrum is flat: no oscillator peak to fit")

    if initial_guess is None:
        w0_g, gamma_g, amp_g = _initial_guess(omega, density)
    else:
        w0_g, gamma_g, amp_g = initial_guess
    if omega[0] > w0_g / 2 or omega[-1] < 2 * w0_g:
        raise InsufficientDataError("grid must cover [omega0/2, 2*omega0]")

    def run(band_omega, band_density, x0):
        def residuals(logp):
            w0, gamma, amp = np.exp(logp)
            model = amp / ((w0**2 - band_omega**2) ** 2 + gamma**2 * band_omega**2)
            return band_density / model - 1.0

        res = least_squares(residuals, x0, method="lm", max_nfev=400)
        if not res.success or not np.isfinite(res.x).all():
            raise FitFailureError("Lorentzian fit did not converge",
                                  best_iterate=np.exp(res.x))
        return res

    x0 = np.log([w0_g, gamma_g, amp_g])
    res = run(omega, density, x0)
    # Re-band to +-10 fitted half-widths and refit (keeps drive spikes and
    # far wings from steering the weights).
    w0_f, gamma_f, _ = np.exp(res.x)
    band = np.abs(omega - w0_f) <= 10.0 * (gamma_f / 2.0)
    if band.sum() >= 50:
        res = run(omega[band], density[band], res.x)
        n_used = int(band.sum())
    else:
        n_used = omega.size

    w0_f, gamma_f, amp_f = np.exp(res.x)
    dof = max(n_used - 3, 1)
    s_sq = 2.0 * res.cost / dof
    s_sq *= _BIN_CORRELATION_INFLATION.get(psd.window, 1.0)
    jtj = res.jac.T @ res.jac
    try:
        cov_log = np.linalg.inv(jtj) * s_sq
    except np.linalg.LinAlgError:
        cov_log = np.full((3, 3), np.nan)
    scale = np.diag([w0_f, gamma_f, amp_f])
    cov = scale @ cov_log @ scale
    cov = 0.5 * (cov + cov.T)

    return FitResult(omega0_hat=float(w0_f), gamma_total_hat=float(gamma_f),
                     amplitude_hat=float(amp_f), covariance=cov,
                     residual_norm=float(np.sqrt(2.0 * res.cost)), n_points=n_used)


def particle_params_from_fit(fit: FitResult, pressure: float, t0: float,
                             density: float, gamma0: float | None = None,
                             gas_molecule_mass: float | None = None) -> FitResult:
    """Derive particle radius, mass, T_cm and calibration from a fit.

    With no reference, the fitted width is taken as the bare gas damping
    (a no-feedback reference spectrum).  When a reference ``gamma0`` is
    supplied (e.g. Epstein-scaled from a high-pressure run), the excess
    width is attributed to feedback.
    """
    if pressure <= 0:
        raise DomainError("pressure must be > 0")
    kwargs = {}
    if gas_molecule_mass is not None:
        kwargs["gas_molecule_mass"] = gas_molecule_mass
    if gamma0 is None:
        gamma0 = fit.gamma_total_hat
    if gamma0 > fit.gamma_total_hat * (1 + 1e-9):
        raise InversionError("reference gamma0 exceeds the fitted total width")
    delta_gamma = max(fit.gamma_total_hat - gamma0, 0.0)
    radius = epstein_radius(gamma0, pressure, t0, density, **kwargs)
    mass = mass_from_radius(radius, density)
    t_cm = cm_temperature(t0, gamma0, delta_gamma)
    expected_amp = BOLTZMANN * t_cm * fit.gamma_total_hat / (math.pi * mass)
    calibration = math.sqrt(expected_amp / fit.amplitude_hat)
    return replace(fit, t_cm=t_cm, gamma0=gamma0, delta_gamma=delta_gamma,
                   radius=radius, mass=mass, calibration_gamma=calibration)


def psd_to_csv(psd: PsdEstimate, path) -> None:
    """CSV export, header omega_rad_s,S_m2_s."""
    data = np.column_stack([psd.omega, psd.density])
    np.savetxt(path, data, delimiter=",", header="omega_rad_s,S_m2_s",
               comments="", fmt="%.17g")


def fit_to_dict(fit: FitResult) -> dict:
    out = {
        "omega0_rad_s": fit.omega0_hat,
        "gamma_total_rad_s": fit.gamma_total_hat,
        "amplitude": fit.amplitude_hat,
        "covariance_row_major": [float(v) for v in fit.covariance.ravel()],
        "residual_norm": fit.residual_norm,
        "n_points": fit.n_points,
        "convention": CONVENTION,
    }
    for key, value in (("t_cm_k", fit.t_cm), ("gamma0_rad_s", fit.gamma0),
                       ("delta_gamma_rad_s", fit.delta_gamma), ("radius_m", fit.radius),
                       ("mass_kg", fit.mass),
                       ("calibration_gamma_m_per_unit", fit.calibration_gamma)):
        if value is not None:
            out[key] = value
    return out


def fit_to_json(fit: FitResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(fit_to_dict(fit), fh, indent=2, sort_keys=True)
        fh.write("\n")
