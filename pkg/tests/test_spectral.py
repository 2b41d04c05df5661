"""Welch PSD estimation and Lorentzian calibration fits.

The estimator convention is double-sided over angular frequency with
sum(S * d_omega) equal to the signal variance; several tests pin that
normalization down before any fitting is trusted.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levitas import (
    DomainError,
    InsufficientDataError,
    NoPeakError,
    SimulationPlan,
    analytic_psd,
    fit_lorentzian,
    parse_config,
    particle_params_from_fit,
    simulate,
    welch_psd,
    welch_psd_samples,
)
from levitas.constants import BOLTZMANN, mbar
from levitas.errors import InversionError
from levitas.spectral import PsdEstimate

OMEGA_Z = 2.0 * math.pi * 57.3e3
SILICA = 2650.0
MASS_50 = 1.3875367553354918e-18


def synthetic_psd(t0=300.0, gamma_total=3000.0, seg=4096, dt=2.5e-7,
                  calibration=1.0):
    """Noiseless PsdEstimate built directly from the analytic model."""
    omega = np.fft.fftshift(np.fft.fftfreq(seg, d=dt)) * 2.0 * math.pi
    density = analytic_psd(omega, t0, MASS_50, OMEGA_Z, gamma_total,
                           calibration)
    return PsdEstimate(omega=omega, density=density, segment_count=1,
                       window="rectangular",
                       resolution_bandwidth=2.0 * math.pi / (seg * dt))


def cooled_config(pressure_mbar=0.5, duration=4.0, ratio=None):
    doc = {
        "particle": {"radius_nm": 50.0, "density_kg_m3": 2650.0},
        "trap": {"frequency_khz": 57.3},
        "environment": {"pressure_mbar": pressure_mbar,
                        "gas_temperature_k": 300.0},
        "drive": {"mode": "none"},
        "simulation": {"dt_s": 2.5e-7, "duration_s": duration, "seed": 0},
    }
    if ratio is not None:
        doc["environment"]["feedback_cooling_ratio"] = ratio
    return parse_config(doc)


class TestWelch:
    def test_parseval_sine(self):
        # Pure sine of amplitude a: variance a^2/2, recovered by the
        # two-sided integral regardless of window.
        dt = 1e-5
        t = np.arange(1 << 16) * dt
        z = 3e-9 * np.sin(2.0 * math.pi * 5e3 * t)
        for window in ("hann", "rectangular"):
            psd = welch_psd_samples(z, dt, 8192, window=window)
            assert psd.integral() == pytest.approx((3e-9) ** 2 / 2.0, rel=0.02)

    def test_parseval_white_noise(self):
        rng = np.random.default_rng(1)
        z = rng.standard_normal(1 << 16)
        psd = welch_psd_samples(z, 1e-5, 4096)
        assert psd.parseval_ok
        assert psd.integral() == pytest.approx(float(np.var(z)), rel=0.02)

    def test_two_sided_symmetric_grid(self):
        rng = np.random.default_rng(2)
        psd = welch_psd_samples(rng.standard_normal(4096), 1e-5, 1024)
        assert psd.omega[0] < 0 < psd.omega[-1]
        assert np.all(np.diff(psd.omega) > 0)
        assert psd.resolution_bandwidth == pytest.approx(psd.d_omega)

    def test_segment_count(self):
        rng = np.random.default_rng(3)
        psd = welch_psd_samples(rng.standard_normal(8192), 1e-5, 1024,
                                overlap=0.5)
        assert psd.segment_count == 15  # (8192 - 1024)/512 + 1

    def test_rejects_short_input(self):
        with pytest.raises(InsufficientDataError):
            welch_psd_samples(np.zeros(100), 1e-5, 1024)

    def test_rejects_unknown_window(self):
        with pytest.raises(DomainError):
            welch_psd_samples(np.zeros(4096), 1e-5, 1024, window="blackman")

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=0, max_value=1000))
    def test_parseval_property_over_seeds(self, seed):
        rng = np.random.default_rng(seed)
        z = rng.standard_normal(1 << 14)
        psd = welch_psd_samples(z, 1e-5, 2048)
        assert abs(psd.integral() / float(np.var(z)) - 1.0) < 0.02


class TestAnalyticPsd:
    def test_equipartition_integral(self):
        # Full-grid integral of the model equals k_B T / (m omega0^2).
        omega = np.linspace(-40 * OMEGA_Z, 40 * OMEGA_Z, 4_000_001)
        s = analytic_psd(omega, 300.0, MASS_50, OMEGA_Z, 3000.0)
        integral = float(np.trapezoid(s, omega))
        expect = BOLTZMANN * 300.0 / (MASS_50 * OMEGA_Z**2)
        assert integral == pytest.approx(expect, rel=1e-3)

    def test_peak_value(self):
        peak = analytic_psd(OMEGA_Z, 300.0, MASS_50, OMEGA_Z, 3000.0)
        expect = BOLTZMANN * 300.0 / (math.pi * MASS_50 * 3000.0 * OMEGA_Z**2)
        assert peak == pytest.approx(expect)


class TestLorentzianFit:
    def test_noiseless_exact_recovery(self):
        psd = synthetic_psd(gamma_total=3000.0)
        fit = fit_lorentzian(psd)
        amp_true = BOLTZMANN * 300.0 * 3000.0 / (math.pi * MASS_50)
        assert fit.omega0_hat == pytest.approx(OMEGA_Z, rel=1e-6)
        assert fit.gamma_total_hat == pytest.approx(3000.0, rel=1e-6)
        assert fit.amplitude_hat == pytest.approx(amp_true, rel=1e-6)
        assert fit.residual_norm < 1e-6

    def test_white_noise_raises_no_peak(self):
        rng = np.random.default_rng(8)
        psd = welch_psd_samples(rng.standard_normal(1 << 15), 2.5e-7, 4096)
        with pytest.raises(NoPeakError):
            fit_lorentzian(psd)

    def test_needs_enough_points(self):
        psd = synthetic_psd(seg=64)
        with pytest.raises(InsufficientDataError):
            fit_lorentzian(psd)

    def test_welch_fit_of_simulation(self):
        # 100+ averaged segments: Gamma within 5%, omega0 within 0.1%.
        config = cooled_config(pressure_mbar=0.5, duration=4.0)
        plan = SimulationPlan(experiment=config, duration=4.0, dt=config.dt,
                              seed=21, initial="thermal")
        psd = welch_psd(simulate(plan), segment_length=65536)
        assert psd.segment_count >= 100
        fit = fit_lorentzian(psd)
        assert fit.omega0_hat == pytest.approx(OMEGA_Z, rel=1e-3)
        assert fit.gamma_total_hat == pytest.approx(config.gamma0, rel=0.05)

    def test_covariance_is_plausible(self):
        # The fitted values should sit within a few sigma of truth.
        config = cooled_config(pressure_mbar=0.5, duration=4.0)
        plan = SimulationPlan(experiment=config, duration=4.0, dt=config.dt,
                              seed=4, initial="thermal")
        fit = fit_lorentzian(welch_psd(simulate(plan), segment_length=65536))
        assert abs(fit.omega0_hat - OMEGA_Z) < 5.0 * fit.sigma(0)
        assert abs(fit.gamma_total_hat - config.gamma0) < 5.0 * fit.sigma(1)

    def test_drive_bin_exclusion(self):
        # A delta spike at the drive frequency must not derail the fit.
        psd = synthetic_psd(gamma_total=3000.0, seg=8192)
        drive = OMEGA_Z + 2.0 * math.pi * 3e3
        idx = int(np.argmin(np.abs(psd.omega - drive)))
        density = psd.density.copy()
        density[idx] += density.max() * 100.0
        spiked = PsdEstimate(omega=psd.omega.copy(), density=density,
                             segment_count=1, window="rectangular",
                             resolution_bandwidth=psd.resolution_bandwidth)
        fit = fit_lorentzian(spiked, exclude_omega=drive)
        assert fit.omega0_hat == pytest.approx(OMEGA_Z, rel=1e-6)
        assert fit.gamma_total_hat == pytest.approx(3000.0, rel=1e-6)


class TestEstimatorCalibration:
    def test_welch_peak_converges_to_analytic(self):
        # Estimator bias check: the averaged peak matches the analytic
        # model within 1 + 5/sqrt(segments).
        config = cooled_config(pressure_mbar=3.0, duration=1.0)
        plan = SimulationPlan(experiment=config, duration=1.0, dt=config.dt,
                              seed=6, initial="thermal")
        psd = welch_psd(simulate(plan), segment_length=8192)
        model = analytic_psd(psd.omega, 300.0, MASS_50, OMEGA_Z, config.gamma0)
        ipk = int(np.argmax(psd.density))
        ratio = psd.density[ipk] / model[ipk]
        tol = 5.0 / math.sqrt(psd.segment_count)
        assert abs(ratio - 1.0) < tol

    def test_one_sigma_coverage_over_repetitions(self):
        # Coarse covariance calibration: the 1-sigma intervals cover the
        # true parameters in at least 60 of 100 seeded repetitions.
        config = cooled_config(pressure_mbar=3.0, duration=0.5)
        gamma_true = config.gamma0
        cover_w0 = cover_gamma = 0
        for seed in range(100):
            plan = SimulationPlan(experiment=config, duration=0.5,
                                  dt=config.dt, seed=seed, initial="thermal")
            fit = fit_lorentzian(welch_psd(simulate(plan),
                                           segment_length=8192))
            if abs(fit.omega0_hat - OMEGA_Z) <= fit.sigma(0):
                cover_w0 += 1
            if abs(fit.gamma_total_hat - gamma_true) <= fit.sigma(1):
                cover_gamma += 1
        assert cover_w0 >= 60
        assert cover_gamma >= 60


class TestParticleParams:
    def test_radius_and_mass_from_no_feedback_fit(self):
        psd = synthetic_psd(gamma_total=2858.1038179430465)  # 0.5 mbar, 50 nm
        fit = fit_lorentzian(psd)
        out = particle_params_from_fit(fit, pressure=mbar(0.5), t0=300.0,
                                       density=SILICA)
        assert out.radius == pytest.approx(50e-9, rel=1e-6)
        assert out.mass == pytest.approx(MASS_50, rel=1e-5)
        assert out.t_cm == pytest.approx(300.0, rel=1e-6)
        assert out.calibration_gamma == pytest.approx(1.0, rel=1e-6)

    def test_feedback_case_infers_cold_temperature(self):
        gamma0 = 2858.1038179430465 * (0.05 / 0.5)  # 0.05 mbar
        gamma_total = 100.0 * gamma0
        # Synthetic cooled spectrum: T_cm = 3 K with the full width.
        psd = synthetic_psd(t0=3.0, gamma_total=gamma_total)
        fit = fit_lorentzian(psd)
        out = particle_params_from_fit(fit, pressure=mbar(0.05), t0=300.0,
                                       density=SILICA, gamma0=gamma0)
        assert out.t_cm == pytest.approx(3.0, rel=1e-6)
        assert out.radius == pytest.approx(50e-9, rel=1e-6)
        assert out.delta_gamma == pytest.approx(99.0 * gamma0, rel=1e-6)

    def test_calibration_gamma_recovered(self):
        psd = synthetic_psd(gamma_total=2858.1038179430465, calibration=2.5)
        fit = fit_lorentzian(psd)
        out = particle_params_from_fit(fit, pressure=mbar(0.5), t0=300.0,
                                       density=SILICA)
        # Detector units 2.5x too large: calibration shrinks accordingly.
        assert out.calibration_gamma == pytest.approx(1.0 / 2.5, rel=1e-6)

    def test_reference_gamma_above_width_rejected(self):
        psd = synthetic_psd(gamma_total=1000.0)
        fit = fit_lorentzian(psd)
        with pytest.raises(InversionError):
            particle_params_from_fit(fit, pressure=mbar(0.5), t0=300.0,
                                     density=SILICA, gamma0=2000.0)
