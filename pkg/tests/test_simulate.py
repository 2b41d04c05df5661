"""Langevin integrator: determinism, equipartition, drive response.

Noiseless checks switch the gas off entirely (zero pressure) and keep the
system damped through the feedback term, so the deterministic part of the
propagator can be compared against closed forms without thermal scatter.
"""

import importlib
import math

import numpy as np
import pytest

from levitas import (
    ConfigError,
    DomainError,
    InsufficientDataError,
    IntegrationFailureError,
    SimulationPlan,
    dc_displacement,
    load_trajectory,
    parse_config,
    save_trajectory,
    simulate,
    steady_state_amplitude,
)
from levitas.constants import BOLTZMANN
from levitas.simulate import thermal_kick_sigma

sim_module = importlib.import_module("levitas.simulate")

OMEGA_Z = 2.0 * math.pi * 57.3e3


def config_doc(pressure_mbar=3.0, charge=0, drive=None, feedback=None,
               duration=1.0):
    doc = {
        "particle": {"radius_nm": 50.0, "density_kg_m3": 2650.0,
                     "charge_count": charge},
        "trap": {"frequency_khz": 57.3},
        "environment": {"pressure_mbar": pressure_mbar,
                        "gas_temperature_k": 300.0},
        "drive": drive or {"mode": "none"},
        "simulation": {"dt_s": 2.5e-7, "duration_s": duration, "seed": 0},
    }
    if drive and drive.get("mode") != "none":
        doc["needle"] = {"tip_radius_um": 100.0, "distance_mm": 39.6,
                         "angle_deg": 45.0}
    if feedback is not None:
        doc["environment"]["feedback_damping_rad_s"] = feedback
    return doc


def plan_for(doc, seed=0, **kwargs):
    config = parse_config(doc)
    return SimulationPlan(experiment=config, duration=config.duration,
                          dt=config.dt, seed=seed, **kwargs)


class TestGuards:
    def test_stability_guard(self):
        doc = config_doc()
        doc["simulation"]["dt_s"] = 1e-5  # dt * omega_z = 3.6
        with pytest.raises(ConfigError):
            plan_for(doc)

    def test_thermal_kick_scaling(self):
        base = thermal_kick_sigma(300.0, 1e-18, 1.0, 1e-7)
        assert thermal_kick_sigma(300.0, 1e-18, 1.0, 4e-7) == pytest.approx(2 * base)
        with pytest.raises(DomainError):
            thermal_kick_sigma(300.0, 1e-18, 1.0, 0.0)

    def test_integration_failure_carries_step_index(self, monkeypatch):
        real = sim_module._transition

        def broken(*args, **kwargs):
            phi, chol = real(*args, **kwargs)
            return phi * math.nan, chol

        monkeypatch.setattr(sim_module, "_transition", broken)
        with pytest.raises(IntegrationFailureError) as err:
            simulate(plan_for(config_doc(duration=0.01)))
        assert err.value.step_index >= 0


class TestDeterminism:
    def test_same_seed_identical(self):
        plan = plan_for(config_doc(duration=0.05), seed=42)
        a = simulate(plan)
        b = simulate(plan)
        assert np.array_equal(a.positions, b.positions)

    def test_different_seed_differs(self):
        doc = config_doc(duration=0.05)
        a = simulate(plan_for(doc, seed=1))
        b = simulate(plan_for(doc, seed=2))
        assert not np.array_equal(a.positions, b.positions)

    def test_positions_are_read_only(self):
        traj = simulate(plan_for(config_doc(duration=0.01)))
        with pytest.raises(ValueError):
            traj.positions[0] = 1.0


class TestEquipartition:
    def test_undriven_variance_matches_temperature(self):
        # <z^2> = k_B T0 / (m omega_z^2); 3 mbar gives relaxation time
        # ~ 60 us, so 2 s holds >> 1e4 independent samples.
        plan = plan_for(config_doc(pressure_mbar=3.0, duration=2.0),
                        seed=9, initial="thermal")
        traj = simulate(plan)
        mass = plan.experiment.particle.mass
        expect = BOLTZMANN * 300.0 / (mass * plan.experiment.trap.omega_z**2)
        assert float(np.mean(traj.positions**2)) == pytest.approx(expect, rel=0.03)

    def test_feedback_reduces_variance_hundredfold(self):
        doc = config_doc(pressure_mbar=0.05, duration=2.0)
        cold = parse_config(config_doc(pressure_mbar=0.05))
        doc["environment"]["feedback_damping_rad_s"] = 99.0 * cold.gamma0
        plan = plan_for(doc, seed=5, initial="thermal")
        traj = simulate(plan)
        mass = plan.experiment.particle.mass
        expect = BOLTZMANN * 3.0 / (mass * plan.experiment.trap.omega_z**2)
        assert float(np.mean(traj.positions**2)) == pytest.approx(expect, rel=0.15)


class TestDriveResponse:
    def test_dc_reaches_static_displacement(self):
        doc = config_doc(pressure_mbar=0.0, charge=9,
                         drive={"mode": "dc", "voltage_v": 1e4},
                         feedback=500.0, duration=0.2)
        plan = plan_for(doc)
        traj = simulate(plan)
        config = plan.experiment
        expect = dc_displacement(config.particle.charge, 1e4, config.needle,
                                 config.trap, config.particle.mass)
        tail = float(np.mean(traj.positions[-1000:]))
        assert tail == pytest.approx(expect, rel=1e-6)

    def test_ac_amplitude_and_phase_on_resonance(self):
        gamma = 200.0
        doc = config_doc(pressure_mbar=0.0, charge=9,
                         drive={"mode": "ac", "voltage_v": 1e3,
                                "ac_frequency_khz": 57.3},
                         feedback=gamma, duration=0.5)
        plan = plan_for(doc)
        traj = simulate(plan)
        config = plan.experiment
        f_z = math.cos(config.needle.angle) * config.particle.charge * 1e3 \
            * config.needle.tip_radius / config.needle.distance**2
        expect = f_z / (config.particle.mass * gamma * OMEGA_Z)
        amp, phase = steady_state_amplitude(traj, OMEGA_Z)
        assert amp == pytest.approx(expect, rel=1e-6)
        assert phase == pytest.approx(math.pi / 2, abs=1e-4)

    def test_ac_amplitude_detuned(self):
        gamma = 200.0
        omega_ac = OMEGA_Z - 2.0 * math.pi * 2000.0
        doc = config_doc(pressure_mbar=0.0, charge=9,
                         drive={"mode": "ac", "voltage_v": 1e3,
                                "ac_frequency_khz": omega_ac / (2e3 * math.pi)},
                         feedback=gamma, duration=0.5)
        plan = plan_for(doc)
        traj = simulate(plan)
        config = plan.experiment
        f_z = math.cos(config.needle.angle) * config.particle.charge * 1e3 \
            * config.needle.tip_radius / config.needle.distance**2
        denom = math.hypot(OMEGA_Z**2 - omega_ac**2, gamma * omega_ac)
        expect = f_z / (config.particle.mass * denom)
        amp, _ = steady_state_amplitude(traj, omega_ac)
        assert amp == pytest.approx(expect, rel=1e-5)

    def test_overdamped_deterministic_path_is_finite(self):
        # Feedback far beyond critical damping: no overflow, monotone
        # approach to the static displacement.
        doc = config_doc(pressure_mbar=0.0, charge=9,
                         drive={"mode": "dc", "voltage_v": 1e4},
                         feedback=1e7, duration=0.05)
        traj = simulate(plan_for(doc))
        assert np.isfinite(traj.positions).all()

    def test_response_exact_under_dt_halving(self):
        # The propagator is exact, so halving dt must not move the
        # steady-state response beyond roundoff-level differences.
        amps = []
        for dt in (2.5e-7, 1.25e-7):
            doc = config_doc(pressure_mbar=0.0, charge=9,
                             drive={"mode": "ac", "voltage_v": 1e3,
                                    "ac_frequency_khz": 57.3},
                             feedback=200.0, duration=0.2)
            doc["simulation"]["dt_s"] = dt
            traj = simulate(plan_for(doc))
            amps.append(steady_state_amplitude(traj, OMEGA_Z)[0])
        assert amps[0] == pytest.approx(amps[1], rel=1e-6)


class TestDemodulation:
    def test_rejects_beyond_nyquist(self):
        traj = simulate(plan_for(config_doc(duration=0.01)))
        with pytest.raises(DomainError):
            steady_state_amplitude(traj, math.pi / traj.dt)

    def test_requires_twenty_periods(self):
        traj = simulate(plan_for(config_doc(duration=0.001)))
        with pytest.raises(InsufficientDataError):
            steady_state_amplitude(traj, 2.0 * math.pi * 5e3)


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        plan = plan_for(config_doc(duration=0.01), seed=3, record_velocity=True)
        traj = simulate(plan)
        path = tmp_path / "traj.csv"
        save_trajectory(traj, path)
        back = load_trajectory(path)
        assert back.seed == traj.seed
        assert back.dt == traj.dt
        np.testing.assert_allclose(back.positions, traj.positions, rtol=1e-15)
        np.testing.assert_allclose(back.velocities, traj.velocities, rtol=1e-15)
        assert back.config == traj.config
