"""Trajectory generation for the driven, damped, thermally forced oscillator.

The equation of motion integrated here is

    z''(t) + Gamma_tot z'(t) + omega_z^2 z(t) = F_th(t)/m + (F_z/m) cos(w_AC t)

with Gamma_tot = Gamma_0 + delta_gamma (feedback enters as extra viscous
damping) and F_th white with force spectral density m k_B T0 Gamma_0 / pi
(double-sided, angular), i.e. the fluctuation-dissipation strength of the
gas damping alone.  The drive is the real part of the complex drive,
F_z cos(w_AC t), with phase origin at trajectory start; F_z carries the
cos(theta) projection of the Coulomb force onto the measured z axis.

Integration is not a truncated splitting scheme: the system is linear, so
the transition matrix exp(A dt) and the exact Gaussian increment
covariance (Van Loan construction) give a discretization that is exact in
distribution at any step size.  The deterministic drive response is added
in closed form.  This matters at the quality factors simulated here
(Q_total ~ 1e4-1e5): any O(dt^2) frequency bias of a splitting scheme is
large compared to the linewidth.

Randomness comes from numpy's counter-based Philox 4x64 bit generator
keyed by the plan seed; Gaussian draws use numpy's ziggurat
``standard_normal``.  Trajectories are bit-reproducible for a given
(plan, seed) on any platform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import expm

from .constants import BOLTZMANN
from .errors import ConfigError, DomainError, InsufficientDataError, IntegrationFailureError
from .config import ExperimentConfig, parse_config
from .model import coulomb_force

_CHUNK = 1 << 20

STABILITY_LIMIT = 0.1  # max allowed dt * omega_z


@dataclass(frozen=True)
class SimulationPlan:
    """One reproducible simulation run."""

    experiment: ExperimentConfig
    duration: float
    dt: float
    seed: int
    record_velocity: bool = False
    initial: str = "rest"  # rest | thermal

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be > 0", "/simulation/dt_s")
        if self.duration < self.dt:
            raise ConfigError("duration must be >= dt", "/simulation/duration_s")
        if self.dt * self.experiment.trap.omega_z > STABILITY_LIMIT:
            raise ConfigError(
                f"dt*omega_z = {self.dt * self.experiment.trap.omega_z:.3g} exceeds "
                f"stability guard {STABILITY_LIMIT}", "/simulation/dt_s")
        if self.initial not in ("rest", "thermal"):
            raise ConfigError("initial must be 'rest' or 'thermal'", "")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer", "/simulation/seed")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.duration / self.dt))


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled position series; sample k is at t = (k+1) dt."""

    dt: float
    positions: np.ndarray
    seed: int
    config: ExperimentConfig
    velocities: np.ndarray | None = None

    def __post_init__(self):
        self.positions.setflags(write=False)
        if self.velocities is not None:
            self.velocities.setflags(write=False)

    def __len__(self):
        return self.positions.size

    @property
    def times(self) -> np.ndarray:
        return (np.arange(1, self.positions.size + 1)) * self.dt

    @property
    def duration(self) -> float:
        return self.positions.size * self.dt


def thermal_kick_sigma(gas_temperature: float, mass: float, gamma0: float, dt: float) -> float:
    """Std dev of the thermal force impulse accumulated over one step.

    sqrt(2 k_B T0 m Gamma_0 dt) in N s; the sqrt(dt) scaling of white
    noise.  (The exact propagator below does not literally add this kick,
    but its small-dt velocity noise reduces to this impulse over mass.)
    """
    if gas_temperature < 0 or mass <= 0 or gamma0 < 0 or dt <= 0:
        raise DomainError("invalid thermal kick inputs")
    return math.sqrt(2.0 * BOLTZMANN * gas_temperature * mass * gamma0 * dt)


def _transition(omega0: float, gamma_total: float, q_v: float, dt: float):
    """Exact state transition matrix and noise Cholesky factor over dt.

    Van Loan (1978): for dx = A x dt + L dW with diffusion q_v on the
    velocity, exp([[ -A, L q L^T], [0, A^T]] dt) yields Phi = F22^T and
    Q = Phi @ F12.
    """
    a = np.array([[0.0, 1.0], [-omega0**2, -gamma_total]])
    if q_v == 0.0:
        return expm(a * dt), np.zeros((2, 2))
    qc = np.array([[0.0, 0.0], [0.0, q_v]])
    block = np.zeros((4, 4))
    block[:2, :2] = -a
    block[:2, 2:] = qc
    block[2:, 2:] = a.T
    f = expm(block * dt)
    phi = f[2:, 2:].T
    q = phi @ f[:2, 2:]
    q = 0.5 * (q + q.T)  # symmetrize before factoring
    # Guard tiny negative eigenvalues from roundoff.
    w, v = np.linalg.eigh(q)
    w = np.clip(w, 0.0, None)
    try:
        chol = np.linalg.cholesky(q)
    except np.linalg.LinAlgError:
        chol = v @ np.diag(np.sqrt(w))
    return phi, chol


@njit(cache=True)
def _propagate(z_out, v_out, normals, state, phi, chol, record_velocity):
    z, v = state[0], state[1]
    a11, a12, a21, a22 = phi[0, 0], phi[0, 1], phi[1, 0], phi[1, 1]
    l11, l21, l22 = chol[0, 0], chol[1, 0], chol[1, 1]
    l12 = chol[0, 1]
    n = z_out.size
    for k in range(n):
        e1 = normals[2 * k]
        e2 = normals[2 * k + 1]
        z_new = a11 * z + a12 * v + l11 * e1 + l12 * e2
        v_new = a21 * z + a22 * v + l21 * e1 + l22 * e2
        z, v = z_new, v_new
        z_out[k] = z
        if record_velocity:
            v_out[k] = v
    state[0], state[1] = z, v


def _deterministic_response(config: ExperimentConfig, times: np.ndarray,
                            want_velocity: bool):
    """Closed-form zero-initial-condition response to the drive program."""
    drive = config.drive
    if drive.mode == "none" or drive.voltage == 0.0:
        return None, None
    needle = config.needle
    m = config.particle.mass
    omega0 = config.trap.omega_z
    gamma = config.gamma_total
    f_z = math.cos(needle.angle) * coulomb_force(
        config.particle.charge, drive.voltage, needle, needle.distance)
    accel = f_z / m
    lam = gamma / 2.0
    omega_d_sq = omega0**2 - lam**2

    if drive.mode == "dc":
        z_p = accel / omega0**2
        z_h, v_h = _homogeneous(-z_p, 0.0, lam, omega_d_sq, omega0, times)
        z = z_p + z_h
        v = v_h if want_velocity else None
        return z, v

    w = drive.omega_ac
    denom = math.hypot(omega0**2 - w**2, gamma * w)
    amp = accel / denom
    phase = math.atan2(gamma * w, omega0**2 - w**2)
    z_ss = amp * np.cos(w * times - phase)
    h0 = -amp * math.cos(phase)
    hv0 = -amp * w * math.sin(phase)
    z_h, v_h = _homogeneous(h0, hv0, lam, omega_d_sq, omega0, times)
    z = z_ss + z_h
    v = (-amp * w * np.sin(w * times - phase) + v_h) if want_velocity else None
    return z, v


def _homogeneous(h0: float, hv0: float, lam: float, omega_d_sq: float,
                 omega0: float, times: np.ndarray):
    """Free decay from (h0, hv0); valid under-, over- and near-critically damped."""
    if abs(omega_d_sq) < 1e-12 * omega0**2:  # near-critical: series limit
        decay = np.exp(-lam * times)
        c1 = hv0 + lam * h0
        z = decay * (h0 + c1 * times)
        v = decay * (hv0 - (omega0**2 * h0 + lam * hv0) * times)
        return z, v
    if omega_d_sq > 0:
        wd = math.sqrt(omega_d_sq)
        decay = np.exp(-lam * times)
        cos_t = np.cos(wd * times)
        sinc_t = np.sin(wd * times) / wd
        z = decay * (h0 * cos_t + (hv0 + lam * h0) * sinc_t)
        v = decay * (hv0 * cos_t - (omega0**2 * h0 + lam * hv0) * sinc_t)
        return z, v
    # Overdamped: two real decaying exponentials, no intermediate cosh overflow.
    mu = math.sqrt(-omega_d_sq)
    s1, s2 = -lam + mu, -lam - mu
    a = (hv0 - s2 * h0) / (s1 - s2)
    b = (s1 * h0 - hv0) / (s1 - s2)
    e1 = np.exp(s1 * times)
    e2 = np.exp(s2 * times)
    z = a * e1 + b * e2
    v = a * s1 * e1 + b * s2 * e2
    return z, v


def simulate(plan: SimulationPlan) -> Trajectory:
    """Integrate the plan and return a reproducible trajectory."""
    config = plan.experiment
    m = config.particle.mass
    omega0 = config.trap.omega_z
    gamma0 = config.gamma0
    gamma_total = config.gamma_total
    t0 = config.environment.gas_temperature

    q_v = 2.0 * BOLTZMANN * t0 * gamma0 / m  # velocity diffusion rate
    phi, chol = _transition(omega0, gamma_total, q_v, plan.dt)

    rng = np.random.Generator(np.random.Philox(plan.seed))
    state = np.zeros(2)
    if plan.initial == "thermal":
        if gamma_total > 0 and gamma0 > 0:
            t_cm = t0 * gamma0 / gamma_total
            state[0] = math.sqrt(BOLTZMANN * t_cm / (m * omega0**2)) * rng.standard_normal()
            state[1] = math.sqrt(BOLTZMANN * t_cm / m) * rng.standard_normal()

    n = plan.n_steps
    positions = np.empty(n)
    velocities = np.empty(n) if plan.record_velocity else np.empty(0)

    done = 0
    while done < n:
        count = min(_CHUNK, n - done)
        normals = rng.standard_normal(2 * count)
        z_view = positions[done:done + count]
        v_view = velocities[done:done + count] if plan.record_velocity else velocities
        _propagate(z_view, v_view, normals, state, phi, chol, plan.record_velocity)
        if not np.isfinite(state).all():
            bad = done + int(np.argmax(~np.isfinite(z_view)))
            raise IntegrationFailureError("non-finite state during integration", bad)
        done += count

    times = (np.arange(1, n + 1)) * plan.dt
    z_det, v_det = _deterministic_response(config, times, plan.record_velocity)
    if z_det is not None:
        positions = positions + z_det
        if plan.record_velocity and v_det is not None:
            velocities = velocities + v_det

    return Trajectory(dt=plan.dt, positions=positions, seed=plan.seed, config=config,
                      velocities=velocities if plan.record_velocity else None)


def steady_state_amplitude(trajectory: Trajectory, omega_ac: float,
                           settle_fraction: float = 0.2) -> tuple[float, float]:
    """Lock-in quadrature estimate of the response at the drive frequency.

    Demodulates the post-settle window (trimmed to a whole number of drive
    periods) against cos/sin(w_AC t) and returns (amplitude, phase), phase
    being the lag of the response behind cos(w_AC t).
    """
    if omega_ac <= 0:
        raise DomainError("omega_ac must be > 0")
    if omega_ac * trajectory.dt >= math.pi:
        raise DomainError("omega_ac beyond Nyquist for this trajectory")
    if not 0 <= settle_fraction < 1:
        raise DomainError("settle_fraction must be in [0, 1)")

    n = len(trajectory)
    start = int(math.ceil(n * settle_fraction))
    window = n - start
    period_samples = 2.0 * math.pi / (omega_ac * trajectory.dt)
    n_periods = int(math.floor(window / period_samples))
    if n_periods < 20:
        raise InsufficientDataError(
            f"post-settle window holds {n_periods} drive periods; need >= 20")
    use = int(round(n_periods * period_samples))
    z = trajectory.positions[start:start + use]
    t = trajectory.times[start:start + use]
    cos_ref = np.cos(omega_ac * t)
    sin_ref = np.sin(omega_ac * t)
    x = 2.0 * np.mean(z * cos_ref)
    y = 2.0 * np.mean(z * sin_ref)
    return math.hypot(x, y), math.atan2(y, x)


def save_trajectory(trajectory: Trajectory, path) -> None:
    """CSV with header t_s,z_m[,v_ms] at 17 significant digits, plus a
    metadata sidecar JSON (<path>.meta.json) with config and seed."""
    cols = [trajectory.times, trajectory.positions]
    header = "t_s,z_m"
    if trajectory.velocities is not None:
        cols.append(trajectory.velocities)
        header += ",v_ms"
    data = np.column_stack(cols)
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")
    sidecar = {
        "config": trajectory.config.raw,
        "seed": trajectory.seed,
        "dt_s": trajectory.dt,
        "samples": len(trajectory),
    }
    with open(str(path) + ".meta.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_trajectory(path) -> Trajectory:
    with open(str(path) + ".meta.json") as fh:
        meta = json.load(fh)
    config = parse_config(meta["config"])
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    velocities = data[:, 2].copy() if data.shape[1] > 2 else None
    return Trajectory(dt=meta["dt_s"], positions=data[:, 1].copy(), seed=meta["seed"],
                      config=config, velocities=velocities)
