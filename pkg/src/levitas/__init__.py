"""levitas: force sensing with an optically levitated charged nanoparticle.

Simulation and analysis toolkit for a feedback-cooled nanosphere in an
optical trap used as a calibrated force sensor: Langevin dynamics, PSD
estimation and Lorentzian calibration fits, DC charge counting and AC
resonant force extraction, and sensitivity budgets.
"""

__version__ = "0.1.0"

from .constants import BOLTZMANN, ELEMENTARY_CHARGE
from .errors import (
    AnalysisError,
    ConfigError,
    DomainError,
    FitFailureError,
    IndeterminateChargeError,
    InsufficientDataError,
    IntegrationFailureError,
    InversionError,
    LevitasError,
    NoDetectableForceError,
    NoPeakError,
    SingularityError,
    UsageError,
)
from .model import (
    DriveProgram,
    Environment,
    NeedleSpec,
    ParticleSpec,
    TrapSpec,
    ac_response_psd,
    ac_thermal_force_sq,
    cm_temperature,
    coulomb_force,
    dc_displacement,
    epstein_damping,
    epstein_radius,
    mass_from_radius,
    quality_factor,
    sql_sensitivity,
    thermal_force_sensitivity,
    tip_charge,
)
from .config import (
    AcSweepPlan,
    DcSweepPlan,
    ExperimentConfig,
    load_config,
    parse_config,
    serialize_config,
)
from .simulate import (
    SimulationPlan,
    Trajectory,
    load_trajectory,
    save_trajectory,
    simulate,
    steady_state_amplitude,
)
from .spectral import (
    FitResult,
    PsdEstimate,
    analytic_psd,
    fit_lorentzian,
    particle_params_from_fit,
    welch_psd,
    welch_psd_samples,
)
from .pipeline import (
    AcSweepRecord,
    ChargeEstimate,
    DcSweepRecord,
    ForceEstimate,
    ac_charge_estimate,
    dc_charge_estimate,
    enhancement_factor,
    fit_detuning_sweep,
    min_detectable_force,
    propagate_pressure_uncertainty,
    run_ac_campaign,
    run_dc_campaign,
)
