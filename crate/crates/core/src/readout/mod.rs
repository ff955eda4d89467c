//! Blue-sideband Rabi thermometry: signal synthesis, fitting, shift
//! calibration and extraction.

mod calibration;
mod distribution;
mod fit;
mod optimize;
mod signal;

pub use calibration::{
    build_calibration, extract_shift, iterate_partner_correction, read_bundle, write_bundle, CalibrationSet,
    ExcitationModel, PartnerCorrection, PartnerIterate, PipelineConfig, ReadoutConfig, ShiftEstimate,
    DEFAULT_CALIBRATION_SHIFTS_HZ, PARTNER_MAX_ITERATIONS,
};
pub use distribution::{DistributionKind, MotionalDistribution};
pub use fit::{fit_rabi, RabiFit};
pub use signal::{
    bsb_curve, ground_state_frequency, probe_times, synthesize_bsb_signal, BsbParams, CouplingModel, RabiSignal,
    DEFAULT_SHOTS,
};
