//! Level structure of the molecular and atomic ions: state enumeration,
//! term energies, the line catalog, transition strengths, dynamic
//! polarizabilities and ac-Stark shifts.

mod atomic;
mod catalog;
mod polarizability;
mod state;
mod strength;
mod terms;

pub use atomic::{
    atomic_polarizability, differential_polarizability, AtomicLevel, AtomicLevelModel, AtomicPolarizability,
    AtomicPolarizabilityTable, PolarizabilityUse,
};
pub use catalog::{
    build_line_catalog, generate_lines, parse_far_bands, CatalogSource, FarBand, LineCatalog, StrengthSource,
    TransitionLine,
};
pub use polarizability::{
    dynamic_polarizability, molecular_stark_shift, PolarizabilityOptions, ResonantTerm, StateResponse,
};
pub use state::{enumerate_states, MolecularState};
pub use strength::{
    angular_factor, band_degeneracy, band_strength_si, line_strength_au, transition_strength, Polarization,
};
pub use terms::{pi_term_energy, sigma_term_energy, PiConstants, SigmaConstants, SpectroscopicConstants};
