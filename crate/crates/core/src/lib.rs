//! Inverse source problems in a two-layered medium from phaseless far-field
//! data: lattice construction, forward synthesis, phase retrieval with point
//! references and Fourier inversion.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod error;
pub mod forward;
pub mod geom;
pub mod inversion;
pub mod io;
pub mod lattice;
pub mod medium;
pub mod metrics;
pub mod quadrature;
pub mod retrieval;
pub mod scalar;
pub mod sources;

pub use error::{Error, Result};
pub use forward::{
    default_rule, far_field_point, far_field_point_at, far_field_source, synthesize_dataset, synthesize_phaseless,
    PreparedSource,
};
pub use geom::{Dim, Index, Point};
pub use inversion::{
    box_overlap, coefficient_from_farfield, complete_by_symmetry, invert, oracle_table, reconstruct, zero_mode_correction,
    InversionOptions, Provenance, ProvenanceCounts, ZeroModeScheme,
};
pub use lattice::{build_admissible_set, LatticeParams, ZeroDirection};
pub use metrics::{add_noise, err_at_index, err_inf, err_l2, grid_rel_l2, MetricRecord, NoiseScope, NoiseSpec};
pub use quadrature::{gauss_legendre_1d, integrate, resolving_orders};
pub use retrieval::{
    conditioning, retrieval_rhs, retrieve_dataset, scaling_factors, solve_phase, Placement, RetrievalFlag,
    RetrievalOptions,
};
pub use scalar::Real;
pub use sources::{analytic_2d, analytic_3d, eval_source, fourier_coefficient_oracle, sample_grid, Source};

pub type Medium = medium::Medium<f64>;
pub type Direction = medium::Direction<f64>;
pub type LatticeEntry = lattice::LatticeEntry<f64>;
pub type AdmissibleSet = lattice::AdmissibleSet<f64>;
pub type SourceBox = quadrature::SourceBox<f64>;
pub type QuadratureRule = quadrature::QuadratureRule<f64>;
pub type FourierSeries = sources::FourierSeries<f64>;
pub type GridField = sources::GridField<f64>;
pub type FarFieldDataset = forward::FarFieldDataset<f64>;
pub type PhaselessRow = forward::PhaselessRow<f64>;
pub type PhaselessDataset = forward::PhaselessDataset<f64>;
pub type ReferenceConfig = retrieval::ReferenceConfig<f64>;
pub type ReferencePair = retrieval::ReferencePair<f64>;
pub type RetrievalReport = retrieval::RetrievalReport<f64>;
pub type CoefficientTable = inversion::CoefficientTable<f64>;
pub type Complex64 = num_complex::Complex<f64>;
