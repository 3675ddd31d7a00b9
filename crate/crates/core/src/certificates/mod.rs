//! Sampled verification of weighted diagonal-dominance stability conditions,
//! weight search, and sufficient gain levels.
//!
//! Every verdict here holds on the sampled points only; a sampled maximum
//! under-estimates a supremum, so bounds derived from estimates should be
//! inflated (see [`DEFAULT_A_SAFETY`]).

mod bounds;
mod dominance;
mod network;
mod sampler;
mod weights;

pub use bounds::{required_gain_bound, required_gain_bound_dual, DEFAULT_A_SAFETY};
pub use dominance::{
    check_input_matrix, check_output_map, check_virtual_column, check_virtual_row, drift_column_allowance,
    drift_row_allowance, estimate_a, margins, CertificateReport, Condition, DominanceMode, WorstSample,
};
pub use network::{InputMatrixField, NetworkVirtual, OutputJacobianField};
pub use sampler::{
    ConstantField, ConstantJacobian, FnField, FnJacobian, Interval, MatrixField, SampleDomain, SamplePoint,
    VirtualJacobian, DEFAULT_SAMPLES,
};
pub use weights::{find_weights, perron_weights, WeightSolution, DEFAULT_WEIGHT_CAP};

use nalgebra::DMatrix;

/// Evaluates `field` over the sampling plan, for weight search.
pub fn collect_matrices(field: &dyn MatrixField, domain: &SampleDomain) -> Vec<DMatrix<f64>> {
    use rayon::prelude::*;
    (0..domain.samples)
        .into_par_iter()
        .map(|k| field.eval(&domain.point(k, field.r())))
        .collect()
}
