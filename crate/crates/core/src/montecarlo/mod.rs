//! Matrix sampling of eigenvalue minor processes (Haar-rotated fixed spectrum,
//! GUE) and box-count checks of the determinantal kernels.

mod estimate;
mod linalg;
mod sampling;

pub use estimate::{
    estimate_boxes, model_m1, model_m2, verify_determinantal, BoxEstimate, CorrelationKernel, CountBox, GueKernel,
    VerificationReport, VerificationRow,
};
pub use linalg::{hermitian_eigs, sample_gue, sample_haar_unitary, CMatrix};
pub use sampling::{
    minor_pattern, sample_gue_minors, sample_minor_process, sample_stream, BatchHeader, SampleBatch, SampleSource,
};
