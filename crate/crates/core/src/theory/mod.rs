//! Certificate quantities and the reaching-time law.
//!
//! Everything here is evaluated on grids or by sampling: extrema over a
//! state grid stand in for the true extrema over a region.

mod certificate;
mod grid;
mod reaching;

pub use certificate::{
    certify, compute_d_pbar_and_dmax, compute_delta, compute_superlevel_and_vmax, compute_tau,
    compute_tau_fallback, compute_v_min, decay_envelope, fit_certificate, sample_states_within,
    Certificate, CertificateFit, CertificateQuantities, CertificateReport, CertifyConfig,
    FallbackTime, FitConfig,
};
pub use grid::{ActionGrid, StateGrid};
pub use reaching::{
    corollary_lower_bound, reaching_time_cdf, reaching_time_cdf_detailed, reaching_time_cdf_table,
    sample_acceptance_count, sample_t_rho_bar, sampling_horizon, t_rho_bar_from_uniforms,
    TruncatedProduct, PRODUCT_CUTOFF, SAMPLING_RESIDUAL,
};
