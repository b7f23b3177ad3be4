//! Second derivatives of energies along Wasserstein geodesics, the
//! constants of restricted lambda-convexity, and a counterexample to
//! global convexity of the Dirichlet energy.

mod certify;
mod constants;
mod counterexample;
mod hessian;

pub use certify::{
    certify, interpolant_bounds, w2_lower_bound, CertifyOptions, ConvexityReport, InterpolantBounds, Witness,
};
pub use constants::{
    chain_lambda, interpolation_constants, interpolation_d, lambda_estimate, zeta_six_fifths, InterpolationConstants,
    LambdaEstimate,
};
pub use counterexample::{
    counterexample, exact_values, find_witness, raw_b, raw_f_end, raw_profile, CounterexamplePair, RAW_A_UNHALVED,
    RAW_MASS,
};
pub use hessian::{
    hessian, hessian_dirichlet, hessian_dirichlet_cubic, hessian_dirichlet_slope, hessian_extrapolated,
    hessian_general, hessian_numeric, partials_of, HessianQuadraticForm,
};
