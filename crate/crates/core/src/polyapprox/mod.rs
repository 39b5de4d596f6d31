//! Polynomial machinery shared by the mechanisms.

mod bernstein;
mod chebyshev;
mod orpoly;
mod smoothing;
mod subgradient;

pub use bernstein::{
    basis_row, basis_row_deriv, bernstein_basis, bernstein_eval_fn, binomial,
    iterated_basis_weights, iterated_bernstein_eval, iterated_bernstein_eval_fn,
    BernsteinOperatorSpec, BernsteinSurface, GridIter, GridValues, IteratedOperator,
};
pub use chebyshev::{chebyshev_eval, chebyshev_monomial, ChebyshevSeries};
pub use orpoly::{build_or_polynomial, OrPolynomial};
pub use smoothing::{
    bernstein_deriv_coeffs, bernstein_deriv_coeffs_on, hbeta_deriv, hbeta_value, BernsteinPoly,
    DerivTarget, SmoothedPlus, THIRD_DERIV_CONST,
};
pub use subgradient::{
    kink_mixture_reconstruct, sample_q, Anchor, SubgradientSampler, BISECTION_TOL,
};
