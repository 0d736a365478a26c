//! Chaos expansions against Gaussian and Poisson reference measures.
//!
//! Densities are stored as coefficient vectors in the monic Hermite or
//! Charlier basis. Second quantization scales coefficient `j` by `λ^j`, the
//! Wick product is the Cauchy product of coefficients, and with these two
//! operations the densities of mollified normalized sums (Gaussian) and
//! mollified thinned sums (Poisson) become closed-form. The crate measures
//! their L¹ distance to the reference measure, compares it with explicit
//! upper bounds, and checks every identity against brute-force oracles.

pub mod chaos;
pub mod cli;
pub mod experiment;
pub mod gaussian_llt;
pub mod oracles;
pub mod orthobasis;
pub mod poisson_lsn;
pub mod sampling;
pub mod verification;
