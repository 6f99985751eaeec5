//! Conservation-law densities: generation, normal forms, evaluation and
//! differentiation.

mod canon;
mod energy;
mod eval;
mod jet;
mod expr;
mod matsuno;

pub use energy::{coefficient_bits, energy, energy_truncated, erase_hilbert, gradings, normalization, K_MAX, MATSUNO_NONLINEARITY};
pub use expr::{Expr, ExprNode};
pub use matsuno::{matsuno_w, matsuno_w_truncated, matsuno_w_with_limit, product_constant, DEFAULT_N_MAX};
pub use canon::{balance_higher, canonicalize, canonicalize_cubic, monomialize, star_n};
pub use eval::{eval_density, eval_expr, eval_expr_with, eval_increment, grad_integral, gradient_expr, pairing, EvalOptions, DEFAULT_GRID_CAP};
pub use jet::{energies, energies_with_derivative, energy_increments, energy_jet, jet_grid_len, EnergyJet};
