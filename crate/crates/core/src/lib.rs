//! Exact Fourier expansions of Siegel modular forms of degree two and the
//! associated index-one Jacobi forms at small levels.

pub mod catalog;
pub mod coeff;
pub mod error;
pub mod expr;
pub mod jacobi;
pub mod operators;
pub mod series;
pub mod suite;
pub mod symplectic;
pub mod theta;

pub use coeff::{CycRat, Rat};
pub use error::{Error, Result};
pub use expr::{Engine, Expr, ExprRef, Value};
pub use operators::WeightedForm;
pub use series::{Deriv, ExpKey, FourierSeries, Sym2Comp, Sym2Series};
pub use symplectic::{GroupId, SymplecticMat};
pub use theta::ThetaChar;
