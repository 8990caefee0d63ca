pub mod algebra;
pub mod covariance;
pub mod dyson;
pub mod error;
pub mod evolution;
pub mod measures;
pub mod randmat;
pub mod random;
pub mod verify;

pub use algebra::{ComplexMatrix, HalfPlanePoint, HermitianMatrix};
pub use covariance::{CovarianceMap, CovariancePath, LinearMap, MatrixMap, PositivityClass};
pub use dyson::{DysonSolution, SolverConfig};
pub use error::{Error, Result};
pub use num_complex::Complex64;
