//! Certified global minimization of convex black-box functions on integer
//! lattices using secant-based conditional cuts.

pub mod bench;
pub mod geometry;
pub mod lattice;
pub mod milp_export;
pub mod problems;
mod scan;
pub mod solver;
pub mod underestimator;

pub use geometry::{check_poised, facet_halfspaces, fit_secant, ConeComplex, GeometryError, PoisedSet, Secant};
pub use lattice::{Domain, DomainError, LatticePoint};
pub use underestimator::{ActiveSet, EtaTable, TableError};
