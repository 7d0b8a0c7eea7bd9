#![allow(clippy::result_large_err, clippy::needless_range_loop)]

pub mod affine;
pub mod linalg;
pub mod lp;
pub mod poly;
pub mod rational;
pub mod polytope;
pub mod integrate;
pub mod logint;
pub mod pl;
pub mod quadrature;
pub mod functionals;
pub mod weights;
pub mod fibration;
pub mod mabuchi;
pub mod search;
pub mod io;
