//! Symbolic regression with categorical variables.
//!
//! Parameter terminals come in three sharing levels: fully shared across all
//! category-value combinations, partially shared (one value per value of a
//! single category), and non-shared (one value per combination).

pub mod data;
pub mod expr;
pub mod fit;
pub mod procession;
pub mod search;
pub mod synthetic;
