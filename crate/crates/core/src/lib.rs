pub mod error;
pub mod function_space;
pub mod operators;
pub mod streams;
pub mod special;
pub mod fpcr;
pub mod inference;
pub mod metrics;
pub mod simulation;
pub mod validation;
