//! Independent and centralised multi-agent learners arbitrated by a learned
//! switching controller, plus an exact dynamic-programming oracle for the
//! switching problem.

pub mod env;
pub mod grid;
pub mod harness;
pub mod learners;
pub mod oracle;
pub mod replay;
pub mod switch;
