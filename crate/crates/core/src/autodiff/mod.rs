//! Taylor-mode time derivatives and reverse-mode parameter gradients.

mod gradcheck;
mod real;
mod tape;
mod taylor;

pub use gradcheck::{central_difference, grad_check, GradCheck};
pub use real::{sigmoid, softplus, Real};
pub use tape::{Adjoints, NodeId, Op, Tape, Var};
pub use taylor::{seed_input, taylor_apply, Primitive, Taylor2, Unary};
