//! The guarded-command model language: syntax, parsing, type checking and
//! expression evaluation.
//!
//! ```text
//! const p = 0.5;
//! var c : 0..2 init 0;
//! [] c=0 -> p : (c'=1) reward 1 + 1-p : (c'=2);
//! property heads = Pmax=? [F c=2];
//! partition c+1 bound 3;
//! ```

mod ast;
mod lexer;
mod parser;
mod typed;

pub use ast::*;
pub use lexer::Pos;
pub use parser::{parse_expr, parse_model, parse_partition, parse_property, ParseError, ParseErrors};
pub use typed::{
    type_check, EvalError, Type, TypeError, TypedAlternative, TypedCommand, TypedExpr,
    TypedModel, TypedPartition, TypedProperty, TypedVariable, Value,
};
