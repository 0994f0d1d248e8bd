//! Type checking and evaluation.
//!
//! Type checking resolves identifiers (constants are inlined, variables become
//! slot indices), inserts int-to-real promotions and produces a [`TypedModel`]
//! whose expressions evaluate directly over a valuation slice.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::ast::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Type {
    Int,
    Real,
    Bool,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::Int => "int",
            Type::Real => "real",
            Type::Bool => "bool",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl Value {
    pub fn as_real(self) -> f64 {
        match self {
            Value::Int(v) => v as f64,
            Value::Real(v) => v,
            Value::Bool(b) => {
                if b {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn as_int(self) -> i64 {
        match self {
            Value::Int(v) => v,
            Value::Real(v) => v as i64,
            Value::Bool(b) => b as i64,
        }
    }

    pub fn as_bool(self) -> bool {
        match self {
            Value::Bool(b) => b,
            Value::Int(v) => v != 0,
            Value::Real(v) => v != 0.0,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Real(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("type error in {context}: expected {expected}, found {found} in `{expr}`")]
pub struct TypeError {
    pub context: String,
    pub expr: String,
    pub expected: String,
    pub found: Type,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("division by zero in `{0}`")]
    DivisionByZero(Arc<str>),
    #[error("integer overflow in `{0}`")]
    Overflow(Arc<str>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Arith {
    Add,
    Sub,
    Mul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    fn holds(self, ord: Option<std::cmp::Ordering>) -> bool {
        use std::cmp::Ordering::*;
        match (self, ord) {
            (_, None) => self == Cmp::Ne,
            (Cmp::Eq, Some(o)) => o == Equal,
            (Cmp::Ne, Some(o)) => o != Equal,
            (Cmp::Lt, Some(o)) => o == Less,
            (Cmp::Le, Some(o)) => o != Greater,
            (Cmp::Gt, Some(o)) => o == Greater,
            (Cmp::Ge, Some(o)) => o != Less,
        }
    }
}

/// A resolved, typed expression.
#[derive(Debug, Clone)]
enum Node {
    Const(Value),
    Var(usize),
    /// Promote an int-typed child to real.
    ToReal(Box<Node>),
    Neg(Box<Node>, Type),
    Not(Box<Node>),
    Arith(Arith, Box<Node>, Box<Node>, Type, Arc<str>),
    Div(Box<Node>, Box<Node>, Arc<str>),
    Cmp(Cmp, Box<Node>, Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Cond(Box<Node>, Box<Node>, Box<Node>),
    MinMax(bool, Vec<Node>, Type),
    Floor(Box<Node>, bool, Arc<str>),
    Mod(Box<Node>, Box<Node>, Arc<str>),
}

/// A type-checked expression bound to a model's variable layout.
#[derive(Debug, Clone)]
pub struct TypedExpr {
    node: Node,
    ty: Type,
    source: Arc<str>,
}

impl TypedExpr {
    pub fn ty(&self) -> Type {
        self.ty
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates over a valuation indexed in variable declaration order.
    pub fn eval(&self, valuation: &[i32]) -> Result<Value, EvalError> {
        eval(&self.node, valuation)
    }

    pub fn eval_bool(&self, valuation: &[i32]) -> Result<bool, EvalError> {
        self.eval(valuation).map(Value::as_bool)
    }

    pub fn eval_real(&self, valuation: &[i32]) -> Result<f64, EvalError> {
        self.eval(valuation).map(Value::as_real)
    }

    pub fn eval_int(&self, valuation: &[i32]) -> Result<i64, EvalError> {
        self.eval(valuation).map(Value::as_int)
    }
}

fn eval(node: &Node, val: &[i32]) -> Result<Value, EvalError> {
    Ok(match node {
        Node::Const(v) => *v,
        Node::Var(i) => Value::Int(val[*i] as i64),
        Node::ToReal(e) => Value::Real(eval(e, val)?.as_real()),
        Node::Neg(e, ty) => match ty {
            Type::Int => Value::Int(eval(e, val)?.as_int().wrapping_neg()),
            _ => Value::Real(-eval(e, val)?.as_real()),
        },
        Node::Not(e) => Value::Bool(!eval(e, val)?.as_bool()),
        Node::Arith(op, l, r, ty, src) => {
            let (a, b) = (eval(l, val)?, eval(r, val)?);
            match ty {
                Type::Int => {
                    let (a, b) = (a.as_int(), b.as_int());
                    let v = match op {
                        Arith::Add => a.checked_add(b),
                        Arith::Sub => a.checked_sub(b),
                        Arith::Mul => a.checked_mul(b),
                    };
                    Value::Int(v.ok_or_else(|| EvalError::Overflow(src.clone()))?)
                }
                _ => {
                    let (a, b) = (a.as_real(), b.as_real());
                    Value::Real(match op {
                        Arith::Add => a + b,
                        Arith::Sub => a - b,
                        Arith::Mul => a * b,
                    })
                }
            }
        }
        Node::Div(l, r, src) => {
            let a = eval(l, val)?.as_real();
            let b = eval(r, val)?.as_real();
            if b == 0.0 {
                return Err(EvalError::DivisionByZero(src.clone()));
            }
            Value::Real(a / b)
        }
        Node::Cmp(op, l, r) => {
            let (a, b) = (eval(l, val)?, eval(r, val)?);
            let ord = match (a, b) {
                (Value::Int(x), Value::Int(y)) => Some(x.cmp(&y)),
                (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(&y)),
                (x, y) => x.as_real().partial_cmp(&y.as_real()),
            };
            Value::Bool(op.holds(ord))
        }
        Node::And(l, r) => Value::Bool(eval(l, val)?.as_bool() && eval(r, val)?.as_bool()),
        Node::Or(l, r) => Value::Bool(eval(l, val)?.as_bool() || eval(r, val)?.as_bool()),
        Node::Cond(c, t, e) => {
            if eval(c, val)?.as_bool() {
                eval(t, val)?
            } else {
                eval(e, val)?
            }
        }
        Node::MinMax(is_max, args, ty) => {
            let mut acc = eval(&args[0], val)?;
            for a in &args[1..] {
                let v = eval(a, val)?;
                acc = match ty {
                    Type::Int => {
                        let (x, y) = (acc.as_int(), v.as_int());
                        Value::Int(if *is_max { x.max(y) } else { x.min(y) })
                    }
                    _ => {
                        let (x, y) = (acc.as_real(), v.as_real());
                        Value::Real(if *is_max { x.max(y) } else { x.min(y) })
                    }
                };
            }
            acc
        }
        Node::Floor(e, is_ceil, src) => {
            let x = eval(e, val)?.as_real();
            let y = if *is_ceil { x.ceil() } else { x.floor() };
            if !(y >= i64::MIN as f64 && y < i64::MAX as f64) {
                return Err(EvalError::Overflow(src.clone()));
            }
            Value::Int(y as i64)
        }
        Node::Mod(l, r, src) => {
            let (a, b) = (eval(l, val)?.as_int(), eval(r, val)?.as_int());
            if b == 0 {
                return Err(EvalError::DivisionByZero(src.clone()));
            }
            Value::Int(a.rem_euclid(b))
        }
    })
}

#[derive(Debug, Clone)]
pub struct TypedVariable {
    pub name: String,
    pub lower: i32,
    pub upper: i32,
    pub init: i32,
}

#[derive(Debug, Clone)]
pub struct TypedAlternative {
    pub probability: TypedExpr,
    pub reward: TypedExpr,
    /// `(variable slot, new value)` pairs.
    pub updates: Vec<(usize, TypedExpr)>,
}

#[derive(Debug, Clone)]
pub struct TypedCommand {
    pub guard: TypedExpr,
    pub alternatives: Vec<TypedAlternative>,
}

#[derive(Debug, Clone)]
pub struct TypedProperty {
    pub kind: PropertyKind,
    pub direction: Direction,
    pub target: TypedExpr,
}

#[derive(Debug, Clone)]
pub struct TypedPartition {
    pub expr: TypedExpr,
    pub bound: u32,
}

/// A model ready for state-space expansion.
#[derive(Debug, Clone)]
pub struct TypedModel {
    pub variables: Vec<TypedVariable>,
    pub commands: Vec<TypedCommand>,
    pub properties: Vec<TypedProperty>,
    pub partition: TypedPartition,
}

struct Checker<'a> {
    ast: &'a ModelAst,
}

impl Checker<'_> {
    fn check(&self, e: &Expr, ctx: &str) -> Result<(Node, Type), TypeError> {
        let mismatch = |expr: &Expr, expected: &str, found: Type| TypeError {
            context: ctx.to_string(),
            expr: expr.to_string(),
            expected: expected.to_string(),
            found,
        };
        let numeric = |expr: &Expr| -> Result<(Node, Type), TypeError> {
            let (n, t) = self.check(expr, ctx)?;
            if t == Type::Bool {
                Err(mismatch(expr, "int or real", t))
            } else {
                Ok((n, t))
            }
        };
        let boolean = |expr: &Expr| -> Result<Node, TypeError> {
            let (n, t) = self.check(expr, ctx)?;
            if t != Type::Bool {
                Err(mismatch(expr, "bool", t))
            } else {
                Ok(n)
            }
        };
        let src: Arc<str> = Arc::from(e.to_string());
        Ok(match e {
            Expr::Int(v) => (Node::Const(Value::Int(*v)), Type::Int),
            Expr::Real(v) => (Node::Const(Value::Real(*v)), Type::Real),
            Expr::Bool(b) => (Node::Const(Value::Bool(*b)), Type::Bool),
            Expr::Ident(name) => {
                if let Some(i) = self.ast.variables.iter().position(|v| &v.name == name) {
                    (Node::Var(i), Type::Int)
                } else if let Some(c) = self.ast.constants.iter().find(|c| &c.name == name) {
                    match c.value {
                        Literal::Int(v) => (Node::Const(Value::Int(v)), Type::Int),
                        Literal::Real(v) => (Node::Const(Value::Real(v)), Type::Real),
                        Literal::Bool(b) => (Node::Const(Value::Bool(b)), Type::Bool),
                    }
                } else {
                    return Err(TypeError {
                        context: ctx.to_string(),
                        expr: name.clone(),
                        expected: "declared identifier".into(),
                        found: Type::Int,
                    });
                }
            }
            Expr::Unary(UnOp::Neg, inner) => {
                let (n, t) = numeric(inner)?;
                (Node::Neg(Box::new(n), t), t)
            }
            Expr::Unary(UnOp::Not, inner) => (Node::Not(Box::new(boolean(inner)?)), Type::Bool),
            Expr::Binary(op, l, r) => match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul => {
                    let (ln, lt) = numeric(l)?;
                    let (rn, rt) = numeric(r)?;
                    let ty = join(lt, rt);
                    let a = match op {
                        BinOp::Add => Arith::Add,
                        BinOp::Sub => Arith::Sub,
                        _ => Arith::Mul,
                    };
                    (
                        Node::Arith(a, Box::new(promote(ln, lt, ty)), Box::new(promote(rn, rt, ty)), ty, src),
                        ty,
                    )
                }
                BinOp::Div => {
                    let (ln, _) = numeric(l)?;
                    let (rn, _) = numeric(r)?;
                    (Node::Div(Box::new(ln), Box::new(rn), src), Type::Real)
                }
                BinOp::And | BinOp::Or => {
                    let (ln, rn) = (Box::new(boolean(l)?), Box::new(boolean(r)?));
                    if *op == BinOp::And {
                        (Node::And(ln, rn), Type::Bool)
                    } else {
                        (Node::Or(ln, rn), Type::Bool)
                    }
                }
                _ => {
                    let (ln, lt) = self.check(l, ctx)?;
                    let (rn, rt) = self.check(r, ctx)?;
                    let cmp = match op {
                        BinOp::Eq => Cmp::Eq,
                        BinOp::Ne => Cmp::Ne,
                        BinOp::Lt => Cmp::Lt,
                        BinOp::Le => Cmp::Le,
                        BinOp::Gt => Cmp::Gt,
                        _ => Cmp::Ge,
                    };
                    let equality = matches!(cmp, Cmp::Eq | Cmp::Ne);
                    if (lt == Type::Bool) != (rt == Type::Bool) {
                        let (bad, found) = if lt == Type::Bool { (r, rt) } else { (l, lt) };
                        return Err(mismatch(bad, "operands of the same kind", found));
                    }
                    if lt == Type::Bool && !equality {
                        return Err(mismatch(l, "int or real", lt));
                    }
                    (Node::Cmp(cmp, Box::new(ln), Box::new(rn)), Type::Bool)
                }
            },
            Expr::Call(func, args) => match func {
                Func::Min | Func::Max => {
                    let mut nodes = Vec::with_capacity(args.len());
                    let mut ty = Type::Int;
                    for a in args {
                        let (n, t) = numeric(a)?;
                        ty = join(ty, t);
                        nodes.push((n, t));
                    }
                    let nodes = nodes.into_iter().map(|(n, t)| promote(n, t, ty)).collect();
                    (Node::MinMax(*func == Func::Max, nodes, ty), ty)
                }
                Func::Floor | Func::Ceil => {
                    let (n, _) = numeric(&args[0])?;
                    (Node::Floor(Box::new(n), *func == Func::Ceil, src), Type::Int)
                }
                Func::Mod => {
                    let int = |expr: &Expr| -> Result<Node, TypeError> {
                        let (n, t) = self.check(expr, ctx)?;
                        if t != Type::Int {
                            Err(mismatch(expr, "int", t))
                        } else {
                            Ok(n)
                        }
                    };
                    let (a, b) = (int(&args[0])?, int(&args[1])?);
                    (Node::Mod(Box::new(a), Box::new(b), src), Type::Int)
                }
            },
            Expr::Cond(c, t, el) => {
                let cn = boolean(c)?;
                let (tn, tt) = self.check(t, ctx)?;
                let (en, et) = self.check(el, ctx)?;
                let ty = if tt == et {
                    tt
                } else if tt != Type::Bool && et != Type::Bool {
                    Type::Real
                } else {
                    return Err(mismatch(el, &tt.to_string(), et));
                };
                (
                    Node::Cond(Box::new(cn), Box::new(promote(tn, tt, ty)), Box::new(promote(en, et, ty))),
                    ty,
                )
            }
        })
    }

    fn typed(&self, e: &Expr, ctx: &str, want: Type) -> Result<TypedExpr, TypeError> {
        let (node, ty) = self.check(e, ctx)?;
        let ok = ty == want || (want == Type::Real && ty == Type::Int);
        if !ok {
            return Err(TypeError {
                context: ctx.to_string(),
                expr: e.to_string(),
                expected: want.to_string(),
                found: ty,
            });
        }
        Ok(TypedExpr {
            node: promote(node, ty, want),
            ty: want,
            source: Arc::from(e.to_string()),
        })
    }
}

fn join(a: Type, b: Type) -> Type {
    if a == Type::Real || b == Type::Real {
        Type::Real
    } else {
        Type::Int
    }
}

fn promote(node: Node, from: Type, to: Type) -> Node {
    if from == Type::Int && to == Type::Real {
        match node {
            Node::Const(v) => Node::Const(Value::Real(v.as_real())),
            n => Node::ToReal(Box::new(n)),
        }
    } else {
        node
    }
}

/// Type-checks a model together with the properties and partitioning to use.
///
/// Guards and targets must be boolean, probabilities and rewards real (ints
/// are promoted), updates and the partition expression integer.
pub fn type_check(
    ast: &ModelAst,
    props: &[PropertySpec],
    part: &PartitionSpec,
) -> Result<TypedModel, TypeError> {
    let ck = Checker { ast };
    let variables = ast
        .variables
        .iter()
        .map(|v| TypedVariable {
            name: v.name.clone(),
            lower: v.lower,
            upper: v.upper,
            init: v.init,
        })
        .collect();
    let mut commands = Vec::with_capacity(ast.commands.len());
    for (ci, cmd) in ast.commands.iter().enumerate() {
        let guard = ck.typed(&cmd.guard, &format!("guard of command {}", ci + 1), Type::Bool)?;
        let mut alternatives = Vec::with_capacity(cmd.alternatives.len());
        for (ai, alt) in cmd.alternatives.iter().enumerate() {
            let where_ = format!("command {}, alternative {}", ci + 1, ai + 1);
            let probability =
                ck.typed(&alt.probability, &format!("probability of {where_}"), Type::Real)?;
            let reward = ck.typed(&alt.reward, &format!("reward of {where_}"), Type::Real)?;
            let mut updates = Vec::with_capacity(alt.updates.len());
            for u in &alt.updates {
                let slot = ast
                    .variables
                    .iter()
                    .position(|v| v.name == u.var)
                    .ok_or_else(|| TypeError {
                        context: format!("update of {where_}"),
                        expr: u.var.clone(),
                        expected: "declared variable".into(),
                        found: Type::Int,
                    })?;
                let value =
                    ck.typed(&u.value, &format!("update of `{}` in {where_}", u.var), Type::Int)?;
                updates.push((slot, value));
            }
            alternatives.push(TypedAlternative {
                probability,
                reward,
                updates,
            });
        }
        commands.push(TypedCommand {
            guard,
            alternatives,
        });
    }
    let properties = props
        .iter()
        .map(|p| {
            Ok(TypedProperty {
                kind: p.kind,
                direction: p.direction,
                target: ck.typed(&p.target, &format!("target of `{p}`"), Type::Bool)?,
            })
        })
        .collect::<Result<_, TypeError>>()?;
    let partition = TypedPartition {
        expr: ck.typed(&part.expr, "partition expression", Type::Int)?,
        bound: part.bound,
    };
    Ok(TypedModel {
        variables,
        commands,
        properties,
        partition,
    })
}
