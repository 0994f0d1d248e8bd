//! Untyped syntax tree of a model file, with a pretty-printer whose output
//! re-parses to the same tree.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&",
            BinOp::Or => "|",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 2,
            BinOp::And => 3,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Min,
    Max,
    Floor,
    Ceil,
    Mod,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Floor => "floor",
            Func::Ceil => "ceil",
            Func::Mod => "mod",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "min" => Func::Min,
            "max" => Func::Max,
            "floor" => Func::Floor,
            "ceil" => Func::Ceil,
            "mod" => Func::Mod,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Real(f64),
    Bool(bool),
    Ident(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    Cond(Box<Expr>, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Cond(..) => 1,
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Unary(..) => 7,
            _ => 8,
        }
    }

    /// True when the expression prints without any binary operator at top level.
    pub(crate) fn is_atomic(&self) -> bool {
        self.precedence() >= 7
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Real(v) => write!(f, "{v:?}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Ident(name) => f.write_str(name),
            Expr::Unary(op, e) => {
                f.write_str(match op {
                    UnOp::Neg => "-",
                    UnOp::Not => "!",
                })?;
                write_child(f, e, 7)
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                if op.is_comparison() {
                    write_child(f, l, p + 1)?;
                } else {
                    write_child(f, l, p)?;
                }
                write!(f, " {} ", op.symbol())?;
                write_child(f, r, p + 1)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::Cond(c, t, e) => {
                write_child(f, c, 2)?;
                f.write_str(" ? ")?;
                write_child(f, t, 2)?;
                f.write_str(" : ")?;
                write_child(f, e, 1)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(v) => write!(f, "{v}"),
            Literal::Real(v) => write!(f, "{v:?}"),
            Literal::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub value: Literal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableDecl {
    pub name: String,
    pub lower: i32,
    pub upper: i32,
    pub init: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub var: String,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alternative {
    pub probability: Expr,
    pub reward: Expr,
    pub updates: Vec<Update>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuardedCommand {
    pub guard: Expr,
    pub alternatives: Vec<Alternative>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyKind {
    ReachProbability,
    ExpectedReward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Max,
    Min,
}

impl Direction {
    pub fn dual(self) -> Direction {
        match self {
            Direction::Max => Direction::Min,
            Direction::Min => Direction::Max,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Max => "max",
            Direction::Min => "min",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertySpec {
    pub kind: PropertyKind,
    pub direction: Direction,
    pub target: Expr,
}

impl fmt::Display for PropertySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = match self.kind {
            PropertyKind::ReachProbability => 'P',
            PropertyKind::ExpectedReward => 'R',
        };
        write!(f, "{letter}{}=? [F {}]", self.direction, self.target)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedProperty {
    pub name: String,
    pub spec: PropertySpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    pub expr: Expr,
    /// Upper bound `k` on partition ids.
    pub bound: u32,
}

impl PartitionSpec {
    /// Largest admissible bound: partition ids are stored as `i32` on disk.
    pub const MAX_BOUND: u32 = i32::MAX as u32;

    /// The trivial partitioning that puts every state into partition 1.
    pub fn single() -> Self {
        PartitionSpec {
            expr: Expr::Int(1),
            bound: 1,
        }
    }
}

impl fmt::Display for PartitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)?;
        if self.bound != Self::MAX_BOUND {
            write!(f, " bound {}", self.bound)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelAst {
    pub constants: Vec<ConstDecl>,
    pub variables: Vec<VariableDecl>,
    pub commands: Vec<GuardedCommand>,
    pub properties: Vec<NamedProperty>,
    pub partition: Option<PartitionSpec>,
}

impl ModelAst {
    pub fn property(&self, name: &str) -> Option<&PropertySpec> {
        self.properties
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.spec)
    }
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : ", self.probability)?;
        if self.updates.is_empty() {
            f.write_str("true")?;
        }
        for (i, u) in self.updates.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "({}'={})", u.var, u.value)?;
        }
        if self.reward != Expr::Int(0) {
            f.write_str(" reward ")?;
            if self.reward.is_atomic() {
                write!(f, "{}", self.reward)?;
            } else {
                write!(f, "({})", self.reward)?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for ModelAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.constants {
            writeln!(f, "const {} = {};", c.name, c.value)?;
        }
        for v in &self.variables {
            writeln!(
                f,
                "var {} : {}..{} init {};",
                v.name, v.lower, v.upper, v.init
            )?;
        }
        for cmd in &self.commands {
            write!(f, "[] {} -> ", cmd.guard)?;
            for (i, alt) in cmd.alternatives.iter().enumerate() {
                if i > 0 {
                    f.write_str(" + ")?;
                }
                write!(f, "{alt}")?;
            }
            writeln!(f, ";")?;
        }
        for p in &self.properties {
            writeln!(f, "property {} = {};", p.name, p.spec)?;
        }
        if let Some(part) = &self.partition {
            writeln!(f, "partition {part};")?;
        }
        Ok(())
    }
}
