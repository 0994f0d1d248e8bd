//! Recursive descent parser for model files.
//!
//! Statements are `;`-terminated, which is also the recovery point: after a
//! syntax error the parser skips to the next `;` and keeps going, so one run
//! reports every broken statement. Identifiers must be declared before use.

use std::collections::HashSet;
use std::fmt;

use super::ast::*;
use super::lexer::{tokenize, Pos, Tok, Token};

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// All errors found in one source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseErrors(pub Vec<ParseError>);

impl fmt::Display for ParseErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseErrors {}

type PResult<T> = Result<T, ParseError>;

#[derive(Default)]
struct Scope {
    consts: Vec<(String, Literal)>,
    vars: HashSet<String>,
}

impl Scope {
    fn from_ast(ast: &ModelAst) -> Scope {
        Scope {
            consts: ast
                .constants
                .iter()
                .map(|c| (c.name.clone(), c.value.clone()))
                .collect(),
            vars: ast.variables.iter().map(|v| v.name.clone()).collect(),
        }
    }

    fn constant(&self, name: &str) -> Option<&Literal> {
        self.consts.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    fn declared(&self, name: &str) -> bool {
        self.vars.contains(name) || self.constant(name).is_some()
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    scope: Scope,
}

/// Parses a complete model file.
pub fn parse_model(src: &str) -> Result<ModelAst, ParseErrors> {
    let tokens = tokenize(src).map_err(|e| {
        ParseErrors(vec![ParseError {
            pos: e.pos,
            message: e.message,
            expected: vec![],
        }])
    })?;
    let mut p = Parser {
        tokens,
        pos: 0,
        scope: Scope::default(),
    };
    let mut ast = ModelAst::default();
    let mut errors = Vec::new();
    while p.peek() != &Tok::Eof {
        if let Err(e) = p.statement(&mut ast) {
            errors.push(e);
            p.recover();
        }
    }
    if errors.is_empty() {
        Ok(ast)
    } else {
        Err(ParseErrors(errors))
    }
}

/// Parses a standalone expression against the declarations of `ast`.
pub fn parse_expr(src: &str, ast: &ModelAst) -> Result<Expr, ParseError> {
    standalone(src, ast, |p| p.expr())
}

/// Parses an inline property such as `Pmax=? [F c=2]`.
pub fn parse_property(src: &str, ast: &ModelAst) -> Result<PropertySpec, ParseError> {
    standalone(src, ast, |p| p.property_spec())
}

/// Parses a partition override: `<expr> [bound <k>]`.
pub fn parse_partition(src: &str, ast: &ModelAst) -> Result<PartitionSpec, ParseError> {
    standalone(src, ast, |p| p.partition_spec())
}

fn standalone<T>(
    src: &str,
    ast: &ModelAst,
    f: impl FnOnce(&mut Parser) -> PResult<T>,
) -> Result<T, ParseError> {
    let tokens = tokenize(src).map_err(|e| ParseError {
        pos: e.pos,
        message: e.message,
        expected: vec![],
    })?;
    let mut p = Parser {
        tokens,
        pos: 0,
        scope: Scope::from_ast(ast),
    };
    let v = f(&mut p)?;
    if p.peek() != &Tok::Eof {
        return Err(p.unexpected(&["end of input"]));
    }
    Ok(v)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn here(&self) -> Pos {
        self.tokens[self.pos].pos
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.advance();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        ParseError {
            pos: self.here(),
            message: format!("unexpected {}", self.peek()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.unexpected(&[&tok.to_string()]))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.advance();
                Ok(name)
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn error_at(pos: Pos, message: String) -> ParseError {
        ParseError {
            pos,
            message,
            expected: vec![],
        }
    }

    fn recover(&mut self) {
        while !matches!(self.peek(), Tok::Semi | Tok::Eof) {
            self.advance();
        }
        self.eat(&Tok::Semi);
    }

    fn check_fresh(&self, name: &str, pos: Pos) -> PResult<()> {
        if self.scope.declared(name) {
            Err(Self::error_at(
                pos,
                format!("duplicate declaration of `{name}`"),
            ))
        } else {
            Ok(())
        }
    }

    fn statement(&mut self, ast: &mut ModelAst) -> PResult<()> {
        match self.peek() {
            Tok::Const => {
                self.advance();
                let pos = self.here();
                let name = self.ident()?;
                self.check_fresh(&name, pos)?;
                self.expect(Tok::Eq)?;
                let value = self.literal()?;
                self.expect(Tok::Semi)?;
                self.scope.consts.push((name.clone(), value.clone()));
                ast.constants.push(ConstDecl { name, value });
            }
            Tok::Var => {
                self.advance();
                let pos = self.here();
                let name = self.ident()?;
                self.check_fresh(&name, pos)?;
                self.expect(Tok::Colon)?;
                let lower = self.int_bound()?;
                self.expect(Tok::DotDot)?;
                let upper = self.int_bound()?;
                self.expect(Tok::Init)?;
                let init_pos = self.here();
                let init = self.int_bound()?;
                self.expect(Tok::Semi)?;
                if lower > upper {
                    return Err(Self::error_at(
                        pos,
                        format!("empty domain {lower}..{upper} for `{name}`"),
                    ));
                }
                if init < lower || init > upper {
                    return Err(Self::error_at(
                        init_pos,
                        format!("initial value {init} outside {lower}..{upper}"),
                    ));
                }
                self.scope.vars.insert(name.clone());
                ast.variables.push(VariableDecl {
                    name,
                    lower,
                    upper,
                    init,
                });
            }
            Tok::LBracket => {
                self.advance();
                self.expect(Tok::RBracket)?;
                let guard = self.expr()?;
                self.expect(Tok::Arrow)?;
                let mut alternatives = vec![self.alternative()?];
                while self.eat(&Tok::Plus) {
                    alternatives.push(self.alternative()?);
                }
                self.expect(Tok::Semi)?;
                ast.commands.push(GuardedCommand {
                    guard,
                    alternatives,
                });
            }
            Tok::Property => {
                self.advance();
                let pos = self.here();
                let name = self.ident()?;
                if ast.properties.iter().any(|p| p.name == name) {
                    return Err(Self::error_at(
                        pos,
                        format!("duplicate declaration of property `{name}`"),
                    ));
                }
                self.expect(Tok::Eq)?;
                let spec = self.property_spec()?;
                self.expect(Tok::Semi)?;
                ast.properties.push(NamedProperty { name, spec });
            }
            Tok::Partition => {
                let pos = self.here();
                self.advance();
                let spec = self.partition_spec()?;
                self.expect(Tok::Semi)?;
                if ast.partition.is_some() {
                    return Err(Self::error_at(
                        pos,
                        "duplicate declaration of the partition expression".into(),
                    ));
                }
                ast.partition = Some(spec);
            }
            _ => {
                return Err(self.unexpected(&["`const`", "`var`", "`[]`", "`property`", "`partition`"]))
            }
        }
        Ok(())
    }

    fn literal(&mut self) -> PResult<Literal> {
        let neg = self.eat(&Tok::Minus);
        let lit = match self.peek().clone() {
            Tok::Int(v) => Literal::Int(if neg { -v } else { v }),
            Tok::Real(v) => Literal::Real(if neg { -v } else { v }),
            Tok::True if !neg => Literal::Bool(true),
            Tok::False if !neg => Literal::Bool(false),
            _ => return Err(self.unexpected(&["literal"])),
        };
        self.advance();
        Ok(lit)
    }

    /// Signed integer literal or integer constant, used in variable declarations.
    fn int_bound(&mut self) -> PResult<i32> {
        let pos = self.here();
        let neg = self.eat(&Tok::Minus);
        let v = match self.peek().clone() {
            Tok::Int(v) => v,
            Tok::Ident(name) => match self.scope.constant(&name) {
                Some(Literal::Int(v)) => *v,
                Some(_) => {
                    return Err(Self::error_at(
                        pos,
                        format!("constant `{name}` is not an integer"),
                    ))
                }
                None => {
                    return Err(Self::error_at(pos, format!("unknown identifier `{name}`")))
                }
            },
            _ => return Err(self.unexpected(&["integer"])),
        };
        self.advance();
        let v = if neg { -v } else { v };
        i32::try_from(v)
            .map_err(|_| Self::error_at(pos, format!("bound {v} does not fit in 32 bits")))
    }

    fn alternative(&mut self) -> PResult<Alternative> {
        let updates_only = match self.peek() {
            Tok::LParen => {
                matches!(self.peek_at(1), Tok::Ident(_)) && self.peek_at(2) == &Tok::Prime
            }
            Tok::True => self.peek_at(1) != &Tok::Colon,
            _ => false,
        };
        let probability = if updates_only {
            Expr::Int(1)
        } else {
            let p = self.expr()?;
            self.expect(Tok::Colon)?;
            p
        };
        let updates = self.updates()?;
        let reward = if self.eat(&Tok::Reward) {
            self.unary()?
        } else {
            Expr::Int(0)
        };
        Ok(Alternative {
            probability,
            reward,
            updates,
        })
    }

    fn updates(&mut self) -> PResult<Vec<Update>> {
        if self.eat(&Tok::True) {
            return Ok(vec![]);
        }
        let mut updates: Vec<Update> = Vec::new();
        loop {
            self.expect(Tok::LParen)?;
            let pos = self.here();
            let var = self.ident()?;
            if !self.scope.vars.contains(&var) {
                return Err(Self::error_at(
                    pos,
                    format!("unknown variable `{var}` in update"),
                ));
            }
            if updates.iter().any(|u| u.var == var) {
                return Err(Self::error_at(
                    pos,
                    format!("duplicate update of `{var}` in one alternative"),
                ));
            }
            self.expect(Tok::Prime)?;
            self.expect(Tok::Eq)?;
            let value = self.expr()?;
            self.expect(Tok::RParen)?;
            updates.push(Update { var, value });
            if !self.eat(&Tok::And) {
                break;
            }
        }
        Ok(updates)
    }

    fn property_spec(&mut self) -> PResult<PropertySpec> {
        let pos = self.here();
        let head = self.ident()?;
        let (kind, direction) = match head.as_str() {
            "Pmax" => (PropertyKind::ReachProbability, Direction::Max),
            "Pmin" => (PropertyKind::ReachProbability, Direction::Min),
            "Rmax" => (PropertyKind::ExpectedReward, Direction::Max),
            "Rmin" => (PropertyKind::ExpectedReward, Direction::Min),
            _ => {
                return Err(ParseError {
                    pos,
                    message: format!("unknown property operator `{head}`"),
                    expected: vec!["Pmax".into(), "Pmin".into(), "Rmax".into(), "Rmin".into()],
                })
            }
        };
        self.expect(Tok::Eq)?;
        self.expect(Tok::Question)?;
        self.expect(Tok::LBracket)?;
        match self.peek() {
            Tok::Ident(f) if f == "F" => {
                self.advance();
            }
            _ => return Err(self.unexpected(&["`F`"])),
        }
        let target = self.expr()?;
        self.expect(Tok::RBracket)?;
        Ok(PropertySpec {
            kind,
            direction,
            target,
        })
    }

    fn partition_spec(&mut self) -> PResult<PartitionSpec> {
        let expr = self.expr()?;
        let bound = if self.eat(&Tok::Bound) {
            let pos = self.here();
            match self.advance() {
                Tok::Int(k) if k >= 1 && k <= PartitionSpec::MAX_BOUND as i64 => k as u32,
                _ => {
                    return Err(ParseError {
                        pos,
                        message: "partition bound must be a positive 31-bit integer".into(),
                        expected: vec!["integer".into()],
                    })
                }
            }
        } else {
            PartitionSpec::MAX_BOUND
        };
        Ok(PartitionSpec { expr, bound })
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        let cond = self.binary(2)?;
        if self.eat(&Tok::Question) {
            let then = self.binary(2)?;
            self.expect(Tok::Colon)?;
            let els = self.expr()?;
            Ok(Expr::Cond(Box::new(cond), Box::new(then), Box::new(els)))
        } else {
            Ok(cond)
        }
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::And => BinOp::And,
            Tok::Or => BinOp::Or,
            _ => return None,
        })
    }

    /// Precedence climbing over the binary operators of precedence >= `min`.
    fn binary(&mut self, min: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let p = op.precedence();
            if p < min {
                break;
            }
            self.advance();
            let rhs = self.binary(p + 1)?;
            lhs = Expr::binary(op, lhs, rhs);
            if op.is_comparison() {
                if let Some(next) = self.binop() {
                    if next.is_comparison() {
                        return Err(ParseError {
                            pos: self.here(),
                            message: "chained comparison; add parentheses".into(),
                            expected: vec![],
                        });
                    }
                }
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Minus) {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        if self.eat(&Tok::Not) {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Expr> {
        let pos = self.here();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(Expr::Int(v))
            }
            Tok::Real(v) => {
                self.advance();
                Ok(Expr::Real(v))
            }
            Tok::True => {
                self.advance();
                Ok(Expr::Bool(true))
            }
            Tok::False => {
                self.advance();
                Ok(Expr::Bool(false))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.advance();
                if self.peek() == &Tok::LParen {
                    if let Some(func) = Func::from_name(&name) {
                        if !self.scope.declared(&name) {
                            return self.call(func, pos);
                        }
                    }
                }
                if !self.scope.declared(&name) {
                    return Err(Self::error_at(pos, format!("unknown identifier `{name}`")));
                }
                Ok(Expr::Ident(name))
            }
            _ => Err(self.unexpected(&["expression"])),
        }
    }

    fn call(&mut self, func: Func, pos: Pos) -> PResult<Expr> {
        self.expect(Tok::LParen)?;
        let mut args = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen)?;
        let ok = match func {
            Func::Min | Func::Max => !args.is_empty(),
            Func::Floor | Func::Ceil => args.len() == 1,
            Func::Mod => args.len() == 2,
        };
        if !ok {
            return Err(Self::error_at(
                pos,
                format!("wrong number of arguments to `{}`", func.name()),
            ));
        }
        Ok(Expr::Call(func, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COIN: &str = "
        // fair coin
        var c : 0..2 init 0;
        [] c=0 -> 0.5 : (c'=1) + 0.5 : (c'=2);
        property p_heads = Pmax=? [F c=2];
        partition c+1 bound 3;
    ";

    #[test]
    fn coin_structure() {
        let ast = parse_model(COIN).unwrap();
        assert_eq!(ast.variables.len(), 1);
        assert_eq!(ast.commands.len(), 1);
        assert_eq!(ast.commands[0].alternatives.len(), 2);
        assert_eq!(ast.properties[0].name, "p_heads");
        assert_eq!(ast.partition.as_ref().unwrap().bound, 3);
    }

    #[test]
    fn out_of_domain_update_parses() {
        let ast = parse_model("var c : 0..2 init 0; [] true -> (c'=3);").unwrap();
        assert_eq!(ast.commands[0].alternatives[0].probability, Expr::Int(1));
    }

    #[test]
    fn bad_distribution_parses() {
        parse_model("var c : 0..2 init 0; [] c=0 -> 0.3 : (c'=1) + 0.3 : (c'=2);").unwrap();
    }

    #[test]
    fn reward_binds_tightly() {
        let ast =
            parse_model("var c : 0..2 init 0; [] c=0 -> 0.5 : (c'=1) reward 2 + 0.5 : true;")
                .unwrap();
        let alts = &ast.commands[0].alternatives;
        assert_eq!(alts.len(), 2);
        assert_eq!(alts[0].reward, Expr::Int(2));
        assert!(alts[1].updates.is_empty());
    }

    #[test]
    fn errors_carry_position_and_recover() {
        let err = parse_model("var c : 0..2 init 0;\n[] c=0 -> ;\n[] d=1 -> (c'=1);\n")
            .unwrap_err();
        assert_eq!(err.0.len(), 2);
        assert_eq!(err.0[0].pos.line, 2);
        assert!(err.0[0].expected.iter().any(|e| e == "expression"));
        assert_eq!(err.0[1].pos, Pos { line: 3, col: 4 });
        assert!(err.0[1].message.contains("unknown identifier `d`"));
    }

    #[test]
    fn duplicate_declarations() {
        let err = parse_model("var c : 0..2 init 0; const c = 1;").unwrap_err();
        assert!(err.0[0].message.contains("duplicate"));
        let err = parse_model("var c : 0..2 init 0; [] true -> (c'=1) & (c'=2);").unwrap_err();
        assert!(err.0[0].message.contains("duplicate update"));
    }

    #[test]
    fn constants_in_bounds() {
        let ast = parse_model("const N = 4; var x : 0..N init N;").unwrap();
        assert_eq!(ast.variables[0].upper, 4);
        assert_eq!(ast.variables[0].init, 4);
    }

    #[test]
    fn init_outside_domain() {
        assert!(parse_model("var x : 0..2 init 3;").is_err());
    }

    #[test]
    fn precedence() {
        let ast = parse_model("var x : 0..9 init 0;").unwrap();
        let e = parse_expr("x + 1 * 2 = 3 & !(x < 1) | x > 4", &ast).unwrap();
        assert_eq!(
            e.to_string(),
            "x + 1 * 2 = 3 & !(x < 1) | x > 4"
        );
        let e = parse_expr("(x - 1) - (2 - 3)", &ast).unwrap();
        assert_eq!(e.to_string(), "x - 1 - (2 - 3)");
        assert!(parse_expr("x < 1 < 2", &ast).is_err());
    }

    #[test]
    fn inline_property_and_partition() {
        let ast = parse_model("var x : 0..9 init 0;").unwrap();
        let p = parse_property("Rmin=? [F x=9]", &ast).unwrap();
        assert_eq!(p.kind, PropertyKind::ExpectedReward);
        assert_eq!(p.direction, Direction::Min);
        let part = parse_partition("floor(x / 3) + 1 bound 4", &ast).unwrap();
        assert_eq!(part.bound, 4);
        assert!(parse_partition("y", &ast).is_err());
    }

    #[test]
    fn print_reparse_is_fixpoint() {
        let src = "const p = 0.3; const N = -2;
            var x : -2..5 init 0; var y : 0..1 init 1;
            [] x < 5 & y = 1 -> p : (x'=x+1) reward (x * 2) + 1 - p : (y'=0) & (x'=max(x-1, N));
            [] y = 0 -> (y'=1);
            [] x = 5 -> x > 3 ? 0.5 : 0.25 : true + x > 3 ? 0.5 : 0.75 : (x'=0) reward 1.5;
            property r = Rmin=? [F x = 5];
            partition x + 3 bound 8;";
        let ast = parse_model(src).unwrap();
        let printed = ast.to_string();
        let again = parse_model(&printed).unwrap();
        assert_eq!(ast, again, "{printed}");
    }
}
