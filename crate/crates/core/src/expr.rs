//! A small infix expression language for real-valued functions.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = atom [ "^" unary ] ;              (* right-associative *)
//! atom    = number | "pi" | variable
//!         | function "(" expr ")" | "(" expr ")" ;
//! function = "sin" | "cos" | "exp" | "log" | "abs" | "sqrt" ;
//! number  = digits [ "." digits ] [ ("e"|"E") ["+"|"-"] digits ] ;
//! ```
//!
//! `^` binds tighter than unary minus (`-x^2` is `-(x^2)`) and associates to
//! the right (`2^3^2` is `2^(3^2)`). `pi` is a reserved literal. Variable
//! names are declared up front and resolved to positional indices at parse
//! time, so evaluation is a single allocation-free AST walk.

use std::fmt;

/// A parse failure, carrying the byte offset into the source string.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte {position}: {message}")]
pub struct ParseError {
    /// Byte offset into the input at which the problem was detected.
    pub position: usize,
    /// Human-readable description of the problem.
    pub message: String,
}

/// An evaluation failure (domain error), naming the offending subexpression.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("domain error in `{subexpr}`: {message}")]
pub struct EvalError {
    /// Canonical print of the subexpression that failed.
    pub subexpr: String,
    /// What went wrong (e.g. logarithm of a nonpositive value).
    pub message: String,
}

/// Built-in unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    /// Variable by position in the declared variable list.
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression over a fixed, ordered list of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    vars: Vec<String>,
}

impl Expr {
    /// Parses `src` over the ordered variable list `vars`.
    ///
    /// ```
    /// use impoly::expr::Expr;
    /// let f = Expr::parse("x1^2 + y1^2 - 1", &["x1", "y1"]).unwrap();
    /// assert_eq!(f.eval(&[0.0, 1.0]).unwrap(), 0.0);
    /// ```
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr, ParseError> {
        let tokens = lex(src)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            vars,
            src_len: src.len(),
        };
        let root = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(ParseError {
                position: tok.pos,
                message: format!("unexpected trailing `{}`", tok.text),
            });
        }
        Ok(Expr {
            root,
            vars: vars.iter().map(|s| s.to_string()).collect(),
        })
    }

    /// Number of declared variables (the required point length for [`eval`]).
    ///
    /// [`eval`]: Expr::eval
    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    /// The declared variable names, in positional order.
    pub fn variables(&self) -> &[String] {
        &self.vars
    }

    /// Evaluates at `point` (one value per declared variable, in order).
    ///
    /// ```
    /// use impoly::expr::Expr;
    /// let k = Expr::parse("E - 1*sin(E) - M", &["M", "E"]).unwrap();
    /// let pi = std::f64::consts::PI;
    /// assert!(k.eval(&[pi, pi]).unwrap().abs() < 1e-15);
    /// ```
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        debug_assert_eq!(point.len(), self.vars.len());
        eval_node(&self.root, point)
    }
}

impl fmt::Display for Expr {
    /// Canonical form: minimal parentheses, shortest round-trip numerals.
    /// Reparsing the printed form yields a structurally identical AST.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print_node(&self.root, &self.vars, Prec::Add, f)
    }
}

fn eval_node(node: &Node, point: &[f64]) -> Result<f64, EvalError> {
    Ok(match node {
        Node::Num(v) => *v,
        Node::Var(i) => point[*i],
        Node::Neg(inner) => -eval_node(inner, point)?,
        Node::Bin(op, lhs, rhs) => {
            let a = eval_node(lhs, point)?;
            let b = eval_node(rhs, point)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(domain_error(node, point, "division by zero"));
                    }
                    a / b
                }
                BinOp::Pow => {
                    let v = a.powf(b);
                    if !v.is_finite() {
                        return Err(domain_error(node, point, "non-finite power"));
                    }
                    v
                }
            }
        }
        Node::Call(func, arg) => {
            let v = eval_node(arg, point)?;
            match func {
                Func::Sin => v.sin(),
                Func::Cos => v.cos(),
                Func::Exp => v.exp(),
                Func::Log => {
                    if v <= 0.0 {
                        return Err(domain_error(node, point, "logarithm of a nonpositive value"));
                    }
                    v.ln()
                }
                Func::Abs => v.abs(),
                Func::Sqrt => {
                    if v < 0.0 {
                        return Err(domain_error(node, point, "square root of a negative value"));
                    }
                    v.sqrt()
                }
            }
        }
    })
}

fn domain_error(node: &Node, _point: &[f64], message: &str) -> EvalError {
    // Variable names are not available here; print positional placeholders.
    struct P<'a>(&'a Node);
    impl fmt::Display for P<'_> {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            print_node_positional(self.0, Prec::Add, f)
        }
    }
    EvalError {
        subexpr: P(node).to_string(),
        message: message.to_string(),
    }
}

// ------------------------------------------------------------------
// Printing
// ------------------------------------------------------------------

/// Precedence levels, loosest first.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Add,
    Mul,
    Unary,
    Pow,
    Atom,
}

fn node_prec(node: &Node) -> Prec {
    match node {
        Node::Num(v) if *v < 0.0 => Prec::Unary,
        Node::Num(_) | Node::Var(_) | Node::Call(..) => Prec::Atom,
        Node::Neg(_) => Prec::Unary,
        Node::Bin(BinOp::Add | BinOp::Sub, ..) => Prec::Add,
        Node::Bin(BinOp::Mul | BinOp::Div, ..) => Prec::Mul,
        Node::Bin(BinOp::Pow, ..) => Prec::Pow,
    }
}

fn print_node(
    node: &Node,
    vars: &[String],
    min: Prec,
    f: &mut fmt::Formatter<'_>,
) -> fmt::Result {
    let prec = node_prec(node);
    let parens = prec < min;
    if parens {
        write!(f, "(")?;
    }
    match node {
        Node::Num(v) => write!(f, "{v}")?,
        Node::Var(i) => write!(f, "{}", vars[*i])?,
        Node::Neg(inner) => {
            write!(f, "-")?;
            print_node(inner, vars, Prec::Unary, f)?;
        }
        Node::Bin(op, lhs, rhs) => {
            let (sym, lmin, rmin) = match op {
                BinOp::Add => ("+", Prec::Add, Prec::Mul),
                BinOp::Sub => ("-", Prec::Add, Prec::Mul),
                BinOp::Mul => ("*", Prec::Mul, Prec::Unary),
                BinOp::Div => ("/", Prec::Mul, Prec::Unary),
                // Right-associative: the left side must be an atom.
                BinOp::Pow => ("^", Prec::Atom, Prec::Unary),
            };
            print_node(lhs, vars, lmin, f)?;
            write!(f, " {sym} ")?;
            print_node(rhs, vars, rmin, f)?;
        }
        Node::Call(func, arg) => {
            write!(f, "{}(", func.name())?;
            print_node(arg, vars, Prec::Add, f)?;
            write!(f, ")")?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

/// Print with `#k` placeholders for variables (used in error messages,
/// where the variable table is out of reach).
fn print_node_positional(node: &Node, min: Prec, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let prec = node_prec(node);
    let parens = prec < min;
    if parens {
        write!(f, "(")?;
    }
    match node {
        Node::Num(v) => write!(f, "{v}")?,
        Node::Var(i) => write!(f, "#{i}")?,
        Node::Neg(inner) => {
            write!(f, "-")?;
            print_node_positional(inner, Prec::Unary, f)?;
        }
        Node::Bin(op, lhs, rhs) => {
            let (sym, lmin, rmin) = match op {
                BinOp::Add => ("+", Prec::Add, Prec::Mul),
                BinOp::Sub => ("-", Prec::Add, Prec::Mul),
                BinOp::Mul => ("*", Prec::Mul, Prec::Unary),
                BinOp::Div => ("/", Prec::Mul, Prec::Unary),
                BinOp::Pow => ("^", Prec::Atom, Prec::Unary),
            };
            print_node_positional(lhs, lmin, f)?;
            write!(f, " {sym} ")?;
            print_node_positional(rhs, rmin, f)?;
        }
        Node::Call(func, arg) => {
            write!(f, "{}(", func.name())?;
            print_node_positional(arg, Prec::Add, f)?;
            write!(f, ")")?;
        }
    }
    if parens {
        write!(f, ")")?;
    }
    Ok(())
}

// ------------------------------------------------------------------
// Lexing and parsing
// ------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Num(f64),
    Ident,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokKind,
    text: String,
    pos: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let pos = i;
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' | b'(' | b')' => {
                let kind = match b {
                    b'+' => TokKind::Plus,
                    b'-' => TokKind::Minus,
                    b'*' => TokKind::Star,
                    b'/' => TokKind::Slash,
                    b'^' => TokKind::Caret,
                    b'(' => TokKind::LParen,
                    _ => TokKind::RParen,
                };
                tokens.push(Token {
                    kind,
                    text: (b as char).to_string(),
                    pos,
                });
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                // Optional exponent part.
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        j = k;
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let text = &src[i..j];
                let value: f64 = text.parse().map_err(|_| ParseError {
                    position: pos,
                    message: format!("malformed number `{text}`"),
                })?;
                tokens.push(Token {
                    kind: TokKind::Num(value),
                    text: text.to_string(),
                    pos,
                });
                i = j;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                tokens.push(Token {
                    kind: TokKind::Ident,
                    text: src[i..j].to_string(),
                    pos,
                });
                i = j;
            }
            _ => {
                return Err(ParseError {
                    position: pos,
                    message: format!("unknown token `{}`", &src[i..i + 1]),
                });
            }
        }
    }
    if tokens.is_empty() {
        return Err(ParseError {
            position: 0,
            message: "empty expression".to_string(),
        });
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    vars: &'a [&'a str],
    src_len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn advance(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, message: String) -> ParseError {
        let position = self.peek().map(|t| t.pos).unwrap_or(self.src_len);
        ParseError { position, message }
    }

    fn expect(&mut self, kind: TokKind, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(ParseError {
                position: t.pos,
                message: format!("expected {what}, found `{}`", t.text),
            }),
            None => Err(self.err_here(format!("expected {what}, found end of input"))),
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let Some(t) = self.peek() {
            let op = match t.kind {
                TokKind::Plus => BinOp::Add,
                TokKind::Minus => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(t) = self.peek() {
            let op = match t.kind {
                TokKind::Star => BinOp::Mul,
                TokKind::Slash => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if let Some(t) = self.peek() {
            if t.kind == TokKind::Minus {
                self.pos += 1;
                let inner = self.unary()?;
                return Ok(Node::Neg(Box::new(inner)));
            }
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if let Some(t) = self.peek() {
            if t.kind == TokKind::Caret {
                self.pos += 1;
                let exponent = self.unary()?;
                return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let t = match self.advance() {
            Some(t) => t.clone(),
            None => return Err(self.err_here("expected an operand, found end of input".into())),
        };
        match t.kind {
            TokKind::Num(v) => Ok(Node::Num(v)),
            TokKind::LParen => {
                let inner = self.expr()?;
                self.expect(TokKind::RParen, "`)`")?;
                Ok(inner)
            }
            TokKind::Ident => {
                if t.text == "pi" {
                    return Ok(Node::Num(std::f64::consts::PI));
                }
                if let Some(func) = Func::from_name(&t.text) {
                    self.expect(TokKind::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.expect(TokKind::RParen, "`)`")?;
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                match self.vars.iter().position(|v| *v == t.text) {
                    Some(i) => Ok(Node::Var(i)),
                    None => Err(ParseError {
                        position: t.pos,
                        message: format!("undeclared variable `{}`", t.text),
                    }),
                }
            }
            _ => Err(ParseError {
                position: t.pos,
                message: format!("expected an operand, found `{}`", t.text),
            }),
        }
    }
}
