//! Bivariate (or small-arity) rational expressions.
//!
//! Coefficient functions of implicit ODEs and generator inputs are written as
//! infix text, parsed into an immutable tree and differentiated exactly. Only
//! constant folding is performed; equality of two expressions is decided by
//! evaluating them, never by comparing trees.

mod parse;

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

pub use parse::parse;

/// Largest accepted magnitude of an integer exponent.
pub const MAX_EXPONENT: i32 = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent {exponent} at offset {offset} is out of range (|n| <= 64)")]
    ExponentOutOfRange { exponent: i64, offset: usize },
    #[error("division by zero in `{subexpr}`")]
    DivisionByZero { subexpr: String },
    #[error("variable `{0}` is not declared")]
    UndeclaredVariable(String),
    #[error("expected {expected} variable values, got {got}")]
    Arity { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, i32),
}

/// An immutable expression tree over a declared, ordered variable set.
#[derive(Debug, Clone)]
pub struct Expression {
    vars: Arc<[String]>,
    root: Node,
}

impl Expression {
    pub(crate) fn from_parts(vars: Arc<[String]>, root: Node) -> Self {
        Self { vars, root }
    }

    pub fn parse(text: &str, vars: &[&str]) -> Result<Self, ExprError> {
        parse(text, vars)
    }

    pub fn constant(vars: &[&str], value: f64) -> Self {
        Self { vars: var_list(vars), root: Node::Const(value) }
    }

    pub fn variable(vars: &[&str], name: &str) -> Result<Self, ExprError> {
        let list = var_list(vars);
        let index =
            list.iter().position(|v| v == name).ok_or_else(|| ExprError::UndeclaredVariable(name.to_string()))?;
        Ok(Self { vars: list, root: Node::Var(index) })
    }

    /// The constant `value` over the same variables as `self`.
    pub fn constant_like(&self, value: f64) -> Self {
        Self { vars: self.vars.clone(), root: Node::Const(value) }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// `Some(c)` when the tree folded to a single constant.
    pub fn as_constant(&self) -> Option<f64> {
        match self.root {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    /// Evaluates at a point given in declared-variable order.
    pub fn eval(&self, point: &[f64]) -> Result<f64, ExprError> {
        if point.len() != self.vars.len() {
            return Err(ExprError::Arity { expected: self.vars.len(), got: point.len() });
        }
        eval_node(&self.root, point, &self.vars)
    }

    /// Evaluates with values looked up by variable name.
    pub fn eval_named(&self, assignment: &[(&str, f64)]) -> Result<f64, ExprError> {
        let mut point = Vec::with_capacity(self.vars.len());
        for v in self.vars.iter() {
            let value = assignment
                .iter()
                .find(|(name, _)| name == v)
                .map(|(_, value)| *value)
                .ok_or_else(|| ExprError::UndeclaredVariable(v.clone()))?;
            point.push(value);
        }
        self.eval(&point)
    }

    /// Exact partial derivative with respect to `var`.
    pub fn differentiate(&self, var: &str) -> Result<Self, ExprError> {
        let index = self.var_index(var).ok_or_else(|| ExprError::UndeclaredVariable(var.to_string()))?;
        Ok(Self { vars: self.vars.clone(), root: diff_node(&self.root, index) })
    }

    pub fn powi(&self, exponent: i32) -> Self {
        assert!(exponent.abs() <= MAX_EXPONENT, "exponent {exponent} out of range");
        Self { vars: self.vars.clone(), root: pow(self.root.clone(), exponent) }
    }

    /// Replaces every occurrence of `var` with `replacement` (same variable set).
    pub fn substitute(&self, var: &str, replacement: &Expression) -> Result<Self, ExprError> {
        self.check_same_vars(replacement);
        let index = self.var_index(var).ok_or_else(|| ExprError::UndeclaredVariable(var.to_string()))?;
        Ok(Self { vars: self.vars.clone(), root: substitute_node(&self.root, index, &replacement.root) })
    }

    /// Rewrites the expression over a new variable list; `mapping[i]` names the
    /// new variable that old variable `i` becomes.
    pub fn rename_vars(&self, new_vars: &[&str], mapping: &[&str]) -> Result<Self, ExprError> {
        let list = var_list(new_vars);
        let mut table = Vec::with_capacity(self.vars.len());
        for name in mapping {
            let index =
                list.iter().position(|v| v == name).ok_or_else(|| ExprError::UndeclaredVariable(name.to_string()))?;
            table.push(index);
        }
        if table.len() != self.vars.len() {
            return Err(ExprError::Arity { expected: self.vars.len(), got: table.len() });
        }
        Ok(Self { vars: list, root: remap_node(&self.root, &table) })
    }

    fn check_same_vars(&self, other: &Expression) {
        assert!(
            self.vars == other.vars,
            "expressions over different variable sets: {:?} vs {:?}",
            self.vars,
            other.vars
        );
    }

    fn combine(self, other: Expression, f: fn(Node, Node) -> Node) -> Expression {
        self.check_same_vars(&other);
        Expression { vars: self.vars, root: f(self.root, other.root) }
    }
}

fn var_list(vars: &[&str]) -> Arc<[String]> {
    vars.iter().map(|v| v.to_string()).collect::<Vec<_>>().into()
}

fn eval_node(node: &Node, point: &[f64], vars: &[String]) -> Result<f64, ExprError> {
    Ok(match node {
        Node::Const(c) => *c,
        Node::Var(i) => point[*i],
        Node::Neg(a) => -eval_node(a, point, vars)?,
        Node::Add(a, b) => eval_node(a, point, vars)? + eval_node(b, point, vars)?,
        Node::Sub(a, b) => eval_node(a, point, vars)? - eval_node(b, point, vars)?,
        Node::Mul(a, b) => eval_node(a, point, vars)? * eval_node(b, point, vars)?,
        Node::Div(a, b) => {
            let den = eval_node(b, point, vars)?;
            if den.abs() < f64::MIN_POSITIVE {
                return Err(ExprError::DivisionByZero { subexpr: print_node(node, vars) });
            }
            eval_node(a, point, vars)? / den
        }
        Node::Pow(a, n) => {
            let base = eval_node(a, point, vars)?;
            if *n < 0 && base.abs() < f64::MIN_POSITIVE {
                return Err(ExprError::DivisionByZero { subexpr: print_node(node, vars) });
            }
            base.powi(*n)
        }
    })
}

// Smart constructors with constant folding.

fn constant(c: f64) -> Node {
    Node::Const(c)
}

fn neg(a: Node) -> Node {
    match a {
        Node::Const(c) => Node::Const(-c),
        Node::Neg(inner) => *inner,
        other => Node::Neg(Box::new(other)),
    }
}

fn add(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(x), Node::Const(y)) => Node::Const(x + y),
        (Node::Const(x), other) | (other, Node::Const(x)) if x == 0.0 => other,
        (a, b) => Node::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(x), Node::Const(y)) => Node::Const(x - y),
        (a, Node::Const(y)) if y == 0.0 => a,
        (Node::Const(x), b) if x == 0.0 => neg(b),
        (a, b) => Node::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(x), Node::Const(y)) => Node::Const(x * y),
        (Node::Const(x), _) | (_, Node::Const(x)) if x == 0.0 => Node::Const(0.0),
        (Node::Const(x), other) | (other, Node::Const(x)) if x == 1.0 => other,
        (Node::Const(x), other) | (other, Node::Const(x)) if x == -1.0 => neg(other),
        (a, b) => Node::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Node, b: Node) -> Node {
    match (a, b) {
        (Node::Const(x), Node::Const(y)) if y != 0.0 => Node::Const(x / y),
        (Node::Const(x), _) if x == 0.0 => Node::Const(0.0),
        (a, Node::Const(y)) if y == 1.0 => a,
        (a, b) => Node::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Node, n: i32) -> Node {
    match (a, n) {
        (_, 0) => Node::Const(1.0),
        (a, 1) => a,
        (Node::Const(c), n) if !(c == 0.0 && n < 0) => Node::Const(c.powi(n)),
        (a, n) => Node::Pow(Box::new(a), n),
    }
}

fn diff_node(node: &Node, var: usize) -> Node {
    match node {
        Node::Const(_) => constant(0.0),
        Node::Var(i) => constant(if *i == var { 1.0 } else { 0.0 }),
        Node::Neg(a) => neg(diff_node(a, var)),
        Node::Add(a, b) => add(diff_node(a, var), diff_node(b, var)),
        Node::Sub(a, b) => sub(diff_node(a, var), diff_node(b, var)),
        Node::Mul(a, b) => add(mul(diff_node(a, var), (**b).clone()), mul((**a).clone(), diff_node(b, var))),
        Node::Div(a, b) => {
            // (a'b - ab') / b^2
            let num = sub(mul(diff_node(a, var), (**b).clone()), mul((**a).clone(), diff_node(b, var)));
            div(num, pow((**b).clone(), 2))
        }
        Node::Pow(a, n) => mul(mul(constant(*n as f64), pow((**a).clone(), n - 1)), diff_node(a, var)),
    }
}

fn substitute_node(node: &Node, var: usize, with: &Node) -> Node {
    match node {
        Node::Const(c) => constant(*c),
        Node::Var(i) if *i == var => with.clone(),
        Node::Var(i) => Node::Var(*i),
        Node::Neg(a) => neg(substitute_node(a, var, with)),
        Node::Add(a, b) => add(substitute_node(a, var, with), substitute_node(b, var, with)),
        Node::Sub(a, b) => sub(substitute_node(a, var, with), substitute_node(b, var, with)),
        Node::Mul(a, b) => mul(substitute_node(a, var, with), substitute_node(b, var, with)),
        Node::Div(a, b) => div(substitute_node(a, var, with), substitute_node(b, var, with)),
        Node::Pow(a, n) => pow(substitute_node(a, var, with), *n),
    }
}

fn remap_node(node: &Node, table: &[usize]) -> Node {
    match node {
        Node::Const(c) => Node::Const(*c),
        Node::Var(i) => Node::Var(table[*i]),
        Node::Neg(a) => Node::Neg(Box::new(remap_node(a, table))),
        Node::Add(a, b) => Node::Add(Box::new(remap_node(a, table)), Box::new(remap_node(b, table))),
        Node::Sub(a, b) => Node::Sub(Box::new(remap_node(a, table)), Box::new(remap_node(b, table))),
        Node::Mul(a, b) => Node::Mul(Box::new(remap_node(a, table)), Box::new(remap_node(b, table))),
        Node::Div(a, b) => Node::Div(Box::new(remap_node(a, table)), Box::new(remap_node(b, table))),
        Node::Pow(a, n) => Node::Pow(Box::new(remap_node(a, table)), *n),
    }
}

/// Shortest round-trip decimal; exponent notation outside a readable range.
pub(crate) fn format_constant(c: f64) -> String {
    let magnitude = c.abs();
    if magnitude == 0.0 || (1e-5..1e16).contains(&magnitude) {
        format!("{c}")
    } else {
        format!("{c:e}")
    }
}

fn print_node(node: &Node, vars: &[String]) -> String {
    match node {
        Node::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
            format!("(-{})", format_constant(-c))
        }
        Node::Const(c) => format_constant(*c),
        Node::Var(i) => vars[*i].clone(),
        Node::Neg(a) => format!("(-{})", print_node(a, vars)),
        Node::Add(a, b) => format!("({} + {})", print_node(a, vars), print_node(b, vars)),
        Node::Sub(a, b) => format!("({} - {})", print_node(a, vars), print_node(b, vars)),
        Node::Mul(a, b) => format!("({}*{})", print_node(a, vars), print_node(b, vars)),
        Node::Div(a, b) => format!("({}/{})", print_node(a, vars), print_node(b, vars)),
        Node::Pow(a, n) => format!("({}^{})", print_node(a, vars), n),
    }
}

/// Canonical form: fully parenthesized infix.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_node(&self.root, &self.vars))
    }
}

impl Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        Expression { vars: self.vars, root: neg(self.root) }
    }
}

impl Neg for &Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        -self.clone()
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $ctor:ident) => {
        impl $trait for Expression {
            type Output = Expression;
            fn $method(self, rhs: Expression) -> Expression {
                self.combine(rhs, $ctor)
            }
        }
        impl $trait<&Expression> for &Expression {
            type Output = Expression;
            fn $method(self, rhs: &Expression) -> Expression {
                self.clone().combine(rhs.clone(), $ctor)
            }
        }
        impl $trait<&Expression> for Expression {
            type Output = Expression;
            fn $method(self, rhs: &Expression) -> Expression {
                self.combine(rhs.clone(), $ctor)
            }
        }
        impl $trait<f64> for Expression {
            type Output = Expression;
            fn $method(self, rhs: f64) -> Expression {
                Expression { root: $ctor(self.root, Node::Const(rhs)), vars: self.vars }
            }
        }
        impl $trait<f64> for &Expression {
            type Output = Expression;
            fn $method(self, rhs: f64) -> Expression {
                self.clone().$method(rhs)
            }
        }
        impl $trait<Expression> for f64 {
            type Output = Expression;
            fn $method(self, rhs: Expression) -> Expression {
                Expression { root: $ctor(Node::Const(self), rhs.root), vars: rhs.vars }
            }
        }
        impl $trait<&Expression> for f64 {
            type Output = Expression;
            fn $method(self, rhs: &Expression) -> Expression {
                self.$method(rhs.clone())
            }
        }
    };
}

binary_op!(Add, add, add);
binary_op!(Sub, sub, sub);
binary_op!(Mul, mul, mul);
binary_op!(Div, div, div);

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const XY: &[&str] = &["x", "y"];

    fn at(e: &Expression, x: f64, y: f64) -> f64 {
        e.eval(&[x, y]).unwrap()
    }

    #[test]
    fn parses_and_evaluates_grammar_examples() {
        let e = parse("2*x + y^2", XY).unwrap();
        assert_eq!(e.to_string(), "((2*x) + (y^2))");
        assert_eq!(at(&e, 1.5, 3.0), 12.0);

        let e = parse("3*B", &["A", "B"]).unwrap();
        assert_eq!(e.to_string(), "(3*B)");
        assert_eq!(e.eval(&[7.0, 2.0]).unwrap(), 6.0);
    }

    #[test]
    fn eval_examples() {
        assert_eq!(at(&parse("x*y", XY).unwrap(), 2.0, 3.0), 6.0);
        assert_eq!(at(&parse("x^3", XY).unwrap(), -2.0, 11.0), -8.0);
        let err = parse("1/x", XY).unwrap().eval(&[0.0, 1.0]).unwrap_err();
        assert_eq!(err, ExprError::DivisionByZero { subexpr: "(1/x)".into() });
        let err = parse("x^-2", XY).unwrap().eval(&[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, ExprError::DivisionByZero { .. }));
    }

    #[test]
    fn arity_is_checked() {
        let e = parse("x", XY).unwrap();
        assert_eq!(e.eval(&[1.0]).unwrap_err(), ExprError::Arity { expected: 2, got: 1 });
        assert_eq!(e.eval_named(&[("y", 2.0), ("x", 5.0)]).unwrap(), 5.0);
    }

    #[test]
    fn differentiation_examples() {
        let e = parse("x^2*y", XY).unwrap();
        let d = e.differentiate("x").unwrap();
        for &(x, y) in &[(0.3, -1.2), (2.0, 5.0), (-1.0, 0.5)] {
            assert!((at(&d, x, y) - 2.0 * x * y).abs() < 1e-12);
        }
        let d = parse("2*x", XY).unwrap().differentiate("y").unwrap();
        assert!(d.is_zero());
        let d2 = parse("x^3", XY).unwrap().differentiate("x").unwrap().differentiate("x").unwrap();
        for x in [-2.0, 0.0, 0.7, 3.0] {
            assert!((at(&d2, x, 0.0) - 6.0 * x).abs() < 1e-12);
        }
        assert!(matches!(
            e.differentiate("z"),
            Err(ExprError::UndeclaredVariable(ref v)) if v == "z"
        ));
    }

    #[test]
    fn quotient_rule() {
        let e = parse("x/(1 + y^2)", XY).unwrap();
        let dy = e.differentiate("y").unwrap();
        let (x, y) = (1.3_f64, 0.4_f64);
        let expected = -2.0 * x * y / (1.0 + y * y).powi(2);
        assert!((at(&dy, x, y) - expected).abs() < 1e-14);
    }

    #[test]
    fn constant_folding() {
        let e = parse("0*x + 2*3 - (1 - 1)*y", XY).unwrap();
        assert_eq!(e.as_constant(), Some(6.0));
        let e = parse("(2*x)^0", XY).unwrap();
        assert_eq!(e.as_constant(), Some(1.0));
    }

    #[test]
    fn operators_build_trees() {
        let x = Expression::variable(XY, "x").unwrap();
        let y = Expression::variable(XY, "y").unwrap();
        let e = 4.0 * x.powi(3) + 27.0 * y.powi(2);
        assert_eq!(at(&e, 1.0, 1.0), 31.0);
        let e = (&x - &y) / (&x + 1.0);
        assert_eq!(at(&e, 3.0, 1.0), 0.5);
    }

    #[test]
    fn substitution_and_renaming() {
        let e = parse("x^2 + y", XY).unwrap();
        let shifted = e.substitute("x", &parse("x + 1", XY).unwrap()).unwrap();
        assert_eq!(at(&shifted, 1.0, 0.5), 4.5);
        let ab = parse("3*B - A", &["A", "B"]).unwrap();
        let xy = ab.rename_vars(XY, &["x", "y"]).unwrap();
        assert_eq!(at(&xy, 1.0, 2.0), 5.0);
    }

    #[test]
    fn negative_constants_print_reparsably() {
        let e = -parse("2", XY).unwrap() * parse("x", XY).unwrap();
        let printed = e.to_string();
        let back = parse(&printed, XY).unwrap();
        assert_eq!(at(&back, 1.5, 0.0), -3.0);
    }

    #[test]
    fn tiny_and_huge_constants_round_trip() {
        for c in [1e-7, 1.5e300, 0.1, 123456.75, 3e16] {
            let e = Expression::constant(XY, c);
            let back = parse(&e.to_string(), XY).unwrap();
            assert_eq!(back.as_constant(), Some(c));
        }
    }

    fn smooth_text() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            Just("x".to_string()),
            Just("y".to_string()),
            (-30i32..30).prop_map(|c| format!("{}", c as f64 / 10.0)),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) + ({b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) - ({b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) * ({b})")),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a}) / (1 + ({b})^2)")),
                (inner.clone(), 0u32..4).prop_map(|(a, k)| format!("-({a})^{k}")),
            ]
        })
    }

    proptest! {
        #[test]
        fn derivatives_match_finite_differences(text in smooth_text(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let e = parse(&text, XY).unwrap();
            let h = 1e-5;
            for (k, var) in ["x", "y"].iter().enumerate() {
                let d = at(&e.differentiate(var).unwrap(), x, y);
                let (mut lo, mut hi) = ([x, y], [x, y]);
                lo[k] -= h;
                hi[k] += h;
                let fd = (e.eval(&hi).unwrap() - e.eval(&lo).unwrap()) / (2.0 * h);
                let scale = 1.0 + d.abs() + at(&e, x, y).abs();
                prop_assert!((d - fd).abs() <= 1e-6 * scale, "{text}: d{var} = {d}, fd = {fd}");
            }
        }

        #[test]
        fn printing_round_trips(text in smooth_text(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let e = parse(&text, XY).unwrap();
            let back = parse(&e.to_string(), XY).unwrap();
            prop_assert_eq!(back.to_string(), e.to_string());
            prop_assert_eq!(at(&back, x, y).to_bits(), at(&e, x, y).to_bits());
        }
    }
}
