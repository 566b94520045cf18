//! Regulatory networks: parsing, validation and node logics.
//!
//! A network is written one node per line as `name : expr`, where `expr` is a
//! product of sums over the node's sources. A `~` prefix marks a repressing
//! edge. Examples:
//!
//! ```text
//! x : (y + z)(~w)
//! y : y + z
//! z : (~y)(~z)      # repressing self-edges are rejected
//! ```
//!
//! Node indices follow declaration order. Each node's sources are kept in
//! ascending source-index order and its targets in ascending target-index
//! order; everything downstream (input-combination encoding, parameter
//! indices) is defined relative to these orders.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("node `{node}` represses itself")]
    RepressingSelfEdge { node: String },
    #[error("more than one edge from `{source_node}` to `{target}`")]
    DuplicateEdge { source_node: String, target: String },
    #[error("node `{node}` has no {missing}")]
    DanglingNode { node: String, missing: &'static str },
    #[error("logic of `{node}` uses source `{source_node}` more than once")]
    LogicSourceMismatch { node: String, source_node: String },
    #[error("unknown identifier `{name}` on line {line}")]
    UnknownIdentifier { name: String, line: usize },
    #[error("node `{name}` declared twice")]
    DuplicateNode { name: String },
    #[error("expected {expected} values, got {got}")]
    ArityMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Activation,
    Repression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Source {
    pub node: usize,
    pub sign: Sign,
}

/// A logic written as a product of sums. Each factor lists source positions
/// (indices into the node's source list). Factors are sorted by their first
/// member and members are ascending, so two equal partitions compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProductOfSums {
    factors: Vec<Vec<usize>>,
}

impl ProductOfSums {
    /// Builds a logic from a partition of `0..n`. Returns `None` when the
    /// factors are empty, overlap, or miss a position.
    pub fn new(mut factors: Vec<Vec<usize>>) -> Option<Self> {
        let n: usize = factors.iter().map(Vec::len).sum();
        let mut seen = vec![false; n];
        for factor in &mut factors {
            if factor.is_empty() {
                return None;
            }
            factor.sort_unstable();
            for &k in factor.iter() {
                if k >= n || seen[k] {
                    return None;
                }
                seen[k] = true;
            }
        }
        factors.sort_by_key(|f| f[0]);
        Some(ProductOfSums { factors })
    }

    /// Single factor containing every input: `x + y + ...`.
    pub fn sum(n: usize) -> Self {
        ProductOfSums {
            factors: vec![(0..n).collect()],
        }
    }

    /// One singleton factor per input: `x y ...`.
    pub fn product(n: usize) -> Self {
        ProductOfSums {
            factors: (0..n).map(|k| vec![k]).collect(),
        }
    }

    pub fn factors(&self) -> &[Vec<usize>] {
        &self.factors
    }

    pub fn arity(&self) -> usize {
        self.factors.iter().map(Vec::len).sum()
    }

    pub fn is_sum(&self) -> bool {
        self.factors.len() == 1
    }

    pub fn is_product(&self) -> bool {
        self.factors.iter().all(|f| f.len() == 1)
    }

    /// Evaluates the logic: product over factors of the sum of member values.
    pub fn eval<T>(&self, values: &[T]) -> T
    where
        T: Clone + Add<Output = T> + Mul<Output = T>,
    {
        let mut product: Option<T> = None;
        for factor in &self.factors {
            let mut sum = values[factor[0]].clone();
            for &k in &factor[1..] {
                sum = sum + values[k].clone();
            }
            product = Some(match product {
                None => sum,
                Some(p) => p * sum,
            });
        }
        product.expect("logic has at least one factor")
    }

    /// Renders with one variable name per position, e.g. `(x)(y+z)`.
    pub fn render_with(&self, names: &[String]) -> String {
        let mut out = String::new();
        let wrap = self.factors.len() > 1;
        for factor in &self.factors {
            if wrap {
                out.push('(');
            }
            let terms: Vec<&str> = factor.iter().map(|&k| names[k].as_str()).collect();
            out.push_str(&terms.join("+"));
            if wrap {
                out.push(')');
            }
        }
        out
    }
}

/// Variable letters used for anonymous logic positions: x, y, z, w, v, ...
pub fn position_name(k: usize) -> String {
    const LETTERS: [&str; 8] = ["x", "y", "z", "w", "v", "s", "r", "q"];
    match LETTERS.get(k) {
        Some(s) => (*s).to_string(),
        None => format!("x{k}"),
    }
}

/// On/off flags for each source of a node, encoded as an integer with the
/// first source in the least significant bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InputCombination(pub u32);

impl InputCombination {
    pub fn is_on(self, k: usize) -> bool {
        self.0 >> k & 1 == 1
    }

    pub fn all(n_inputs: usize) -> impl Iterator<Item = InputCombination> {
        (0..1u32 << n_inputs).map(InputCombination)
    }

    /// Componentwise order with off < on.
    pub fn precedes(self, other: InputCombination) -> bool {
        self.0 & !other.0 == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRecord {
    pub name: String,
    pub sources: Vec<Source>,
    pub targets: Vec<usize>,
    pub logic: ProductOfSums,
}

impl NodeRecord {
    pub fn n_inputs(&self) -> usize {
        self.sources.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.targets.len()
    }

    /// Position of `source` in this node's source list.
    pub fn source_position(&self, source: usize) -> Option<usize> {
        self.sources.iter().position(|s| s.node == source)
    }

    /// Position of `target` in this node's target list.
    pub fn target_position(&self, target: usize) -> Option<usize> {
        self.targets.binary_search(&target).ok()
    }

    pub fn logic_eval<T>(&self, values: &[T]) -> Result<T, NetworkError>
    where
        T: Clone + Add<Output = T> + Mul<Output = T>,
    {
        if values.len() != self.sources.len() {
            return Err(NetworkError::ArityMismatch {
                expected: self.sources.len(),
                got: values.len(),
            });
        }
        Ok(self.logic.eval(values))
    }
}

/// Maps an input combination to concrete per-source values.
pub fn valuation<T: Clone>(
    combination: InputCombination,
    low: &[T],
    high: &[T],
) -> Result<Vec<T>, NetworkError> {
    if low.len() != high.len() {
        return Err(NetworkError::ArityMismatch {
            expected: low.len(),
            got: high.len(),
        });
    }
    Ok((0..low.len())
        .map(|k| {
            if combination.is_on(k) {
                high[k].clone()
            } else {
                low[k].clone()
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegulatoryNetwork {
    nodes: Vec<NodeRecord>,
}

impl RegulatoryNetwork {
    pub fn parse(text: &str) -> Result<Self, NetworkError> {
        parse_network(text)
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &NodeRecord {
        &self.nodes[index]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.sources.len()).sum()
    }

    /// Renders the network back to text. Parsing the result yields an
    /// identical network.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes {
            let names: Vec<String> = node
                .sources
                .iter()
                .map(|s| match s.sign {
                    Sign::Activation => self.nodes[s.node].name.clone(),
                    Sign::Repression => format!("~{}", self.nodes[s.node].name),
                })
                .collect();
            out.push_str(&node.name);
            out.push_str(" : ");
            out.push_str(&node.logic.render_with(&names).replace('+', " + "));
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for RegulatoryNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Name(String),
    Tilde,
    Plus,
    Star,
    Open,
    Close,
}

fn tokenize(expr: &str, line: usize) -> Result<Vec<Token>, NetworkError> {
    let mut tokens = Vec::new();
    let mut chars = expr.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '~' => {
                chars.next();
                tokens.push(Token::Tilde);
            }
            '+' => {
                chars.next();
                tokens.push(Token::Plus);
            }
            '*' => {
                chars.next();
                tokens.push(Token::Star);
            }
            '(' => {
                chars.next();
                tokens.push(Token::Open);
            }
            ')' => {
                chars.next();
                tokens.push(Token::Close);
            }
            c if is_name_char(c) => {
                let mut name = String::new();
                while let Some(&c) = chars.peek() {
                    if !is_name_char(c) {
                        break;
                    }
                    name.push(c);
                    chars.next();
                }
                tokens.push(Token::Name(name));
            }
            other => {
                return Err(NetworkError::Syntax {
                    line,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(tokens)
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.' || c == '-'
}

type Atom = (String, Sign);

struct ExprParser<'a> {
    tokens: &'a [Token],
    pos: usize,
    line: usize,
}

impl ExprParser<'_> {
    fn err(&self, message: impl Into<String>) -> NetworkError {
        NetworkError::Syntax {
            line: self.line,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn atom(&mut self) -> Result<Atom, NetworkError> {
        let sign = if self.peek() == Some(&Token::Tilde) {
            self.pos += 1;
            Sign::Repression
        } else {
            Sign::Activation
        };
        match self.tokens.get(self.pos) {
            Some(Token::Name(name)) => {
                self.pos += 1;
                Ok((name.clone(), sign))
            }
            _ => Err(self.err("expected a node name")),
        }
    }

    fn sum(&mut self) -> Result<Vec<Atom>, NetworkError> {
        let mut terms = vec![self.atom()?];
        while self.peek() == Some(&Token::Plus) {
            self.pos += 1;
            terms.push(self.atom()?);
        }
        Ok(terms)
    }

    /// expr := sum | factor (("*")? factor)*   where factor := "(" sum ")" | atom
    fn expr(&mut self) -> Result<Vec<Vec<Atom>>, NetworkError> {
        if self.tokens.is_empty() {
            return Err(self.err("empty logic"));
        }
        let mut factors: Vec<Vec<Atom>> = Vec::new();
        let mut saw_plus_at_top = false;
        loop {
            match self.peek() {
                None => break,
                Some(Token::Open) => {
                    self.pos += 1;
                    let inner = self.sum()?;
                    if self.peek() != Some(&Token::Close) {
                        return Err(self.err("expected `)`"));
                    }
                    self.pos += 1;
                    factors.push(inner);
                }
                Some(Token::Name(_)) | Some(Token::Tilde) => {
                    let atom = self.atom()?;
                    if self.peek() == Some(&Token::Plus) {
                        if !factors.is_empty() {
                            return Err(self.err("sums must be parenthesized inside a product"));
                        }
                        self.pos += 1;
                        let mut rest = self.sum()?;
                        rest.insert(0, atom);
                        factors.push(rest);
                        saw_plus_at_top = true;
                    } else {
                        factors.push(vec![atom]);
                    }
                }
                Some(_) => return Err(self.err("expected a factor")),
            }
            match self.peek() {
                None => break,
                Some(Token::Star) => {
                    self.pos += 1;
                    if self.peek().is_none() {
                        return Err(self.err("dangling `*`"));
                    }
                }
                Some(Token::Plus) => {
                    return Err(self.err("sums of products are not supported"));
                }
                Some(Token::Close) => return Err(self.err("unbalanced `)`")),
                Some(_) => {}
            }
            if saw_plus_at_top && self.peek().is_some() {
                return Err(self.err("sums must be parenthesized inside a product"));
            }
        }
        Ok(factors)
    }
}

/// Parses and validates network text.
pub fn parse_network(text: &str) -> Result<RegulatoryNetwork, NetworkError> {
    struct Line {
        number: usize,
        name: String,
        factors: Vec<Vec<Atom>>,
    }

    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (name, expr) = content
            .split_once(':')
            .ok_or_else(|| NetworkError::Syntax {
                line: number,
                message: "expected `name : expr`".into(),
            })?;
        let name = name.trim();
        if name.is_empty() || !name.chars().all(is_name_char) {
            return Err(NetworkError::Syntax {
                line: number,
                message: format!("invalid node name `{name}`"),
            });
        }
        let tokens = tokenize(expr, number)?;
        let factors = ExprParser {
            tokens: &tokens,
            pos: 0,
            line: number,
        }
        .expr()?;
        lines.push(Line {
            number,
            name: name.to_string(),
            factors,
        });
    }
    if lines.is_empty() {
        return Err(NetworkError::Syntax {
            line: 0,
            message: "no nodes declared".into(),
        });
    }

    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, line) in lines.iter().enumerate() {
        if index.insert(line.name.as_str(), i).is_some() {
            return Err(NetworkError::DuplicateNode {
                name: line.name.clone(),
            });
        }
    }

    let mut nodes = Vec::with_capacity(lines.len());
    for (target, line) in lines.iter().enumerate() {
        let mut seen: HashMap<usize, Sign> = HashMap::new();
        let mut factor_sources: Vec<Vec<usize>> = Vec::new();
        for factor in &line.factors {
            let mut members = Vec::new();
            for (name, sign) in factor {
                let src =
                    *index
                        .get(name.as_str())
                        .ok_or_else(|| NetworkError::UnknownIdentifier {
                            name: name.clone(),
                            line: line.number,
                        })?;
                if let Some(previous) = seen.insert(src, *sign) {
                    return Err(if previous == *sign {
                        NetworkError::LogicSourceMismatch {
                            node: line.name.clone(),
                            source_node: name.clone(),
                        }
                    } else {
                        NetworkError::DuplicateEdge {
                            source_node: name.clone(),
                            target: line.name.clone(),
                        }
                    });
                }
                if src == target && *sign == Sign::Repression {
                    return Err(NetworkError::RepressingSelfEdge {
                        node: line.name.clone(),
                    });
                }
                members.push(src);
            }
            factor_sources.push(members);
        }
        let mut sources: Vec<Source> = seen
            .into_iter()
            .map(|(node, sign)| Source { node, sign })
            .collect();
        sources.sort_by_key(|s| s.node);
        let position = |src: usize| sources.iter().position(|s| s.node == src).unwrap();
        let factors = factor_sources
            .iter()
            .map(|members| members.iter().map(|&m| position(m)).collect())
            .collect();
        let logic = ProductOfSums::new(factors).expect("factors partition the sources");
        nodes.push(NodeRecord {
            name: line.name.clone(),
            sources,
            targets: Vec::new(),
            logic,
        });
    }

    for target in 0..nodes.len() {
        let sources: Vec<usize> = nodes[target].sources.iter().map(|s| s.node).collect();
        for src in sources {
            nodes[src].targets.push(target);
        }
    }
    for node in &mut nodes {
        node.targets.sort_unstable();
        if node.sources.is_empty() {
            return Err(NetworkError::DanglingNode {
                node: node.name.clone(),
                missing: "source",
            });
        }
        if node.targets.is_empty() {
            return Err(NetworkError::DanglingNode {
                node: node.name.clone(),
                missing: "target",
            });
        }
    }
    Ok(RegulatoryNetwork { nodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    const REPRESSILATOR: &str = "x1 : ~x3\nx2 : ~x1\nx3 : ~x2";

    #[test]
    fn repressilator_parses() {
        let net = parse_network(REPRESSILATOR).unwrap();
        assert_eq!(net.len(), 3);
        assert_eq!(
            net.node(0).sources,
            vec![Source {
                node: 2,
                sign: Sign::Repression
            }]
        );
        assert_eq!(net.node(0).targets, vec![1]);
        assert_eq!(net.node(2).targets, vec![0]);
    }

    #[test]
    fn self_activator() {
        let net = parse_network("x : x").unwrap();
        assert_eq!(
            net.node(0).sources,
            vec![Source {
                node: 0,
                sign: Sign::Activation
            }]
        );
        assert_eq!(net.node(0).targets, vec![0]);
    }

    #[test]
    fn repressing_self_edge_rejected() {
        assert!(matches!(
            parse_network("x : ~x"),
            Err(NetworkError::RepressingSelfEdge { .. })
        ));
    }

    #[test]
    fn grammar_forms() {
        let net = parse_network("x : (y+z)(~w)\ny : x\nz : x\nw : x + y").unwrap();
        let x = net.node(0);
        assert_eq!(x.sources.len(), 3);
        // sources sorted: y(1), z(2), w(3)
        assert_eq!(x.logic.factors(), &[vec![0, 1], vec![2]]);
        assert_eq!(net.node(3).logic.factors(), &[vec![0, 1]]);

        let net = parse_network("a : (~b)(~c)\nb : a * c\nc : a").unwrap();
        assert!(net.node(0).logic.is_product());
        assert!(net.node(1).logic.is_product());
    }

    #[test]
    fn sources_reordered_by_index() {
        let net = parse_network("a : (c)(b + a)\nb : a\nc : a").unwrap();
        let a = net.node(0);
        assert_eq!(
            a.sources.iter().map(|s| s.node).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert_eq!(a.logic.factors(), &[vec![0, 1], vec![2]]);
    }

    #[test]
    fn comments_and_blank_lines() {
        let net = parse_network("# header\n\nx : y # trailing\ny : x\n").unwrap();
        assert_eq!(net.len(), 2);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            parse_network("x : y"),
            Err(NetworkError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse_network("x y"),
            Err(NetworkError::Syntax { .. })
        ));
        assert!(matches!(
            parse_network("x : (y"),
            Err(NetworkError::Syntax { .. })
        ));
        assert!(matches!(
            parse_network("x : y + (z)\ny : x\nz : x"),
            Err(NetworkError::Syntax { .. })
        ));
        assert!(matches!(
            parse_network("x : (y)(z) + y\ny : x\nz : x"),
            Err(NetworkError::Syntax { .. })
        ));
        assert!(matches!(
            parse_network("x : y + ~y\ny : x"),
            Err(NetworkError::DuplicateEdge { .. })
        ));
        assert!(matches!(
            parse_network("x : (y)(y)\ny : x"),
            Err(NetworkError::LogicSourceMismatch { .. })
        ));
        assert!(matches!(
            parse_network("x : y\ny : y"),
            Err(NetworkError::DanglingNode {
                missing: "target",
                ..
            })
        ));
        assert!(matches!(
            parse_network("x : x\nx : x"),
            Err(NetworkError::DuplicateNode { .. })
        ));
    }

    #[test]
    fn logic_eval_examples() {
        let net = parse_network("a : (b)(c + d)\nb : a\nc : a\nd : a").unwrap();
        assert_eq!(net.node(0).logic_eval(&[2.0, 1.0, 3.0]).unwrap(), 8.0);
        assert_eq!(ProductOfSums::sum(2).eval(&[1.0, 1.0]), 2.0);
        assert_eq!(ProductOfSums::product(3).eval(&[2.0, 3.0, 5.0]), 30.0);
        assert!(matches!(
            net.node(0).logic_eval(&[1.0]),
            Err(NetworkError::ArityMismatch {
                expected: 3,
                got: 1
            })
        ));
    }

    #[test]
    fn valuation_examples() {
        let low = [1, 1];
        let high = [3, 5];
        assert_eq!(
            valuation(InputCombination(0), &low, &high).unwrap(),
            vec![1, 1]
        );
        assert_eq!(
            valuation(InputCombination(3), &low, &high).unwrap(),
            vec![3, 5]
        );
        assert_eq!(
            valuation(InputCombination(1), &low, &high).unwrap(),
            vec![3, 1]
        );
    }

    #[test]
    fn sign_does_not_enter_logic_eval() {
        let act = parse_network("x : y\ny : x").unwrap();
        let rep = parse_network("x : ~y\ny : x").unwrap();
        assert_eq!(
            act.node(0).logic_eval(&[2.5]).unwrap(),
            rep.node(0).logic_eval(&[2.5]).unwrap()
        );
    }

    #[test]
    fn render_round_trip() {
        for text in [
            REPRESSILATOR,
            "x : x",
            "a : (c)(b + a)\nb : ~a\nc : a * b",
            "p : (a + c)(~m)\na : ~w\nc : (a)(~w)\nw : p\nm : p",
        ] {
            let net = parse_network(text).unwrap();
            assert_eq!(parse_network(&net.render()).unwrap(), net);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn logic_eval_strictly_increasing(
                values in prop::collection::vec(0.01f64..100.0, 3),
                k in 0usize..3,
                bump in 0.01f64..10.0,
                shape in 0usize..3,
            ) {
                let logic = match shape {
                    0 => ProductOfSums::sum(3),
                    1 => ProductOfSums::product(3),
                    _ => ProductOfSums::new(vec![vec![0], vec![1, 2]]).unwrap(),
                };
                let mut raised = values.clone();
                raised[k] += bump;
                prop_assert!(logic.eval(&raised) > logic.eval(&values));
            }
        }
    }
}
