//! Text model format, expression parsing, and grid output.
//!
//! A model file is line-oriented. `#` starts a comment, blank lines are
//! ignored, and `@` introduces a section:
//!
//! ```text
//! @parameters        one parameter name per line
//! @states N          number of states (states are 0..N)
//! @initial I         initial state
//! @labels            lines `I: "name"`
//! @transitions       lines `SRC DST EXPR`
//! @rewards NAME      lines `I: EXPR`; unlisted states get reward 0
//! ```
//!
//! Expressions are rational: identifiers, decimal literals, unary minus,
//! `+ - * /`, and parentheses. Unary minus binds tightest, then `*` and `/`,
//! then `+` and `-`; binary operators are left-associative. Decimal literals
//! are exact (`0.25` is one quarter, not the nearest float).

use std::collections::BTreeMap;
use std::io::{self, Write};

use crate::acir::{AcirError, DagStore, NodeId, NodeKind};
use crate::pmc::{Pmc, RewardMap};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        msg: msg.into(),
    })
}

/// A parsed model: the chain plus its named reward structures.
#[derive(Debug)]
pub struct ParsedModel {
    pub pmc: Pmc,
    pub rewards: BTreeMap<String, RewardMap>,
}

impl ParsedModel {
    pub fn reward(&self, name: &str) -> Option<&RewardMap> {
        self.rewards.get(name)
    }
}

enum Section {
    None,
    Parameters,
    Labels,
    Transitions,
    Rewards,
}

pub fn parse_model(text: &str) -> Result<ParsedModel, ParseError> {
    let mut store = DagStore::new();
    let mut state_count: Option<usize> = None;
    let mut initial: Option<u32> = None;
    let mut labels: Vec<(usize, u32, String)> = Vec::new();
    let mut transitions: Vec<(usize, u32, u32, NodeId)> = Vec::new();
    let mut rewards: Vec<(String, Vec<(usize, u32, NodeId)>)> = Vec::new();
    let mut section = Section::None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }

        if let Some(directive) = line.strip_prefix('@') {
            let (name, arg) = match directive.split_once(char::is_whitespace) {
                Some((n, a)) => (n, a.trim()),
                None => (directive, ""),
            };
            section = match name {
                "parameters" => Section::Parameters,
                "states" => {
                    let n: usize = arg
                        .parse()
                        .ok()
                        .filter(|&n| n > 0)
                        .ok_or(ParseError {
                            line: line_no,
                            msg: format!("@states needs a positive count, got `{arg}`"),
                        })?;
                    if state_count.replace(n).is_some() {
                        return err(line_no, "duplicate @states");
                    }
                    Section::None
                }
                "initial" => {
                    let i: u32 = arg.parse().map_err(|_| ParseError {
                        line: line_no,
                        msg: format!("@initial needs a state index, got `{arg}`"),
                    })?;
                    if initial.replace(i).is_some() {
                        return err(line_no, "duplicate @initial");
                    }
                    Section::None
                }
                "labels" => Section::Labels,
                "transitions" => Section::Transitions,
                "rewards" => {
                    if arg.is_empty() {
                        return err(line_no, "@rewards needs a name");
                    }
                    if rewards.iter().any(|(n, _)| n == arg) {
                        return err(line_no, format!("duplicate @rewards `{arg}`"));
                    }
                    rewards.push((arg.to_owned(), Vec::new()));
                    Section::Rewards
                }
                other => return err(line_no, format!("unknown directive `@{other}`")),
            };
            continue;
        }

        match &section {
            Section::None => return err(line_no, "content outside any section"),
            Section::Parameters => {
                if !is_ident(line) {
                    return err(line_no, format!("invalid parameter name `{line}`"));
                }
                if store.param_id(line).is_some() {
                    return err(line_no, format!("duplicate parameter `{line}`"));
                }
                store.register_param(line);
            }
            Section::Labels => {
                let (state, rest) = parse_state_prefix(line, line_no)?;
                let name = rest
                    .strip_prefix('"')
                    .and_then(|r| r.strip_suffix('"'))
                    .filter(|n| !n.is_empty() && !n.contains('"'))
                    .ok_or(ParseError {
                        line: line_no,
                        msg: format!("label needs a quoted name, got `{rest}`"),
                    })?;
                labels.push((line_no, state, name.to_owned()));
            }
            Section::Transitions => {
                let mut parts = line.splitn(3, char::is_whitespace);
                let (src, dst, expr) = match (parts.next(), parts.next(), parts.next()) {
                    (Some(s), Some(d), Some(e)) => (s, d, e.trim()),
                    _ => return err(line_no, "transition needs `SRC DST EXPR`"),
                };
                let src: u32 = src.parse().map_err(|_| ParseError {
                    line: line_no,
                    msg: format!("invalid source state `{src}`"),
                })?;
                let dst: u32 = dst.parse().map_err(|_| ParseError {
                    line: line_no,
                    msg: format!("invalid destination state `{dst}`"),
                })?;
                let node = parse_expr_at(&mut store, expr, line_no)?;
                transitions.push((line_no, src, dst, node));
            }
            Section::Rewards => {
                let (state, rest) = parse_state_prefix(line, line_no)?;
                let node = parse_expr_at(&mut store, rest, line_no)?;
                let current = rewards.last_mut().expect("inside a rewards section");
                if current.1.iter().any(|&(_, s, _)| s == state) {
                    return err(line_no, format!("duplicate reward for state {state}"));
                }
                current.1.push((line_no, state, node));
            }
        }
    }

    let n = match state_count {
        Some(n) => n,
        None => return err(text.lines().count(), "missing @states"),
    };
    let init = match initial {
        Some(i) => i,
        None => return err(text.lines().count(), "missing @initial"),
    };
    if init as usize >= n {
        return err(1, format!("initial state {init} out of range"));
    }

    let zero = store
        .mk_const(Rational::zero())
        .expect("fresh store has room");
    let mut pmc = Pmc::new(store, n, init);
    for (line, src, dst, node) in transitions {
        pmc.add_transition(src, dst, node)
            .map_err(|e| ParseError {
                line,
                msg: e.to_string(),
            })?;
    }
    for (line, state, name) in labels {
        pmc.add_label(&name, state).map_err(|e| ParseError {
            line,
            msg: e.to_string(),
        })?;
    }
    let mut reward_maps = BTreeMap::new();
    for (name, entries) in rewards {
        let mut map = RewardMap::uniform(n, zero);
        for (line, state, node) in entries {
            if state as usize >= n {
                return err(line, format!("state {state} out of range"));
            }
            map.set(state, node);
        }
        reward_maps.insert(name, map);
    }
    // Solvers require every state to be reachable from the initial one.
    let remap = pmc.trim_unreachable();
    let reward_maps = reward_maps
        .into_iter()
        .map(|(name, map)| (name, map.remap(&remap)))
        .collect();
    Ok(ParsedModel {
        pmc,
        rewards: reward_maps,
    })
}

/// Parses `I:` and returns the state and the trimmed remainder.
fn parse_state_prefix(line: &str, line_no: usize) -> Result<(u32, &str), ParseError> {
    let (head, rest) = line.split_once(':').ok_or(ParseError {
        line: line_no,
        msg: "expected `STATE: ...`".to_owned(),
    })?;
    let state: u32 = head.trim().parse().map_err(|_| ParseError {
        line: line_no,
        msg: format!("invalid state index `{}`", head.trim()),
    })?;
    Ok((state, rest.trim()))
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses one rational expression into the store. Parameters must already be
/// registered.
pub fn parse_expression(store: &mut DagStore, input: &str) -> Result<NodeId, ParseError> {
    parse_expr_at(store, input, 1)
}

fn parse_expr_at(store: &mut DagStore, input: &str, line: usize) -> Result<NodeId, ParseError> {
    let tokens = tokenize(input).map_err(|msg| ParseError { line, msg })?;
    let mut parser = ExprParser {
        store,
        tokens: &tokens,
        pos: 0,
    };
    let node = parser.expr().map_err(|msg| ParseError { line, msg })?;
    if parser.pos != tokens.len() {
        return err(line, format!("unexpected `{}`", tokens[parser.pos]));
    }
    Ok(node)
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(Rational),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
}

impl std::fmt::Display for Token {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Token::Ident(s) => write!(f, "{s}"),
            Token::Number(q) => write!(f, "{q}"),
            Token::Plus => write!(f, "+"),
            Token::Minus => write!(f, "-"),
            Token::Star => write!(f, "*"),
            Token::Slash => write!(f, "/"),
            Token::LParen => write!(f, "("),
            Token::RParen => write!(f, ")"),
        }
    }
}

fn tokenize(input: &str) -> Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let bytes = input.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '/' => {
                tokens.push(Token::Slash);
                i += 1;
            }
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    let frac_start = i;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                    if i == frac_start {
                        return Err(format!("malformed number `{}`", &input[start..i]));
                    }
                }
                let text = &input[start..i];
                let value = Rational::from_decimal_str(text)
                    .ok_or_else(|| format!("malformed number `{text}`"))?;
                tokens.push(Token::Number(value));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push(Token::Ident(input[start..i].to_owned()));
            }
            other => return Err(format!("unexpected character `{other}`")),
        }
    }
    Ok(tokens)
}

struct ExprParser<'a> {
    store: &'a mut DagStore,
    tokens: &'a [Token],
    pos: usize,
}

fn lift(r: Result<NodeId, AcirError>) -> Result<NodeId, String> {
    r.map_err(|e| e.to_string())
}

impl ExprParser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn expr(&mut self) -> Result<NodeId, String> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    acc = lift(self.store.mk_add(acc, rhs))?;
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    acc = lift(self.store.mk_sub(acc, rhs))?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<NodeId, String> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    acc = lift(self.store.mk_mul(acc, rhs))?;
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    acc = lift(self.store.mk_div(acc, rhs))?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<NodeId, String> {
        match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                let inner = self.factor()?;
                lift(self.store.mk_neg(inner))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<NodeId, String> {
        match self.peek().cloned() {
            Some(Token::Number(q)) => {
                self.pos += 1;
                lift(self.store.mk_const(q))
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                lift(self.store.mk_param(&name))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.peek() {
                    Some(Token::RParen) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    _ => Err("missing `)`".to_owned()),
                }
            }
            Some(tok) => Err(format!("unexpected `{tok}`")),
            None => Err("unexpected end of expression".to_owned()),
        }
    }
}

/// Renders a circuit as expression text that reparses to the same node.
///
/// Right operands are always parenthesized one level tighter than the
/// operator, so the printed string encodes the tree shape exactly and
/// printing is a fixpoint of parse-then-print.
pub fn expression_string(store: &DagStore, node: NodeId) -> String {
    render(store, node, 0)
}

fn render(store: &DagStore, node: NodeId, parent_prec: u8) -> String {
    let (text, prec) = match store.kind(node) {
        NodeKind::Const(c) => {
            let value = store.constant(c);
            let prec = if value.is_negative() {
                1 // needs protection like a unary minus
            } else if value.denom() != &num_bigint::BigInt::from(1) {
                2 // renders as a division
            } else {
                3
            };
            (value.to_string(), prec)
        }
        NodeKind::Param(p) => (store.params()[p as usize].clone(), 3),
        NodeKind::Add(l, r) => {
            // Prefer subtraction syntax for additive inverses.
            if let NodeKind::Neg(x) = store.kind(r) {
                (
                    format!("{} - {}", render(store, l, 1), render(store, x, 2)),
                    1,
                )
            } else if store.const_value(r).is_some_and(Rational::is_negative) {
                let pos = -store.const_value(r).expect("checked").clone();
                (format!("{} - {}", render(store, l, 1), pos), 1)
            } else {
                (
                    format!("{} + {}", render(store, l, 1), render(store, r, 2)),
                    1,
                )
            }
        }
        NodeKind::Mul(l, r) => {
            if let NodeKind::Inv(x) = store.kind(r) {
                (
                    format!("{} / {}", render(store, l, 2), render(store, x, 3)),
                    2,
                )
            } else if let NodeKind::Inv(x) = store.kind(l) {
                (
                    format!("{} / {}", render(store, r, 2), render(store, x, 3)),
                    2,
                )
            } else {
                (
                    format!("{} * {}", render(store, l, 2), render(store, r, 3)),
                    2,
                )
            }
        }
        NodeKind::Neg(x) => (format!("-{}", render(store, x, 3)), 2),
        NodeKind::Inv(x) => (format!("1 / {}", render(store, x, 3)), 2),
    };
    if prec < parent_prec {
        format!("({text})")
    } else {
        text
    }
}

/// Renders a parsed model back to its text form. Parsing the result yields a
/// structurally identical model, so print-parse-print is a fixpoint.
pub fn print_model(model: &ParsedModel) -> String {
    let pmc = &model.pmc;
    let store = pmc.store();
    let mut out = String::new();
    if store.param_count() > 0 {
        out.push_str("@parameters\n");
        for p in store.params() {
            out.push_str(p);
            out.push('\n');
        }
    }
    out.push_str(&format!("@states {}\n", pmc.state_count()));
    out.push_str(&format!("@initial {}\n", pmc.initial()));
    if !pmc.labels().is_empty() {
        out.push_str("@labels\n");
        for (name, states) in pmc.labels() {
            for state in states {
                out.push_str(&format!("{state}: \"{name}\"\n"));
            }
        }
    }
    out.push_str("@transitions\n");
    for s in 0..pmc.state_count() as u32 {
        for (&dst, &node) in pmc.row(s) {
            out.push_str(&format!("{s} {dst} {}\n", expression_string(store, node)));
        }
    }
    for (name, map) in &model.rewards {
        out.push_str(&format!("@rewards {name}\n"));
        for s in 0..map.len() as u32 {
            let node = map.get(s);
            if store.const_value(node).is_some_and(Rational::is_zero) {
                continue;
            }
            out.push_str(&format!("{s}: {}\n", expression_string(store, node)));
        }
    }
    out
}

/// One grid output row: the sample point in parameter declaration order,
/// then the result fields (a value, or interval bounds).
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub point: Vec<f64>,
    pub values: Vec<f64>,
}

/// Writes rows as whitespace-separated decimal columns with a blank line
/// whenever any non-innermost coordinate steps, which gnuplot and friends
/// read as mesh blocks. Points must be ordered outer-axis-slowest.
pub fn write_dat<W: Write>(out: &mut W, rows: &[GridRow]) -> io::Result<()> {
    for (i, row) in rows.iter().enumerate() {
        if i > 0 {
            let prev = &rows[i - 1];
            let block = row.point.len().saturating_sub(1);
            if prev.point[..block] != row.point[..block] {
                writeln!(out)?;
            }
        }
        let fields: Vec<String> = row
            .point
            .iter()
            .chain(row.values.iter())
            .map(|v| v.to_string())
            .collect();
        writeln!(out, "{}", fields.join(" "))?;
    }
    Ok(())
}
