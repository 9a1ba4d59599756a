//! Petri net data model, firing semantics and the net-description format.
//!
//! The file format is line oriented (`#` starts a comment):
//!
//! ```text
//! net <id>
//! mode closed|open
//! place <id> [tokens <n>] [external]
//! trans <id> rate <int>[/<int>]
//!   in  (<place-id> <weight>)*
//!   out (<place-id> <weight>)*
//! marking <place>=<n>(,<place>=<n>)*     # optional, overrides `tokens`
//! ```
//!
//! Open nets are always written in their closed form with exactly one place
//! flagged `external`; the analysis deletes that place itself.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::rational::{format_rational, parse_rational, Q};
use num_traits::Signed;

/// A Petri net: places, transitions and the two incidence matrices.
///
/// Matrices are stored column-wise (`pre[t][p]`), which is the access pattern
/// of every analysis (bags are columns).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PetriNet {
    name: String,
    places: Vec<String>,
    transitions: Vec<String>,
    pre: Vec<Vec<u32>>,
    post: Vec<Vec<u32>>,
}

/// A marking: one token count per place, in place order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Marking(pub Vec<u32>);

/// Firing rates, one positive exact rational per transition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RateTable(pub Vec<Q>);

/// Whether the described net is used as is, or with its external place deleted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Closed,
    Open,
}

/// Everything a net file describes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetFile {
    pub net: PetriNet,
    pub rates: RateTable,
    pub initial: Marking,
    pub mode: Mode,
    /// Index of the `external` place (open mode only).
    pub external: Option<usize>,
}

/// Errors raised while reading nets, markings, or firing transitions.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("no places")]
    NoPlaces,
    #[error("duplicate place id `{0}`")]
    DuplicatePlace(String),
    #[error("duplicate transition id `{0}`")]
    DuplicateTransition(String),
    #[error("duplicated transition: `{0}` and `{1}` have identical input and output")]
    DuplicatedTransition(String, String),
    #[error("transition `{0}` has a non-positive rate")]
    NonPositiveRate(String),
    #[error("{0}")]
    External(String),
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("transition `{0}` is not enabled")]
    NotEnabled(String),
    #[error("malformed marking: {0}")]
    Marking(String),
}

/// A structural violation reported by [`validate_net`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// A transition whose firing leaves every marking unchanged.
    Useless(String),
    /// Two transitions with identical input and output.
    Duplicated(String, String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Useless(t) => write!(f, "useless transition {t}"),
            Violation::Duplicated(a, b) => write!(f, "duplicated transitions {a},{b}"),
        }
    }
}

impl PetriNet {
    /// Builds a net from column-wise incidence data.
    ///
    /// Panics if dimensions disagree; use [`parse_net`] for untrusted input.
    pub fn new(
        name: impl Into<String>,
        places: Vec<String>,
        transitions: Vec<String>,
        pre: Vec<Vec<u32>>,
        post: Vec<Vec<u32>>,
    ) -> Self {
        assert_eq!(transitions.len(), pre.len());
        assert_eq!(transitions.len(), post.len());
        for col in pre.iter().chain(&post) {
            assert_eq!(col.len(), places.len());
        }
        PetriNet { name: name.into(), places, transitions, pre, post }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn places(&self) -> &[String] {
        &self.places
    }

    pub fn transitions(&self) -> &[String] {
        &self.transitions
    }

    pub fn place_count(&self) -> usize {
        self.places.len()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.len()
    }

    pub fn place_index(&self, id: &str) -> Option<usize> {
        self.places.iter().position(|p| p == id)
    }

    pub fn transition_index(&self, id: &str) -> Option<usize> {
        self.transitions.iter().position(|t| t == id)
    }

    /// Column `W⁻(·, t)`.
    pub fn pre(&self, t: usize) -> &[u32] {
        &self.pre[t]
    }

    /// Column `W⁺(·, t)`.
    pub fn post(&self, t: usize) -> &[u32] {
        &self.post[t]
    }

    /// Column of the incidence matrix `W = W⁺ − W⁻`.
    pub fn delta(&self, t: usize) -> Vec<i64> {
        self.pre[t].iter().zip(&self.post[t]).map(|(&a, &b)| b as i64 - a as i64).collect()
    }

    /// Largest entry of both incidence matrices.
    pub fn max_weight(&self) -> u32 {
        self.pre.iter().chain(&self.post).flatten().copied().max().unwrap_or(0)
    }

    /// The same net with place `p` (and its arcs) removed.
    pub fn without_place(&self, p: usize) -> PetriNet {
        let drop = |col: &Vec<u32>| col.iter().enumerate().filter(|&(i, _)| i != p).map(|(_, &v)| v).collect();
        PetriNet {
            name: self.name.clone(),
            places: self.places.iter().enumerate().filter(|&(i, _)| i != p).map(|(_, s)| s.clone()).collect(),
            transitions: self.transitions.clone(),
            pre: self.pre.iter().map(drop).collect(),
            post: self.post.iter().map(drop).collect(),
        }
    }

    /// Renders a marking as a sum such as `q3+r0` or `2p0+p2` (`0` if empty).
    pub fn format_marking(&self, m: &Marking) -> String {
        format_vector(&self.places, &m.0)
    }
}

/// Formats a nonnegative vector over `names` as a sum of places.
pub fn format_vector(names: &[String], v: &[u32]) -> String {
    let terms: Vec<String> = v
        .iter()
        .enumerate()
        .filter(|&(_, &k)| k > 0)
        .map(|(i, &k)| if k == 1 { names[i].clone() } else { format!("{k}{}", names[i]) })
        .collect();
    if terms.is_empty() {
        "0".to_string()
    } else {
        terms.join("+")
    }
}

impl Marking {
    pub fn zero(n: usize) -> Self {
        Marking(vec![0; n])
    }

    /// Total number of tokens.
    pub fn norm(&self) -> u64 {
        self.0.iter().map(|&k| k as u64).sum()
    }

    pub fn get(&self, p: usize) -> u32 {
        self.0[p]
    }

    /// The marking without coordinate `p`.
    pub fn without_place(&self, p: usize) -> Marking {
        Marking(self.0.iter().enumerate().filter(|&(i, _)| i != p).map(|(_, &v)| v).collect())
    }
}

/// `true` iff `m ≥ W⁻(·, t)` componentwise.
pub fn enabled(net: &PetriNet, m: &Marking, t: usize) -> bool {
    net.pre(t).iter().zip(&m.0).all(|(&need, &have)| have >= need)
}

/// Fires `t` from `m`, returning `m + W(·, t)`.
pub fn fire(net: &PetriNet, m: &Marking, t: usize) -> Result<Marking, NetError> {
    if !enabled(net, m, t) {
        return Err(NetError::NotEnabled(net.transitions[t].clone()));
    }
    Ok(Marking(
        m.0.iter().zip(net.pre(t)).zip(net.post(t)).map(|((&k, &a), &b)| k - a + b).collect(),
    ))
}

/// Like [`enabled`] but addressed by transition id.
pub fn enabled_by_id(net: &PetriNet, m: &Marking, t: &str) -> Result<bool, NetError> {
    let i = net.transition_index(t).ok_or_else(|| NetError::UnknownTransition(t.to_string()))?;
    Ok(enabled(net, m, i))
}

/// Checks the two structural assumptions: no useless and no duplicated
/// transitions. Returns the list of violations (empty when well formed).
pub fn validate_net(net: &PetriNet) -> Vec<Violation> {
    let mut out = Vec::new();
    for t in 0..net.transition_count() {
        if net.pre(t) == net.post(t) {
            out.push(Violation::Useless(net.transitions[t].clone()));
        }
    }
    let mut seen: HashMap<(&[u32], &[u32]), usize> = HashMap::new();
    for t in 0..net.transition_count() {
        if let Some(&u) = seen.get(&(net.pre(t), net.post(t))) {
            out.push(Violation::Duplicated(net.transitions[u].clone(), net.transitions[t].clone()));
        } else {
            seen.insert((net.pre(t), net.post(t)), t);
        }
    }
    out
}

/// Parses a marking literal `p=1,q=2` against the places of `net`.
/// Unlisted places get zero tokens.
pub fn parse_marking(net: &PetriNet, text: &str) -> Result<Marking, NetError> {
    parse_marking_over(net.places(), text)
}

/// Parses a marking literal over an explicit list of place ids.
pub fn parse_marking_over(places: &[String], text: &str) -> Result<Marking, NetError> {
    let mut m = Marking::zero(places.len());
    let text = text.trim();
    if text.is_empty() {
        return Ok(m);
    }
    let mut seen = vec![false; places.len()];
    for item in text.split(',') {
        let (name, count) = item
            .split_once('=')
            .ok_or_else(|| NetError::Marking(format!("`{item}` is not of the form <place>=<count>")))?;
        let (name, count) = (name.trim(), count.trim());
        let p = places
            .iter()
            .position(|x| x == name)
            .ok_or_else(|| NetError::Marking(format!("unknown place `{name}`")))?;
        if seen[p] {
            return Err(NetError::Marking(format!("place `{name}` listed twice")));
        }
        seen[p] = true;
        if count.is_empty() || !count.chars().all(|c| c.is_ascii_digit()) {
            return Err(NetError::Marking(format!("`{count}` is not a nonnegative integer")));
        }
        m.0[p] = count.parse().map_err(|_| NetError::Marking(format!("`{count}` is out of range")))?;
    }
    Ok(m)
}

/// Renders a marking as the literal accepted by [`parse_marking`].
pub fn marking_literal(net: &PetriNet, m: &Marking) -> String {
    net.places()
        .iter()
        .zip(&m.0)
        .filter(|(_, &k)| k > 0)
        .map(|(p, k)| format!("{p}={k}"))
        .collect::<Vec<_>>()
        .join(",")
}

struct PendingTransition {
    id: String,
    rate: Q,
    arcs_in: Vec<(String, u32, usize, usize)>,
    arcs_out: Vec<(String, u32, usize, usize)>,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> NetError {
    NetError::Syntax { line, column, message: message.into() }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '\'' | '*'))
        && !matches!(s, "net" | "mode" | "place" | "trans" | "in" | "out" | "marking" | "tokens" | "external" | "rate")
}

/// Parses a net description (see the module docs for the grammar).
pub fn parse_net(text: &str) -> Result<NetFile, NetError> {
    let mut name: Option<String> = None;
    let mut mode: Option<Mode> = None;
    let mut places: Vec<String> = Vec::new();
    let mut tokens: Vec<u32> = Vec::new();
    let mut external: Vec<(usize, usize)> = Vec::new(); // (place, line)
    let mut transitions: Vec<PendingTransition> = Vec::new();
    let mut marking_lines: Vec<(String, usize)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        // Tokens with 1-based columns.
        let mut toks: Vec<(usize, &str)> = Vec::new();
        let mut start = None;
        for (i, ch) in content.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    toks.push((s, &content[s..i]));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            toks.push((s, &content[s..]));
        }
        let Some(&(kcol, keyword)) = toks.first() else { continue };
        let col = |i: usize| toks.get(i).map_or(content.len() + 1, |t| t.0 + 1);
        let args = &toks[1..];
        match keyword {
            "net" => {
                if name.is_some() {
                    return Err(syntax(line, kcol + 1, "`net` declared twice"));
                }
                match args {
                    [(_, id)] if is_identifier(id) => name = Some(id.to_string()),
                    _ => return Err(syntax(line, col(1), "expected `net <id>`")),
                }
            }
            "mode" => {
                if mode.is_some() {
                    return Err(syntax(line, kcol + 1, "`mode` declared twice"));
                }
                mode = Some(match args {
                    [(_, "closed")] => Mode::Closed,
                    [(_, "open")] => Mode::Open,
                    _ => return Err(syntax(line, col(1), "expected `mode closed` or `mode open`")),
                });
            }
            "place" => {
                let Some(&(_, id)) = args.first() else {
                    return Err(syntax(line, col(1), "expected a place id"));
                };
                if !is_identifier(id) {
                    return Err(syntax(line, col(1), format!("`{id}` is not a valid identifier")));
                }
                if places.iter().any(|p| p == id) {
                    return Err(NetError::DuplicatePlace(id.to_string()));
                }
                let idx = places.len();
                places.push(id.to_string());
                tokens.push(0);
                let mut i = 2;
                let mut seen_tokens = false;
                while i < toks.len() {
                    match toks[i].1 {
                        "tokens" if !seen_tokens => {
                            let Some(&(_, n)) = toks.get(i + 1) else {
                                return Err(syntax(line, col(i + 1), "expected a token count after `tokens`"));
                            };
                            if !n.chars().all(|c| c.is_ascii_digit()) {
                                return Err(syntax(line, col(i + 1), format!("`{n}` is not a nonnegative integer")));
                            }
                            tokens[idx] = n.parse().map_err(|_| syntax(line, col(i + 1), "token count out of range"))?;
                            seen_tokens = true;
                            i += 2;
                        }
                        "external" if !external.iter().any(|&(p, _)| p == idx) => {
                            external.push((idx, line));
                            i += 1;
                        }
                        other => return Err(syntax(line, col(i), format!("unexpected `{other}` in place declaration"))),
                    }
                }
            }
            "trans" => {
                let (id, rate) = match args {
                    [(_, id), (_, "rate"), (_, r)] => (*id, *r),
                    _ => return Err(syntax(line, col(1), "expected `trans <id> rate <int>[/<int>]`")),
                };
                if !is_identifier(id) {
                    return Err(syntax(line, col(1), format!("`{id}` is not a valid identifier")));
                }
                if transitions.iter().any(|t| t.id == id) {
                    return Err(NetError::DuplicateTransition(id.to_string()));
                }
                let rate = parse_rational(rate).map_err(|m| syntax(line, col(3), m))?;
                if !rate.is_positive() {
                    return Err(NetError::NonPositiveRate(id.to_string()));
                }
                transitions.push(PendingTransition { id: id.to_string(), rate, arcs_in: vec![], arcs_out: vec![] });
            }
            "in" | "out" => {
                let Some(t) = transitions.last_mut() else {
                    return Err(syntax(line, kcol + 1, format!("`{keyword}` outside of a transition")));
                };
                if args.len() % 2 != 0 {
                    return Err(syntax(line, col(args.len()), "expected `<place-id> <weight>` pairs"));
                }
                for (k, pair) in args.chunks(2).enumerate() {
                    let (pc, p) = pair[0];
                    let (wc, w) = pair[1];
                    if !w.chars().all(|c| c.is_ascii_digit()) || w.is_empty() {
                        return Err(syntax(line, wc + 1, format!("`{w}` is not a positive integer weight")));
                    }
                    let w: u32 = w.parse().map_err(|_| syntax(line, wc + 1, "weight out of range"))?;
                    if w == 0 {
                        return Err(syntax(line, wc + 1, "arc weights must be positive"));
                    }
                    let _ = k;
                    let arc = (p.to_string(), w, line, pc + 1);
                    if keyword == "in" {
                        t.arcs_in.push(arc);
                    } else {
                        t.arcs_out.push(arc);
                    }
                }
            }
            "marking" => {
                let rest = content[kcol + "marking".len()..].trim().to_string();
                marking_lines.push((rest, line));
            }
            other => return Err(syntax(line, kcol + 1, format!("unknown keyword `{other}`"))),
        }
    }

    if places.is_empty() {
        return Err(NetError::NoPlaces);
    }
    let name = name.ok_or_else(|| syntax(1, 1, "missing `net <id>` declaration"))?;
    let mode = mode.unwrap_or(Mode::Closed);
    let external = match (mode, external.as_slice()) {
        (Mode::Closed, []) => None,
        (Mode::Closed, [(_, line), ..]) => {
            return Err(NetError::External(format!("line {line}: `external` place declared in closed mode")))
        }
        (Mode::Open, []) => return Err(NetError::External("open mode requires exactly one `external` place".into())),
        (Mode::Open, [(p, _)]) => Some(*p),
        (Mode::Open, [_, (_, line), ..]) => {
            return Err(NetError::External(format!("line {line}: more than one `external` place")))
        }
    };

    let n = places.len();
    let resolve = |arcs: &[(String, u32, usize, usize)]| -> Result<Vec<u32>, NetError> {
        let mut col = vec![0u32; n];
        for (p, w, line, c) in arcs {
            let i = places
                .iter()
                .position(|x| x == p)
                .ok_or_else(|| syntax(*line, *c, format!("unknown place `{p}`")))?;
            col[i] += w;
        }
        Ok(col)
    };
    let mut pre = Vec::new();
    let mut post = Vec::new();
    let mut ids = Vec::new();
    let mut rates = Vec::new();
    for t in &transitions {
        pre.push(resolve(&t.arcs_in)?);
        post.push(resolve(&t.arcs_out)?);
        ids.push(t.id.clone());
        rates.push(t.rate.clone());
    }
    let net = PetriNet::new(name, places, ids, pre, post);
    for v in validate_net(&net) {
        if let Violation::Duplicated(a, b) = v {
            return Err(NetError::DuplicatedTransition(a, b));
        }
    }
    let mut initial = Marking(tokens);
    for (text, line) in marking_lines {
        let m = parse_marking(&net, &text).map_err(|e| match e {
            NetError::Marking(msg) => syntax(line, 1, msg),
            other => other,
        })?;
        for (k, v) in m.0.iter().enumerate() {
            if *v > 0 {
                initial.0[k] = *v;
            }
        }
    }
    Ok(NetFile { net, rates: RateTable(rates), initial, mode, external })
}

/// Writes the canonical textual form of a net file.
///
/// `parse_net(&serialize_net(f)) == f` for every parsed `f`, and
/// serialization is a fixed point on canonical text.
pub fn serialize_net(file: &NetFile) -> String {
    let net = &file.net;
    let mut out = String::new();
    out.push_str(&format!("net {}\n", net.name));
    out.push_str(match file.mode {
        Mode::Closed => "mode closed\n",
        Mode::Open => "mode open\n",
    });
    for (i, p) in net.places.iter().enumerate() {
        out.push_str("place ");
        out.push_str(p);
        if file.initial.0[i] > 0 {
            out.push_str(&format!(" tokens {}", file.initial.0[i]));
        }
        if file.external == Some(i) {
            out.push_str(" external");
        }
        out.push('\n');
    }
    let arcs = |col: &[u32]| -> String {
        col.iter()
            .enumerate()
            .filter(|(_, &w)| w > 0)
            .map(|(i, w)| format!(" {} {}", net.places[i], w))
            .collect()
    };
    for t in 0..net.transition_count() {
        out.push_str(&format!("trans {} rate {}\n", net.transitions[t], format_rational(&file.rates.0[t])));
        out.push_str(&format!("  in{}\n", arcs(net.pre(t))));
        out.push_str(&format!("  out{}\n", arcs(net.post(t))));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::FIG1_OPEN;
    use crate::rational::{q, qi};

    fn fig1() -> NetFile {
        parse_net(FIG1_OPEN).unwrap()
    }

    fn m(net: &PetriNet, s: &str) -> Marking {
        parse_marking(net, s).unwrap()
    }

    #[test]
    fn parses_the_figure_net() {
        let f = fig1();
        assert_eq!(f.net.place_count(), 10);
        assert_eq!(f.net.transition_count(), 11);
        let q3 = f.net.place_index("q3").unwrap();
        let t0 = f.net.transition_index("t0").unwrap();
        assert_eq!(f.net.pre(t0)[q3], 3);
        assert_eq!(f.mode, Mode::Open);
        assert_eq!(f.external, f.net.place_index("p_ext"));
        assert_eq!(f.initial, m(&f.net, "q3=1,r0=1"));
        assert!(validate_net(&f.net).is_empty());
    }

    #[test]
    fn firing_follows_the_example_sequence() {
        let f = fig1();
        let net = f.net.without_place(f.external.unwrap());
        let t = |id: &str| net.transition_index(id).unwrap();
        let mut cur = m(&net, "q3=1,r0=1");
        for (tid, expect) in [("t5", "q2=1,r0=1"), ("t6", "q1=1,r0=1"), ("t3", "p0=1,r0=1"), ("t4", "p2=1,q3=3,r0=1")] {
            assert!(enabled(&net, &cur, t(tid)));
            cur = fire(&net, &cur, t(tid)).unwrap();
            assert_eq!(cur, m(&net, expect), "after {tid}");
        }
    }

    #[test]
    fn closed_figure_never_enables_t0_from_initial_marking() {
        let f = fig1();
        let t0 = f.net.transition_index("t0").unwrap();
        assert!(!enabled(&f.net, &m(&f.net, "q3=1,r0=1"), t0));
        assert!(!enabled(&f.net, &Marking::zero(10), t0));
        assert!(matches!(fire(&f.net, &Marking::zero(10), t0), Err(NetError::NotEnabled(_))));
        assert!(matches!(enabled_by_id(&f.net, &Marking::zero(10), "nope"), Err(NetError::UnknownTransition(_))));
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert_eq!(parse_net("net x\n"), Err(NetError::NoPlaces));
        let dup = "net x\nplace a\nplace b\ntrans t rate 1\n in a 1\n out b 1\ntrans u rate 2\n in a 1\n out b 1\n";
        assert!(matches!(parse_net(dup), Err(NetError::DuplicatedTransition(..))));
        let err = parse_net("net x\nplace a\nplace b\ntrans t rate 0\n in a 1\n out b 1\n").unwrap_err();
        assert!(matches!(err, NetError::NonPositiveRate(_)));
        let err = parse_net("net x\nplace a\nplace b\ntrans t rate 1.5\n in a 1\n out b 1\n").unwrap_err();
        assert!(matches!(err, NetError::Syntax { line: 4, column: 14, .. }), "{err:?}");
        let err = parse_net("net x\nplace a external\nplace b\n").unwrap_err();
        assert!(matches!(err, NetError::External(_)));
        let err = parse_net("net x\nmode open\nplace a external\nplace b external\n").unwrap_err();
        assert!(matches!(err, NetError::External(_)));
        let err = parse_net("net x\nmode open\nplace a\n").unwrap_err();
        assert!(matches!(err, NetError::External(_)));
        let err = parse_net("net x\nplace a\nplace a\n").unwrap_err();
        assert!(matches!(err, NetError::DuplicatePlace(_)));
        let err = parse_net("net x\nplace a\ntrans t rate 1\n in zz 1\n").unwrap_err();
        assert!(matches!(err, NetError::Syntax { line: 4, .. }));
    }

    #[test]
    fn validate_reports_useless_and_duplicated() {
        let net = PetriNet::new(
            "x",
            vec!["a".into(), "b".into()],
            vec!["t".into(), "u".into(), "v".into()],
            vec![vec![1, 0], vec![1, 0], vec![0, 1]],
            vec![vec![0, 1], vec![0, 1], vec![0, 1]],
        );
        let v: Vec<String> = validate_net(&net).iter().map(ToString::to_string).collect();
        assert_eq!(v, vec!["useless transition v".to_string(), "duplicated transitions t,u".to_string()]);
    }

    #[test]
    fn rates_are_exact() {
        let f = parse_net("net x\nplace a tokens 2\nplace b\ntrans t rate 6/4\n in a 1\n out b 1\ntrans u rate 3\n in b 1\n out a 1\n").unwrap();
        assert_eq!(f.rates.0, vec![q(3, 2), qi(3)]);
        assert_eq!(f.initial.norm(), 2);
    }

    #[test]
    fn marking_literals() {
        let f = fig1();
        assert_eq!(m(&f.net, "q3=1, r0=2").norm(), 3);
        assert!(parse_marking(&f.net, "q3").is_err());
        assert!(parse_marking(&f.net, "q3=-1").is_err());
        assert!(parse_marking(&f.net, "zz=1").is_err());
        assert!(parse_marking(&f.net, "q3=1,q3=2").is_err());
        assert_eq!(marking_literal(&f.net, &f.initial), "r0=1,q3=1");
        assert_eq!(f.net.format_marking(&m(&f.net, "p2=1,q3=3")), "3q3+p2");
    }

    #[test]
    fn serialization_round_trips() {
        let f = fig1();
        let text = serialize_net(&f);
        let g = parse_net(&text).unwrap();
        assert_eq!(f, g);
        assert_eq!(serialize_net(&g), text);
    }
}
