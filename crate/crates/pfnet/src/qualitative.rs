//! Liveness, linear invariants, reachability, boundedness and canonical
//! markings of layered nets, plus the independent-set reduction net.
//!
//! For `1 ≤ i ≤ N−1`, `Live_i` is the set of markings with
//! `m·P_i ≥ min{pot(p) | p ∈ P_{i+1}, m(p) > 0}` (the virtual place `p_ext`
//! always takes part in the minimum at `i = N−1` for open nets; an empty
//! minimum is `POT_{i+1}`). `Live_N` asks for a token on the top layer of a
//! closed net and is trivial for open nets. The vectors
//! `v⁽ⁱ⁾ = Σ_{p∈P_i} p + Σ_{p∈P_{i+1}} cin(p)·p` are P-flows; a live
//! marking reaches exactly the markings satisfying all invariant equalities
//! and all `Live_i`.

use std::fmt;

use thiserror::Error;

use crate::bags::Pi3Structure;
use crate::net::{Marking, Mode, NetFile, PetriNet, RateTable};
use crate::rational::qi;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QualError {
    #[error("initial marking is not live; the invariant characterization does not apply")]
    NotLive,
    #[error("the reachability set is infinite")]
    Unbounded,
    #[error("layer index {0} out of range")]
    LayerOutOfRange(usize),
    #[error("the reduction needs k >= 1 and at least one vertex (got k = {k}, |V| = {n})")]
    BadK { k: usize, n: usize },
    #[error("edge {0}-{1} is not between distinct vertices of the graph")]
    BadEdge(usize, usize),
}

/// One failed `Live_i` inequality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiveViolation {
    pub layer: usize,
    /// `m·P_i` (or the top-layer token count for `Live_N`).
    pub tokens: i64,
    /// The required lower bound.
    pub required: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiveReport {
    pub per_layer: Vec<bool>,
    pub live: bool,
    pub violations: Vec<LiveViolation>,
}

fn tokens_on(m: &Marking, places: &[usize]) -> i64 {
    places.iter().map(|&p| m.get(p) as i64).sum()
}

/// Right-hand side of `Live_i` for `i < N`.
fn live_threshold(s: &Pi3Structure, m: &Marking, i: usize) -> i64 {
    let mut min = s.pot_cap(i + 1);
    let mut any = false;
    for &p in s.layer(i + 1) {
        if m.get(p) > 0 {
            let pot = s.pot(p) as i64;
            min = if any { min.min(pot) } else { pot };
            any = true;
        }
    }
    if i + 1 == s.n_layers() {
        if let Some(e) = s.external() {
            min = if any { min.min(e.pot as i64) } else { e.pot as i64 };
        }
    }
    min
}

fn live_check(s: &Pi3Structure, m: &Marking, i: usize) -> Result<(), LiveViolation> {
    let n = s.n_layers();
    if i < n {
        let tokens = tokens_on(m, s.layer(i));
        let required = live_threshold(s, m, i);
        if tokens >= required {
            Ok(())
        } else {
            Err(LiveViolation { layer: i, tokens, required })
        }
    } else {
        let tokens = tokens_on(m, s.layer(n));
        if s.is_open() || tokens > 0 {
            Ok(())
        } else {
            Err(LiveViolation { layer: n, tokens, required: 1 })
        }
    }
}

/// `m ∈ Live_i` for `1 ≤ i ≤ N`.
pub fn live_membership(s: &Pi3Structure, m: &Marking, i: usize) -> bool {
    assert!((1..=s.n_layers()).contains(&i), "layer index out of range");
    live_check(s, m, i).is_ok()
}

/// Liveness of `m`: membership in every `Live_i`.
pub fn is_live(s: &Pi3Structure, m: &Marking) -> LiveReport {
    let mut per_layer = Vec::new();
    let mut violations = Vec::new();
    for i in 1..=s.n_layers() {
        match live_check(s, m, i) {
            Ok(()) => per_layer.push(true),
            Err(v) => {
                per_layer.push(false);
                violations.push(v);
            }
        }
    }
    LiveReport { live: violations.is_empty(), per_layer, violations }
}

/// The P-flows `v⁽ⁱ⁾` and their values at the initial marking.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvariantSystem {
    /// `vectors[i-1] = v⁽ⁱ⁾`, for `i ≤ N−1`, plus `v⁽ᴺ⁾ = Σ P_N` when closed.
    pub vectors: Vec<Vec<i64>>,
    /// `C_i = m0 · v⁽ⁱ⁾`.
    pub constants: Vec<i64>,
}

impl InvariantSystem {
    /// `C_i` (1-based); 0 outside the defined range.
    pub fn c(&self, i: usize) -> i64 {
        if i == 0 {
            return 0;
        }
        self.constants.get(i - 1).copied().unwrap_or(0)
    }

    pub fn holds(&self, m: &Marking) -> bool {
        self.vectors.iter().zip(&self.constants).all(|(v, &c)| dot(v, m) == c)
    }
}

pub fn dot(v: &[i64], m: &Marking) -> i64 {
    v.iter().zip(&m.0).map(|(&a, &b)| a * b as i64).sum()
}

/// The invariant vectors of `s` evaluated at `m0`.
pub fn invariant_system(s: &Pi3Structure, m0: &Marking) -> InvariantSystem {
    let n = s.place_count();
    let nl = s.n_layers();
    let mut vectors = Vec::new();
    for i in 1..nl {
        let mut v = vec![0i64; n];
        for &p in s.layer(i) {
            v[p] = 1;
        }
        for &p in s.layer(i + 1) {
            v[p] = s.cin(p);
        }
        vectors.push(v);
    }
    if s.mode() == Mode::Closed {
        let mut v = vec![0i64; n];
        for &p in s.layer(nl) {
            v[p] = 1;
        }
        vectors.push(v);
    }
    let constants = vectors.iter().map(|v| dot(v, m0)).collect();
    InvariantSystem { vectors, constants }
}

/// Reachability from a live `m0`: invariant equalities plus every `Live_i`.
pub fn is_reachable(s: &Pi3Structure, m0: &Marking, m: &Marking) -> Result<bool, QualError> {
    if !is_live(s, m0).live {
        return Err(QualError::NotLive);
    }
    Ok(invariant_system(s, m0).holds(m) && is_live(s, m).live)
}

/// One constraint of a symbolic reachability-set description.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Constraint {
    /// `v · m = c`.
    Equality { layer: usize, vector: Vec<i64>, constant: i64 },
    /// `Σ_{P_i} m ≥ min{pot(p) | p marked among `candidates`}`, with
    /// `default` used when none is marked. Places whose potential is the
    /// default are omitted as they never lower the minimum.
    Threshold { layer: usize, places: Vec<usize>, candidates: Vec<(usize, u32)>, default: i64 },
    /// At least one token on the given places.
    NonEmpty { layer: usize, places: Vec<usize> },
}

/// The reachability set of a live marking as a list of constraints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReachDescription {
    pub constraints: Vec<Constraint>,
}

impl ReachDescription {
    pub fn equalities(&self) -> impl Iterator<Item = (&[i64], i64)> {
        self.constraints.iter().filter_map(|c| match c {
            Constraint::Equality { vector, constant, .. } => Some((vector.as_slice(), *constant)),
            _ => None,
        })
    }

    /// Evaluates every constraint on `m`.
    pub fn contains(&self, m: &Marking) -> bool {
        self.constraints.iter().all(|c| match c {
            Constraint::Equality { vector, constant, .. } => dot(vector, m) == *constant,
            Constraint::Threshold { places, candidates, default, .. } => {
                let need = candidates.iter().filter(|(p, _)| m.get(*p) > 0).map(|&(_, pot)| pot as i64).fold(*default, i64::min);
                tokens_on(m, places) >= need
            }
            Constraint::NonEmpty { places, .. } => tokens_on(m, places) > 0,
        })
    }

    /// Renders the constraints with place names.
    pub fn render(&self, net: &PetriNet) -> Vec<String> {
        self.constraints.iter().map(|c| DisplayConstraint(net, c).to_string()).collect()
    }
}

/// Formats `Σ a_p·p` with place names.
pub fn linear_form(net: &PetriNet, v: &[i64]) -> String {
    let mut out = String::new();
    for (p, &a) in v.iter().enumerate() {
        if a == 0 {
            continue;
        }
        let name = &net.places()[p];
        let sign = if a < 0 { "-" } else { "+" };
        if out.is_empty() {
            if a < 0 {
                out.push('-');
            }
        } else {
            out.push_str(&format!(" {sign} "));
        }
        if a.abs() != 1 {
            out.push_str(&format!("{}*", a.abs()));
        }
        out.push_str(name);
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

struct DisplayConstraint<'a>(&'a PetriNet, &'a Constraint);

impl fmt::Display for DisplayConstraint<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let net = self.0;
        let sum = |places: &[usize]| places.iter().map(|&p| net.places()[p].clone()).collect::<Vec<_>>().join(" + ");
        match self.1 {
            Constraint::Equality { vector, constant, .. } => write!(f, "{} = {}", linear_form(net, vector), constant),
            Constraint::Threshold { places, candidates, default, .. } => {
                if candidates.is_empty() {
                    write!(f, "{} >= {}", sum(places), default)
                } else {
                    let cases: Vec<String> =
                        candidates.iter().map(|&(p, pot)| format!("{pot} if {}>0", net.places()[p])).collect();
                    write!(f, "{} >= min({}, {})", sum(places), cases.join(", "), default)
                }
            }
            Constraint::NonEmpty { places, .. } => write!(f, "{} >= 1", sum(places)),
        }
    }
}

/// Symbolic description of the reachability set of a live `m0`.
pub fn reachset_description(s: &Pi3Structure, m0: &Marking) -> Result<ReachDescription, QualError> {
    if !is_live(s, m0).live {
        return Err(QualError::NotLive);
    }
    let inv = invariant_system(s, m0);
    let mut constraints: Vec<Constraint> = inv
        .vectors
        .iter()
        .zip(&inv.constants)
        .enumerate()
        .map(|(i, (v, &c))| Constraint::Equality { layer: i + 1, vector: v.clone(), constant: c })
        .collect();
    let nl = s.n_layers();
    for i in 1..nl {
        let mut default = s.pot_cap(i + 1);
        if i + 1 == nl {
            if let Some(e) = s.external() {
                default = e.pot as i64;
            }
        }
        let candidates: Vec<(usize, u32)> =
            s.layer(i + 1).iter().filter(|&&p| (s.pot(p) as i64) < default).map(|&p| (p, s.pot(p))).collect();
        constraints.push(Constraint::Threshold { layer: i, places: s.layer(i).to_vec(), candidates, default });
    }
    if !s.is_open() {
        constraints.push(Constraint::NonEmpty { layer: nl, places: s.layer(nl).to_vec() });
    }
    Ok(ReachDescription { constraints })
}

/// Boundedness verdict.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Boundedness {
    pub bounded: bool,
    /// Upper bound on the total number of tokens, when bounded.
    pub bound: Option<i64>,
}

/// Closed nets are bounded by `Σ_{i≤N} C_i`; an open net is bounded iff
/// `cin > 0` on the whole top layer, and then by `Σ_{i≤N−1} C_i`.
///
/// The closed-net bound follows from the invariants alone, so liveness is
/// only required for open nets.
pub fn is_bounded(s: &Pi3Structure, m0: &Marking) -> Result<Boundedness, QualError> {
    let inv = invariant_system(s, m0);
    let total: i64 = inv.constants.iter().sum();
    if !s.is_open() {
        return Ok(Boundedness { bounded: true, bound: Some(total) });
    }
    if !is_live(s, m0).live {
        return Err(QualError::NotLive);
    }
    let nl = s.n_layers();
    let bounded = s.layer(nl).iter().all(|&p| s.cin(p) > 0);
    Ok(Boundedness { bounded, bound: bounded.then_some(total) })
}

/// Every marking satisfying the invariant equalities and the liveness
/// conditions, for a live `m0` whose reachability set is finite. This is the
/// reachability set itself, listed in lexicographic order.
pub fn characterized_set(s: &Pi3Structure, m0: &Marking) -> Result<Vec<Marking>, QualError> {
    let b = is_bounded(s, m0)?;
    if !is_live(s, m0).live {
        return Err(QualError::NotLive);
    }
    let Some(bound) = b.bound.filter(|_| b.bounded) else {
        return Err(QualError::Unbounded);
    };
    let inv = invariant_system(s, m0);
    let n = s.place_count();
    let mut out = Vec::new();
    let mut cur = Marking::zero(n);
    let mut acc = vec![0i64; inv.vectors.len()];
    fn go(
        k: usize,
        left: i64,
        inv: &InvariantSystem,
        s: &Pi3Structure,
        cur: &mut Marking,
        acc: &mut Vec<i64>,
        out: &mut Vec<Marking>,
    ) {
        let n = cur.0.len();
        // Coefficients are nonnegative for bounded nets: prune on overshoot
        // and on equalities the remaining places can no longer reach.
        for (e, v) in inv.vectors.iter().enumerate() {
            let reach: i64 = (k..n).map(|p| v[p].max(0)).max().unwrap_or(0) * left;
            if acc[e] > inv.constants[e] || acc[e] + reach < inv.constants[e] {
                return;
            }
        }
        if k == n {
            if inv.holds(cur) && is_live(s, cur).live {
                out.push(cur.clone());
            }
            return;
        }
        for x in 0..=left {
            cur.0[k] = x as u32;
            for (e, v) in inv.vectors.iter().enumerate() {
                acc[e] += v[k] * x;
            }
            go(k + 1, left - x, inv, s, cur, acc, out);
            for (e, v) in inv.vectors.iter().enumerate() {
                acc[e] -= v[k] * x;
            }
        }
        cur.0[k] = 0;
    }
    go(0, bound, &inv, s, &mut cur, &mut acc, &mut out);
    Ok(out)
}

/// The canonical marking `π_i(m)`: layers above `i` are copied, layer `i`
/// is collapsed onto its reference place (first maximal-potential place in
/// file order) with `m·P_i` tokens, and each lower layer `j` onto its
/// reference place with `C_j^m` tokens. `i = 0` returns `m`.
///
/// For open nets `i ≤ N−1` (the top layer carries no invariant of its own).
pub fn canonical_marking(s: &Pi3Structure, m: &Marking, i: usize) -> Result<Marking, QualError> {
    let nl = s.n_layers();
    let max_i = if s.is_open() { nl - 1 } else { nl };
    if i > max_i {
        return Err(QualError::LayerOutOfRange(i));
    }
    let inv = invariant_system(s, m);
    let mut out = m.clone();
    for j in 1..=i {
        for &p in s.layer(j) {
            out.0[p] = 0;
        }
        let tokens = if j == i { tokens_on(m, s.layer(j)) } else { inv.c(j) };
        out.0[s.pmax(j)[0]] = tokens as u32;
    }
    Ok(out)
}

/// An undirected simple graph on vertices `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    /// `true` iff some set of `k` vertices is pairwise non-adjacent.
    pub fn has_independent_set(&self, k: usize) -> bool {
        let adj = |a: usize, b: usize| self.edges.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a));
        (0u32..1 << self.n).any(|mask| {
            mask.count_ones() as usize == k
                && (0..self.n).all(|a| {
                    mask & (1 << a) == 0 || (a + 1..self.n).all(|b| mask & (1 << b) == 0 || !adj(a, b))
                })
        })
    }
}

/// The four-layer open net whose boundedness from `E + V` fails exactly when
/// the graph has an independent set of size `k`.
///
/// Layer 2 holds one place per edge plus `p2`; layer 3 one place per vertex
/// plus `p3`; bags `v + E(v) ⇄ p3 + n·p2` and `k·p3 ⇄ p4 + k·p3`. Layer 1
/// is `{p1, p1b}` with `p1 ⇄ p1b`, so that `p1` has a bag of its own, and an
/// edgeless graph gets a spare place `p2b` with `p2b + p1 ⇄ p2 + p1`. The
/// result is returned in closed form with `p_ext` marked external.
pub fn gen_independent_set_net(graph: &Graph, k: usize) -> Result<NetFile, QualError> {
    let n = graph.n;
    if k == 0 || n == 0 {
        return Err(QualError::BadK { k, n });
    }
    for &(a, b) in &graph.edges {
        if a == b || a >= n || b >= n {
            return Err(QualError::BadEdge(a, b));
        }
    }
    let mut places: Vec<String> = vec!["p1".into(), "p1b".into()];
    let edge_place: Vec<usize> = graph
        .edges
        .iter()
        .map(|&(a, b)| {
            places.push(format!("e{}_{}", a.min(b), a.max(b)));
            places.len() - 1
        })
        .collect();
    places.push("p2".into());
    let p2 = places.len() - 1;
    let p2b = graph.edges.is_empty().then(|| {
        places.push("p2b".into());
        places.len() - 1
    });
    let vertex: Vec<usize> = (0..n)
        .map(|v| {
            places.push(format!("v{v}"));
            places.len() - 1
        })
        .collect();
    for name in ["p3", "p4", "p_ext"] {
        places.push(name.into());
    }
    let np = places.len();
    let (p1, p1b, p3, p4, p_ext) = (0, 1, np - 3, np - 2, np - 1);

    let mut pre = Vec::new();
    let mut post = Vec::new();
    let mut names = Vec::new();
    let mut both_ways = |a: Vec<u32>, b: Vec<u32>, label: String| {
        names.push(format!("{label}_f"));
        pre.push(a.clone());
        post.push(b.clone());
        names.push(format!("{label}_b"));
        pre.push(b);
        post.push(a);
    };
    let bag = |items: &[(usize, u32)]| -> Vec<u32> {
        let mut v = vec![0u32; np];
        for &(p, c) in items {
            v[p] += c;
        }
        v
    };
    both_ways(bag(&[(p1, 1)]), bag(&[(p1b, 1)]), "l1".into());
    for (i, &e) in edge_place.iter().enumerate() {
        both_ways(bag(&[(e, 1), (p1, 1)]), bag(&[(p2, 1), (p1, 1)]), format!("edge{i}"));
    }
    if let Some(p2b) = p2b {
        both_ways(bag(&[(p2b, 1), (p1, 1)]), bag(&[(p2, 1), (p1, 1)]), "spare".into());
    }
    for v in 0..n {
        let mut items = vec![(vertex[v], 1)];
        for (i, &(a, b)) in graph.edges.iter().enumerate() {
            if a == v || b == v {
                items.push((edge_place[i], 1));
            }
        }
        both_ways(bag(&items), bag(&[(p3, 1), (p2, n as u32)]), format!("vert{v}"));
    }
    both_ways(bag(&[(p_ext, 1), (p3, k as u32)]), bag(&[(p4, 1), (p3, k as u32)]), "pump".into());

    let mut m0 = vec![0u32; np];
    for &e in &edge_place {
        m0[e] = 1;
    }
    for &v in &vertex {
        m0[v] = 1;
    }
    let rates = RateTable(vec![qi(1); names.len()]);
    let net = PetriNet::new(format!("indset_k{k}"), places, names, pre, post);
    Ok(NetFile { net, rates, initial: Marking(m0), mode: Mode::Open, external: Some(p_ext) })
}
