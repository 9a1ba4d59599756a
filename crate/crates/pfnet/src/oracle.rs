//! Brute-force and stochastic validators, independent of the dynamic
//! programs: reachability by breadth-first search, exact stationary solves,
//! a certified two-sided bracket for the normalizing constant of open nets,
//! and Gillespie simulation.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bags::Pi3Structure;
use crate::ergodicity::{cover_bound, family_f};
use crate::linalg::{solve_sparse, SparseSolveError};
use crate::net::{enabled, fire, Marking, PetriNet, RateTable};
use crate::qualitative::{dot, invariant_system, is_live};
use crate::rational::{to_f64, Q};
use crate::stochastic::{generator, weight, ProductForm};

/// Largest state space [`stationary_direct`] accepts.
pub const STATIONARY_LIMIT: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("state set has {0} states, more than the limit of {STATIONARY_LIMIT}")]
    TooLarge(usize),
    #[error("state set is not closed under firing (leaves from {0})")]
    NotClosed(String),
    #[error("generator restricted to the state set is reducible")]
    Reducible,
    #[error("divergent tail: a cover generator has weight {0} >= 1")]
    DivergentTail(String),
    #[error("tolerance must be positive")]
    BadEpsilon,
    #[error("the bracket needs an open live net")]
    Precondition,
    #[error("deadlock reached in {0}")]
    Deadlock(String),
    #[error("rate {0} cannot be simulated")]
    BadRate(String),
}

/// Markings found by breadth-first search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumerationResult {
    /// Every discovered marking, in discovery order. Markings with norm above
    /// the cutoff are included but were not expanded.
    pub markings: Vec<Marking>,
    pub frontier_truncated: bool,
    pub cutoff: u64,
}

/// Breadth-first exploration that can be resumed with a larger cutoff.
struct Explorer<'a> {
    net: &'a PetriNet,
    seen: HashSet<Marking>,
    order: Vec<Marking>,
    queue: VecDeque<Marking>,
    /// Discovered markings above the current cutoff, still unexpanded.
    parked: Vec<Marking>,
    cutoff: u64,
    /// Length of `order` already returned by [`Explorer::run`].
    reported: usize,
}

impl<'a> Explorer<'a> {
    fn new(net: &'a PetriNet, m0: &Marking) -> Self {
        let mut e = Explorer {
            net,
            seen: HashSet::new(),
            order: Vec::new(),
            queue: VecDeque::new(),
            parked: Vec::new(),
            cutoff: 0,
            reported: 0,
        };
        e.seen.insert(m0.clone());
        e.order.push(m0.clone());
        e.parked.push(m0.clone());
        e
    }

    /// Raises the cutoff and explores everything reachable within it.
    /// Returns the markings not returned by earlier calls.
    fn run(&mut self, cutoff: u64) -> &[Marking] {
        self.cutoff = self.cutoff.max(cutoff);
        let (ready, parked): (Vec<_>, Vec<_>) = self.parked.drain(..).partition(|m| m.norm() <= cutoff);
        self.parked = parked;
        self.queue.extend(ready);
        while let Some(m) = self.queue.pop_front() {
            for t in 0..self.net.transition_count() {
                if !enabled(self.net, &m, t) {
                    continue;
                }
                let next = fire(self.net, &m, t).expect("enabled");
                if self.seen.insert(next.clone()) {
                    self.order.push(next.clone());
                    if next.norm() <= self.cutoff {
                        self.queue.push_back(next);
                    } else {
                        self.parked.push(next);
                    }
                }
            }
        }
        let start = std::mem::replace(&mut self.reported, self.order.len());
        &self.order[start..]
    }
}

/// All markings reachable from `m0` through markings of norm at most
/// `cutoff`; markings beyond the cutoff are recorded but not expanded.
pub fn enumerate_reachable(net: &PetriNet, m0: &Marking, cutoff: u64) -> EnumerationResult {
    let mut e = Explorer::new(net, m0);
    e.run(cutoff);
    EnumerationResult { frontier_truncated: !e.parked.is_empty(), markings: e.order, cutoff }
}

/// The exact stationary distribution of the generator restricted to
/// `states`, which must be closed under firing and irreducible.
pub fn stationary_direct(
    net: &PetriNet,
    rates: &RateTable,
    states: &[Marking],
) -> Result<BTreeMap<Marking, Q>, OracleError> {
    let n = states.len();
    if n > STATIONARY_LIMIT {
        return Err(OracleError::TooLarge(n));
    }
    if n == 0 {
        return Err(OracleError::Reducible);
    }
    let g = generator(net, rates, states);
    if let Some(i) = g.truncated.iter().position(|v| !v.is_zero()) {
        return Err(OracleError::NotClosed(net.format_marking(&states[i])));
    }
    // π·Q = 0 is Qᵀ·π = 0. Pin the last state to weight 1, drop its balance
    // equation (it is implied by the others) and normalize at the end; this
    // keeps the system as sparse as the generator.
    let mut pi = vec![Q::one(); n];
    if n > 1 {
        let mut rows = vec![BTreeMap::new(); n - 1];
        let mut rhs = vec![Q::zero(); n - 1];
        for (i, row) in g.rows.iter().enumerate() {
            for (&j, v) in row {
                if j + 1 == n {
                    continue;
                }
                if i + 1 == n {
                    rhs[j] -= v;
                } else {
                    rows[j].insert(i, v.clone());
                }
            }
        }
        let x = solve_sparse(rows, rhs).map_err(|SparseSolveError::Singular(_)| OracleError::Reducible)?;
        pi[..n - 1].clone_from_slice(&x);
    }
    if pi.iter().any(|p| !p.is_positive()) {
        return Err(OracleError::Reducible);
    }
    let total: Q = pi.iter().sum();
    for p in &mut pi {
        *p /= &total;
    }
    Ok(states.iter().cloned().zip(pi).collect())
}

/// Certified enclosure of `‖v‖`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstantBracket {
    pub lower: Q,
    pub upper: Q,
    pub eps: Q,
}

/// Cached `μ_p^k` tables for fast exact weights.
struct Weights<'a> {
    mu: &'a [Q],
    powers: Vec<Vec<Q>>,
}

impl<'a> Weights<'a> {
    fn new(mu: &'a [Q]) -> Self {
        Weights { mu, powers: vec![vec![Q::one()]; mu.len()] }
    }

    fn of(&mut self, m: &[u32]) -> Q {
        let mut w = Q::one();
        for (p, &k) in m.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let table = &mut self.powers[p];
            while table.len() <= k as usize {
                let next = table.last().unwrap() * &self.mu[p];
                table.push(next);
            }
            w *= &table[k as usize];
        }
        w
    }
}

/// Depth-first enumeration of nonnegative vectors satisfying linear
/// equalities, with optional exact norm, per-place bounds and a list of
/// vectors that must not be dominated. Places are decided in `order`; every
/// branch is pruned by the interval of values each equality can still reach
/// and by domination as soon as a forbidden vector's support is decided.
struct LatticeSearch<'a> {
    eqs: &'a [(Vec<i64>, i64)],
    order: Vec<usize>,
    /// Upper bound per place.
    caps: Vec<u32>,
    /// Exact total, if any.
    norm: Option<u64>,
    forbid: &'a [Vec<u32>],
}

impl LatticeSearch<'_> {
    fn run(mut self, mut visit: impl FnMut(&[u32])) {
        let n = self.caps.len();
        for f in self.forbid {
            let support: Vec<usize> = (0..n).filter(|&p| f[p] > 0).collect();
            if let [p] = support[..] {
                self.caps[p] = self.caps[p].min(f[p] - 1);
            }
        }
        // checks[k]: forbidden vectors whose support is decided after step k.
        let pos: Vec<usize> = {
            let mut pos = vec![0; n];
            for (k, &p) in self.order.iter().enumerate() {
                pos[p] = k;
            }
            pos
        };
        let mut checks = vec![Vec::new(); n];
        for (i, f) in self.forbid.iter().enumerate() {
            if let Some(last) = (0..n).filter(|&p| f[p] > 0).map(|p| pos[p]).max() {
                checks[last].push(i);
            }
        }
        let mut cur = vec![0u32; n];
        let mut acc = vec![0i64; self.eqs.len()];
        self.go(0, 0, &checks, &mut cur, &mut acc, &mut visit);
    }

    fn feasible(&self, k: usize, used: u64, acc: &[i64]) -> bool {
        let budget = self.norm.map(|t| (t - used) as i64);
        for (e, (v, c)) in self.eqs.iter().enumerate() {
            let (mut neg_cap, mut pos_cap) = (0i64, 0i64);
            let (mut min_c, mut max_c) = (0i64, 0i64);
            for &p in &self.order[k..] {
                let cap = self.caps[p] as i64;
                if v[p] > 0 {
                    pos_cap = pos_cap.saturating_add(v[p].saturating_mul(cap));
                    max_c = max_c.max(v[p]);
                } else if v[p] < 0 {
                    neg_cap = neg_cap.saturating_add(v[p].saturating_mul(cap));
                    min_c = min_c.min(v[p]);
                }
            }
            let (lo, hi) = match budget {
                Some(b) => (acc[e] + neg_cap.max(min_c * b), acc[e] + pos_cap.min(max_c * b)),
                None => (acc[e].saturating_add(neg_cap), acc[e].saturating_add(pos_cap)),
            };
            if *c < lo || *c > hi {
                return false;
            }
        }
        true
    }

    fn go(
        &self,
        k: usize,
        used: u64,
        checks: &[Vec<usize>],
        cur: &mut Vec<u32>,
        acc: &mut Vec<i64>,
        visit: &mut impl FnMut(&[u32]),
    ) {
        if !self.feasible(k, used, acc) {
            return;
        }
        let n = self.caps.len();
        if k == n {
            if self.norm.is_none_or(|t| t == used) {
                visit(cur);
            }
            return;
        }
        let p = self.order[k];
        let mut top = self.caps[p] as u64;
        if let Some(t) = self.norm {
            top = top.min(t - used);
        }
        for x in 0..=top {
            cur[p] = x as u32;
            if checks[k].iter().any(|&i| self.forbid[i].iter().zip(cur.iter()).all(|(a, b)| b >= a)) {
                // Larger values only dominate more.
                break;
            }
            for (e, (v, _)) in self.eqs.iter().enumerate() {
                acc[e] += v[p] * x as i64;
            }
            self.go(k + 1, used + x, checks, cur, acc, visit);
            for (e, (v, _)) in self.eqs.iter().enumerate() {
                acc[e] -= v[p] * x as i64;
            }
        }
        cur[p] = 0;
    }
}

/// Search order: top-layer places by increasing `cin`, then the layers
/// below from the top down, so that generators and the most constrained
/// places are decided first.
fn search_order(s: &Pi3Structure) -> Vec<usize> {
    let nl = s.n_layers();
    let mut top = s.layer(nl).to_vec();
    top.sort_by_key(|&p| s.cin(p));
    let mut order = top;
    for i in (1..nl).rev() {
        let mut layer = s.layer(i).to_vec();
        layer.sort_by_key(|&p| s.cin(p));
        order.extend(layer);
    }
    order
}

/// A two-sided bound on `‖v‖` for an open ergodic net, refined until the gap
/// is at most `eps`.
///
/// * `lower` sums `v̂` over markings discovered by breadth-first search.
/// * `upper` sums `v̂` over every marking of norm at most `K` satisfying the
///   invariants and the liveness conditions (a superset of the reachable ones,
///   since firing preserves both), plus a tail bound for norms above `K`
///   obtained from the cover `R(m0) ⊆ 𝓖 + 𝓛`: every reachable marking is
///   `g + Σ n_f f` with `g` in the box of side `𝐆(m0)`, satisfying the
///   invariants and dominating no `f ∈ 𝓕`.
///
/// When `𝓕` is empty the reachability set is finite and both bounds are the
/// exact sum over it.
pub fn constant_bracketed(
    net: &PetriNet,
    s: &Pi3Structure,
    pf: &ProductForm,
    m0: &Marking,
    eps: &Q,
) -> Result<ConstantBracket, OracleError> {
    if !eps.is_positive() {
        return Err(OracleError::BadEpsilon);
    }
    if !s.is_open() || !is_live(s, m0).live {
        return Err(OracleError::Precondition);
    }
    let family = family_f(s).map_err(|_| OracleError::Precondition)?.generators;
    let mut weights = Weights::new(&pf.mu);
    let fw: Vec<Q> = family.iter().map(|f| weight(pf, &f.vector)).collect();
    if let Some(w) = fw.iter().find(|w| **w >= Q::one()) {
        return Err(OracleError::DivergentTail(w.to_string()));
    }
    let mut explorer = Explorer::new(net, m0);
    if family.is_empty() {
        let mut total = Q::zero();
        for m in explorer.run(u64::MAX).to_vec() {
            total += weights.of(&m.0);
        }
        return Ok(ConstantBracket { lower: total.clone(), upper: total, eps: eps.clone() });
    }

    let inv = invariant_system(s, m0);
    let eqs: Vec<(Vec<i64>, i64)> = inv.vectors.iter().cloned().zip(inv.constants.iter().copied()).collect();
    let n = s.place_count();

    // The finite set of cover offsets: box points satisfying the invariants
    // and dominating no generator.
    let g = cover_bound(s, m0).g.max(0) as u32;
    let mut offsets: Vec<(u64, Q)> = Vec::new();
    let order = search_order(s);
    let forbid: Vec<Vec<u32>> = family.iter().map(|f| f.vector.clone()).collect();
    LatticeSearch { eqs: &eqs, order: order.clone(), caps: vec![g; n], norm: None, forbid: &forbid }.run(|v| {
        offsets.push((v.iter().map(|&x| x as u64).sum(), weights.of(v)));
    });

    // Coefficients of Π_f 1/(1 − v̂(f) z^{‖f‖}), extended on demand.
    let f_norms: Vec<usize> = family.iter().map(|f| f.vector.iter().map(|&x| x as usize).sum()).collect();
    let full: Q = fw.iter().map(|w| (Q::one() - w).recip()).product();
    let series = |deg: usize| -> Vec<Q> {
        let mut c = vec![Q::zero(); deg + 1];
        c[0] = Q::one();
        for (w, &d) in fw.iter().zip(&f_norms) {
            for k in d..=deg {
                let add = &c[k - d] * w;
                c[k] += add;
            }
        }
        c
    };

    let mut lower = Q::zero();
    let mut below_k = Q::zero();
    let mut level = 0u64;
    let mut k = m0.norm().max(1);
    loop {
        for m in explorer.run(k).to_vec() {
            lower += weights.of(&m.0);
        }
        while level <= k {
            let mut acc = Q::zero();
            let search = LatticeSearch { eqs: &eqs, order: order.clone(), caps: vec![u32::MAX; n], norm: Some(level), forbid: &[] };
            search.run(|v| {
                if is_live(s, &Marking(v.to_vec())).live {
                    acc += weights.of(v);
                }
            });
            below_k += acc;
            level += 1;
        }
        let coeffs = series(k as usize);
        let mut prefix = vec![Q::zero(); coeffs.len()];
        let mut run = Q::zero();
        for (i, c) in coeffs.iter().enumerate() {
            run += c;
            prefix[i] = run.clone();
        }
        let mut tail = Q::zero();
        for (norm, w) in &offsets {
            let t = if *norm > k { full.clone() } else { &full - &prefix[(k - norm) as usize] };
            tail += w * t;
        }
        let upper = &below_k + tail;
        if &upper - &lower <= *eps {
            return Ok(ConstantBracket { lower, upper, eps: eps.clone() });
        }
        k += 1 + k / 8;
    }
}

/// Floating-point partial sums of `v̂` over reachable markings, by
/// increasing norm: entry `i` is the sum over markings of norm `≤ ‖m0‖ + i`
/// that are reachable through markings of norm at most that bound. Stops
/// after `levels` entries or once the sum exceeds `threshold`.
pub fn partial_sums(net: &PetriNet, pf: &ProductForm, m0: &Marking, levels: usize, threshold: f64) -> Vec<f64> {
    let mu: Vec<f64> = pf.mu.iter().map(to_f64).collect();
    let w = |m: &Marking| m.0.iter().zip(&mu).map(|(&k, &u)| u.powi(k as i32)).product::<f64>();
    let mut explorer = Explorer::new(net, m0);
    let mut sums = Vec::new();
    let mut total = 0.0;
    let mut counted: HashSet<Marking> = HashSet::new();
    for i in 0..levels {
        let cutoff = m0.norm() + i as u64;
        explorer.run(cutoff);
        for m in &explorer.order {
            if m.norm() <= cutoff && counted.insert(m.clone()) {
                total += w(m);
            }
        }
        sums.push(total);
        if total > threshold {
            break;
        }
    }
    sums
}

/// Continuous-time simulation of the marking process for `steps` firings.
/// Returns the fraction of time spent in every visited marking.
pub fn gillespie(
    net: &PetriNet,
    rates: &RateTable,
    m0: &Marking,
    steps: u64,
    seed: u64,
) -> Result<BTreeMap<Marking, f64>, OracleError> {
    let lambda: Vec<f64> = rates.0.iter().map(to_f64).collect();
    if let Some(r) = lambda.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(OracleError::BadRate(r.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut time: HashMap<Marking, f64> = HashMap::new();
    let mut m = m0.clone();
    let mut total = 0.0;
    let mut en: Vec<usize> = Vec::with_capacity(net.transition_count());
    for _ in 0..steps {
        en.clear();
        en.extend((0..net.transition_count()).filter(|&t| enabled(net, &m, t)));
        let rate: f64 = en.iter().map(|&t| lambda[t]).sum();
        if en.is_empty() {
            return Err(OracleError::Deadlock(net.format_marking(&m)));
        }
        let u: f64 = 1.0 - rng.random::<f64>();
        let sojourn = -u.ln() / rate;
        *time.entry(m.clone()).or_insert(0.0) += sojourn;
        total += sojourn;
        let mut pick = rng.random::<f64>() * rate;
        let mut chosen = *en.last().unwrap();
        for &t in &en {
            if pick < lambda[t] {
                chosen = t;
                break;
            }
            pick -= lambda[t];
        }
        m = fire(net, &m, chosen).expect("enabled");
    }
    Ok(time.into_iter().map(|(k, v)| (k, v / total)).collect())
}

/// `Σ_{m} v̂(m)` over a finite state list, exactly.
pub fn weight_sum(pf: &ProductForm, states: &[Marking]) -> Q {
    let mut w = Weights::new(&pf.mu);
    states.iter().map(|m| w.of(&m.0)).sum()
}

/// Checks `π·Q = 0` on a finite closed state set.
pub fn is_balanced(net: &PetriNet, rates: &RateTable, pi: &BTreeMap<Marking, Q>) -> bool {
    let states: Vec<Marking> = pi.keys().cloned().collect();
    let x: Vec<Q> = pi.values().cloned().collect();
    generator(net, rates, &states).left_multiply(&x).iter().all(Zero::is_zero)
}

/// Exact integer value of `v · m` for each invariant vector.
pub fn invariant_values(s: &Pi3Structure, m0: &Marking, m: &Marking) -> Vec<i64> {
    invariant_system(s, m0).vectors.iter().map(|v| dot(v, m)).collect()
}
