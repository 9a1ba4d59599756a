//! Routing, visit ratios and product-form constants; exact CTMC generators.
//!
//! For a net with witnesses, the stationary measure of the marking process is
//! `v(m) = Π_p μ_p^{m(p)}` with `μ_p = Π_b (vis(b)/λ(b))^{wit_b(p)}`, where
//! `λ(b)` is the total rate leaving bag `b` and `vis` solves `vis·𝐏 = vis` for
//! the bag routing matrix `𝐏` on each component of the bag graph.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::bags::{BagGraph, WitnessTable};
use crate::linalg;
use crate::net::{enabled, fire, Marking, PetriNet, RateTable};
use crate::rational::{pow_i, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StochasticError {
    #[error("bag {0} has no outgoing transition")]
    DeadBag(usize),
    #[error("visit-ratio system of component {0} has no positive solution")]
    VisitRatios(usize),
    #[error("witness exponent {value} for place {place} is not an integer")]
    NonIntegralExponent { place: usize, value: Q },
}

/// Product-form data of a net, all exact.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductForm {
    /// `λ(b)`: total firing rate of the transitions consuming bag `b`.
    pub lambda_bag: Vec<Q>,
    /// `pr_t = λ(t) / λ(W⁻(t))`.
    pub pr: Vec<Q>,
    /// Visit ratios, normalized to 1 on the first bag of every component.
    pub vis: Vec<Q>,
    /// `μ_p` per place.
    pub mu: Vec<Q>,
}

/// Computes routing probabilities, visit ratios and the constants `μ_p`.
pub fn product_form(
    net: &PetriNet,
    rates: &RateTable,
    graph: &BagGraph,
    wit: &WitnessTable,
) -> Result<ProductForm, StochasticError> {
    let nb = graph.bags.len();
    let mut lambda_bag = vec![Q::zero(); nb];
    for (t, &(src, _)) in graph.edges.iter().enumerate() {
        lambda_bag[src] += &rates.0[t];
    }
    if let Some(b) = lambda_bag.iter().position(Zero::is_zero) {
        return Err(StochasticError::DeadBag(b));
    }
    let pr: Vec<Q> = graph.edges.iter().enumerate().map(|(t, &(src, _))| &rates.0[t] / &lambda_bag[src]).collect();

    let mut vis = vec![Q::zero(); nb];
    for (c, comp) in graph.components.iter().enumerate() {
        let local: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &b)| (b, i)).collect();
        let k = comp.len();
        // Rows: (𝐏ᵀ − I)·vis = 0 for every bag, plus vis(first) = 1.
        let mut a = vec![vec![Q::zero(); k]; k + 1];
        for (i, row) in a.iter_mut().enumerate().take(k) {
            row[i] = -Q::one();
        }
        for (t, &(src, dst)) in graph.edges.iter().enumerate() {
            if let (Some(&i), Some(&j)) = (local.get(&src), local.get(&dst)) {
                a[j][i] += &pr[t];
            }
        }
        a[k][0] = Q::one();
        let mut rhs = vec![Q::zero(); k + 1];
        rhs[k] = Q::one();
        let x = linalg::solve(&a, &rhs).ok_or(StochasticError::VisitRatios(c))?;
        if x.iter().any(|v| !v.is_positive()) {
            return Err(StochasticError::VisitRatios(c));
        }
        for (i, &b) in comp.iter().enumerate() {
            vis[b] = x[i].clone();
        }
    }

    let n = net.place_count();
    let mut mu = vec![Q::one(); n];
    for (p, m) in mu.iter_mut().enumerate() {
        for b in 0..nb {
            let e = &wit.wit[b][p];
            if e.is_zero() {
                continue;
            }
            if !e.is_integer() {
                return Err(StochasticError::NonIntegralExponent { place: p, value: e.clone() });
            }
            let base = &vis[b] / &lambda_bag[b];
            *m *= pow_i(&base, e.to_integer().to_i64().expect("small exponent"));
        }
    }
    Ok(ProductForm { lambda_bag, pr, vis, mu })
}

/// `v̂(δ) = Π_p μ_p^{δ(p)}`.
pub fn weight(pf: &ProductForm, delta: &[u32]) -> Q {
    let mut w = Q::one();
    for (mu, &k) in pf.mu.iter().zip(delta) {
        if k > 0 {
            w *= pow_i(mu, k as i64);
        }
    }
    w
}

/// Exact generator of the marking process restricted to `states`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorMatrix {
    pub states: Vec<Marking>,
    /// Sparse rows, diagonal included; every row sums to zero.
    pub rows: Vec<BTreeMap<usize, Q>>,
    /// Rate of transitions leaving the state set, per state (0 when closed).
    pub truncated: Vec<Q>,
}

impl GeneratorMatrix {
    pub fn dense(&self) -> Vec<Vec<Q>> {
        let n = self.states.len();
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![Q::zero(); n];
                for (&j, v) in r {
                    row[j] = v.clone();
                }
                row
            })
            .collect()
    }

    /// `true` iff no transition leaves the state set.
    pub fn is_closed(&self) -> bool {
        self.truncated.iter().all(Zero::is_zero)
    }

    /// `x · Q` as a dense vector.
    pub fn left_multiply(&self, x: &[Q]) -> Vec<Q> {
        let mut out = vec![Q::zero(); self.states.len()];
        for (i, row) in self.rows.iter().enumerate() {
            if x[i].is_zero() {
                continue;
            }
            for (&j, v) in row {
                out[j] += &x[i] * v;
            }
        }
        out
    }
}

/// Builds `Q(m, m′) = Σ_{t: m →t m′} λ(t)` over `states`. Firings that leave
/// the set are dropped and reported in [`GeneratorMatrix::truncated`]; the
/// diagonal is the negated total exit rate including them.
pub fn generator(net: &PetriNet, rates: &RateTable, states: &[Marking]) -> GeneratorMatrix {
    let index: HashMap<&Marking, usize> = states.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let mut rows = Vec::with_capacity(states.len());
    let mut truncated = Vec::with_capacity(states.len());
    for (i, m) in states.iter().enumerate() {
        let mut row: BTreeMap<usize, Q> = BTreeMap::new();
        let mut out = Q::zero();
        let mut lost = Q::zero();
        for t in 0..net.transition_count() {
            if !enabled(net, m, t) {
                continue;
            }
            let next = fire(net, m, t).expect("enabled");
            out += &rates.0[t];
            match index.get(&next) {
                Some(&j) => *row.entry(j).or_insert_with(Q::zero) += &rates.0[t],
                None => lost += &rates.0[t],
            }
        }
        *row.entry(i).or_insert_with(Q::zero) -= out;
        row.retain(|_, v| !v.is_zero());
        rows.push(row);
        truncated.push(lost);
    }
    GeneratorMatrix { states: states.to_vec(), rows, truncated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{cycle, fig1_open};
    use crate::rational::{q, qi};
    use crate::Model;

    #[test]
    fn cycle_constants() {
        let m = Model::new(&cycle(qi(2), qi(1), 1)).unwrap();
        assert_eq!(m.pf.vis, vec![qi(1), qi(1)]);
        assert_eq!(m.pf.lambda_bag, vec![qi(2), qi(1)]);
        assert_eq!(m.pf.mu, vec![q(1, 2), qi(1)]);
        assert_eq!(weight(&m.pf, &[0, 0]), qi(1));
        assert_eq!(weight(&m.pf, &[1, 0]), q(1, 2));
        assert_eq!(weight(&m.pf, &[2, 1]), q(1, 4));
    }

    #[test]
    fn cycle_generator() {
        let f = cycle(qi(2), qi(1), 1);
        let g = generator(&f.net, &f.rates, &[Marking(vec![1, 0]), Marking(vec![0, 1])]);
        assert_eq!(g.dense(), vec![vec![qi(-2), qi(2)], vec![qi(1), qi(-1)]]);
        assert!(g.is_closed());
        let lonely = generator(&f.net, &f.rates, &[Marking(vec![0, 0])]);
        assert_eq!(lonely.dense(), vec![vec![qi(0)]]);
    }

    #[test]
    fn figure_routing_splits_evenly() {
        let m = Model::new(&fig1_open()).unwrap();
        let t0 = m.net.transition_index("t0").unwrap();
        let t1 = m.net.transition_index("t1").unwrap();
        assert_eq!((m.pf.pr[t0].clone(), m.pf.pr[t1].clone()), (q(1, 2), q(1, 2)));
        for (b, _) in m.graph.bags.iter().enumerate() {
            let total: Q = m.graph.outgoing(b).map(|t| m.pf.pr[t].clone()).sum();
            assert_eq!(total, qi(1));
        }
    }

    #[test]
    fn visit_ratios_are_stationary() {
        let m = Model::new(&fig1_open()).unwrap();
        for comp in &m.graph.components {
            for &b in comp {
                let inflow: Q = m
                    .graph
                    .edges
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.1 == b)
                    .map(|(t, e)| &m.pf.vis[e.0] * &m.pf.pr[t])
                    .sum();
                assert_eq!(inflow, m.pf.vis[b]);
            }
            assert_eq!(m.pf.vis[comp[0]], qi(1));
        }
    }
}
