//! Ergodicity of open layered nets.
//!
//! The reachability set of a live open net is sandwiched between
//! `{m0} + 𝓛` and `𝓖 + 𝓛`, where `𝓛` is the monoid generated by a finite
//! family `𝓕` of top-layer vectors and `𝓖` is a box of side `𝐆(m0)`. The
//! product-form norm is finite exactly when `v̂(f) < 1` for every `f ∈ 𝓕`.

use num_traits::One;
use thiserror::Error;

use crate::bags::Pi3Structure;
use crate::net::Marking;
use crate::qualitative::{invariant_system, is_live};
use crate::rational::Q;
use crate::stochastic::{weight, ProductForm};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ErgodicityError {
    #[error("the family is only defined for open nets")]
    ClosedNet,
    #[error("initial marking is not live")]
    NotLive,
}

/// Which rule produced a generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GeneratorKind {
    /// `p` for a top-layer place with `cin(p) = 0`.
    ZeroCin { p: usize },
    /// `cin(p)·q + |cin(q)|·p` for top-layer `p, q` with `cin(p) > 0 > cin(q)`.
    Pair { p: usize, q: usize },
    /// `q + |cin(q)|·p` for `p ∈ P_{N−1}^max` and top-layer `q` with `cin(q) < 0`.
    Interface { p: usize, q: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub vector: Vec<u32>,
    pub kind: GeneratorKind,
}

/// The family `𝓕`, deduplicated by vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyF {
    pub generators: Vec<Generator>,
}

pub fn family_f(s: &Pi3Structure) -> Result<FamilyF, ErgodicityError> {
    if !s.is_open() {
        return Err(ErgodicityError::ClosedNet);
    }
    let n = s.place_count();
    let nl = s.n_layers();
    let top = s.layer(nl);
    let mut gens: Vec<Generator> = Vec::new();
    let mut push = |vector: Vec<u32>, kind: GeneratorKind| {
        if !gens.iter().any(|g| g.vector == vector) {
            gens.push(Generator { vector, kind });
        }
    };
    for &p in top {
        if s.cin(p) == 0 {
            let mut v = vec![0; n];
            v[p] = 1;
            push(v, GeneratorKind::ZeroCin { p });
        }
    }
    for &p in top.iter().filter(|&&p| s.cin(p) > 0) {
        for &q in top.iter().filter(|&&q| s.cin(q) < 0) {
            let mut v = vec![0; n];
            v[q] += s.cin(p) as u32;
            v[p] += s.cin(q).unsigned_abs() as u32;
            push(v, GeneratorKind::Pair { p, q });
        }
    }
    if nl >= 2 {
        for &p in s.pmax(nl - 1) {
            for &q in top.iter().filter(|&&q| s.cin(q) < 0) {
                let mut v = vec![0; n];
                v[q] += 1;
                v[p] += s.cin(q).unsigned_abs() as u32;
                push(v, GeneratorKind::Interface { p, q });
            }
        }
    }
    Ok(FamilyF { generators: gens })
}

/// Ergodicity verdict with the generators violating `v̂(f) < 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErgodicReport {
    pub ergodic: bool,
    pub violations: Vec<(Generator, Q)>,
}

/// Closed live nets are ergodic (finite irreducible chains); open live nets
/// are ergodic iff `v̂(f) < 1` for every `f ∈ 𝓕`.
pub fn is_ergodic(pf: &ProductForm, s: &Pi3Structure, m0: &Marking) -> Result<ErgodicReport, ErgodicityError> {
    if !is_live(s, m0).live {
        return Err(ErgodicityError::NotLive);
    }
    if !s.is_open() {
        return Ok(ErgodicReport { ergodic: true, violations: Vec::new() });
    }
    let violations: Vec<(Generator, Q)> = family_f(s)?
        .generators
        .into_iter()
        .map(|g| {
            let w = weight(pf, &g.vector);
            (g, w)
        })
        .filter(|(_, w)| *w >= Q::one())
        .collect();
    Ok(ErgodicReport { ergodic: violations.is_empty(), violations })
}

/// The box side `𝐆(m0) = (C_∞ + 𝐄)(|P| + 1)` with `𝐄` the largest potential
/// and `C_∞ = max_{i ≤ N−2} C_i` (0 for an empty range).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverBound {
    pub c_inf: i64,
    pub e: i64,
    pub places: usize,
    pub g: i64,
}

pub fn cover_bound(s: &Pi3Structure, m0: &Marking) -> CoverBound {
    let inv = invariant_system(s, m0);
    let nl = s.n_layers();
    let c_inf = (1..nl.saturating_sub(1)).map(|i| inv.c(i)).max().unwrap_or(0);
    let e = s.max_pot() as i64;
    let places = s.place_count();
    CoverBound { c_inf, e, places, g: (c_inf + e) * (places as i64 + 1) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{fig1, fig1_closed, fig1_ergodic_rates, fig1_open};
    use crate::net::Mode;
    use crate::qualitative::dot;
    use crate::Model;

    fn render(m: &Model, f: &FamilyF) -> Vec<String> {
        f.generators.iter().map(|g| m.net.format_marking(&Marking(g.vector.clone()))).collect()
    }

    #[test]
    fn figure_family() {
        let m = Model::new(&fig1_open()).unwrap();
        let f = family_f(&m.structure).unwrap();
        assert_eq!(render(&m, &f), ["p1", "2p0+p2", "2q1+p2", "2q2+p2", "2q3+p2"]);
        assert!(family_f(&Model::new(&fig1_closed()).unwrap().structure).is_err());
    }

    #[test]
    fn family_preserves_invariants() {
        let m = Model::new(&fig1_open()).unwrap();
        let inv = m.invariants();
        for g in family_f(&m.structure).unwrap().generators {
            for v in &inv.vectors {
                assert_eq!(dot(v, &Marking(g.vector.clone())), 0);
            }
        }
    }

    #[test]
    fn figure_ergodicity() {
        let unit = Model::new(&fig1_open()).unwrap();
        let r = is_ergodic(&unit.pf, &unit.structure, &unit.m0).unwrap();
        assert!(!r.ergodic);
        let good = Model::new(&fig1(Mode::Open, Some(&fig1_ergodic_rates()))).unwrap();
        assert!(is_ergodic(&good.pf, &good.structure, &good.m0).unwrap().ergodic);
        let closed = Model::new(&fig1_closed()).unwrap();
        // The closed example from q3 + r0 is not live.
        assert_eq!(is_ergodic(&closed.pf, &closed.structure, &closed.m0), Err(ErgodicityError::NotLive));
        let live = closed.marking("q3=1,r0=1,p0=1").unwrap();
        assert!(is_ergodic(&closed.pf, &closed.structure, &live).unwrap().ergodic);
    }

    #[test]
    fn figure_cover_bound() {
        let m = Model::new(&fig1_open()).unwrap();
        let cb = cover_bound(&m.structure, &m.m0);
        assert_eq!((cb.c_inf, cb.e, cb.places, cb.g), (1, 3, 9, 40));
        for &p in m.structure.layer(1).iter().chain(m.structure.layer(2)) {
            assert!(m.m0.get(p) as i64 <= cb.g);
        }
    }
}
