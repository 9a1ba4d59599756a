//! Exact normalizing constant `‖v‖ = Σ_{m ∈ R(m0)} v̂(m)` of a live layered
//! net, and steady-state probabilities.
//!
//! The places are split into `X = ⋃_{i≤N−2} P_i ∪ P_{N−1}^¬max` and its
//! complement `Y = P_{N−1}^max ∪ P_N`. The constraints describing `R(m0)`
//! only couple the two sides through `c = m·P_{N−1}^¬max`, so
//!
//! ```text
//! ‖v‖ = Σ_c  S_X(c) · S_Y(c)
//! ```
//!
//! where `S_X(c)` sums `v̂` over the admissible `X`-parts with that `c`
//! ([`sum_c`]) and `S_Y(c)` over the admissible `Y`-parts ([`sum_d_open`],
//! [`sum_d_closed`]).
//!
//! `S_X` is a memoized recursion over layers: within a layer, places are
//! sorted by increasing potential, the first marked place fixes the liveness
//! threshold, and the remaining tokens of the layer are distributed by a
//! prefix recursion keyed by `(layer, first-marked, cursor, tokens, budget)`.
//!
//! For open nets `S_Y` is an infinite sum. It is split by the first marked
//! top-layer place (in decreasing `cin` order); within a class the last
//! interface place is eliminated with the linear invariant, the top-layer
//! variables are rescaled onto the lattices `Δ_j ℕ` (`Δ_j = max(1,|cin_j|)`)
//! and the remaining sum over a polyhedral cone is evaluated by pairing one
//! positive-direction variable with one negative-direction variable at a
//! time and summing the resulting geometric series in closed form. Values of
//! that recursion carry a symbolic monomial `Π μ_j^{e_j}` with fractional
//! exponents `e_j ∈ [0,1)`, so no root of a rational is ever taken; the final
//! class values are asserted to have an empty monomial.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::bags::Pi3Structure;
use crate::net::{Marking, PetriNet};
use crate::qualitative::{invariant_system, is_live, is_reachable, InvariantSystem};
use crate::rational::{pow_i, split_exponent, Q};
use crate::stochastic::{weight, ProductForm};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormError {
    #[error("initial marking is not live")]
    NotLive,
    #[error("the net is not ergodic: {0} >= 1")]
    NotErgodic(String),
    #[error("internal error: monomials {0} and {1} cannot be combined")]
    MonomialMismatch(String, String),
    #[error("marking is not reachable from the initial marking")]
    Unreachable,
}

/// The `X`/`Y` split and the ordering of the top layer used by the sums.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XYSplit {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    /// Conservative upper end of the `c` range, `|P|·𝐖·‖m0‖`.
    pub c_max: i64,
    /// Top-layer places sorted by decreasing `cin` (stable in file order).
    pub top_sorted: Vec<usize>,
    /// Number of top-layer places with `cin > 0`.
    pub t: usize,
    /// 1-based index of the first place with `cin < 0` (`b + 1` if none).
    pub u: usize,
    pub b: usize,
    /// `Δ_j = max(1, |cin_j|)` in sorted order.
    pub delta: Vec<i64>,
}

pub fn split_xy(s: &Pi3Structure, net: &PetriNet, m0: &Marking) -> XYSplit {
    let nl = s.n_layers();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for p in 0..s.place_count() {
        let i = s.layer_of(p);
        let in_x = i + 2 <= nl || (i + 1 == nl && !s.pmax(i).contains(&p));
        if in_x {
            x.push(p);
        } else {
            y.push(p);
        }
    }
    let mut top_sorted = s.layer(nl).to_vec();
    top_sorted.sort_by_key(|&p| -s.cin(p));
    let t = top_sorted.iter().filter(|&&p| s.cin(p) > 0).count();
    let neg = top_sorted.iter().filter(|&&p| s.cin(p) < 0).count();
    let b = top_sorted.len();
    let delta = top_sorted.iter().map(|&p| s.cin(p).abs().max(1)).collect();
    XYSplit {
        x,
        y,
        c_max: s.place_count() as i64 * net.max_weight() as i64 * m0.norm() as i64,
        top_sorted,
        t,
        u: b - neg + 1,
        b,
        delta,
    }
}

/// `h_k(μ_S)` for `k = 0..=n_max`: sums of `Π μ^m` over all `m ∈ ℕ^S` with
/// `‖m‖ = k`.
fn complete_homogeneous(mu: &[Q], places: &[usize], n_max: usize) -> Vec<Q> {
    let mut h = vec![Q::zero(); n_max + 1];
    h[0] = Q::one();
    for &p in places {
        for k in 1..=n_max {
            let add = &h[k - 1] * &mu[p];
            h[k] += add;
        }
    }
    h
}

/// Lazily extended table of `h_k` over a fixed place set.
struct HTable {
    places: Vec<usize>,
    values: Vec<Q>,
}

impl HTable {
    fn new(places: Vec<usize>) -> Self {
        HTable { places, values: vec![Q::one()] }
    }

    fn get(&mut self, mu: &[Q], k: i64) -> Q {
        if k < 0 {
            return Q::zero();
        }
        let k = k as usize;
        if k >= self.values.len() {
            self.values = complete_homogeneous(mu, &self.places, (2 * k).max(8));
        }
        self.values[k].clone()
    }
}

/// Memoized evaluation of `S_X(c)`.
struct XSum<'a> {
    s: &'a Pi3Structure,
    mu: &'a [Q],
    inv: InvariantSystem,
    /// Per layer `i` (index `i−1`): the places of `X` in that layer sorted by
    /// increasing potential.
    sorted: Vec<Vec<usize>>,
    h1: HTable,
    f_memo: HashMap<(usize, i64, i64), Q>,
    w_memo: HashMap<(usize, usize, usize, i64, i64), Q>,
}

impl<'a> XSum<'a> {
    fn new(s: &'a Pi3Structure, mu: &'a [Q], m0: &Marking) -> Self {
        let nl = s.n_layers();
        let mut sorted = Vec::new();
        for i in 1..nl {
            let mut l: Vec<usize> = if i + 1 == nl { s.pnegmax(i) } else { s.layer(i).to_vec() };
            l.sort_by_key(|&p| s.pot(p));
            sorted.push(l);
        }
        XSum {
            s,
            mu,
            inv: invariant_system(s, m0),
            sorted,
            h1: HTable::new(s.layer(1).to_vec()),
            f_memo: HashMap::new(),
            w_memo: HashMap::new(),
        }
    }

    /// Sum over layers `1..=i` with `c` tokens on the (restricted) layer `i`
    /// and budget `cp = m·P_{i−1} + Σ_{L_i} cin·m` for the invariant below.
    fn f(&mut self, i: usize, c: i64, cp: i64) -> Q {
        if c < 0 || cp < 0 {
            return Q::zero();
        }
        if i == 1 {
            return self.h1.get(self.mu, c);
        }
        if let Some(v) = self.f_memo.get(&(i, c, cp)) {
            return v.clone();
        }
        let mut total = Q::zero();
        if c == 0 && cp >= self.s.pot_cap(i) {
            let below = self.inv.c(i - 2);
            total += self.f(i - 1, cp, below);
        }
        if c > 0 {
            for j in 0..self.sorted[i - 1].len() {
                let q = self.sorted[i - 1][j];
                let v = self.w(i, j, j, c - 1, cp - self.s.cin(q));
                total += &self.mu[q] * v;
            }
        }
        self.f_memo.insert((i, c, cp), total.clone());
        total
    }

    /// Distributes `c` more tokens over positions `k..` of layer `i`, the
    /// first marked position being `j`.
    fn w(&mut self, i: usize, j: usize, k: usize, c: i64, cp: i64) -> Q {
        if c < 0 || cp < 0 {
            return Q::zero();
        }
        let layer_len = self.sorted[i - 1].len();
        if k == layer_len {
            if c != 0 {
                return Q::zero();
            }
            let theta = self.s.pot(self.sorted[i - 1][j]) as i64;
            if cp < theta {
                return Q::zero();
            }
            let below = self.inv.c(i - 2);
            return self.f(i - 1, cp, below);
        }
        if let Some(v) = self.w_memo.get(&(i, j, k, c, cp)) {
            return v.clone();
        }
        let q = self.sorted[i - 1][k];
        let skip = self.w(i, j, k + 1, c, cp);
        let take = self.w(i, j, k, c - 1, cp - self.s.cin(q));
        let v = skip + &self.mu[q] * take;
        self.w_memo.insert((i, j, k, c, cp), v.clone());
        v
    }

    fn value(&mut self, c: i64) -> Q {
        let nl = self.s.n_layers();
        if nl <= 2 {
            return if c == 0 { Q::one() } else { Q::zero() };
        }
        let top_budget = self.inv.c(nl - 2);
        self.f(nl - 1, c, top_budget)
    }
}

/// `S_X(c)`: the sum of `v̂` over the `X`-parts of reachable markings with
/// `c` tokens on `P_{N−1}^¬max`. Zero outside `0..=|P|·𝐖·‖m0‖`.
pub fn sum_c(s: &Pi3Structure, net: &PetriNet, pf: &ProductForm, m0: &Marking, c: i64) -> Q {
    let split = split_xy(s, net, m0);
    if c < 0 || c > split.c_max {
        return Q::zero();
    }
    XSum::new(s, &pf.mu, m0).value(c)
}

/// `S_Y(c)` for a closed net: a finite sum over the top layer (which holds
/// exactly `C_N` tokens) and the interface places.
pub fn sum_d_closed(s: &Pi3Structure, pf: &ProductForm, m0: &Marking, c: i64) -> Q {
    let inv = invariant_system(s, m0);
    let nl = s.n_layers();
    let mu = &pf.mu;
    if nl == 1 {
        let mut h = HTable::new(s.layer(1).to_vec());
        return h.get(mu, inv.c(1));
    }
    let c_top = inv.c(nl);
    let rest = inv.c(nl - 1) - c;
    let mut hx = HTable::new(s.pmax(nl - 1).to_vec());
    let mut top = s.layer(nl).to_vec();
    top.sort_by_key(|&p| s.pot(p));

    // poly(k, r): Σ over z on top[k..] with ‖z‖ = r of Π μ^z, keyed by Σ cin·z.
    fn poly(
        k: usize,
        r: i64,
        top: &[usize],
        s: &Pi3Structure,
        mu: &[Q],
        memo: &mut HashMap<(usize, i64), BTreeMap<i64, Q>>,
    ) -> BTreeMap<i64, Q> {
        if k == top.len() {
            return if r == 0 { BTreeMap::from([(0, Q::one())]) } else { BTreeMap::new() };
        }
        if let Some(v) = memo.get(&(k, r)) {
            return v.clone();
        }
        let p = top[k];
        let mut out: BTreeMap<i64, Q> = BTreeMap::new();
        let mut w = Q::one();
        for z in 0..=r {
            for (sh, v) in poly(k + 1, r - z, top, s, mu, memo) {
                *out.entry(sh + s.cin(p) * z).or_insert_with(Q::zero) += &w * v;
            }
            w *= &mu[p];
        }
        memo.insert((k, r), out.clone());
        out
    }

    let mut total = Q::zero();
    if c_top == 0 {
        if rest >= 0 && c + rest >= s.pot_cap(nl) {
            total += hx.get(mu, rest);
        }
        return total;
    }
    let mut memo = HashMap::new();
    for j in 0..top.len() {
        let p = top[j];
        let theta = s.pot(p) as i64;
        for (sh, v) in poly(j, c_top - 1, &top, s, mu, &mut memo) {
            let sh = sh + s.cin(p);
            let xs = rest - sh;
            if xs >= 0 && c + xs >= theta {
                total += &mu[p] * v * hx.get(mu, xs);
            }
        }
    }
    total
}

/// A rational coefficient times `Π μ_p^{e_p}` with `e_p ∈ (0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Mono {
    coeff: Q,
    exps: BTreeMap<usize, Q>,
}

impl Mono {
    fn scalar(q: Q) -> Self {
        Mono { coeff: q, exps: BTreeMap::new() }
    }

    fn zero() -> Self {
        Mono::scalar(Q::zero())
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self.exps.iter().map(|(p, e)| format!("mu{p}^{e}")).collect();
        format!("{}*{}", self.coeff, parts.join("*"))
    }
}

/// Arithmetic on [`Mono`] values (needs `μ` to carry integer exponent parts).
struct MonoArith<'a> {
    mu: &'a [Q],
}

impl MonoArith<'_> {
    fn mul(&self, a: &Mono, b: &Mono) -> Mono {
        if a.coeff.is_zero() || b.coeff.is_zero() {
            return Mono::zero();
        }
        let mut coeff = &a.coeff * &b.coeff;
        let mut exps = a.exps.clone();
        for (&p, e) in &b.exps {
            let entry = exps.entry(p).or_insert_with(Q::zero);
            *entry += e;
            if *entry >= Q::one() {
                *entry -= Q::one();
                coeff *= &self.mu[p];
            }
        }
        exps.retain(|_, e| !e.is_zero());
        Mono { coeff, exps }
    }

    fn add(&self, a: Mono, b: Mono, sign: i32) -> Result<Mono, NormError> {
        let b = if sign < 0 { Mono { coeff: -b.coeff, exps: b.exps } } else { b };
        if b.coeff.is_zero() {
            return Ok(a);
        }
        if a.coeff.is_zero() {
            return Ok(b);
        }
        if a.exps != b.exps {
            return Err(NormError::MonomialMismatch(a.describe(), b.describe()));
        }
        Ok(Mono { coeff: a.coeff + b.coeff, exps: a.exps })
    }

    /// `μ_p^{num/den}`.
    fn root_pow(&self, p: usize, num: i64, den: i64) -> Mono {
        let (whole, rem) = split_exponent(num, den);
        let mut exps = BTreeMap::new();
        if rem != 0 {
            exps.insert(p, Q::new(rem.into(), den.into()));
        }
        Mono { coeff: pow_i(&self.mu[p], whole), exps }
    }
}

/// One class of the open `Y`-side sum, keyed by the first marked top-layer
/// position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct UKey {
    a: i64,
    b: i64,
    w_var: usize,
    w_res: i64,
    alpha: usize,
    beta: usize,
    gamma: usize,
}

/// Evaluation of the cone sums for one class of the open `Y`-side.
///
/// Variables: `x_1..x_α` (interface places but the last), positive-direction
/// top-layer positions `γ..t` and negative-direction positions `lo..β`
/// (0-based, exclusive upper ends). Each value is
/// `Σ Π ν^{Y} · [A + ΣN − Σx − ΣP ≥ 0] · [B + ΣN − ΣP ≥ 0]` with every
/// top-layer `Y_j ∈ Δ_j ℕ`, except the variable named by `w` whose lattice
/// is shifted by the residue.
struct OpenClass<'a> {
    arith: MonoArith<'a>,
    mu: &'a [Q],
    xs: &'a [usize],
    ys: &'a [usize],
    delta: &'a [i64],
    t: usize,
    lo: usize,
    memo: HashMap<UKey, Mono>,
}

const NO_VAR: usize = usize::MAX;

impl OpenClass<'_> {
    fn xa(&self) -> &Q {
        &self.mu[*self.xs.last().unwrap()]
    }

    /// `ν_{x,i}^k = (μ_{x_i}/μ_{x_a})^k`.
    fn nu_x(&self, i: usize, k: i64) -> Mono {
        Mono::scalar(pow_i(&(&self.mu[self.xs[i]] / self.xa()), k))
    }

    /// `ν_j^k` for a top-layer position: `μ_j^{k/Δ_j}·μ_{x_a}^{∓k}`.
    fn nu_y(&self, j: usize, k: i64) -> Mono {
        let mut m = self.arith.root_pow(self.ys[j], k, self.delta[j]);
        let sign = if j < self.t { -1 } else { 1 };
        m.coeff *= pow_i(self.xa(), sign * k);
        m
    }

    fn residue(&self, key: &UKey, var: usize) -> i64 {
        if key.w_var == var {
            key.w_res
        } else {
            0
        }
    }

    fn key(a: i64, b: i64, w: Option<(usize, i64)>, alpha: usize, beta: usize, gamma: usize) -> UKey {
        let (w_var, w_res) = match w {
            Some((v, r)) if r != 0 => (v, r),
            _ => (NO_VAR, 0),
        };
        UKey { a, b, w_var, w_res, alpha, beta, gamma }
    }

    fn denominator(&self, value: Q, what: impl FnOnce() -> String) -> Result<Q, NormError> {
        let d = Q::one() - value;
        if d.is_positive() {
            Ok(d)
        } else {
            Err(NormError::NotErgodic(what()))
        }
    }

    fn u(&mut self, mut k: UKey) -> Result<Mono, NormError> {
        let has_p = k.gamma < self.t;
        let has_n = k.beta > self.lo;
        let has_x = k.alpha > 0;
        if !has_p {
            k.b = k.b.min(0);
            if !has_x {
                let m = k.a.min(k.b).min(0);
                k.a = m;
                k.b = m;
            }
        }
        if let Some(v) = self.memo.get(&k) {
            return Ok(v.clone());
        }
        let v = self.compute(k, has_p, has_n, has_x)?;
        self.memo.insert(k, v.clone());
        Ok(v)
    }

    fn compute(&mut self, k: UKey, has_p: bool, has_n: bool, has_x: bool) -> Result<Mono, NormError> {
        let UKey { a, b, alpha, beta, gamma, .. } = k;
        if !has_n {
            if !has_p && !has_x {
                return Ok(Mono::scalar(if a >= 0 && b >= 0 { Q::one() } else { Q::zero() }));
            }
            if a < 0 || b < 0 {
                return Ok(Mono::zero());
            }
            let mut acc = Mono::zero();
            if has_p {
                let j = gamma;
                let mut y = self.residue(&k, j);
                while y <= a.min(b) {
                    let rest = self.u(Self::key(a - y, b - y, None, alpha, beta, gamma + 1))?;
                    acc = self.arith.add(acc, self.arith.mul(&self.nu_y(j, y), &rest), 1)?;
                    y += self.delta[j];
                }
            } else {
                for x in 0..=a {
                    let rest = self.u(Self::key(a - x, b, None, alpha - 1, beta, gamma))?;
                    acc = self.arith.add(acc, self.arith.mul(&self.nu_x(alpha - 1, x), &rest), 1)?;
                }
            }
            return Ok(acc);
        }

        let bv = beta - 1;
        let db = self.delta[bv];
        let rb = self.residue(&k, bv);
        if has_p {
            // Pair the top negative variable with the current positive one.
            let gv = gamma;
            let dg = self.delta[gv];
            let rg = self.residue(&k, gv);
            let l = db * dg;
            let rho_pow = |this: &Self, e: i64| this.arith.mul(&this.nu_y(bv, e), &this.nu_y(gv, e));
            let rho_l = pow_i(&self.mu[self.ys[bv]], dg) * pow_i(&self.mu[self.ys[gv]], db);
            let den = self.denominator(rho_l, || format!("v(f) for a positive/negative top-layer pair"))?;
            let mut acc = Mono::zero();
            for k0 in 0..db {
                let e = rg + dg * k0;
                let w = Some((bv, (rb - e).rem_euclid(db)));
                let rest = self.u(Self::key(a, b, w, alpha, beta, gamma + 1))?;
                acc = self.arith.add(acc, self.arith.mul(&rho_pow(self, e), &rest), 1)?;
            }
            for k0 in 0..dg {
                let e = rb + db * k0;
                let w = Some((gv, (rg - e).rem_euclid(dg)));
                let rest = self.u(Self::key(a, b, w, alpha, beta - 1, gamma))?;
                acc = self.arith.add(acc, self.arith.mul(&rho_pow(self, e), &rest), 1)?;
            }
            for e in 0..l {
                if e.rem_euclid(db) == rb && e.rem_euclid(dg) == rg {
                    let rest = self.u(Self::key(a, b, None, alpha, beta - 1, gamma + 1))?;
                    acc = self.arith.add(acc, self.arith.mul(&rho_pow(self, e), &rest), -1)?;
                }
            }
            acc.coeff /= den;
            return Ok(acc);
        }

        if has_x {
            // Pair the top negative variable with the last remaining x.
            let xv = alpha - 1;
            let sigma_pow = |this: &Self, e: i64| this.arith.mul(&this.nu_x(xv, e), &this.nu_y(bv, e));
            let sigma_d = pow_i(&self.mu[self.xs[xv]], db) * &self.mu[self.ys[bv]];
            let den = self.denominator(sigma_d, || format!("v(f) for an interface/negative pair"))?;
            let mut acc = Mono::zero();
            // x ≤ Y_β: the difference stays a negative-direction variable.
            let x0 = (-b).max(0);
            for x in 0..x0 {
                let w = Some((bv, (rb - x).rem_euclid(db)));
                let rest = self.u(Self::key(a, b + x, w, alpha - 1, beta, gamma))?;
                acc = self.arith.add(acc, self.arith.mul(&sigma_pow(self, x), &rest), 1)?;
            }
            for k0 in 0..db {
                let x = x0 + k0;
                let w = Some((bv, (rb - x).rem_euclid(db)));
                let rest = self.u(Self::key(a, 0, w, alpha - 1, beta, gamma))?;
                let mut term = self.arith.mul(&sigma_pow(self, x), &rest);
                term.coeff /= &den;
                acc = self.arith.add(acc, term, 1)?;
            }
            // x ≥ Y_β (the x survives as the difference), minus the diagonal.
            for (keep_x, sign) in [(true, 1), (false, -1)] {
                let next_alpha = if keep_x { alpha } else { alpha - 1 };
                let mut y = rb;
                while y < -b {
                    let rest = self.u(Self::key(a, b + y, None, next_alpha, beta - 1, gamma))?;
                    acc = self.arith.add(acc, self.arith.mul(&sigma_pow(self, y), &rest), sign)?;
                    y += db;
                }
                let rest = self.u(Self::key(a, 0, None, next_alpha, beta - 1, gamma))?;
                let mut term = self.arith.mul(&sigma_pow(self, y), &rest);
                term.coeff /= &den;
                acc = self.arith.add(acc, term, sign)?;
            }
            return Ok(acc);
        }

        // Only negative-direction variables: the constraint is ΣN ≥ −min(A,B).
        let m = a.min(b);
        if m >= 0 {
            let mut acc = Mono::scalar(Q::one());
            for j in self.lo..beta {
                let d = self.delta[j];
                let den = self.denominator(self.nu_y(j, d).coeff, || format!("v(f) for an interface/negative pair"))?;
                let mut term = self.nu_y(j, self.residue(&k, j));
                term.coeff /= den;
                acc = self.arith.mul(&acc, &term);
            }
            return Ok(acc);
        }
        let den = self.denominator(self.nu_y(bv, db).coeff, || format!("v(f) for an interface/negative pair"))?;
        let mut acc = Mono::zero();
        let mut y = rb;
        while y < -m {
            let rest = self.u(Self::key(a + y, b + y, None, 0, beta - 1, gamma))?;
            acc = self.arith.add(acc, self.arith.mul(&self.nu_y(bv, y), &rest), 1)?;
            y += db;
        }
        let rest = self.u(Self::key(0, 0, None, 0, beta - 1, gamma))?;
        let mut term = self.arith.mul(&self.nu_y(bv, y), &rest);
        term.coeff /= den;
        self.arith.add(acc, term, 1)
    }
}

/// State shared by all `c` for the open `Y`-side sum.
struct YOpen<'a> {
    s: &'a Pi3Structure,
    mu: &'a [Q],
    split: XYSplit,
    xs: Vec<usize>,
    inv: InvariantSystem,
    hx: HTable,
    classes: Vec<HashMap<UKey, Mono>>,
}

impl<'a> YOpen<'a> {
    fn new(s: &'a Pi3Structure, net: &PetriNet, mu: &'a [Q], m0: &Marking) -> Self {
        let split = split_xy(s, net, m0);
        let nl = s.n_layers();
        let xs = if nl >= 2 { s.pmax(nl - 1).to_vec() } else { Vec::new() };
        let b = split.b;
        YOpen {
            s,
            mu,
            inv: invariant_system(s, m0),
            hx: HTable::new(xs.clone()),
            xs,
            split,
            classes: vec![HashMap::new(); b],
        }
    }

    fn value(&mut self, c: i64) -> Result<Q, NormError> {
        let s = self.s;
        let nl = s.n_layers();
        let mu = self.mu;
        let ys = self.split.top_sorted.clone();
        if nl == 1 {
            let mut total = Q::one();
            for &p in &ys {
                let d = Q::one() - &mu[p];
                if !d.is_positive() {
                    return Err(NormError::NotErgodic(format!("mu of place {p}")));
                }
                total /= d;
            }
            return Ok(if c == 0 { total } else { Q::zero() });
        }
        let ext_pot = s.external().expect("open net").pot as i64;
        let c_top = self.inv.c(nl - 1);
        let t = self.split.t;
        let u0 = self.split.u - 1;
        let b = self.split.b;

        // No top-layer token at all.
        let mut total = Q::zero();
        if c_top - c >= 0 && c_top >= ext_pot {
            total += self.hx.get(mu, c_top - c);
        }
        let xa = *self.xs.last().unwrap();
        for sidx in 0..b {
            let p = ys[sidx];
            let cin = s.cin(p);
            let theta = (s.pot(p) as i64).min(ext_pot);
            let a_budget = c_top - cin - c;
            let b_budget = c_top - cin - theta;
            let mut z = Q::one();
            for &q in ys.iter().take(u0).skip(sidx.max(t)) {
                let d = Q::one() - &mu[q];
                if !d.is_positive() {
                    return Err(NormError::NotErgodic(format!("mu of place {q}")));
                }
                z /= d;
            }
            let memo = std::mem::take(&mut self.classes[sidx]);
            let mut class = OpenClass {
                arith: MonoArith { mu },
                mu,
                xs: &self.xs,
                ys: &ys,
                delta: &self.split.delta,
                t,
                lo: sidx.max(u0),
                memo,
            };
            let key = OpenClass::key(a_budget, b_budget, None, self.xs.len() - 1, b, sidx);
            let v = class.u(key);
            self.classes[sidx] = class.memo;
            let v = v?;
            if !v.exps.is_empty() {
                return Err(NormError::MonomialMismatch(v.describe(), "1".into()));
            }
            total += pow_i(&mu[xa], a_budget) * &mu[p] * z * v.coeff;
        }
        Ok(total)
    }
}

/// `S_Y(c)` for an open net (requires ergodicity; every geometric ratio met
/// on the way is checked to be below 1).
pub fn sum_d_open(s: &Pi3Structure, net: &PetriNet, pf: &ProductForm, m0: &Marking, c: i64) -> Result<Q, NormError> {
    YOpen::new(s, net, &pf.mu, m0).value(c)
}

/// The exact normalizing sum `‖v‖`.
pub fn normalizing_constant(s: &Pi3Structure, net: &PetriNet, pf: &ProductForm, m0: &Marking) -> Result<Q, NormError> {
    if !is_live(s, m0).live {
        return Err(NormError::NotLive);
    }
    let nl = s.n_layers();
    let inv = invariant_system(s, m0);
    // c = m·P_{N−1}^¬max never exceeds C_{N−2}, since cin ≥ 1 there.
    let c_hi = if nl >= 3 { inv.c(nl - 2) } else { 0 };
    let mut xsum = XSum::new(s, &pf.mu, m0);
    let mut yopen = s.is_open().then(|| YOpen::new(s, net, &pf.mu, m0));
    let mut total = Q::zero();
    for c in 0..=c_hi {
        let sx = xsum.value(c);
        if sx.is_zero() {
            continue;
        }
        let sy = match &mut yopen {
            Some(y) => y.value(c)?,
            None => sum_d_closed(s, pf, m0, c),
        };
        total += sx * sy;
    }
    Ok(total)
}

/// `π(m) = v̂(m)/‖v‖` for a marking reachable from the live `m0`.
pub fn steady_prob(s: &Pi3Structure, net: &PetriNet, pf: &ProductForm, m0: &Marking, m: &Marking) -> Result<Q, NormError> {
    match is_reachable(s, m0, m) {
        Err(_) => return Err(NormError::NotLive),
        Ok(false) => return Err(NormError::Unreachable),
        Ok(true) => {}
    }
    let z = normalizing_constant(s, net, pf, m0)?;
    Ok(weight(pf, &m.0) / z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{cycle, fig1, fig1_ergodic_rates, fig1_open};
    use crate::net::Mode;
    use crate::rational::{q, qi};
    use crate::Model;

    fn constant(m: &Model) -> Result<Q, NormError> {
        normalizing_constant(&m.structure, &m.net, &m.pf, &m.m0)
    }

    #[test]
    fn cycle_constant_and_probabilities() {
        let m = Model::new(&cycle(qi(2), qi(1), 1)).unwrap();
        assert_eq!(constant(&m).unwrap(), q(3, 2));
        let p = |lit: &str| steady_prob(&m.structure, &m.net, &m.pf, &m.m0, &m.marking(lit).unwrap()).unwrap();
        assert_eq!(p("r0=1"), q(1, 3));
        assert_eq!(p("r1=1"), q(2, 3));
        let bad = steady_prob(&m.structure, &m.net, &m.pf, &m.m0, &m.marking("r1=2").unwrap());
        assert_eq!(bad, Err(NormError::Unreachable));
    }

    #[test]
    fn figure_split() {
        let m = Model::new(&fig1_open()).unwrap();
        let sp = split_xy(&m.structure, &m.net, &m.m0);
        let names = |v: &[usize]| v.iter().map(|&p| m.net.places()[p].clone()).collect::<Vec<_>>();
        assert_eq!(names(&sp.x), ["r0", "r1", "q0"]);
        assert_eq!(names(&sp.y), ["q1", "q2", "q3", "p0", "p1", "p2"]);
        assert_eq!(names(&sp.top_sorted), ["p0", "p1", "p2"]);
        assert_eq!((sp.t, sp.u, sp.b), (1, 3, 3));
        assert_eq!(sp.delta, vec![1, 1, 2]);
    }

    #[test]
    fn out_of_range_c_is_zero() {
        let m = Model::new(&fig1_open()).unwrap();
        assert_eq!(sum_c(&m.structure, &m.net, &m.pf, &m.m0, -1), Q::zero());
        assert_eq!(sum_c(&m.structure, &m.net, &m.pf, &m.m0, 10_000), Q::zero());
    }

    #[test]
    fn figure_open_constant_matches_closed_form() {
        let m = Model::new(&fig1(Mode::Open, Some(&fig1_ergodic_rates()))).unwrap();
        let z = constant(&m).unwrap();
        let mu = |id: &str| m.pf.mu[m.net.place_index(id).unwrap()].clone();
        let (p0, p1, p2) = (mu("p0"), mu("p1"), mu("p2"));
        let (q0, q1, q2, q3) = (mu("q0"), mu("q1"), mu("q2"), mu("q3"));
        let (r0, r1) = (mu("r0"), mu("r1"));
        let a = &p2 * &p2 * &p0 * &q1 * &q2 * &q3
            + &p2 * (&p0 * &q1 + &p0 * &q2 + &p0 * &q3 + &q1 * &q2 + &q1 * &q3 + &q2 * &q3)
            + Q::one();
        // Tokens on p1 (cin = 0) are free and only contribute 1/(1 − μ_p1),
        // so μ_p1 cannot appear in the numerator.
        let b = &p2 * (&p0 * &q1 * &q2 + &p0 * &q1 * &q3 + &p0 * &q2 * &q3 + &q1 * &q2 * &q3) + &p0 + &q1 + &q2 + &q3;
        let one = Q::one();
        let c = (&one - &p0 * &p0 * &p2)
            * (&one - &p1)
            * (&one - &q1 * &q1 * &p2)
            * (&one - &q2 * &q2 * &p2)
            * (&one - &q3 * &q3 * &p2);
        assert_eq!(z, (q0 * a + (r0 + r1) * b) / c);
    }

    #[test]
    fn non_ergodic_open_net_is_rejected() {
        let m = Model::new(&fig1_open()).unwrap();
        assert!(matches!(constant(&m), Err(NormError::NotErgodic(_))));
    }
}
