//! Reference nets and random instance generators used by tests, the
//! acceptance harness and the CLI examples.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::net::{parse_net, serialize_net, Marking, Mode, NetFile, PetriNet, RateTable};
use crate::rational::{q, Q};
use crate::Model;

/// The three-layer running example in its open form (`p_ext` deleted).
///
/// Layer 1 is `{r0, r1}`, layer 2 `{q0..q3}`, layer 3 `{p0, p1, p2, p_ext}`.
pub const FIG1_OPEN: &str = "\
# Three-layer example net, initial marking q3 + r0.
net fig1
mode open
place r0 tokens 1
place r1
place q0
place q1
place q2
place q3 tokens 1
place p0
place p1
place p2
place p_ext external
trans t0 rate 1
  in p2 1 q3 3
  out p1 1 q2 1
trans t1 rate 1
  in p2 1 q3 3
  out p_ext 1 q1 1
trans t2 rate 1
  in p1 1 q2 1
  out p0 1
trans t3 rate 1
  in p_ext 1 q1 1
  out p0 1
trans t4 rate 1
  in p0 1
  out p2 1 q3 3
trans t5 rate 1
  in q3 1 r0 1
  out q2 1 r0 1
trans t6 rate 1
  in q2 1 r0 1
  out q1 1 r0 1
trans t7 rate 1
  in q1 1 r0 1
  out q0 1
trans t8 rate 1
  in q0 1
  out q3 1 r0 1
trans t9 rate 1
  in r1 1
  out r0 1
trans t10 rate 1
  in r0 1
  out r1 1
";

/// The running example with all rates 1, read as a closed net.
pub fn fig1_closed() -> NetFile {
    fig1(Mode::Closed, None)
}

/// The running example with all rates 1, read as an open net.
pub fn fig1_open() -> NetFile {
    fig1(Mode::Open, None)
}

/// The running example with explicit rates for `t0..t10`.
pub fn fig1(mode: Mode, rates: Option<&[Q]>) -> NetFile {
    let text = match mode {
        Mode::Open => FIG1_OPEN.to_string(),
        Mode::Closed => FIG1_OPEN.replace("mode open", "mode closed").replace(" external", ""),
    };
    let mut f = parse_net(&text).expect("reference net parses");
    if let Some(r) = rates {
        assert_eq!(r.len(), f.net.transition_count());
        f.rates = RateTable(r.to_vec());
    }
    f
}

/// Rates for `t0..t10` under which the open example is ergodic.
pub fn fig1_ergodic_rates() -> Vec<Q> {
    [(6, 1), (8, 1), (8, 1), (1, 1), (7, 1), (4, 1), (5, 1), (8, 1), (9, 1), (8, 1), (2, 1)]
        .iter()
        .map(|&(n, d)| q(n, d))
        .collect()
}

/// Alternative rate assignments for the closed example.
pub fn fig1_rate_variants() -> Vec<Vec<Q>> {
    vec![
        vec![q(1, 1); 11],
        fig1_ergodic_rates(),
        [(5, 2), (1, 3), (7, 4), (2, 1), (3, 5), (1, 1), (9, 7), (4, 3), (1, 2), (6, 1), (2, 9)]
            .iter()
            .map(|&(n, d)| q(n, d))
            .collect(),
    ]
}

/// Closed two-place cycle `r0 ⇄ r1` with `λ(r0→r1) = a`, `λ(r1→r0) = b`
/// and `k` tokens on `r0`.
pub fn cycle(a: Q, b: Q, k: u32) -> NetFile {
    let net = PetriNet::new(
        "cycle",
        vec!["r0".into(), "r1".into()],
        vec!["go".into(), "back".into()],
        vec![vec![1, 0], vec![0, 1]],
        vec![vec![0, 1], vec![1, 0]],
    );
    NetFile { net, rates: RateTable(vec![a, b]), initial: Marking(vec![k, 0]), mode: Mode::Closed, external: None }
}

/// Shape of randomly generated layered nets.
#[derive(Clone, Copy, Debug)]
pub struct RandomNetOptions {
    pub max_layers: usize,
    pub max_places: usize,
    pub max_pot: u32,
    pub open: bool,
    /// Open nets only: make `p_ext` the unique maximal-potential place of the
    /// top layer (`Some(true)`), forbid it (`Some(false)`), or leave it to
    /// chance (`None`).
    pub bounded: Option<bool>,
    /// Extra tokens sprinkled on top of the minimal live marking.
    pub extra_tokens: u32,
}

impl Default for RandomNetOptions {
    fn default() -> Self {
        RandomNetOptions { max_layers: 4, max_places: 12, max_pot: 2, open: false, bounded: None, extra_tokens: 1 }
    }
}

fn random_rate<R: Rng>(rng: &mut R) -> Q {
    q(rng.random_range(1..=4), rng.random_range(1..=3))
}

/// Draws one candidate net; may fail structural validation (the caller
/// retries).
fn draw<R: Rng>(rng: &mut R, opts: &RandomNetOptions) -> NetFile {
    let n_layers = rng.random_range(1..=opts.max_layers);
    let mut sizes: Vec<usize> = (0..n_layers).map(|_| rng.random_range(2..=4)).collect();
    while sizes.iter().sum::<usize>() > opts.max_places {
        let i = rng.random_range(0..n_layers);
        if sizes[i] > 2 {
            sizes[i] -= 1;
        } else if sizes.iter().all(|&s| s == 2) {
            sizes.pop();
        }
    }
    let n_layers = sizes.len();
    let n: usize = sizes.iter().sum();
    let mut names = Vec::new();
    let mut layers: Vec<Vec<usize>> = Vec::new();
    for (i, &s) in sizes.iter().enumerate() {
        layers.push((names.len()..names.len() + s).collect());
        for k in 0..s {
            names.push(format!("p{}_{}", i + 1, k));
        }
    }
    let ext = if opts.open { Some(*layers[n_layers - 1].choose(rng).unwrap()) } else { None };

    // Potentials and bags.
    let mut pot = vec![0u32; n];
    let mut bags: Vec<Vec<u32>> = vec![vec![0; n]; n];
    let mut layer_max: Vec<u32> = Vec::new();
    for (i, layer) in layers.iter().enumerate() {
        if i > 0 {
            for &p in layer {
                pot[p] = rng.random_range(0..=opts.max_pot);
            }
            if layer.iter().all(|&p| pot[p] == 0) {
                pot[*layer.choose(rng).unwrap()] = rng.random_range(1..=opts.max_pot.max(1));
            }
            if let (Some(e), true) = (ext, i == n_layers - 1) {
                let others = layer.iter().filter(|&&p| p != e).map(|&p| pot[p]).max().unwrap_or(0);
                match opts.bounded {
                    Some(true) => pot[e] = others + 1,
                    Some(false) if pot[e] > others => pot[e] = others,
                    _ => {}
                }
            }
        }
        let below: Vec<usize> =
            if i > 0 { layers[i - 1].iter().copied().filter(|&p| pot[p] == layer_max[i - 1]).collect() } else { vec![] };
        for &p in layer {
            bags[p][p] = 1;
            for _ in 0..pot[p] {
                bags[p][*below.choose(rng).unwrap()] += 1;
            }
        }
        layer_max.push(layer.iter().map(|&p| pot[p]).max().unwrap());
    }

    // Transitions: a random cycle through each layer's bags plus extra arcs.
    let mut pre = Vec::new();
    let mut post = Vec::new();
    let mut rates = Vec::new();
    let mut tnames = Vec::new();
    for layer in &layers {
        let mut order = layer.clone();
        for k in (1..order.len()).rev() {
            order.swap(k, rng.random_range(0..=k));
        }
        let mut arcs: Vec<(usize, usize)> = (0..order.len()).map(|k| (order[k], order[(k + 1) % order.len()])).collect();
        for _ in 0..rng.random_range(0..=2) {
            let a = *layer.choose(rng).unwrap();
            let b = *layer.choose(rng).unwrap();
            if a != b && !arcs.contains(&(a, b)) {
                arcs.push((a, b));
            }
        }
        for (a, b) in arcs {
            tnames.push(format!("t{}", tnames.len()));
            pre.push(bags[a].clone());
            post.push(bags[b].clone());
            rates.push(random_rate(rng));
        }
    }

    // A live marking: enough tokens on every lower layer for any bag above.
    let mut m = vec![0u32; n];
    for (i, layer) in layers.iter().enumerate() {
        let count = if i + 1 < n_layers {
            layer_max[i + 1] + rng.random_range(0..=opts.extra_tokens)
        } else if opts.open {
            rng.random_range(0..=opts.extra_tokens)
        } else {
            1 + rng.random_range(0..=opts.extra_tokens)
        };
        let candidates: Vec<usize> = layer.iter().copied().filter(|&p| Some(p) != ext).collect();
        for _ in 0..count {
            m[*candidates.choose(rng).unwrap()] += 1;
        }
    }
    let net = PetriNet::new("random", names, tnames, pre, post);
    NetFile {
        net,
        rates: RateTable(rates),
        initial: Marking(m),
        mode: if opts.open { Mode::Open } else { Mode::Closed },
        external: ext,
    }
}

/// Draws a random accepted layered net with a live initial marking.
///
/// The returned file round-trips through the textual format.
pub fn random_pi3<R: Rng>(rng: &mut R, opts: &RandomNetOptions) -> NetFile {
    loop {
        let f = draw(rng, opts);
        let Ok(f) = parse_net(&serialize_net(&f)) else { continue };
        if let Ok(model) = Model::new(&f) {
            if model.is_live() {
                return f;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_nets_are_accepted_and_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for open in [false, true] {
            for _ in 0..40 {
                let opts = RandomNetOptions { open, ..Default::default() };
                let f = random_pi3(&mut rng, &opts);
                assert!(f.net.place_count() <= 12);
                let m = Model::new(&f).unwrap();
                assert!(m.structure.n_layers() <= 4);
                assert!(m.is_live());
            }
        }
    }

    #[test]
    fn forced_bounded_open_nets_have_positive_top_cin() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let opts = RandomNetOptions { open: true, bounded: Some(true), ..Default::default() };
            let f = random_pi3(&mut rng, &opts);
            let m = Model::new(&f).unwrap();
            let s = &m.structure;
            if s.n_layers() > 1 {
                assert!(s.layer(s.n_layers()).iter().all(|&p| s.cin(p) > 0));
            }
        }
    }
}
