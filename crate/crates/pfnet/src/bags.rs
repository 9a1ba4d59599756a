//! Bag graphs, witnesses, and the layered structure of Π³ nets.
//!
//! A *bag* is a column of `W⁻` or `W⁺`: the multiset of tokens a transition
//! consumes or produces at once. The bag graph has one vertex per distinct
//! bag and one edge `W⁻(t) → W⁺(t)` per transition.
//!
//! A layered net associates every place `p` with a bag `b_p` containing `p`
//! exactly once; the other places of `b_p` are *resources* taken from the
//! maximal-potential places of the layer below. The potential of `p` is the
//! number of resource tokens in `b_p`.

use std::collections::{BTreeMap, HashMap};

use num_traits::{One, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use petgraph::unionfind::UnionFind;
use thiserror::Error;

use crate::linalg;
use crate::net::{format_vector, Mode, PetriNet};
use crate::rational::{qi, Q};

/// The bag graph of a net.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BagGraph {
    /// Distinct bags, in order of first appearance when scanning transitions
    /// (`W⁻(t)` then `W⁺(t)` for each `t` in file order).
    pub bags: Vec<Vec<u32>>,
    /// `edges[t] = (source bag, target bag)`.
    pub edges: Vec<(usize, usize)>,
    /// Weakly connected components, each listed in bag order; components are
    /// ordered by their first bag.
    pub components: Vec<Vec<usize>>,
    /// Component index of every bag.
    pub component_of: Vec<usize>,
    /// Whether each component is strongly connected.
    pub strongly_connected: Vec<bool>,
}

impl BagGraph {
    pub fn bag_index(&self, v: &[u32]) -> Option<usize> {
        self.bags.iter().position(|b| b == v)
    }

    /// Transitions whose input bag is `b`.
    pub fn outgoing(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().enumerate().filter(move |(_, e)| e.0 == b).map(|(t, _)| t)
    }

    /// `true` iff every component is strongly connected.
    pub fn weakly_reversible(&self) -> bool {
        self.strongly_connected.iter().all(|&s| s)
    }
}

/// Builds the bag graph of `net`.
pub fn build_bag_graph(net: &PetriNet) -> BagGraph {
    let mut bags: Vec<Vec<u32>> = Vec::new();
    let mut index: HashMap<Vec<u32>, usize> = HashMap::new();
    let mut intern = |v: &[u32], bags: &mut Vec<Vec<u32>>| -> usize {
        *index.entry(v.to_vec()).or_insert_with(|| {
            bags.push(v.to_vec());
            bags.len() - 1
        })
    };
    let mut edges = Vec::with_capacity(net.transition_count());
    for t in 0..net.transition_count() {
        let a = intern(net.pre(t), &mut bags);
        let b = intern(net.post(t), &mut bags);
        edges.push((a, b));
    }

    let n = bags.len();
    let mut uf = UnionFind::<usize>::new(n);
    let mut g = DiGraph::<(), ()>::with_capacity(n, edges.len());
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for &(a, b) in &edges {
        uf.union(a, b);
        g.add_edge(nodes[a], nodes[b], ());
    }
    let mut comp_id: BTreeMap<usize, usize> = BTreeMap::new();
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut component_of = vec![0; n];
    for b in 0..n {
        let root = uf.find(b);
        let id = *comp_id.entry(root).or_insert_with(|| {
            components.push(Vec::new());
            components.len() - 1
        });
        components[id].push(b);
        component_of[b] = id;
    }
    let mut scc_of = vec![0; n];
    for (k, scc) in tarjan_scc(&g).into_iter().enumerate() {
        for v in scc {
            scc_of[v.index()] = k;
        }
    }
    let strongly_connected = components.iter().map(|c| c.iter().all(|&b| scc_of[b] == scc_of[c[0]])).collect();
    BagGraph { bags, edges, components, component_of, strongly_connected }
}

/// One witness vector (place-indexed) per bag of a bag graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessTable {
    pub wit: Vec<Vec<Q>>,
}

/// A transition for which a witness equation fails.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessFailure {
    pub bag: usize,
    pub transition: usize,
    pub value: Q,
    pub expected: i64,
}

/// Checks `wit_b · W(·,t) = −1 / +1 / 0` for every bag `b` and transition `t`
/// with exact equality.
pub fn verify_witnesses(net: &PetriNet, graph: &BagGraph, table: &WitnessTable) -> Result<(), WitnessFailure> {
    for (b, wit) in table.wit.iter().enumerate() {
        for (t, &(src, dst)) in graph.edges.iter().enumerate() {
            let expected = i64::from(dst == b) - i64::from(src == b);
            let value: Q = net.delta(t).iter().zip(wit).map(|(&d, w)| w * qi(d)).sum();
            if value != qi(expected) {
                return Err(WitnessFailure { bag: b, transition: t, value, expected });
            }
        }
    }
    Ok(())
}

/// Outcome of the product-form (Π²) classification.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pi2Report {
    pub weakly_reversible: bool,
    /// Bags for which the witness system has no solution.
    pub bags_without_witness: Vec<usize>,
    pub witnesses: Option<WitnessTable>,
}

impl Pi2Report {
    pub fn is_pi2(&self) -> bool {
        self.weakly_reversible && self.witnesses.is_some()
    }
}

/// Decides the Π² class: weak reversibility plus a witness for every bag,
/// found by solving the witness linear system exactly.
pub fn check_pi2(net: &PetriNet) -> Pi2Report {
    let graph = build_bag_graph(net);
    let rows: Vec<Vec<Q>> = (0..net.transition_count()).map(|t| net.delta(t).into_iter().map(qi).collect()).collect();
    let mut wit = Vec::new();
    let mut missing = Vec::new();
    for b in 0..graph.bags.len() {
        let rhs: Vec<Q> = graph.edges.iter().map(|&(s, d)| qi(i64::from(d == b) - i64::from(s == b))).collect();
        match linalg::solve(&rows, &rhs) {
            Some(x) => wit.push(x),
            None => missing.push(b),
        }
    }
    let witnesses = if missing.is_empty() { Some(WitnessTable { wit }) } else { None };
    Pi2Report { weakly_reversible: graph.weakly_reversible(), bags_without_witness: missing, witnesses }
}

/// Reasons for rejecting a layered structure.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("net has no transitions")]
    NoTransitions,
    #[error("bag-graph component containing `{0}` is not strongly connected")]
    NotStronglyConnected(String),
    #[error("no place/bag bijection: {0}")]
    NoBijection(String),
    #[error("bag `{bag}` uses `{place}`, which is not a maximal-potential place of the layer below")]
    BadResource { bag: String, place: String },
    #[error("layer order: {0}")]
    LayerOrder(String),
    #[error("declared layers: {0}")]
    Declared(String),
    #[error("external place `{0}` is not in the top layer")]
    ExternalNotTop(String),
}

/// The deleted place of an open net, kept as virtual metadata.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExternalPlace {
    pub name: String,
    /// Index of the place in the closed net.
    pub closed_index: usize,
    pub pot: u32,
    /// `b_{p_ext}` with `p_ext` removed, over the open net's places.
    pub resources: Vec<u32>,
}

/// The layered structure of a (closed or open) Π³ net.
///
/// All place indices refer to the net the structure was built for (the open
/// net in open mode). Layer numbers are 1-based in every public method.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pi3Structure {
    mode: Mode,
    layers: Vec<Vec<usize>>,
    layer_of: Vec<usize>,
    bag: Vec<Vec<u32>>,
    pot: Vec<u32>,
    pot_max: Vec<i64>,
    cin: Vec<i64>,
    pmax: Vec<Vec<usize>>,
    t_layer: Vec<usize>,
    external: Option<ExternalPlace>,
}

impl Pi3Structure {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_open(&self) -> bool {
        self.mode == Mode::Open
    }

    /// Number of layers `N`.
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn place_count(&self) -> usize {
        self.layer_of.len()
    }

    /// Places of layer `i` (1-based), in file order.
    pub fn layer(&self, i: usize) -> &[usize] {
        &self.layers[i - 1]
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    /// Layer (1-based) of place `p`.
    pub fn layer_of(&self, p: usize) -> usize {
        self.layer_of[p] + 1
    }

    /// The bag `b_p` associated with `p`.
    pub fn bag_of(&self, p: usize) -> &[u32] {
        &self.bag[p]
    }

    pub fn pot(&self, p: usize) -> u32 {
        self.pot[p]
    }

    /// `POT_i`: largest potential of layer `i`, or `pot(p_ext)` for the top
    /// layer of an open net.
    pub fn pot_cap(&self, i: usize) -> i64 {
        self.pot_max[i - 1]
    }

    pub fn cin(&self, p: usize) -> i64 {
        self.cin[p]
    }

    /// `P_i^max`, in file order.
    pub fn pmax(&self, i: usize) -> &[usize] {
        &self.pmax[i - 1]
    }

    /// `P_i^¬max`, in file order.
    pub fn pnegmax(&self, i: usize) -> Vec<usize> {
        self.layer(i).iter().copied().filter(|p| !self.pmax(i).contains(p)).collect()
    }

    /// Layer of the input bag of transition `t`.
    pub fn t_layer(&self, t: usize) -> usize {
        self.t_layer[t] + 1
    }

    pub fn external(&self) -> Option<&ExternalPlace> {
        self.external.as_ref()
    }

    /// Largest potential over all places (and `p_ext`).
    pub fn max_pot(&self) -> u32 {
        let own = self.pot.iter().copied().max().unwrap_or(0);
        own.max(self.external.as_ref().map_or(0, |e| e.pot))
    }

    /// Human-readable summary of layers and potentials.
    pub fn describe(&self, net: &PetriNet) -> String {
        let mut out = String::new();
        for i in 1..=self.n_layers() {
            let items: Vec<String> = self
                .layer(i)
                .iter()
                .map(|&p| format!("{}:pot={},cin={}", net.places()[p], self.pot(p), self.cin(p)))
                .collect();
            out.push_str(&format!("layer {i} (POT={}): {}\n", self.pot_cap(i), items.join(" ")));
        }
        if let Some(e) = &self.external {
            out.push_str(&format!("external {} pot={}\n", e.name, e.pot));
        }
        out
    }
}

fn bag_name(net: &PetriNet, v: &[u32]) -> String {
    format_vector(net.places(), v)
}

/// Validates a candidate layer partition (layer 1 first) of a closed net and
/// builds the structure tables.
fn build_structure(net: &PetriNet, graph: &BagGraph, layers: Vec<Vec<usize>>) -> Result<Pi3Structure, StructureError> {
    let n = net.place_count();
    let mut layer_of = vec![usize::MAX; n];
    for (i, layer) in layers.iter().enumerate() {
        if layer.is_empty() {
            return Err(StructureError::Declared(format!("layer {} is empty", i + 1)));
        }
        for &p in layer {
            if layer_of[p] != usize::MAX {
                return Err(StructureError::Declared(format!("place `{}` is in two layers", net.places()[p])));
            }
            layer_of[p] = i;
        }
    }
    if let Some(p) = layer_of.iter().position(|&l| l == usize::MAX) {
        return Err(StructureError::Declared(format!("place `{}` is in no layer", net.places()[p])));
    }

    // Own place of every bag: the unique support place in its highest layer.
    let mut owner: Vec<usize> = Vec::with_capacity(graph.bags.len());
    let mut bag_of_place: Vec<Option<usize>> = vec![None; n];
    for (k, b) in graph.bags.iter().enumerate() {
        let support: Vec<usize> = (0..n).filter(|&p| b[p] > 0).collect();
        let Some(top) = support.iter().map(|&p| layer_of[p]).max() else {
            return Err(StructureError::NoBijection("empty bag".into()));
        };
        let own: Vec<usize> = support.iter().copied().filter(|&p| layer_of[p] == top).collect();
        if own.len() != 1 || b[own[0]] != 1 {
            return Err(StructureError::NoBijection(format!(
                "bag `{}` does not contain exactly one token of its own layer",
                bag_name(net, b)
            )));
        }
        let p = own[0];
        if let Some(other) = bag_of_place[p] {
            return Err(StructureError::NoBijection(format!(
                "place `{}` owns both `{}` and `{}`",
                net.places()[p],
                bag_name(net, &graph.bags[other]),
                bag_name(net, b)
            )));
        }
        bag_of_place[p] = Some(k);
        owner.push(p);
    }
    if let Some(p) = bag_of_place.iter().position(Option::is_none) {
        return Err(StructureError::NoBijection(format!("place `{}` has no bag", net.places()[p])));
    }

    // Layers coincide with bag-graph components.
    let mut comp_layer: Vec<Option<usize>> = vec![None; graph.components.len()];
    for (k, &p) in owner.iter().enumerate() {
        let c = graph.component_of[k];
        match comp_layer[c] {
            None => comp_layer[c] = Some(layer_of[p]),
            Some(l) if l == layer_of[p] => {}
            Some(_) => return Err(StructureError::LayerOrder("a bag-graph component spans two layers".into())),
        }
    }
    for i in 0..layers.len() {
        let count = comp_layer.iter().filter(|&&l| l == Some(i)).count();
        if count != 1 {
            return Err(StructureError::LayerOrder(format!("layer {} has {count} bag-graph components", i + 1)));
        }
    }
    for (c, &sc) in graph.strongly_connected.iter().enumerate() {
        if !sc {
            return Err(StructureError::NotStronglyConnected(bag_name(net, &graph.bags[graph.components[c][0]])));
        }
    }

    let bag: Vec<Vec<u32>> = (0..n).map(|p| graph.bags[bag_of_place[p].unwrap()].clone()).collect();
    let pot: Vec<u32> = bag.iter().map(|b| b.iter().sum::<u32>() - 1).collect();
    let pot_max: Vec<i64> = layers.iter().map(|l| l.iter().map(|&p| pot[p] as i64).max().unwrap()).collect();
    let pmax: Vec<Vec<usize>> =
        layers.iter().enumerate().map(|(i, l)| l.iter().copied().filter(|&p| pot[p] as i64 == pot_max[i]).collect()).collect();
    for p in 0..n {
        let i = layer_of[p];
        for q in 0..n {
            if q != p && bag[p][q] > 0 && !(i > 0 && pmax[i - 1].contains(&q)) {
                return Err(StructureError::BadResource { bag: bag_name(net, &bag[p]), place: net.places()[q].clone() });
            }
        }
    }
    let cin = (0..n).map(|p| pot_max[layer_of[p]] - pot[p] as i64).collect();
    let t_layer = graph.edges.iter().map(|&(s, _)| layer_of[owner[s]]).collect();
    Ok(Pi3Structure { mode: Mode::Closed, layers, layer_of, bag, pot, pot_max, cin, pmax, t_layer, external: None })
}

/// Infers (or, if `declared` is given, validates) the layered structure of a
/// closed net. `declared` lists the places of each layer, layer 1 first.
pub fn infer_pi3(net: &PetriNet, declared: Option<Vec<Vec<usize>>>) -> Result<Pi3Structure, StructureError> {
    if net.transition_count() == 0 {
        return Err(StructureError::NoTransitions);
    }
    let graph = build_bag_graph(net);
    for (c, &sc) in graph.strongly_connected.iter().enumerate() {
        if !sc {
            return Err(StructureError::NotStronglyConnected(bag_name(net, &graph.bags[graph.components[c][0]])));
        }
    }
    if let Some(layers) = declared {
        return build_structure(net, &graph, layers);
    }

    // Places touched by each component.
    let k = graph.components.len();
    let n = net.place_count();
    let support: Vec<Vec<bool>> = graph
        .components
        .iter()
        .map(|c| (0..n).map(|p| c.iter().any(|&b| graph.bags[b][p] > 0)).collect())
        .collect();
    let mut adj = vec![Vec::new(); k];
    for a in 0..k {
        for b in a + 1..k {
            if (0..n).any(|p| support[a][p] && support[b][p]) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }
    // The resource-dependence relation must be a path.
    let order: Vec<usize> = if k == 1 {
        vec![0]
    } else {
        let ends: Vec<usize> = (0..k).filter(|&c| adj[c].len() == 1).collect();
        if ends.len() != 2 || adj.iter().any(|a| a.len() > 2 || a.is_empty()) {
            return Err(StructureError::LayerOrder("components sharing places do not form a chain".into()));
        }
        let mut order = vec![ends[0]];
        let mut prev = usize::MAX;
        let mut cur = ends[0];
        while let Some(&next) = adj[cur].iter().find(|&&x| x != prev) {
            order.push(next);
            prev = cur;
            cur = next;
        }
        if order.len() != k {
            return Err(StructureError::LayerOrder("components sharing places do not form a chain".into()));
        }
        order
    };
    let layers_for = |order: &[usize]| -> Vec<Vec<usize>> {
        let mut layers: Vec<Vec<usize>> = Vec::new();
        let mut prev = vec![false; n];
        for &c in order {
            let own: Vec<usize> = (0..n).filter(|&p| support[c][p] && !prev[p]).collect();
            prev = vec![false; n];
            for &p in &own {
                prev[p] = true;
            }
            layers.push(own);
        }
        layers
    };
    let forward = build_structure(net, &graph, layers_for(&order));
    if k == 1 {
        return forward;
    }
    let reversed: Vec<usize> = order.iter().rev().copied().collect();
    let backward = build_structure(net, &graph, layers_for(&reversed));
    match (forward, backward) {
        (Ok(s), Err(_)) | (Err(_), Ok(s)) => Ok(s),
        (Ok(_), Ok(_)) => Err(StructureError::LayerOrder("layer order is ambiguous".into())),
        (Err(e), Err(_)) => Err(e),
    }
}

/// Deletes `p_ext` (a top-layer place of the closed net) and returns the open
/// net with its structure: `POT_N = pot(p_ext)` and `cin` on the top layer is
/// recomputed against it (and may be negative).
pub fn derive_open(net: &PetriNet, s: &Pi3Structure, p_ext: usize) -> Result<(PetriNet, Pi3Structure), StructureError> {
    let n_layers = s.n_layers();
    if s.is_open() || s.layer_of(p_ext) != n_layers {
        return Err(StructureError::ExternalNotTop(net.places()[p_ext].clone()));
    }
    let open_net = net.without_place(p_ext);
    let remap = |p: usize| if p > p_ext { p - 1 } else { p };
    let drop = |v: &[u32]| -> Vec<u32> { v.iter().enumerate().filter(|&(i, _)| i != p_ext).map(|(_, &x)| x).collect() };

    let layers: Vec<Vec<usize>> =
        s.layers.iter().map(|l| l.iter().copied().filter(|&p| p != p_ext).map(remap).collect()).collect();
    let keep: Vec<usize> = (0..net.place_count()).filter(|&p| p != p_ext).collect();
    let layer_of: Vec<usize> = keep.iter().map(|&p| s.layer_of[p]).collect();
    let bag: Vec<Vec<u32>> = keep.iter().map(|&p| drop(&s.bag[p])).collect();
    let pot: Vec<u32> = keep.iter().map(|&p| s.pot[p]).collect();
    let ext_pot = s.pot[p_ext];
    let mut pot_max = s.pot_max.clone();
    pot_max[n_layers - 1] = ext_pot as i64;
    let mut pmax = s.pmax.clone();
    let top = &layers[n_layers - 1];
    pmax[n_layers - 1] = match top.iter().map(|&p| pot[p]).max() {
        Some(m) => top.iter().copied().filter(|&p| pot[p] == m).collect(),
        None => Vec::new(),
    };
    for l in pmax.iter_mut().take(n_layers - 1) {
        *l = l.iter().copied().map(remap).collect();
    }
    let cin: Vec<i64> = (0..keep.len()).map(|p| pot_max[layer_of[p]] - pot[p] as i64).collect();
    let external = ExternalPlace {
        name: net.places()[p_ext].clone(),
        closed_index: p_ext,
        pot: ext_pot,
        resources: drop(&s.bag[p_ext]),
    };
    let structure = Pi3Structure {
        mode: Mode::Open,
        layers,
        layer_of,
        bag,
        pot,
        pot_max,
        cin,
        pmax,
        t_layer: s.t_layer.clone(),
        external: Some(external),
    };
    Ok((open_net, structure))
}

/// Per-place witnesses by backward induction over the layers: `p` on the top
/// layer, and `p − Σ_{β on layer i+1} β(p)·wit_β` below. In open mode the
/// virtual place's bag gets `−Σ P_N`, so no witness depends on it.
fn place_witnesses(s: &Pi3Structure) -> (Vec<Vec<Q>>, Option<Vec<Q>>) {
    let n = s.place_count();
    let nl = s.n_layers();
    let unit = |p: usize| -> Vec<Q> { (0..n).map(|q| if q == p { Q::one() } else { Q::zero() }).collect() };
    let mut wit: Vec<Vec<Q>> = vec![Vec::new(); n];
    for &p in s.layer(nl) {
        wit[p] = unit(p);
    }
    let ext_wit = s.external().map(|_| {
        let mut v = vec![Q::zero(); n];
        for &q in s.layer(nl) {
            v[q] = -Q::one();
        }
        v
    });
    for i in (1..nl).rev() {
        for &p in s.layer(i) {
            let mut w = unit(p);
            let mut sub = |coef: u32, other: &[Q]| {
                if coef > 0 {
                    for (x, y) in w.iter_mut().zip(other) {
                        *x -= y * qi(coef as i64);
                    }
                }
            };
            for &beta in s.layer(i + 1) {
                sub(s.bag_of(beta)[p], &wit[beta].clone());
            }
            if i == nl - 1 {
                if let (Some(e), Some(ew)) = (s.external(), &ext_wit) {
                    sub(e.resources[p], ew);
                }
            }
            wit[p] = w;
        }
    }
    (wit, ext_wit)
}

/// Witnesses for every bag of `net`'s bag graph, built constructively from
/// the layer structure (no linear solve). `net` must be the net `s` describes.
pub fn compute_witnesses_pi3(net: &PetriNet, s: &Pi3Structure) -> Result<(BagGraph, WitnessTable), StructureError> {
    let graph = build_bag_graph(net);
    let (per_place, ext_wit) = place_witnesses(s);
    let n = s.place_count();
    let mut wit: Vec<Option<Vec<Q>>> = vec![None; graph.bags.len()];
    let mut add = |k: usize, w: &[Q]| match &mut wit[k] {
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(w) {
                *a += b;
            }
        }
        None => wit[k] = Some(w.to_vec()),
    };
    for p in 0..n {
        let k = graph
            .bag_index(s.bag_of(p))
            .ok_or_else(|| StructureError::NoBijection(format!("bag of `{}` is not a bag of the net", net.places()[p])))?;
        add(k, &per_place[p]);
    }
    if let (Some(e), Some(ew)) = (s.external(), ext_wit) {
        let k = graph
            .bag_index(&e.resources)
            .ok_or_else(|| StructureError::NoBijection("bag of the external place is not a bag of the net".into()))?;
        add(k, &ew);
    }
    let wit = wit
        .into_iter()
        .enumerate()
        .map(|(k, w)| w.ok_or_else(|| StructureError::NoBijection(format!("bag `{}` has no place", bag_name(net, &graph.bags[k])))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((graph, WitnessTable { wit }))
}
