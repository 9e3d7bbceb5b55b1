//! The k-partite sum hypergraph on `A_{≤n}` and complete k-partite
//! (`K_{t:k}`) extraction.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::setcore::GroundSet;
use crate::sumset::{popular, rep_counts};

/// Largest dense product of part sizes the extractor will materialize.
pub const MAX_DENSE_EDGES: u128 = 1 << 28;
pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// `k`-partite `k`-graph over `A_{≤n}` whose edges are the tuples summing into
/// `k·A_{≤n} \ D^k_K(A_{≤k·n})`. Edges are implicit: a tuple is an edge iff
/// each coordinate is a vertex and the sum lies in `allowed`.
#[derive(Clone, Debug)]
pub struct SumHypergraph {
    pub k: usize,
    pub n: u64,
    pub threshold: u64,
    pub vertices: GroundSet,
    pub allowed: GroundSet,
    pub popular_count: usize,
    pub edge_count: u64,
}

impl SumHypergraph {
    pub fn is_edge(&self, tuple: &[u64]) -> bool {
        tuple.len() == self.k
            && tuple.iter().all(|&a| self.vertices.contains(a))
            && self.allowed.contains(tuple.iter().sum())
    }

    /// Dense edge table indexed by vertex positions in `vertices`.
    pub fn materialize(&self) -> Result<DenseHypergraph> {
        let v = self.vertices.len();
        let sizes = vec![v; self.k];
        check_dense(&sizes)?;
        let els = self.vertices.elements();
        let rest = sizes[1..].iter().product::<usize>();
        let links: Vec<Bitset> = (0..v)
            .into_par_iter()
            .map(|i0| {
                let mut b = Bitset::new(rest);
                let mut idx = vec![0usize; self.k - 1];
                for flat in 0..rest {
                    let sum = els[i0] + idx.iter().map(|&i| els[i]).sum::<u64>();
                    if self.allowed.contains(sum) {
                        b.insert(flat);
                    }
                    for slot in idx.iter_mut().rev() {
                        *slot += 1;
                        if *slot < v {
                            break;
                        }
                        *slot = 0;
                    }
                }
                b
            })
            .collect();
        Ok(DenseHypergraph { sizes, links })
    }
}

fn check_dense(sizes: &[usize]) -> Result<()> {
    let total = sizes.iter().try_fold(1u128, |acc, &s| acc.checked_mul(s as u128));
    match total {
        Some(t) if t <= MAX_DENSE_EDGES => Ok(()),
        _ => Err(Error::CapacityOverflow(format!(
            "dense hypergraph on parts {sizes:?} exceeds 2^28 cells"
        ))),
    }
}

/// `k·A_{≤n} \ D^k_K(A_{≤k·n})` and the hypergraph over it.
pub fn build_sum_hypergraph(a: &GroundSet, n: u64, k: usize, threshold: u64) -> Result<SumHypergraph> {
    if k < 1 {
        return Err(Error::pre("k must be at least 1"));
    }
    let kn = n
        .checked_mul(k as u64)
        .ok_or(Error::WindowTooLarge(u64::MAX))?;
    if kn > a.window() {
        return Err(Error::WindowExceeded {
            requested: kn,
            window: a.window(),
        });
    }
    let small = a.truncate(n)?;
    let big = a.truncate(kn)?;
    let popular_set = popular(&rep_counts(&vec![big; k])?, threshold)?;
    let small_profile = rep_counts(&vec![small.clone(); k])?;
    let mut allowed = Vec::new();
    let mut edge_count = 0u64;
    for &(x, c) in &small_profile.counts {
        if !popular_set.contains(x) {
            allowed.push(x);
            edge_count += c;
        }
    }
    Ok(SumHypergraph {
        k,
        n,
        threshold,
        vertices: small,
        allowed: GroundSet::new(allowed, small_profile.window)?,
        popular_count: popular_set.len(),
        edge_count,
    })
}

/// `|D^k_K(A_{≤k·n})| · K ≤ |A_{≤k·n}|^k`, checked exactly.
pub fn markov_bound_holds(a: &GroundSet, n: u64, k: usize, threshold: u64) -> Result<bool> {
    let kn = n.saturating_mul(k as u64);
    let big = a.truncate(kn)?;
    let d = popular(&rep_counts(&vec![big.clone(); k])?, threshold)?;
    Ok(d.len() as u128 * threshold as u128 <= (big.len() as u128).pow(k as u32))
}

/// Dense k-partite k-graph. `links[i]` is the set of `(k−1)`-tuples over parts
/// `1..k` (row-major, last part fastest) that complete vertex `i` of part 0.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseHypergraph {
    sizes: Vec<usize>,
    links: Vec<Bitset>,
}

impl DenseHypergraph {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::pre("a k-partite graph needs k ≥ 2 parts"));
        }
        check_dense(&sizes)?;
        let rest = sizes[1..].iter().product();
        Ok(DenseHypergraph {
            links: (0..sizes[0]).map(|_| Bitset::new(rest)).collect(),
            sizes,
        })
    }

    pub fn from_edges(sizes: Vec<usize>, edges: &[Vec<usize>]) -> Result<Self> {
        let mut h = Self::new(sizes)?;
        for e in edges {
            h.add_edge(e)?;
        }
        Ok(h)
    }

    fn flat(&self, tail: &[usize]) -> usize {
        tail.iter()
            .zip(&self.sizes[1..])
            .fold(0, |acc, (&i, &s)| acc * s + i)
    }

    fn check_tuple(&self, e: &[usize]) -> Result<()> {
        if e.len() != self.sizes.len() || e.iter().zip(&self.sizes).any(|(&i, &s)| i >= s) {
            return Err(Error::pre(format!("edge {e:?} does not fit parts {:?}", self.sizes)));
        }
        Ok(())
    }

    pub fn add_edge(&mut self, e: &[usize]) -> Result<()> {
        self.check_tuple(e)?;
        let f = self.flat(&e[1..]);
        self.links[e[0]].insert(f);
        Ok(())
    }

    pub fn has_edge(&self, e: &[usize]) -> bool {
        self.check_tuple(e).is_ok() && self.links[e[0]].contains(self.flat(&e[1..]))
    }

    pub fn part_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn edge_count(&self) -> u64 {
        self.links.iter().map(|b| b.count_ones() as u64).sum()
    }

    /// The `(k−1)`-partite graph whose edges are given by `link`.
    fn sub_from_link(sizes: &[usize], link: &Bitset) -> DenseHypergraph {
        let rest: usize = sizes[1..].iter().product();
        DenseHypergraph {
            sizes: sizes.to_vec(),
            links: (0..sizes[0]).map(|i| link.slice(i * rest, rest)).collect(),
        }
    }
}

/// Outcome of a complete k-partite search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Extraction {
    /// One index set of size `t` per part.
    Found(Vec<Vec<usize>>),
    Absent,
    /// The node budget ran out before the search settled.
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtractionResult {
    pub outcome: Extraction,
    pub nodes: u64,
}

/// Searches for `K_{t:k}`: depth-first over `t`-subsets of part 0 with the
/// running intersection of their links, pruning when it holds fewer than
/// `t^{k−1}` tuples, then recursing into the links for the remaining parts.
pub fn find_complete_kpartite(h: &DenseHypergraph, t: usize, budget: u64) -> Result<ExtractionResult> {
    if t == 0 {
        return Err(Error::pre("t must be at least 1"));
    }
    let mut nodes = 0u64;
    let outcome = match search(h, t, budget, &mut nodes) {
        Some(Some(b)) => Extraction::Found(b),
        Some(None) => Extraction::Absent,
        None => Extraction::Indeterminate,
    };
    Ok(ExtractionResult { outcome, nodes })
}

/// `None` on budget exhaustion, `Some(None)` when settled absent.
fn search(h: &DenseHypergraph, t: usize, budget: u64, nodes: &mut u64) -> Option<Option<Vec<Vec<usize>>>> {
    let k = h.sizes.len();
    let need = t.checked_pow(k as u32 - 1).unwrap_or(usize::MAX);
    if h.sizes.iter().any(|&s| s < t) {
        return Some(None);
    }
    let candidates: Vec<usize> = (0..h.sizes[0])
        .filter(|&i| h.links[i].count_ones() >= need)
        .collect();
    if candidates.len() < t {
        return Some(None);
    }
    let mut chosen = Vec::with_capacity(t);
    let full = {
        let mut b = Bitset::new(h.links.first().map_or(0, Bitset::len));
        for i in 0..b.len() {
            b.insert(i);
        }
        b
    };
    extend(h, t, need, &candidates, 0, &full, &mut chosen, budget, nodes)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    h: &DenseHypergraph,
    t: usize,
    need: usize,
    candidates: &[usize],
    from: usize,
    common: &Bitset,
    chosen: &mut Vec<usize>,
    budget: u64,
    nodes: &mut u64,
) -> Option<Option<Vec<Vec<usize>>>> {
    if chosen.len() == t {
        let rest = &h.sizes[1..];
        if rest.len() == 1 {
            let b: Vec<usize> = common.iter_ones().take(t).collect();
            return Some(Some(vec![chosen.clone(), b]));
        }
        let sub = DenseHypergraph::sub_from_link(rest, common);
        return match search(&sub, t, budget, nodes)? {
            Some(mut blocks) => {
                blocks.insert(0, chosen.clone());
                Some(Some(blocks))
            }
            None => Some(None),
        };
    }
    let remaining = t - chosen.len();
    for ci in from..candidates.len() {
        if candidates.len() - ci < remaining {
            break;
        }
        *nodes += 1;
        if *nodes > budget {
            return None;
        }
        let v = candidates[ci];
        let mut next = common.clone();
        next.and_assign(&h.links[v]);
        if next.count_ones() < need {
            continue;
        }
        chosen.push(v);
        let r = extend(h, t, need, candidates, ci + 1, &next, chosen, budget, nodes)?;
        chosen.pop();
        if r.is_some() {
            return Some(r);
        }
    }
    Some(None)
}

/// `⌈C·n^{k − 1/t^{k−1}}⌉`. Exact for integer `C`.
pub fn kst_edge_threshold(t: u32, k: u32, n: u64, c: f64) -> Result<u128> {
    if t < 2 || k < 2 {
        return Err(Error::pre("t and k must both be at least 2"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::pre("C must be positive"));
    }
    let big_t = t
        .checked_pow(k - 1)
        .ok_or_else(|| Error::CapacityOverflow("t^(k−1) overflows".into()))?;
    if c.fract() == 0.0 && c < u64::MAX as f64 {
        // ⌈(C^T · n^{kT−1})^{1/T}⌉
        let x = BigUint::from(c as u64).pow(big_t) * BigUint::from(n).pow(k * big_t - 1);
        let r = x.nth_root(big_t);
        let r = if r.pow(big_t) == x { r } else { r + 1u32 };
        return u128::try_from(r).map_err(|_| Error::CapacityOverflow("threshold exceeds 2^128".into()));
    }
    let e = k as f64 - 1.0 / big_t as f64;
    let v = (c * (n as f64).powf(e)).ceil();
    if v >= u128::MAX as f64 {
        return Err(Error::CapacityOverflow("threshold exceeds 2^128".into()));
    }
    Ok(v as u128)
}

/// Blocks `B_1, …, B_k ⊆ A_{≤n}` with `B_1 + ⋯ + B_k` free of `K`-popular sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlocksCertificate {
    pub n: u64,
    pub k: usize,
    #[serde(rename = "K")]
    pub popularity: u64,
    pub t: usize,
    #[serde(rename = "B")]
    pub blocks: Vec<Vec<u64>>,
    #[serde(rename = "edgeCount")]
    pub edge_count: u64,
    pub threshold: u128,
    #[serde(rename = "budgetUsed")]
    pub budget_used: u64,
}

/// Re-checks a blocks certificate against `A` from scratch.
pub fn certify_blocks(a: &GroundSet, cert: &BlocksCertificate) -> Result<std::result::Result<(), String>> {
    let k = cert.k;
    if cert.blocks.len() != k {
        return Ok(Err(format!("expected {k} blocks, found {}", cert.blocks.len())));
    }
    for (i, b) in cert.blocks.iter().enumerate() {
        let mut sorted = b.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != cert.t || b.len() != cert.t {
            return Ok(Err(format!("block {i} does not have {} distinct elements", cert.t)));
        }
        if let Some(&x) = b.iter().find(|&&x| x > cert.n || !a.contains(x)) {
            return Ok(Err(format!("block {i} element {x} is not in A ∩ [0, {}]", cert.n)));
        }
    }
    if cert.popularity == 0 {
        return Ok(Err("K must be positive".into()));
    }
    let kn = cert.n.saturating_mul(k as u64);
    let big = a.truncate(kn)?;
    let profile = rep_counts(&vec![big; k])?;
    let mut idx = vec![0usize; k];
    loop {
        let sum: u64 = idx.iter().zip(&cert.blocks).map(|(&i, b)| b[i]).sum();
        let r = profile.get(sum);
        if r >= cert.popularity {
            return Ok(Err(format!("sum {sum} has {r} ≥ K representations")));
        }
        let mut done = true;
        for (slot, _) in idx.iter_mut().zip(&cert.blocks).rev() {
            *slot += 1;
            if *slot < cert.t {
                done = false;
                break;
            }
            *slot = 0;
        }
        if done {
            break;
        }
    }
    Ok(Ok(()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridOutcome {
    Found,
    BelowThreshold,
    Absent,
    Indeterminate,
    Capacity,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDiagnostic {
    pub n: u64,
    pub vertices: usize,
    #[serde(rename = "edgeCount")]
    pub edge_count: u64,
    pub threshold: u128,
    pub outcome: GridOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlocksSearch {
    pub found: Option<BlocksCertificate>,
    pub diagnostics: Vec<GridDiagnostic>,
}

impl BlocksSearch {
    /// True when some grid point ran out of budget and none succeeded.
    pub fn indeterminate(&self) -> bool {
        self.found.is_none()
            && self.diagnostics.iter().any(|d| d.outcome == GridOutcome::Indeterminate)
    }
}

/// Parameters for [`unpopular_blocks`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlocksParams {
    pub k: usize,
    #[serde(rename = "K")]
    pub popularity: u64,
    pub t: usize,
    /// The KST constant `C(t, k)`.
    pub c: f64,
    pub budget: u64,
}

/// Scans the grid for the first `n` whose sum hypergraph has more than the KST
/// threshold of edges and yields a `K_{t:k}`.
pub fn unpopular_blocks(a: &GroundSet, params: &BlocksParams, grid: &[u64]) -> Result<BlocksSearch> {
    let &BlocksParams { k, popularity, t, c, budget } = params;
    if k < 2 || t < 1 {
        return Err(Error::pre("need k ≥ 2 and t ≥ 1"));
    }
    let top = grid.iter().copied().max().ok_or_else(|| Error::pre("grid is empty"))?;
    let need = top.saturating_mul(k as u64);
    if need > a.window() {
        return Err(Error::WindowExceeded {
            requested: need,
            window: a.window(),
        });
    }
    let mut diagnostics = Vec::new();
    for &n in grid {
        let v = a.count_le(n);
        let mut diag = GridDiagnostic {
            n,
            vertices: v,
            edge_count: 0,
            threshold: 0,
            outcome: GridOutcome::BelowThreshold,
        };
        let h = match build_sum_hypergraph(a, n, k, popularity) {
            Ok(h) => h,
            Err(Error::CapacityOverflow(_)) => {
                diag.outcome = GridOutcome::Capacity;
                diagnostics.push(diag);
                continue;
            }
            Err(e) => return Err(e),
        };
        diag.edge_count = h.edge_count;
        diag.threshold = if t == 1 {
            0
        } else {
            kst_edge_threshold(t as u32, k as u32, v as u64, c)?
        };
        if (h.edge_count as u128) <= diag.threshold {
            diagnostics.push(diag);
            continue;
        }
        let dense = match h.materialize() {
            Ok(d) => d,
            Err(Error::CapacityOverflow(_)) => {
                diag.outcome = GridOutcome::Capacity;
                diagnostics.push(diag);
                continue;
            }
            Err(e) => return Err(e),
        };
        let res = find_complete_kpartite(&dense, t, budget)?;
        match res.outcome {
            Extraction::Found(idx) => {
                diag.outcome = GridOutcome::Found;
                let threshold = diag.threshold;
                diagnostics.push(diag);
                let els = h.vertices.elements();
                let blocks = idx
                    .into_iter()
                    .map(|b| b.into_iter().map(|i| els[i]).collect())
                    .collect();
                return Ok(BlocksSearch {
                    found: Some(BlocksCertificate {
                        n,
                        k,
                        popularity,
                        t,
                        blocks,
                        edge_count: h.edge_count,
                        threshold,
                        budget_used: res.nodes,
                    }),
                    diagnostics,
                });
            }
            Extraction::Absent => diag.outcome = GridOutcome::Absent,
            Extraction::Indeterminate => diag.outcome = GridOutcome::Indeterminate,
        }
        diagnostics.push(diag);
    }
    Ok(BlocksSearch {
        found: None,
        diagnostics,
    })
}
