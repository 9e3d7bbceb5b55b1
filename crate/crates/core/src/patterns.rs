//! Finite ict / inp / bounded-error pattern verification and the two pattern
//! constructions (isolated clusters against a finite formula set, and
//! unpopular blocks against `(k−1)·A`).
//!
//! Every quantifier over "some element" ranges over `[0, domainCap]`.
//! Membership of a point outside a referenced set's window is false.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::BlocksCertificate;
use crate::setcore::GroundSet;
use crate::sumset::{kfold, rep_counts};

/// Largest number of `η` maps a verifier will enumerate.
pub const MAX_PATHS: u64 = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredicateKind {
    /// `x ∈ S + t`, params `[t]`.
    TranslateMember,
    /// `y − x ∈ S`, params `[y]`.
    DifferenceMember,
    /// `x ≡ r (mod q)`, params `[q, r]`.
    Congruence,
    /// `x − a ∈ S`, params `[a]`.
    ShiftedFormula,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub kind: PredicateKind,
    pub params: Vec<i64>,
    #[serde(rename = "setRef", default, skip_serializing_if = "Option::is_none")]
    pub set_ref: Option<String>,
}

impl Predicate {
    pub fn translate(set: &str, t: i64) -> Self {
        Predicate {
            kind: PredicateKind::TranslateMember,
            params: vec![t],
            set_ref: Some(set.into()),
        }
    }

    pub fn difference(set: &str, y: i64) -> Self {
        Predicate {
            kind: PredicateKind::DifferenceMember,
            params: vec![y],
            set_ref: Some(set.into()),
        }
    }

    pub fn congruence(q: u64, r: u64) -> Self {
        Predicate {
            kind: PredicateKind::Congruence,
            params: vec![q as i64, r as i64],
            set_ref: None,
        }
    }

    pub fn shifted(set: &str, a: i64) -> Self {
        Predicate {
            kind: PredicateKind::ShiftedFormula,
            params: vec![a],
            set_ref: Some(set.into()),
        }
    }

    fn validate(&self, sets: &BTreeMap<String, GroundSet>) -> std::result::Result<(), String> {
        let want = match self.kind {
            PredicateKind::Congruence => 2,
            _ => 1,
        };
        if self.params.len() != want {
            return Err(format!("{:?} takes {want} parameter(s)", self.kind));
        }
        match (self.kind, &self.set_ref) {
            (PredicateKind::Congruence, _) => {
                if self.params[0] <= 0 {
                    return Err("congruence modulus must be positive".into());
                }
            }
            (_, None) => return Err(format!("{:?} needs a setRef", self.kind)),
            (_, Some(name)) if !sets.contains_key(name) => {
                return Err(format!("unknown set `{name}`"));
            }
            _ => {}
        }
        Ok(())
    }

    /// Largest absolute translate this predicate applies.
    fn reach(&self) -> u64 {
        match self.kind {
            PredicateKind::Congruence => 0,
            _ => self.params[0].unsigned_abs(),
        }
    }
}

/// A `κ × L` array of predicates over named sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinitePattern {
    pub depth: usize,
    pub length: usize,
    pub sets: BTreeMap<String, GroundSet>,
    pub rows: Vec<Vec<Predicate>>,
}

impl FinitePattern {
    pub fn new(sets: BTreeMap<String, GroundSet>, rows: Vec<Vec<Predicate>>) -> Result<Self> {
        let p = FinitePattern {
            depth: rows.len(),
            length: rows.first().map_or(0, Vec::len),
            sets,
            rows,
        };
        p.validate().map_err(Error::Certificate)?;
        Ok(p)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.depth == 0 || self.length == 0 {
            return Err("pattern must have at least one row and one column".into());
        }
        if self.rows.len() != self.depth {
            return Err(format!("depth {} but {} rows", self.depth, self.rows.len()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.length {
                return Err(format!("row {i} has {} entries, expected {}", row.len(), self.length));
            }
            for p in row {
                p.validate(&self.sets).map_err(|e| format!("row {i}: {e}"))?;
            }
        }
        Ok(())
    }

    /// Largest window among referenced sets plus the largest translate; for
    /// congruence-only rows, one period of the moduli.
    pub fn default_domain_cap(&self) -> u64 {
        let w = self.sets.values().map(GroundSet::window).max().unwrap_or(0);
        let t = self.rows.iter().flatten().map(Predicate::reach).max().unwrap_or(0);
        let congruence = self
            .rows
            .iter()
            .flatten()
            .filter(|p| p.kind == PredicateKind::Congruence)
            .map(|p| p.params[0] as u64)
            .fold(1u64, |acc, q| (acc / num_integer::gcd(acc, q)).saturating_mul(q));
        w.saturating_add(t).max(congruence.saturating_sub(1).min(1 << 32))
    }

    pub fn eval(&self, p: &Predicate, x: u64) -> bool {
        let x = x as i128;
        let member = |v: i128| {
            let s = &self.sets[p.set_ref.as_ref().expect("validated")];
            v >= 0 && v <= s.window() as i128 && s.contains(v as u64)
        };
        match p.kind {
            PredicateKind::TranslateMember | PredicateKind::ShiftedFormula => member(x - p.params[0] as i128),
            PredicateKind::DifferenceMember => member(p.params[0] as i128 - x),
            PredicateKind::Congruence => x.rem_euclid(p.params[0] as i128) == p.params[1] as i128,
        }
    }

    /// Column indices of row `alpha` that `x` satisfies.
    pub fn hits(&self, alpha: usize, x: u64) -> Vec<usize> {
        self.rows[alpha]
            .iter()
            .enumerate()
            .filter(|(_, p)| self.eval(p, x))
            .map(|(i, _)| i)
            .collect()
    }

    fn path_count(&self) -> Option<u64> {
        (self.length as u64).checked_pow(self.depth as u32)
    }

    fn path_index(&self, eta: &[usize]) -> usize {
        eta.iter().fold(0, |acc, &i| acc * self.length + i)
    }

    pub fn path_of(&self, mut idx: usize) -> Vec<usize> {
        let mut eta = vec![0; self.depth];
        for slot in eta.iter_mut().rev() {
            *slot = idx % self.length;
            idx /= self.length;
        }
        eta
    }
}

pub fn eta_key(eta: &[usize]) -> String {
    eta.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

pub fn parse_eta_key(key: &str) -> Option<Vec<usize>> {
    key.split(',').map(|s| s.trim().parse().ok()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternReport {
    pub holds: bool,
    /// η maps (or paths) examined.
    pub checked: u64,
    /// `η ↦ a_η`, smallest witness, for every covered η.
    pub witnesses: BTreeMap<String, u64>,
    #[serde(rename = "firstFailure", skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
    pub sampled: bool,
}

/// For each x, every η it witnesses given per-row allowed hit counts.
fn scan_witnesses(p: &FinitePattern, cap: u64, max_hits: &(dyn Fn(usize) -> usize + Sync)) -> Result<Vec<Option<u64>>> {
    let paths = p.path_count().filter(|&c| c <= MAX_PATHS).ok_or_else(|| {
        Error::CapacityOverflow(format!("{}^{} η maps exceed the enumeration limit", p.length, p.depth))
    })? as usize;
    let chunk = 4096u64;
    let chunks: Vec<u64> = (0..=cap / chunk).collect();
    let partial: Vec<Vec<Option<u64>>> = chunks
        .par_iter()
        .map(|&c| {
            let mut best = vec![None; paths];
            let lo = c * chunk;
            let hi = (lo + chunk - 1).min(cap);
            'x: for x in lo..=hi {
                let mut rows = Vec::with_capacity(p.depth);
                for alpha in 0..p.depth {
                    let h = p.hits(alpha, x);
                    if h.is_empty() || h.len() > max_hits(alpha) {
                        continue 'x;
                    }
                    rows.push(h);
                }
                for_each_product(&rows, &mut |eta| {
                    let i = p.path_index(eta);
                    if best[i].is_none() {
                        best[i] = Some(x);
                    }
                });
            }
            best
        })
        .collect();
    let mut best = vec![None; paths];
    for part in partial {
        for (b, q) in best.iter_mut().zip(part) {
            if b.is_none() {
                *b = q;
            }
        }
    }
    Ok(best)
}

fn for_each_product(rows: &[Vec<usize>], f: &mut dyn FnMut(&[usize])) {
    let mut idx = vec![0usize; rows.len()];
    let mut eta: Vec<usize> = rows.iter().map(|r| r[0]).collect();
    loop {
        f(&eta);
        let mut advanced = false;
        for a in (0..rows.len()).rev() {
            idx[a] += 1;
            if idx[a] < rows[a].len() {
                eta[a] = rows[a][idx[a]];
                advanced = true;
                break;
            }
            idx[a] = 0;
            eta[a] = rows[a][0];
        }
        if !advanced {
            return;
        }
    }
}

fn report_from(p: &FinitePattern, best: Vec<Option<u64>>) -> PatternReport {
    let mut witnesses = BTreeMap::new();
    let mut first_failure = None;
    for (i, w) in best.iter().enumerate() {
        let eta = p.path_of(i);
        match w {
            Some(x) => {
                witnesses.insert(eta_key(&eta), *x);
            }
            None if first_failure.is_none() => first_failure = Some(eta_key(&eta)),
            None => {}
        }
    }
    PatternReport {
        holds: first_failure.is_none(),
        checked: best.len() as u64,
        witnesses,
        first_failure,
        sampled: false,
    }
}

/// Every η has an `a_η ≤ cap` satisfying exactly cell `η(α)` of each row.
pub fn verify_ict(p: &FinitePattern, cap: u64) -> Result<PatternReport> {
    verify_bounded_error(p, 0, cap)
}

/// Every η has an `a_η ≤ cap` satisfying cell `η(α)` of each row with at most
/// `c` other cells of that row also satisfied.
pub fn verify_bounded_error(p: &FinitePattern, c: usize, cap: u64) -> Result<PatternReport> {
    p.validate().map_err(Error::Certificate)?;
    let best = scan_witnesses(p, cap, &|_| c + 1)?;
    Ok(report_from(p, best))
}

/// How paths are checked by [`verify_inp`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathCheck {
    All,
    Sample { count: usize, seed: u64 },
}

/// Rows `k_α`-inconsistent on `[0, cap]`, paths consistent.
pub fn verify_inp(p: &FinitePattern, row_bounds: &[usize], cap: u64, paths: PathCheck) -> Result<PatternReport> {
    p.validate().map_err(Error::Certificate)?;
    if row_bounds.len() != p.depth {
        return Err(Error::pre(format!(
            "{} row bounds for a depth-{} pattern",
            row_bounds.len(),
            p.depth
        )));
    }
    if row_bounds.iter().any(|&k| k < 1) {
        return Err(Error::pre("row bounds must be at least 1"));
    }
    // (a) No point satisfies k_α cells of row α.
    let violation = (0..=cap).into_par_iter().find_map_first(|x| {
        (0..p.depth).find_map(|alpha| {
            let h = p.hits(alpha, x);
            (h.len() >= row_bounds[alpha]).then_some((x, alpha, h))
        })
    });
    if let Some((x, alpha, h)) = violation {
        return Ok(PatternReport {
            holds: false,
            checked: 0,
            witnesses: BTreeMap::new(),
            first_failure: Some(format!("row {alpha}: {x} satisfies cells {h:?}")),
            sampled: false,
        });
    }
    // (b) Path consistency.
    match paths {
        PathCheck::All => {
            let best = scan_witnesses(p, cap, &|alpha| row_bounds[alpha])?;
            let mut r = report_from(p, best);
            if let Some(f) = r.first_failure.take() {
                r.first_failure = Some(format!("path {f} has no common solution"));
            }
            Ok(r)
        }
        PathCheck::Sample { count, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut witnesses = BTreeMap::new();
            for _ in 0..count {
                let eta: Vec<usize> = (0..p.depth).map(|_| rng.gen_range(0..p.length)).collect();
                let found = (0..=cap).into_par_iter().find_first(|&x| {
                    eta.iter().enumerate().all(|(alpha, &i)| p.eval(&p.rows[alpha][i], x))
                });
                match found {
                    Some(x) => {
                        witnesses.insert(eta_key(&eta), x);
                    }
                    None => {
                        return Ok(PatternReport {
                            holds: false,
                            checked: witnesses.len() as u64 + 1,
                            witnesses,
                            first_failure: Some(format!("path {} has no common solution", eta_key(&eta))),
                            sampled: true,
                        })
                    }
                }
            }
            Ok(PatternReport {
                holds: true,
                checked: count as u64,
                witnesses,
                first_failure: None,
                sampled: true,
            })
        }
    }
}

/// A pattern with its construction's witness map and measured row errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternCertificate {
    #[serde(flatten)]
    pub pattern: FinitePattern,
    #[serde(rename = "domainCap")]
    pub domain_cap: u64,
    pub witnesses: BTreeMap<String, u64>,
    /// Row index ↦ largest number of undesignated cells a witness satisfies.
    pub errors: BTreeMap<String, usize>,
}

impl PatternCertificate {
    /// Checks every recorded witness directly: each η present, designated
    /// cells satisfied, at most `c` other cells per row.
    pub fn check_witnesses(&self, c: usize) -> std::result::Result<(), String> {
        let p = &self.pattern;
        p.validate()?;
        let total = p.path_count().filter(|&n| n <= MAX_PATHS).ok_or("too many η maps")?;
        if self.witnesses.len() as u64 != total {
            return Err(format!("{} witnesses recorded, {total} η maps", self.witnesses.len()));
        }
        for (key, &x) in &self.witnesses {
            let eta = parse_eta_key(key).ok_or_else(|| format!("bad η key `{key}`"))?;
            if eta.len() != p.depth || eta.iter().any(|&i| i >= p.length) {
                return Err(format!("η key `{key}` out of range"));
            }
            if x > self.domain_cap {
                return Err(format!("witness {x} for η = {key} exceeds the domain cap"));
            }
            for (alpha, &i) in eta.iter().enumerate() {
                let h = p.hits(alpha, x);
                if !h.contains(&i) {
                    return Err(format!("witness {x} for η = {key} misses cell ({alpha}, {i})"));
                }
                if h.len() > c + 1 {
                    return Err(format!(
                        "witness {x} for η = {key} hits {} extra cells in row {alpha}",
                        h.len() - 1
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn max_error(&self) -> usize {
        self.errors.values().copied().max().unwrap_or(0)
    }
}

fn measure_errors(p: &FinitePattern, witnesses: &BTreeMap<String, u64>) -> BTreeMap<String, usize> {
    let mut errors: BTreeMap<String, usize> = (0..p.depth).map(|a| (a.to_string(), 0)).collect();
    for (key, &x) in witnesses {
        let eta = parse_eta_key(key).expect("generated key");
        for (alpha, &i) in eta.iter().enumerate() {
            let extra = p.hits(alpha, x).iter().filter(|&&j| j != i).count();
            let e = errors.get_mut(&alpha.to_string()).unwrap();
            *e = (*e).max(extra);
        }
    }
    errors
}

/// Maximal runs of consecutive integers, as `(first, last)`.
pub fn clusters(a: &GroundSet) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = Vec::new();
    for &x in a.elements() {
        match out.last_mut() {
            Some((_, last)) if *last + 1 == x => *last = x,
            _ => out.push((x, x)),
        }
    }
    out
}

/// Clusters separated from their neighbours (and from the window's right end)
/// by more than `gap` empty integers on both sides.
pub fn isolated_clusters(a: &GroundSet, gap: u64) -> Vec<(u64, u64)> {
    let cs = clusters(a);
    (0..cs.len())
        .filter(|&i| {
            let left_ok = i == 0 || cs[i].0 - cs[i - 1].1 - 1 > gap;
            let right = if i + 1 < cs.len() { cs[i + 1].0 - cs[i].1 - 1 } else { a.window() - cs[i].1 };
            left_ok && right > gap
        })
        .map(|i| cs[i])
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Depth2Failure {
    InsufficientClusters { needed: usize, found: usize, cluster_gap: u64 },
    InsufficientPhi { needed: usize, found: usize, spacing: u64 },
    /// Not enough leaders survive the in-window disjointness checks.
    ChecksFailed { needed: usize, found: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Depth2Outcome {
    Witness { certificate: PatternCertificate, spacing: u64, cluster_gap: u64 },
    Failure(Depth2Failure),
}

/// The depth-2, length-`n` pattern `{x ∈ A + r_i}`, `{x − a_j ∈ Φ}` with
/// witnesses `r_i + a_j`, built from isolated clusters of `A`.
pub fn depth2_witness(a: &GroundSet, phi: &GroundSet, n: usize) -> Result<Depth2Outcome> {
    if n == 0 {
        return Err(Error::pre("pattern length must be at least 1"));
    }
    let (Some(amin), Some(pmin)) = (a.min(), phi.min()) else {
        return Err(Error::EmptySet("depth2_witness"));
    };
    let cs = clusters(a);
    let max_width = cs.iter().map(|&(s, e)| e - s).max().unwrap_or(0);
    let cluster_gap = 2 * max_width + 1;
    let (leaders_pool, spacing) = if n == 1 {
        (vec![(amin, amin)], 1)
    } else {
        let iso = isolated_clusters(a, cluster_gap);
        if iso.len() < n {
            return Ok(Depth2Outcome::Failure(Depth2Failure::InsufficientClusters {
                needed: n,
                found: iso.len(),
                cluster_gap,
            }));
        }
        let m = iso.iter().map(|&(s, e)| e - s).max().unwrap() + 1;
        (iso, m)
    };
    // r_1 = min Φ, r_{i+1} = first element of Φ at least r_i + M.
    let mut rs = vec![pmin];
    while rs.len() < n {
        match phi.elements().iter().find(|&&y| y >= rs.last().unwrap() + spacing) {
            Some(&y) => rs.push(y),
            None => {
                return Ok(Depth2Outcome::Failure(Depth2Failure::InsufficientPhi {
                    needed: n,
                    found: rs.len(),
                    spacing,
                }))
            }
        }
    }
    let in_a = |v: i128| v >= 0 && v <= a.window() as i128 && a.contains(v as u64);
    let in_phi = |v: i128| v >= 0 && v <= phi.window() as i128 && phi.contains(v as u64);
    let mut leaders: Vec<u64> = Vec::new();
    for &(lead, _) in &leaders_pool {
        if leaders.len() == n {
            break;
        }
        let mut trial = leaders.clone();
        trial.push(lead);
        // a_j + r_i − r_k ∉ A and r_i + a_j − a_l ∉ Φ for every new pair.
        let ok = trial.iter().enumerate().all(|(j, &aj)| {
            rs.iter().enumerate().all(|(i, &ri)| {
                rs.iter().enumerate().all(|(k, &rk)| k == i || !in_a(aj as i128 + ri as i128 - rk as i128))
                    && trial
                        .iter()
                        .enumerate()
                        .all(|(l, &al)| l == j || !in_phi(ri as i128 + aj as i128 - al as i128))
            })
        });
        if ok {
            leaders = trial;
        }
    }
    if leaders.len() < n {
        return Ok(Depth2Outcome::Failure(Depth2Failure::ChecksFailed {
            needed: n,
            found: leaders.len(),
        }));
    }
    let sets = BTreeMap::from([("A".to_string(), a.clone()), ("phi".to_string(), phi.clone())]);
    let rows = vec![
        rs.iter().map(|&r| Predicate::translate("A", r as i64)).collect(),
        leaders.iter().map(|&l| Predicate::shifted("phi", l as i64)).collect(),
    ];
    let pattern = FinitePattern::new(sets, rows)?;
    let mut witnesses = BTreeMap::new();
    for (i, &r) in rs.iter().enumerate() {
        for (j, &l) in leaders.iter().enumerate() {
            witnesses.insert(eta_key(&[i, j]), r + l);
        }
    }
    let errors = measure_errors(&pattern, &witnesses);
    let certificate = PatternCertificate {
        domain_cap: pattern.default_domain_cap(),
        pattern,
        witnesses,
        errors,
    };
    Ok(Depth2Outcome::Witness {
        certificate,
        spacing,
        cluster_gap,
    })
}

/// The depth-`k` pattern `{x − b_{α,i} ∈ (k−1)·A}` over blocks `B_α`, with
/// witnesses `a_η = Σ_α b_{α,η(α)}` and the measured per-row error.
pub fn depthk_witness(blocks: &BlocksCertificate, a: &GroundSet) -> Result<PatternCertificate> {
    let k = blocks.k;
    if k < 2 || blocks.blocks.len() != k {
        return Err(Error::pre("need k ≥ 2 blocks"));
    }
    let t = blocks.t;
    if t == 0 || blocks.blocks.iter().any(|b| b.len() != t) {
        return Err(Error::pre("blocks must all have size t ≥ 1"));
    }
    let kn = blocks.n.saturating_mul(k as u64);
    let base = a.truncate(kn)?;
    let shifted = kfold(&base, k - 1)?.truncate(kn)?;
    let profile = rep_counts(&vec![base.clone(); k])?;
    let name = format!("{}A", k - 1);
    let sets = BTreeMap::from([(name.clone(), shifted)]);
    let rows: Vec<Vec<Predicate>> = blocks
        .blocks
        .iter()
        .map(|b| b.iter().map(|&x| Predicate::shifted(&name, x as i64)).collect())
        .collect();
    let pattern = FinitePattern::new(sets, rows)?;
    let paths = pattern.path_count().filter(|&c| c <= MAX_PATHS).ok_or_else(|| {
        Error::CapacityOverflow(format!("{t}^{k} η maps exceed the enumeration limit"))
    })?;
    let mut witnesses = BTreeMap::new();
    for idx in 0..paths as usize {
        let eta = pattern.path_of(idx);
        let x: u64 = eta.iter().zip(&blocks.blocks).map(|(&i, b)| b[i]).sum();
        let r = profile.get(x);
        if r >= blocks.popularity {
            return Err(Error::Certificate(format!(
                "a_η = {x} for η = ({}) is popular: r = {r} ≥ K = {}",
                eta_key(&eta),
                blocks.popularity
            )));
        }
        witnesses.insert(eta_key(&eta), x);
    }
    let errors = measure_errors(&pattern, &witnesses);
    let c_meas = errors.values().copied().max().unwrap_or(0);
    if c_meas as u64 >= blocks.popularity {
        return Err(Error::Certificate(format!(
            "measured row error {c_meas} is not below K = {}",
            blocks.popularity
        )));
    }
    Ok(PatternCertificate {
        domain_cap: pattern.default_domain_cap(),
        pattern,
        witnesses,
        errors,
    })
}
