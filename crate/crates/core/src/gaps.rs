//! Gap structure: left gaps, windowed syndeticity, two-sided gap bounds, the
//! `B_d` refinement step and the shattering witness it feeds.
//!
//! The asymptotic conditions ("`L_A(B) = ∞`", "has bounded two-sided gaps")
//! are replaced by windowed proxies. Scans that would be distorted by the
//! window edges trim a `margin` from both ends; the default margin and the
//! default growth floor are both `⌊log₂ W⌋`.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::setcore::{growth_floor, GroundSet};

/// Value of `L_A` at a point or over a set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapValue {
    /// Supremum over an empty family.
    NegInfinite,
    Finite(u64),
    /// Only produced at points `y ≤ min A`.
    Infinite,
}

impl GapValue {
    pub fn finite(self) -> Option<u64> {
        match self {
            GapValue::Finite(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for GapValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GapValue::NegInfinite => f.write_str("-inf"),
            GapValue::Finite(v) => write!(f, "{v}"),
            GapValue::Infinite => f.write_str("inf"),
        }
    }
}

/// Length of the empty run of `a` immediately left of `y`.
pub fn left_gap(a: &GroundSet, y: u64) -> Result<GapValue> {
    let min = a.min().ok_or(Error::EmptySet("left_gap"))?;
    if y > a.window() {
        return Err(Error::WindowExceeded {
            requested: y,
            window: a.window(),
        });
    }
    Ok(left_gap_unchecked(a, min, y))
}

fn left_gap_unchecked(a: &GroundSet, min: u64, y: u64) -> GapValue {
    if y <= min {
        return GapValue::Infinite;
    }
    // y > min, so a predecessor exists.
    let p = a.pred(y).expect("predecessor below y");
    GapValue::Finite(y - 1 - p)
}

/// `sup { L_A(y) : y ∈ B, y > min A }`.
pub fn left_gap_sup(a: &GroundSet, b: &GroundSet) -> Result<GapValue> {
    let min = a.min().ok_or(Error::EmptySet("left_gap_sup"))?;
    if b.window() > a.window() {
        return Err(Error::WindowExceeded {
            requested: b.window(),
            window: a.window(),
        });
    }
    Ok(b.elements()
        .iter()
        .filter(|&&y| y > min)
        .map(|&y| left_gap_unchecked(a, min, y))
        .max()
        .unwrap_or(GapValue::NegInfinite))
}

/// Least `g` such that `F = [0, g−1]` covers `[0, W − margin]`, i.e. every
/// `x` there has an element of `a` in `[x, x+g−1]`. Absent when some point of
/// the trimmed window has no element of `a` at or after it, or when `g`
/// exceeds the growth floor `⌊log₂ W⌋` (at least 1).
pub fn syndetic_bound(a: &GroundSet, margin: u64) -> Result<Option<u64>> {
    syndetic_bound_with(a, margin, growth_floor(a.window()).max(1))
}

/// [`syndetic_bound`] with an explicit ceiling on certifiable bounds.
pub fn syndetic_bound_with(a: &GroundSet, margin: u64, ceiling: u64) -> Result<Option<u64>> {
    Ok(syndetic_cover(a, margin)?.filter(|&g| g <= ceiling))
}

/// The covering bound before the ceiling is applied.
pub(crate) fn syndetic_cover(a: &GroundSet, margin: u64) -> Result<Option<u64>> {
    if margin >= a.window() && a.window() > 0 {
        return Err(Error::pre(format!(
            "margin {margin} must be below the window {}",
            a.window()
        )));
    }
    let top = a.window() - margin;
    let els = a.elements();
    let Some(&first) = els.first() else {
        return Ok(None);
    };
    let mut g = first + 1;
    for pair in els.windows(2) {
        if pair[0] + 1 > top {
            break;
        }
        g = g.max(pair[1] - pair[0]);
    }
    // Points above the last element have nothing to their right.
    if *els.last().unwrap() < top {
        return Ok(None);
    }
    Ok(Some(g))
}

/// Independent check that `F = [0, g−1]` covers `[0, top]`: every `x` has
/// some `n < g` with `x + n ∈ a`.
pub fn covers_with_translates(a: &GroundSet, g: u64, top: u64) -> bool {
    let mut next_ok = 0u64;
    for &el in a.elements() {
        // el covers [el − g + 1, el].
        if el + 1 < next_ok {
            continue;
        }
        let lo = el.saturating_sub(g - 1);
        if lo > next_ok {
            return false;
        }
        next_ok = el + 1;
        if next_ok > top {
            return true;
        }
    }
    next_ok > top
}

fn nearest_neighbor(a: &GroundSet, x: u64) -> Option<u64> {
    let left = a.pred(x).map(|p| x - p);
    let right = a.succ(x).map(|s| s - x);
    match (left, right) {
        (Some(l), Some(r)) => Some(l.min(r)),
        (l, r) => l.or(r),
    }
}

/// Largest nearest-neighbour distance over `a ∩ [margin, W − margin]`.
/// `Err(())` when an interior point has no neighbour at all; `Ok(None)` when
/// the interior is empty.
fn interior_neighbor_bound(a: &GroundSet, margin: u64) -> std::result::Result<Option<u64>, ()> {
    let Some(top) = a.window().checked_sub(margin) else {
        return Ok(None);
    };
    let mut bound: Option<u64> = None;
    for &x in a.range(margin, top) {
        let nn = nearest_neighbor(a, x).ok_or(())?;
        bound = Some(bound.map_or(nn, |b| b.max(nn)));
    }
    Ok(bound)
}

/// Least `N` such that every `x ∈ a ∩ [margin, W − margin]` has another element
/// of `a` within distance `N`. Absent when the interior is empty, an interior
/// point is isolated, or the bound exceeds `margin` (a neighbour that far
/// cannot be certified from inside the window).
pub fn two_sided_gap_bound(a: &GroundSet, margin: u64) -> Result<Option<u64>> {
    if a.is_empty() {
        return Err(Error::EmptySet("two_sided_gap_bound"));
    }
    Ok(match interior_neighbor_bound(a, margin) {
        Ok(Some(n)) if n <= margin => Some(n),
        _ => None,
    })
}

/// `B_d = { y ∈ A′ : [y−2d, y−1] ∩ A = ∅ and [y+1, y+d] ∩ A′ = {y+d} }`,
/// intervals clipped at 0, over the window of `a`.
pub fn refine_step(a: &GroundSet, aprime: &GroundSet, d: u64) -> Result<GroundSet> {
    if d == 0 {
        return Err(Error::pre("refine_step needs d ≥ 1"));
    }
    if let Some(&x) = aprime.elements().iter().find(|&&x| !a.contains(x)) {
        return Err(Error::NotSubset(x));
    }
    let Some(min) = a.min() else {
        return Ok(GroundSet::empty(a.window()));
    };
    let out: Vec<u64> = aprime
        .elements()
        .iter()
        .copied()
        .filter(|&y| aprime.succ(y) == Some(y + d))
        .filter(|&y| match left_gap_unchecked(a, min, y) {
            GapValue::Infinite => true,
            GapValue::Finite(m) => m >= 2 * d,
            GapValue::NegInfinite => false,
        })
        .collect();
    Ok(GroundSet::from_sorted(out, a.window()))
}

/// A finite shattering witness for `ψ(x, y) := y − x ∈ A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpWitness {
    pub base: u64,
    #[serde(rename = "gapSeq")]
    pub gap_seq: Vec<u64>,
    #[serde(rename = "chainSizes")]
    pub chain_sizes: Vec<usize>,
    /// Bit `i` of the key means `i ∈ s`.
    pub family: BTreeMap<u64, u64>,
    #[serde(skip)]
    pub chain: Vec<GroundSet>,
}

/// Largest witness depth accepted; the family has `2^(N+1)` entries.
pub const MAX_WITNESS_DEPTH: usize = 24;

impl IpWitness {
    /// Builds the family `b_s = base + Σ_{k∈s} d_k` from a gap sequence.
    pub fn from_gaps(base: u64, gap_seq: Vec<u64>) -> Result<Self> {
        if gap_seq.is_empty() || gap_seq.len() > MAX_WITNESS_DEPTH + 1 {
            return Err(Error::pre("gap sequence length must be in [1, 25]"));
        }
        let family = (0..1u64 << gap_seq.len())
            .map(|mask| {
                let sum = gap_seq
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .try_fold(base, |acc, (_, &d)| acc.checked_add(d))
                    .ok_or_else(|| Error::CapacityOverflow("b_s overflows u64".into()))?;
                Ok((mask, sum))
            })
            .collect::<Result<BTreeMap<_, _>>>()?;
        Ok(IpWitness {
            base,
            gap_seq,
            chain_sizes: Vec::new(),
            family,
            chain: Vec::new(),
        })
    }

    /// `N`, so that the witness shatters `N + 1` points.
    pub fn depth(&self) -> usize {
        self.gap_seq.len().saturating_sub(1)
    }

    /// Checks the structural invariants; returns the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let d = &self.gap_seq;
        if d.is_empty() {
            return Err("empty gap sequence".into());
        }
        if d[0] == 0 {
            return Err("d_0 must be positive".into());
        }
        let mut prefix: u128 = 0;
        for (n, &dn) in d.iter().enumerate() {
            if n >= 1 && (dn as u128) <= 2 * d[n - 1] as u128 {
                return Err(format!("d_{n} = {dn} is not above 2·d_{} = {}", n - 1, 2 * d[n - 1]));
            }
            if (dn as u128) <= prefix && n >= 1 {
                return Err(format!("d_{n} = {dn} is not above Σ_(k<{n}) d_k = {prefix}"));
            }
            prefix += dn as u128;
        }
        let expected = 1usize << d.len();
        if self.family.len() != expected {
            return Err(format!("family has {} entries, expected {expected}", self.family.len()));
        }
        for (&mask, &bs) in &self.family {
            let sum: u128 = self.base as u128
                + (0..d.len())
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| d[i] as u128)
                    .sum::<u128>();
            if sum != bs as u128 {
                return Err(format!("b_s for mask {mask} is {bs}, expected {sum}"));
            }
        }
        if !self.chain.is_empty() {
            for (i, pair) in self.chain.windows(2).enumerate() {
                if !pair[1].is_subset_of(&pair[0]) {
                    return Err(format!("A_{} is not contained in A_{i}", i + 1));
                }
            }
            if !self.chain.last().unwrap().contains(self.base) {
                return Err("base is not in the last chain set".into());
            }
        }
        Ok(())
    }
}

/// First failing check of [`verify_shatter`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShatterCounterexample {
    pub mask: u64,
    pub m: usize,
    pub value: i64,
    pub member: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShatterReport {
    pub holds: bool,
    pub checks: usize,
    pub counterexample: Option<ShatterCounterexample>,
}

/// Checks `(b_s − d_m ∈ A) ⟺ (m ∈ s)` for every `s ⊆ [0, N]`, `m ∈ [0, N]`.
/// Negative differences are non-members; values above the window are an
/// error.
pub fn verify_shatter(w: &IpWitness, a: &GroundSet) -> Result<ShatterReport> {
    let len = w.gap_seq.len();
    if len == 0 || len > MAX_WITNESS_DEPTH + 1 {
        return Err(Error::Certificate("gap sequence length out of range".into()));
    }
    let mut checks = 0usize;
    for mask in 0..1u64 << len {
        let bs = *w
            .family
            .get(&mask)
            .ok_or_else(|| Error::Certificate(format!("family has no entry for mask {mask}")))?;
        if bs > a.window() {
            return Err(Error::WindowExceeded {
                requested: bs,
                window: a.window(),
            });
        }
        for (m, &dm) in w.gap_seq.iter().enumerate() {
            checks += 1;
            let value = bs as i64 - dm as i64;
            let member = a.contains_signed(value);
            let expected = mask >> m & 1 == 1;
            if member != expected {
                return Ok(ShatterReport {
                    holds: false,
                    checks,
                    counterexample: Some(ShatterCounterexample {
                        mask,
                        m,
                        value,
                        member,
                    }),
                });
            }
        }
    }
    Ok(ShatterReport {
        holds: true,
        checks,
        counterexample: None,
    })
}

/// Why the recursion stopped.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum StageFailure {
    /// `A_n` has no interior points inside `[margin, W − margin]`.
    WindowExhausted,
    /// An interior point of `A_n` has no neighbour in `A_n`.
    NoGapBound,
    /// No `d` up to the gap bound leaves a `B_{n,d}` with left-gap growth.
    AllCandidatesDie { bound: u64, candidates: usize },
    /// The assembled family did not shatter (should not happen).
    ShatterRejected { counterexample: ShatterCounterexample },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpFailure {
    pub stage: usize,
    #[serde(flatten)]
    pub failure: StageFailure,
    #[serde(rename = "gapSeq")]
    pub gap_seq: Vec<u64>,
    #[serde(rename = "chainSizes")]
    pub chain_sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum IpOutcome {
    Witness(IpWitness),
    Failure(IpFailure),
}

/// Parameters of the `A_n`, `d_n` recursion.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IpSearch {
    /// `N`; the witness has `N + 1` gaps.
    pub depth: usize,
    pub margin: u64,
    /// A candidate `B_{n,d}` survives when `L_A(B ∩ [0, W − margin])` reaches this.
    pub growth_floor: u64,
    /// Minimum `|A|` for the recursion to be attempted.
    pub size_floor: usize,
}

impl IpSearch {
    pub fn new(window: u64, depth: usize) -> Self {
        IpSearch {
            depth,
            margin: growth_floor(window),
            growth_floor: growth_floor(window),
            size_floor: 4,
        }
    }

    pub fn run(&self, a: &GroundSet) -> Result<IpOutcome> {
        if a.len() < self.size_floor {
            return Err(Error::pre(format!(
                "set has {} elements, below the floor {}",
                a.len(),
                self.size_floor
            )));
        }
        if self.depth < 1 || self.depth > MAX_WITNESS_DEPTH {
            return Err(Error::pre(format!("witness depth must be in [1, {MAX_WITNESS_DEPTH}]")));
        }
        let top = a.window().saturating_sub(self.margin);
        let mut chain = vec![a.clone()];
        let mut gaps: Vec<u64> = Vec::new();
        let fail = |stage, failure, gaps: &[u64], chain: &[GroundSet]| {
            Ok(IpOutcome::Failure(IpFailure {
                stage,
                failure,
                gap_seq: gaps.to_vec(),
                chain_sizes: chain.iter().map(GroundSet::len).collect(),
            }))
        };
        for stage in 0..=self.depth {
            let current = chain.last().unwrap();
            let bound = match interior_neighbor_bound(current, self.margin) {
                Ok(Some(b)) => b,
                Ok(None) => return fail(stage, StageFailure::WindowExhausted, &gaps, &chain),
                Err(()) => return fail(stage, StageFailure::NoGapBound, &gaps, &chain),
            };
            let mut candidates: Vec<u64> = current
                .elements()
                .windows(2)
                .map(|p| p[1] - p[0])
                .filter(|&d| d <= bound)
                .collect();
            candidates.sort_unstable();
            candidates.dedup();
            // B_{n,d} is empty unless d is a successor difference in A_n, so
            // scanning these in order is the literal "first such d".
            let found = candidates.par_iter().find_map_first(|&d| {
                let b = refine_step(a, current, d).ok()?;
                let trimmed = b.truncate(top.min(b.window())).ok()?;
                match left_gap_sup(a, &trimmed).ok()? {
                    GapValue::Finite(v) if v >= self.growth_floor => Some((d, b)),
                    GapValue::Infinite => Some((d, b)),
                    _ => None,
                }
            });
            match found {
                Some((d, b)) => {
                    gaps.push(d);
                    chain.push(b);
                }
                None => {
                    return fail(
                        stage,
                        StageFailure::AllCandidatesDie {
                            bound,
                            candidates: candidates.len(),
                        },
                        &gaps,
                        &chain,
                    )
                }
            }
        }
        let base = chain.last().unwrap().min().expect("surviving stage is nonempty");
        let mut witness = IpWitness::from_gaps(base, gaps.clone())?;
        witness.chain_sizes = chain.iter().map(GroundSet::len).collect();
        witness.chain = chain;
        let report = verify_shatter(&witness, a)?;
        if let Some(counterexample) = report.counterexample {
            return fail(
                self.depth,
                StageFailure::ShatterRejected { counterexample },
                &gaps,
                &witness.chain,
            );
        }
        Ok(IpOutcome::Witness(witness))
    }
}

/// Runs the recursion with default growth floor and size floor.
pub fn build_ip_witness(a: &GroundSet, depth: usize, margin: u64) -> Result<IpOutcome> {
    IpSearch {
        margin,
        ..IpSearch::new(a.window(), depth)
    }
    .run(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setcore::generate;

    fn set(xs: &[u64], w: u64) -> GroundSet {
        GroundSet::new(xs.iter().copied(), w).unwrap()
    }

    fn gen(s: &str) -> GroundSet {
        generate(&s.parse().unwrap()).unwrap()
    }

    /// Direct scan: grow m while [y−m, y−1] misses A.
    fn left_gap_oracle(a: &GroundSet, y: u64) -> GapValue {
        if y <= a.min().unwrap() {
            return GapValue::Infinite;
        }
        let mut m = 0;
        while m < y && !a.contains(y - m - 1) {
            m += 1;
        }
        GapValue::Finite(m)
    }

    /// Membership-only re-evaluation of the two clauses of B_d.
    fn bd_oracle(a: &GroundSet, ap: &GroundSet, d: u64) -> Vec<u64> {
        ap.elements()
            .iter()
            .copied()
            .filter(|&y| (y.saturating_sub(2 * d)..y).all(|z| !a.contains(z)))
            .filter(|&y| {
                let hits: Vec<u64> = (y + 1..=y + d).filter(|&z| ap.contains(z)).collect();
                hits == [y + d] && y + d <= a.window()
            })
            .collect()
    }

    #[test]
    fn left_gap_examples() {
        let a = set(&[0, 5, 6, 10], 10);
        assert_eq!(left_gap(&a, 0).unwrap(), GapValue::Infinite);
        assert_eq!(left_gap(&a, 5).unwrap(), GapValue::Finite(4));
        assert_eq!(left_gap(&a, 6).unwrap(), GapValue::Finite(0));
        assert!(matches!(left_gap(&GroundSet::empty(5), 2), Err(Error::EmptySet(_))));
        assert!(left_gap(&a, 11).is_err());
    }

    #[test]
    fn left_gap_sup_examples() {
        let a = set(&[0, 5, 6, 10], 10);
        assert_eq!(left_gap_sup(&a, &a).unwrap(), GapValue::Finite(4));
        let full = GroundSet::interval(30);
        assert_eq!(left_gap_sup(&full, &full).unwrap(), GapValue::Finite(0));
        assert_eq!(left_gap_sup(&a, &set(&[0], 10)).unwrap(), GapValue::NegInfinite);
    }

    #[test]
    fn syndetic_examples() {
        assert_eq!(syndetic_bound(&gen("evens@100"), 0).unwrap(), Some(2));
        assert_eq!(syndetic_bound(&gen("powers:2@1048576"), 0).unwrap(), None);
        assert_eq!(syndetic_bound(&GroundSet::interval(50), 0).unwrap(), Some(1));
        // The raw cover of powers(2) is the 2^19 gap.
        assert_eq!(syndetic_cover(&gen("powers:2@1048576"), 0).unwrap(), Some(1 << 19));
        // Nothing after the last element inside the trimmed window.
        assert_eq!(syndetic_bound(&set(&[0, 1, 2, 3], 20), 2).unwrap(), None);
        assert!(covers_with_translates(&gen("evens@100"), 2, 100));
        assert!(!covers_with_translates(&gen("evens@100"), 1, 100));
    }

    #[test]
    fn two_sided_examples() {
        assert_eq!(two_sided_gap_bound(&gen("evens@100"), 4).unwrap(), Some(2));
        let ss = gen("subset-sums:4:4@341");
        assert_eq!(ss.max(), Some(341));
        assert_eq!(two_sided_gap_bound(&ss, 5).unwrap(), Some(1));
        assert_eq!(two_sided_gap_bound(&gen("mian-chowla@10000"), 100).unwrap(), None);
    }

    #[test]
    fn two_sided_mian_chowla_bound_grows() {
        // Nearest-neighbour scan with an unbounded margin: the bound grows with W.
        let small = interior_neighbor_bound(&gen("mian-chowla@2000"), 0).unwrap().unwrap();
        let large = interior_neighbor_bound(&gen("mian-chowla@20000"), 0).unwrap().unwrap();
        assert!(large > small && large > 100, "{small} {large}");
    }

    #[test]
    fn refine_examples() {
        let a = set(&[0, 10, 11, 30, 31], 31);
        assert_eq!(refine_step(&a, &a, 1).unwrap().elements(), &[10, 30]);
        assert_eq!(refine_step(&a, &a, 1).unwrap().elements(), &bd_oracle(&a, &a, 1)[..]);
        assert!(refine_step(&a, &a, 7).unwrap().is_empty());
        let b = set(&[0, 10, 11], 11);
        assert!(refine_step(&b, &b, 2).unwrap().is_empty());
        assert!(matches!(refine_step(&b, &set(&[3], 11), 1), Err(Error::NotSubset(3))));
    }

    #[test]
    fn hand_built_subset_sum_witness_shatters() {
        for n in 0..6u32 {
            let w = 4u64.pow(n + 2);
            let a = gen(&format!("subset-sums:4:{}@{w}", n + 1));
            let witness = IpWitness::from_gaps(0, (0..=n).map(|k| 4u64.pow(k)).collect()).unwrap();
            witness.check_invariants().unwrap();
            let r = verify_shatter(&witness, &a).unwrap();
            assert!(r.holds, "{r:?}");
            assert_eq!(r.checks, (1 << (n + 1)) * (n as usize + 1));
        }
    }

    #[test]
    fn tampered_witness_fails() {
        let a = gen("subset-sums:4:4@1024");
        let witness = IpWitness::from_gaps(0, vec![1, 1, 16]).unwrap();
        assert!(witness.check_invariants().is_err());
        let r = verify_shatter(&witness, &a).unwrap();
        assert!(!r.holds);
        assert!(r.counterexample.is_some());
    }

    #[test]
    fn depth_zero_witness() {
        let a = set(&[0, 3, 5], 10);
        // s ∈ {∅, {0}}: base − d ∉ A and base ∈ A.
        let ok = IpWitness::from_gaps(3, vec![2]).unwrap();
        assert!(verify_shatter(&ok, &a).unwrap().holds);
        let bad = IpWitness::from_gaps(3, vec![3]).unwrap();
        assert!(!verify_shatter(&bad, &a).unwrap().holds);
    }

    #[test]
    fn builds_witness_on_subset_sums() {
        let a = gen("subset-sums:4:12@67108864");
        let IpOutcome::Witness(w) = build_ip_witness(&a, 3, growth_floor(a.window())).unwrap() else {
            panic!("expected a witness");
        };
        assert_eq!(w.gap_seq, vec![1, 4, 16, 64]);
        w.check_invariants().unwrap();
        assert!(verify_shatter(&w, &a).unwrap().holds);
        assert_eq!(w.chain_sizes.len(), 5);
    }

    #[test]
    fn evens_fail_at_stage_zero() {
        let a = gen("evens@1000");
        match build_ip_witness(&a, 1, growth_floor(1000)).unwrap() {
            IpOutcome::Failure(f) => {
                assert_eq!(f.stage, 0);
                assert!(matches!(f.failure, StageFailure::AllCandidatesDie { .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn tiny_sets_are_rejected() {
        assert!(build_ip_witness(&set(&[1, 2], 10), 1, 1).is_err());
    }

    #[test]
    fn mian_chowla_has_no_witness() {
        let a = gen("mian-chowla@100000");
        assert!(matches!(
            build_ip_witness(&a, 3, growth_floor(a.window())).unwrap(),
            IpOutcome::Failure(_)
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_set() -> impl Strategy<Value = GroundSet> {
            proptest::collection::btree_set(0u64..120, 1..40)
                .prop_map(|s| GroundSet::new(s, 120).unwrap())
        }

        proptest! {
            #[test]
            fn left_gap_matches_scan(a in arb_set(), y in 0u64..=120) {
                prop_assert_eq!(left_gap(&a, y).unwrap(), left_gap_oracle(&a, y));
            }

            #[test]
            fn removing_elements_never_shrinks_left_gap(a in arb_set(), drop in any::<u64>(), y in 0u64..=120) {
                let kept: Vec<u64> = a.elements().iter().copied().enumerate()
                    .filter(|(i, _)| (drop >> (i % 64)) & 1 == 0 || *i == 0)
                    .map(|(_, x)| x).collect();
                let smaller = GroundSet::new(kept, 120).unwrap();
                prop_assert!(left_gap(&smaller, y).unwrap() >= left_gap(&a, y).unwrap());
            }

            #[test]
            fn refine_is_self_certifying(a in arb_set(), keep in any::<u64>(), d in 1u64..12) {
                let sub: Vec<u64> = a.elements().iter().copied().enumerate()
                    .filter(|(i, _)| (keep >> (i % 64)) & 1 == 1)
                    .map(|(_, x)| x).collect();
                let ap = GroundSet::new(sub, 120).unwrap();
                let b = refine_step(&a, &ap, d).unwrap();
                prop_assert!(b.is_subset_of(&ap));
                prop_assert_eq!(b.elements(), &bd_oracle(&a, &ap, d)[..]);
            }

            #[test]
            fn built_witnesses_are_sound(seed in 0u64..500, density in 0.2f64..0.9) {
                let a = generate(&format!("random:{density}:{seed}@400").parse().unwrap()).unwrap();
                if let Ok(IpOutcome::Witness(w)) = build_ip_witness(&a, 1, growth_floor(400)) {
                    prop_assert!(w.check_invariants().is_ok());
                    prop_assert!(verify_shatter(&w, &a).unwrap().holds);
                }
            }
        }
    }
}
