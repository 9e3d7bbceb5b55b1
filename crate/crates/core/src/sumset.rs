//! k-fold sumsets, ordered representation counts, popularity sets, k-tupling
//! ratios and the ladder search for `(k+ε)`-growth.

use std::collections::HashMap;
use std::sync::Arc;

use num_bigint::BigUint;
use num_rational::Ratio;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde_json::{json, Value};

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::setcore::{GroundSet, MAX_WINDOW};

/// Sums with a dense result at most this long use array kernels.
const DENSE_SUM_LIMIT: u64 = 1 << 28;
/// Largest FFT length used by the convolution kernels.
const FFT_LIMIT: usize = 1 << 23;
/// Work bound for the sparse kernels (pairs enumerated).
const SPARSE_PAIR_LIMIT: u128 = 1 << 31;
/// Integers above this are written as strings in exports.
const JSON_SAFE: u64 = (1 << 53) - 1;

fn check_windows(sets: &[GroundSet]) -> Result<(usize, u64, u64)> {
    let first = sets.first().ok_or_else(|| Error::pre("at least one set is required"))?;
    let w = first.window();
    if let Some(other) = sets.iter().find(|s| s.window() != w) {
        return Err(Error::MixedWindows(w, other.window()));
    }
    let k = sets.len();
    let out = (k as u64)
        .checked_mul(w)
        .filter(|&x| x <= MAX_WINDOW)
        .ok_or(Error::WindowTooLarge(w.saturating_mul(k as u64)))?;
    Ok((k, w, out))
}

fn fft_len(n: u64) -> Option<usize> {
    let l = (n as usize).checked_next_power_of_two()?;
    (l <= FFT_LIMIT).then_some(l)
}

fn fft_cost(l: usize) -> u128 {
    6 * l as u128 * (l.trailing_zeros() as u128 + 1)
}

/// Real linear convolution through one complex FFT pair.
fn convolve_f64(a: &[f64], b: &[f64], len: usize) -> Vec<f64> {
    let mut planner = FftPlanner::<f64>::new();
    let fwd: Arc<dyn Fft<f64>> = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    // Pack a into the real part and b into the imaginary part.
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for (i, &x) in a.iter().enumerate() {
        buf[i].re = x;
    }
    for (i, &y) in b.iter().enumerate() {
        buf[i].im = y;
    }
    fwd.process(&mut buf);
    let mut prod = vec![Complex::new(0.0, 0.0); len];
    for i in 0..len {
        let j = (len - i) % len;
        let z = buf[i];
        let zc = buf[j].conj();
        let fa = (z + zc) * 0.5;
        let fb = (z - zc) * Complex::new(0.0, -0.5);
        prod[i] = fa * fb;
    }
    inv.process(&mut prod);
    let scale = 1.0 / len as f64;
    prod.iter().map(|c| c.re * scale).collect()
}

fn sumset_pair(cur: &[u64], cur_w: u64, next: &GroundSet) -> Result<Vec<u64>> {
    let out_w = cur_w + next.window();
    if cur.is_empty() || next.is_empty() {
        return Ok(Vec::new());
    }
    if out_w < DENSE_SUM_LIMIT {
        let len = out_w as usize + 1;
        let shifts = cur.len().min(next.len()) as u128;
        let shift_cost = shifts * (len as u128 / 64 + 1);
        if let Some(l) = fft_len(out_w + 1).filter(|&l| fft_cost(l) < shift_cost) {
            let mut a = vec![0.0; cur_w as usize + 1];
            for &x in cur {
                a[x as usize] = 1.0;
            }
            let mut b = vec![0.0; next.window() as usize + 1];
            for &x in next.elements() {
                b[x as usize] = 1.0;
            }
            let c = convolve_f64(&a, &b, l);
            return Ok((0..len as u64).filter(|&i| c[i as usize] > 0.5).collect());
        }
        let mut acc = Bitset::new(len);
        let (shift_by, src): (&[u64], Bitset) = if cur.len() <= next.len() {
            (cur, Bitset::from_indices(len, next.elements().iter().copied()))
        } else {
            (next.elements(), Bitset::from_indices(len, cur.iter().copied()))
        };
        for &s in shift_by {
            acc.or_shifted(&src, s as usize);
        }
        return Ok(acc.iter_ones().map(|i| i as u64).collect());
    }
    let pairs = cur.len() as u128 * next.len() as u128;
    if pairs > SPARSE_PAIR_LIMIT {
        return Err(Error::CapacityOverflow(format!(
            "sparse sumset would enumerate {pairs} pairs"
        )));
    }
    let mut out: Vec<u64> = cur
        .iter()
        .flat_map(|&x| next.elements().iter().map(move |&y| x + y))
        .collect();
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// `A_1 + ⋯ + A_k` over the window `k·W`.
pub fn ksum(sets: &[GroundSet]) -> Result<GroundSet> {
    let (_, w, out) = check_windows(sets)?;
    let mut cur = sets[0].elements().to_vec();
    let mut cur_w = w;
    for next in &sets[1..] {
        cur = sumset_pair(&cur, cur_w, next)?;
        cur_w += w;
    }
    debug_assert_eq!(cur_w, out);
    Ok(GroundSet::from_sorted(cur, out))
}

/// `k·A = A + ⋯ + A`.
pub fn kfold(a: &GroundSet, k: usize) -> Result<GroundSet> {
    if k == 0 {
        return Err(Error::pre("k must be at least 1"));
    }
    ksum(&vec![a.clone(); k])
}

/// Exact ordered representation counts of a k-fold sum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepProfile {
    pub k: usize,
    /// `(x, r(x))` for every `x` in the sumset, increasing in `x`.
    pub counts: Vec<(u64, u64)>,
    pub source_sizes: Vec<usize>,
    pub window: u64,
}

impl RepProfile {
    pub fn get(&self, x: u64) -> u64 {
        self.counts
            .binary_search_by_key(&x, |&(y, _)| y)
            .map_or(0, |i| self.counts[i].1)
    }

    pub fn support(&self) -> GroundSet {
        GroundSet::from_sorted(self.counts.iter().map(|&(x, _)| x).collect(), self.window)
    }

    pub fn total(&self) -> u128 {
        self.counts.iter().map(|&(_, c)| c as u128).sum()
    }

    pub fn max_count(&self) -> u64 {
        self.counts.iter().map(|&(_, c)| c).max().unwrap_or(0)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "count"]).expect("in-memory csv");
        for &(x, c) in &self.counts {
            w.write_record([x.to_string(), c.to_string()]).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
    }

    pub fn to_json(&self) -> Value {
        json!({
            "k": self.k,
            "window": exact(self.window),
            "sourceSizes": self.source_sizes,
            "counts": self.counts.iter().map(|&(x, c)| json!([exact(x), exact(c)])).collect::<Vec<_>>(),
        })
    }
}

/// JSON number when exactly representable as a double, decimal string otherwise.
pub fn exact(x: u64) -> Value {
    if x <= JSON_SAFE {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

fn product_capacity(sets: &[GroundSet]) -> Result<u64> {
    sets.iter().try_fold(1u64, |acc, s| {
        acc.checked_mul(s.len() as u64).ok_or_else(|| {
            Error::CapacityOverflow(format!(
                "product of set sizes {:?} exceeds 2^64",
                sets.iter().map(GroundSet::len).collect::<Vec<_>>()
            ))
        })
    })
}

fn rep_pair_dense(cur: &[u64], next: &GroundSet, total: u64) -> Vec<u64> {
    let len = cur.len() + next.window() as usize;
    let nnz = cur.iter().filter(|&&c| c > 0).count() as u128;
    let direct_cost = nnz * next.len() as u128;
    let fft_ok = (total as u128) * (next.len() as u128) < 1 << 36;
    if let Some(l) = fft_len(len as u64).filter(|&l| fft_ok && fft_cost(l) < direct_cost) {
        let a: Vec<f64> = cur.iter().map(|&c| c as f64).collect();
        let mut b = vec![0.0; next.window() as usize + 1];
        for &x in next.elements() {
            b[x as usize] = 1.0;
        }
        let raw = convolve_f64(&a, &b, l);
        let mut out = Vec::with_capacity(len);
        let mut clean = true;
        for &v in &raw[..len] {
            let r = v.round();
            clean &= (v - r).abs() < 0.2 && r >= 0.0;
            out.push(r.max(0.0) as u64);
        }
        let sum: u128 = out.iter().map(|&c| c as u128).sum();
        if clean && sum == total as u128 * next.len() as u128 {
            return out;
        }
    }
    let mut out = vec![0u64; len];
    for (x, &c) in cur.iter().enumerate() {
        if c == 0 {
            continue;
        }
        for &a in next.elements() {
            out[x + a as usize] += c;
        }
    }
    out
}

/// Ordered representation counts `r_{A_1,…,A_k}(x)`.
pub fn rep_counts(sets: &[GroundSet]) -> Result<RepProfile> {
    let (k, w, out_w) = check_windows(sets)?;
    product_capacity(sets)?;
    let source_sizes = sets.iter().map(GroundSet::len).collect();
    let counts = if out_w < DENSE_SUM_LIMIT {
        let mut cur = vec![0u64; w as usize + 1];
        for &x in sets[0].elements() {
            cur[x as usize] = 1;
        }
        let mut total = sets[0].len() as u64;
        for next in &sets[1..] {
            cur = rep_pair_dense(&cur, next, total);
            total *= next.len() as u64;
        }
        cur.into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .map(|(x, c)| (x as u64, c))
            .collect()
    } else {
        let mut cur: Vec<(u64, u64)> = sets[0].elements().iter().map(|&x| (x, 1)).collect();
        for next in &sets[1..] {
            let pairs = cur.len() as u128 * next.len() as u128;
            if pairs > SPARSE_PAIR_LIMIT {
                return Err(Error::CapacityOverflow(format!(
                    "sparse representation count would enumerate {pairs} pairs"
                )));
            }
            let mut acc: HashMap<u64, u64> = HashMap::new();
            for &(x, c) in &cur {
                for &a in next.elements() {
                    *acc.entry(x + a).or_default() += c;
                }
            }
            cur = acc.into_iter().collect();
            cur.sort_unstable();
        }
        cur
    };
    Ok(RepProfile {
        k,
        counts,
        source_sizes,
        window: out_w,
    })
}

/// `D^k_K`: sums with at least `threshold` representations.
pub fn popular(profile: &RepProfile, threshold: u64) -> Result<GroundSet> {
    if threshold == 0 {
        return Err(Error::pre("popularity threshold must be at least 1"));
    }
    Ok(GroundSet::from_sorted(
        profile
            .counts
            .iter()
            .filter(|&&(_, c)| c >= threshold)
            .map(|&(x, _)| x)
            .collect(),
        profile.window,
    ))
}

/// `Σ_x r^k_A(x) = |A|^k`, checked exactly.
pub fn counting_check(a: &GroundSet, k: usize) -> Result<bool> {
    if k == 0 {
        return Err(Error::pre("k must be at least 1"));
    }
    let profile = rep_counts(&vec![a.clone(); k])?;
    let expected = (a.len() as u128).pow(k as u32);
    Ok(profile.total() == expected)
}

/// `⌈4(k+1)^k / c⌉`, the popularity threshold used against a measured
/// tupling constant `c`.
pub fn default_popularity_threshold(k: usize, c: f64) -> Result<u64> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::pre(format!("tupling constant {c} must lie in (0, 1]")));
    }
    let v = (4.0 * ((k + 1) as f64).powi(k as i32) / c).ceil();
    if v >= u64::MAX as f64 {
        return Err(Error::CapacityOverflow("popularity threshold exceeds 2^64".into()));
    }
    Ok(v as u64)
}

/// Ratios `|k·A_{≤n}| / |A_{≤n}|^k` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TuplingProfile {
    pub k: usize,
    pub grid: Vec<u64>,
    pub base_sizes: Vec<u64>,
    pub sumset_sizes: Vec<u64>,
    /// `None` where `A_{≤n}` is empty.
    pub ratios: Vec<Option<f64>>,
    pub tail_fraction: f64,
    /// Minimum ratio over the last `tail_fraction` of the grid.
    pub liminf_estimate: Option<f64>,
}

impl TuplingProfile {
    pub fn flagged(&self) -> Vec<u64> {
        self.grid
            .iter()
            .zip(&self.ratios)
            .filter(|(_, r)| r.is_none())
            .map(|(&n, _)| n)
            .collect()
    }

    /// Grid indices making up the tail.
    pub fn tail_start(&self) -> usize {
        tail_start(self.grid.len(), self.tail_fraction)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "ratio"]).expect("in-memory csv");
        for (n, r) in self.grid.iter().zip(&self.ratios) {
            let r = r.map(|r| format!("{r:.12e}")).unwrap_or_default();
            w.write_record([n.to_string(), r]).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
    }

    pub fn to_json(&self) -> Value {
        json!({
            "k": self.k,
            "grid": self.grid.iter().map(|&n| exact(n)).collect::<Vec<_>>(),
            "baseSizes": self.base_sizes.iter().map(|&n| exact(n)).collect::<Vec<_>>(),
            "sumsetSizes": self.sumset_sizes.iter().map(|&n| exact(n)).collect::<Vec<_>>(),
            "ratios": self.ratios,
            "tailFraction": self.tail_fraction,
            "liminfEstimate": self.liminf_estimate,
        })
    }
}

fn tail_start(len: usize, fraction: f64) -> usize {
    let tail = ((len as f64) * fraction).ceil() as usize;
    len - tail.clamp(1.min(len), len)
}

/// Roughly geometric grid of `points` values in `[lo, hi]`.
pub fn geometric_grid(lo: u64, hi: u64, points: usize) -> Vec<u64> {
    let lo = lo.max(1).min(hi.max(1));
    if points <= 1 || lo >= hi {
        return vec![hi];
    }
    let ratio = (hi as f64 / lo as f64).powf(1.0 / (points - 1) as f64);
    let mut grid: Vec<u64> = (0..points)
        .map(|i| ((lo as f64) * ratio.powi(i as i32)).round() as u64)
        .map(|n| n.clamp(lo, hi))
        .collect();
    *grid.last_mut().unwrap() = hi;
    grid.dedup();
    grid
}

/// Sizes `|k·A_{≤n}|` on an increasing grid through the recursion
/// `S_j(≤a) = S_j(<a) ∪ (a + S_{j−1}(≤a))` over elements in increasing order.
fn incremental_sizes(a: &GroundSet, k: usize, grid: &[u64]) -> Vec<u64> {
    let top = *grid.last().unwrap();
    let mut levels: Vec<Bitset> = (0..=k).map(|j| Bitset::new(j * top as usize + 1)).collect();
    levels[0].insert(0);
    let mut counts = vec![0usize; k + 1];
    counts[0] = 1;
    let mut out = Vec::with_capacity(grid.len());
    let mut gi = 0;
    let els = a.range(0, top);
    let mut ei = 0;
    while gi < grid.len() {
        let n = grid[gi];
        while ei < els.len() && els[ei] <= n {
            let x = els[ei] as usize;
            for j in 1..=k {
                let (lo, hi) = levels.split_at_mut(j);
                counts[j] += hi[0].or_shifted(&lo[j - 1], x);
            }
            ei += 1;
        }
        out.push(counts[k] as u64);
        gi += 1;
    }
    out
}

/// Exact tupling ratios; the liminf estimate uses the last half of the grid.
pub fn tupling_profile(a: &GroundSet, k: usize, grid: &[u64]) -> Result<TuplingProfile> {
    tupling_profile_with(a, k, grid, 0.5)
}

pub fn tupling_profile_with(
    a: &GroundSet,
    k: usize,
    grid: &[u64],
    tail_fraction: f64,
) -> Result<TuplingProfile> {
    if k < 1 {
        return Err(Error::pre("k must be at least 1"));
    }
    if grid.is_empty() {
        return Err(Error::pre("grid is empty"));
    }
    if grid.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::pre("grid must be strictly increasing"));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::pre("tail fraction must lie in (0, 1]"));
    }
    let top = *grid.last().unwrap();
    if top > a.window() {
        return Err(Error::WindowExceeded {
            requested: top,
            window: a.window(),
        });
    }
    let base_sizes: Vec<u64> = grid.iter().map(|&n| a.count_le(n) as u64).collect();
    let dense_len = (k as u128) * top as u128 + 1;
    let incr_cost = base_sizes.last().copied().unwrap_or(0) as u128 * k as u128 * dense_len / 64;
    let sumset_sizes = if dense_len < DENSE_SUM_LIMIT as u128 && incr_cost < 1 << 29 {
        incremental_sizes(a, k, grid)
    } else {
        grid.par_iter()
            .map(|&n| Ok(kfold(&a.truncate(n)?, k)?.len() as u64))
            .collect::<Result<Vec<_>>>()?
    };
    let ratios: Vec<Option<f64>> = base_sizes
        .iter()
        .zip(&sumset_sizes)
        .map(|(&b, &s)| (b > 0).then(|| s as f64 / (b as f64).powi(k as i32)))
        .collect();
    let start = tail_start(grid.len(), tail_fraction);
    let liminf_estimate = ratios[start..]
        .iter()
        .flatten()
        .copied()
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.min(r))));
    Ok(TuplingProfile {
        k,
        grid: grid.to_vec(),
        base_sizes,
        sumset_sizes,
        ratios,
        tail_fraction,
        liminf_estimate,
    })
}

/// Result of the `n_r = k^r·m` ladder search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrowthIndex {
    pub n: u64,
    pub rung: u32,
    /// Least `r` with `((k+ε)/k)^r·|A_{≤m}| > m`.
    pub cap: Option<u32>,
}

const GROWTH_CAP_ITERATIONS: u32 = 20_000;

fn growth_cap(k: u64, eps: Ratio<u64>, base: u64, m: u64) -> Option<u32> {
    let (num, den) = (*eps.numer() as u128, *eps.denom() as u128);
    let up = BigUint::from(k as u128 * den + num);
    let down = BigUint::from(k as u128 * den);
    let mut lhs = BigUint::from(base);
    let mut rhs = BigUint::from(m);
    for r in 0..=GROWTH_CAP_ITERATIONS {
        if lhs > rhs {
            return Some(r);
        }
        lhs *= &up;
        rhs *= &down;
    }
    None
}

/// Least `n = k^r·m` with `|A_{≤kn}| ≤ (k+ε)|A_{≤n}|`.
pub fn growth_index(a: &GroundSet, k: u64, eps: Ratio<u64>, m: u64) -> Result<GrowthIndex> {
    if k < 1 {
        return Err(Error::pre("k must be at least 1"));
    }
    if *eps.numer() == 0 {
        return Err(Error::pre("ε must be positive"));
    }
    let base = a.count_le(m) as u64;
    if base == 0 || m > a.window() {
        return Err(Error::pre(format!("A ∩ [0, {m}] is empty")));
    }
    let cap = growth_cap(k, eps, base, m);
    let (num, den) = (*eps.numer() as u128, *eps.denom() as u128);
    let mut n = m;
    let mut r = 0u32;
    loop {
        let kn = n.checked_mul(k).filter(|&kn| kn <= a.window());
        let Some(kn) = kn else {
            let needed = cap
                .and_then(|c| (k as u128).checked_pow(c + 1))
                .and_then(|p| p.checked_mul(m as u128))
                .map_or(u64::MAX, |v| v.min(u64::MAX as u128) as u64);
            return Err(Error::WindowExceeded {
                requested: needed.max(n.saturating_mul(k)),
                window: a.window(),
            });
        };
        let lhs = den * a.count_le(kn) as u128;
        let rhs = (k as u128 * den + num) * a.count_le(n) as u128;
        if lhs <= rhs {
            return Ok(GrowthIndex { n, rung: r, cap });
        }
        if k == 1 {
            // The ladder is constant.
            return Err(Error::pre("the k = 1 ladder never moves"));
        }
        n = kn;
        r += 1;
    }
}

/// Parses `p/q`, an integer, or a finite decimal such as `0.25`.
pub fn parse_ratio(s: &str) -> Result<Ratio<u64>> {
    let bad = |why: &str| Error::pre(format!("cannot parse `{s}` as a rational: {why}"));
    let s = s.trim();
    if let Some((int, frac)) = s.split_once('.') {
        if frac.len() > 18 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad("bad decimal"));
        }
        let den = 10u64.pow(frac.len() as u32);
        let i: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad("bad integer part"))? };
        let f: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad("bad fraction"))? };
        let num = i.checked_mul(den).and_then(|v| v.checked_add(f)).ok_or_else(|| bad("too large"))?;
        return Ok(Ratio::new(num, den));
    }
    s.parse::<Ratio<u64>>().map_err(|_| bad("expected p/q"))
        .and_then(|r| if *r.denom() == 0 { Err(bad("zero denominator")) } else { Ok(r) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setcore::generate;
    use std::collections::BTreeMap;

    fn set(xs: &[u64], w: u64) -> GroundSet {
        GroundSet::new(xs.iter().copied(), w).unwrap()
    }

    fn gen(s: &str) -> GroundSet {
        generate(&s.parse().unwrap()).unwrap()
    }

    /// Enumerates every ordered tuple.
    fn tuples_oracle(sets: &[GroundSet]) -> BTreeMap<u64, u64> {
        let mut acc = BTreeMap::from([(0u64, 1u64)]);
        for s in sets {
            let mut next = BTreeMap::new();
            for (&x, &c) in &acc {
                for &a in s.elements() {
                    *next.entry(x + a).or_insert(0) += c;
                }
            }
            acc = next;
        }
        acc
    }

    #[test]
    fn ksum_examples() {
        let a = set(&[0, 1, 3], 3);
        assert_eq!(kfold(&a, 2).unwrap().elements(), &[0, 1, 2, 3, 4, 6]);
        assert_eq!(kfold(&set(&[0], 0), 5).unwrap().elements(), &[0]);
        let s = kfold(&set(&[1, 2, 5, 11], 11), 2).unwrap();
        assert_eq!(s.elements(), &[2, 3, 4, 6, 7, 10, 12, 13, 16, 22]);
        assert_eq!(s.window(), 22);
        assert!(matches!(ksum(&[set(&[1], 3), set(&[1], 4)]), Err(Error::MixedWindows(3, 4))));
    }

    #[test]
    fn rep_examples() {
        let p = rep_counts(&[set(&[0, 1, 3], 3), set(&[0, 1, 3], 3)]).unwrap();
        assert_eq!(p.counts, vec![(0, 1), (1, 2), (2, 1), (3, 2), (4, 2), (6, 1)]);
        assert_eq!(rep_counts(&vec![set(&[0], 0); 5]).unwrap().counts, vec![(0, 1)]);
        let p2 = rep_counts(&vec![set(&[0, 1], 1); 2]).unwrap();
        assert_eq!(p2.counts, vec![(0, 1), (1, 2), (2, 1)]);
        assert_eq!(popular(&p, 2).unwrap().elements(), &[1, 3, 4]);
        assert_eq!(popular(&p, 1).unwrap(), p.support());
        assert!(popular(&p, 3).unwrap().is_empty());
        assert!(popular(&p, 0).is_err());
    }

    #[test]
    fn capacity_is_explicit() {
        let big = GroundSet::interval(1 << 16);
        let e = rep_counts(&vec![big; 5]).unwrap_err();
        assert!(matches!(e, Error::CapacityOverflow(_)));
    }

    #[test]
    fn counting_examples() {
        assert!(counting_check(&set(&[0, 1, 3], 3), 2).unwrap());
        assert!(counting_check(&set(&[5], 5), 3).unwrap());
    }

    #[test]
    fn fft_paths_agree_with_direct() {
        let a = gen("random:0.5:7@20000");
        let fft = rep_counts(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(fft.total(), (a.len() as u128).pow(2));
        // Spot-check a handful of sums against direct counting.
        for x in [0u64, 1, 777, 20000, 39999] {
            let direct = a.elements().iter().filter(|&&y| y <= x && a.contains(x - y)).count();
            assert_eq!(fft.get(x), direct as u64, "x = {x}");
        }
        let s = kfold(&a, 2).unwrap();
        assert_eq!(s, fft.support());
    }

    #[test]
    fn sparse_path_for_huge_windows() {
        let a = set(&[0, 1, 1 << 40], 1 << 40);
        let p = rep_counts(&[a.clone(), a.clone()]).unwrap();
        let oracle: Vec<(u64, u64)> = tuples_oracle(&[a.clone(), a.clone()]).into_iter().collect();
        assert_eq!(p.counts, oracle);
        assert_eq!(kfold(&a, 2).unwrap(), p.support());
    }

    #[test]
    fn sidon_certificate_on_mian_chowla() {
        let a = gen("mian-chowla@100000");
        let n = a.len() as u64;
        let s2 = kfold(&a, 2).unwrap();
        assert_eq!(s2.len() as u64, n * (n + 1) / 2);
        assert!(rep_counts(&[a.clone(), a.clone()]).unwrap().max_count() <= 2);
    }

    #[test]
    fn tupling_examples() {
        let mc = gen("mian-chowla@100000");
        let grid = geometric_grid(mc.min().unwrap(), 100000, 12);
        let p = tupling_profile(&mc, 2, &grid).unwrap();
        assert!(p.ratios.iter().flatten().all(|&r| r >= 0.5), "{:?}", p.ratios);

        let nat = GroundSet::interval(1000);
        let p = tupling_profile(&nat, 2, &[10, 100, 1000]).unwrap();
        for (i, &n) in [10u64, 100, 1000].iter().enumerate() {
            let want = (2 * n + 1) as f64 / ((n + 1) * (n + 1)) as f64;
            assert!((p.ratios[i].unwrap() - want).abs() < 1e-15);
        }

        let zero = set(&[0], 50);
        assert!(tupling_profile(&zero, 3, &[1, 10, 50]).unwrap().ratios.iter().all(|&r| r == Some(1.0)));

        let late = set(&[20, 30], 50);
        let p = tupling_profile(&late, 2, &[5, 25, 50]).unwrap();
        assert_eq!(p.flagged(), vec![5]);
        assert_eq!(p.liminf_estimate, Some(3.0 / 4.0));
    }

    #[test]
    fn tupling_kernels_agree() {
        let a = gen("random:0.3:11@3000");
        let grid = geometric_grid(1, 3000, 9);
        let inc = incremental_sizes(&a, 3, &grid);
        let direct: Vec<u64> = grid.iter().map(|&n| kfold(&a.truncate(n).unwrap(), 3).unwrap().len() as u64).collect();
        assert_eq!(inc, direct);
    }

    #[test]
    fn growth_examples() {
        let nat = GroundSet::interval(1000);
        let g = growth_index(&nat, 2, Ratio::new(1, 1), 10).unwrap();
        assert_eq!((g.n, g.rung), (10, 0));
        let pw = gen("powers:2@1024");
        assert_eq!(growth_index(&pw, 2, Ratio::new(1, 2), 4).unwrap().n, 4);
        assert!(matches!(growth_index(&set(&[5], 10), 2, Ratio::new(1, 1), 3), Err(Error::Precondition(_))));
    }

    #[test]
    fn growth_window_error_names_requirement() {
        // A sparse front followed by density forces climbing the ladder.
        let a = GroundSet::new([8u64].into_iter().chain(14..=16).chain(24..=32).chain(37..=64), 64).unwrap();
        match growth_index(&a, 2, Ratio::new(1, 10), 8) {
            Err(Error::WindowExceeded { requested, window: 64 }) => assert!(requested > 64),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn threshold_and_ratio_parsing() {
        assert_eq!(default_popularity_threshold(2, 0.5).unwrap(), 72);
        assert_eq!(parse_ratio("1/2").unwrap(), Ratio::new(1, 2));
        assert_eq!(parse_ratio("0.25").unwrap(), Ratio::new(1, 4));
        assert_eq!(parse_ratio("3").unwrap(), Ratio::new(3, 1));
        assert!(parse_ratio("1/0").is_err());
        assert!(parse_ratio("x").is_err());
    }

    #[test]
    fn exports() {
        let p = rep_counts(&vec![set(&[0, 1], 1); 2]).unwrap();
        assert_eq!(p.to_csv(), "x,count\n0,1\n1,2\n2,1\n");
        assert_eq!(exact(1 << 60), json!("1152921504606846976"));
        assert_eq!(p.to_json()["counts"][1], json!([1, 2]));
    }

    #[test]
    fn geometric_grid_shape() {
        let g = geometric_grid(1, 1000, 4);
        assert_eq!(g, vec![1, 10, 100, 1000]);
        assert_eq!(geometric_grid(5, 5, 3), vec![5]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb(w: u64) -> impl Strategy<Value = GroundSet> {
            proptest::collection::btree_set(0..=w, 1..25).prop_map(move |s| GroundSet::new(s, w).unwrap())
        }

        proptest! {
            #[test]
            fn counts_match_enumeration(a in arb(60), b in arb(60), c in arb(60)) {
                let sets = [a, b, c];
                let p = rep_counts(&sets).unwrap();
                let oracle: Vec<(u64, u64)> = tuples_oracle(&sets).into_iter().collect();
                prop_assert_eq!(&p.counts, &oracle);
                prop_assert_eq!(ksum(&sets).unwrap(), p.support());
            }

            #[test]
            fn ksum_commutes_and_associates(a in arb(40), b in arb(40), c in arb(40)) {
                let abc = ksum(&[a.clone(), b.clone(), c.clone()]).unwrap();
                prop_assert_eq!(&abc, &ksum(&[c.clone(), a.clone(), b.clone()]).unwrap());
                let ab = ksum(&[a.clone(), b.clone()]).unwrap();
                let c2 = c.with_window(80).unwrap();
                let abc2 = ksum(&[ab, c2]).unwrap();
                prop_assert_eq!(abc.elements(), abc2.elements());
                prop_assert_eq!(ksum(std::slice::from_ref(&a)).unwrap(), a);
            }

            #[test]
            fn counting_identity(seed in 0u64..1000, k in 2usize..4) {
                let a = generate(&format!("random:0.2:{seed}@300").parse().unwrap()).unwrap();
                if !a.is_empty() {
                    prop_assert!(counting_check(&a, k).unwrap());
                }
            }

            #[test]
            fn growth_index_is_least_on_ladder(seed in 0u64..500, m in 1u64..20) {
                let a = generate(&format!("random:0.4:{seed}@5000").parse().unwrap()).unwrap();
                if a.count_le(m) == 0 { return Ok(()); }
                let eps = Ratio::new(1u64, 3);
                if let Ok(g) = growth_index(&a, 2, eps, m) {
                    let holds = |n: u64| 3 * a.count_le(2 * n) <= 7 * a.count_le(n);
                    prop_assert!(holds(g.n));
                    let mut n = m;
                    while n < g.n {
                        prop_assert!(!holds(n));
                        n *= 2;
                    }
                }
            }
        }
    }
}
