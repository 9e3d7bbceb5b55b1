//! Finite windowed subsets of the naturals, their generators, and the set
//! file format.
//!
//! A [`GroundSet`] always carries an explicit inclusive window `W`: it states
//! what the set looks like on `[0, W]` and nothing beyond. Every operation
//! that would need information past the window refuses with
//! [`Error::WindowExceeded`] instead of guessing.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bitset::Bitset;
use crate::error::{Error, Result};

/// Largest window accepted anywhere in the crate.
pub const MAX_WINDOW: u64 = 1 << 48;

/// Windows up to this size get a dense membership bit-vector; larger ones fall
/// back to binary search over the element list.
pub const DENSE_WINDOW_LIMIT: u64 = 1 << 30;

/// A finite set of naturals inside the window `[0, window]`.
#[derive(Clone)]
pub struct GroundSet {
    elements: Vec<u64>,
    window: u64,
    bits: OnceLock<Option<Bitset>>,
}

impl GroundSet {
    /// Builds a set from arbitrary-order elements. Duplicates and elements
    /// beyond the window are errors.
    pub fn new(elements: impl IntoIterator<Item = u64>, window: u64) -> Result<Self> {
        if window > MAX_WINDOW {
            return Err(Error::WindowTooLarge(window));
        }
        let mut elements: Vec<u64> = elements.into_iter().collect();
        elements.sort_unstable();
        for pair in elements.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::DuplicateElement(pair[0]));
            }
        }
        if let Some(&last) = elements.last() {
            if last > window {
                return Err(Error::ElementOutsideWindow {
                    element: last,
                    window,
                });
            }
        }
        Ok(Self::from_sorted(elements, window))
    }

    /// Like [`GroundSet::new`] but with the window set to the largest element
    /// (or 0 for the empty set).
    pub fn from_elements(elements: impl IntoIterator<Item = u64>) -> Result<Self> {
        let elements: Vec<u64> = elements.into_iter().collect();
        let window = elements.iter().copied().max().unwrap_or(0);
        Self::new(elements, window)
    }

    pub fn empty(window: u64) -> Self {
        Self::from_sorted(Vec::new(), window)
    }

    /// The full interval `[0, window]`.
    pub fn interval(window: u64) -> Self {
        Self::from_sorted((0..=window).collect(), window)
    }

    pub(crate) fn from_sorted(elements: Vec<u64>, window: u64) -> Self {
        debug_assert!(elements.windows(2).all(|p| p[0] < p[1]));
        debug_assert!(elements.last().is_none_or(|&x| x <= window));
        GroundSet {
            elements,
            window,
            bits: OnceLock::new(),
        }
    }

    pub fn elements(&self) -> &[u64] {
        &self.elements
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn min(&self) -> Option<u64> {
        self.elements.first().copied()
    }

    pub fn max(&self) -> Option<u64> {
        self.elements.last().copied()
    }

    fn bits(&self) -> Option<&Bitset> {
        self.bits
            .get_or_init(|| {
                (self.window < DENSE_WINDOW_LIMIT).then(|| {
                    Bitset::from_indices(self.window as usize + 1, self.elements.iter().copied())
                })
            })
            .as_ref()
    }

    /// Dense indicator of the set over `[0, window]`, when the window is small
    /// enough to hold one.
    pub fn indicator(&self) -> Option<&Bitset> {
        self.bits()
    }

    /// Membership. Points beyond the window report `false`; callers that must
    /// distinguish "absent" from "unknown" check the window first.
    pub fn contains(&self, x: u64) -> bool {
        if x > self.window {
            return false;
        }
        match self.bits() {
            Some(b) => b.contains(x as usize),
            None => self.elements.binary_search(&x).is_ok(),
        }
    }

    /// Membership for a signed query; negatives are never members.
    pub fn contains_signed(&self, x: i64) -> bool {
        x >= 0 && self.contains(x as u64)
    }

    /// `|A ∩ [0, n]|`.
    pub fn count_le(&self, n: u64) -> usize {
        self.elements.partition_point(|&a| a <= n)
    }

    /// Largest element strictly below `y`.
    pub fn pred(&self, y: u64) -> Option<u64> {
        let i = self.elements.partition_point(|&a| a < y);
        i.checked_sub(1).map(|i| self.elements[i])
    }

    /// Smallest element strictly above `y`.
    pub fn succ(&self, y: u64) -> Option<u64> {
        let i = self.elements.partition_point(|&a| a <= y);
        self.elements.get(i).copied()
    }

    /// `A ∩ [0, n]` with the window set to `n`.
    pub fn truncate(&self, n: u64) -> Result<GroundSet> {
        if n > self.window {
            return Err(Error::WindowExceeded {
                requested: n,
                window: self.window,
            });
        }
        let cut = self.count_le(n);
        Ok(Self::from_sorted(self.elements[..cut].to_vec(), n))
    }

    /// The same elements viewed in a larger window.
    pub fn with_window(&self, window: u64) -> Result<GroundSet> {
        if window < self.max().unwrap_or(0) {
            return Err(Error::ElementOutsideWindow {
                element: self.max().unwrap_or(0),
                window,
            });
        }
        if window > MAX_WINDOW {
            return Err(Error::WindowTooLarge(window));
        }
        Ok(Self::from_sorted(self.elements.clone(), window))
    }

    pub fn is_subset_of(&self, other: &GroundSet) -> bool {
        self.elements.iter().all(|&x| other.contains(x))
    }

    /// Elements in `[lo, hi]`.
    pub fn range(&self, lo: u64, hi: u64) -> &[u64] {
        let a = self.elements.partition_point(|&x| x < lo);
        let b = self.elements.partition_point(|&x| x <= hi);
        if a >= b {
            &[]
        } else {
            &self.elements[a..b]
        }
    }
}

impl PartialEq for GroundSet {
    fn eq(&self, other: &Self) -> bool {
        self.window == other.window && self.elements == other.elements
    }
}

impl Eq for GroundSet {}

impl fmt::Debug for GroundSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroundSet(W={}, ", self.window)?;
        if self.elements.len() <= 16 {
            write!(f, "{:?})", self.elements)
        } else {
            write!(
                f,
                "{:?}.. {} elements)",
                &self.elements[..16],
                self.elements.len()
            )
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GroundSetRepr {
    window: u64,
    elements: Vec<u64>,
}

impl Serialize for GroundSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GroundSetRepr {
            window: self.window,
            elements: self.elements.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroundSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = GroundSetRepr::deserialize(d)?;
        GroundSet::new(r.elements, r.window).map_err(serde::de::Error::custom)
    }
}

/// What to generate.
#[derive(Clone, Debug, PartialEq)]
pub enum SetKind {
    Explicit(Vec<u64>),
    Primes,
    Squares,
    Powers { base: u64 },
    /// Values `p(0), p(1), ...` of an integer polynomial, coefficients
    /// constant term first.
    Polynomial(Vec<i64>),
    /// Each point of `[0, W]` kept independently with probability `density`,
    /// drawn from ChaCha8 seeded by `seed` (`ChaCha8Rng::seed_from_u64`).
    Random { density: f64, seed: u64 },
    /// Greedy Sidon sequence starting at 1.
    MianChowla,
    /// `{ Σ_{k∈s} base^k : s ⊆ [0, depth] }`.
    SubsetSums { base: u64, depth: u32 },
    File(String),
}

/// A generator description plus the window it is evaluated on. Explicit lists
/// and files may leave the window open; it then defaults to the data.
#[derive(Clone, Debug, PartialEq)]
pub struct SetSpec {
    pub kind: SetKind,
    pub window: Option<u64>,
}

impl SetSpec {
    pub fn new(kind: SetKind, window: u64) -> Self {
        SetSpec {
            kind,
            window: Some(window),
        }
    }

    /// Seed of a random spec, if any.
    pub fn seed(&self) -> Option<u64> {
        match self.kind {
            SetKind::Random { seed, .. } => Some(seed),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::MalformedSpec {
            spec: self.kind.to_string(),
            reason: reason.into(),
        };
        if let Some(w) = self.window {
            if w > MAX_WINDOW {
                return Err(Error::WindowTooLarge(w));
            }
        }
        match &self.kind {
            SetKind::Explicit(_) | SetKind::File(_) => {}
            _ if self.window.is_none() => return Err(bad("a window is required")),
            _ => {}
        }
        match &self.kind {
            SetKind::Powers { base } | SetKind::SubsetSums { base, .. } if *base < 2 => {
                Err(bad("base must be at least 2"))
            }
            SetKind::Random { density, .. } if !(*density > 0.0 && *density <= 1.0) => {
                Err(bad("density must lie in (0, 1]"))
            }
            SetKind::Polynomial(c) if c.is_empty() => Err(bad("no coefficients")),
            SetKind::Polynomial(c) => {
                let lead = c.iter().rposition(|&x| x != 0);
                match lead {
                    Some(i) if i > 0 && c[i] < 0 => Err(bad("leading coefficient must be positive")),
                    _ => Ok(()),
                }
            }
            SetKind::SubsetSums { depth, .. } if *depth > 47 => Err(bad("depth must be at most 47")),
            SetKind::Explicit(_) | SetKind::File(_) => Ok(()),
            _ if self.window.is_none() => Err(bad("a window is required")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join<T: ToString>(xs: &[T]) -> String {
            xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        match self {
            SetKind::Explicit(xs) => write!(f, "list:{}", join(xs)),
            SetKind::Primes => f.write_str("primes"),
            SetKind::Squares => f.write_str("squares"),
            SetKind::Powers { base } => write!(f, "powers:{base}"),
            SetKind::Polynomial(c) => write!(f, "poly:{}", join(c)),
            SetKind::Random { density, seed } => write!(f, "random:{density}:{seed}"),
            SetKind::MianChowla => f.write_str("mian-chowla"),
            SetKind::SubsetSums { base, depth } => write!(f, "subset-sums:{base}:{depth}"),
            SetKind::File(p) => write!(f, "file:{p}"),
        }
    }
}

impl FromStr for SetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |reason: &str| Error::MalformedSpec {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        let args = || -> Vec<&str> { rest.map(|r| r.split(':').collect()).unwrap_or_default() };
        let num = |t: &str| -> Result<u64> { t.trim().parse().map_err(|_| bad("expected a natural number")) };
        let list = |r: &str| -> Result<Vec<u64>> {
            r.split(',').filter(|t| !t.trim().is_empty()).map(num).collect()
        };
        let no_args = |k: SetKind| if rest.is_some() { Err(bad("takes no arguments")) } else { Ok(k) };
        match head {
            "list" => list(rest.unwrap_or("")).map(SetKind::Explicit),
            "primes" => no_args(SetKind::Primes),
            "squares" => no_args(SetKind::Squares),
            "mian-chowla" => no_args(SetKind::MianChowla),
            "evens" => no_args(SetKind::Polynomial(vec![0, 2])),
            "naturals" => no_args(SetKind::Polynomial(vec![0, 1])),
            "powers" => match args()[..] {
                [q] => Ok(SetKind::Powers { base: num(q)? }),
                _ => Err(bad("usage powers:Q")),
            },
            "poly" => {
                let coeffs = rest
                    .ok_or_else(|| bad("usage poly:c0,c1,..."))?
                    .split(',')
                    .map(|t| t.trim().parse::<i64>().map_err(|_| bad("expected an integer coefficient")))
                    .collect::<Result<Vec<_>>>()?;
                Ok(SetKind::Polynomial(coeffs))
            }
            "random" => match args()[..] {
                [d, seed] => Ok(SetKind::Random {
                    density: d.trim().parse().map_err(|_| bad("expected a density"))?,
                    seed: num(seed)?,
                }),
                _ => Err(bad("usage random:DENSITY:SEED")),
            },
            "subset-sums" => match args()[..] {
                [q, n] => Ok(SetKind::SubsetSums {
                    base: num(q)?,
                    depth: num(n)?.try_into().map_err(|_| bad("depth too large"))?,
                }),
                _ => Err(bad("usage subset-sums:Q:N")),
            },
            "file" => Ok(SetKind::File(rest.ok_or_else(|| bad("usage file:PATH"))?.to_string())),
            _ => Err(bad("unknown kind")),
        }
    }
}

impl fmt::Display for SetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.window {
            Some(w) => write!(f, "{}@{}", self.kind, w),
            None => write!(f, "{}", self.kind),
        }
    }
}

impl FromStr for SetSpec {
    type Err = Error;

    /// `KIND[@WINDOW]`, e.g. `subset-sums:4:12@67108864`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, window) = match s.rsplit_once('@') {
            Some((k, w)) => (
                k,
                Some(w.trim().parse().map_err(|_| Error::MalformedSpec {
                    spec: s.into(),
                    reason: "bad window".into(),
                })?),
            ),
            None => (s, None),
        };
        Ok(SetSpec {
            kind: kind.parse()?,
            window,
        })
    }
}

impl Serialize for SetSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SetSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Materializes a spec. Deterministic: equal specs give equal sets.
pub fn generate(spec: &SetSpec) -> Result<GroundSet> {
    spec.validate()?;
    let w = spec.window.unwrap_or(0);
    let set = match &spec.kind {
        SetKind::Explicit(xs) => {
            let window = spec.window.unwrap_or_else(|| xs.iter().copied().max().unwrap_or(0));
            return GroundSet::new(xs.iter().copied(), window);
        }
        SetKind::File(path) => {
            let from_file = parse_set_file(path)?;
            return match spec.window {
                None => Ok(from_file),
                Some(w) if w >= from_file.window() => from_file.with_window(w),
                Some(w) => from_file.truncate(w),
            };
        }
        SetKind::Primes => primes_upto(w),
        SetKind::Squares => (0u64..).map(|n| n * n).take_while(|&x| x <= w).collect(),
        SetKind::Powers { base } => {
            let mut out = Vec::new();
            let mut p = 1u64;
            while p <= w {
                out.push(p);
                match p.checked_mul(*base) {
                    Some(next) => p = next,
                    None => break,
                }
            }
            out
        }
        SetKind::Polynomial(coeffs) => polynomial_values(coeffs, w)?,
        SetKind::Random { density, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..=w).filter(|_| rng.gen_bool(*density)).collect()
        }
        SetKind::MianChowla => mian_chowla(w),
        SetKind::SubsetSums { base, depth } => subset_sums(*base, *depth, w),
    };
    Ok(GroundSet::from_sorted(set, w))
}

fn primes_upto(w: u64) -> Vec<u64> {
    if w < 2 {
        return Vec::new();
    }
    let n = w as usize;
    let mut composite = vec![false; n + 1];
    let mut i = 2usize;
    while i * i <= n {
        if !composite[i] {
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
        i += 1;
    }
    (2..=n).filter(|&i| !composite[i]).map(|i| i as u64).collect()
}

fn polynomial_values(coeffs: &[i64], w: u64) -> Result<Vec<u64>> {
    let deg = coeffs.iter().rposition(|&c| c != 0);
    let Some(deg) = deg else {
        return Ok(vec![0]);
    };
    if deg == 0 {
        let c = coeffs[0];
        return Ok(if c >= 0 && (c as u64) <= w { vec![c as u64] } else { vec![] });
    }
    let lead = coeffs[deg] as i128;
    // Past this point the derivative is positive (Cauchy bound on its roots).
    let monotone_from: i128 = 1 + (0..deg)
        .map(|i| ((i as i128 + 1) * coeffs[i + 1] as i128).abs() / (deg as i128 * lead))
        .max()
        .unwrap_or(0);
    let eval = |n: i128| -> Option<i128> {
        coeffs[..=deg]
            .iter()
            .rev()
            .try_fold(0i128, |acc, &c| acc.checked_mul(n)?.checked_add(c as i128))
    };
    let mut out = Vec::new();
    let mut n: i128 = 0;
    loop {
        let v = eval(n);
        match v {
            Some(v) if v >= 0 && v <= w as i128 => out.push(v as u64),
            Some(v) if v > w as i128 && n > monotone_from => break,
            None => break,
            _ => {}
        }
        n += 1;
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Greedy Sidon sequence: accept the smallest next integer that keeps every
/// pairwise sum (with repetition) distinct, equivalently every positive
/// difference distinct.
fn mian_chowla(w: u64) -> Vec<u64> {
    if w < 1 {
        return Vec::new();
    }
    let mut seq = vec![1u64];
    let mut diffs = Bitset::new(w as usize + 1);
    'cand: for c in 2..=w {
        for &a in &seq {
            if diffs.contains((c - a) as usize) {
                continue 'cand;
            }
        }
        for &a in &seq {
            diffs.insert((c - a) as usize);
        }
        seq.push(c);
    }
    seq
}

fn subset_sums(base: u64, depth: u32, w: u64) -> Vec<u64> {
    let mut sums = vec![0u64];
    let mut p: Option<u64> = Some(1);
    for _ in 0..=depth {
        let Some(pk) = p else { break };
        let shifted: Vec<u64> = sums.iter().filter_map(|&s| s.checked_add(pk)).collect();
        sums.extend(shifted);
        p = pk.checked_mul(base);
    }
    sums.retain(|&s| s <= w);
    sums.sort_unstable();
    sums.dedup();
    sums
}

/// Reads the set file format: one natural per line, any order, `#` comments,
/// optional first line `#window W`.
pub fn parse_set_file(path: impl AsRef<Path>) -> Result<GroundSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_set_text(&text, &path.display().to_string())
}

/// Parses set-file text; `origin` names the source in error messages.
pub fn parse_set_text(text: &str, origin: &str) -> Result<GroundSet> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut header_window: Option<u64> = None;
    let mut seen: std::collections::HashMap<u64, usize> = std::collections::HashMap::new();
    let mut elements = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if lineno == 1 {
                if let Some(w) = comment.trim().strip_prefix("window") {
                    let w = w.trim();
                    header_window = Some(
                        w.parse()
                            .map_err(|_| err(lineno, format!("bad window `{w}`")))?,
                    );
                }
            }
            continue;
        }
        let value: i128 = line
            .parse()
            .map_err(|_| err(lineno, format!("not an integer: `{line}`")))?;
        if value < 0 {
            return Err(err(lineno, format!("negative element {value}")));
        }
        if value > MAX_WINDOW as i128 {
            return Err(err(lineno, format!("element {value} exceeds 2^48")));
        }
        let value = value as u64;
        if let Some(first) = seen.insert(value, lineno) {
            return Err(err(
                lineno,
                format!("duplicate element {value} (first seen at line {first})"),
            ));
        }
        elements.push(value);
    }
    let max = elements.iter().copied().max().unwrap_or(0);
    let window = header_window.map_or(max, |w| w.max(max));
    GroundSet::new(elements, window)
}

/// Writes a set in the file format, with a `#window` header.
pub fn format_set_file(set: &GroundSet) -> String {
    let mut out = format!("#window {}\n", set.window());
    for x in set.elements() {
        out.push_str(&x.to_string());
        out.push('\n');
    }
    out
}

/// `⌊log₂ W⌋`, the default growth floor and scan margin for a window.
pub fn growth_floor(window: u64) -> u64 {
    if window == 0 {
        0
    } else {
        63 - window.leading_zeros() as u64
    }
}
