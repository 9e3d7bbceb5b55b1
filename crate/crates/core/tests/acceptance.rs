//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any fails.

use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zpattern::classify::{classify_spec, emit_report, recheck_str, Config, Evidence, Format, RecheckOutcome, Verdict};
use zpattern::gaps::{verify_shatter, IpOutcome, IpSearch, IpWitness};
use zpattern::hypergraph::{
    find_complete_kpartite, kst_edge_threshold, markov_bound_holds, unpopular_blocks, BlocksParams,
    DenseHypergraph, Extraction, DEFAULT_NODE_BUDGET,
};
use zpattern::patterns::{
    depth2_witness, depthk_witness, verify_bounded_error, verify_ict, Depth2Outcome, FinitePattern, Predicate,
};
use zpattern::sumset::{
    default_popularity_threshold, geometric_grid, growth_index, kfold, rep_counts, tupling_profile,
};
use zpattern::{generate, GroundSet};

type Outcome = Result<String, String>;
type Criterion = (&'static str, f64, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    }};
}

fn gen(spec: &str) -> GroundSet {
    generate(&spec.parse().unwrap()).unwrap()
}

fn random_set(rng: &mut ChaCha8Rng, window: u64, size: usize) -> GroundSet {
    let mut xs = std::collections::BTreeSet::new();
    while xs.len() < size.min(window as usize + 1) {
        xs.insert(rng.gen_range(0..=window));
    }
    GroundSet::new(xs, window).unwrap()
}

fn brute_counts(a: &[u64], k: usize) -> HashMap<u64, u64> {
    let mut out = HashMap::new();
    let mut idx = vec![0usize; k];
    if a.is_empty() {
        return out;
    }
    loop {
        *out.entry(idx.iter().map(|&i| a[i]).sum()).or_insert(0) += 1;
        let mut j = 0;
        loop {
            if j == k {
                return out;
            }
            idx[j] += 1;
            if idx[j] < a.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// `r^k` by repeated convolution of count maps with `A`.
fn convolved_counts(a: &[u64], k: usize) -> HashMap<u64, u64> {
    let mut acc: HashMap<u64, u64> = HashMap::from([(0, 1)]);
    for _ in 0..k {
        let mut next = HashMap::new();
        for (&s, &c) in &acc {
            for &x in a {
                *next.entry(s + x).or_insert(0) += c;
            }
        }
        acc = next;
    }
    acc
}

fn counting_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut brute = 0;
    for i in 0..200 {
        let k = 2 + i % 2;
        let size = rng.gen_range(1..=500);
        let window = rng.gen_range(size as u64..=8 * size as u64 + 10);
        let a = random_set(&mut rng, window, size);
        let p = rep_counts(&vec![a.clone(); k]).map_err(|e| e.to_string())?;
        ensure!(p.total() == (a.len() as u128).pow(k as u32), "set {i}: total {} ≠ |A|^{k}", p.total());
        if a.len() <= 100 {
            brute += 1;
            let oracle = brute_counts(a.elements(), k);
            ensure!(oracle.len() == p.counts.len(), "set {i}: support size differs");
            for &(x, c) in &p.counts {
                ensure!(oracle.get(&x) == Some(&c), "set {i}: r({x}) = {c}, brute force {:?}", oracle.get(&x));
            }
        }
    }
    Ok(format!("200 sets, {brute} brute-forced"))
}

fn sidon_doubling() -> Outcome {
    let a = gen("mian-chowla@1000000");
    let grid = geometric_grid(1, 1_000_000, 24);
    let profile = tupling_profile(&a, 2, &grid).map_err(|e| e.to_string())?;
    for (i, &n) in grid.iter().enumerate() {
        let an = a.truncate(n).unwrap();
        let s = an.len() as u64;
        let sum = kfold(&an, 2).unwrap();
        ensure!(sum.len() as u64 == s * (s + 1) / 2, "n = {n}: |2A| = {}, expected {}", sum.len(), s * (s + 1) / 2);
        let r = rep_counts(&[an.clone(), an.clone()]).unwrap();
        ensure!(r.max_count() <= 2, "n = {n}: max r² = {}", r.max_count());
        let ratio = profile.ratios[i].ok_or(format!("n = {n}: empty prefix"))?;
        ensure!(ratio >= 0.5, "n = {n}: ratio {ratio}");
    }
    Ok(format!("|A| = {}, {} grid points", a.len(), grid.len()))
}

fn ip_end_to_end() -> Outcome {
    let mut checks = 0;
    for n in 2..=6u32 {
        let w = 4u64.pow(n + 2);
        let a = gen(&format!("subset-sums:4:{}@{w}", n + 1));
        let IpOutcome::Witness(wit) = IpSearch::new(w, n as usize).run(&a).unwrap() else {
            return Err(format!("N = {n}: recursion failed"));
        };
        let d = &wit.gap_seq;
        ensure!(d.len() == n as usize + 1, "N = {n}: {} gaps", d.len());
        for j in 1..d.len() {
            ensure!(d[j] > 2 * d[j - 1], "N = {n}: d_{j} ≤ 2 d_{}", j - 1);
            ensure!(d[j] > d[..j].iter().sum::<u64>(), "N = {n}: d_{j} not above the prefix sum");
        }
        let r = verify_shatter(&wit, &a).unwrap();
        let expected = (1usize << (n + 1)) * (n as usize + 1);
        ensure!(r.holds && r.checks == expected, "N = {n}: holds {} with {} checks", r.holds, r.checks);
        checks += r.checks;

        // Base-4 digits: b_s − d_m ∈ A iff digit m of b_s is 1 iff m ∈ s.
        let hand = IpWitness::from_gaps(0, (0..=n).map(|j| 4u64.pow(j)).collect()).unwrap();
        ensure!(verify_shatter(&hand, &a).unwrap().holds, "N = {n}: hand-built witness rejected");
        for (&mask, &b) in &hand.family {
            for m in 0..=n {
                let digit_oracle = (b / 4u64.pow(m)) % 4 == 1;
                ensure!(digit_oracle == (mask >> m & 1 == 1), "N = {n}: digit oracle disagrees at s = {mask}");
                let member = b >= 4u64.pow(m) && a.contains(b - 4u64.pow(m));
                ensure!(member == digit_oracle, "N = {n}: membership disagrees at s = {mask}, m = {m}");
            }
        }
    }
    Ok(format!("N = 2..6, {checks} shatter checks"))
}

fn markov_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut combos = 0;
    let named = ["mian-chowla@4000", "squares@4000", "primes@4000", "evens@4000", "powers:2@4000"];
    let mut sets: Vec<GroundSet> = named.iter().map(|s| gen(s)).collect();
    for _ in 0..5 {
        let size = rng.gen_range(20..200);
        sets.push(random_set(&mut rng, 4000, size));
    }
    for a in &sets {
        for k in [2usize, 3] {
            for n in [40u64, 300] {
                for kk in [2u64, 5, 17] {
                    let big = a.truncate(k as u64 * n).unwrap();
                    let oracle = convolved_counts(big.elements(), k).values().filter(|&&c| c >= kk).count() as u128;
                    let bound_ok = oracle * kk as u128 <= (big.len() as u128).pow(k as u32);
                    let lib = markov_bound_holds(a, n, k, kk).map_err(|e| e.to_string())?;
                    ensure!(bound_ok && lib, "k = {k}, n = {n}, K = {kk}: |D| = {oracle}");
                    combos += 1;
                }
            }
        }
    }
    Ok(format!("{combos} combinations"))
}

fn has_c4(adj: &[Vec<bool>]) -> bool {
    for i in 0..adj.len() {
        for j in i + 1..adj.len() {
            if adj[i].iter().zip(&adj[j]).filter(|(x, y)| **x && **y).count() >= 2 {
                return true;
            }
        }
    }
    false
}

fn kst_oracle() -> Outcome {
    let n = 32usize;
    let threshold = kst_edge_threshold(2, 2, n as u64, 1.0).unwrap();
    ensure!(threshold == 182, "threshold {threshold}");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut found, mut dense) = (0, 0);
    for g in 0..50 {
        let p = [0.02, 0.04, 0.06, 0.1, 0.2][g % 5] * rng.gen_range(0.8..1.2);
        let adj: Vec<Vec<bool>> = (0..n).map(|_| (0..n).map(|_| rng.gen_bool(p)).collect()).collect();
        let edges: Vec<Vec<usize>> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| adj[i][j])
            .map(|(i, j)| vec![i, j])
            .collect();
        let h = DenseHypergraph::from_edges(vec![n, n], &edges).unwrap();
        let r = find_complete_kpartite(&h, 2, DEFAULT_NODE_BUDGET).unwrap();
        let expected = has_c4(&adj);
        match &r.outcome {
            Extraction::Found(b) => {
                ensure!(expected, "graph {g}: found a K_2,2 the oracle does not see");
                ensure!(b[0].iter().all(|&i| b[1].iter().all(|&j| adj[i][j])), "graph {g}: blocks are not complete");
                found += 1;
            }
            Extraction::Absent => ensure!(!expected, "graph {g}: missed a 4-cycle"),
            Extraction::Indeterminate => return Err(format!("graph {g}: budget exhausted")),
        }
        if edges.len() as u128 > threshold {
            dense += 1;
            ensure!(matches!(r.outcome, Extraction::Found(_)), "graph {g}: {} edges but no K_2,2", edges.len());
        }
    }
    let c6: Vec<Vec<usize>> = (0..3).flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| vec![i, j])).collect();
    let h = DenseHypergraph::from_edges(vec![3, 3], &c6).unwrap();
    ensure!(find_complete_kpartite(&h, 2, 1000).unwrap().outcome == Extraction::Absent, "C6 not absent");
    Ok(format!("50 graphs, {found} with K_2,2, {dense} above 182 edges"))
}

fn growth_oracle(a: &GroundSet, k: u64, eps: Ratio<u64>, m: u64, cap: u32) -> Result<(u64, u32), String> {
    let count = |n: u64| a.elements().iter().filter(|&&x| x <= n).count() as u64;
    let (p, q) = (*eps.numer(), *eps.denom());
    let mut n = m;
    for r in 0..=cap {
        if q * count(k * n) <= (k * q + p) * count(n) {
            return Ok((n, r));
        }
        n *= k;
    }
    Err("no rung within the cap".into())
}

/// Least `r` with `((k+ε)/k)^r·|A_{≤m}| > m`.
fn cap_oracle(b: u64, m: u64, k: u64, eps: Ratio<u64>) -> u32 {
    let (p, q) = (*eps.numer(), *eps.denom());
    let (mut lhs, mut rhs) = (BigUint::from(b), BigUint::from(m));
    let mut r = 0;
    while lhs <= rhs {
        lhs *= k * q + p;
        rhs *= k * q;
        r += 1;
    }
    r
}

fn growth_index_ladder() -> Outcome {
    let w = 1u64 << 24;
    let mut sets: Vec<(String, GroundSet)> = [
        "evens", "naturals", "poly:1,3", "squares", "primes", "powers:2", "powers:3", "mian-chowla",
        "subset-sums:4:11", "subset-sums:3:14", "random:0.3:1",
    ]
    .iter()
    .map(|s| {
        let window = if s.starts_with("primes") || s.starts_with("mian") { 1 << 20 } else { w };
        (s.to_string(), gen(&format!("{s}@{window}")))
    })
    .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..50 {
        let density = rng.gen_range(0.05..1.0);
        sets.push((format!("random set {i}"), gen(&format!("random:{density:.3}:{}@{}", 100 + i, 1 << 18))));
    }
    let (mut runs, mut climbed) = (0, 0);
    for (name, a) in &sets {
        for (k, eps) in [(2u64, Ratio::new(1, 2)), (3, Ratio::new(1, 2)), (2, Ratio::new(1, 4))] {
            // Largest m (a power of k times the least positive element) whose
            // proof ladder k^{r*+1}·m still fits in the window.
            let m0 = a.elements().iter().copied().find(|&x| x >= 1).ok_or(format!("{name}: no positive element"))?;
            let mut m = m0;
            let fits = |m: u64| {
                let cap = cap_oracle(a.count_le(m) as u64, m, k, eps);
                (k as u128).checked_pow(cap + 1).and_then(|p| p.checked_mul(m as u128)).is_some_and(|v| v <= a.window() as u128)
            };
            if !fits(m) {
                continue;
            }
            while m * k <= a.window() && fits(m * k) {
                m *= k;
            }
            let cap = cap_oracle(a.count_le(m) as u64, m, k, eps);
            let g = growth_index(a, k, eps, m).map_err(|e| format!("{name}, m = {m}: {e}"))?;
            ensure!(g.cap == Some(cap), "{name}: cap {:?}, oracle {cap}", g.cap);
            ensure!(g.rung <= cap, "{name}: rung {} above cap {cap}", g.rung);
            let (n, r) = growth_oracle(a, k, eps, m, cap).map_err(|e| format!("{name}: {e}"))?;
            ensure!((n, r) == (g.n, g.rung), "{name}: got ({}, {}), oracle ({n}, {r})", g.n, g.rung);
            runs += 1;
            climbed += (g.rung > 0) as usize;
        }
    }
    // Half-dense prefix: evens up to 64, then every integer. From m = 64 the
    // first rung grows by 3/2·m > 5/2·|A_{≤m}|, so the ladder must climb.
    let prefix = GroundSet::new((0..=64).step_by(2).chain(65..=2048), 2048).unwrap();
    let eps = Ratio::new(1, 2);
    let cap = cap_oracle(prefix.count_le(64) as u64, 64, 2, eps);
    let g = growth_index(&prefix, 2, eps, 64).map_err(|e| e.to_string())?;
    ensure!(g.cap == Some(cap) && g.rung >= 1 && g.rung <= cap, "half-dense prefix: {g:?}, cap {cap}");
    ensure!(growth_oracle(&prefix, 2, eps, 64, cap)? == (g.n, g.rung), "half-dense prefix disagrees with the oracle");
    runs += 1;
    climbed += 1;
    ensure!(runs >= 3 * 50, "only {runs} runs fit their window");
    Ok(format!("{runs} runs over {} sets, {climbed} above rung 0", sets.len()))
}

fn crt(moduli: &[u64], length: usize) -> FinitePattern {
    let rows = moduli.iter().map(|&q| (0..length as u64).map(|r| Predicate::congruence(q, r)).collect()).collect();
    FinitePattern::new(BTreeMap::new(), rows).unwrap()
}

fn pattern_verifiers() -> Outcome {
    for (moduli, len) in [(vec![2, 3], 2), (vec![5, 7], 4)] {
        let p = crt(&moduli, len);
        let r = verify_ict(&p, p.default_domain_cap()).unwrap();
        ensure!(r.holds, "CRT {moduli:?} fails");
        let mut bad = p.clone();
        bad.rows[1][1] = bad.rows[1][0].clone();
        ensure!(!verify_ict(&bad, bad.default_domain_cap()).unwrap().holds, "tampered CRT {moduli:?} passes");
    }

    let a = GroundSet::new([0, 100, 101, 300, 301, 302], 400).unwrap();
    let phi = GroundSet::new((0..10).map(|i| 10 * i), 90).unwrap();
    let Depth2Outcome::Witness { mut certificate, .. } = depth2_witness(&a, &phi, 3).unwrap() else {
        return Err("no depth-2 witness".into());
    };
    ensure!(verify_ict(&certificate.pattern, certificate.domain_cap).unwrap().holds, "depth-2 pattern fails");
    *certificate.witnesses.get_mut("0,0").unwrap() += 1;
    ensure!(certificate.check_witnesses(0).is_err(), "tampered depth-2 witness accepted");

    let mc = gen("mian-chowla@100000");
    let grid = geometric_grid(1, 100_000, 16);
    let liminf = tupling_profile(&mc, 2, &grid).unwrap().liminf_estimate.unwrap();
    let kk = default_popularity_threshold(2, liminf).unwrap();
    let params = BlocksParams { k: 2, popularity: kk, t: 2, c: 1.0, budget: DEFAULT_NODE_BUDGET };
    let block_grid: Vec<u64> = grid.iter().copied().filter(|&n| 2 * n <= 100_000).collect();
    let blocks = unpopular_blocks(&mc, &params, &block_grid).unwrap().found.ok_or("no blocks")?;
    let mut cert = depthk_witness(&blocks, &mc).map_err(|e| e.to_string())?;
    let c = (kk - 1) as usize;
    ensure!(verify_bounded_error(&cert.pattern, c, cert.domain_cap).unwrap().holds, "depth-k pattern fails at C = {c}");
    cert.check_witnesses(c).map_err(|e| format!("depth-k witnesses: {e}"))?;
    // Swap the witnesses of the first and last η.
    let (first, last) = (cert.witnesses.keys().next().unwrap().clone(), cert.witnesses.keys().last().unwrap().clone());
    let (x, y) = (cert.witnesses[&first], cert.witnesses[&last]);
    cert.witnesses.insert(first, y);
    cert.witnesses.insert(last, x);
    ensure!(cert.check_witnesses(c).is_err(), "swapped depth-k witnesses accepted");

    let interval = BTreeMap::from([("I".to_string(), GroundSet::interval(10))]);
    let stacked = FinitePattern::new(interval, vec![vec![Predicate::translate("I", 0); 3]]).unwrap();
    ensure!(!verify_bounded_error(&stacked, 1, 20).unwrap().holds, "stacked intervals pass at C = 1");
    Ok(format!("CRT 2x2 and 2x4, depth-2, depth-k with K = {kk}"))
}

fn classifier_end_to_end() -> Outcome {
    let cases = [
        ("evens@10000", Some(Verdict::SyndeticOrderDefinable)),
        ("subset-sums:4:5@4096", Some(Verdict::IpWitness)),
        ("mian-chowla@100000", Some(Verdict::LargeTuplingPattern)),
        ("primes@1000000", None),
        ("powers:2@1048576", None),
    ];
    let cfg = Config::default();
    let golden = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut summary = Vec::new();
    for (spec, expected) in cases {
        let spec_v = spec.parse().unwrap();
        let r = classify_spec(&spec_v, &cfg).map_err(|e| format!("{spec}: {e}"))?;
        if let Some(v) = expected {
            ensure!(r.verdict == v, "{spec}: {:?}, expected {v:?}", r.verdict);
        }
        let text = emit_report(std::slice::from_ref(&r), Format::Json).unwrap();
        let again = emit_report(&[classify_spec(&spec_v, &cfg).unwrap()], Format::Json).unwrap();
        ensure!(text == again, "{spec}: reports differ between runs");
        let outcome = recheck_str(&text, spec).map_err(|e| e.to_string())?;
        match r.evidence {
            Evidence::None => ensure!(outcome == RecheckOutcome::NoCertificate, "{spec}: {outcome:?}"),
            _ => ensure!(outcome == RecheckOutcome::Accepted, "{spec}: {outcome:?}"),
        }
        let name = match spec {
            "evens@10000" => Some("evens"),
            "subset-sums:4:5@4096" => Some("subset_sums_4_5"),
            "mian-chowla@100000" => Some("mian_chowla"),
            _ => None,
        };
        if let Some(stored) = name.and_then(|n| std::fs::read_to_string(golden.join(format!("{n}.json"))).ok()) {
            ensure!(stored == text, "{spec}: differs from the golden report");
        }
        summary.push(format!("{}={}", spec.split('@').next().unwrap(), r.verdict.as_str()));
    }
    Ok(summary.join(" "))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("counting identity", 10.0, counting_identity),
        ("Sidon doubling", 5.0, sidon_doubling),
        ("IP witness end-to-end", 5.0, ip_end_to_end),
        ("Markov popularity bound", 10.0, markov_bound),
        ("KST extraction oracle", 10.0, kst_oracle),
        ("growth-index ladder", 5.0, growth_index_ladder),
        ("pattern verifiers", 5.0, pattern_verifiers),
        ("classifier determinism and soundness", 60.0, classifier_end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(_) if took > Duration::from_secs_f64(*budget) => Err(format!("over the {budget} s budget")),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name} ({:.2} s; {detail})", i + 1, took.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({:.2} s; {why})", i + 1, took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
