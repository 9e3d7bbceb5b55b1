use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use zpattern::classify::{
    classify_spec, emit_report, recheck_str, ClassificationReport, Config, Format, RecheckOutcome, Verdict,
};

fn check(spec: &str) -> ClassificationReport {
    let cfg = Config::default();
    let spec = spec.parse().unwrap();
    let r = classify_spec(&spec, &cfg).unwrap();
    let text = emit_report(std::slice::from_ref(&r), Format::Json).unwrap();
    let again = emit_report(&[classify_spec(&spec, &cfg).unwrap()], Format::Json).unwrap();
    assert_eq!(text, again, "{spec} is not deterministic");
    let outcome = recheck_str(&text, "report").unwrap();
    match r.verdict {
        Verdict::Indeterminate => assert_eq!(outcome, RecheckOutcome::NoCertificate),
        _ => assert_eq!(outcome, RecheckOutcome::Accepted, "{spec}: {:?}", r.verdict),
    }
    r
}

#[test]
fn every_generator_family() {
    let specs = [
        "evens@5000",
        "naturals@3000",
        "poly:1,3@6000",
        "poly:0,0,1@20000",
        "squares@20000",
        "primes@50000",
        "powers:2@1000000",
        "powers:3@1000000",
        "list:0,1,3,7,12,20,30,44,65,80,96@100",
        "mian-chowla@30000",
        "subset-sums:4:5@4096",
        "subset-sums:3:6@5000",
        "subset-sums:5:4@20000",
        "random:0.5:11@4000",
        "random:0.02:12@50000",
    ];
    for s in specs {
        check(s);
    }
}

#[test]
fn hundred_seeded_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut seen = std::collections::BTreeSet::new();
    for i in 0..100 {
        let density = [0.9, 0.5, 0.2, 0.05, 0.01][i % 5] * rng.gen_range(0.5..1.0);
        let window = rng.gen_range(500..4000u64);
        let r = check(&format!("random:{density:.4}:{i}@{window}"));
        seen.insert(r.verdict);
    }
    assert!(seen.len() >= 2, "{seen:?}");
}
