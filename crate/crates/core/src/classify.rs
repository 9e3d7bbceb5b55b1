//! The classification pipeline, its configuration, report emission and the
//! certificate re-checker.
//!
//! Stages run in a fixed order: syndeticity, the IP recursion, the k-tupling
//! branch (profile, unpopular blocks, depth-k pattern), and finally the
//! popular-sum evidence for failure of `∃^∞`-elimination. The first stage that
//! produces a certificate decides the verdict.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gaps::{covers_with_translates, syndetic_bound_with, verify_shatter, IpOutcome, IpSearch, IpWitness};
use crate::hypergraph::{certify_blocks, unpopular_blocks, BlocksCertificate, BlocksParams, DEFAULT_NODE_BUDGET};
use crate::patterns::{depthk_witness, verify_bounded_error, PatternCertificate};
use crate::setcore::{generate, growth_floor, GroundSet, SetKind, SetSpec};
use crate::sumset::{default_popularity_threshold, geometric_grid, kfold, rep_counts, tupling_profile_with};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    SyndeticOrderDefinable,
    IpWitness,
    LargeTuplingPattern,
    ExistsInftyFailureEvidence,
    Indeterminate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::SyndeticOrderDefinable => "SYNDETIC_ORDER_DEFINABLE",
            Verdict::IpWitness => "IP_WITNESS",
            Verdict::LargeTuplingPattern => "LARGE_TUPLING_PATTERN",
            Verdict::ExistsInftyFailureEvidence => "EXISTS_INFTY_FAILURE_EVIDENCE",
            Verdict::Indeterminate => "INDETERMINATE",
        }
    }
}

/// Pipeline parameters. `None` fields are derived from the window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Config {
    pub window: Option<u64>,
    pub margin: Option<u64>,
    pub growth_floor: Option<u64>,
    pub ip_depth: usize,
    pub size_floor: usize,
    pub k: usize,
    /// Tupling constant `c`: the liminf estimate must reach it for the
    /// tupling branch, and all tail ratios must fall below it for the
    /// `∃^∞` branch.
    pub c: f64,
    /// Explicit popularity threshold `K`; derived as `⌈4(k+1)^k / c_meas⌉`
    /// from the measured liminf when absent.
    #[serde(rename = "K")]
    pub popularity: Option<u64>,
    pub t: usize,
    /// KST constant `C(t, k)`.
    pub kst_c: f64,
    pub grid_points: usize,
    pub tail_fraction: f64,
    pub node_budget: u64,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            window: None,
            margin: None,
            growth_floor: None,
            ip_depth: 3,
            size_floor: 4,
            k: 2,
            c: 0.1,
            popularity: None,
            t: 2,
            kst_c: 1.0,
            grid_points: 16,
            tail_fraction: 0.5,
            node_budget: DEFAULT_NODE_BUDGET,
            seed: 0,
        }
    }
}

impl Config {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::pre(format!("config `{key}`: cannot parse `{v}`")))
        }
        let v = value.trim();
        match key.trim() {
            "window" => self.window = Some(num(key, v)?),
            "margin" => self.margin = Some(num(key, v)?),
            "growth_floor" | "growthFloor" => self.growth_floor = Some(num(key, v)?),
            "ip_depth" | "ipDepth" => self.ip_depth = num(key, v)?,
            "size_floor" | "sizeFloor" => self.size_floor = num(key, v)?,
            "k" => self.k = num(key, v)?,
            "c" => self.c = num(key, v)?,
            "K" | "popularity" => {
                self.popularity = if v == "derived" { None } else { Some(num(key, v)?) }
            }
            "t" => self.t = num(key, v)?,
            "kst_c" | "kstC" | "C" => self.kst_c = num(key, v)?,
            "grid_points" | "gridPoints" => self.grid_points = num(key, v)?,
            "tail_fraction" | "tailFraction" => self.tail_fraction = num(key, v)?,
            "node_budget" | "nodeBudget" => self.node_budget = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            other => return Err(Error::pre(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Reads `key=value` lines; `#` starts a comment.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.into(),
                line: i + 1,
                message: "expected key=value".into(),
            })?;
            cfg.set(k, v).map_err(|e| Error::Parse {
                path: origin.into(),
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::pre("k must be at least 2"));
        }
        if self.t < 1 || self.ip_depth < 1 || self.grid_points < 1 {
            return Err(Error::pre("t, ipDepth and gridPoints must be positive"));
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            return Err(Error::pre("c must lie in (0, 1]"));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(Error::pre("tailFraction must lie in (0, 1]"));
        }
        if self.kst_c.is_nan() || self.kst_c <= 0.0 || self.popularity == Some(0) || self.node_budget == 0 {
            return Err(Error::pre("C, K and nodeBudget must be positive"));
        }
        Ok(())
    }

    /// Fills the window-derived fields.
    pub fn resolve(&self, window: u64) -> Config {
        Config {
            window: Some(window),
            margin: Some(self.margin.unwrap_or_else(|| growth_floor(window))),
            growth_floor: Some(self.growth_floor.unwrap_or_else(|| growth_floor(window))),
            ..self.clone()
        }
    }
}

/// Where the analyzed set came from; enough to rebuild it exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub window: u64,
    /// Present for files and explicit sets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<u64>>,
}

impl SetSource {
    pub fn from_spec(spec: &SetSpec, set: &GroundSet) -> Self {
        let embed = matches!(spec.kind, SetKind::File(_) | SetKind::Explicit(_));
        SetSource {
            spec: Some(SetSpec { window: Some(set.window()), ..spec.clone() }.to_string()),
            path: None,
            window: set.window(),
            elements: embed.then(|| set.elements().to_vec()),
        }
    }

    pub fn from_file(path: &str, set: &GroundSet) -> Self {
        SetSource {
            spec: None,
            path: Some(path.into()),
            window: set.window(),
            elements: Some(set.elements().to_vec()),
        }
    }

    /// Rebuilds the set, preferring embedded elements over regeneration.
    pub fn materialize(&self) -> Result<GroundSet> {
        if let Some(els) = &self.elements {
            return GroundSet::new(els.iter().copied(), self.window);
        }
        let spec: SetSpec = self
            .spec
            .as_deref()
            .ok_or_else(|| Error::Certificate("source has neither elements nor a spec".into()))?
            .parse()?;
        let set = generate(&spec)?;
        if set.window() != self.window {
            return Err(Error::Certificate(format!(
                "regenerated window {} differs from recorded {}",
                set.window(),
                self.window
            )));
        }
        Ok(set)
    }

    pub fn label(&self) -> String {
        self.spec.clone().or_else(|| self.path.clone()).unwrap_or_else(|| "<inline>".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopularWitness {
    #[serde(rename = "K")]
    pub popularity: u64,
    pub b: u64,
    pub r: u64,
    /// `⌊r^{1/k}⌋`.
    #[serde(rename = "M")]
    pub m: u64,
    /// `|{x ∈ A : b − x ∈ (k−1)·A}|`.
    #[serde(rename = "psiCount")]
    pub psi_count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyndeticEvidence {
    pub g: u64,
    #[serde(rename = "F")]
    pub translates: Vec<u64>,
    pub m: u64,
    #[serde(rename = "T")]
    pub top: u64,
    pub expression: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpEvidence {
    pub witness: IpWitness,
    pub checks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuplingEvidence {
    pub k: usize,
    pub liminf: f64,
    #[serde(rename = "K")]
    pub popularity: u64,
    pub blocks: BlocksCertificate,
    pub pattern: PatternCertificate,
    #[serde(rename = "boundedError")]
    pub bounded_error: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExistsInftyEvidence {
    pub k: usize,
    #[serde(rename = "tailRatios")]
    pub tail_ratios: Vec<f64>,
    pub c: f64,
    pub schedule: Vec<PopularWitness>,
}

/// Verdict-specific certificate, serialized with a `type` field.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Evidence {
    Syndetic(SyndeticEvidence),
    Ip(IpEvidence),
    LargeTupling(TuplingEvidence),
    ExistsInfty(ExistsInftyEvidence),
    None,
}

// The derived internally-tagged decoder buffers its input, which loses
// integer map keys and u128 fields, so dispatch on the tag by hand.
impl<'de> Deserialize<'de> for Evidence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let mut v = Value::deserialize(d)?;
        let tag = v
            .as_object_mut()
            .and_then(|o| o.remove("type"))
            .ok_or_else(|| D::Error::missing_field("type"))?;
        let e = match tag.as_str() {
            Some("syndetic") => serde_json::from_value(v).map(Evidence::Syndetic),
            Some("ip") => serde_json::from_value(v).map(Evidence::Ip),
            Some("large_tupling") => serde_json::from_value(v).map(Evidence::LargeTupling),
            Some("exists_infty") => serde_json::from_value(v).map(Evidence::ExistsInfty),
            Some("none") => Ok(Evidence::None),
            _ => return Err(D::Error::custom(format!("unknown evidence type {tag}"))),
        };
        e.map_err(D::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub stage: String,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub detail: Value,
}

fn log(stage: &str, outcome: &str, detail: Value) -> StageLog {
    StageLog {
        stage: stage.into(),
        outcome: outcome.into(),
        detail,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub verdict: Verdict,
    pub source: SetSource,
    pub size: usize,
    pub config: Config,
    pub seed: u64,
    pub evidence: Evidence,
    pub diagnostics: Vec<StageLog>,
}

/// Runs the pipeline on `a`.
pub fn classify(a: &GroundSet, source: SetSource, cfg: &Config) -> Result<ClassificationReport> {
    cfg.validate()?;
    if a.len() < cfg.size_floor {
        return Err(Error::pre(format!(
            "set has {} elements, below the floor {}",
            a.len(),
            cfg.size_floor
        )));
    }
    let w = a.window();
    let cfg = cfg.resolve(w);
    let margin = cfg.margin.unwrap();
    let floor = cfg.growth_floor.unwrap();
    if margin >= w {
        return Err(Error::pre(format!("margin {margin} must be below the window {w}")));
    }
    let seed = source
        .spec
        .as_deref()
        .and_then(|s| s.parse::<SetSpec>().ok())
        .and_then(|s| s.seed())
        .unwrap_or(cfg.seed);
    let mut diagnostics = Vec::new();
    let done = |verdict, evidence, diagnostics| ClassificationReport {
        verdict,
        size: a.len(),
        source: source.clone(),
        config: cfg.clone(),
        seed,
        evidence,
        diagnostics,
    };

    // 1. Syndeticity.
    let top = w - margin;
    match syndetic_bound_with(a, margin, floor.max(1))? {
        Some(g) => {
            diagnostics.push(log("syndetic", "certified", json!({ "g": g })));
            let evidence = Evidence::Syndetic(SyndeticEvidence {
                g,
                translates: (0..g).collect(),
                m: g - 1,
                top,
                expression: format!("N = (U_{{n in [0,{}]}} (A - n)) \\ [-{}, -1]", g - 1, g - 1),
            });
            return Ok(done(Verdict::SyndeticOrderDefinable, evidence, diagnostics));
        }
        None => diagnostics.push(log("syndetic", "absent", json!({ "ceiling": floor.max(1), "T": top }))),
    }

    // 2. IP recursion.
    let search = IpSearch {
        depth: cfg.ip_depth,
        margin,
        growth_floor: floor,
        size_floor: cfg.size_floor,
    };
    match search.run(a)? {
        IpOutcome::Witness(witness) => {
            let report = verify_shatter(&witness, a)?;
            diagnostics.push(log(
                "ip",
                "witness",
                json!({ "gapSeq": witness.gap_seq, "chainSizes": witness.chain_sizes }),
            ));
            let evidence = Evidence::Ip(IpEvidence {
                checks: report.checks,
                witness,
            });
            return Ok(done(Verdict::IpWitness, evidence, diagnostics));
        }
        IpOutcome::Failure(f) => diagnostics.push(log(
            "ip",
            "failed",
            json!({
                "failure": f,
                "note": "constructive failure of the recursion on its own B_d sets is taken as license to try the tupling branch",
            }),
        )),
    }

    // 3. k-tupling.
    let k = cfg.k;
    let lo = a.min().unwrap().max(1).min(w);
    let grid = geometric_grid(lo, w, cfg.grid_points);
    let profile = tupling_profile_with(a, k, &grid, cfg.tail_fraction)?;
    let tail: Vec<f64> = profile.ratios[profile.tail_start()..].iter().flatten().copied().collect();
    diagnostics.push(log("tupling", "profile", profile.to_json()));
    if let Some(liminf) = profile.liminf_estimate.filter(|&l| l >= cfg.c) {
        if let Some(ev) = tupling_branch(a, &cfg, liminf, &grid, &mut diagnostics)? {
            return Ok(done(Verdict::LargeTuplingPattern, Evidence::LargeTupling(ev), diagnostics));
        }
        return Ok(done(Verdict::Indeterminate, Evidence::None, diagnostics));
    }

    // 4. Popular sums.
    if !tail.is_empty() && tail.iter().all(|&r| r < cfg.c) {
        let schedule = popular_schedule(a, k)?;
        diagnostics.push(log("exists_infty", "schedule", json!({ "steps": schedule.len() })));
        if !schedule.is_empty() {
            let evidence = Evidence::ExistsInfty(ExistsInftyEvidence {
                k,
                tail_ratios: tail,
                c: cfg.c,
                schedule,
            });
            return Ok(done(Verdict::ExistsInftyFailureEvidence, evidence, diagnostics));
        }
    } else {
        diagnostics.push(log("exists_infty", "skipped", json!({ "reason": "tail ratios do not all fall below c" })));
    }
    Ok(done(Verdict::Indeterminate, Evidence::None, diagnostics))
}

/// Unpopular blocks on the grid points with `k·n ≤ W`, then the depth-k
/// pattern checked at error `K − 1`.
fn tupling_branch(
    a: &GroundSet,
    cfg: &Config,
    liminf: f64,
    grid: &[u64],
    diagnostics: &mut Vec<StageLog>,
) -> Result<Option<TuplingEvidence>> {
    let (k, w) = (cfg.k, a.window());
    let popularity = match cfg.popularity {
        Some(kk) => kk,
        None => default_popularity_threshold(k, liminf)?,
    };
    let block_grid: Vec<u64> = grid.iter().copied().filter(|&n| n.saturating_mul(k as u64) <= w).collect();
    if block_grid.is_empty() {
        diagnostics.push(log("blocks", "skipped", json!({ "reason": "no grid point with k·n inside the window" })));
        return Ok(None);
    }
    let params = BlocksParams {
        k,
        popularity,
        t: cfg.t,
        c: cfg.kst_c,
        budget: cfg.node_budget,
    };
    let search = unpopular_blocks(a, &params, &block_grid)?;
    diagnostics.push(log(
        "blocks",
        if search.found.is_some() { "found" } else if search.indeterminate() { "indeterminate" } else { "absent" },
        json!({ "K": popularity, "grid": search.diagnostics }),
    ));
    let Some(blocks) = search.found else { return Ok(None) };
    let pattern = match depthk_witness(&blocks, a) {
        Ok(p) => p,
        Err(e @ Error::Certificate(_)) => {
            diagnostics.push(log("pattern", "failed", json!({ "error": e.to_string() })));
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    let bounded_error = (popularity - 1) as usize;
    let r = verify_bounded_error(&pattern.pattern, bounded_error, pattern.domain_cap)?;
    diagnostics.push(log(
        "pattern",
        if r.holds { "verified" } else { "rejected" },
        json!({ "measuredError": pattern.max_error(), "checked": r.checked }),
    ));
    Ok(r.holds.then_some(TuplingEvidence {
        k,
        liminf,
        popularity,
        blocks,
        pattern,
        bounded_error,
    }))
}

/// The tupling branch alone, without the `c` gate on the liminf estimate.
pub fn depthk_certificate(a: &GroundSet, cfg: &Config) -> Result<(Option<TuplingEvidence>, Vec<StageLog>)> {
    cfg.validate()?;
    let cfg = cfg.resolve(a.window());
    let lo = a.min().ok_or(Error::EmptySet("depthk_certificate"))?.max(1).min(a.window());
    let grid = geometric_grid(lo, a.window(), cfg.grid_points);
    let profile = tupling_profile_with(a, cfg.k, &grid, cfg.tail_fraction)?;
    let mut diagnostics = vec![log("tupling", "profile", profile.to_json())];
    let Some(liminf) = profile.liminf_estimate.filter(|&l| l > 0.0) else {
        return Ok((None, diagnostics));
    };
    let ev = tupling_branch(a, &cfg, liminf, &grid, &mut diagnostics)?;
    Ok((ev, diagnostics))
}

/// For `K = 2, 4, 8, …` up to `|A|`, the least `b ≤ W` in `k·A` with
/// `r^k_A(b) ≥ K`. Stops at the first `K` with no such `b`.
fn popular_schedule(a: &GroundSet, k: usize) -> Result<Vec<PopularWitness>> {
    let w = a.window();
    let profile = rep_counts(&vec![a.clone(); k])?;
    let shifted = kfold(a, k - 1)?;
    let counts: Vec<(u64, u64)> = profile.counts.iter().copied().filter(|&(x, _)| x <= w).collect();
    let mut out = Vec::new();
    let mut kk = 2u64;
    while kk <= a.len() as u64 {
        let Some(&(b, r)) = counts.iter().find(|&&(_, r)| r >= kk) else {
            break;
        };
        out.push(PopularWitness {
            popularity: kk,
            b,
            r,
            m: integer_root(r, k as u32),
            psi_count: psi_count(a, &shifted, b),
        });
        kk *= 2;
    }
    Ok(out)
}

fn integer_root(r: u64, k: u32) -> u64 {
    num_integer::Roots::nth_root(&r, k)
}

fn psi_count(a: &GroundSet, shifted: &GroundSet, b: u64) -> u64 {
    a.range(0, b).iter().filter(|&&x| shifted.contains(b - x)).count() as u64
}

/// Output formats for [`emit_report`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
    CsvSummary,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            "csv-summary" | "csv" => Ok(Format::CsvSummary),
            _ => Err(Error::pre(format!("unknown format `{s}`"))),
        }
    }
}

fn headline(r: &ClassificationReport) -> String {
    match &r.evidence {
        Evidence::Syndetic(SyndeticEvidence { g, .. }) => format!("g={g}"),
        Evidence::Ip(IpEvidence { witness, .. }) => format!("gapSeq={:?}", witness.gap_seq),
        Evidence::LargeTupling(TuplingEvidence { liminf, popularity, blocks, .. }) => {
            format!("liminf={liminf:.4} K={popularity} n={}", blocks.n)
        }
        Evidence::ExistsInfty(ExistsInftyEvidence { schedule, .. }) => {
            let last = schedule.last().unwrap();
            format!("K<={} maxM={}", last.popularity, last.m)
        }
        Evidence::None => String::new(),
    }
}

/// Serializes one or more reports.
pub fn emit_report(reports: &[ClassificationReport], format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut s = if reports.len() == 1 {
                serde_json::to_string_pretty(&reports[0])?
            } else {
                serde_json::to_string_pretty(reports)?
            };
            s.push('\n');
            Ok(s)
        }
        Format::CsvSummary => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["source", "verdict", "size", "window", "detail"])
                .map_err(|e| Error::pre(e.to_string()))?;
            for r in reports {
                w.write_record([
                    r.source.label(),
                    r.verdict.as_str().to_string(),
                    r.size.to_string(),
                    r.source.window.to_string(),
                    headline(r),
                ])
                .map_err(|e| Error::pre(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::pre(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("utf8"))
        }
        Format::Text => {
            let mut s = String::new();
            for r in reports {
                writeln!(s, "verdict: {}", r.verdict.as_str()).unwrap();
                writeln!(s, "source:  {} (window {}, {} elements)", r.source.label(), r.source.window, r.size).unwrap();
                writeln!(s, "detail:  {}", headline(r)).unwrap();
                for d in &r.diagnostics {
                    writeln!(s, "  {:<13} {}", d.stage, d.outcome).unwrap();
                }
                s.push('\n');
            }
            Ok(s)
        }
    }
}

/// The verdict of [`recheck`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RecheckOutcome {
    Accepted,
    Rejected(String),
    NoCertificate,
}

/// Any document carrying a source and evidence. Reports and the standalone
/// witness documents share this shape.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateDoc {
    pub source: SetSource,
    pub evidence: Evidence,
}

/// Parses and re-verifies a certificate file from scratch.
pub fn recheck_file(path: impl AsRef<Path>) -> Result<RecheckOutcome> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    recheck_str(&text, &path.display().to_string())
}

pub fn recheck_str(text: &str, origin: &str) -> Result<RecheckOutcome> {
    let doc: CertificateDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.into(),
        line: e.line(),
        message: e.to_string(),
    })?;
    recheck(&doc)
}

pub fn recheck(doc: &CertificateDoc) -> Result<RecheckOutcome> {
    let a = doc.source.materialize()?;
    let reject = |m: String| Ok(RecheckOutcome::Rejected(m));
    match &doc.evidence {
        Evidence::None => Ok(RecheckOutcome::NoCertificate),
        Evidence::Syndetic(SyndeticEvidence { g, translates, m, top, .. }) => {
            if *g == 0 || translates != &(0..*g).collect::<Vec<_>>() {
                return reject("F is not [0, g−1]".into());
            }
            if *top > a.window() {
                return reject("T exceeds the window".into());
            }
            let lowest = a.min().map_or(0, |x| x as i128) - (*g as i128 - 1);
            if lowest < -(*m as i128) {
                return reject(format!("the union reaches {lowest}, below −m"));
            }
            if !covers_with_translates(&a, *g, *top) {
                return reject(format!("[0, {top}] is not covered by A − F"));
            }
            Ok(RecheckOutcome::Accepted)
        }
        Evidence::Ip(IpEvidence { witness, .. }) => {
            if let Err(e) = witness.check_invariants() {
                return reject(e);
            }
            let r = verify_shatter(witness, &a)?;
            match r.counterexample {
                None => Ok(RecheckOutcome::Accepted),
                Some(c) => reject(format!(
                    "mask {} m {}: value {} membership {}",
                    c.mask, c.m, c.value, c.member
                )),
            }
        }
        Evidence::LargeTupling(TuplingEvidence { popularity, blocks, pattern, bounded_error, .. }) => {
            if blocks.popularity != *popularity || *bounded_error as u64 + 1 > *popularity {
                return reject("inconsistent K".into());
            }
            if let Err(e) = certify_blocks(&a, blocks)? {
                return reject(e);
            }
            let rebuilt = match depthk_witness(blocks, &a) {
                Ok(p) => p,
                Err(Error::Certificate(e)) => return reject(e),
                Err(e) => return Err(e),
            };
            if rebuilt.pattern != pattern.pattern {
                return reject("pattern does not match the blocks".into());
            }
            if let Err(e) = pattern.check_witnesses(*bounded_error) {
                return reject(e);
            }
            let r = verify_bounded_error(&pattern.pattern, *bounded_error, pattern.domain_cap)?;
            if !r.holds {
                return reject(format!("η = {} has no witness", r.first_failure.unwrap_or_default()));
            }
            Ok(RecheckOutcome::Accepted)
        }
        Evidence::ExistsInfty(ExistsInftyEvidence { k, schedule, .. }) => {
            if schedule.is_empty() {
                return reject("empty schedule".into());
            }
            let profile = rep_counts(&vec![a.clone(); *k])?;
            let shifted = kfold(&a, k - 1)?;
            for s in schedule {
                if s.b > a.window() {
                    return reject(format!("b = {} is outside the window", s.b));
                }
                let r = profile.get(s.b);
                if r != s.r || r < s.popularity {
                    return reject(format!("r({}) = {r}, recorded {} for K = {}", s.b, s.r, s.popularity));
                }
                if s.m != integer_root(r, *k as u32) {
                    return reject(format!("M for b = {} is wrong", s.b));
                }
                let psi = psi_count(&a, &shifted, s.b);
                if psi != s.psi_count {
                    return reject(format!("ψ count for b = {} is {psi}", s.b));
                }
            }
            Ok(RecheckOutcome::Accepted)
        }
    }
}

/// Regenerates a named set and classifies it.
pub fn classify_spec(spec: &SetSpec, cfg: &Config) -> Result<ClassificationReport> {
    let mut spec = spec.clone();
    if spec.window.is_none() {
        spec.window = cfg.window;
    }
    let a = generate(&spec)?;
    classify(&a, SetSource::from_spec(&spec, &a), cfg)
}

/// Sorted map of verdict counts, for batch summaries.
pub fn verdict_counts(reports: &[ClassificationReport]) -> BTreeMap<&'static str, usize> {
    let mut m = BTreeMap::new();
    for r in reports {
        *m.entry(r.verdict.as_str()).or_insert(0) += 1;
    }
    m
}
