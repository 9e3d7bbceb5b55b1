use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use zpattern::classify::{
    classify, depthk_certificate, emit_report, recheck_file, CertificateDoc, Config, Evidence, Format,
    IpEvidence, RecheckOutcome, SetSource,
};
use zpattern::gaps::{verify_shatter, IpOutcome, IpSearch};
use zpattern::patterns::{
    verify_bounded_error, verify_ict, verify_inp, FinitePattern, PathCheck, PatternCertificate,
};
use zpattern::setcore::growth_floor;
use zpattern::sumset::{geometric_grid, tupling_profile};
use zpattern::{generate, Error, GroundSet, SetKind, SetSpec};

#[derive(Parser)]
#[command(name = "zpattern", version, about = "Classify subsets of the naturals by gap, sumset and pattern structure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the classifier on set files and generated sets.
    Analyze(AnalyzeArgs),
    /// Write a generated set to a set file.
    Generate {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        window: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the k-fold tupling profile as CSV.
    Sumset {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[command(flatten)]
        input: Input,
        /// Grid as `lo:hi:points` (geometric) or a comma-separated list.
        #[arg(long)]
        profile: Option<String>,
    },
    /// Emit a standalone certificate.
    Witness {
        kind: WitnessKind,
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a report or certificate from scratch.
    Verify { certificate: PathBuf },
    /// Pattern utilities.
    Pattern {
        #[command(subcommand)]
        command: PatternCommand,
    },
}

#[derive(Subcommand)]
enum PatternCommand {
    /// Check a pattern file against one of the pattern conditions.
    Verify {
        pattern: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Ict)]
        mode: Mode,
        /// Error bound for `bounded`; row inconsistency bound for `inp`.
        #[arg(long = "C")]
        c: Option<usize>,
        /// Domain `[0, cap]` to search; defaults to the file's value.
        #[arg(long)]
        cap: Option<u64>,
        /// Check this many sampled paths instead of all of them (`inp`).
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Ict,
    Inp,
    Bounded,
}

#[derive(Clone, Copy, ValueEnum)]
enum WitnessKind {
    Ip,
    Depthk,
}

#[derive(Args)]
struct Input {
    /// Set file.
    file: Option<PathBuf>,
    /// Generator spec such as `mian-chowla@100000`.
    #[arg(long = "gen", conflicts_with = "file")]
    spec: Option<String>,
    #[arg(long)]
    window: Option<u64>,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long = "K")]
    popularity: Option<u64>,
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    margin: Option<u64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    files: Vec<PathBuf>,
    #[arg(long = "gen")]
    specs: Vec<String>,
    #[arg(long)]
    window: Option<u64>,
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

/// Failure modes of a subcommand, mapped onto exit codes.
enum Fail {
    Verification(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

type CmdResult = Result<(), Fail>;
type Loader = Box<dyn Fn() -> Result<(GroundSet, SetSource), Error> + Send + Sync>;

fn config(o: &Overrides, window: Option<u64>) -> Result<Config, Error> {
    let mut cfg = match &o.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if window.is_some() {
        cfg.window = window;
    }
    cfg.k = o.k.unwrap_or(cfg.k);
    cfg.c = o.c.unwrap_or(cfg.c);
    cfg.popularity = o.popularity.or(cfg.popularity);
    cfg.t = o.t.unwrap_or(cfg.t);
    cfg.margin = o.margin.or(cfg.margin);
    cfg.ip_depth = o.depth.unwrap_or(cfg.ip_depth);
    cfg.seed = o.seed.unwrap_or(cfg.seed);
    cfg.node_budget = o.budget.unwrap_or(cfg.node_budget);
    cfg.validate()?;
    Ok(cfg)
}

fn load_spec(spec: &str, window: Option<u64>) -> Result<(GroundSet, SetSource), Error> {
    let mut spec: SetSpec = spec.parse()?;
    if spec.window.is_none() {
        spec.window = window;
    }
    let a = generate(&spec)?;
    let src = SetSource::from_spec(&spec, &a);
    Ok((a, src))
}

fn load_file(path: &Path, window: Option<u64>) -> Result<(GroundSet, SetSource), Error> {
    let spec = SetSpec {
        kind: SetKind::File(path.display().to_string()),
        window,
    };
    let a = generate(&spec)?;
    Ok((a.clone(), SetSource::from_file(&path.display().to_string(), &a)))
}

fn load_input(input: &Input) -> Result<(GroundSet, SetSource), Fail> {
    match (&input.file, &input.spec) {
        (Some(f), _) => Ok(load_file(f, input.window)?),
        (None, Some(s)) => Ok(load_spec(s, input.window)?),
        (None, None) => Err(Error::Precondition("give a set file or --gen SPEC".into()).into()),
    }
}

fn write_out(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io { path: p.into(), source: e }),
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn analyze(args: AnalyzeArgs) -> CmdResult {
    let cfg = config(&args.overrides, args.window)?;
    let format: Format = args.format.parse()?;
    let mut jobs: Vec<Loader> = Vec::new();
    for f in args.files {
        let w = args.window;
        jobs.push(Box::new(move || load_file(&f, w)));
    }
    for s in args.specs {
        let w = args.window;
        jobs.push(Box::new(move || load_spec(&s, w)));
    }
    if jobs.is_empty() {
        return Err(Error::Precondition("nothing to analyze".into()).into());
    }
    let reports = jobs
        .par_iter()
        .map(|job| {
            let (a, src) = job()?;
            classify(&a, src, &cfg)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    write_out(args.out.as_deref(), &emit_report(&reports, format)?)?;
    Ok(())
}

fn parse_grid(s: &str, a: &GroundSet) -> Result<Vec<u64>, Error> {
    let bad = || Error::Precondition(format!("bad grid `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    if let [lo, hi, points] = parts[..] {
        let lo = lo.trim().parse().map_err(|_| bad())?;
        let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
        let points = points.trim().parse().map_err(|_| bad())?;
        return Ok(geometric_grid(lo, hi.min(a.window()), points));
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

fn sumset(k: usize, input: Input, profile: Option<String>) -> CmdResult {
    let (a, _) = load_input(&input)?;
    let grid = match profile {
        Some(g) => parse_grid(&g, &a)?,
        None => geometric_grid(a.min().unwrap_or(1).max(1), a.window(), 16),
    };
    let p = tupling_profile(&a, k, &grid)?;
    write_out(None, &p.to_csv())?;
    Ok(())
}

fn witness(kind: WitnessKind, input: Input, o: Overrides, out: Option<PathBuf>) -> CmdResult {
    let (a, source) = load_input(&input)?;
    let cfg = config(&o, Some(a.window()))?.resolve(a.window());
    let evidence = match kind {
        WitnessKind::Ip => {
            let search = IpSearch {
                depth: cfg.ip_depth,
                margin: cfg.margin.unwrap_or_else(|| growth_floor(a.window())),
                growth_floor: cfg.growth_floor.unwrap_or_else(|| growth_floor(a.window())),
                size_floor: cfg.size_floor,
            };
            match search.run(&a)? {
                IpOutcome::Witness(witness) => {
                    let checks = verify_shatter(&witness, &a)?.checks;
                    Evidence::Ip(IpEvidence { witness, checks })
                }
                IpOutcome::Failure(f) => {
                    write_out(None, &format!("{}\n", serde_json::to_string_pretty(&f).map_err(Error::from)?))?;
                    return Err(Fail::Verification("IP recursion failed".into()));
                }
            }
        }
        WitnessKind::Depthk => match depthk_certificate(&a, &cfg)? {
            (Some(ev), _) => Evidence::LargeTupling(ev),
            (None, diagnostics) => {
                write_out(None, &format!("{}\n", serde_json::to_string_pretty(&diagnostics).map_err(Error::from)?))?;
                return Err(Fail::Verification("no depth-k certificate found".into()));
            }
        },
    };
    let doc = CertificateDoc { source, evidence };
    let text = serde_json::to_string_pretty(&doc).map_err(Error::from)? + "\n";
    write_out(out.as_deref(), &text)?;
    Ok(())
}

fn verify(path: &Path) -> CmdResult {
    match recheck_file(path)? {
        RecheckOutcome::Accepted => {
            println!("accepted");
            Ok(())
        }
        RecheckOutcome::Rejected(reason) => Err(Fail::Verification(format!("rejected: {reason}"))),
        RecheckOutcome::NoCertificate => Err(Fail::Verification("no certificate to check".into())),
    }
}

fn load_pattern(path: &Path) -> Result<(FinitePattern, u64), Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    let parse_err = |e: serde_json::Error| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(parse_err)?;
    let (pattern, cap) = if value.get("domainCap").is_some() {
        let cert: PatternCertificate = serde_json::from_value(value).map_err(parse_err)?;
        (cert.pattern, Some(cert.domain_cap))
    } else {
        (serde_json::from_value::<FinitePattern>(value).map_err(parse_err)?, None)
    };
    pattern.validate().map_err(Error::Certificate)?;
    let cap = cap.unwrap_or_else(|| pattern.default_domain_cap());
    Ok((pattern, cap))
}

fn pattern_verify(path: &Path, mode: Mode, c: Option<usize>, cap: Option<u64>, sample: Option<usize>, seed: u64) -> CmdResult {
    let (p, file_cap) = load_pattern(path)?;
    let cap = cap.unwrap_or(file_cap);
    let report = match mode {
        Mode::Ict => verify_ict(&p, cap)?,
        Mode::Bounded => verify_bounded_error(&p, c.unwrap_or(0), cap)?,
        Mode::Inp => {
            let bounds = vec![c.unwrap_or(2); p.depth];
            let paths = match sample {
                Some(count) => PathCheck::Sample { count, seed },
                None => PathCheck::All,
            };
            verify_inp(&p, &bounds, cap, paths)?
        }
    };
    let text = serde_json::to_string_pretty(&json!(report)).map_err(Error::from)? + "\n";
    write_out(None, &text)?;
    if report.holds {
        Ok(())
    } else {
        Err(Fail::Verification(format!(
            "pattern check failed: {}",
            report.first_failure.unwrap_or_default()
        )))
    }
}

fn generate_cmd(spec: &str, window: Option<u64>, out: Option<PathBuf>) -> CmdResult {
    let (a, _) = load_spec(spec, window)?;
    let mut text = format!("#window {}\n", a.window());
    for x in a.elements() {
        text.push_str(&x.to_string());
        text.push('\n');
    }
    write_out(out.as_deref(), &text)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => analyze(args),
        Command::Generate { spec, window, out } => generate_cmd(&spec, window, out),
        Command::Sumset { k, input, profile } => sumset(k, input, profile),
        Command::Witness { kind, input, overrides, out } => witness(kind, input, overrides, out),
        Command::Verify { certificate } => verify(&certificate),
        Command::Pattern {
            command: PatternCommand::Verify { pattern, mode, c, cap, sample, seed },
        } => pattern_verify(&pattern, mode, c, cap, sample, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Verification(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Fail::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
