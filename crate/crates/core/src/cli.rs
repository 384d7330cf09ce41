//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 I/O or format error, 2 validation failure (the
//! report is still written), 64 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde_json::{json, Value};

use crate::analysis::{
    bootstrap_variability, level_study, power_study, scenario_sweep, AlternativeSpec,
    ScenarioVariant, StudyResult,
};
use crate::assumptions::{
    lockfile_line, parse_lockfile, validate, AssumptionSet, ValidationReport,
};
use crate::error::Error;
use crate::nulldist::{estimate_tail_area, extract_configuration, tomb_correction, Statistic};
use crate::onomasticon::Onomasticon;
use crate::report::{csv_text, num, sig12, to_json_text, RunManifest};
use crate::rng::SeedStream;
use crate::rr_engine::{Cluster, ClusterFile, RrEngine};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

pub const THREADS_ENV: &str = "SURPRISE_RR_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Validate,
    Lock,
    Rr,
    Null,
    Sweep,
    Bootstrap,
    Level,
    Power,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Lock => "lock",
            Command::Rr => "rr",
            Command::Null => "null",
            Command::Sweep => "sweep",
            Command::Bootstrap => "bootstrap",
            Command::Level => "level",
            Command::Power => "power",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatArg {
    Rr,
    Lumped,
}

impl From<StatArg> for Statistic {
    fn from(s: StatArg) -> Self {
        match s {
            StatArg::Rr => Statistic::Rr,
            StatArg::Lumped => Statistic::Lumped,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "surprise-rr",
    version,
    about = "Rareness-and-relevance surprise statistics for name clusters"
)]
pub struct Args {
    pub command: Command,
    #[arg(long, value_name = "PATH")]
    pub onomasticon: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub assumptions: Option<PathBuf>,
    /// Observed cluster (for level/power: the configuration template).
    #[arg(long, value_name = "PATH")]
    pub cluster: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Monte Carlo draws per tail area; defaults to the assumption set's mc_sims.
    #[arg(long)]
    pub sims: Option<u64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Overrides the assumption set's tombs_count.
    #[arg(long)]
    pub tombs: Option<u64>,
    #[arg(long, value_enum, default_value = "rr")]
    pub stat: StatArg,
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (default: $SURPRISE_RR_THREADS, then machine parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
    /// Expected assumption digest; commands refuse to run on mismatch.
    #[arg(long, value_name = "PATH")]
    pub lockfile: Option<PathBuf>,
    /// Scenario variants for `sweep`.
    #[arg(long, value_name = "PATH")]
    pub variants: Option<PathBuf>,
    /// Bootstrap replicates for `bootstrap`.
    #[arg(long, default_value_t = 200)]
    pub replicates: u64,
    /// Simulated observed clusters for `level` and `power`.
    #[arg(long, default_value_t = 500)]
    pub clusters: u64,
    /// Planted alternative for `power`.
    #[arg(long, value_name = "PATH")]
    pub alternative: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Failed(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Failed(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

struct Context<'a> {
    args: &'a Args,
    manifest: RunManifest,
    log: &'a mut (dyn Write + Send),
}

impl Context<'_> {
    fn note(&mut self, msg: &str) {
        if !self.args.quiet {
            let _ = writeln!(self.log, "{msg}");
        }
    }

    fn read(&mut self, role: &str, path: Option<&PathBuf>) -> Result<(PathBuf, Vec<u8>), Failure> {
        let path = path.ok_or_else(|| Failure::Failed(format!("--{role} is required")))?;
        let bytes =
            fs::read(path).map_err(|e| Failure::Failed(format!("{}: {e}", path.display())))?;
        self.manifest.add_input(role, path, &bytes);
        Ok((path.clone(), bytes))
    }

    fn text(&mut self, role: &str, path: Option<&PathBuf>) -> Result<String, Failure> {
        let (path, bytes) = self.read(role, path)?;
        String::from_utf8(bytes)
            .map_err(|_| Failure::Failed(format!("{} is not UTF-8", path.display())))
    }

    fn onomasticon(&mut self) -> Result<Onomasticon, Failure> {
        let text = self.text("onomasticon", self.args.onomasticon.as_ref())?;
        let onom = Onomasticon::from_csv_str(&text)?;
        self.manifest.onomasticon_checksum = Some(onom.checksum());
        Ok(onom)
    }

    fn assumptions(&mut self) -> Result<AssumptionSet, Failure> {
        let text = self.text("assumptions", self.args.assumptions.as_ref())?;
        let mut set = AssumptionSet::from_json_str(&text)?;
        let digest = set.lock_hash();
        let checked = self.args.command != Command::Lock;
        if let Some(lock) = self.args.lockfile.clone().filter(|_| checked) {
            let text = self.text("lockfile", Some(&lock))?;
            let expected = parse_lockfile(&text).unwrap_or_default();
            if expected != digest {
                return Err(Failure::Invalid(format!(
                    "assumption digest {digest} does not match lockfile {expected}"
                )));
            }
        }
        self.manifest.lock_digest = Some(digest);
        if let Some(t) = self.args.tombs {
            set.tombs_count = t;
        }
        self.manifest.param("tombs_count", json!(set.tombs_count));
        set.check_structure()?;
        Ok(set)
    }

    fn sims(&mut self, set: &AssumptionSet) -> Result<u64, Failure> {
        let n = self.args.sims.unwrap_or(set.mc_sims);
        if n == 0 {
            return Err(Failure::Failed("--sims must be positive".into()));
        }
        self.manifest.param("sims", json!(n));
        Ok(n)
    }

    /// Validated assumptions plus the lexicon with unknown renditions injected.
    fn validated(&mut self) -> Result<(AssumptionSet, Onomasticon, ValidationReport), Failure> {
        let onom = self.onomasticon()?;
        let set = self.assumptions()?;
        let report = validate(&set, &onom);
        let onom = report.onomasticon.clone();
        Ok((set, onom, report))
    }

    fn require_valid(&mut self, report: &ValidationReport) -> CmdResult {
        if report.is_valid() {
            return Ok(());
        }
        self.write(
            "validation.json",
            &to_json_text(&validation_value(&self.manifest, report)),
        )?;
        let msgs: Vec<&str> = report.fatal().map(|f| f.message.as_str()).collect();
        Err(Failure::Invalid(msgs.join("; ")))
    }

    fn cluster(
        &mut self,
        onom: &Onomasticon,
        set: &AssumptionSet,
    ) -> Result<(Cluster, Onomasticon), Failure> {
        let text = self.text("cluster", self.args.cluster.as_ref())?;
        let file = ClusterFile::from_json_str(&text)?;
        Ok(file.resolve(onom, set.flags.unknown_floor)?)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        fs::create_dir_all(&self.args.out)
            .map_err(|e| Failure::Failed(format!("{}: {e}", self.args.out.display())))?;
        let path = self.args.out.join(name);
        fs::write(&path, contents)
            .map_err(|e| Failure::Failed(format!("{}: {e}", path.display())))?;
        self.note(&format!("wrote {}", path.display()));
        Ok(())
    }

    fn finish(&mut self) -> CmdResult {
        let text = to_json_text(&self.manifest.with_timestamp());
        self.write("manifest.json", &text)
    }
}

fn validation_value(manifest: &RunManifest, report: &ValidationReport) -> Value {
    json!({
        "manifest": manifest.to_value(),
        "valid": report.is_valid(),
        "findings": report.findings,
    })
}

/// Parses `argv` (including the program name) and runs the command. Reports
/// go to `--out`; progress notes and summaries to `out`.
pub fn run<I, T>(argv: I, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = write!(out, "{}", e.render());
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let threads = args.threads.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
    });
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return EXIT_FAILURE;
        }
    };
    let mut ctx = Context {
        args: &args,
        manifest: RunManifest::new(args.command.name(), args.seed),
        log: out,
    };
    let result = pool.install(|| dispatch(&mut ctx));
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Invalid(msg)) => {
            let _ = writeln!(ctx.log, "invalid: {msg}");
            EXIT_INVALID
        }
        Err(Failure::Failed(msg)) => {
            let _ = writeln!(ctx.log, "error: {msg}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(ctx: &mut Context<'_>) -> CmdResult {
    match ctx.args.command {
        Command::Validate => cmd_validate(ctx),
        Command::Lock => cmd_lock(ctx),
        Command::Rr => cmd_rr(ctx),
        Command::Null => cmd_null(ctx),
        Command::Sweep => cmd_sweep(ctx),
        Command::Bootstrap => cmd_bootstrap(ctx),
        Command::Level | Command::Power => cmd_study(ctx),
    }?;
    if ctx.args.command == Command::Lock {
        return Ok(());
    }
    ctx.finish()
}

fn cmd_validate(ctx: &mut Context<'_>) -> CmdResult {
    let (_, _, report) = ctx.validated()?;
    ctx.write(
        "validation.json",
        &to_json_text(&validation_value(&ctx.manifest, &report)),
    )?;
    for f in &report.findings {
        let line = format!("{:?}: {}", f.severity, f.message);
        ctx.note(&line);
    }
    if !report.is_valid() {
        return Err(Failure::Invalid(format!(
            "{} fatal finding(s)",
            report.fatal().count()
        )));
    }
    ctx.note("valid");
    Ok(())
}

fn cmd_lock(ctx: &mut Context<'_>) -> CmdResult {
    let set = ctx.assumptions()?;
    if ctx.args.onomasticon.is_some() {
        let onom = ctx.onomasticon()?;
        let report = validate(&set, &onom);
        ctx.require_valid(&report)?;
    }
    let path = ctx
        .args
        .assumptions
        .clone()
        .expect("assumptions read above");
    let filename = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    let line = lockfile_line(&set.lock_hash(), &filename);
    let _ = write!(ctx.log, "{line}");
    match ctx.args.lockfile.clone() {
        Some(target) => fs::write(&target, &line)
            .map_err(|e| Failure::Failed(format!("{}: {e}", target.display())))?,
        None => ctx.write(&format!("{filename}.lock"), &line)?,
    }
    Ok(())
}

fn breakdown_value(engine: &RrEngine<'_>, cluster: &Cluster) -> Result<Value, Failure> {
    let b = engine.cluster_rr(cluster)?;
    let inscriptions: Vec<Value> = cluster
        .inscriptions
        .iter()
        .enumerate()
        .map(|(i, ins)| {
            let chain: Vec<String> = ins.slots.iter().map(|s| format!("{}:{}", s.rendition_id, s.gender)).collect();
            let penalties: Vec<Value> = b
                .penalties
                .iter()
                .filter(|p| p.inscription == i)
                .map(|p| json!({"rule": p.rule, "factor": p.factor.map_or(json!("hard"), num)}))
                .collect();
            json!({
                "index": i,
                "chain": chain.join("|"),
                "raw": ins.raw,
                "factor": num(b.factors[i]),
                "exact_factor": format!("{}/{}", b.exact_factors[i].numer(), b.exact_factors[i].denom()),
                "candidate": b.assignment[i],
                "neutralized": b.neutralized.contains(&i),
                "penalties": penalties,
            })
        })
        .collect();
    Ok(json!({
        "cluster_id": cluster.cluster_id,
        "inscriptions": inscriptions,
        "penalty": num(b.penalty),
        "product": num(b.product()),
        "log10_product": num(b.log10_product()),
        "exact_match_product": b.exact_match_product().to_string(),
        "disqualified": b.disqualified,
        "lumped": engine.lumped(cluster),
    }))
}

fn cmd_rr(ctx: &mut Context<'_>) -> CmdResult {
    let (set, onom, report) = ctx.validated()?;
    ctx.require_valid(&report)?;
    let (cluster, onom) = ctx.cluster(&onom, &set)?;
    let engine = RrEngine::new(&set, &onom);
    let breakdown = breakdown_value(&engine, &cluster)?;
    for ins in breakdown["inscriptions"].as_array().into_iter().flatten() {
        let line = format!(
            "[{}] {:<28} factor {:<16} candidate {}{}",
            ins["index"],
            ins["chain"].as_str().unwrap_or_default(),
            ins["factor"],
            ins["candidate"].as_str().unwrap_or("-"),
            if ins["neutralized"] == json!(true) {
                " (chain-neutral)"
            } else {
                ""
            }
        );
        ctx.note(&line);
    }
    let summary = format!("product {}", breakdown["product"]);
    ctx.note(&summary);
    let doc = json!({"manifest": ctx.manifest.to_value(), "breakdown": breakdown});
    ctx.write("rr_report.json", &to_json_text(&doc))
}

fn cmd_null(ctx: &mut Context<'_>) -> CmdResult {
    let (set, onom, report) = ctx.validated()?;
    ctx.require_valid(&report)?;
    let (cluster, onom) = ctx.cluster(&onom, &set)?;
    let n = ctx.sims(&set)?;
    let statistic: Statistic = ctx.args.stat.into();
    ctx.manifest
        .param("statistic", json!(statistic.to_string()));
    ctx.note(&format!("simulating {n} clusters"));
    let est = estimate_tail_area(
        &cluster,
        &set,
        &onom,
        statistic,
        n,
        SeedStream::new(ctx.args.seed),
    )?;
    let corr = tomb_correction(est.p_hat, set.tombs_count);
    let engine = RrEngine::new(&set, &onom);

    let bins: Vec<Value> = est
        .histogram
        .bins
        .iter()
        .map(|(&k, &c)| {
            json!({
                "low": num(k as f64 * est.histogram.bin_width),
                "high": num((k + 1) as f64 * est.histogram.bin_width),
                "count": c,
            })
        })
        .collect();
    let doc = json!({
        "manifest": ctx.manifest.to_value(),
        "statistic": statistic.to_string(),
        "observed": num(est.observed),
        "observed_disqualified": est.observed_disqualified,
        "breakdown": breakdown_value(&engine, &cluster)?,
        "configuration": extract_configuration(&cluster).to_string(),
        "n_sims": est.n_sims,
        "n_hits": est.n_hits,
        "p_hat": num(est.p_hat),
        "mc_se": num(est.mc_se),
        "tombs_count": set.tombs_count,
        "bonferroni": num(corr.bonferroni),
        "exact_correction": num(corr.exact),
        "histogram": {
            "bin_width": num(est.histogram.bin_width),
            "value": if statistic == Statistic::Rr { "log10_rr" } else { "lumped_count" },
            "bins": bins,
            "disqualified": est.histogram.disqualified,
        },
        "seed": est.seed,
        "chunk_size": est.chunk_size,
    });
    ctx.note(&format!(
        "p_hat {} (mc_se {}), tombs {}: bonferroni {}, exact {}",
        sig12(est.p_hat),
        sig12(est.mc_se),
        set.tombs_count,
        sig12(corr.bonferroni),
        sig12(corr.exact)
    ));
    ctx.write("null_report.json", &to_json_text(&doc))?;
    let rows: Vec<Vec<String>> = est
        .histogram
        .bins
        .iter()
        .map(|(&k, &c)| {
            vec![
                sig12(k as f64 * est.histogram.bin_width),
                sig12((k + 1) as f64 * est.histogram.bin_width),
                c.to_string(),
            ]
        })
        .collect();
    let text = csv_text(
        &ctx.manifest.csv_preamble(),
        &["low", "high", "count"],
        &rows,
    );
    ctx.write("null_histogram.csv", &text)
}

fn cmd_sweep(ctx: &mut Context<'_>) -> CmdResult {
    let onom = ctx.onomasticon()?;
    let set = ctx.assumptions()?;
    let (cluster, onom) = ctx.cluster(&onom, &set)?;
    let variants = match ctx.args.variants.clone() {
        Some(p) => ScenarioVariant::list_from_json_str(&ctx.text("variants", Some(&p))?)?,
        None => Vec::new(),
    };
    let n = ctx.sims(&set)?;
    ctx.note(&format!(
        "sweeping {} variant(s) at {n} simulations",
        variants.len()
    ));
    let rows = scenario_sweep(
        &set,
        &variants,
        &cluster,
        &onom,
        n,
        SeedStream::new(ctx.args.seed),
    );
    let records: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let f = |x: Option<f64>| x.map(sig12).unwrap_or_default();
            vec![
                r.variant_id.clone(),
                r.lock_digest.clone().unwrap_or_default(),
                f(r.observed_rr),
                f(r.p_hat),
                f(r.mc_se),
                f(r.bonferroni),
                f(r.exact),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    for r in &records {
        let line = format!("{:<20} p_hat {:<16} {}", r[0], r[3], r[7]);
        ctx.note(&line);
    }
    let header = [
        "variant_id",
        "lock_digest",
        "observed_rr",
        "p_hat",
        "mc_se",
        "bonferroni",
        "exact",
        "error",
    ];
    let text = csv_text(&ctx.manifest.csv_preamble(), &header, &records);
    ctx.write("sweep.csv", &text)
}

fn cmd_bootstrap(ctx: &mut Context<'_>) -> CmdResult {
    let (set, onom, report) = ctx.validated()?;
    ctx.require_valid(&report)?;
    let (cluster, onom) = ctx.cluster(&onom, &set)?;
    let n = ctx.sims(&set)?;
    let b = ctx.args.replicates;
    ctx.manifest.param("replicates", json!(b));
    ctx.note(&format!("{b} bootstrap replicates at {n} simulations"));
    let summary =
        bootstrap_variability(&cluster, &set, &onom, b, n, SeedStream::new(ctx.args.seed))?;
    let preamble = ctx.manifest.csv_preamble();
    let reps: Vec<Vec<String>> = summary
        .replicates
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                i.to_string(),
                sig12(r.observed),
                sig12(r.p_hat),
                sig12(r.mc_se),
            ]
        })
        .collect();
    ctx.write(
        "bootstrap.csv",
        &csv_text(
            &preamble,
            &["replicate", "observed_rr", "p_hat", "mc_se"],
            &reps,
        ),
    )?;
    let qs: Vec<Vec<String>> = summary
        .quantiles
        .iter()
        .map(|&(q, v)| vec![sig12(q), sig12(v)])
        .collect();
    for q in &qs {
        let line = format!("q{} = {}", q[0], q[1]);
        ctx.note(&line);
    }
    ctx.write(
        "bootstrap_quantiles.csv",
        &csv_text(&preamble, &["probability", "p_hat"], &qs),
    )
}

fn cmd_study(ctx: &mut Context<'_>) -> CmdResult {
    let (set, onom, report) = ctx.validated()?;
    ctx.require_valid(&report)?;
    let (template, onom) = ctx.cluster(&onom, &set)?;
    let config = extract_configuration(&template);
    let n = ctx.sims(&set)?;
    let statistic: Statistic = ctx.args.stat.into();
    let (m, alpha) = (ctx.args.clusters, ctx.args.alpha);
    ctx.manifest
        .param("statistic", json!(statistic.to_string()));
    ctx.manifest.param("clusters", json!(m));
    ctx.manifest.param("alpha", num(alpha));
    ctx.manifest
        .param("configuration", json!(config.to_string()));
    let stream = SeedStream::new(ctx.args.seed);
    let (name, result): (&str, StudyResult) = match ctx.args.command {
        Command::Level => (
            "level",
            level_study(&set, &config, &onom, m, n, alpha, statistic, stream)?,
        ),
        _ => {
            let text = ctx.text("alternative", ctx.args.alternative.as_ref())?;
            let alt = AlternativeSpec::from_json_str(&text)?;
            (
                "power",
                power_study(&set, &alt, &config, &onom, m, n, alpha, statistic, stream)?,
            )
        }
    };
    ctx.note(&format!(
        "{name}: {} of {} rejected at alpha {} (rate {})",
        result.rejections,
        m,
        sig12(alpha),
        sig12(result.rate)
    ));
    let header = [
        "statistic",
        "clusters",
        "sims",
        "alpha",
        "rejections",
        "rate",
    ];
    let rows = vec![vec![
        statistic.to_string(),
        m.to_string(),
        n.to_string(),
        sig12(alpha),
        result.rejections.to_string(),
        sig12(result.rate),
    ]];
    let preamble = ctx.manifest.csv_preamble();
    ctx.write(&format!("{name}.csv"), &csv_text(&preamble, &header, &rows))?;
    let pv: Vec<Vec<String>> = result
        .p_values
        .iter()
        .enumerate()
        .map(|(i, p)| vec![i.to_string(), sig12(*p)])
        .collect();
    ctx.write(
        &format!("{name}_pvalues.csv"),
        &csv_text(&preamble, &["draw", "p_hat"], &pv),
    )
}
