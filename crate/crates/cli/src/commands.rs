use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use condrecip::event_store::{
    ingest_csv, read_families_csv, read_interviews_csv, summary_stats, EventLog, RejectedClaim,
};
use condrecip::glmm::{
    build_design, fit, shuffle_significance, write_table_csv, Covariates, FitOptions, GlmmFit, ModelSpec,
    ShuffleResult, ShuffleStatistic,
};
use condrecip::nulls::{calibrate_p_omit, fit_null, NullConfig, NullDistribution, NullLevel, NullModel};
use condrecip::pedigree_geo::{family_relatedness, KinshipMatrix, Pedigree};
use condrecip::reciprocity::{short_window_stat, PairClassSel, PairCurve, ShortWindowStat, Weighting};
use condrecip::synth::{generate, Scenario};
use condrecip::{rng, Error};

use crate::manifest::{self, RunManifest};
use crate::{out_dir, Command, Global};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
    Io(PathBuf, std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(Error::Numerical(_)) => 3,
            CliError::Data(_) | CliError::Io(..) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WeightingArg {
    Unweighted,
    Tally,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Unweighted => Weighting::Unweighted,
            WeightingArg::Tally => Weighting::Tally,
        }
    }
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub interviews: PathBuf,
    #[arg(long)]
    pub families: PathBuf,
    /// Individual-level pedigree; family kinship is written alongside the log.
    #[arg(long)]
    pub pedigree: Option<PathBuf>,
    #[arg(long)]
    pub kinship_out: Option<PathBuf>,
    /// Claims dropped during reconciliation.
    #[arg(long)]
    pub rejected: Option<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Scenario TOML; defaults apply to missing keys.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Print the default scenario and exit.
    #[arg(long)]
    pub dump_scenario: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitNullArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub kinship: Option<PathBuf>,
    #[arg(long, default_value = "full_heterogeneous")]
    pub level: NullLevel,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub null: PathBuf,
    #[arg(long)]
    pub log: PathBuf,
    /// Mean realized event count to match; defaults to the log's count.
    #[arg(long)]
    pub target: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    /// Calibration details as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Calibrated null model.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct NullArgs {
    #[arg(long)]
    pub log: PathBuf,
    /// Calibrated null model JSON.
    #[arg(long)]
    pub null: PathBuf,
    #[arg(long)]
    pub kinship: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = condrecip::reciprocity::DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long, default_value_t = condrecip::reciprocity::DEFAULT_MAX_LAG)]
    pub max_lag: usize,
    #[arg(long, value_enum, default_value = "unweighted")]
    pub weighting: WeightingArg,
}

#[derive(Args, Debug)]
pub struct ReciprocityArgs {
    #[command(flatten)]
    pub null: NullArgs,
    #[arg(long, default_value = "all")]
    pub class: PairClassSel,
    /// Per-pair ratios behind the class mean.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EnvelopeArgs {
    #[command(flatten)]
    pub null: NullArgs,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GlmmArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub kinship: Option<PathBuf>,
    /// Preset name (A–F) or a model-spec TOML file; repeatable.
    #[arg(long = "model")]
    pub models: Vec<String>,
    /// Outcome-shuffle refits per model for p-values; 0 skips them.
    #[arg(long, default_value_t = 0)]
    pub shuffle: usize,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub null: NullArgs,
    #[arg(long = "model")]
    pub models: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub shuffle: usize,
    /// Leave out the regression models.
    #[arg(long)]
    pub no_glmm: bool,
    #[arg(long, default_value = "report")]
    pub out_dir: PathBuf,
}

/// Tracks inputs and outputs for the manifest.
struct Run {
    command: &'static str,
    seed: u64,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: String,
}

impl Run {
    fn new(command: &'static str, seed: u64) -> Self {
        Run {
            command,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: now(),
        }
    }

    fn read(&mut self, path: &Path) -> CliResult<String> {
        self.inputs.push(path.to_path_buf());
        fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
    }

    fn create(&mut self, path: &Path) -> CliResult<BufWriter<fs::File>> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
        }
        self.outputs.push(path.to_path_buf());
        fs::File::create(path)
            .map(BufWriter::new)
            .map_err(|e| CliError::Io(path.to_path_buf(), e))
    }

    fn write(&mut self, path: &Path, text: &str) -> CliResult<()> {
        let mut w = self.create(path)?;
        w.write_all(text.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .and_then(|_| w.flush())
            .map_err(|e| CliError::Io(path.to_path_buf(), e))
    }

    fn finish(self, dir: &Path, status: Status) -> CliResult<Status> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| manifest::hash_file(p).map_err(|e| CliError::Io(p.clone(), e)))
            .collect::<CliResult<Vec<_>>>()?;
        let args: Vec<String> = std::env::args().skip(1).collect();
        let mut outputs: Vec<String> = self
            .outputs
            .iter()
            .map(|p| p.strip_prefix(dir).unwrap_or(p).display().to_string())
            .collect();
        outputs.sort();
        let run = RunManifest {
            command: self.command.to_string(),
            config_hash: manifest::config_hash(&args),
            args,
            inputs,
            outputs,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started: self.started,
            finished: now(),
            status: match status {
                Status::Ok => "ok",
                Status::NotConverged => "not_converged",
            }
            .to_string(),
        };
        let io = |e| CliError::Io(dir.to_path_buf(), e);
        fs::create_dir_all(dir).map_err(io)?;
        manifest::record(dir, run).map_err(io)?;
        Ok(status)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(Error::Csv(e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run(command: &Command, g: &Global) -> CliResult<Status> {
    match command {
        Command::Ingest(a) => ingest(a, g),
        Command::Synth(a) => synth(a, g),
        Command::FitNull(a) => fit_null_cmd(a, g),
        Command::Calibrate(a) => calibrate(a, g),
        Command::Reciprocity(a) => reciprocity(a, g),
        Command::Glmm(a) => glmm(a, g),
        Command::Envelope(a) => envelope(a, g),
        Command::Report(a) => report(a, g),
    }
}

fn load_log(run: &mut Run, path: &Path) -> CliResult<EventLog> {
    Ok(EventLog::from_json(&run.read(path)?)?)
}

/// Kinship aligned to the log's families; all zeros when no file is given.
fn load_kin(run: &mut Run, path: Option<&Path>, log: &EventLog) -> CliResult<(KinshipMatrix, bool)> {
    match path {
        Some(p) => {
            let text = run.read(p)?;
            let kin = KinshipMatrix::read_csv(text.as_bytes())?.aligned_to(log.families())?;
            Ok((kin, true))
        }
        None => {
            log::warn!("no kinship given; every pair is treated as unrelated");
            let ids = log.families().iter().map(|f| f.id.clone()).collect();
            Ok((KinshipMatrix::zeros(ids), false))
        }
    }
}

fn ingest(a: &IngestArgs, g: &Global) -> CliResult<Status> {
    if a.kinship_out.is_some() && a.pedigree.is_none() {
        return Err(CliError::Usage("--kinship-out needs --pedigree".into()));
    }
    let mut run = Run::new("ingest", g.seed);
    let families = read_families_csv(run.read(&a.families)?.as_bytes())?;
    let rows = read_interviews_csv(run.read(&a.interviews)?.as_bytes())?;
    let ing = ingest_csv(&rows, &families, g.seed)?;
    let log = &ing.reconciled.log;
    log::info!(
        "{} events over {} days, {} rejected claims",
        log.event_count(),
        log.n_days(),
        ing.reconciled.rejected.len()
    );
    run.write(&a.out, &log.to_json()?)?;
    if let Some(p) = &a.rejected {
        write_rejected(&mut run, p, &ing.reconciled.rejected)?;
    }
    if let Some(ped) = &a.pedigree {
        let pedigree = Pedigree::read_csv(run.read(ped)?.as_bytes())?;
        let kin = family_relatedness(&pedigree, &families)?;
        let path = a.kinship_out.clone().unwrap_or_else(|| out_dir(&a.out).join("kinship.csv"));
        let w = run.create(&path)?;
        kin.write_csv(w)?;
    }
    run.finish(&out_dir(&a.out), Status::Ok)
}

fn write_rejected(run: &mut Run, path: &Path, rejected: &[RejectedClaim]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(run.create(path)?);
    w.write_record(["reporter_id", "host_id", "guest_id", "day", "role", "reason"])
        .map_err(csv_err)?;
    for r in rejected {
        w.write_record([
            r.reporter.as_str(),
            r.claim.host.as_str(),
            r.claim.guest.as_str(),
            &r.claim.day.to_string(),
            &format!("{:?}", r.claim.role),
            r.reason.as_str(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn synth(a: &SynthArgs, g: &Global) -> CliResult<Status> {
    if a.dump_scenario {
        print!("{}", Scenario::default().to_toml()?);
        return Ok(Status::Ok);
    }
    let mut run = Run::new("synth", g.seed);
    let scenario = match &a.scenario {
        Some(p) => Scenario::from_toml(&run.read(p)?)?,
        None => Scenario::default(),
    };
    let gen = generate(&scenario, g.seed)?;
    let d = &a.out_dir;
    run.write(&d.join("scenario.toml"), scenario.to_toml()?.trim_end())?;
    run.write(&d.join("log.json"), &gen.log.to_json()?)?;
    run.write(&d.join("truth.json"), &serde_json::to_string(&gen.truth).map_err(Error::from)?)?;
    let w = run.create(&d.join("pedigree.csv"))?;
    gen.pedigree.write_csv(w)?;
    let w = run.create(&d.join("kinship.csv"))?;
    gen.kinship.write_csv(w)?;
    log::info!(
        "{} realized events, {} truth events ({} planted)",
        gen.log.event_count(),
        gen.truth.events.len(),
        gen.truth.planted_events
    );
    run.finish(d, Status::Ok)
}

fn fit_null_cmd(a: &FitNullArgs, g: &Global) -> CliResult<Status> {
    let mut run = Run::new("fit-null", g.seed);
    let log = load_log(&mut run, &a.log)?;
    let (kin, _) = load_kin(&mut run, a.kinship.as_deref(), &log)?;
    let model = fit_null(&log, &kin, a.level)?;
    run.write(&a.out, &model.to_json()?)?;
    run.finish(&out_dir(&a.out), Status::Ok)
}

fn calibrate(a: &CalibrateArgs, g: &Global) -> CliResult<Status> {
    let mut run = Run::new("calibrate", g.seed);
    let model = NullModel::from_json(&run.read(&a.null)?)?;
    let log = load_log(&mut run, &a.log)?;
    let target = a.target.unwrap_or(log.event_count() as f64);
    let c = calibrate_p_omit(&model, log.mask(), target, a.reps, g.seed)?;
    if !c.identified {
        log::warn!("omission probability is not identified by this log; stored as 0");
    }
    run.write(&a.out, &model.with_calibration(&c).to_json()?)?;
    if let Some(p) = &a.report {
        run.write(p, &serde_json::to_string_pretty(&c).map_err(Error::from)?)?;
    }
    run.finish(&out_dir(&a.out), Status::Ok)
}

struct NullInputs {
    log: EventLog,
    kin: KinshipMatrix,
    has_kin: bool,
    dist: NullDistribution,
}

fn null_inputs(run: &mut Run, a: &NullArgs, seed: u64) -> CliResult<NullInputs> {
    let log = load_log(run, &a.log)?;
    let (kin, has_kin) = load_kin(run, a.kinship.as_deref(), &log)?;
    let model = NullModel::from_json(&run.read(&a.null)?)?;
    let config = NullConfig {
        n_reps: a.reps,
        max_lag: a.max_lag,
        window: a.window,
        weighting: a.weighting.into(),
        seed,
    };
    let dist = NullDistribution::build(&model, log.mask(), &kin, config)?;
    Ok(NullInputs { log, kin, has_kin, dist })
}

fn window_stats(n: &NullInputs, curves: &[PairCurve], class: PairClassSel) -> ShortWindowStat {
    let cfg = n.dist.config();
    short_window_stat(curves, cfg.window, class, &n.kin, n.dist.means(), Some(n.dist.window_null(class)))
}

fn write_window_csv(run: &mut Run, path: &Path, stats: &[(ShortWindowStat, usize)]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(run.create(path)?);
    w.write_record(["class", "window", "R_hat", "n_pairs", "dropped", "n_null", "p_value"])
        .map_err(csv_err)?;
    for (s, n_null) in stats {
        w.write_record([
            s.class.as_str().to_string(),
            s.window.to_string(),
            fmt_opt(s.mean),
            s.n_pairs.to_string(),
            s.dropped.to_string(),
            n_null.to_string(),
            fmt_opt(s.p_value),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write_pairs_csv(run: &mut Run, path: &Path, log: &EventLog, stats: &[ShortWindowStat]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(run.create(path)?);
    w.write_record(["class", "host", "guest", "R_hat_window", "null_mean", "ratio"])
        .map_err(csv_err)?;
    let fam = log.families();
    for s in stats {
        for p in &s.per_pair {
            w.write_record([
                s.class.as_str(),
                fam[p.host].id.as_str(),
                fam[p.guest].id.as_str(),
                &p.value.to_string(),
                &p.null_mean.to_string(),
                &p.ratio.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn reciprocity(a: &ReciprocityArgs, g: &Global) -> CliResult<Status> {
    let mut run = Run::new("reciprocity", g.seed);
    let n = null_inputs(&mut run, &a.null, g.seed)?;
    let curves = n.dist.observed_curves(&n.log)?;
    let s = window_stats(&n, &curves, a.class);
    let n_null = n.dist.window_null(a.class).len();
    if let Some(p) = &a.pairs {
        write_pairs_csv(&mut run, p, &n.log, std::slice::from_ref(&s))?;
    }
    write_window_csv(&mut run, &a.out, &[(s, n_null)])?;
    run.finish(&out_dir(&a.out), Status::Ok)
}

fn envelope(a: &EnvelopeArgs, g: &Global) -> CliResult<Status> {
    let mut run = Run::new("envelope", g.seed);
    let n = null_inputs(&mut run, &a.null, g.seed)?;
    let env = n.dist.evaluate(&n.log)?;
    let flags: Vec<bool> = env.rows.iter().filter_map(|r| r.outside_2sigma()).collect();
    log::info!(
        "{} of {} entries outside the 2σ band",
        flags.iter().filter(|f| **f).count(),
        flags.len()
    );
    env.write_csv(run.create(&a.out)?)?;
    run.finish(&out_dir(&a.out), Status::Ok)
}

fn model_specs(run: &mut Run, names: &[String], has_kin: bool) -> CliResult<Vec<ModelSpec>> {
    if names.is_empty() {
        let defaults: &[&str] = if has_kin { &["A", "B", "C", "D", "E", "F"] } else { &["A", "B", "C"] };
        return defaults.iter().map(|n| Ok(ModelSpec::preset(n)?)).collect();
    }
    names
        .iter()
        .map(|n| {
            if n.len() == 1 {
                Ok(ModelSpec::preset(n)?)
            } else {
                Ok(ModelSpec::from_toml(&run.read(Path::new(n))?)?)
            }
        })
        .collect()
}

fn shuffle_statistics(f: &GlmmFit) -> Vec<ShuffleStatistic> {
    let mut s: Vec<ShuffleStatistic> = f
        .variances
        .iter()
        .map(|v| ShuffleStatistic::Variance { term: v.term })
        .collect();
    s.extend(
        f.columns
            .iter()
            .filter(|c| *c != "intercept" && !c.starts_with("week_"))
            .map(|c| ShuffleStatistic::Coefficient {
                name: c.clone(),
                two_sided: true,
            }),
    );
    s
}

/// Fit every model, write one JSON per fit and the combined table.
fn fit_models(
    run: &mut Run,
    log: &EventLog,
    kin: Option<&KinshipMatrix>,
    specs: &[ModelSpec],
    shuffle: usize,
    seed: u64,
    dir: &Path,
) -> CliResult<Status> {
    let cov = Covariates { kinship: kin, distances: None };
    let opts = FitOptions::default();
    let mut fits = Vec::new();
    let mut pvals: Vec<Vec<ShuffleResult>> = Vec::new();
    let mut status = Status::Ok;
    for (m, spec) in specs.iter().enumerate() {
        let design = build_design(log, cov, spec)?;
        let f = match fit(&design, opts) {
            Ok(f) => f,
            Err(Error::Numerical(msg)) => {
                log::error!("model {}: {msg}", spec.name);
                status = Status::NotConverged;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        if !f.convergence.ok() {
            log::warn!("model {} did not converge", spec.name);
            status = Status::NotConverged;
        }
        let p = if shuffle > 0 {
            shuffle_significance(&design, &f, &shuffle_statistics(&f), shuffle, rng::derive(seed, 100 + m as u64), opts)?
        } else {
            Vec::new()
        };
        run.write(&dir.join(format!("fit_{}.json", spec.name)), &f.to_json()?)?;
        fits.push(f);
        pvals.push(p);
    }
    write_table_csv(run.create(&dir.join("table.csv"))?, &fits, &pvals)?;
    Ok(status)
}

fn glmm(a: &GlmmArgs, g: &Global) -> CliResult<Status> {
    let mut run = Run::new("glmm", g.seed);
    let log = load_log(&mut run, &a.log)?;
    let (kin, has_kin) = load_kin(&mut run, a.kinship.as_deref(), &log)?;
    let specs = model_specs(&mut run, &a.models, has_kin)?;
    let status = fit_models(&mut run, &log, has_kin.then_some(&kin), &specs, a.shuffle, g.seed, &a.out_dir)?;
    run.finish(&a.out_dir, status)
}

fn write_curves_csv(run: &mut Run, path: &Path, log: &EventLog, kin: &KinshipMatrix, curves: &[PairCurve]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(run.create(path)?);
    w.write_record(["host", "guest", "close_kin", "dt", "R_hat", "hh", "oo", "ho", "oh"])
        .map_err(csv_err)?;
    let fam = log.families();
    for c in curves {
        let close = kin.class(c.host, c.guest).is_close_kin();
        for (lag, t) in c.tallies.iter().enumerate() {
            w.write_record([
                fam[c.host].id.clone(),
                fam[c.guest].id.clone(),
                close.to_string(),
                lag.to_string(),
                fmt_opt(t.estimate()),
                t.hh.to_string(),
                t.oo.to_string(),
                t.ho.to_string(),
                t.oh.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// Observed events and observable pair-days per week.
fn write_weekly_csv(run: &mut Run, path: &Path, log: &EventLog) -> CliResult<()> {
    let (n, t_max) = (log.n_families(), log.n_days());
    let weeks = t_max.div_ceil(7);
    let mut events = vec![0u64; weeks];
    let mut risk = vec![0u64; weeks];
    for (_, _, t, _) in log.iter_events() {
        events[t / 7] += 1;
    }
    let mask = log.mask();
    for t in 0..t_max {
        for i in 0..n {
            for j in 0..n {
                if i != j && mask.observed(i, j, t) {
                    risk[t / 7] += 1;
                }
            }
        }
    }
    let mut w = csv::Writer::from_writer(run.create(path)?);
    w.write_record(["week", "events", "risk", "rate"]).map_err(csv_err)?;
    for k in 0..weeks {
        let rate = (risk[k] > 0).then(|| events[k] as f64 / risk[k] as f64);
        w.write_record([k.to_string(), events[k].to_string(), risk[k].to_string(), fmt_opt(rate)])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn report(a: &ReportArgs, g: &Global) -> CliResult<Status> {
    let mut run = Run::new("report", g.seed);
    let d = &a.out_dir;
    let n = null_inputs(&mut run, &a.null, g.seed)?;
    let env = n.dist.evaluate(&n.log)?;
    env.write_csv(run.create(&d.join("envelope.csv"))?)?;

    let curves = n.dist.observed_curves(&n.log)?;
    let stats: Vec<ShortWindowStat> = PairClassSel::ALL.iter().map(|&c| window_stats(&n, &curves, c)).collect();
    let with_n: Vec<(ShortWindowStat, usize)> = stats
        .iter()
        .map(|s| (s.clone(), n.dist.window_null(s.class).len()))
        .collect();
    write_window_csv(&mut run, &d.join("window.csv"), &with_n)?;
    write_pairs_csv(&mut run, &d.join("window_pairs.csv"), &n.log, &stats)?;
    write_curves_csv(&mut run, &d.join("pair_curves.csv"), &n.log, &n.kin, &curves)?;
    write_weekly_csv(&mut run, &d.join("weekly.csv"), &n.log)?;

    let summary = summary_stats(&n.log);
    let overview = serde_json::json!({
        "families": n.log.n_families(),
        "days": n.log.n_days(),
        "events": summary.overall.events,
        "risk": summary.overall.risk,
        "hosting_rate": summary.overall_rate(),
        "active_dyads": summary.active_dyads,
        "reciprocal_pairs": curves.len(),
        "null_level": env.level.as_str(),
        "null_reps": env.n_reps,
        "window": env.window,
    });
    run.write(
        &d.join("summary.json"),
        &serde_json::to_string_pretty(&overview).map_err(Error::from)?,
    )?;

    let mut status = Status::Ok;
    if !a.no_glmm {
        let specs = model_specs(&mut run, &a.models, n.has_kin)?;
        status = fit_models(&mut run, &n.log, n.has_kin.then_some(&n.kin), &specs, a.shuffle, g.seed, d)?;
    }
    run.finish(d, status)
}
