//! Command-line surface: configuration, provenance and the pipeline commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::effects::{moderator_curves, write_curves_csv, zone_effects, Grid};
use crate::error::{Error, Result};
use crate::estimate::{fit, Estimator, ModelSpec};
use crate::ingest::{DatasetPaths, RawInputs};
use crate::metrics::{compute_metrics, Exclusion, MetricsConfig, MetricsTable};
use crate::panel::assemble_design;
use crate::sensitivity::{aggregation_sweep, compare, hourly_null_check, leave_one_out, weights_variant};
use crate::spatial::{build_weights, WeightScheme};
use crate::synth::{generate_hourly, generate_panel, DgpConfig, MeritOrderConfig};
use crate::types::{Aggregation, Technology};

/// Environment variable naming a directory for cached metrics tables.
pub const CACHE_ENV: &str = "SPILLOVER_CACHE_DIR";

#[derive(Debug, Parser)]
#[command(name = "spillover", version, about = "Domestic and cross-border cannibalization of wind and solar value")]
pub struct Cli {
    /// TOML configuration file; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for the synthetic generators.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    #[arg(long)]
    pub technology: Option<Technology>,
    #[arg(long)]
    pub aggregation: Option<Aggregation>,
    #[arg(long)]
    pub estimator: Option<Estimator>,
    #[arg(long)]
    pub weights: Option<WeightScheme>,
    #[arg(long)]
    pub hac_lags: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and index the hourly inputs.
    Ingest,
    /// Compute the zone-period metrics table.
    Metrics(ModelFlags),
    /// Fit the model and write the result JSON and table.
    Fit {
        #[command(flatten)]
        model: ModelFlags,
        /// Also write the design matrix as CSV.
        #[arg(long)]
        dump_design: bool,
    },
    /// Conditional effect curves and zone-level effects.
    Effects {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Robustness sweeps.
    #[command(subcommand)]
    Sensitivity(SensitivityCommand),
    /// Synthetic data generators.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Run the whole pipeline into one directory.
    Report(ModelFlags),
}

#[derive(Debug, Subcommand)]
pub enum SensitivityCommand {
    Loo(ModelFlags),
    Aggregation {
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<Aggregation>>,
    },
    Weights(ModelFlags),
    Estimators(ModelFlags),
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Panel data with known coefficients (metrics table plus truth record).
    Panel,
    /// Hourly merit-order market data in the ingest schemas.
    Hourly,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub topology: Option<PathBuf>,
    pub hourly: Vec<PathBuf>,
    pub exchanges: Vec<PathBuf>,
    pub fuel: Option<PathBuf>,
    pub hydro: Option<PathBuf>,
    /// A metrics table directory used instead of hourly inputs.
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffectsConfig {
    pub grid_points: usize,
    pub moderators: Vec<String>,
}

impl Default for EffectsConfig {
    fn default() -> Self {
        EffectsConfig {
            grid_points: crate::effects::DEFAULT_GRID_POINTS,
            moderators: ["ic", "hydro_pumped", "hydro_reservoir", "fuel_ratio", "load_corr", "cov"]
                .map(String::from)
                .to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    pub levels: Vec<Aggregation>,
    /// Days of data used by the hourly degenerate check (0 disables it).
    pub hourly_check_days: u32,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            levels: vec![Aggregation::Daily, Aggregation::Monthly, Aggregation::Annual],
            hourly_check_days: 90,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub technologies: Vec<Technology>,
    pub leave_one_out: bool,
    pub aggregation: bool,
    pub weights: bool,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            technologies: Technology::ALL.to_vec(),
            leave_one_out: true,
            aggregation: true,
            weights: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub panel: DgpConfig,
    pub hourly: MeritOrderConfig,
}

/// The whole declarative configuration. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataConfig,
    /// Its aggregation is always taken from `[model]`.
    pub metrics: MetricsConfig,
    pub model: ModelSpec,
    pub effects: EffectsConfig,
    pub sensitivity: SensitivityConfig,
    pub report: ReportConfig,
    pub synth: SynthConfig,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    fn apply(&mut self, flags: &ModelFlags) {
        if let Some(t) = flags.technology {
            self.model.technology = t;
        }
        if let Some(a) = flags.aggregation {
            self.model.aggregation = a;
        }
        if let Some(e) = flags.estimator {
            self.model.estimator = e;
        }
        if let Some(w) = flags.weights {
            self.model.weights = w;
        }
        if flags.hac_lags.is_some() {
            self.model.hac_lags = flags.hac_lags;
        }
        self.metrics.aggregation = self.model.aggregation;
    }
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config_sha256: String,
    config: &'a Config,
    inputs: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

/// Resolved run context: configuration plus base directory for its paths.
struct Context {
    config: Config,
    base: PathBuf,
    out: PathBuf,
}

impl Context {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Input files as written in the config, with their digests.
    fn input_files(&self) -> Vec<(String, PathBuf)> {
        let d = &self.config.data;
        let mut files = Vec::new();
        let mut add = |p: &PathBuf| files.push((p.display().to_string(), self.resolve(p)));
        d.topology.iter().for_each(&mut add);
        d.hourly.iter().for_each(&mut add);
        d.exchanges.iter().for_each(&mut add);
        d.fuel.iter().for_each(&mut add);
        d.hydro.iter().for_each(&mut add);
        if let Some(m) = &d.metrics {
            for name in ["metrics.csv", "controls.csv", "interconnectors.csv", "interconnector_totals.csv"] {
                files.push((format!("{}/{name}", m.display()), self.resolve(m).join(name)));
            }
        }
        files
    }

    fn digests(&self) -> Result<BTreeMap<String, String>> {
        self.input_files()
            .into_iter()
            .filter(|(_, p)| p.exists())
            .map(|(k, p)| Ok((k, file_digest(&p)?)))
            .collect()
    }

    fn write_provenance(&self, command: &str) -> Result<()> {
        let config_json = serde_json::to_string(&self.config).expect("config serializes");
        let prov = Provenance {
            tool: "spillover",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: sha256_hex(config_json.as_bytes()),
            config: &self.config,
            inputs: self.digests()?,
        };
        write_file(&self.out.join("provenance.json"), &to_json(&prov))
    }

    fn has_hourly(&self) -> bool {
        !self.config.data.hourly.is_empty()
    }

    fn raw_inputs(&self) -> Result<(RawInputs, crate::ingest::LoadReport)> {
        let d = &self.config.data;
        let need = |p: &Option<PathBuf>, what: &str| -> Result<PathBuf> {
            p.as_ref()
                .map(|p| self.resolve(p))
                .ok_or_else(|| Error::Config(format!("[data] {what} is required")))
        };
        if d.hourly.is_empty() {
            return Err(Error::Config("[data] hourly is required".into()));
        }
        let paths = DatasetPaths {
            hourly: d.hourly.iter().map(|p| self.resolve(p)).collect(),
            exchanges: d.exchanges.iter().map(|p| self.resolve(p)).collect(),
        };
        RawInputs::load(&need(&d.topology, "topology")?, &paths, &need(&d.fuel, "fuel")?, &need(&d.hydro, "hydro")?)
    }

    fn topology(&self) -> Result<crate::ingest::ZoneTopology> {
        let p = self
            .config
            .data
            .topology
            .as_ref()
            .ok_or_else(|| Error::Config("[data] topology is required".into()))?;
        crate::ingest::ZoneTopology::load(&self.resolve(p))
    }

    /// Metrics at the model's aggregation, from a stored table, the cache, or the hourly data.
    fn metrics(&self, inputs: Option<&RawInputs>) -> Result<MetricsTable> {
        if let Some(dir) = &self.config.data.metrics {
            if !self.has_hourly() || self.config.metrics.aggregation == self.stored_aggregation(dir)? {
                return MetricsTable::read_dir(&self.resolve(dir));
            }
        }
        let cache = std::env::var_os(CACHE_ENV).map(PathBuf::from);
        let key = match &cache {
            Some(_) => {
                let mut h = serde_json::to_string(&self.digests()?).expect("digests serialize");
                h.push_str(&serde_json::to_string(&self.config.metrics).expect("config serializes"));
                Some(sha256_hex(h.as_bytes()))
            }
            None => None,
        };
        if let (Some(c), Some(k)) = (&cache, &key) {
            let dir = c.join(k);
            if dir.join("metrics.csv").exists() {
                log::info!("metrics table read from cache {}", dir.display());
                let mut t = MetricsTable::read_dir(&dir)?;
                t.exclusions = read_exclusions(&dir.join("exclusions.csv"))?;
                return Ok(t);
            }
        }
        let owned;
        let inputs = match inputs {
            Some(i) => i,
            None => {
                owned = self.raw_inputs()?.0;
                &owned
            }
        };
        let table = compute_metrics(inputs, &self.config.metrics)?;
        if let (Some(c), Some(k)) = (&cache, &key) {
            let dir = c.join(k);
            table.write_dir(&dir)?;
            write_exclusions(&table.exclusions, &dir.join("exclusions.csv"))?;
        }
        Ok(table)
    }

    fn stored_aggregation(&self, dir: &Path) -> Result<Aggregation> {
        let t = MetricsTable::read_dir(&self.resolve(dir))?;
        Ok(t.metrics.first().map_or(self.config.metrics.aggregation, |m| m.period.aggregation()))
    }
}

fn write_exclusions(ex: &[Exclusion], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["zone", "period", "technology", "reason"]).map_err(csv_err)?;
    for e in ex {
        let tech = e.technology.map(|t| t.as_str().to_string()).unwrap_or_default();
        w.write_record([e.zone.as_str(), &e.period, &tech, &e.reason]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    write_file(path, &String::from_utf8(bytes).expect("utf-8 csv"))
}

fn read_exclusions(path: &Path) -> Result<Vec<Exclusion>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        out.push(Exclusion {
            zone: rec[0].into(),
            period: rec[1].to_string(),
            technology: if rec[2].is_empty() { None } else { Some(rec[2].parse()?) },
            reason: rec[3].to_string(),
        });
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

fn load_context(cli: &Cli) -> Result<Context> {
    let (config, base) = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (Config::from_toml_str(&text)?, base)
        }
        None => (Config::default(), PathBuf::from(".")),
    };
    let mut config = config;
    if let Some(seed) = cli.seed {
        config.synth.panel.seed = seed;
        config.synth.hourly.seed = seed;
    }
    config.metrics.aggregation = config.model.aggregation;
    Ok(Context {
        config,
        base,
        out: cli.out.clone().unwrap_or_else(|| PathBuf::from("out")),
    })
}

/// Parses arguments and runs the command.
pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let mut ctx = load_context(&cli)?;
    match &cli.command {
        Command::Ingest => cmd_ingest(&ctx),
        Command::Metrics(f) => {
            ctx.config.apply(f);
            cmd_metrics(&ctx)
        }
        Command::Fit { model, dump_design } => {
            ctx.config.apply(model);
            cmd_fit(&ctx, *dump_design)
        }
        Command::Effects { model, grid_points } => {
            ctx.config.apply(model);
            if let Some(g) = grid_points {
                ctx.config.effects.grid_points = *g;
            }
            cmd_effects(&ctx)
        }
        Command::Sensitivity(s) => match s {
            SensitivityCommand::Loo(f) => {
                ctx.config.apply(f);
                cmd_loo(&ctx, &ctx.out)
            }
            SensitivityCommand::Aggregation { model, levels } => {
                ctx.config.apply(model);
                if let Some(l) = levels {
                    ctx.config.sensitivity.levels = l.clone();
                }
                cmd_aggregation(&ctx, None, &ctx.out)
            }
            SensitivityCommand::Weights(f) => {
                ctx.config.apply(f);
                cmd_weights(&ctx, &ctx.out)
            }
            SensitivityCommand::Estimators(f) => {
                ctx.config.apply(f);
                cmd_estimators(&ctx)
            }
        },
        Command::Synth(SynthCommand::Panel) => cmd_synth_panel(&ctx),
        Command::Synth(SynthCommand::Hourly) => cmd_synth_hourly(&ctx),
        Command::Report(f) => {
            ctx.config.apply(f);
            cmd_report(&ctx)
        }
    }
}

fn cmd_ingest(ctx: &Context) -> Result<()> {
    let (_, report) = ctx.raw_inputs()?;
    write_file(&ctx.out.join("load_report.json"), &to_json(&report))?;
    let mut text = String::from("zone,rows,rejected,first,last,gaps\n");
    for (z, s) in &report.zones {
        let ts = |h: &Option<String>| h.clone().unwrap_or_default();
        text.push_str(&format!("{z},{},{},{},{},{}\n", s.rows, s.rejected, ts(&s.first), ts(&s.last), s.gaps.len()));
    }
    write_file(&ctx.out.join("zones.csv"), &text)?;
    ctx.write_provenance("ingest")
}

fn write_metrics(table: &MetricsTable, dir: &Path) -> Result<()> {
    table.write_dir(dir)?;
    write_exclusions(&table.exclusions, &dir.join("exclusions.csv"))
}

fn cmd_metrics(ctx: &Context) -> Result<()> {
    let table = ctx.metrics(None)?;
    write_metrics(&table, &ctx.out.join("metrics"))?;
    let topo = ctx.topology()?;
    for scheme in [WeightScheme::IcWeighted, WeightScheme::BinaryUniform] {
        build_weights(&topo, &table.interconnectors, scheme).write_csv(&ctx.out.join(format!("weights_{scheme}.csv")))?;
    }
    ctx.write_provenance("metrics")
}

fn write_result(r: &crate::estimate::ModelResult, dir: &Path) -> Result<()> {
    let e = r.estimator.as_str();
    write_file(&dir.join(format!("result_{e}.json")), &to_json(r))?;
    write_file(&dir.join(format!("table_{e}.txt")), &r.to_table())
}

fn cmd_fit(ctx: &Context, dump: bool) -> Result<()> {
    let table = ctx.metrics(None)?;
    let topo = ctx.topology()?;
    let spec = &ctx.config.model;
    let w = build_weights(&topo, &table.interconnectors, spec.weights);
    let panel = assemble_design(spec, &table, &w)?;
    if dump {
        std::fs::create_dir_all(&ctx.out).map_err(|e| Error::io(&ctx.out, e))?;
        panel.design.write_csv(&panel.y, &ctx.out.join("design.csv"))?;
    }
    let r = fit(spec, &panel)?;
    for w in &r.warnings {
        log::warn!("{w}");
    }
    write_result(&r, &ctx.out)?;
    ctx.write_provenance("fit")
}

fn effects_into(ctx: &Context, r: &crate::estimate::ModelResult, dir: &Path) -> Result<()> {
    let mods: Vec<&str> = ctx.config.effects.moderators.iter().map(String::as_str).collect();
    let curves = moderator_curves(r, &mods, &Grid::Range(ctx.config.effects.grid_points))?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_curves_csv(&curves, &dir.join("effect_curves.csv"))?;
    let mut summary = serde_json::Map::new();
    summary.insert(
        "curves".into(),
        serde_json::to_value(
            curves
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "variable": c.variable, "moderator": c.moderator, "interaction": c.interaction,
                        "grand_mean": c.grand_mean, "root": c.root, "crosses_zero": c.crosses_zero,
                    })
                })
                .collect::<Vec<_>>(),
        )
        .expect("json"),
    );
    if r.moderators.contains_key("ic.between") && r.index(&format!("nbr_{}", r.spec.technology)).is_some() {
        let z = zone_effects(r, &r.zone_ic)?;
        z.write_csv(&dir.join("zone_effects.csv"))?;
        summary.insert("combined_at_mean".into(), serde_json::to_value(&z.combined_at_mean).expect("json"));
    }
    write_file(&dir.join("effects.json"), &to_json(&summary))
}

fn cmd_effects(ctx: &Context) -> Result<()> {
    let table = ctx.metrics(None)?;
    let topo = ctx.topology()?;
    let spec = &ctx.config.model;
    let w = build_weights(&topo, &table.interconnectors, spec.weights);
    let r = crate::estimate::fit_metrics(spec, &table, &w)?;
    effects_into(ctx, &r, &ctx.out)?;
    ctx.write_provenance("effects")
}

fn cmd_loo(ctx: &Context, dir: &Path) -> Result<()> {
    let table = ctx.metrics(None)?;
    let topo = ctx.topology()?;
    let w = build_weights(&topo, &table.interconnectors, ctx.config.model.weights);
    let s = leave_one_out(&ctx.config.model, &table, &w)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    s.write_csv(&dir.join("loo.csv"))?;
    s.write_runs_json(&dir.join("loo_runs.json"))?;
    if dir == ctx.out {
        ctx.write_provenance("sensitivity loo")?;
    }
    Ok(())
}

fn cmd_aggregation(ctx: &Context, inputs: Option<&RawInputs>, dir: &Path) -> Result<()> {
    if !ctx.has_hourly() {
        return Err(Error::Config("the aggregation sweep needs hourly inputs in [data]".into()));
    }
    let owned;
    let inputs = match inputs {
        Some(i) => i,
        None => {
            owned = ctx.raw_inputs()?.0;
            &owned
        }
    };
    let s = aggregation_sweep(&ctx.config.model, inputs, &ctx.config.metrics, &ctx.config.sensitivity.levels)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    s.write_csv(&dir.join("aggregation.csv"))?;
    s.write_runs_json(&dir.join("aggregation_runs.json"))?;
    let days = ctx.config.sensitivity.hourly_check_days;
    if days > 0 {
        let start = inputs.store.zones.values().filter_map(|z| z.hours.first().copied()).min();
        if let Some(h0) = start {
            let check = hourly_null_check(&ctx.config.model, inputs, &ctx.config.metrics, Some(h0..h0 + 24 * days as i64))?;
            write_file(&dir.join("hourly_check.json"), &to_json(&check))?;
        }
    }
    if dir == ctx.out {
        ctx.write_provenance("sensitivity aggregation")?;
    }
    Ok(())
}

fn cmd_weights(ctx: &Context, dir: &Path) -> Result<()> {
    let table = ctx.metrics(None)?;
    let topo = ctx.topology()?;
    let s = weights_variant(&ctx.config.model, &table, &topo)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    s.write_csv(&dir.join("weights.csv"))?;
    s.write_runs_json(&dir.join("weights_runs.json"))?;
    if dir == ctx.out {
        ctx.write_provenance("sensitivity weights")?;
    }
    Ok(())
}

fn cmd_estimators(ctx: &Context) -> Result<()> {
    let table = ctx.metrics(None)?;
    let topo = ctx.topology()?;
    let w = build_weights(&topo, &table.interconnectors, ctx.config.model.weights);
    let c = crate::sensitivity::estimator_comparison(&ctx.config.model, &table, &w)?;
    std::fs::create_dir_all(&ctx.out).map_err(|e| Error::io(&ctx.out, e))?;
    c.write_csv(&ctx.out.join("estimators.csv"))?;
    ctx.write_provenance("sensitivity estimators")
}

fn cmd_synth_panel(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config.synth.panel;
    let p = generate_panel(cfg)?;
    write_metrics(&p.metrics, &ctx.out.join("metrics"))?;
    write_file(&ctx.out.join("topology.toml"), &p.topology.to_toml_string())?;
    write_file(&ctx.out.join("truth.json"), &to_json(&p.truth))?;
    let mut next = Config {
        model: p.spec.clone(),
        ..Config::default()
    };
    next.data.topology = Some("topology.toml".into());
    next.data.metrics = Some("metrics".into());
    next.report.technologies = vec![cfg.technology];
    next.report.aggregation = false;
    write_file(&ctx.out.join("config.toml"), &toml_string(&next)?)?;
    ctx.write_provenance("synth panel")
}

fn toml_string(c: &Config) -> Result<String> {
    toml::to_string(c).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
}

fn cmd_synth_hourly(ctx: &Context) -> Result<()> {
    let m = generate_hourly(&ctx.config.synth.hourly)?;
    m.write(&ctx.out)?;
    let mut next = ctx.config.clone();
    next.data = DataConfig {
        topology: Some("topology.toml".into()),
        hourly: vec!["hourly.csv".into()],
        exchanges: vec!["exchanges.csv".into()],
        fuel: Some("fuel.csv".into()),
        hydro: Some("hydro.csv".into()),
        metrics: None,
    };
    write_file(&ctx.out.join("config.toml"), &toml_string(&next)?)?;
    ctx.write_provenance("synth hourly")
}

fn cmd_report(ctx: &Context) -> Result<()> {
    let inputs = if ctx.has_hourly() {
        let (inputs, report) = ctx.raw_inputs()?;
        write_file(&ctx.out.join("load_report.json"), &to_json(&report))?;
        Some(inputs)
    } else {
        None
    };
    let table = ctx.metrics(inputs.as_ref())?;
    write_metrics(&table, &ctx.out.join("metrics"))?;
    let topo = ctx.topology()?;
    for scheme in [WeightScheme::IcWeighted, WeightScheme::BinaryUniform] {
        build_weights(&topo, &table.interconnectors, scheme).write_csv(&ctx.out.join(format!("weights_{scheme}.csv")))?;
    }
    let rc = &ctx.config.report;
    for &tech in &rc.technologies {
        let mut sub = Context {
            config: ctx.config.clone(),
            base: ctx.base.clone(),
            out: ctx.out.join(tech.as_str()),
        };
        sub.config.model.technology = tech;
        let spec = &sub.config.model;
        let w = build_weights(&topo, &table.interconnectors, spec.weights);
        let panel = assemble_design(spec, &table, &w)?;
        let rewb = fit(&ModelSpec { estimator: Estimator::Rewb, ..spec.clone() }, &panel)?;
        let fe = fit(&ModelSpec { estimator: Estimator::Fe, ..spec.clone() }, &panel)?;
        write_result(&rewb, &sub.out)?;
        write_result(&fe, &sub.out)?;
        compare(&rewb, &fe).write_csv(&sub.out.join("estimators.csv"))?;
        effects_into(&sub, &rewb, &sub.out)?;
        if rc.leave_one_out {
            let s = leave_one_out(spec, &table, &w)?;
            s.write_csv(&sub.out.join("loo.csv"))?;
            s.write_runs_json(&sub.out.join("loo_runs.json"))?;
        }
        if rc.weights {
            let s = weights_variant(spec, &table, &topo)?;
            s.write_csv(&sub.out.join("weights.csv"))?;
            s.write_runs_json(&sub.out.join("weights_runs.json"))?;
        }
        if rc.aggregation && inputs.is_some() {
            cmd_aggregation(&sub, inputs.as_ref(), &sub.out)?;
        }
    }
    ctx.write_provenance("report")
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    exit_code: i32,
    message: String,
}

/// Machine-readable error line for stderr.
pub fn error_json(e: &Error) -> String {
    serde_json::to_string(&ErrorReport {
        error: e.kind(),
        exit_code: e.exit_code(),
        message: e.to_string(),
    })
    .expect("error serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_valid() {
        let c = Config::from_toml_str("").unwrap();
        assert_eq!(c, Config::default());
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let e = Config::from_toml_str("[model]\ntechnolgy = \"wind\"\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn flags_override_config() {
        let mut c = Config::from_toml_str("[model]\ntechnology = \"wind\"\naggregation = \"monthly\"\n").unwrap();
        c.apply(&ModelFlags {
            technology: Some(Technology::Solar),
            aggregation: Some(Aggregation::Daily),
            ..Default::default()
        });
        assert_eq!(c.model.technology, Technology::Solar);
        assert_eq!(c.metrics.aggregation, Aggregation::Daily);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = Config::default();
        let again = Config::from_toml_str(&toml_string(&c).unwrap()).unwrap();
        assert_eq!(again, c);
    }
}
