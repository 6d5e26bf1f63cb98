//! Command-line front end: run configuration, subcommands and exit codes.
//!
//! Settings come from an optional TOML file and are overridden by flags. Each
//! flag is applied as a dotted key (`--folds 5` sets `folds.k`), and `--set
//! key=value` reaches any other field, e.g. `--set params.rf.n_trees=50`.
//!
//! Output layout under `out_dir`:
//!
//! ```text
//! features/features_{A,P,AL}.csv, features/extraction_log.csv
//! experiment/{single,merged}_{cells.csv,table.md,report.json}
//! selection/traces/<group>_<set>.csv, selection/traces.json
//! selection/selected_{cells.csv,table.md,report.json}
//! selection/histogram_{RW,NRW,NW}.{csv,svg}, selection/histograms.json
//! report/report.md
//! ```

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{
    run_merged_experiment, run_single_task_experiment, ClassifierParams, EvalReport, ExperimentConfig, FoldConfig,
    Mode, RowGroup,
};
use crate::features::{extract_study, FeatureSet, FeatureTable};
use crate::ink_model::{validate_study, Category, StatusRule, Study};
use crate::kinematics::SmoothingConfig;
use crate::learners::ModelKind;
use crate::report::{histogram_svg, render_markdown, write_cells_csv, TableKind};
use crate::selection::{evaluate_selected, occurrence_histogram, run_selection, OccurrenceHistogram, RfeConfig, SelectionTrace};
use crate::synthcohort::{write_study, StudyRecipe};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_EXECUTION: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Markdown,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldSettings {
    pub k: usize,
    pub stratified: bool,
    pub group_aware: bool,
    /// Pools samples without participant grouping, as a plain k-fold would.
    pub paper_mode: bool,
}

impl Default for FoldSettings {
    fn default() -> Self {
        let f = FoldConfig::default();
        FoldSettings {
            k: f.k,
            stratified: f.stratified,
            group_aware: f.group_aware,
            paper_mode: false,
        }
    }
}

impl FoldSettings {
    pub fn fold_config(&self) -> FoldConfig {
        let f = FoldConfig {
            k: self.k,
            stratified: self.stratified,
            group_aware: self.group_aware,
        };
        if self.paper_mode {
            f.paper_mode()
        } else {
            f
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; required by `experiment` and `select`.
    pub seed: Option<u64>,
    pub study_dir: PathBuf,
    pub out_dir: PathBuf,
    pub formats: Vec<Format>,
    pub status: StatusRule,
    pub smoothing: SmoothingConfig,
    pub folds: FoldSettings,
    pub classifiers: Vec<ModelKind>,
    pub feature_sets: Vec<FeatureSet>,
    pub params: ClassifierParams,
    pub rfe: RfeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            study_dir: PathBuf::from("study"),
            out_dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Markdown, Format::Svg],
            status: StatusRule::default(),
            smoothing: SmoothingConfig::default(),
            folds: FoldSettings::default(),
            classifiers: ModelKind::CLASSIFIERS.to_vec(),
            feature_sets: FeatureSet::ALL.to_vec(),
            params: ClassifierParams::default(),
            rfe: RfeConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string().trim().to_string()))?;
        cfg.smoothing.validate()?;
        if cfg.folds.k < 2 {
            return Err(Error::Config("folds.k must be at least 2".into()));
        }
        if cfg.classifiers.is_empty() || cfg.feature_sets.is_empty() {
            return Err(Error::Config("classifiers and feature_sets must not be empty".into()));
        }
        Ok(cfg)
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let seed = self.seed.ok_or_else(|| {
            Error::Config("a master seed is required; pass --seed or set `seed` in the config file".into())
        })?;
        Ok(ExperimentConfig {
            folds: self.folds.fold_config(),
            feature_sets: self.feature_sets.clone(),
            classifiers: self.classifiers.clone(),
            params: self.params.clone(),
            seed,
        })
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn features_dir(&self) -> PathBuf {
        self.out_dir.join("features")
    }

    pub fn feature_path(&self, set: FeatureSet) -> PathBuf {
        self.features_dir().join(format!("features_{set}.csv"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "inkscreen", version, about = "Handwriting kinematics and classification experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub study_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Number of cross-validation folds.
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    #[arg(long, global = true)]
    pub stratified: Option<bool>,
    #[arg(long, global = true)]
    pub group_aware: Option<bool>,
    /// Ignore participant grouping when building folds.
    #[arg(long, global = true)]
    pub paper_mode: Option<bool>,
    #[arg(long, global = true)]
    pub smoothing: Option<bool>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub classifiers: Option<Vec<String>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub feature_sets: Option<Vec<String>>,
    /// Classifier scoring subsets during feature elimination.
    #[arg(long, global = true)]
    pub wrapper: Option<String>,
    /// `wrapper` or `importance`.
    #[arg(long, global = true)]
    pub rfe_mode: Option<String>,
    /// Score the selected subset on a held-out outer fold.
    #[arg(long, global = true)]
    pub honest: Option<bool>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub formats: Option<Vec<Format>>,
    /// Any other setting as `dotted.key=value`, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic study.
    Synth {
        /// Recipe TOML; the built-in recipe is used when omitted.
        #[arg(long)]
        recipe: Option<PathBuf>,
        /// Target directory; defaults to the study directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a study directory for parse errors and dangling references.
    Validate,
    /// Extract per-set feature tables.
    Extract,
    /// Cross-validate the classifier grid.
    Experiment {
        #[arg(long, value_enum, default_value = "single")]
        mode: ExperimentMode,
    },
    /// Recursive feature elimination, post-selection grid and histograms.
    Select,
    /// Re-render tables and charts from saved results.
    Report,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentMode {
    Single,
    Merged,
}

impl From<ExperimentMode> for Mode {
    fn from(m: ExperimentMode) -> Mode {
        match m {
            ExperimentMode::Single => Mode::Single,
            ExperimentMode::Merged => Mode::Merged,
        }
    }
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| Error::Config(format!("bad key {key:?}")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {p} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parses a flag value as a TOML value, falling back to a plain string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn strings(items: &[String], upper: bool) -> toml::Value {
    toml::Value::Array(
        items
            .iter()
            .map(|s| toml::Value::String(if upper { s.trim().to_ascii_uppercase() } else { s.trim().to_string() }))
            .collect(),
    )
}

impl GlobalArgs {
    /// Config file contents with every flag applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut table = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.to_string().trim())))?
            }
            None => toml::Table::new(),
        };
        let path_value = |p: &Path| toml::Value::String(p.to_string_lossy().into_owned());
        let mut pairs: Vec<(&str, toml::Value)> = Vec::new();
        if let Some(s) = self.seed {
            let s = i64::try_from(s).map_err(|_| Error::Config("seed must fit in 63 bits".into()))?;
            pairs.push(("seed", toml::Value::Integer(s)));
        }
        if let Some(p) = &self.study_dir {
            pairs.push(("study_dir", path_value(p)));
        }
        if let Some(p) = &self.out_dir {
            pairs.push(("out_dir", path_value(p)));
        }
        if let Some(k) = self.folds {
            pairs.push(("folds.k", toml::Value::Integer(k as i64)));
        }
        for (key, v) in [
            ("folds.stratified", self.stratified),
            ("folds.group_aware", self.group_aware),
            ("folds.paper_mode", self.paper_mode),
            ("smoothing.enabled", self.smoothing),
            ("rfe.honest", self.honest),
        ] {
            if let Some(v) = v {
                pairs.push((key, toml::Value::Boolean(v)));
            }
        }
        if let Some(c) = &self.classifiers {
            pairs.push(("classifiers", strings(c, true)));
        }
        if let Some(s) = &self.feature_sets {
            pairs.push(("feature_sets", strings(s, true)));
        }
        if let Some(w) = &self.wrapper {
            pairs.push(("rfe.wrapper", toml::Value::String(w.to_ascii_uppercase())));
        }
        if let Some(m) = &self.rfe_mode {
            pairs.push(("rfe.mode", toml::Value::String(m.to_ascii_lowercase())));
        }
        if let Some(f) = &self.formats {
            let names: Vec<String> = f.iter().map(|f| format!("{f:?}").to_ascii_lowercase()).collect();
            pairs.push(("formats", strings(&names, false)));
        }
        for (key, value) in pairs {
            set_path(&mut table, key, value)?;
        }
        for o in &self.overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {o:?}")))?;
            set_path(&mut table, key.trim(), parse_value(raw.trim()))?;
        }
        RunConfig::from_table(table)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Config(_) | Error::Json(_) => EXIT_PARSE,
        Error::Validation(_) | Error::Schema { .. } | Error::MissingTrait { .. } | Error::Domain(_) => EXIT_VALIDATION,
        Error::Training(_) | Error::Capability(_) | Error::Execution(_) | Error::Io { .. } => EXIT_EXECUTION,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn cmd_synth(cfg: &RunConfig, recipe_path: Option<&Path>, out: Option<&Path>, seed_flag: Option<u64>) -> Result<String> {
    let mut recipe = match recipe_path {
        Some(p) => StudyRecipe::load(p)?,
        None => StudyRecipe::default(),
    };
    if let Some(s) = seed_flag {
        recipe.seed = s;
    }
    let dir = out.unwrap_or(&cfg.study_dir);
    ensure_dir(dir)?;
    let manifest = write_study(&recipe, dir)?;
    Ok(format!(
        "wrote {} files to {} (recipe digest {})",
        manifest.files.len(),
        dir.display(),
        manifest.recipe_digest
    ))
}

fn load_study(cfg: &RunConfig) -> Result<(Study, Vec<(PathBuf, String)>)> {
    let (study, log) = Study::load(&cfg.study_dir, cfg.status)?;
    Ok((study, log.failures))
}

pub fn cmd_validate(cfg: &RunConfig) -> Result<String> {
    let (study, failures) = load_study(cfg)?;
    let report = validate_study(&study.recordings, &study.participants);
    let mut out = String::new();
    for (cohort, n) in &report.cohort_counts {
        writeln!(out, "{cohort}: {n} participants").unwrap();
    }
    writeln!(out, "{} recordings", study.recordings.len()).unwrap();
    let problems: Vec<String> = failures
        .iter()
        .map(|(p, m)| format!("{}: {m}", p.display()))
        .chain(report.issues.iter().map(|i| i.to_string()))
        .collect();
    if problems.is_empty() {
        writeln!(out, "no issues").unwrap();
        Ok(out)
    } else {
        Err(Error::Validation(format!("{} issues\n{}\n{out}", problems.len(), problems.join("\n"))))
    }
}

pub fn cmd_extract(cfg: &RunConfig) -> Result<String> {
    let (study, load_failures) = load_study(cfg)?;
    let (tables, failures) = extract_study(&study, &cfg.smoothing);
    let dir = cfg.features_dir();
    ensure_dir(&dir)?;
    for (set, table) in &tables {
        table.save(&cfg.feature_path(*set))?;
    }

    let log_path = dir.join("extraction_log.csv");
    let mut w = csv::Writer::from_path(&log_path).map_err(|e| Error::Execution(format!("{}: {e}", log_path.display())))?;
    let err = |e: csv::Error| Error::Execution(format!("extraction log: {e}"));
    w.write_record(["source", "participant_id", "task_id", "feature_set", "message"]).map_err(err)?;
    for (path, msg) in &load_failures {
        w.write_record([path.to_string_lossy().as_ref(), "", "", "", msg]).map_err(err)?;
    }
    for f in &failures {
        let set = f.set.map(|s| s.to_string()).unwrap_or_default();
        w.write_record(["extract", &f.participant_id, &f.task_id.to_string(), &set, &f.message])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Execution(format!("extraction log: {e}")))?;

    let mut summary = String::new();
    for (set, table) in &tables {
        writeln!(summary, "{set}: {} rows x {} features", table.rows.len(), table.names.len()).unwrap();
    }
    writeln!(summary, "{} load failures, {} extraction failures", load_failures.len(), failures.len()).unwrap();

    let recorded: std::collections::BTreeSet<u8> = study.recordings.iter().map(|r| r.task_id).collect();
    let dead: Vec<u8> = recorded
        .into_iter()
        .filter(|t| tables.values().all(|tab| tab.for_task(*t).is_empty()))
        .collect();
    if !dead.is_empty() {
        return Err(Error::Execution(format!(
            "no features could be extracted for task(s) {dead:?}; see {}\n{summary}",
            log_path.display()
        )));
    }
    Ok(summary)
}

/// Loads the configured feature tables, pointing at `extract` when one is
/// missing.
pub fn load_tables(cfg: &RunConfig) -> Result<BTreeMap<FeatureSet, FeatureTable>> {
    let mut out = BTreeMap::new();
    for &set in &cfg.feature_sets {
        let path = cfg.feature_path(set);
        if !path.exists() {
            return Err(Error::Execution(format!(
                "feature table {} not found; run `inkscreen extract` first",
                path.display()
            )));
        }
        out.insert(set, FeatureTable::load(&path)?);
    }
    Ok(out)
}

fn emit_report(cfg: &RunConfig, report: &EvalReport, kind: TableKind, dir: &Path, stem: &str) -> Result<()> {
    ensure_dir(dir)?;
    write_json(&dir.join(format!("{stem}_report.json")), report)?;
    if cfg.wants(Format::Csv) {
        let path = dir.join(format!("{stem}_cells.csv"));
        let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        write_cells_csv(report, std::io::BufWriter::new(file))?;
    }
    if cfg.wants(Format::Markdown) {
        write_text(&dir.join(format!("{stem}_table.md")), &render_markdown(report, kind))?;
    }
    Ok(())
}

fn best_line(report: &EvalReport) -> String {
    let best = report
        .cells
        .iter()
        .filter_map(|c| c.accuracy().map(|a| (c, a)))
        .fold(None::<(&crate::evaluation::Cell, f64)>, |acc, (c, a)| match acc {
            Some((_, b)) if b >= a => acc,
            _ => Some((c, a)),
        });
    match best {
        Some((c, a)) => format!(
            "{} cells; best {a:.2}% ({} {} {})",
            report.cells.len(),
            c.group.task_label(),
            c.set,
            c.classifier
        ),
        None => format!("{} cells; none evaluated", report.cells.len()),
    }
}

pub fn cmd_experiment(cfg: &RunConfig, mode: Mode) -> Result<String> {
    let exp = cfg.experiment_config()?;
    let tables = load_tables(cfg)?;
    let report = match mode {
        Mode::Single => run_single_task_experiment(&tables, &exp),
        Mode::Merged => run_merged_experiment(&tables, &exp),
    };
    emit_report(cfg, &report, TableKind::for_mode(mode), &cfg.out_dir.join("experiment"), mode.as_str())?;
    Ok(format!("{mode}: {}", best_line(&report)))
}

fn trace_file_name(group: RowGroup, set: FeatureSet) -> String {
    format!("{}_{set}.csv", group.key())
}

fn emit_histograms(cfg: &RunConfig, hists: &[OccurrenceHistogram], dir: &Path) -> Result<()> {
    for h in hists {
        if cfg.wants(Format::Csv) {
            let path = dir.join(format!("histogram_{}.csv", h.category));
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            h.write_csv(std::io::BufWriter::new(file))?;
        }
        if cfg.wants(Format::Svg) {
            write_text(&dir.join(format!("histogram_{}.svg", h.category)), &histogram_svg(h))?;
        }
    }
    Ok(())
}

pub fn cmd_select(cfg: &RunConfig) -> Result<String> {
    let exp = cfg.experiment_config()?;
    let tables = load_tables(cfg)?;
    let traces = run_selection(&tables, &exp, &cfg.rfe)?;
    let dir = cfg.out_dir.join("selection");
    let trace_dir = dir.join("traces");
    ensure_dir(&trace_dir)?;
    for ((group, set), trace) in &traces {
        trace.save(&trace_dir.join(trace_file_name(*group, *set)))?;
    }
    let keyed: BTreeMap<String, &SelectionTrace> =
        traces.iter().map(|((g, s), t)| (format!("{}_{s}", g.key()), t)).collect();
    write_json(&dir.join("traces.json"), &keyed)?;

    let subsets = traces.iter().map(|(k, t)| (*k, t.best_subset.clone())).collect();
    let report = evaluate_selected(&tables, &subsets, &exp)?;
    emit_report(cfg, &report, TableKind::Selected, &dir, "selected")?;

    let mut summary = format!("selected: {}\n", best_line(&report));
    if exp.feature_sets.contains(&FeatureSet::AL) {
        let al: BTreeMap<u8, SelectionTrace> = traces
            .iter()
            .filter(|((_, s), _)| *s == FeatureSet::AL)
            .filter_map(|((g, _), t)| match g {
                RowGroup::Task(id) => Some((*id, t.clone())),
                RowGroup::Category(_) => None,
            })
            .collect();
        let hists = Category::ALL
            .into_iter()
            .map(|c| occurrence_histogram(&al, c))
            .collect::<Result<Vec<_>>>()?;
        write_json(&dir.join("histograms.json"), &hists)?;
        emit_histograms(cfg, &hists, &dir)?;
        writeln!(summary, "histograms: {}", hists.len()).unwrap();
    } else {
        log::warn!("AL not among the feature sets; skipping occurrence histograms");
    }
    if cfg.rfe.honest {
        for ((g, s), t) in &traces {
            if let Some(h) = t.holdout_accuracy {
                writeln!(summary, "holdout {} {s}: {h:.2}%", g.task_label()).unwrap();
            }
        }
    }
    Ok(summary)
}

/// Rebuilds every table and chart from the saved JSON results and collects
/// the tables into `report/report.md`.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    let mut doc = String::new();
    let mut found = 0;
    let sources = [
        (cfg.out_dir.join("experiment"), "single", TableKind::Single),
        (cfg.out_dir.join("experiment"), "merged", TableKind::Merged),
        (cfg.out_dir.join("selection"), "selected", TableKind::Selected),
    ];
    for (dir, stem, kind) in sources {
        let path = dir.join(format!("{stem}_report.json"));
        if !path.exists() {
            continue;
        }
        let report: EvalReport = read_json(&path)?;
        emit_report(cfg, &report, kind, &dir, stem)?;
        doc.push_str(&render_markdown(&report, kind));
        doc.push('\n');
        found += 1;
    }
    let hist_path = cfg.out_dir.join("selection").join("histograms.json");
    if hist_path.exists() {
        let hists: Vec<OccurrenceHistogram> = read_json(&hist_path)?;
        emit_histograms(cfg, &hists, &cfg.out_dir.join("selection"))?;
        doc.push_str("Occurrence of features for the AL feature set.\n\n");
        for h in &hists {
            let top: Vec<String> = h.bars.iter().filter(|b| b.count == 2).map(|b| b.feature.clone()).collect();
            writeln!(doc, "- {}: {} selections; chosen in both tasks: {}", h.category, h.total(), if top.is_empty() { "none".to_string() } else { top.join(", ") }).unwrap();
        }
        found += 1;
    }
    if found == 0 {
        return Err(Error::Execution(format!(
            "no saved results under {}; run `inkscreen experiment` or `inkscreen select` first",
            cfg.out_dir.display()
        )));
    }
    write_text(&cfg.out_dir.join("report").join("report.md"), &doc)?;
    Ok(format!("rendered {found} result files into {}", cfg.out_dir.join("report").display()))
}

pub fn execute(cli: &Cli) -> Result<String> {
    let cfg = cli.global.resolve()?;
    match &cli.command {
        Command::Synth { recipe, out } => cmd_synth(&cfg, recipe.as_deref(), out.as_deref(), cli.global.seed),
        Command::Validate => cmd_validate(&cfg),
        Command::Extract => cmd_extract(&cfg),
        Command::Experiment { mode } => cmd_experiment(&cfg, (*mode).into()),
        Command::Select => cmd_select(&cfg),
        Command::Report => cmd_report(&cfg),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            print!("{summary}");
            if !summary.ends_with('\n') {
                println!();
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig> {
        let mut all = vec!["inkscreen"];
        all.extend_from_slice(args);
        all.push("validate");
        Cli::try_parse_from(all).unwrap().global.resolve()
    }

    #[test]
    fn flags_override_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "seed = 5\n[folds]\nk = 4\n[params.rf]\nn_trees = 7\n").unwrap();
        let p = path.to_str().unwrap();
        let cfg = parse(&["--config", p]).unwrap();
        assert_eq!((cfg.seed, cfg.folds.k, cfg.params.rf.n_trees), (Some(5), 4, 7));
        let cfg = parse(&["--config", p, "--seed", "9", "--folds", "3", "--set", "params.rf.n_trees=11"]).unwrap();
        assert_eq!((cfg.seed, cfg.folds.k, cfg.params.rf.n_trees), (Some(9), 3, 11));
        let cfg = parse(&["--classifiers", "dt,svm", "--wrapper", "rf", "--paper-mode", "true"]).unwrap();
        assert_eq!(cfg.classifiers, vec![ModelKind::DT, ModelKind::SVM]);
        assert_eq!(cfg.rfe.wrapper, ModelKind::RF);
        assert!(!cfg.folds.fold_config().group_aware);
    }

    #[test]
    fn bad_settings_are_config_errors() {
        for args in [
            &["--set", "params.rf.n_tres=3"][..],
            &["--folds", "1"][..],
            &["--classifiers", "knn"][..],
        ] {
            let err = parse(args).unwrap_err();
            assert_eq!(exit_code(&err), EXIT_PARSE, "{err}");
        }
        let err = RunConfig::default().experiment_config().unwrap_err();
        assert!(err.to_string().contains("--seed"));
    }

    #[test]
    fn missing_features_name_the_extract_step() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            out_dir: dir.path().to_path_buf(),
            seed: Some(1),
            ..RunConfig::default()
        };
        let err = cmd_experiment(&cfg, Mode::Single).unwrap_err();
        assert!(err.to_string().contains("inkscreen extract"), "{err}");
        assert_eq!(exit_code(&err), EXIT_EXECUTION);
    }

    #[test]
    fn usage_errors_exit_with_parse_code() {
        assert_eq!(run(["inkscreen", "experiment", "--mode", "both"]), EXIT_PARSE);
        assert_eq!(run(["inkscreen", "--help"]), EXIT_OK);
    }
}
