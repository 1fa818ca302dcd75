//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or parameter error, 3 data contract
//! violation, 4 empty input. Every command writing to an output directory
//! also writes `manifest.json` with the resolved parameters.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::Error;
use crate::filtration::build_filtration;
use crate::loss::{self, LossConfig, Reduction, SchedulerState};
use crate::metrics::{evaluate_pair, MetricReport};
use crate::pimage::{
    image_from_diagram, map_diagram, persistence_image, PersistenceImageConfig, PipelineConfig,
};
use crate::segmap::{extract_contours, load_segmap, save_segmap, MapFormat, SegMap};
use crate::synth::{synth_pair, Corruption};

#[derive(Debug, Parser)]
#[command(
    name = "topopi",
    version,
    about = "Persistence images, topological loss and metrics for segmentation maps"
)]
pub struct Cli {
    /// Worker threads for batch commands.
    #[arg(long, global = true, env = "TOPOPI_JOBS", value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,

    #[command(flatten)]
    pub params: Params,

    #[command(subcommand)]
    pub command: Command,
}

/// Parameters shared by all commands.
#[derive(Debug, Clone, Args)]
pub struct Params {
    /// KDE bandwidth B.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub bandwidth: f64,
    /// Gaussian variance of the persistence image.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub sigma2: f64,
    /// Weighting exponent; the scheduler's initial value.
    #[arg(
        long,
        global = true,
        default_value_t = 2.0,
        allow_negative_numbers = true
    )]
    pub gamma: f64,
    /// Weight of the topological term in the joint loss.
    #[arg(
        long,
        global = true,
        default_value_t = 0.05,
        allow_negative_numbers = true
    )]
    pub beta: f64,
    /// Scheduler rate.
    #[arg(
        long,
        global = true,
        default_value_t = 0.0005,
        allow_negative_numbers = true
    )]
    pub lambda: f64,
    /// Lower bound for the scheduled gamma.
    #[arg(
        long,
        global = true,
        default_value_t = 0.0,
        allow_negative_numbers = true
    )]
    pub gamma_min: f64,
    /// Steps during which gamma is held.
    #[arg(long, global = true, default_value_t = 10)]
    pub warmup: u64,
    /// How per-image CE and TD are reduced for the gamma update.
    #[arg(long, global = true, value_enum, default_value_t = ReductionArg::Sum)]
    pub reduction: ReductionArg,
    /// Filtration ceiling where the density underflows.
    #[arg(
        long,
        global = true,
        default_value_t = 20.0,
        allow_negative_numbers = true
    )]
    pub cap: f64,
    #[arg(long, global = true, default_value_t = 64)]
    pub pi_rows: usize,
    #[arg(long, global = true, default_value_t = 64)]
    pub pi_cols: usize,
    /// Birth extent of the image window; defaults to the cap.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub extent_birth: Option<f64>,
    /// Lifetime extent of the image window; defaults to the cap.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub extent_life: Option<f64>,
    /// Rasterize dimension-0 bars as well.
    #[arg(long, global = true)]
    pub include_dim0: bool,
    /// Majority-overlap threshold for the topological metrics.
    #[arg(
        long,
        global = true,
        default_value_t = 0.5,
        allow_negative_numbers = true
    )]
    pub overlap_threshold: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReductionArg {
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Bandwidth,
    Sigma2,
    Gamma,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Bandwidth => "bandwidth",
            SweepParam::Sigma2 => "sigma2",
            SweepParam::Gamma => "gamma",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Persistence image, diagram and optional preview for each map.
    Pi {
        #[arg(required = true)]
        maps: Vec<PathBuf>,
        #[arg(short, long, default_value = ".")]
        out_dir: PathBuf,
        /// Also write an 8-bit PGM preview.
        #[arg(long)]
        preview: bool,
    },
    /// Topological dissimilarity of two maps, and the joint loss if `--ce` is given.
    Td {
        gt: PathBuf,
        pred: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        ce: Option<f64>,
    },
    /// Pixel and topological metrics over two directories of maps paired by file name.
    Eval {
        gt_dir: PathBuf,
        pred_dir: PathBuf,
        #[arg(short, long)]
        out_dir: Option<PathBuf>,
    },
    /// Replays the gamma scheduler over a `step,ce,td` log.
    Schedule { log: PathBuf },
    /// Seeded synthetic ground-truth maps and corrupted predictions.
    Synth {
        #[arg(long, default_value_t = 3)]
        n_objects: usize,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value = "none")]
        corruption: Corruption,
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(short, long)]
        out_dir: PathBuf,
    },
    /// TD statistics over map pairs for each value of one parameter.
    Sweep {
        gt_dir: PathBuf,
        pred_dir: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', num_args = 0.., allow_negative_numbers = true)]
        values: Vec<f64>,
        #[arg(short, long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn empty(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } | Error::InvalidParameter { .. } => 2,
            Error::Format { .. } | Error::Contract(_) | Error::EmptyContours => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 2,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

impl Params {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            bandwidth: self.bandwidth,
            cap: self.cap,
            image: PersistenceImageConfig {
                rows: self.pi_rows,
                cols: self.pi_cols,
                birth_max: self.extent_birth.unwrap_or(self.cap),
                lifetime_max: self.extent_life.unwrap_or(self.cap),
                sigma2: self.sigma2,
                gamma: self.gamma,
                include_dim0: self.include_dim0,
            },
        }
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig {
            beta: self.beta,
            lambda: self.lambda,
            gamma0: self.gamma,
            warmup_steps: self.warmup,
            gamma_min: self.gamma_min,
            reduction: match self.reduction {
                ReductionArg::Sum => Reduction::Sum,
                ReductionArg::Mean => Reduction::Mean,
            },
        }
    }

    fn validate(&self) -> CliResult<()> {
        self.pipeline().validate()?;
        self.loss().validate()?;
        if !(self.overlap_threshold > 0.0 && self.overlap_threshold <= 1.0) {
            return Err(Error::param(
                "overlap-threshold",
                format!("{} must be in (0, 1]", self.overlap_threshold),
            )
            .into());
        }
        Ok(())
    }
}

/// Resolved parameter set echoed into output directories. The thread count
/// is left out because it does not affect results.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub inputs: Vec<String>,
    pub parameters: Map<String, Value>,
    pub output_dir: String,
}

impl RunManifest {
    fn new(
        command: &'static str,
        inputs: Vec<String>,
        params: &Params,
        output_dir: &Path,
        extra: Map<String, Value>,
    ) -> Self {
        let p = params.pipeline();
        let l = params.loss();
        let mut parameters = Map::new();
        let mut put = |k: &str, v: Value| {
            parameters.insert(k.to_string(), v);
        };
        put("bandwidth", json!(p.bandwidth));
        put("sigma2", json!(p.image.sigma2));
        put("gamma", json!(p.image.gamma));
        put("beta", json!(l.beta));
        put("lambda", json!(l.lambda));
        put("gamma_min", json!(l.gamma_min));
        put("warmup", json!(l.warmup_steps));
        put("reduction", json!(l.reduction));
        put("cap", json!(p.cap));
        put("pi_rows", json!(p.image.rows));
        put("pi_cols", json!(p.image.cols));
        put("extent_birth", json!(p.image.birth_max));
        put("extent_life", json!(p.image.lifetime_max));
        put("include_dim0", json!(p.image.include_dim0));
        put("overlap_threshold", json!(params.overlap_threshold));
        put("seed", json!(params.seed));
        parameters.extend(extra);
        Self {
            command,
            inputs,
            parameters,
            output_dir: output_dir.display().to_string(),
        }
    }

    fn write(&self, dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        write_file(&dir.join("manifest.json"), text.as_bytes())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e).into())
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn load(path: &Path) -> CliResult<SegMap> {
    let format = MapFormat::from_path(path).ok_or_else(|| {
        CliError::usage(format!("{}: unrecognized map extension", path.display()))
    })?;
    Ok(load_segmap(path, format)?)
}

/// Map files in `dir` sorted by file name.
fn list_maps(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && MapFormat::from_path(&path).is_some() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Pairs maps by file name; unpaired files are reported on stderr.
fn paired_maps(gt_dir: &Path, pred_dir: &Path) -> CliResult<Vec<(PathBuf, PathBuf)>> {
    let gt = list_maps(gt_dir)?;
    let pred = list_maps(pred_dir)?;
    if gt.is_empty() && pred.is_empty() {
        return Err(CliError::empty(format!(
            "no maps in {} or {}",
            gt_dir.display(),
            pred_dir.display()
        )));
    }
    let mut pairs = Vec::new();
    for g in &gt {
        match pred.iter().find(|p| p.file_name() == g.file_name()) {
            Some(p) => pairs.push((g.clone(), p.clone())),
            None => eprintln!("warning: {} has no prediction; skipped", g.display()),
        }
    }
    for p in &pred {
        if !gt.iter().any(|g| g.file_name() == p.file_name()) {
            eprintln!("warning: {} has no ground truth; skipped", p.display());
        }
    }
    if pairs.is_empty() {
        return Err(CliError::empty("no paired maps"));
    }
    Ok(pairs)
}

fn load_pairs(pairs: &[(PathBuf, PathBuf)]) -> CliResult<Vec<(SegMap, SegMap)>> {
    pairs
        .par_iter()
        .map(|(g, p)| {
            let name = g
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let gt = load(g)?.with_source_id(name.clone());
            let pred = load(p)?.with_source_id(name);
            gt.ensure_same_shape(&pred)?;
            Ok((gt, pred))
        })
        .collect()
}

fn path_strings(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

/// Parses arguments, runs the command and maps failures to exit codes.
pub fn main() -> ExitCode {
    main_from(std::env::args_os())
}

pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// Runs a parsed command inside a pool sized by `--jobs`. Standard output is
/// buffered and written once the command finishes.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    cli.params.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        builder = builder.num_threads(jobs as usize);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let mut buf = Vec::new();
    let result = pool.install(|| dispatch(cli.command, &cli.params, &mut buf));
    out.write_all(&buf)?;
    out.flush()?;
    result
}

fn dispatch(command: Command, params: &Params, out: &mut (dyn Write + Send)) -> CliResult<()> {
    match command {
        Command::Pi {
            maps,
            out_dir,
            preview,
        } => cmd_pi(&maps, &out_dir, preview, params, out),
        Command::Td { gt, pred, ce } => cmd_td(&gt, &pred, ce, params, out),
        Command::Eval {
            gt_dir,
            pred_dir,
            out_dir,
        } => cmd_eval(&gt_dir, &pred_dir, out_dir.as_deref(), params, out),
        Command::Schedule { log } => cmd_schedule(&log, params, out),
        Command::Synth {
            n_objects,
            size,
            corruption,
            count,
            out_dir,
        } => cmd_synth(n_objects, size, corruption, count, &out_dir, params, out),
        Command::Sweep {
            gt_dir,
            pred_dir,
            param,
            values,
            out_dir,
        } => cmd_sweep(
            &gt_dir,
            &pred_dir,
            param,
            &values,
            out_dir.as_deref(),
            params,
            out,
        ),
    }
}

fn cmd_pi(
    maps: &[PathBuf],
    out_dir: &Path,
    preview: bool,
    params: &Params,
    out: &mut (dyn Write + Send),
) -> CliResult<()> {
    let pipeline = params.pipeline();
    let mut stems: Vec<String> = Vec::with_capacity(maps.len());
    for m in maps {
        let stem = m
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if stems.contains(&stem) {
            return Err(CliError::usage(format!(
                "two inputs share the output name `{stem}`"
            )));
        }
        stems.push(stem);
    }
    let results: Vec<CliResult<_>> = maps
        .par_iter()
        .map(|path| {
            let map = load(path)?;
            let diagram = map_diagram(&map, pipeline.bandwidth, pipeline.cap)?;
            let mut image = image_from_diagram(&diagram, &pipeline.image)?;
            image.warning = persistence_image_warning(&map);
            Ok((diagram, image))
        })
        .collect();
    ensure_dir(out_dir)?;
    for ((path, stem), result) in maps.iter().zip(&stems).zip(results) {
        let (diagram, image) = result?;
        let tpp1 = out_dir.join(format!("{stem}.tpp1"));
        let csv = out_dir.join(format!("{stem}.diagram.csv"));
        write_file(&tpp1, &image.to_tpp1())?;
        write_file(&csv, diagram.to_csv().as_bytes())?;
        let preview_path = if preview {
            let p = out_dir.join(format!("{stem}.preview.pgm"));
            write_file(&p, &image.to_preview_pgm())?;
            Some(p.display().to_string())
        } else {
            None
        };
        if image.warning.is_some() {
            eprintln!(
                "warning: {} has no foreground; its image is all zeros",
                path.display()
            );
        }
        let line = json!({
            "input": path.display().to_string(),
            "pi": tpp1.display().to_string(),
            "diagram": csv.display().to_string(),
            "preview": preview_path,
            "bars": diagram.bars().len(),
            "empty": image.warning.is_some(),
        });
        writeln!(out, "{line}")?;
    }
    let mut extra = Map::new();
    extra.insert("preview".into(), json!(preview));
    RunManifest::new("pi", path_strings(maps), params, out_dir, extra).write(out_dir)
}

fn persistence_image_warning(map: &SegMap) -> Option<crate::pimage::PiWarning> {
    (map.foreground_count() == 0).then_some(crate::pimage::PiWarning::EmptyContours)
}

#[derive(Serialize)]
struct TdLine {
    td: f64,
    ce: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loss: Option<f64>,
}

fn cmd_td(
    gt: &Path,
    pred: &Path,
    ce: Option<f64>,
    params: &Params,
    out: &mut (dyn Write + Send),
) -> CliResult<()> {
    let pipeline = params.pipeline();
    let (g, p) = rayon::join(|| load(gt), || load(pred));
    let (g, p) = (g?, p?);
    g.ensure_same_shape(&p)?;
    let (a, b) = rayon::join(
        || persistence_image(&g, &pipeline),
        || persistence_image(&p, &pipeline),
    );
    let td = loss::topological_dissimilarity(&a?, &b?)?;
    if let Some(ce) = ce {
        if !(ce.is_finite() && ce >= 0.0) {
            return Err(Error::param("ce", format!("{ce} must be finite and non-negative")).into());
        }
    }
    let line = TdLine {
        td,
        ce,
        loss: ce.map(|c| loss::joint_loss(c, td, params.beta)),
    };
    writeln!(
        out,
        "{}",
        serde_json::to_string(&line).expect("td line serializes")
    )?;
    Ok(())
}

fn cmd_eval(
    gt_dir: &Path,
    pred_dir: &Path,
    out_dir: Option<&Path>,
    params: &Params,
    out: &mut (dyn Write + Send),
) -> CliResult<()> {
    let pairs = paired_maps(gt_dir, pred_dir)?;
    let maps = load_pairs(&pairs)?;
    let images = maps
        .par_iter()
        .map(|(g, p)| evaluate_pair(p, g, params.overlap_threshold))
        .collect::<crate::Result<Vec<_>>>()?;
    let report = MetricReport::from_images(images);
    let (json, csv) = (report.to_json() + "\n", report.to_csv());
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write_file(&dir.join("report.json"), json.as_bytes())?;
        write_file(&dir.join("report.csv"), csv.as_bytes())?;
        let inputs = vec![gt_dir.display().to_string(), pred_dir.display().to_string()];
        RunManifest::new("eval", inputs, params, dir, Map::new()).write(dir)?;
    }
    match params.format {
        OutputFormat::Json => out.write_all(json.as_bytes())?,
        OutputFormat::Csv => out.write_all(csv.as_bytes())?,
    }
    Ok(())
}

/// Parses a `step,ce,td` log; a non-numeric first line is taken as the header.
pub fn parse_schedule_log(text: &str) -> crate::Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    let mut offset = 0;
    for (n, line) in text.lines().enumerate() {
        let at = offset;
        offset += line.len() + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if n == 0 && fields.first().is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::format(
                at,
                format!("line {}: expected step,ce,td", n + 1),
            ));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::format(at, format!("line {}: `{s}` is not a number", n + 1)))
        };
        num(fields[0])?;
        rows.push((num(fields[1])?, num(fields[2])?));
    }
    Ok(rows)
}

fn cmd_schedule(log: &Path, params: &Params, out: &mut (dyn Write + Send)) -> CliResult<()> {
    let text = std::fs::read_to_string(log).map_err(|e| Error::io(log, e))?;
    let rows = parse_schedule_log(&text)?;
    if rows.is_empty() {
        return Err(CliError::empty(format!("{} has no steps", log.display())));
    }
    let config = params.loss();
    let mut state = SchedulerState::new(&config);
    for (ce, td) in rows {
        state = loss::scheduler_update(&state, ce, td, &config)?;
    }
    match params.format {
        OutputFormat::Json => {
            for r in &state.history {
                writeln!(out, "{}", r.to_json_line())?;
            }
        }
        OutputFormat::Csv => {
            writeln!(out, "step,gamma,ce_total,td_total")?;
            for r in &state.history {
                writeln!(out, "{},{},{},{}", r.step, r.gamma, r.ce_total, r.td_total)?;
            }
        }
    }
    Ok(())
}

fn cmd_synth(
    n_objects: usize,
    size: usize,
    corruption: Corruption,
    count: u64,
    out_dir: &Path,
    params: &Params,
    out: &mut (dyn Write + Send),
) -> CliResult<()> {
    if count == 0 {
        return Err(Error::param("count", "must be at least 1").into());
    }
    let pairs = (0..count)
        .into_par_iter()
        .map(|i| synth_pair(params.seed, i, size, n_objects, corruption))
        .collect::<crate::Result<Vec<_>>>()?;
    let (gt_dir, pred_dir) = (out_dir.join("gt"), out_dir.join("pred"));
    ensure_dir(&gt_dir)?;
    ensure_dir(&pred_dir)?;
    for (i, pair) in pairs.iter().enumerate() {
        let name = format!("{i:04}.pgm");
        save_segmap(&pair.gt, &gt_dir.join(&name), MapFormat::Pgm)?;
        save_segmap(&pair.pred, &pred_dir.join(&name), MapFormat::Pgm)?;
    }
    writeln!(
        out,
        "{}",
        json!({ "gt": gt_dir.display().to_string(), "pred": pred_dir.display().to_string(), "count": count })
    )?;
    let mut extra = Map::new();
    extra.insert("n_objects".into(), json!(n_objects));
    extra.insert("size".into(), json!(size));
    extra.insert("corruption".into(), json!(corruption));
    extra.insert("count".into(), json!(count));
    RunManifest::new("synth", Vec::new(), params, out_dir, extra).write(out_dir)
}

/// One grid point of a parameter sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub param: &'static str,
    pub value: f64,
    pub pairs: usize,
    pub td_mean: f64,
    pub td_std: f64,
    pub td_median: f64,
    /// Mean total variation of the ground-truth filtration fields.
    pub gt_field_tv_mean: f64,
}

fn sweep_row(
    maps: &[(SegMap, SegMap)],
    param: SweepParam,
    value: f64,
    base: &PipelineConfig,
) -> CliResult<SweepRow> {
    let mut cfg = *base;
    match param {
        SweepParam::Bandwidth => cfg.bandwidth = value,
        SweepParam::Sigma2 => cfg.image.sigma2 = value,
        SweepParam::Gamma => cfg.image.gamma = value,
    }
    cfg.validate()?;
    let per_pair = maps
        .par_iter()
        .map(|(g, p)| {
            let td = loss::topological_dissimilarity(
                &persistence_image(g, &cfg)?,
                &persistence_image(p, &cfg)?,
            )?;
            let contours = extract_contours(g);
            let tv = if contours.is_empty() {
                0.0
            } else {
                build_filtration(&contours, cfg.bandwidth, cfg.cap)?.total_variation()
            };
            Ok((td, tv))
        })
        .collect::<crate::Result<Vec<(f64, f64)>>>()?;
    let n = per_pair.len() as f64;
    let td_mean = per_pair.iter().map(|r| r.0).sum::<f64>() / n;
    let td_std = (per_pair
        .iter()
        .map(|r| (r.0 - td_mean).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let mut sorted: Vec<f64> = per_pair.iter().map(|r| r.0).collect();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let td_median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    let gt_field_tv_mean = per_pair.iter().map(|r| r.1).sum::<f64>() / n;
    Ok(SweepRow {
        param: param.name(),
        value,
        pairs: per_pair.len(),
        td_mean,
        td_std,
        td_median,
        gt_field_tv_mean,
    })
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("param,value,pairs,td_mean,td_std,td_median,gt_field_tv_mean\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.param, r.value, r.pairs, r.td_mean, r.td_std, r.td_median, r.gt_field_tv_mean
        ));
    }
    s
}

fn cmd_sweep(
    gt_dir: &Path,
    pred_dir: &Path,
    param: SweepParam,
    values: &[f64],
    out_dir: Option<&Path>,
    params: &Params,
    out: &mut (dyn Write + Send),
) -> CliResult<()> {
    if values.is_empty() {
        return Err(Error::param("values", "the parameter grid is empty").into());
    }
    let pairs = paired_maps(gt_dir, pred_dir)?;
    let maps = load_pairs(&pairs)?;
    let base = params.pipeline();
    let rows = values
        .iter()
        .map(|&v| sweep_row(&maps, param, v, &base))
        .collect::<CliResult<Vec<_>>>()?;
    let csv = sweep_csv(&rows);
    let json = serde_json::to_string_pretty(&rows).expect("sweep rows serialize") + "\n";
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write_file(&dir.join("sweep.csv"), csv.as_bytes())?;
        write_file(&dir.join("sweep.json"), json.as_bytes())?;
        let mut extra = Map::new();
        extra.insert("sweep_param".into(), json!(param.name()));
        extra.insert("sweep_values".into(), json!(values));
        let inputs = vec![gt_dir.display().to_string(), pred_dir.display().to_string()];
        RunManifest::new("sweep", inputs, params, dir, extra).write(dir)?;
    }
    match params.format {
        OutputFormat::Json => out.write_all(json.as_bytes())?,
        OutputFormat::Csv => out.write_all(csv.as_bytes())?,
    }
    Ok(())
}
