use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use chart2svg::bridge::{answer_with_mllm, build_qa_prompt, parse_answer, ChartInput, DEFAULT_PARALLELISM};
use chart2svg::classify::profile_heuristic;
use chart2svg::client::{FixtureVlmClient, HttpVlmClient, VlmClient, FIXTURES_ENV};
use chart2svg::eval::{self, oracle_answer, EvalReport, Predictions};
use chart2svg::model::ChartSpec;
use chart2svg::ocr::{OcrClient, SubprocessOcrClient};
use chart2svg::perturb::{parse_also_strip, perturb_dataset, PerturbMode, PerturbOptions};
use chart2svg::pipeline::{convert, AgentMode, Conversion, CriticSetting, PipelineConfig};
use chart2svg::raster::RasterImage;
use chart2svg::render::{render, RenderTheme};
use chart2svg::svgdoc::serialize;

const FORMAT_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "chart2svg", version, about = "Convert raster charts to semantic SVG and evaluate chart QA")]
struct Cli {
    /// Worker threads for batch work.
    #[arg(long, global = true, default_value_t = default_jobs())]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Subcommand)]
enum Command {
    /// Render a chart spec (JSON) to PNG plus ground-truth geometry.
    Render {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Ground-truth JSON path; defaults to the output with a .truth.json suffix.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Convert PNG charts to SVG plus recovered data JSON.
    Convert {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output SVG for a single input; its recovered JSON goes next to it.
        #[arg(short, long, conflicts_with = "out_dir")]
        output: Option<PathBuf>,
        /// Directory receiving `<stem>.svg` and `<stem>.json` per input.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Write label-removed or expanded copies of a QA manifest's images.
    Perturb {
        #[arg(long, value_enum)]
        mode: PerturbModeArg,
        #[arg(long)]
        manifest: PathBuf,
        /// Directory holding the manifest's images; defaults to the manifest's directory.
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also erase `ticks` and/or `categories` in rl mode.
        #[arg(long)]
        also_strip: Option<String>,
    },
    /// Score predictions against a QA manifest.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Report of the unperturbed run, for the drop column.
        #[arg(long)]
        baseline_report: Option<PathBuf>,
        /// Report JSON path; the table always goes to stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Row name in the table.
        #[arg(long, default_value = "pipeline")]
        name: String,
    },
    /// Print the chart profile of a PNG as JSON.
    Classify { input: PathBuf },
    /// Answer questions about charts, one at a time or over a manifest.
    Ask {
        /// Chart image for a single question.
        input: Option<PathBuf>,
        query: Option<String>,
        /// Answer every record of this manifest and write predictions JSONL.
        #[arg(long, requires = "output", conflicts_with_all = ["input", "query"])]
        manifest: Option<PathBuf>,
        #[arg(long)]
        images: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Ask the external model from the environment instead of the data oracle.
        #[arg(long)]
        mllm: bool,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
}

#[derive(Args, Clone)]
struct PipelineArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Ma)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = CriticArg::Rule)]
    critic: CriticArg,
    #[arg(long, value_enum, default_value_t = OcrArg::Builtin)]
    ocr: OcrArg,
}

#[derive(ValueEnum, Clone, Copy)]
enum ModeArg {
    Sa,
    Ma,
}

#[derive(ValueEnum, Clone, Copy)]
enum CriticArg {
    Rule,
    External,
    Off,
}

#[derive(ValueEnum, Clone, Copy)]
enum OcrArg {
    Builtin,
    External,
}

#[derive(ValueEnum, Clone, Copy)]
enum PerturbModeArg {
    Rl,
    Hv,
}

/// Fixture replay when a fixture directory is configured, the HTTP endpoint otherwise.
fn vlm_from_env() -> Result<Arc<dyn VlmClient>> {
    if std::env::var_os(FIXTURES_ENV).is_some() {
        return Ok(Arc::new(FixtureVlmClient::from_env()?));
    }
    Ok(Arc::new(HttpVlmClient::from_env()?))
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig> {
        let mode = match self.mode {
            ModeArg::Sa => AgentMode::Single,
            ModeArg::Ma => AgentMode::Multi,
        };
        let critic = match self.critic {
            CriticArg::Rule => CriticSetting::RuleBased,
            CriticArg::External => CriticSetting::External,
            CriticArg::Off => CriticSetting::Off,
        };
        let mut config = PipelineConfig::new(mode, critic);
        if matches!(self.critic, CriticArg::External) {
            config.vlm = Some(vlm_from_env()?);
        }
        if matches!(self.ocr, OcrArg::External) {
            let ocr: Arc<dyn OcrClient> = Arc::new(SubprocessOcrClient::from_env()?);
            config.ocr = Some(ocr);
        }
        Ok(config)
    }
}

fn versioned<T: Serialize>(key: &str, value: &T) -> Result<String> {
    let mut v = json!({ "format_version": FORMAT_VERSION });
    v[key] = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?)
}

fn load(path: &Path) -> Result<RasterImage> {
    RasterImage::load_png(path).with_context(|| format!("loading {}", path.display()))
}

/// Recovered data and the scheduling-independent parts of the trace.
fn recovered_json(c: &Conversion) -> Result<String> {
    let value = json!({
        "format_version": FORMAT_VERSION,
        "recovered": c.recovered,
        "profile": c.profile,
        "candidates": c.trace.candidates,
        "candidate_failures": c.trace.candidate_failures,
        "disagreements": c.trace.disagreements,
        "chosen_variant": c.trace.chosen_variant,
        "relative_only": c.trace.relative_only,
        "diagnostics": c.trace.diagnostics,
    });
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

fn cmd_render(spec: &Path, output: &Path, truth: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let spec: ChartSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", spec.display()))?;
    let result = render(&spec, &RenderTheme::default())?;
    write(output, result.image.to_png_bytes()?)?;
    let truth_path = truth.map(Path::to_path_buf).unwrap_or_else(|| output.with_extension("truth.json"));
    write(&truth_path, versioned("truth", &result.truth)?)
}

fn cmd_convert(inputs: &[PathBuf], output: Option<&Path>, out_dir: Option<&Path>, config: &PipelineConfig, jobs: usize) -> Result<()> {
    let targets: Vec<(PathBuf, PathBuf)> = match (output, out_dir) {
        (Some(svg), _) => {
            if inputs.len() != 1 {
                bail!("-o takes exactly one input; use --out-dir for several");
            }
            vec![(inputs[0].clone(), svg.to_path_buf())]
        }
        (None, dir) => inputs
            .iter()
            .map(|p| {
                let stem = p.file_stem().map_or_else(|| "chart".into(), |s| s.to_os_string());
                let base = dir.map_or_else(|| p.parent().unwrap_or(Path::new("")).to_path_buf(), Path::to_path_buf);
                (p.clone(), base.join(stem).with_extension("svg"))
            })
            .collect(),
    };
    let results: Vec<Result<()>> = pool(jobs)?.install(|| {
        targets
            .par_iter()
            .map(|(input, svg)| {
                let conv = convert(&load(input)?, config).with_context(|| format!("converting {}", input.display()))?;
                write(svg, serialize(&conv.document))?;
                write(&svg.with_extension("json"), recovered_json(&conv)?)
            })
            .collect()
    });
    let failed: Vec<String> = results.into_iter().filter_map(|r| r.err()).map(|e| format!("{e:#}")).collect();
    for e in &failed {
        eprintln!("error: {e}");
    }
    if failed.is_empty() {
        Ok(())
    } else {
        bail!("{} of {} conversions failed", failed.len(), targets.len())
    }
}

fn manifest_dir(manifest: &Path, images: Option<&Path>) -> PathBuf {
    images
        .map(Path::to_path_buf)
        .unwrap_or_else(|| manifest.parent().unwrap_or(Path::new("")).to_path_buf())
}

fn cmd_perturb(mode: PerturbModeArg, manifest: &Path, images: Option<&Path>, out: &Path, also_strip: Option<&str>, jobs: usize) -> Result<()> {
    let mode = match mode {
        PerturbModeArg::Rl => PerturbMode::Rl,
        PerturbModeArg::Hv => PerturbMode::Hv,
    };
    let records = eval::read_manifest(manifest)?;
    let options = PerturbOptions {
        also_strip: also_strip.map(parse_also_strip).transpose().map_err(|e| anyhow!(e))?.unwrap_or_default(),
        jobs: Some(jobs),
        pipeline: PipelineConfig::default(),
    };
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let run = perturb_dataset(&records, &manifest_dir(manifest, images), out, mode, &options);
    let stem = manifest.file_stem().map_or_else(|| "manifest".into(), |s| s.to_string_lossy().into_owned());
    let out_manifest = out.join(format!("{stem}{}.jsonl", mode.suffix()));
    eval::write_manifest(&out_manifest, &run.records)?;
    write(&out.join(format!("{stem}{}.report.json", mode.suffix())), versioned("images", &run.images)?)?;
    let failures = run.failures().count();
    for f in run.failures() {
        eprintln!("warning: {}: {}", f.source, f.error.as_deref().unwrap_or_default());
    }
    println!("{}", out_manifest.display());
    if failures > 0 && failures == run.images.len() {
        bail!("every image failed");
    }
    Ok(())
}

fn cmd_eval(manifest: &Path, predictions: &Path, baseline: Option<&Path>, output: Option<&Path>, name: &str) -> Result<()> {
    let records = eval::read_manifest(manifest)?;
    let preds = eval::read_predictions(predictions)?;
    let mut report = eval::score(&records, &preds);
    if let Some(path) = baseline {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let base: EvalReport = serde_json::from_value(value.get("report").cloned().unwrap_or(value))?;
        let (b, p) = (base.ra_overall.context("baseline has no overall accuracy")?, report.ra_overall.context("no records scored")?);
        report.drop_vs_baseline = Some(eval::drop(b, p)?);
    }
    if let Some(path) = output {
        write(path, versioned("report", &report)?)?;
    }
    print!("{}", eval::render_table(&[(name, &report)]));
    if report.missing > 0 {
        eprintln!("warning: {} records had no prediction", report.missing);
    }
    Ok(())
}

fn cmd_classify(input: &Path) -> Result<()> {
    let profile = profile_heuristic(&load(input)?)?;
    print!("{}", versioned("profile", &profile)?);
    Ok(())
}

struct AskArgs<'a> {
    input: Option<&'a Path>,
    query: Option<&'a str>,
    manifest: Option<&'a Path>,
    images: Option<&'a Path>,
    output: Option<&'a Path>,
    mllm: bool,
}

fn cmd_ask(a: AskArgs, config: &PipelineConfig, jobs: usize) -> Result<()> {
    let client = a.mllm.then(vlm_from_env).transpose()?;
    if let Some(manifest) = a.manifest {
        let records = eval::read_manifest(manifest)?;
        let dir = manifest_dir(manifest, a.images);
        let names: Vec<&str> = records.iter().map(|r| r.imgname.as_str()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let converted: BTreeMap<String, (Vec<u8>, Conversion)> = pool(jobs)?.install(|| {
            names
                .par_iter()
                .filter_map(|name| {
                    let path = dir.join(name);
                    let bytes = std::fs::read(&path).map_err(|e| eprintln!("warning: {}: {e}", path.display())).ok()?;
                    let image = RasterImage::from_png_bytes(&bytes).map_err(|e| eprintln!("warning: {}: {e}", path.display())).ok()?;
                    let conv = convert(&image, config).map_err(|e| eprintln!("warning: {}: {e}", path.display())).ok()?;
                    Some((name.to_string(), (bytes, conv)))
                })
                .collect()
        });
        let predictions: Predictions = match &client {
            Some(client) => {
                let charts = converted
                    .iter()
                    .map(|(k, (bytes, c))| (k.clone(), ChartInput { image_png: bytes.clone(), document: c.document.clone() }))
                    .collect();
                let run = answer_with_mllm(&records, &charts, client.as_ref(), jobs.min(DEFAULT_PARALLELISM));
                for ((img, q), e) in &run.failures {
                    eprintln!("warning: {img} / {q:?}: {e}");
                }
                run.predictions
            }
            None => records
                .iter()
                .filter_map(|r| {
                    let (_, c) = converted.get(&r.imgname)?;
                    oracle_answer(&c.recovered, &r.query).map(|ans| (r.key(), ans))
                })
                .collect(),
        };
        let output = a.output.expect("required by the argument parser");
        eval::write_predictions(output, &predictions)?;
        eprintln!("{} of {} questions answered", predictions.len(), records.len());
        return Ok(());
    }
    let (Some(input), Some(query)) = (a.input, a.query) else {
        bail!("ask needs an image and a query, or --manifest");
    };
    let bytes = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let conv = convert(&RasterImage::from_png_bytes(&bytes)?, config)?;
    let answer = match client {
        Some(client) => {
            let prompt = build_qa_prompt(&bytes, &conv.document, query);
            let reply = client.complete(&prompt.image, &prompt.text)?;
            parse_answer(&reply)?.answer
        }
        None => oracle_answer(&conv.recovered, query).with_context(|| format!("the data oracle cannot answer {query:?}"))?,
    };
    println!("{answer}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let jobs = cli.jobs.max(1);
    match cli.command {
        Command::Render { spec, output, truth } => cmd_render(&spec, &output, truth.as_deref()),
        Command::Convert { inputs, output, out_dir, pipeline } => cmd_convert(&inputs, output.as_deref(), out_dir.as_deref(), &pipeline.config()?, jobs),
        Command::Perturb { mode, manifest, images, out, also_strip } => cmd_perturb(mode, &manifest, images.as_deref(), &out, also_strip.as_deref(), jobs),
        Command::Eval { manifest, predictions, baseline_report, output, name } => cmd_eval(&manifest, &predictions, baseline_report.as_deref(), output.as_deref(), &name),
        Command::Classify { input } => cmd_classify(&input),
        Command::Ask { input, query, manifest, images, output, mllm, pipeline } => {
            let args = AskArgs {
                input: input.as_deref(),
                query: query.as_deref(),
                manifest: manifest.as_deref(),
                images: images.as_deref(),
                output: output.as_deref(),
                mllm,
            };
            cmd_ask(args, &pipeline.config()?, jobs)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
