//! `homctx` command-line interface.
//!
//! Errors are printed to stderr as one JSON object
//! `{"error": <kind>, "message": <text>}`. Exit status is 0 on success, 2 for
//! usage errors and 1 for everything else. The thread count follows
//! `RAYON_NUM_THREADS`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use homctx::geometry::{extract_blobs, generate_candidates, BlobConfig, CandidateGrid};
use homctx::harness::instances::InstanceSizes;
use homctx::harness::{
    downsizing_curve_records, evaluate, fit_mode, run_oracle_suite, synth_generate,
    to_training_set, write_curve_csv, write_report, AblationSpec, Mode, OracleConfig, SynthConfig,
};
use homctx::io::{
    read_params, read_pgm, write_context_tables, write_frames, write_json, write_params, Dataset,
    FrameRecord, Manifest, ParamsMeta, Splits, SCHEMA_VERSION,
};
use homctx::learning::{most_probable_combinations, LearningConfig, ReduceMode, DEFAULT_TOP_K};
use homctx::{infer, Error, InferenceConfig, LabelSpace, Result, SceneState};

#[derive(Parser)]
#[command(
    name = "homctx",
    version,
    about = "Joint action, grasp and object-attribute recognition"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with a manifest.
    Synth(SynthArgs),
    /// Learn parameters from a manifest's training split.
    Fit(FitArgs),
    /// Batch MAP inference over every frame of a manifest.
    Infer(InferArgs),
    /// Accuracy tables on the test split, or a downsizing curve.
    Eval(EvalArgs),
    /// Compare iterative inference with the exhaustive MAP.
    Oracle(OracleArgs),
    /// Context tables and most probable combinations from fitted params.
    ExportContext(ExportArgs),
    /// Reference hand boxes and candidate grids from a hand probability map.
    Proposals(ProposalArgs),
}

#[derive(Args)]
struct InferenceFlags {
    /// Hand detection threshold in (0, 1).
    #[arg(long, default_value_t = 0.8)]
    threshold: f64,
    /// Maximum coordinate-ascent sweeps.
    #[arg(long, default_value_t = 10)]
    max_iter: usize,
}

impl InferenceFlags {
    fn config(&self) -> Result<InferenceConfig> {
        let c = InferenceConfig {
            hand_detection_threshold: self.threshold,
            max_iterations: self.max_iter,
            ..InferenceConfig::default()
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON file with a full synthetic configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    #[arg(long)]
    sharpness: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output params JSON.
    #[arg(long)]
    out: PathBuf,
    /// evidence-only, evidence-physical or full.
    #[arg(long, default_value = "full")]
    mode: String,
    /// Maximum optimizer epochs.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-2)]
    l2: f64,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    params: PathBuf,
    /// Output JSONL, one prediction per frame.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    inference: InferenceFlags,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Fitted params; required unless `--fractions` is given.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "full")]
    mode: String,
    /// Comma-separated training fractions to remove; refits evidence-only
    /// and full models per fraction and writes `curve.csv`.
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    #[command(flatten)]
    inference: InferenceFlags,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instances with alpha, beta and gamma zero and one hand per side.
    #[arg(long)]
    zero_context: bool,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    inference: InferenceFlags,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    params: PathBuf,
    /// Label space TOML the params were fitted for.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// sum or log-sum-exp.
    #[arg(long, default_value = "sum")]
    mode: String,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
}

#[derive(Args)]
struct ProposalArgs {
    /// Binary PGM hand probability map.
    #[arg(long)]
    pgm: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Foreground threshold in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            report_error("usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            ExitCode::from(1)
        }
    }
}

fn report_error(kind: &str, message: &str) {
    let v = serde_json::json!({ "error": kind, "message": message.trim_end() });
    eprintln!("{v}");
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Infer(a) => infer_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Oracle(a) => oracle_cmd(a),
        Command::ExportContext(a) => export_cmd(a),
        Command::Proposals(a) => proposals_cmd(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            if !p.exists() {
                return Err(Error::MissingFile(p.clone()));
            }
            serde_json::from_str(&std::fs::read_to_string(p)?)?
        }
        None => SynthConfig::default(),
    };
    cfg.seed = a.seed;
    cfg.train_frames = a.train.unwrap_or(cfg.train_frames);
    cfg.test_frames = a.test.unwrap_or(cfg.test_frames);
    cfg.sharpness = a.sharpness.unwrap_or(cfg.sharpness);
    cfg.evidence_noise = a.noise.unwrap_or(cfg.evidence_noise);
    let data = synth_generate(&cfg)?;

    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("labels.toml"), data.label_space.to_toml_string())?;
    write_frames(
        a.out.join("frames.jsonl"),
        &data.label_space,
        data.train.iter().chain(&data.test),
    )?;
    let ids = |rs: &[FrameRecord]| rs.iter().map(|r| r.frame_id.clone()).collect();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        label_space: "labels.toml".into(),
        frame_files: vec!["frames.jsonl".into()],
        probability_maps: None,
        splits: Splits {
            train: ids(&data.train),
            test: ids(&data.test),
        },
    };
    let mut text = manifest.to_string_pretty()?;
    text.push('\n');
    std::fs::write(a.out.join("manifest.json"), text)?;
    write_params(
        a.out.join("generating_params.json"),
        &data.generating,
        &data.label_space,
        &ParamsMeta {
            mode: Some("generating".into()),
            objective: None,
        },
    )?;
    write_json(a.out.join("synth_config.json"), &cfg)?;
    println!(
        "wrote {} train and {} test frames to {}",
        data.train.len(),
        data.test.len(),
        a.out.display()
    );
    Ok(())
}

fn fit_cmd(a: FitArgs) -> Result<()> {
    let mode: Mode = a.mode.parse()?;
    let ds = Dataset::open(&a.manifest)?;
    let (train, _) = ds.load_splits()?;
    let frames = to_training_set(&train)?;
    let cfg = LearningConfig {
        max_epochs: a.max_iter,
        l2_strength: a.l2,
        ..LearningConfig::default()
    };
    let res = fit_mode(&frames, ds.label_space.dims(), mode, &cfg)?;
    let meta = ParamsMeta {
        mode: Some(mode.name().into()),
        objective: Some(res.objective),
    };
    write_params(&a.out, &res.params, &ds.label_space, &meta)?;
    println!(
        "{}",
        serde_json::json!({
            "mode": mode.name(),
            "frames": frames.len(),
            "epochs": res.epochs,
            "converged": res.converged,
            "objective": res.objective,
        })
    );
    Ok(())
}

#[derive(Serialize)]
struct InferLine<'a> {
    frame_id: &'a str,
    state: SceneState,
    potential: f64,
    iterations: usize,
}

fn infer_cmd(a: InferArgs) -> Result<()> {
    let config = a.inference.config()?;
    let ds = Dataset::open(&a.manifest)?;
    let (params, _) = read_params(&a.params, &ds.label_space)?;
    let records: Vec<FrameRecord> = ds.frames().collect::<Result<_>>()?;
    use rayon::prelude::*;
    let results = records
        .par_iter()
        .map(|r| infer(&r.evidence, &params, &config))
        .collect::<Result<Vec<_>>>()?;
    let mut text = String::new();
    for (r, res) in records.iter().zip(&results) {
        text.push_str(&serde_json::to_string(&InferLine {
            frame_id: &r.frame_id,
            state: res.state,
            potential: res.potential,
            iterations: res.iterations_used,
        })?);
        text.push('\n');
    }
    std::fs::write(&a.out, text)?;
    println!("inferred {} frames", records.len());
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let inference = a.inference.config()?;
    let mode: Mode = a.mode.parse()?;
    let ds = Dataset::open(&a.manifest)?;
    let (train, test) = ds.load_splits()?;
    std::fs::create_dir_all(&a.out)?;
    if let Some(fractions) = a.fractions {
        let spec = AblationSpec {
            fractions,
            ..AblationSpec::default()
        };
        spec.validate()?;
        let frames = to_training_set(&train)?;
        let curve = downsizing_curve_records(
            &frames,
            &test,
            &ds.label_space,
            &spec,
            &LearningConfig::default(),
            &inference,
        )?;
        write_curve_csv(a.out.join("curve.csv"), &curve)?;
        write_json(a.out.join("curve.json"), &curve)?;
        println!("{}", serde_json::to_string(&curve)?);
        return Ok(());
    }
    let params_path = a.params.ok_or_else(|| {
        Error::InvalidConfig(format!("--params is required to evaluate mode `{mode}`"))
    })?;
    let (params, meta) = read_params(&params_path, &ds.label_space)?;
    if let Some(fitted) = &meta.mode {
        if fitted != mode.name() && fitted != "generating" {
            return Err(Error::InvalidConfig(format!(
                "params were fitted for mode `{fitted}`, not `{mode}`"
            )));
        }
    }
    let report = evaluate(&mode.restrict(&params), &ds.label_space, &test, &inference)?;
    write_report(&a.out, &report, mode)?;
    println!("{}", serde_json::to_string(&report.accuracy())?);
    Ok(())
}

fn oracle_cmd(a: OracleArgs) -> Result<()> {
    let mut sizes = InstanceSizes::default();
    if a.zero_context {
        sizes.max_candidates = 1;
    }
    let report = run_oracle_suite(&OracleConfig {
        count: a.count,
        seed: a.seed,
        zero_context: a.zero_context,
        sizes,
        inference: a.inference.config()?,
        ..OracleConfig::default()
    })?;
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    println!("match fraction {}", report.match_fraction);
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

#[derive(Serialize)]
struct ActionCombinations {
    action: String,
    combinations: Vec<NamedCombination>,
}

#[derive(Serialize)]
struct NamedCombination {
    grasp: [String; 2],
    attribute: [String; 2],
    value: f64,
}

fn export_cmd(a: ExportArgs) -> Result<()> {
    let mode: ReduceMode = a.mode.parse()?;
    let space = LabelSpace::load(&a.labels)?;
    let (params, _) = read_params(&a.params, &space)?;
    std::fs::create_dir_all(&a.out)?;
    write_context_tables(&a.out, &params, &space, mode)?;
    let name = |labels: &[homctx::labels::ClassLabel], i: usize| labels[i].name.clone();
    let mut all = Vec::new();
    for (k, action) in space.actions().iter().enumerate() {
        let combinations = most_probable_combinations(&params, k, a.top_k)?
            .into_iter()
            .map(|c| NamedCombination {
                grasp: c.grasp.map(|g| name(space.grasps(), g)),
                attribute: c.attribute.map(|m| name(space.attributes(), m)),
                value: c.value,
            })
            .collect();
        all.push(ActionCombinations {
            action: action.name.clone(),
            combinations,
        });
    }
    write_json(a.out.join("combinations.json"), &all)?;
    println!("wrote context tables to {}", a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct Proposal {
    reference: homctx::BoundingBox,
    major_length: f64,
    minor_length: f64,
    angle: f64,
    candidates: Vec<homctx::BoundingBox>,
}

fn proposals_cmd(a: ProposalArgs) -> Result<()> {
    let map = read_pgm(&a.pgm)?;
    let cfg = BlobConfig {
        threshold: a.threshold,
        ..BlobConfig::default()
    };
    let grid = CandidateGrid::default();
    let proposals: Vec<Proposal> = extract_blobs(&map, &cfg)?
        .into_iter()
        .map(|b| Proposal {
            candidates: generate_candidates(&b.reference_box, &grid),
            reference: b.reference_box,
            major_length: b.major_length,
            minor_length: b.minor_length,
            angle: b.angle,
        })
        .collect();
    write_json(&a.out, &proposals)?;
    println!("{} hand proposals", proposals.len());
    Ok(())
}
