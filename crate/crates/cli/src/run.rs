//! The subcommands. Each one resolves its parameters through
//! [`Resolver`] (flag > config file > default), does the work through
//! bnn-core, and writes a config echo next to any file it produces.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bnn_core::{
    attack, bispectrum, cayley_from_irreps, equivariance_report, find_isomorphism, fmt_f64,
    forward, generate, power_spectrum, train, AttackConfig, BnnError, CayleyError, CharacterTable,
    EquivarianceReport, FiniteAbelianGroup, NetworkWeights, OrbitDataset, Representation,
    TrainConfig, TrainLogEntry, C64,
};

use crate::config::{sibling, ConfigMap, Resolver};
use crate::io::{emit, generic_real_target, load_weights, read_signal};

/// Soft-failure exit code: the run finished but did not converge
/// (training hit the epoch cap, or the extracted table failed the
/// isomorphism test).
const EXIT_SOFT: u8 = 2;

fn note(to_stdout: bool, msg: &str) {
    if to_stdout {
        println!("{msg}");
    } else {
        eprintln!("{msg}");
    }
}

// ---------------------------------------------------------------------------
// gen-data

#[derive(Debug, clap::Args)]
pub struct GenDataArgs {
    /// Group as comma-separated cyclic orders, e.g. `8` or `4,2`.
    #[arg(long)]
    group: Option<String>,
    /// Number of random exemplars; each contributes its orbit.
    #[arg(long)]
    exemplars: Option<usize>,
    /// Fraction of each orbit to keep.
    #[arg(long)]
    fraction: Option<f64>,
    /// Scale every sample to unit norm.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    normalize: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset file to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

const GEN_DATA_KEYS: &[&str] = &["group", "exemplars", "fraction", "normalize", "seed", "out"];

pub fn gen_data(args: GenDataArgs, cfg: &ConfigMap) -> Result<u8> {
    let mut r = Resolver::new("gen-data", cfg, GEN_DATA_KEYS)?;
    let spec = r.required::<String>("group", args.group)?;
    let exemplars = r.value("exemplars", args.exemplars, 100)?;
    let fraction = r.value("fraction", args.fraction, 1.0)?;
    let normalize = r.value("normalize", args.normalize, false)?;
    let seed = r.value("seed", args.seed, 0u64)?;
    let out = r.value("out", args.out, PathBuf::from("dataset.bnnd"))?;

    let group = FiniteAbelianGroup::from_spec(&spec)?;
    let ds = generate(&group, exemplars, fraction, normalize, seed)?;
    ds.save(&out)?;
    let cfg_path = r.write_next_to(&out)?;
    println!(
        "wrote {} samples in {} classes over {} to {} (config {})",
        ds.len(),
        ds.num_classes(),
        group,
        out.display(),
        cfg_path.display()
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// shared dataset source for train/eval

enum DataSource {
    File(PathBuf),
    Generate { spec: String, exemplars: usize, fraction: f64, normalize: bool },
}

/// Either `--data <file>` or inline generation parameters, never both.
fn resolve_data_source(
    r: &mut Resolver,
    data: Option<PathBuf>,
    group: Option<String>,
    exemplars: Option<usize>,
    fraction: Option<f64>,
    normalize: Option<bool>,
) -> Result<DataSource> {
    let data = r.optional("data", data)?;
    match data {
        Some(path) => {
            if group.is_some() || exemplars.is_some() || fraction.is_some() || normalize.is_some()
            {
                bail!("--data already names a dataset; drop --group/--exemplars/--fraction/--normalize");
            }
            Ok(DataSource::File(path))
        }
        None => {
            let spec = r.required::<String>("group", group)?;
            let exemplars = r.value("exemplars", exemplars, 100)?;
            let fraction = r.value("fraction", fraction, 1.0)?;
            let normalize = r.value("normalize", normalize, false)?;
            Ok(DataSource::Generate { spec, exemplars, fraction, normalize })
        }
    }
}

impl DataSource {
    fn load(&self, seed: u64) -> Result<OrbitDataset> {
        let ds = match self {
            DataSource::File(path) => OrbitDataset::load(path)
                .with_context(|| format!("cannot load dataset {}", path.display()))?,
            DataSource::Generate { spec, exemplars, fraction, normalize } => {
                let group = FiniteAbelianGroup::from_spec(spec)?;
                generate(&group, *exemplars, *fraction, *normalize, seed)?
            }
        };
        if ds.is_empty() {
            bail!("dataset has no samples");
        }
        Ok(ds)
    }
}

// ---------------------------------------------------------------------------
// train

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    /// Existing dataset file; alternative to inline generation.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    exemplars: Option<usize>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    normalize: Option<bool>,
    /// Seeds weight init and batch order, and generation with --group.
    #[arg(long)]
    seed: Option<u64>,
    /// Weight of the reconstruction term.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    base_lr: Option<f64>,
    #[arg(long)]
    min_lr: Option<f64>,
    #[arg(long)]
    max_lr: Option<f64>,
    #[arg(long)]
    lr_half_period_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Samples drawn per class within a batch.
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    plateau_tolerance: Option<f64>,
    /// Consecutive non-improving epochs that end training.
    #[arg(long)]
    plateau_epochs: Option<usize>,
    #[arg(long)]
    adam_beta1: Option<f64>,
    #[arg(long)]
    adam_beta2: Option<f64>,
    #[arg(long)]
    adam_epsilon: Option<f64>,
    /// Weight file to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training log CSV; defaults to the weight file with a .log.csv
    /// extension.
    #[arg(long)]
    log: Option<PathBuf>,
}

const TRAIN_KEYS: &[&str] = &[
    "data",
    "group",
    "exemplars",
    "fraction",
    "normalize",
    "seed",
    "gamma",
    "base_lr",
    "min_lr",
    "max_lr",
    "lr_half_period_epochs",
    "batch_size",
    "per_class",
    "max_epochs",
    "plateau_tolerance",
    "plateau_epochs",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "out",
    "log",
];

pub fn run_train(args: TrainArgs, cfg: &ConfigMap) -> Result<u8> {
    let mut r = Resolver::new("train", cfg, TRAIN_KEYS)?;
    let source = resolve_data_source(
        &mut r,
        args.data,
        args.group,
        args.exemplars,
        args.fraction,
        args.normalize,
    )?;
    let d = TrainConfig::default();
    let tc = TrainConfig {
        seed: r.value("seed", args.seed, d.seed)?,
        gamma: r.value("gamma", args.gamma, d.gamma)?,
        base_lr: r.value("base_lr", args.base_lr, d.base_lr)?,
        min_lr: r.value("min_lr", args.min_lr, d.min_lr)?,
        max_lr: r.value("max_lr", args.max_lr, d.max_lr)?,
        lr_half_period_epochs: r.value(
            "lr_half_period_epochs",
            args.lr_half_period_epochs,
            d.lr_half_period_epochs,
        )?,
        batch_size: r.value("batch_size", args.batch_size, d.batch_size)?,
        per_class: r.value("per_class", args.per_class, d.per_class)?,
        max_epochs: r.value("max_epochs", args.max_epochs, d.max_epochs)?,
        plateau_tolerance: r.value("plateau_tolerance", args.plateau_tolerance, d.plateau_tolerance)?,
        plateau_epochs: r.value("plateau_epochs", args.plateau_epochs, d.plateau_epochs)?,
        adam_beta1: r.value("adam_beta1", args.adam_beta1, d.adam_beta1)?,
        adam_beta2: r.value("adam_beta2", args.adam_beta2, d.adam_beta2)?,
        adam_epsilon: r.value("adam_epsilon", args.adam_epsilon, d.adam_epsilon)?,
    };
    let out = r.value("out", args.out, PathBuf::from("weights.bnnw"))?;
    let log_path = r.value("log", args.log, sibling(&out, "log.csv"))?;

    let ds = source.load(tc.seed)?;
    match train(&ds, &tc) {
        Ok(res) => {
            res.weights.save(&out)?;
            fs::write(&log_path, render_log(&res.log))
                .with_context(|| format!("cannot write {}", log_path.display()))?;
            let cfg_path = r.write_next_to(&out)?;
            let last = res.log.last().expect("training ran at least one epoch");
            let status = if res.converged {
                format!("reached a loss plateau after {} epochs", res.epochs_run)
            } else {
                format!("hit the epoch cap ({}) without a plateau", res.epochs_run)
            };
            println!("{status}; final mean loss {:.3e}", last.mean_loss);
            println!(
                "weights -> {}, log -> {}, config -> {}",
                out.display(),
                log_path.display(),
                cfg_path.display()
            );
            Ok(if res.converged { 0 } else { EXIT_SOFT })
        }
        Err(BnnError::Diverged { epoch, weights }) => {
            weights.save(&out)?;
            let _ = r.write_next_to(&out);
            bail!(
                "training diverged at epoch {epoch}; last finite weights kept at {}",
                out.display()
            );
        }
        Err(e) => Err(e.into()),
    }
}

fn render_log(log: &[TrainLogEntry]) -> String {
    let mut s = String::from("epoch,mean_loss,mean_orbit_term,mean_recon_term,lr\n");
    for e in log {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            e.epoch,
            fmt_f64(e.mean_loss),
            fmt_f64(e.mean_orbit_term),
            fmt_f64(e.mean_recon_term),
            fmt_f64(e.lr)
        ));
    }
    s
}

// ---------------------------------------------------------------------------
// eval

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Weight file, or `analytic` for the character-table layer.
    #[arg(long)]
    weights: Option<String>,
    /// Dataset file; alternative to inline generation.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    exemplars: Option<usize>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    normalize: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    /// Report CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

const EVAL_KEYS: &[&str] =
    &["weights", "data", "group", "exemplars", "fraction", "normalize", "seed", "out"];

pub fn run_eval(args: EvalArgs, cfg: &ConfigMap) -> Result<u8> {
    let mut r = Resolver::new("eval", cfg, EVAL_KEYS)?;
    let weights_src = r.required::<String>("weights", args.weights)?;
    let source = resolve_data_source(
        &mut r,
        args.data,
        args.group,
        args.exemplars,
        args.fraction,
        args.normalize,
    )?;
    let seed = r.value("seed", args.seed, 0u64)?;
    let out = r.optional::<PathBuf>("out", args.out)?;

    let ds = source.load(seed)?;
    let group = ds.group();
    let w = load_weights(&weights_src, group)?;

    let mut csv = String::from("sample,label,max_invariance_error\n");
    let mut worst_overall = 0.0f64;
    for (idx, s) in ds.samples().iter().enumerate() {
        let base = forward(&w, &s.signal)?;
        let mut worst = 0.0f64;
        for g in group.elements() {
            let shifted = group.act_on_signal(&g, &s.signal)?;
            worst = worst.max(forward(&w, &shifted)?.distance(&base));
        }
        worst_overall = worst_overall.max(worst);
        csv.push_str(&format!("{idx},{},{}\n", s.label, fmt_f64(worst)));
    }

    let probe = equivariance_probe(&w, &ds)?;
    csv.push('\n');
    csv.push_str("row,best_character,phase_residual,modulus_variation,degenerate\n");
    for row in &probe.rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.row,
            row.best_label,
            fmt_f64(row.phase_residual),
            fmt_f64(row.modulus_variation),
            row.degenerate
        ));
    }

    let wrote = emit(out.as_deref(), &csv)?;
    if let Some(path) = &out {
        r.write_next_to(path)?;
    }
    note(
        wrote,
        &format!(
            "max invariance error {:.3e} over {} samples; equivariance probe: \
             max phase residual {:.3e}, max modulus variation {:.3e}",
            worst_overall,
            ds.len(),
            probe.max_phase_residual(),
            probe.max_modulus_variation()
        ),
    );
    Ok(0)
}

/// Row equivariance is measured on one signal: the first of the first
/// ten samples whose linear responses are all large enough for phases
/// to mean something, falling back to the first sample.
fn equivariance_probe(w: &NetworkWeights, ds: &OrbitDataset) -> Result<EquivarianceReport> {
    let group = ds.group();
    let mut first = None;
    for s in ds.samples().iter().take(10) {
        let rep = equivariance_report(w, &s.signal, group)?;
        if rep.rows.iter().all(|row| !row.degenerate) {
            return Ok(rep);
        }
        first.get_or_insert(rep);
    }
    Ok(first.expect("dataset is non-empty"))
}

// ---------------------------------------------------------------------------
// extract-cayley

#[derive(Debug, clap::Args)]
pub struct ExtractCayleyArgs {
    /// Weight file, or `analytic` for the character-table layer.
    #[arg(long)]
    weights: Option<String>,
    /// Reference group for the isomorphism verdict.
    #[arg(long)]
    group: Option<String>,
    /// Report file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXTRACT_KEYS: &[&str] = &["weights", "group", "out"];

pub fn run_extract_cayley(args: ExtractCayleyArgs, cfg: &ConfigMap) -> Result<u8> {
    let mut r = Resolver::new("extract-cayley", cfg, EXTRACT_KEYS)?;
    let weights_src = r.required::<String>("weights", args.weights)?;
    let spec = r.required::<String>("group", args.group)?;
    let out = r.optional::<PathBuf>("out", args.out)?;

    let group = FiniteAbelianGroup::from_spec(&spec)?;
    let w = load_weights(&weights_src, &group)?;
    let report = cayley_from_irreps(&w);
    let n = report.dims();

    let width = (n - 1).to_string().len();
    let mut text = format!("composition table recovered from {n} weight rows:\n");
    for i in 0..n {
        let row: Vec<String> =
            (0..n).map(|j| format!("{:>width$}", report.entry(i, j))).collect();
        text.push_str("  ");
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    text.push_str(&format!("latin square: {}\n", if report.is_latin() { "yes" } else { "no" }));
    let ties = if report.ties().is_empty() {
        "none".to_string()
    } else {
        format!("{:?}", report.ties())
    };
    text.push_str(&format!("argmax ties: {ties}\n"));
    text.push_str(&format!("min match score: {}\n", fmt_f64(report.min_match_score())));
    text.push_str(&format!("reference group: {group} (order {})\n", group.order()));

    let (verdict, code) = match report.table() {
        None => ("NO GROUP RECOVERED: closure table is not a Latin square".to_string(), EXIT_SOFT),
        Some(table) => match find_isomorphism(table, &group) {
            Ok(Some(witness)) => (format!("ISOMORPHIC to {group} (witness: {witness:?})"), 0),
            Ok(None) => (format!("NOT ISOMORPHIC to {group}"), EXIT_SOFT),
            Err(CayleyError::TooLarge { order, max }) => {
                (format!("isomorphism check skipped: order {order} exceeds the search cap {max}"), 0)
            }
            Err(e) => return Err(e.into()),
        },
    };
    text.push_str(&format!("verdict: {verdict}\n"));

    emit(out.as_deref(), &text)?;
    if let Some(path) = &out {
        let cfg_path = r.write_next_to(path)?;
        println!("report -> {} (config {})", path.display(), cfg_path.display());
    }
    Ok(code)
}

// ---------------------------------------------------------------------------
// attack

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum ReprArg {
    Bispectrum,
    Power,
}

impl ReprArg {
    fn key(self) -> &'static str {
        match self {
            ReprArg::Bispectrum => "bispectrum",
            ReprArg::Power => "power",
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct AttackArgs {
    /// Weight file, or `analytic` for the character-table layer.
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    group: Option<String>,
    /// Signal file, or an integer seed for a random generic real target.
    #[arg(long)]
    target: Option<String>,
    /// Which summary of the layer the candidates must match.
    #[arg(long, value_enum)]
    representation: Option<ReprArg>,
    #[arg(long)]
    candidates: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    init_lr: Option<f64>,
    #[arg(long)]
    plateau_window: Option<usize>,
    #[arg(long)]
    plateau_tolerance: Option<f64>,
    #[arg(long)]
    lr_decay: Option<f64>,
    #[arg(long)]
    min_lr: Option<f64>,
    #[arg(long)]
    objective_tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    adam_beta1: Option<f64>,
    #[arg(long)]
    adam_beta2: Option<f64>,
    #[arg(long)]
    adam_epsilon: Option<f64>,
    /// Per-candidate report CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

const ATTACK_KEYS: &[&str] = &[
    "weights",
    "group",
    "target",
    "representation",
    "candidates",
    "max_iters",
    "init_lr",
    "plateau_window",
    "plateau_tolerance",
    "lr_decay",
    "min_lr",
    "objective_tol",
    "seed",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "out",
];

pub fn run_attack(args: AttackArgs, cfg: &ConfigMap) -> Result<u8> {
    let mut r = Resolver::new("attack", cfg, ATTACK_KEYS)?;
    let weights_src = r.required::<String>("weights", args.weights)?;
    let spec = r.required::<String>("group", args.group)?;
    let target_src = r.required::<String>("target", args.target)?;
    let repr_key = r.value(
        "representation",
        args.representation.map(|e| e.key().to_string()),
        "bispectrum".to_string(),
    )?;
    let representation = match repr_key.as_str() {
        "bispectrum" => Representation::Bispectrum,
        "power" => Representation::PowerSpectrum,
        other => bail!("unknown representation `{other}` (use bispectrum or power)"),
    };
    let d = AttackConfig::default();
    let ac = AttackConfig {
        representation,
        candidates: r.value("candidates", args.candidates, d.candidates)?,
        max_iters: r.value("max_iters", args.max_iters, d.max_iters)?,
        init_lr: r.value("init_lr", args.init_lr, d.init_lr)?,
        plateau_window: r.value("plateau_window", args.plateau_window, d.plateau_window)?,
        plateau_tolerance: r.value("plateau_tolerance", args.plateau_tolerance, d.plateau_tolerance)?,
        lr_decay: r.value("lr_decay", args.lr_decay, d.lr_decay)?,
        min_lr: r.value("min_lr", args.min_lr, d.min_lr)?,
        objective_tol: r.value("objective_tol", args.objective_tol, d.objective_tol)?,
        seed: r.value("seed", args.seed, d.seed)?,
        adam_beta1: r.value("adam_beta1", args.adam_beta1, d.adam_beta1)?,
        adam_beta2: r.value("adam_beta2", args.adam_beta2, d.adam_beta2)?,
        adam_epsilon: r.value("adam_epsilon", args.adam_epsilon, d.adam_epsilon)?,
    };
    let out = r.optional::<PathBuf>("out", args.out)?;

    let group = FiniteAbelianGroup::from_spec(&spec)?;
    let w = load_weights(&weights_src, &group)?;
    let target = resolve_target(&target_src, &group)?;
    let result = attack(&w, &group, &target, &ac)?;

    let mut csv = String::from("candidate,final_objective,orbit_distance,best_scalar,iterations\n");
    for o in &result.outcomes {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            o.index,
            fmt_f64(o.final_objective),
            fmt_f64(o.scaled_distance),
            fmt_f64(o.scale),
            o.iterations
        ));
    }
    let wrote = emit(out.as_deref(), &csv)?;
    if let Some(path) = &out {
        r.write_next_to(path)?;
    }

    let converged = result.outcomes.iter().filter(|o| o.converged).count();
    note(
        wrote,
        &format!(
            "{repr_key} attack on {group}: {:.0}% of {} candidates within orbit \
             distance 1e-2 after rescaling; {converged} reached the objective \
             tolerance; best objective {:.3e}",
            result.success_fraction(1e-2) * 100.0,
            result.outcomes.len(),
            result.best().final_objective
        ),
    );
    Ok(0)
}

fn resolve_target(src: &str, group: &FiniteAbelianGroup) -> Result<Vec<C64>> {
    let path = Path::new(src);
    if path.exists() {
        return read_signal(path, group.order());
    }
    if let Ok(seed) = src.parse::<u64>() {
        return Ok(generic_real_target(group, seed));
    }
    bail!("target `{src}` is neither an existing file nor an unsigned integer seed");
}

// ---------------------------------------------------------------------------
// spectra

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum WhatArg {
    Gft,
    Power,
    Bispectrum,
    All,
}

impl WhatArg {
    fn key(self) -> &'static str {
        match self {
            WhatArg::Gft => "gft",
            WhatArg::Power => "power",
            WhatArg::Bispectrum => "bispectrum",
            WhatArg::All => "all",
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct SpectraArgs {
    /// Signal file: N floats (real) or 2N floats (re,im pairs).
    #[arg(long)]
    signal: Option<PathBuf>,
    #[arg(long)]
    group: Option<String>,
    /// Which spectra to emit.
    #[arg(long, value_enum)]
    what: Option<WhatArg>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

const SPECTRA_KEYS: &[&str] = &["signal", "group", "what", "out"];

pub fn run_spectra(args: SpectraArgs, cfg: &ConfigMap) -> Result<u8> {
    let mut r = Resolver::new("spectra", cfg, SPECTRA_KEYS)?;
    let signal = r.required::<PathBuf>("signal", args.signal)?;
    let spec = r.required::<String>("group", args.group)?;
    let what_key = r.value("what", args.what.map(|w| w.key().to_string()), "all".to_string())?;
    let what = match what_key.as_str() {
        "gft" => WhatArg::Gft,
        "power" => WhatArg::Power,
        "bispectrum" => WhatArg::Bispectrum,
        "all" => WhatArg::All,
        other => bail!("unknown spectrum `{other}` (use gft, power, bispectrum or all)"),
    };
    let out = r.optional::<PathBuf>("out", args.out)?;

    let group = FiniteAbelianGroup::from_spec(&spec)?;
    let table = CharacterTable::new(&group);
    let n = group.order();
    let x = read_signal(&signal, n)?;
    let fhat = table.gft(&x)?;

    let mut csv = String::from("spectrum,i,j,real,imag\n");
    if matches!(what, WhatArg::Gft | WhatArg::All) {
        for (i, v) in fhat.iter().enumerate() {
            csv.push_str(&format!("gft,{i},,{},{}\n", fmt_f64(v.re), fmt_f64(v.im)));
        }
    }
    if matches!(what, WhatArg::Power | WhatArg::All) {
        for (i, p) in power_spectrum(&fhat).iter().enumerate() {
            csv.push_str(&format!("power,{i},,{},{}\n", fmt_f64(*p), fmt_f64(0.0)));
        }
    }
    if matches!(what, WhatArg::Bispectrum | WhatArg::All) {
        let b = bispectrum(&fhat, &table)?;
        for i in 0..n {
            for j in i..n {
                let v = b.get(i, j);
                csv.push_str(&format!(
                    "bispectrum,{i},{j},{},{}\n",
                    fmt_f64(v.re),
                    fmt_f64(v.im)
                ));
            }
        }
    }

    emit(out.as_deref(), &csv)?;
    if let Some(path) = &out {
        let cfg_path = r.write_next_to(path)?;
        println!("spectra -> {} (config {})", path.display(), cfg_path.display());
    }
    Ok(0)
}
