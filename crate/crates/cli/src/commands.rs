use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gfmfr_core::dataio::{
    generate_synthetic, leave_one_out_split, load_interactions_with_catalog, load_modality_features,
    read_feature_header, write_interactions, write_modality_features, SyntheticSpec,
};
use gfmfr_core::engine::{output, run_experiment, ExperimentReport, Grouping, Schedule};
use gfmfr_core::{ExperimentConfig, ModalityFeatures, SplitDataset};

use crate::manifest::{code_version, sha256_file, RunManifest};
use crate::{CliError, RunOptions, SynthArgs};

pub const INTERACTIONS_FILE: &str = "interactions.tsv";
pub const FEATURES_FILE: &str = "features.gmf";
pub const TRUE_GROUPS_FILE: &str = "true_groups.csv";

fn prepare_out(dir: &Path, force: bool) -> Result<(), CliError> {
    if let Ok(mut entries) = std::fs::read_dir(dir) {
        if entries.next().is_some() && !force {
            return Err(CliError::usage(format!(
                "refusing to write into non-empty directory {} (pass --force)",
                dir.display()
            )));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let spec = SyntheticSpec {
        num_users: a.users,
        num_items: a.items,
        num_modalities: a.modalities,
        feature_dim: a.dim,
        true_groups: a.groups,
        interactions_per_user: a.interactions,
        noise_level: a.noise,
        latent_dim: a.latent_dim,
        user_spread: a.spread,
        seed: a.seed,
    };
    spec.validate().map_err(|e| CliError::usage(e.to_string()))?;
    prepare_out(&a.out, a.force)?;
    let data = generate_synthetic(&spec)?;
    write_interactions(&a.out.join(INTERACTIONS_FILE), &data.store)?;
    write_modality_features(&a.out.join(FEATURES_FILE), &data.features)?;
    let mut groups = String::from("user_id,group_id\n");
    for (u, g) in data.true_groups.iter().enumerate() {
        writeln!(groups, "{u},{g}").unwrap();
    }
    write_text(&a.out.join(TRUE_GROUPS_FILE), &groups)
}

fn absolutize(path: &str, base: &Path) -> String {
    let p = Path::new(path);
    if p.is_absolute() {
        path.to_string()
    } else {
        base.join(p).to_string_lossy().into_owned()
    }
}

/// Merges file, `--set` and named flags, in that order.
fn build_config(opts: &RunOptions) -> Result<(ExperimentConfig, Option<RunManifest>), CliError> {
    let cwd = std::env::current_dir().map_err(|e| CliError::data(e.to_string()))?;
    let (mut cfg, manifest) = if let Some(m) = &opts.manifest {
        let m = RunManifest::load(m)?;
        (m.config.clone(), Some(m))
    } else if let Some(path) = &opts.config {
        let mut cfg = ExperimentConfig::load(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = cwd.join(base);
        cfg.interactions = cfg.interactions.map(|p| absolutize(&p, &base));
        cfg.features = cfg.features.map(|p| absolutize(&p, &base));
        (cfg, None)
    } else {
        (ExperimentConfig::default(), None)
    };
    for kv in &opts.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    for (k, v) in &opts.flags.values {
        cfg.set(k, v)?;
    }
    let resolve = |p: Option<String>| -> Result<Option<String>, CliError> {
        p.map(|p| {
            let abs = absolutize(&p, &cwd);
            std::fs::canonicalize(&abs)
                .map(|c| c.to_string_lossy().into_owned())
                .map_err(|e| CliError::data(format!("cannot open {abs}: {e}")))
        })
        .transpose()
    };
    cfg.interactions = resolve(cfg.interactions.take())?;
    cfg.features = resolve(cfg.features.take())?;
    cfg.validate()?;
    Ok((cfg, manifest))
}

/// Inputs loaded once and shared by every run of a command.
struct Inputs {
    split: SplitDataset,
    features: ModalityFeatures,
    users: gfmfr_core::dataio::IdMap,
    interactions_sha256: String,
    features_sha256: String,
}

fn load_inputs(cfg: &ExperimentConfig, expect: Option<&RunManifest>) -> Result<Inputs, CliError> {
    let ipath = PathBuf::from(
        cfg.interactions
            .clone()
            .ok_or_else(|| CliError::config("no interactions file (set `interactions`)"))?,
    );
    let fpath = PathBuf::from(
        cfg.features
            .clone()
            .ok_or_else(|| CliError::config("no features file (set `features`)"))?,
    );
    let interactions_sha256 = sha256_file(&ipath)?;
    let features_sha256 = sha256_file(&fpath)?;
    if let Some(m) = expect {
        if m.interactions_sha256 != interactions_sha256 || m.features_sha256 != features_sha256 {
            return Err(CliError::data("input files do not match the manifest digests"));
        }
    }
    // The feature file defines the item catalog.
    let header = read_feature_header(&fpath)?;
    let num_items = header
        .shapes
        .first()
        .map(|s| s.0)
        .ok_or_else(|| CliError::data("feature file has no modalities"))?;
    let loaded = load_interactions_with_catalog(&ipath, num_items)?;
    let split = leave_one_out_split(&loaded.store)?;
    let features = load_modality_features(&fpath, num_items)?;
    Ok(Inputs {
        split,
        features,
        users: loaded.users,
        interactions_sha256,
        features_sha256,
    })
}

fn run_one(cfg: &ExperimentConfig, inputs: &Inputs, out: &Path) -> Result<ExperimentReport, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::data(format!("cannot create {}: {e}", out.display())))?;
    let out_abs = std::fs::canonicalize(out).unwrap_or_else(|_| out.to_path_buf());
    RunManifest {
        code_version: code_version(),
        output_dir: out_abs,
        seed: cfg.seed,
        interactions_sha256: inputs.interactions_sha256.clone(),
        features_sha256: inputs.features_sha256.clone(),
        config: cfg.clone(),
    }
    .write(out)?;
    inputs.users.write_tsv(&out.join("users.idmap.tsv"))?;
    let report = run_experiment(cfg, &inputs.split, &inputs.features)?;
    output::write_outputs(out, &report)?;
    Ok(report)
}

fn with_pool<T>(threads: Option<usize>, f: impl FnOnce() -> Result<T, CliError> + Send) -> Result<T, CliError>
where
    T: Send,
{
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be >= 1"));
        }
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(f)
}

pub fn run(opts: &RunOptions) -> Result<(), CliError> {
    let (cfg, manifest) = build_config(opts)?;
    let inputs = load_inputs(&cfg, manifest.as_ref())?;
    prepare_out(&opts.out, opts.force)?;
    with_pool(opts.threads, || run_one(&cfg, &inputs, &opts.out).map(|_| ()))
}

const GROUPING_VARIANTS: &[&str] = &["baseline", "random-group", "single-group", "multiple-agg"];
const SCHEDULE_VARIANTS: &[&str] = &["scale-align", "smooth", "progressive", "ours"];

fn variant_config(base: &ExperimentConfig, name: &str) -> ExperimentConfig {
    let mut c = base.clone();
    match name {
        "random-group" => c.grouping = Grouping::Random,
        "single-group" => c.grouping = Grouping::Single,
        "multiple-agg" => c.grouping = Grouping::MultipleAgg,
        "baseline" => {}
        s => c.schedule = s.parse::<Schedule>().expect("schedule variant"),
    }
    c
}

pub fn ablate(axis: &str, only: &[String], opts: &RunOptions) -> Result<(), CliError> {
    let all: Vec<&str> = match axis {
        "grouping" => GROUPING_VARIANTS.to_vec(),
        "schedule" => SCHEDULE_VARIANTS.to_vec(),
        "all" => GROUPING_VARIANTS.iter().chain(SCHEDULE_VARIANTS).copied().collect(),
        other => {
            return Err(CliError::usage(format!(
                "unknown axis `{other}` (valid: grouping, schedule, all)"
            )))
        }
    };
    for v in only {
        if !all.contains(&v.as_str()) {
            return Err(CliError::usage(format!(
                "unknown variant `{v}` for axis {axis} (valid: {})",
                all.join(", ")
            )));
        }
    }
    let chosen: Vec<&str> = all
        .into_iter()
        .filter(|v| only.is_empty() || only.iter().any(|o| o == v))
        .collect();
    let (base, manifest) = build_config(opts)?;
    let inputs = load_inputs(&base, manifest.as_ref())?;
    prepare_out(&opts.out, opts.force)?;
    let mut table = String::from("variant,grouping,schedule,final_round,hr_at_k,ndcg_at_k\n");
    with_pool(opts.threads, || {
        for v in &chosen {
            let cfg = variant_config(&base, v);
            let r = run_one(&cfg, &inputs, &opts.out.join(v))?;
            let last = r.metrics.last().expect("final evaluation");
            writeln!(table, "{v},{},{},{},{},{}", cfg.grouping, cfg.schedule, last.round, last.hr_at_k, last.ndcg_at_k).unwrap();
        }
        Ok(())
    })?;
    write_text(&opts.out.join("comparison.csv"), &table)
}

pub fn ldp_sweep(deltas: &[f64], opts: &RunOptions) -> Result<(), CliError> {
    if deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
        return Err(CliError::usage("noise scales must be finite and >= 0"));
    }
    let (base, manifest) = build_config(opts)?;
    let inputs = load_inputs(&base, manifest.as_ref())?;
    prepare_out(&opts.out, opts.force)?;
    let mut table = String::from("delta,epsilon,final_round,hr_at_k,ndcg_at_k\n");
    with_pool(opts.threads, || {
        for &d in deltas {
            let mut cfg = base.clone();
            cfg.ldp_delta = d;
            let r = run_one(&cfg, &inputs, &opts.out.join(format!("delta-{d}")))?;
            let last = r.metrics.last().expect("final evaluation");
            let eps = gfmfr_core::client::privacy_budget(d);
            writeln!(table, "{d},{eps},{},{},{}", last.round, last.hr_at_k, last.ndcg_at_k).unwrap();
        }
        Ok(())
    })?;
    write_text(&opts.out.join("comparison.csv"), &table)
}
