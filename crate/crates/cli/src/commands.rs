use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use deepres::datasets::{embed_mnist, generate_synthetic, load_idx, IdxArray};
use deepres::diagnostics::{diagnose_networks, DiagnosticsConfig, DiagnosticsError, ScalingReport};
use deepres::limits::{ito_correction_check, strong_error_sweep, ConvergenceTable, ItoCheck};
use deepres::numerics::stream_id;
use deepres::resnet::{load_checkpoint, sgd_train, Checkpoint, TrainHistory};
use deepres::{Dataset, ResNet, Vector};
use rayon::prelude::*;

use crate::config::{DataKind, ExperimentConfig};
use crate::output::{
    sha256_hex, unix_now, OutputDir, RunManifest, TaskRecord, TaskStatus, FAILURE_MARKER,
    MANIFEST_FILE,
};
use crate::{CliError, Context};

/// Tracks stages, artifacts and the failure marker of one command.
struct Runner<'a> {
    out: OutputDir,
    manifest: RunManifest,
    ctx: &'a Context,
}

impl<'a> Runner<'a> {
    fn new(
        command: &str,
        out_dir: &std::path::Path,
        config_hash: String,
        ctx: &'a Context,
    ) -> Result<Self, CliError> {
        let out = OutputDir::create(out_dir).map_err(|e| CliError::stage("output", e))?;
        Ok(Self {
            out,
            manifest: RunManifest::new(command, config_hash),
            ctx,
        })
    }

    fn write(&mut self, rel: &str, bytes: impl AsRef<[u8]>) -> Result<(), String> {
        self.out
            .write(rel, bytes.as_ref())
            .map_err(|e| format!("writing {rel}: {e}"))?;
        self.manifest.artifacts.push(rel.to_string());
        Ok(())
    }

    fn stage<R>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Self) -> Result<R, String>,
    ) -> Result<R, CliError> {
        self.ctx.log(&format!("[{name}] started"));
        let start = Instant::now();
        let result = f(self);
        let seconds = start.elapsed().as_secs_f64();
        match result {
            Ok(r) => {
                self.ctx.log(&format!("[{name}] done in {seconds:.1}s"));
                self.manifest.tasks.push(TaskRecord {
                    stage: name.into(),
                    status: TaskStatus::Ok,
                    seconds,
                    message: None,
                });
                Ok(r)
            }
            Err(cause) => {
                self.manifest.tasks.push(TaskRecord {
                    stage: name.into(),
                    status: TaskStatus::Failed,
                    seconds,
                    message: Some(cause.clone()),
                });
                let marker = format!("stage = {name}\ncause = {cause}\n");
                // The marker is best effort; the stage error is what gets reported.
                let _ = self.out.write(FAILURE_MARKER, marker.as_bytes());
                Err(CliError::Stage {
                    stage: name.into(),
                    cause,
                })
            }
        }
    }

    /// Writes the manifest last, replacing any earlier one, and clears a
    /// stale failure marker.
    fn finish(mut self) -> Result<RunManifest, CliError> {
        self.manifest.finished_unix = unix_now();
        self.out
            .remove(FAILURE_MARKER)
            .map_err(|e| CliError::stage("manifest", e))?;
        self.out
            .write(MANIFEST_FILE, self.manifest.to_json().as_bytes())
            .map_err(|e| CliError::stage("manifest", e))?;
        Ok(self.manifest)
    }
}

fn first_items(a: &IdxArray, n: usize) -> Result<IdxArray, String> {
    let count = a.count();
    if n > count {
        return Err(format!("asked for {n} items, file has {count}"));
    }
    let per = a.data.len().checked_div(count).unwrap_or(0);
    let mut dims = a.dims.clone();
    dims[0] = n;
    IdxArray::new(dims, a.data[..n * per].to_vec()).map_err(|e| e.to_string())
}

fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset, String> {
    let ds = &cfg.dataset;
    match ds.kind {
        DataKind::Synthetic => {
            generate_synthetic(ds.seed, ds.n, ds.d, ds.k_steps).map_err(|e| e.to_string())
        }
        DataKind::Mnist => {
            let read = |p: &Option<PathBuf>| -> Result<IdxArray, String> {
                let p = p.as_ref().ok_or("missing IDX path")?;
                let bytes = fs::read(p).map_err(|e| format!("{}: {e}", p.display()))?;
                load_idx(&bytes).map_err(|e| format!("{}: {e}", p.display()))
            };
            let images = first_items(&read(&ds.images)?, ds.n)?;
            let labels = first_items(&read(&ds.labels)?, ds.n)?;
            embed_mnist(&images, &labels, ds.seed, ds.d).map_err(|e| e.to_string())
        }
    }
}

fn data_stage(r: &mut Runner, cfg: &ExperimentConfig) -> Result<Dataset, CliError> {
    r.stage("data", |r| {
        let data = build_dataset(cfg)?;
        r.write("dataset.bin", data.to_container().to_bytes())?;
        r.ctx
            .log(&format!("  {} samples of dimension {}", data.n(), data.d()));
        Ok(data)
    })
}

struct Trained {
    depth: usize,
    replicate: usize,
    seed: u64,
    net: ResNet,
    history: TrainHistory,
}

fn train_stage(
    r: &mut Runner,
    cfg: &ExperimentConfig,
    data: &Dataset,
) -> Result<Vec<Trained>, CliError> {
    r.stage("train", |r| {
        let jobs: Vec<(usize, usize)> = cfg
            .sweep
            .depths
            .resolve()
            .into_iter()
            .flat_map(|l| (0..cfg.sweep.seeds).map(move |s| (l, s)))
            .collect();
        let trained: Vec<Trained> = jobs
            .par_iter()
            .map(|&(depth, replicate)| {
                let seed = stream_id(&[cfg.sweep.seed, depth as u64, replicate as u64]);
                let net = ResNet::init(cfg.architecture(depth), seed).map_err(|e| e.to_string())?;
                let (net, history) = sgd_train(net, data, &cfg.train_config(seed))
                    .map_err(|e| format!("L = {depth}, replicate {replicate}: {e}"))?;
                Ok(Trained {
                    depth,
                    replicate,
                    seed,
                    net,
                    history,
                })
            })
            .collect::<Result<_, String>>()?;

        let mut csv =
            String::from("L,replicate,seed,updates,final_loss,converged,max_hidden_norm\n");
        for t in &trained {
            let h = &t.history;
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                t.depth,
                t.replicate,
                t.seed,
                h.updates,
                h.final_loss,
                h.converged,
                h.max_hidden_norm
            );
            let ckpt = Checkpoint {
                net: t.net.clone(),
                seed: t.seed,
                loss_final: Some(h.final_loss),
                converged: h.converged,
            };
            r.write(
                &format!("checkpoints/L{:05}_r{}.ckpt", t.depth, t.replicate),
                ckpt.to_bytes(),
            )?;
            r.ctx.log(&format!(
                "  L = {:>5} replicate {}: loss {:.4} after {} updates",
                t.depth, t.replicate, h.final_loss, h.updates
            ));
        }
        r.write("training.csv", csv)?;
        Ok(trained)
    })
}

fn write_report(r: &mut Runner, report: &ScalingReport) -> Result<(), String> {
    r.write("scaling_report.csv", report.to_csv())?;
    r.write("scaling_report.json", report.to_json())
}

fn report_summary(report: &ScalingReport) -> String {
    format!(
        "alpha = {:.3}, beta = {:.3} (weights), {:.3} (biases), regime {}",
        report.alpha.exponent,
        report.weights.beta.exponent,
        report.biases.beta.exponent,
        report.regime
    )
}

fn diagnose_stage(
    r: &mut Runner,
    cfg: &ExperimentConfig,
    data: &Dataset,
    trained: &[Trained],
) -> Result<ScalingReport, CliError> {
    r.stage("diagnose", |r| {
        let nets: Vec<ResNet> = trained.iter().map(|t| t.net.clone()).collect();
        let mut report =
            diagnose_networks(&nets, &cfg.diagnostics, Some(data)).map_err(|e| e.to_string())?;
        let p = &mut report.provenance;
        p.insert("config_hash".into(), r.manifest.config_hash.clone());
        p.insert("dataset".into(), cfg.dataset.kind.to_string());
        p.insert("dataset_seed".into(), cfg.dataset.seed.to_string());
        p.insert("sweep_seed".into(), cfg.sweep.seed.to_string());
        p.insert("replicates_per_depth".into(), cfg.sweep.seeds.to_string());
        write_report(r, &report)?;
        Ok(report)
    })
}

/// Outcome of the limits stage against the configured bounds.
pub struct LimitsOutcome {
    pub pass: bool,
    pub line: String,
}

fn limits_stage(r: &mut Runner, cfg: &ExperimentConfig) -> Result<LimitsOutcome, CliError> {
    r.stage("limits", |r| {
        let li = &cfg.limits;
        let spec = li.spec.build::<f64>();
        let x = Vector::filled(li.spec.d, li.x);
        let table: ConvergenceTable =
            strong_error_sweep(&spec, &x, &cfg.sweep_config()).map_err(|e| e.to_string())?;
        r.write("convergence.csv", table.to_csv())?;
        r.write("convergence.json", table.to_json())?;

        let rate = table.rate.map(|f| f.slope);
        let rate_ok = rate.is_some_and(|s| s >= li.rate_min && s <= li.rate_max);
        let mono_ok = !li.require_decreasing || table.errors_decreasing();
        let mut pass = rate_ok && mono_ok;
        let mut line = format!(
            "{} sweep: rate {} in [{}, {}], errors decreasing {}",
            table.reference,
            rate.map_or("undefined".into(), |s| format!("{s:.4}")),
            li.rate_min,
            li.rate_max,
            table.errors_decreasing()
        );
        if table.heavy_tail_flag() {
            line.push_str(", heavy-tail warning");
        }
        if li.ito_check {
            let check: ItoCheck =
                ito_correction_check(&spec, li.ito_depth, li.ito_paths, &x, li.seed)
                    .map_err(|e| e.to_string())?;
            let mut json = serde_json::to_value(check).expect("plain struct");
            json["z_corrected"] = check.z_corrected().into();
            json["z_uncorrected"] = check.z_uncorrected().into();
            r.write(
                "ito_check.json",
                serde_json::to_string_pretty(&json).expect("json") + "\n",
            )?;
            let ok = check.z_corrected() < li.ito_max_z_corrected
                && check.z_uncorrected() > li.ito_min_z_uncorrected;
            pass &= ok;
            let _ = write!(
                line,
                "; correction check z = {:.2} (corrected), {:.2} (uncorrected)",
                check.z_corrected(),
                check.z_uncorrected()
            );
        }
        Ok(LimitsOutcome {
            pass,
            line: format!("[{}] {line}", if pass { "PASS" } else { "FAIL" }),
        })
    })
}

fn mark_check_failed(r: &mut Runner) {
    if let Some(t) = r.manifest.tasks.last_mut() {
        t.status = TaskStatus::CheckFailed;
    }
}

fn config_hash(cfg: &ExperimentConfig) -> String {
    sha256_hex(cfg.to_canonical().as_bytes())
}

/// data, train, diagnose, and limits when enabled.
pub fn run(cfg: &ExperimentConfig, ctx: &Context) -> Result<RunManifest, CliError> {
    cfg.validate_training()?;
    if cfg.limits.enabled {
        cfg.validate_limits()?;
    }
    let mut r = Runner::new("run", &cfg.output_dir, config_hash(cfg), ctx)?;
    r.stage("config", |r| r.write("config.conf", cfg.to_canonical()))?;
    let data = data_stage(&mut r, cfg)?;
    let trained = train_stage(&mut r, cfg, &data)?;
    let report = diagnose_stage(&mut r, cfg, &data, &trained)?;
    ctx.result(&report_summary(&report));
    let mut failed_check = None;
    if cfg.limits.enabled {
        let outcome = limits_stage(&mut r, cfg)?;
        ctx.result(&outcome.line);
        if !outcome.pass {
            mark_check_failed(&mut r);
            failed_check = Some(outcome.line);
        }
    }
    let manifest = r.finish()?;
    match failed_check {
        Some(line) => Err(CliError::CheckFailed(line)),
        None => Ok(manifest),
    }
}

pub fn gen_data(cfg: &ExperimentConfig, ctx: &Context) -> Result<RunManifest, CliError> {
    cfg.validate_dataset()?;
    let mut r = Runner::new("gen-data", &cfg.output_dir, config_hash(cfg), ctx)?;
    r.stage("config", |r| r.write("config.conf", cfg.to_canonical()))?;
    data_stage(&mut r, cfg)?;
    r.finish()
}

pub fn verify_limits(cfg: &ExperimentConfig, ctx: &Context) -> Result<RunManifest, CliError> {
    cfg.validate_limits()?;
    let mut r = Runner::new("verify-limits", &cfg.output_dir, config_hash(cfg), ctx)?;
    r.stage("config", |r| r.write("config.conf", cfg.to_canonical()))?;
    let outcome = limits_stage(&mut r, cfg)?;
    ctx.result(&outcome.line);
    if !outcome.pass {
        mark_check_failed(&mut r);
    }
    let manifest = r.finish()?;
    if outcome.pass {
        Ok(manifest)
    } else {
        Err(CliError::CheckFailed(outcome.line))
    }
}

/// Diagnoses saved checkpoints matching `pattern`.
pub fn diagnose(
    pattern: &str,
    diagnostics: &DiagnosticsConfig,
    out_dir: &std::path::Path,
    ctx: &Context,
) -> Result<RunManifest, CliError> {
    let paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| CliError::Input(format!("bad checkpoint pattern `{pattern}`: {e}")))?
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Input(e.to_string()))?;
    if paths.is_empty() {
        return Err(CliError::Input(format!(
            "no checkpoint matches `{pattern}`"
        )));
    }
    let mut hasher_input = Vec::new();
    let mut ckpts = Vec::with_capacity(paths.len());
    for p in &paths {
        let bytes = fs::read(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
        let ckpt = Checkpoint::<f64>::from_bytes(&bytes)
            .or_else(|_| load_checkpoint::<f64>(p))
            .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
        hasher_input.extend_from_slice(&bytes);
        ckpts.push(ckpt);
    }
    let nets: Vec<ResNet> = ckpts.iter().map(|c| c.net.clone()).collect();
    let mut report = diagnose_networks(&nets, diagnostics, None).map_err(|e| match e {
        DiagnosticsError::MixedArchitectures(_) | DiagnosticsError::TooFewDepths { .. } => {
            CliError::Input(e.to_string())
        }
        other => CliError::stage("diagnose", other),
    })?;

    let mut r = Runner::new("diagnose", out_dir, sha256_hex(&hasher_input), ctx)?;
    r.stage("diagnose", |r| {
        report
            .provenance
            .insert("checkpoint_hash".into(), r.manifest.config_hash.clone());
        report
            .provenance
            .insert("checkpoints".into(), paths.len().to_string());
        write_report(r, &report)
    })?;
    ctx.result(&report_summary(&report));
    r.finish()
}
