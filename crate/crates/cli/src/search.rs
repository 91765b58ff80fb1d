use std::cell::Cell;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use evosnn_core::data::Dataset;
use evosnn_core::evolve::{run, PredictorKind, RunOptions, SearchOutcome, SearchState, SnnProblem, Strategy};
use evosnn_core::snn::checkpoint;
use evosnn_core::{Error, Predictor, SearchSpace};
use serde_json::json;

use crate::config::*;
use crate::error::{CliError, CliResult};

/// Splits a `--mode` value into a strategy and a search space.
pub fn parse_mode(mode: &str) -> CliResult<(Strategy, SearchSpace)> {
    if mode == "random" {
        return Ok((Strategy::Random, SearchSpace::Full));
    }
    let space = mode
        .parse()
        .map_err(|_| CliError::Usage(format!("unknown mode {mode:?}; expected full, FE, FI, FbI, LI, MI, CL-0 or random")))?;
    Ok((Strategy::Guided, space))
}

pub struct SearchRequest {
    pub config: RunConfig,
    pub mode: String,
    pub dataset: DatasetSource,
    pub out: PathBuf,
    pub stop_after: Option<usize>,
}

pub fn cmd_search(req: SearchRequest) -> CliResult<()> {
    let (_, space) = parse_mode(&req.mode)?;
    let mut config = req.config;
    config.search.space = space;
    config.search.check()?;
    config.evaluator.check()?;
    let data = req.dataset.load()?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        mode: req.mode,
        seed: config.search.seed,
        config,
        dataset: DatasetInfo::new(req.dataset, &data),
        started_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        outputs: Manifest::layout(),
    };
    fs::create_dir_all(req.out.join("checkpoint")).map_err(|e| Error::file(&req.out, e))?;
    write_atomic(&req.out.join(MANIFEST), &serde_json::to_string_pretty(&manifest)?)?;
    let _ = fs::remove_file(req.out.join(KNOWLEDGE));
    execute(&manifest, &data, &req.out, None, req.stop_after)
}

/// Continues the run stored in `dir` after its last finished iteration.
pub fn cmd_resume(dir: &Path, stop_after: Option<usize>) -> CliResult<()> {
    let manifest = Manifest::load(&dir.join(MANIFEST))?;
    let data = load_verified(&manifest)?;
    let state_path = dir.join(CHECKPOINT);
    let state = if state_path.exists() {
        let text = fs::read_to_string(&state_path).map_err(|e| Error::file(&state_path, e))?;
        Some(serde_json::from_str::<SearchState>(&text)?)
    } else {
        None
    };
    execute(&manifest, &data, dir, state, stop_after)
}

/// Repeats the run described by a manifest into `out`.
pub fn cmd_rerun(manifest_path: &Path, out: &Path) -> CliResult<()> {
    let mut manifest = Manifest::load(manifest_path)?;
    let data = load_verified(&manifest)?;
    manifest.started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    fs::create_dir_all(out.join("checkpoint")).map_err(|e| Error::file(out, e))?;
    write_atomic(&out.join(MANIFEST), &serde_json::to_string_pretty(&manifest)?)?;
    let _ = fs::remove_file(out.join(KNOWLEDGE));
    execute(&manifest, &data, out, None, None)
}

fn load_verified(manifest: &Manifest) -> CliResult<Dataset> {
    let data = manifest.dataset.source.load()?;
    let sha = fingerprint(&data);
    if sha != manifest.dataset.sha256 {
        return Err(Error::Schema(format!(
            "dataset {} has fingerprint {sha}, manifest recorded {}",
            manifest.dataset.source, manifest.dataset.sha256
        ))
        .into());
    }
    Ok(data)
}

fn execute(
    manifest: &Manifest,
    data: &Dataset,
    out: &Path,
    resume: Option<SearchState>,
    stop_after: Option<usize>,
) -> CliResult<()> {
    let (strategy, _) = parse_mode(&manifest.mode)?;
    let cfg = &manifest.config.search;
    let problem = SnnProblem {
        evaluator: manifest.config.evaluator.clone(),
        data,
    };
    fs::create_dir_all(out.join("checkpoint")).map_err(|e| Error::file(out, e))?;

    // The knowledge file mirrors the checkpointed records exactly.
    let knowledge = out.join(KNOWLEDGE);
    let mut written = 0usize;
    if let Some(s) = &resume {
        write_atomic(&knowledge, &records_jsonl(&s.records[..])?)?;
        written = s.records.len();
    }
    let stopped = Cell::new(None);
    let mut hook = |s: &SearchState| -> evosnn_core::Result<()> {
        append_records(&knowledge, &s.records[written..])?;
        written = s.records.len();
        write_reports(out, s)?;
        if s.strategy == Strategy::Guided && s.config.predictor == PredictorKind::Tree {
            let p = Predictor::fit(&s.records, s.config.tree)?;
            write_atomic(&out.join(PREDICTOR_JSON), &p.to_json()?)?;
        }
        write_atomic(&out.join(CHECKPOINT), &serde_json::to_string(s)?)?;
        eprintln!(
            "[{}] evaluated {} | iteration {}/{} | archive {} | hypervolume {:.6}",
            manifest.mode,
            s.records.len(),
            s.completed_iterations(),
            s.config.iters,
            s.archive.members.len(),
            s.archive.hypervolume().unwrap_or(0.0)
        );
        if stop_after.is_some_and(|n| s.initialized() && s.completed_iterations() >= n) {
            stopped.set(Some(s.completed_iterations()));
            return Err(Error::Config("stop requested".into()));
        }
        Ok(())
    };
    let mut opts = RunOptions::new(strategy);
    opts.final_training = true;
    opts.resume = resume;
    opts.on_checkpoint = Some(&mut hook);
    let outcome = match run(&problem, cfg, opts) {
        Ok(o) => o,
        Err(e) => {
            return Err(match stopped.get() {
                Some(n) => CliError::Stopped(n),
                None => e.into(),
            })
        }
    };
    write_final(out, manifest, &outcome)?;
    Ok(())
}

fn records_jsonl<T: serde::Serialize>(items: &[T]) -> evosnn_core::Result<String> {
    let mut s = String::new();
    for r in items {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

fn append_records<T: serde::Serialize>(path: &Path, items: &[T]) -> evosnn_core::Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::file(path, e))?;
    f.write_all(records_jsonl(items)?.as_bytes())
        .map_err(|e| Error::file(path, e))
}

pub fn write_atomic(path: &Path, contents: &str) -> evosnn_core::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| Error::file(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
}

fn csv_string(header: &[&str], rows: Vec<Vec<String>>) -> evosnn_core::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Schema(e.to_string());
    w.write_record(header).map_err(to_err)?;
    for r in rows {
        w.write_record(&r).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write_reports(out: &Path, s: &SearchState) -> evosnn_core::Result<()> {
    write_atomic(&out.join(ARCHIVE), &s.archive.to_jsonl()?)?;
    let mut front: Vec<(f64, f64)> = s.archive.members.iter().map(|m| (m.f1, m.f2)).collect();
    front.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let rows = front.iter().map(|p| vec![p.0.to_string(), p.1.to_string()]).collect();
    write_atomic(&out.join(PARETO), &csv_string(&["f1", "f2"], rows)?)?;
    let rows = s
        .iterations
        .iter()
        .map(|it| vec![it.iteration.to_string(), it.hypervolume.to_string()])
        .collect();
    write_atomic(&out.join(HYPERVOLUME), &csv_string(&["iteration", "volume"], rows)?)?;
    let rows = s
        .iterations
        .iter()
        .map(|it| {
            let (rho, defined) = match it.spearman {
                Some(sp) => (sp.rho.to_string(), sp.defined.to_string()),
                None => (String::new(), String::new()),
            };
            vec![
                it.iteration.to_string(),
                rho,
                defined,
                it.scored.to_string(),
                it.evaluated.to_string(),
                it.filled.to_string(),
            ]
        })
        .collect();
    write_atomic(
        &out.join(PREDICTOR),
        &csv_string(&["iteration", "spearman", "defined", "scored", "evaluated", "filled"], rows)?,
    )
}

fn write_final(out: &Path, manifest: &Manifest, outcome: &SearchOutcome) -> CliResult<()> {
    let Some(fin) = &outcome.final_training else {
        return Ok(());
    };
    write_atomic(&out.join(BEST_GENOME), &fin.record.genome.to_json())?;
    let s = &outcome.state;
    let summary = json!({
        "mode": manifest.mode,
        "seed": manifest.seed,
        "epochs": fin.record.epochs,
        "f1": fin.record.f1,
        "f2": fin.record.f2,
        "accuracy": fin.accuracy,
        "degenerate": fin.record.degenerate,
        "true_evaluations": s.true_evaluations(),
        "iterations": s.completed_iterations(),
        "hypervolume": s.archive.history.last().copied().unwrap_or(0.0),
        "archive_size": s.archive.members.len(),
    });
    write_atomic(&out.join(FINAL), &serde_json::to_string_pretty(&summary)?)?;
    if let Some(net) = &fin.network {
        checkpoint::save(net, &out.join(WEIGHTS_BIN), &out.join(WEIGHTS_JSON))?;
    }
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}
