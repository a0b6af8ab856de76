use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;
use voicepad::analysis::{fuse_scores, significance_matrix, FusionSpec, RunSummary, ThresholdRule};
use voicepad::distance::{fit_class_gaussian, pool_utterance_embedding, MdistModel};
use voicepad::frontend::{Frontend, FrontendConfig};
use voicepad::gmm::{em_fit, llr_score, EmOptions, GmmPair};
use voicepad::io::{
    format_scores, parse_protocol, read_features, read_scores, read_wav, write_features, FeatureMatrix, Key, ScoreSet,
    TrialEntry,
};
use voicepad::loss::gradcheck::run_suite;
use voicepad::metrics::{det_points, eer, min_tdcf, LabeledScores, TdcfCosts};
use voicepad::models::{read_model, write_model, ModelFile};

use crate::args::{
    Command, DetExportArgs, EvalArgs, ExtractArgs, FuseArgs, LossCheckArgs, ScoreArgs, SigtestArgs, TrainCommon,
    TrainGmmArgs, TrainMdistArgs,
};

pub fn run(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Extract(a) => extract(a),
        Command::TrainGmm(a) => train_gmm(a),
        Command::TrainMdist(a) => train_mdist(a),
        Command::ScoreGmm(a) => score_gmm(a),
        Command::ScoreMdist(a) => score_mdist(a),
        Command::Eval(a) => evaluate(a),
        Command::DetExport(a) => det_export(a),
        Command::Fuse(a) => fuse(a),
        Command::Sigtest(a) => sigtest(a),
        Command::LossCheck(a) => loss_check(a),
    }
}

/// Writes to `path`, or to standard output when absent.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Non-blank lines of a list file, trimmed.
fn list_lines(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn feature_path(dir: &Path, trial_id: &str) -> PathBuf {
    dir.join(format!("{trial_id}.padf"))
}

fn load_features(dir: &Path, trial_id: &str) -> Result<FeatureMatrix<f64>> {
    read_features(feature_path(dir, trial_id)).with_context(|| format!("trial {trial_id}"))
}

fn extract(a: &ExtractArgs) -> Result<()> {
    let mut cfg = FrontendConfig::<f64>::for_kind(a.frontend);
    if let Some(path) = &a.config {
        cfg = cfg
            .apply_kv(&read_text(path)?)
            .with_context(|| format!("config {}", path.display()))?;
    }
    cfg.validate()?;
    let inputs = list_lines(&a.list)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let results: Vec<(String, Result<()>)> = inputs
        .par_iter()
        .map(|line| {
            let wav = Path::new(line);
            let id = wav
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| line.clone());
            let outcome = (|| {
                let wave = read_wav::<f64>(wav)?;
                let feats = Frontend::new(a.frontend, cfg.clone(), wave.sample_rate_hz)?.extract(&wave)?;
                write_features(feature_path(&a.out, &id), &feats)?;
                Ok(())
            })();
            (line.clone(), outcome)
        })
        .collect();

    let failed: Vec<_> = results
        .iter()
        .filter_map(|(l, r)| r.as_ref().err().map(|e| (l, e)))
        .collect();
    for (line, e) in &failed {
        eprintln!("{line}: {e:#}");
    }
    if !failed.is_empty() {
        bail!("{} of {} inputs failed", failed.len(), inputs.len());
    }
    Ok(())
}

type ClassFeatures = Vec<FeatureMatrix<f64>>;

/// Protocol trials' features split by key; both classes must be non-empty.
fn load_training_set(c: &TrainCommon) -> Result<(ClassFeatures, ClassFeatures)> {
    let protocol = parse_protocol(&c.protocol)?;
    let loaded = protocol
        .par_iter()
        .map(|e| load_features(&c.features, &e.trial_id).map(|f| (e.key, f)))
        .collect::<Result<Vec<_>>>()?;
    let (mut bona, mut spoof) = (Vec::new(), Vec::new());
    for (key, f) in loaded {
        match key {
            Key::BonaFide => bona.push(f),
            Key::Spoof => spoof.push(f),
        }
    }
    for (name, set) in [("bonafide", &bona), ("spoof", &spoof)] {
        if set.is_empty() {
            bail!("protocol {} has no {name} trials", c.protocol.display());
        }
    }
    Ok((bona, spoof))
}

fn train_gmm(a: &TrainGmmArgs) -> Result<()> {
    let (bona, spoof) = load_training_set(&a.common)?;
    let opts = EmOptions {
        max_iters: a.max_iters,
        rel_tol: a.rel_tol,
        seed: a.seed,
        var_floor_factor: a.var_floor,
    };
    let fit = |set: &[FeatureMatrix<f64>], name: &str| -> Result<_> {
        let pooled = FeatureMatrix::concat(&set.iter().collect::<Vec<_>>())?;
        let gmm = em_fit(&pooled, a.components as usize, &opts).with_context(|| format!("{name} model"))?;
        Ok(gmm.with_label(name))
    };
    let pair = GmmPair::new(fit(&bona, "bonafide")?, fit(&spoof, "spoof")?)?;
    write_model(&a.common.out, &ModelFile::Gmm(pair))?;
    Ok(())
}

fn train_mdist(a: &TrainMdistArgs) -> Result<()> {
    let (bona, spoof) = load_training_set(&a.common)?;
    let fit = |set: &[FeatureMatrix<f64>], name: &str| -> Result<_> {
        let embeddings: Vec<_> = set.iter().map(|f| pool_utterance_embedding(f, a.pooling)).collect();
        let g = fit_class_gaussian(&embeddings, a.ridge).with_context(|| format!("{name} model"))?;
        Ok(g.with_label(name))
    };
    let model = MdistModel::new(fit(&bona, "bonafide")?, fit(&spoof, "spoof")?, a.pooling)?;
    write_model(&a.common.out, &ModelFile::Mdist(model))?;
    Ok(())
}

/// Trial id of a list line: the line itself, or the second column of a
/// five-column protocol line.
fn list_trial_id(line: &str) -> &str {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() == 5 {
        fields[1]
    } else {
        line
    }
}

/// Scores every listed trial in parallel, keeping list order.
fn score_trials(a: &ScoreArgs, score: impl Fn(&FeatureMatrix<f64>) -> Result<f64> + Sync) -> Result<()> {
    let ids: Vec<String> = list_lines(&a.list)?
        .iter()
        .map(|l| list_trial_id(l).to_string())
        .collect();
    let scored = ids
        .par_iter()
        .map(|id| {
            let feats = load_features(&a.features, id)?;
            score(&feats).with_context(|| format!("trial {id}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut set = ScoreSet::new();
    for (id, s) in ids.into_iter().zip(scored) {
        set.insert(id, s)?;
    }
    emit(Some(&a.out), &format_scores(&set))
}

fn score_gmm(a: &ScoreArgs) -> Result<()> {
    let pair = read_model::<f64>(&a.model)?.into_gmm()?;
    score_trials(a, |f| Ok(llr_score(&pair, f)?))
}

fn score_mdist(a: &ScoreArgs) -> Result<()> {
    let model = read_model::<f64>(&a.model)?.into_mdist()?;
    score_trials(a, |f| Ok(model.score(f)?))
}

fn labeled(scores: &Path, protocol: &[TrialEntry]) -> Result<LabeledScores<f64>> {
    let set = read_scores::<f64>(scores)?;
    LabeledScores::from_protocol(&set, protocol).with_context(|| format!("scores {}", scores.display()))
}

fn evaluate(a: &EvalArgs) -> Result<()> {
    let protocol = parse_protocol(&a.protocol)?;
    let set = labeled(&a.scores, &protocol)?;
    let e = eer(&set);
    let tdcf = a
        .tdcf_costs
        .map(|c| -> Result<_> { Ok(min_tdcf(&set, &TdcfCosts::new(c.0, c.1, c.2)?)) })
        .transpose()?;
    if let Some(path) = &a.det_out {
        emit(Some(path), &det_points(&set).to_csv())?;
    }
    let text = if a.json {
        let mut report = json!({
            "eer": e.eer,
            "threshold": e.threshold,
            "n_bonafide": set.bona().len(),
            "n_spoof": set.spoof().len(),
        });
        if let Some(t) = &tdcf {
            report["min_tdcf"] = json!(t.value);
            report["min_tdcf_threshold"] = json!(t.threshold);
        }
        format!("{report}\n")
    } else {
        let mut text = format!("EER = {:.2}%\nthreshold = {:?}\n", e.eer * 100.0, e.threshold);
        if let Some(t) = &tdcf {
            text.push_str(&format!("min t-DCF = {:?}\n", t.value));
        }
        text
    };
    emit(None, &text)
}

fn det_export(a: &DetExportArgs) -> Result<()> {
    let protocol = parse_protocol(&a.protocol)?;
    let set = labeled(&a.scores, &protocol)?;
    emit(a.out.as_deref(), &det_points(&set).to_csv())
}

fn fuse(a: &FuseArgs) -> Result<()> {
    let members = a
        .scores
        .iter()
        .map(|p| read_scores::<f64>(p).with_context(|| format!("scores {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&ScoreSet<f64>> = members.iter().collect();
    let spec = match &a.weights {
        Some(w) => FusionSpec::weighted(refs, w.0.clone()),
        None => FusionSpec::uniform(refs),
    };
    emit(a.out.as_deref(), &format_scores(&fuse_scores(&spec)?))
}

fn sigtest(a: &SigtestArgs) -> Result<()> {
    let protocol = parse_protocol(&a.protocol)?;
    let labels: Vec<String> = match &a.labels {
        Some(l) => l.clone(),
        None => a
            .scores
            .iter()
            .map(|p| {
                p.file_stem()
                    .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
            })
            .collect(),
    };
    let runs = a
        .scores
        .iter()
        .zip(labels)
        .map(|(path, label)| {
            let set = labeled(path, &protocol)?;
            Ok(RunSummary {
                label,
                eer: eer(&set).eer,
                n_bona: set.bona().len(),
                n_spoof: set.spoof().len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rule = if a.divide_critical {
        ThresholdRule::DivideCritical
    } else {
        ThresholdRule::AdjustLevel
    };
    let m = significance_matrix(&runs, a.alpha, a.correction, rule)?;
    emit(a.out.as_deref(), &m.significance_csv())?;
    if let Some(path) = &a.z_out {
        emit(Some(path), &m.z_csv())?;
    }
    Ok(())
}

fn loss_check(a: &LossCheckArgs) -> Result<()> {
    let reports = run_suite(a.cases, a.seed, a.step);
    let mut text = String::new();
    for r in &reports {
        let verdict = if r.passed(a.tol) { "ok" } else { "FAIL" };
        text.push_str(&format!(
            "{} cases={} max_rel_error={:e} {verdict}\n",
            r.name, r.cases, r.max_rel_error
        ));
    }
    emit(None, &text)?;
    let failed = reports.iter().filter(|r| !r.passed(a.tol)).count();
    if failed > 0 {
        return Err(anyhow!("{failed} loss configurations exceed tolerance {:e}", a.tol));
    }
    Ok(())
}
