use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use log::{info, warn};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::artifacts::{self as art, ManifestHeader, PairRecord, Paths, Splits};
use super::config::{ExperimentConfig, AUDITORY_BIN};
use super::tensor::TensorFile;
use crate::error::{Error, Result};
use crate::eval::{self, Distance, LayerScore, LayerScores, MetricsReport, VocabPoint};
use crate::learner::{self, checkpoint, gradcheck, EpochRecord, Example, Layer, LearnerState, Stage};
use crate::naming_stats::{target_counts, CategoryInventory, Condition};
use crate::rng;
use crate::world::{build_subset, generate_world, make_test_sets, TestSets};

const PERMUTATION_STAGE: &str = "spearman";
pub const GRADCHECK_THRESHOLD: f64 = 1e-4;

// ---- stats ----------------------------------------------------------------

/// Writes one target-count table per bin: `id,category,daily_rate,target`
/// and a closing totals row.
pub fn cmd_stats(cfg: &ExperimentConfig, paths: &Paths) -> Result<Vec<(String, u64)>> {
    let inv = cfg.inventory()?;
    let mut totals = Vec::new();
    for bin in &cfg.age_bins {
        let t = target_counts(&inv, bin.duration_days, bin.condition);
        let mut out = String::from("id,category,daily_rate,target\n");
        let mut rate_sum = 0.0;
        for (c, &n) in inv.categories().iter().zip(&t.per_category) {
            let rate = match bin.condition {
                Condition::Natural => c.daily_rate,
                Condition::Uniform => inv.uniform_rate(),
            };
            rate_sum += rate;
            writeln!(out, "{},{},{},{}", c.id, c.name, rate, n).expect("string write");
        }
        writeln!(out, "total,,{},{}", rate_sum, t.total()).expect("string write");
        art::write_file(&paths.stats(&bin.name), out)?;
        info!("{}: {} naming events over {} days ({})", bin.name, t.total(), bin.duration_days, bin.condition);
        totals.push((bin.name.clone(), t.total()));
    }
    Ok(totals)
}

// ---- generate ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinSummary {
    pub bin: String,
    pub pairs: usize,
    pub target: u64,
    pub achieved: u64,
    pub deficit: u64,
}

#[derive(Debug, Serialize)]
struct Lexicon<'a> {
    words: Vec<(&'a str, &'a [Vec<u16>])>,
    fillers: &'a [(String, Vec<u16>)],
}

/// Generates the world, candidate pool, splits, per-bin manifests and test
/// sets. Manifests are written even when a bin falls short of its targets;
/// the shortfall is then returned as `InsufficientPool`.
pub fn cmd_generate(cfg: &ExperimentConfig, paths: &Paths) -> Result<Vec<BinSummary>> {
    let inv = cfg.inventory()?;
    let world = generate_world(&cfg.world_config(), &inv)?;
    let pool = art::generate_pool(&world, cfg.pool.size, cfg.pool.uniform_mix, cfg.stage_seed("pool"));

    let mut ids: Vec<u64> = pool.iter().map(|p| p.pair_id).collect();
    ids.shuffle(&mut rng::stage_rng(cfg.seed, "split"));
    let n_val = ((cfg.pool.validation_fraction * pool.len() as f64).round() as usize).clamp(1, pool.len() - 1);
    let mut validation = ids[..n_val].to_vec();
    let mut auditory: Vec<u64> = ids[n_val..].iter().copied().take(cfg.pool.auditory_utterances).collect();
    validation.sort_unstable();
    auditory.sort_unstable();
    let held_out: HashSet<u64> = validation.iter().copied().collect();
    let eligible: Vec<_> = pool.iter().filter(|p| !held_out.contains(&p.pair_id)).cloned().collect();

    let (records, audio, visual) = art::pool_records(&pool, cfg.world.phone_dim, cfg.world.visual_dim)?;
    art::write_file(&paths.inventory(), inv.to_jsonl())?;
    let lexicon = Lexicon {
        words: inv
            .categories()
            .iter()
            .zip(&world.lexicon)
            .map(|(c, forms)| (c.name.as_str(), forms.as_slice()))
            .collect(),
        fillers: &world.fillers,
    };
    art::write_file(&paths.lexicon(), serde_json::to_string(&lexicon)? + "\n")?;
    art::write_jsonl(&paths.pool(), None::<&()>, &records)?;
    art::write_file(&paths.pool_audio(), audio.to_bytes()?)?;
    art::write_file(&paths.pool_visual(), visual.to_bytes()?)?;
    art::write_file(&paths.splits(), serde_json::to_string(&Splits { validation, auditory })? + "\n")?;

    let by_id: HashMap<u64, &PairRecord> = records.iter().map(|r| (r.pair_id, r)).collect();
    let mut order: Vec<usize> = (0..cfg.age_bins.len()).collect();
    if cfg.pool.nested {
        order.sort_by_key(|&i| std::cmp::Reverse(cfg.age_bins[i].duration_days));
    }
    let mut summaries = vec![None; cfg.age_bins.len()];
    let mut nest_pool: Option<Vec<_>> = None;
    let mut short = None;
    for i in order {
        let bin = &cfg.age_bins[i];
        let targets = target_counts(&inv, bin.duration_days, bin.condition);
        let source = nest_pool.as_deref().unwrap_or(&eligible);
        let manifest = build_subset(source, &targets, cfg.stage_seed(&format!("subset/{}", bin.name)), u64::MAX)?;
        if cfg.pool.nested && nest_pool.is_none() {
            let members: HashSet<u64> = manifest.pair_ids.iter().copied().collect();
            nest_pool = Some(eligible.iter().filter(|p| members.contains(&p.pair_id)).cloned().collect());
        }
        let rows: Vec<&PairRecord> = manifest.pair_ids.iter().map(|id| by_id[id]).collect();
        art::write_jsonl(
            &paths.manifest(&bin.name),
            Some(&ManifestHeader::from_manifest(&bin.name, &manifest)),
            &rows,
        )?;
        let s = BinSummary {
            bin: bin.name.clone(),
            pairs: manifest.pair_ids.len(),
            target: manifest.targets.iter().sum(),
            achieved: manifest.achieved.iter().sum(),
            deficit: manifest.deficit.iter().sum(),
        };
        info!("{}: {} pairs, achieved {}/{} (deficit {})", s.bin, s.pairs, s.achieved, s.target, s.deficit);
        let worst = manifest.deficit.iter().copied().max().unwrap_or(0);
        if worst > cfg.pool.deficit_tolerance && short.is_none() {
            short = Some(Error::InsufficientPool { deficits: manifest.deficit.clone(), worst });
        }
        summaries[i] = Some(s);
    }

    let tests = make_test_sets(&world, &cfg.eval.tests, pool.len() as u64, cfg.stage_seed("tests"))?;
    art::save_test_sets(paths, &tests, cfg.world.phone_dim, cfg.world.visual_dim)?;
    match short {
        Some(e) => Err(e),
        None => Ok(summaries.into_iter().map(|s| s.expect("every bin summarized")).collect()),
    }
}

// ---- train ------------------------------------------------------------------

struct PoolData {
    records: Vec<PairRecord>,
    audio: TensorFile,
    visual: TensorFile,
    splits: Splits,
}

impl PoolData {
    fn load(paths: &Paths) -> Result<Self> {
        let splits: Splits = serde_json::from_str(&art::read_text(&paths.splits())?)?;
        Ok(Self {
            records: art::read_pool(&paths.pool())?,
            audio: TensorFile::load(&paths.pool_audio())?,
            visual: TensorFile::load(&paths.pool_visual())?,
            splits,
        })
    }

    fn select(&self, ids: &[u64]) -> Vec<PairRecord> {
        let wanted: HashSet<u64> = ids.iter().copied().collect();
        self.records.iter().filter(|r| wanted.contains(&r.pair_id)).cloned().collect()
    }

    /// Held-out pairs with at least one co-occurrence, capped in id order.
    fn validation(&self, cap: usize, with_scenes: bool) -> Result<Vec<Example>> {
        let recs: Vec<PairRecord> =
            self.select(&self.splits.validation).into_iter().filter(PairRecord::has_cooccurrence).take(cap).collect();
        art::load_examples(&recs, &self.audio, &self.visual, with_scenes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub bin: String,
    pub examples: usize,
    pub best_epoch: usize,
    pub final_loss: Option<f64>,
    pub best_recall_at_10: Option<f64>,
}

fn trace_csv(trace: &[EpochRecord], stage: Stage) -> String {
    let av = stage == Stage::Audiovisual;
    let mut out = String::from("epoch,loss_aud_r,loss_aud_d,loss_aud");
    out.push_str(if av { ",loss_av,loss_total,val_loss_aud,val_recall_at_10\n" } else { ",val_loss_aud\n" });
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in trace {
        let l = &r.loss;
        write!(out, "{},{},{},{}", r.epoch, l.loss_aud_r, l.loss_aud_d, l.loss_aud).expect("string write");
        let val = r.validation.as_ref();
        if av {
            writeln!(
                out,
                ",{},{},{},{}",
                opt(l.loss_av),
                l.loss_total,
                opt(val.map(|v| v.loss_aud)),
                opt(val.and_then(|v| v.recall_at_10))
            )
            .expect("string write");
        } else {
            writeln!(out, ",{}", opt(val.map(|v| v.loss_aud))).expect("string write");
        }
    }
    out
}

fn initial_state(cfg: &ExperimentConfig) -> Result<LearnerState> {
    Ok(checkpoint::quantize(&LearnerState::new(cfg.model, cfg.stage_seed("init"))?))
}

fn train_auditory(cfg: &ExperimentConfig, paths: &Paths, data: &PoolData) -> Result<TrainSummary> {
    let train = art::load_examples(&data.select(&data.splits.auditory), &data.audio, &data.visual, false)?;
    let validation = data.validation(cfg.pool.validation_max, false)?;
    let init = initial_state(cfg)?;
    info!("{AUDITORY_BIN}: {} utterances", train.len());
    let out = learner::train_stage(&init, &train, &validation, &cfg.auditory_train_config(), Stage::AuditoryOnly)?;
    save_stage(paths, AUDITORY_BIN, &out, Stage::AuditoryOnly, train.len())
}

fn save_stage(
    paths: &Paths,
    bin: &str,
    out: &learner::TrainOutcome,
    stage: Stage,
    examples: usize,
) -> Result<TrainSummary> {
    art::write_file(&paths.checkpoint(bin, "best"), checkpoint::to_bytes(&out.best)?)?;
    art::write_file(&paths.checkpoint(bin, "final"), checkpoint::to_bytes(&out.last)?)?;
    art::write_file(&paths.trace(bin), trace_csv(&out.trace, stage))?;
    let best_recall_at_10 = out
        .trace
        .iter()
        .find(|r| r.epoch == out.best_epoch)
        .and_then(|r| r.validation.as_ref())
        .and_then(|v| v.recall_at_10);
    Ok(TrainSummary {
        bin: bin.to_string(),
        examples,
        best_epoch: out.best_epoch,
        final_loss: out.trace.last().map(|r| r.loss.loss_total),
        best_recall_at_10,
    })
}

fn train_bin(cfg: &ExperimentConfig, paths: &Paths, data: &PoolData, bin: &str) -> Result<TrainSummary> {
    cfg.bin(bin)?;
    let (_, rows) = art::read_manifest(&paths.manifest(bin))?;
    let train = art::load_examples(&rows, &data.audio, &data.visual, true)?;
    let validation = data.validation(cfg.pool.validation_max, true)?;
    let init = if cfg.train.require_auditory {
        checkpoint::load(&paths.checkpoint(AUDITORY_BIN, "best"), &cfg.model)?
    } else {
        initial_state(cfg)?
    };
    info!("{bin}: {} pairs, {} validation pairs", train.len(), validation.len());
    let out = learner::train_stage(&init, &train, &validation, &cfg.audiovisual_train_config(bin), Stage::Audiovisual)?;
    save_stage(paths, bin, &out, Stage::Audiovisual, train.len())
}

/// Trains `bin` (the auditory stage or an age bin), or everything in order
/// when `bin` is `None`.
pub fn cmd_train(cfg: &ExperimentConfig, paths: &Paths, bin: Option<&str>) -> Result<Vec<TrainSummary>> {
    let data = PoolData::load(paths)?;
    match bin {
        Some(AUDITORY_BIN) => Ok(vec![train_auditory(cfg, paths, &data)?]),
        Some(b) => Ok(vec![train_bin(cfg, paths, &data, b)?]),
        None => {
            let mut out = vec![train_auditory(cfg, paths, &data)?];
            for b in &cfg.age_bins {
                out.push(train_bin(cfg, paths, &data, &b.name)?);
            }
            Ok(out)
        }
    }
}

// ---- eval -------------------------------------------------------------------

/// Every metric for one learner state.
pub fn evaluate(
    state: &LearnerState,
    tests: &TestSets,
    inventory: &CategoryInventory,
    validation: &[Example],
    cfg: &ExperimentConfig,
    bin: &str,
) -> Result<MetricsReport> {
    let mut layers = Vec::with_capacity(Layer::ALL.len());
    for layer in Layer::ALL {
        let abx = eval::abx_error(&eval::probe_layers(state, &tests.abx, layer)?, Distance::Cosine)?;
        let lex = eval::lextest_score(&eval::probe_layers(state, &tests.lextest, layer)?)?;
        layers.push(LayerScores { layer, abx_error_pct: abx, lextest_pct: lex });
    }
    let abx_best = eval::best_layer(
        &layers.iter().map(|l| LayerScore { layer: l.layer, score: l.abx_error_pct }).collect::<Vec<_>>(),
        false,
    )
    .expect("layers evaluated");
    let lex_best = eval::best_layer(
        &layers.iter().map(|l| LayerScore { layer: l.layer, score: l.lextest_pct }).collect::<Vec<_>>(),
        true,
    )
    .expect("layers evaluated");

    let words = eval::probe_layers(state, &tests.semtest_words, Layer::Final)?;
    let objects = eval::probe_objects(state, &tests.semtest_objects)?;
    let sem = eval::semtest_score(&words, &objects, learner::nn::dot)?;
    if sem.per_category.len() != inventory.len() {
        return Err(Error::CategoryMismatch(format!(
            "test sets cover {} categories, inventory has {}",
            sem.per_category.len(),
            inventory.len()
        )));
    }

    let mut recall_at_k = BTreeMap::new();
    if validation.len() >= 2 {
        let (audio, scenes) = learner::embed_examples(state, validation)?;
        let s: Vec<Vec<f64>> = audio.iter().map(|a| scenes.iter().map(|v| learner::nn::dot(a, v)).collect()).collect();
        for &k in cfg.eval.recall_k.iter().filter(|&&k| k <= validation.len()) {
            recall_at_k.insert(k, eval::recall_at_k(&s, k)?.mean);
        }
    }

    let band = cfg.eval.chance_band(inventory.len());
    let vocab_sizes =
        [("above_chance", 50.0 + band), ("two_thirds", cfg.eval.two_thirds), ("four_fifths", cfg.eval.four_fifths)]
            .into_iter()
            .map(|(name, threshold)| VocabPoint {
                name: name.into(),
                threshold,
                count: eval::vocab_size(&sem.per_category, threshold),
            })
            .collect();

    let mut correlations = Vec::new();
    let seed = cfg.stage_seed(PERMUTATION_STAGE);
    for (variable, x) in [("daily_rate", inventory.daily_rates()), ("mean_area", inventory.mean_areas())] {
        match eval::spearman_with(&x, &sem.per_category, cfg.eval.permutations, seed) {
            Ok(r) => correlations.push(eval::Correlation { variable: variable.into(), rho: r.rho, p: r.p }),
            Err(Error::DegenerateInput(why)) => warn!("{bin}: no {variable} correlation ({why})"),
            Err(e) => return Err(e),
        }
    }

    let report = MetricsReport {
        bin: bin.to_string(),
        abx_error_pct: abx_best.score,
        abx_layer: abx_best.layer,
        lextest_pct: lex_best.score,
        lextest_layer: lex_best.layer,
        layers,
        semtest_mean_pct: sem.mean,
        semtest_per_category: sem.per_category,
        recall_pairs: if recall_at_k.is_empty() { 0 } else { validation.len() },
        recall_at_k,
        vocab_sizes,
        correlations,
    };
    report.validate()?;
    Ok(report)
}

fn eval_one(
    cfg: &ExperimentConfig,
    paths: &Paths,
    bin: &str,
    tests: &TestSets,
    inv: &CategoryInventory,
    validation: &[Example],
) -> Result<MetricsReport> {
    let state = checkpoint::load(&paths.checkpoint(bin, "best"), &cfg.model)?;
    let report = evaluate(&state, tests, inv, validation, cfg, bin)?;
    art::write_file(&paths.report(bin), report.to_json()?)?;
    art::write_file(&paths.category_table(bin), report.category_csv(inv)?)?;
    info!(
        "{bin}: semtest {:.2}% lextest {:.2}% abx {:.2}%",
        report.semtest_mean_pct, report.lextest_pct, report.abx_error_pct
    );
    Ok(report)
}

/// Evaluates the best checkpoint of `bin`, or of the auditory stage and
/// every age bin when `bin` is `None`.
pub fn cmd_eval(cfg: &ExperimentConfig, paths: &Paths, bin: Option<&str>) -> Result<Vec<MetricsReport>> {
    let inv = art::saved_inventory(paths)?;
    let tests = art::load_test_sets(paths)?;
    let data = PoolData::load(paths)?;
    let validation = data.validation(cfg.pool.validation_max, true)?;
    let bins: Vec<&str> = match bin {
        Some(b) => {
            if b != AUDITORY_BIN {
                cfg.bin(b)?;
            }
            vec![b]
        }
        None => std::iter::once(AUDITORY_BIN).chain(cfg.age_bins.iter().map(|b| b.name.as_str())).collect(),
    };
    bins.into_iter().map(|b| eval_one(cfg, paths, b, &tests, &inv, &validation)).collect()
}

// ---- curves -----------------------------------------------------------------

/// Vocabulary counts per bin (one column per threshold) and a long table of
/// score trajectories, from whichever reports exist.
pub fn cmd_curves(cfg: &ExperimentConfig, paths: &Paths) -> Result<(String, String)> {
    let mut bins: Vec<(String, u32)> = vec![(AUDITORY_BIN.to_string(), 0)];
    bins.extend(cfg.age_bins.iter().map(|b| (b.name.clone(), b.duration_days)));
    let mut reports = Vec::new();
    for (name, days) in bins {
        let path = paths.report(&name);
        if path.exists() {
            reports.push((name, days, MetricsReport::load(&path)?));
        }
    }
    if reports.is_empty() {
        return Err(Error::MissingArtifact(paths.report(&cfg.age_bins[0].name)));
    }
    let mut vocab = String::from("bin,days,above_chance,two_thirds,four_fifths\n");
    let mut scores = String::from("bin,days,metric,value\n");
    for (name, days, r) in &reports {
        let v = |n: &str| r.vocab(n).map_or(String::new(), |c| c.to_string());
        writeln!(vocab, "{name},{days},{},{},{}", v("above_chance"), v("two_thirds"), v("four_fifths"))
            .expect("string write");
        for (metric, value) in [
            ("semtest_mean_pct", r.semtest_mean_pct),
            ("lextest_pct", r.lextest_pct),
            ("abx_error_pct", r.abx_error_pct),
        ] {
            writeln!(scores, "{name},{days},{metric},{value}").expect("string write");
        }
        for (k, value) in &r.recall_at_k {
            writeln!(scores, "{name},{days},recall_at_{k},{value}").expect("string write");
        }
    }
    art::write_file(&paths.vocab_curves(), &vocab)?;
    art::write_file(&paths.score_curves(), &scores)?;
    Ok((vocab, scores))
}

// ---- gradcheck ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub max_relative_error: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// Finite-difference check of the hand-written gradients on a tiny model.
pub fn cmd_gradcheck(cfg: &ExperimentConfig, paths: &Paths) -> Result<GradcheckReport> {
    let err = gradcheck::tiny_gradient_check(cfg.stage_seed("gradcheck"), 1e-5, 1.0)?;
    let report =
        GradcheckReport { max_relative_error: err, threshold: GRADCHECK_THRESHOLD, passed: err < GRADCHECK_THRESHOLD };
    art::write_file(&paths.gradcheck(), serde_json::to_string_pretty(&report)? + "\n")?;
    if !report.passed {
        return Err(Error::GradientCheck(err));
    }
    Ok(report)
}

// ---- everything ----------------------------------------------------------------

/// stats, generate, train, eval and curves in one go.
pub fn run_all(cfg: &ExperimentConfig, paths: &Paths) -> Result<Vec<MetricsReport>> {
    cmd_stats(cfg, paths)?;
    cmd_generate(cfg, paths)?;
    cmd_train(cfg, paths, None)?;
    let reports = cmd_eval(cfg, paths, None)?;
    cmd_curves(cfg, paths)?;
    Ok(reports)
}
