//! The replication stages over in-memory rows: measuring a corpus, the
//! uniform, optimized and preferential-attachment baselines, and the
//! comparisons between them.
//!
//! Each stage draws randomness only from streams derived with
//! [`crate::seed::stream`], and per-language work is merged in language
//! order, so results do not depend on thread scheduling.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use crate::conllu::{self, CorpusFilter, IngestStats, Manifest, PunctPolicy};
use crate::error::{Error, Result};
use crate::io::{MeasureRow, TreeRow};
use crate::measures::{normalize, CostPair, EntropyExtremaTable};
use crate::optimizer::{self, OptimizerConfig, Population, Trajectory};
use crate::samplers;
use crate::seed::{derive_seed, stream};
use crate::stats::{self, ComparisonReport, PairedT};
use crate::tree::DirectedTree;

/// Sentence size at and above which the second classifier variant is trained.
pub const LONG_SENTENCE: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub manifest: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub rho: f64,
    pub sigma: f64,
    pub epochs: usize,
    pub population: usize,
    pub record_every: usize,
    pub reps: usize,
    pub alpha_override: Option<f64>,
    pub alpha_grid: Vec<f64>,
    pub min_len: usize,
    pub max_len: usize,
    pub cap: usize,
    pub min_sentences: usize,
    pub punct_policy: PunctPolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            manifest: None,
            output_dir: PathBuf::from("out"),
            rho: 0.9,
            sigma: 0.075,
            epochs: 400,
            population: 100,
            record_every: 1,
            reps: 100,
            alpha_override: None,
            alpha_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5],
            min_len: 4,
            max_len: 50,
            cap: 1000,
            min_sentences: 50,
            punct_policy: PunctPolicy::Reattach,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value for {key}: {value:?}")))
}

impl RunConfig {
    pub const KEYS: [&'static str; 16] = [
        "seed",
        "manifest",
        "output_dir",
        "rho",
        "sigma",
        "epochs",
        "population",
        "record_every",
        "reps",
        "alpha_override",
        "alpha_grid",
        "min_len",
        "max_len",
        "cap",
        "min_sentences",
        "punct_policy",
    ];

    /// Sets one field from its textual form. `alpha_override` accepts `none`;
    /// `alpha_grid` is a comma-separated list.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "manifest" => self.manifest = Some(PathBuf::from(value)),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "rho" => self.rho = parse_value(key, value)?,
            "sigma" => self.sigma = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "population" => self.population = parse_value(key, value)?,
            "record_every" => self.record_every = parse_value(key, value)?,
            "reps" => self.reps = parse_value(key, value)?,
            "alpha_override" => {
                self.alpha_override = match value {
                    "" | "none" => None,
                    v => Some(parse_value(key, v)?),
                }
            }
            "alpha_grid" => {
                self.alpha_grid = value.split(',').map(|v| parse_value(key, v.trim())).collect::<Result<_>>()?
            }
            "min_len" => self.min_len = parse_value(key, value)?,
            "max_len" => self.max_len = parse_value(key, value)?,
            "cap" => self.cap = parse_value(key, value)?,
            "min_sentences" => self.min_sentences = parse_value(key, value)?,
            "punct_policy" => self.punct_policy = value.parse()?,
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, message: "expected key=value".into() })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer().validate()?;
        if self.min_len < 4 {
            return Err(Error::Config("min_len must be at least 4".into()));
        }
        if self.max_len < self.min_len {
            return Err(Error::Config("max_len must not be below min_len".into()));
        }
        if self.population == 0 || self.cap == 0 || self.reps == 0 {
            return Err(Error::Config("population, cap and reps must be positive".into()));
        }
        if let Some(a) = self.alpha_override {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("alpha_override must be finite and >= 0, got {a}")));
            }
        }
        if self.alpha_grid.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::Config("alpha_grid values must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig { rho: self.rho, sigma: self.sigma, epochs: self.epochs, record_every: self.record_every }
    }

    pub fn filter(&self) -> CorpusFilter {
        CorpusFilter { min_len: self.min_len, max_len: self.max_len, min_sentences: self.min_sentences, cap: self.cap }
    }
}

/// A language dropped from one stage; the others carry on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub language: String,
    pub stage: String,
    pub message: String,
}

impl Failure {
    fn new(language: &str, stage: &str, message: impl ToString) -> Self {
        Self { language: language.into(), stage: stage.into(), message: message.to_string() }
    }
}

/// Measures one tree and tags it with its language and sentence.
pub fn measure_row(
    language: &str,
    sentence_index: usize,
    tree: &DirectedTree,
    table: &EntropyExtremaTable,
) -> Result<MeasureRow> {
    let n = tree.n();
    let cost = CostPair::of(tree)?;
    let norm = normalize(cost, n, table)?;
    Ok(MeasureRow {
        language: language.into(),
        sentence_index,
        n,
        h_ks: cost.h_ks,
        h_deg: cost.h_deg,
        norm_h_ks: norm.h_ks,
        norm_h_deg: norm.h_deg,
        alpha_hat: samplers::estimate_alpha(tree)?.alpha_hat,
    })
}

fn measure_all(
    language: &str,
    trees: &[(usize, DirectedTree)],
    table: &EntropyExtremaTable,
) -> Result<Vec<MeasureRow>> {
    trees.iter().map(|(i, t)| measure_row(language, *i, t, table)).collect()
}

fn tree_rows(language: &str, trees: Vec<(usize, DirectedTree)>) -> Vec<TreeRow> {
    trees
        .into_iter()
        .map(|(sentence_index, tree)| TreeRow { language: language.into(), sentence_index, tree })
        .collect()
}

/// Splits rows by language, keeping their order within each language.
pub fn by_language<T, F>(rows: &[T], language: F) -> BTreeMap<String, Vec<&T>>
where
    F: Fn(&T) -> &str,
{
    let mut map: BTreeMap<String, Vec<&T>> = BTreeMap::new();
    for row in rows {
        map.entry(language(row).to_string()).or_default().push(row);
    }
    map
}

#[derive(Clone, Debug, Default)]
pub struct StageOutput {
    pub rows: Vec<MeasureRow>,
    pub trees: Vec<TreeRow>,
    pub failures: Vec<Failure>,
}

type LanguageResult = std::result::Result<(Vec<MeasureRow>, Vec<TreeRow>), Failure>;

impl StageOutput {
    fn merge(results: Vec<(String, LanguageResult)>) -> Self {
        let mut out = StageOutput::default();
        for (_, result) in results {
            match result {
                Ok((rows, trees)) => {
                    out.rows.extend(rows);
                    out.trees.extend(trees);
                }
                Err(f) => out.failures.push(f),
            }
        }
        out
    }
}

#[derive(Clone, Debug, Default)]
pub struct CorpusOutput {
    pub stage: StageOutput,
    pub ingest: BTreeMap<String, IngestStats>,
}

/// Reads, cleans, filters and samples each language of the manifest, then
/// measures the sampled trees.
pub fn measure_corpus(manifest: &Manifest, config: &RunConfig, table: &EntropyExtremaTable) -> Result<CorpusOutput> {
    config.validate()?;
    let filter = config.filter();
    let languages: Vec<(&String, &Vec<PathBuf>)> = manifest.languages.iter().collect();
    let results: Vec<_> = languages
        .par_iter()
        .map(|(language, paths)| {
            let language = language.as_str();
            let run = || -> std::result::Result<_, Failure> {
                let fail = |e: &dyn ToString| Failure::new(language, "measure", e.to_string());
                let (trees, stats) =
                    conllu::load_language(language, paths, config.punct_policy).map_err(|e| fail(&e))?;
                let seed = derive_seed(config.seed, "sample", language, 0);
                let sample = conllu::filter_and_sample(language, trees, seed, &filter).map_err(|e| fail(&e))?;
                let trees: Vec<(usize, DirectedTree)> =
                    sample.sentences.into_iter().map(|s| (s.source_index, s.tree)).collect();
                let rows = measure_all(language, &trees, table).map_err(|e| fail(&e))?;
                Ok((stats, (rows, tree_rows(language, trees))))
            };
            (language.to_string(), run())
        })
        .collect();

    let mut ingest = BTreeMap::new();
    let mut merged = Vec::with_capacity(results.len());
    for (language, result) in results {
        merged.push((
            language.clone(),
            result.map(|(stats, out)| {
                ingest.insert(language, stats);
                out
            }),
        ));
    }
    Ok(CorpusOutput { stage: StageOutput::merge(merged), ingest })
}

/// One uniformly random tree per input row, with the same number of vertices.
pub fn uniform_baseline(real: &[MeasureRow], config: &RunConfig, table: &EntropyExtremaTable) -> Result<StageOutput> {
    let groups = by_language(real, |r| &r.language);
    let results: Vec<_> = groups
        .par_iter()
        .map(|(language, rows)| {
            let run = || -> Result<_> {
                let trees = rows
                    .iter()
                    .map(|r| {
                        let mut rng = stream(config.seed, "uniform", language, r.sentence_index as u64);
                        Ok((r.sentence_index, samplers::sample_uniform_directed_tree(r.n, &mut rng)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((measure_all(language, &trees, table)?, tree_rows(language, trees)))
            };
            (language.clone(), run().map_err(|e| Failure::new(language, "baseline", e)))
        })
        .collect();
    Ok(StageOutput::merge(results))
}

#[derive(Clone, Debug, Default)]
pub struct OptimizeOutput {
    pub stage: StageOutput,
    pub trajectories: BTreeMap<String, Trajectory>,
}

/// Evolves a sample of each language's uniform trees with the noisy
/// hill climber. At most `config.population` trees are taken per language.
pub fn optimize(baseline: &[TreeRow], config: &RunConfig, table: &EntropyExtremaTable) -> Result<OptimizeOutput> {
    let optimizer_config = config.optimizer();
    optimizer_config.validate()?;
    let groups = by_language(baseline, |r| &r.language);
    let results: Vec<_> = groups
        .iter()
        .map(|(language, rows)| {
            let run = || -> Result<_> {
                let mut pick = stream(config.seed, "optimize-sample", language, 0);
                let take = rows.len().min(config.population);
                let mut chosen = index::sample(&mut pick, rows.len(), take).into_vec();
                chosen.sort_unstable();
                let seeds: Vec<&TreeRow> = chosen.iter().map(|&i| rows[i]).collect();
                let population = Population::from_trees(seeds.iter().map(|r| &r.tree))?;
                let mut rng = stream(config.seed, "optimize", language, 0);
                let (last, trajectory) = optimizer::run(population, &optimizer_config, table, &mut rng)?;
                let trees: Vec<(usize, DirectedTree)> =
                    seeds.iter().zip(&last.members).map(|(r, m)| (r.sentence_index, m.tree())).collect();
                Ok((measure_all(language, &trees, table)?, tree_rows(language, trees), trajectory))
            };
            (language.clone(), run().map_err(|e| Failure::new(language, "optimize", e)))
        })
        .collect();

    let mut trajectories = BTreeMap::new();
    let mut merged = Vec::with_capacity(results.len());
    for (language, result) in results {
        merged.push((
            language.clone(),
            result.map(|(rows, trees, trajectory)| {
                trajectories.insert(language, trajectory);
                (rows, trees)
            }),
        ));
    }
    Ok(OptimizeOutput { stage: StageOutput::merge(merged), trajectories })
}

/// Mean estimated exponent per language.
pub fn language_alphas(rows: &[MeasureRow]) -> BTreeMap<String, f64> {
    by_language(rows, |r| &r.language)
        .into_iter()
        .map(|(language, rows)| {
            let mean = rows.iter().map(|r| r.alpha_hat).sum::<f64>() / rows.len() as f64;
            (language, mean)
        })
        .collect()
}

/// Exponent used for each language: the override if set, else the mean
/// estimate from the real rows.
pub fn pa_alphas(real: &[MeasureRow], config: &RunConfig) -> BTreeMap<String, f64> {
    let mut alphas = language_alphas(real);
    if let Some(a) = config.alpha_override {
        alphas.values_mut().for_each(|v| *v = a);
    }
    alphas
}

fn pa_trees(
    real: &[MeasureRow],
    alphas: &BTreeMap<String, f64>,
    stage: &str,
    config: &RunConfig,
    table: &EntropyExtremaTable,
) -> StageOutput {
    let groups = by_language(real, |r| &r.language);
    let results: Vec<_> = groups
        .par_iter()
        .map(|(language, rows)| {
            let run = || -> Result<_> {
                let alpha =
                    *alphas.get(language).ok_or_else(|| Error::Config(format!("no exponent for {language}")))?;
                let trees = rows
                    .iter()
                    .map(|r| {
                        let mut rng = stream(config.seed, stage, language, r.sentence_index as u64);
                        Ok((r.sentence_index, samplers::sample_pa_tree(r.n, alpha, &mut rng)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((measure_all(language, &trees, table)?, tree_rows(language, trees)))
            };
            (language.clone(), run().map_err(|e| Failure::new(language, stage, e)))
        })
        .collect();
    StageOutput::merge(results)
}

/// One preferential-attachment tree per input row, size-matched.
pub fn pa_baseline(real: &[MeasureRow], config: &RunConfig, table: &EntropyExtremaTable) -> Result<StageOutput> {
    config.validate()?;
    Ok(pa_trees(real, &pa_alphas(real, config), "pa", config, table))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub language: String,
    /// `estimated` for the per-language mean exponent, `grid` otherwise.
    pub mode: String,
    pub alpha: f64,
    pub kld: f64,
    pub zero_baseline: f64,
}

impl SweepRow {
    pub const HEADER: [&'static str; 5] = ["language", "mode", "alpha", "kld", "zero_baseline"];

    pub fn record(&self) -> Vec<String> {
        vec![
            self.language.clone(),
            self.mode.clone(),
            crate::io::fmt_sig(self.alpha),
            crate::io::fmt_sig(self.kld),
            crate::io::fmt_sig(self.zero_baseline),
        ]
    }
}

/// Divergence of a synthetic sample from the real one, after matching sizes,
/// together with the bootstrap zero baseline of the matched real sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Divergence {
    pub kld: f64,
    pub zero_baseline: f64,
    pub n_compared: usize,
}

pub fn divergence(
    real: &[CostPair],
    synthetic: &[CostPair],
    reps: usize,
    global_seed: u64,
    stage: &str,
    language: &str,
) -> Result<Divergence> {
    let mut rng = stream(global_seed, stage, language, 0);
    let (real, synthetic) = stats::match_sizes(real, synthetic, &mut rng)?;
    let kld = stats::kld_gaussian(&stats::fit_gaussian(&real)?, &stats::fit_gaussian(&synthetic)?)?;
    let zero_baseline = stats::bootstrap_zero(&real, &mut rng, reps)?;
    Ok(Divergence { kld, zero_baseline, n_compared: real.len() })
}

fn costs(rows: &[&MeasureRow]) -> Vec<CostPair> {
    rows.iter().map(|r| r.cost()).collect()
}

/// KLD of the real sample against preferential-attachment trees at each
/// grid exponent and at the language's mean estimate.
pub fn pa_sweep(
    real: &[MeasureRow],
    config: &RunConfig,
    table: &EntropyExtremaTable,
) -> Result<(Vec<SweepRow>, Vec<Failure>)> {
    config.validate()?;
    let estimated = language_alphas(real);
    let real_groups = by_language(real, |r| &r.language);
    let mut settings: Vec<(String, f64)> = vec![("estimated".into(), f64::NAN)];
    settings.extend(config.alpha_grid.iter().map(|&a| ("grid".to_string(), a)));

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (k, (mode, alpha)) in settings.iter().enumerate() {
        let alphas: BTreeMap<String, f64> = if mode == "estimated" {
            estimated.clone()
        } else {
            estimated.keys().map(|l| (l.clone(), *alpha)).collect()
        };
        let stage = format!("pa-sweep-{k}");
        let synthetic = pa_trees(real, &alphas, &stage, config, table);
        failures.extend(synthetic.failures);
        let synth_groups = by_language(&synthetic.rows, |r| &r.language);
        for (language, real_rows) in &real_groups {
            let Some(synth_rows) = synth_groups.get(language) else { continue };
            match divergence(&costs(real_rows), &costs(synth_rows), config.reps, config.seed, &stage, language) {
                Ok(d) => rows.push(SweepRow {
                    language: language.clone(),
                    mode: mode.clone(),
                    alpha: alphas[language],
                    kld: d.kld,
                    zero_baseline: d.zero_baseline,
                }),
                Err(e) => failures.push(Failure::new(language, &stage, e)),
            }
        }
    }
    rows.sort_by(|a, b| {
        (&a.language, a.mode != "estimated", a.alpha)
            .partial_cmp(&(&b.language, b.mode != "estimated", b.alpha))
            .expect("finite")
    });
    Ok((rows, failures))
}

/// Pooled real-versus-synthetic classifier accuracy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassifierResult {
    pub condition: String,
    /// `all` or `n>=10`.
    pub subset: String,
    pub accuracy: f64,
    pub train_size: usize,
    pub test_size: usize,
}

/// Paired t statistic over languages of the per-language means.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairedResult {
    pub condition: String,
    pub measure: String,
    pub t: f64,
    pub df: usize,
    pub mean_real: f64,
    pub mean_synthetic: f64,
}

#[derive(Clone, Debug, Default)]
pub struct CompareOutput {
    pub reports: Vec<ComparisonReport>,
    pub classifiers: Vec<ClassifierResult>,
    pub paired: Vec<PairedResult>,
    pub failures: Vec<Failure>,
}

fn mean_of<T>(rows: &[T], f: impl Fn(&T) -> f64) -> f64 {
    rows.iter().map(f).sum::<f64>() / rows.len() as f64
}

fn labelled(real: &[MeasureRow], synthetic: &[MeasureRow], min_n: usize) -> (Vec<[f64; 2]>, Vec<bool>) {
    real.iter()
        .map(|r| (r, true))
        .chain(synthetic.iter().map(|r| (r, false)))
        .filter(|(r, _)| r.n >= min_n)
        .map(|(r, label)| (r.normalized(), label))
        .unzip()
}

fn classify(
    real: &[MeasureRow],
    synthetic: &[MeasureRow],
    min_n: usize,
    seed: u64,
    stage: &str,
    language: &str,
) -> Result<stats::HoldoutFit> {
    let (x, y) = labelled(real, synthetic, min_n);
    stats::train_logistic(&x, &y, &mut stream(seed, stage, language, min_n as u64))
}

/// Compares the real rows with each named synthetic condition: per-language
/// divergences and classifiers, pooled classifiers, and paired t statistics
/// over the per-language means of `H_ks` and `H_deg`.
pub fn compare(
    real: &[MeasureRow],
    conditions: &[(String, Vec<MeasureRow>)],
    config: &RunConfig,
) -> Result<CompareOutput> {
    if config.reps == 0 {
        return Err(Error::Config("reps must be positive".into()));
    }
    let mut out = CompareOutput::default();
    let real_groups = by_language(real, |r| &r.language);

    for (condition, synthetic) in conditions {
        let stage = format!("compare-{condition}");
        let synth_groups = by_language(synthetic, |r| &r.language);
        let per_language: Vec<_> = real_groups
            .par_iter()
            .filter_map(|(language, real_rows)| {
                let synth_rows = synth_groups.get(language)?;
                let run = || -> Result<ComparisonReport> {
                    let d =
                        divergence(&costs(real_rows), &costs(synth_rows), config.reps, config.seed, &stage, language)?;
                    let r: Vec<MeasureRow> = real_rows.iter().map(|&r| r.clone()).collect();
                    let s: Vec<MeasureRow> = synth_rows.iter().map(|&r| r.clone()).collect();
                    let accuracy =
                        |min_n| classify(&r, &s, min_n, config.seed, &stage, language).ok().map(|f| f.accuracy);
                    Ok(ComparisonReport {
                        language: language.clone(),
                        condition: condition.clone(),
                        n_real: r.len(),
                        n_synthetic: s.len(),
                        n_compared: d.n_compared,
                        kld_vs_real: d.kld,
                        zero_baseline: d.zero_baseline,
                        accuracy_all: accuracy(0),
                        accuracy_min10: accuracy(LONG_SENTENCE),
                        mean_real: [mean_of(&r, |x| x.norm_h_ks), mean_of(&r, |x| x.norm_h_deg)],
                        mean_synthetic: [mean_of(&s, |x| x.norm_h_ks), mean_of(&s, |x| x.norm_h_deg)],
                        alpha_real: mean_of(&r, |x| x.alpha_hat),
                        alpha_synthetic: mean_of(&s, |x| x.alpha_hat),
                    })
                };
                Some(run().map_err(|e| Failure::new(language, &stage, e)))
            })
            .collect();
        let mut reports = Vec::new();
        for result in per_language {
            match result {
                Ok(r) => reports.push(r),
                Err(f) => out.failures.push(f),
            }
        }

        for (subset, min_n) in [("all", 0), ("n>=10", LONG_SENTENCE)] {
            match classify(real, synthetic, min_n, config.seed, &stage, "*") {
                Ok(fit) => out.classifiers.push(ClassifierResult {
                    condition: condition.clone(),
                    subset: subset.into(),
                    accuracy: fit.accuracy,
                    train_size: fit.train_size,
                    test_size: fit.test_size,
                }),
                Err(e) => out.failures.push(Failure::new("*", &stage, format!("{subset} classifier: {e}"))),
            }
        }

        if reports.len() >= 2 {
            for (k, measure) in ["H_ks", "H_deg"].into_iter().enumerate() {
                let a: Vec<f64> = reports.iter().map(|r| r.mean_real[k]).collect();
                let b: Vec<f64> = reports.iter().map(|r| r.mean_synthetic[k]).collect();
                match stats::paired_t(&a, &b) {
                    Ok(PairedT { t, df }) => out.paired.push(PairedResult {
                        condition: condition.clone(),
                        measure: measure.into(),
                        t,
                        df,
                        mean_real: mean_of(&a, |x| *x),
                        mean_synthetic: mean_of(&b, |x| *x),
                    }),
                    Err(e) => out.failures.push(Failure::new("*", &stage, format!("paired t on {measure}: {e}"))),
                }
            }
        }
        out.reports.extend(reports);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::tests::table50;
    use crate::samplers::sample_uniform_directed_tree;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fake_real(languages: &[&str], per_language: usize, seed: u64) -> Vec<MeasureRow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for language in languages {
            for i in 0..per_language {
                let n = rng.random_range(4..=30);
                let tree = samplers::sample_pa_tree(n, 0.45, &mut rng).unwrap();
                rows.push(measure_row(language, i * 3, &tree, table50()).unwrap());
            }
        }
        rows
    }

    fn small_config() -> RunConfig {
        RunConfig { epochs: 20, population: 10, reps: 10, alpha_grid: vec![0.25, 0.75], ..RunConfig::default() }
    }

    #[test]
    fn config_defaults_and_overrides() {
        let mut c = RunConfig::default();
        assert_eq!((c.rho, c.sigma, c.epochs, c.population), (0.9, 0.075, 400, 100));
        assert_eq!((c.min_len, c.max_len, c.cap, c.min_sentences), (4, 50, 1000, 50));
        c.apply_file("# comment\nseed = 42\nalpha_override=0.5\n\nalpha_grid = 0.1, 0.2\npunct_policy=discard\n")
            .unwrap();
        assert_eq!(c.seed, 42);
        assert_eq!(c.alpha_override, Some(0.5));
        assert_eq!(c.alpha_grid, vec![0.1, 0.2]);
        assert_eq!(c.punct_policy, PunctPolicy::Discard);
        c.set("alpha_override", "none").unwrap();
        assert_eq!(c.alpha_override, None);
        assert!(c.set("colour", "red").is_err());
        assert!(c.set("epochs", "-3").is_err());
        assert!(c.apply_file("seed 42").is_err());
        c.min_len = 3;
        assert!(c.validate().is_err());
    }

    #[test]
    fn uniform_baseline_matches_sizes_and_is_deterministic() {
        let real = fake_real(&["aa", "bb"], 40, 1);
        let config = small_config();
        let a = uniform_baseline(&real, &config, table50()).unwrap();
        assert!(a.failures.is_empty());
        assert_eq!(a.rows.len(), real.len());
        for (r, u) in real.iter().zip(&a.rows) {
            assert_eq!((&r.language, r.sentence_index, r.n), (&u.language, u.sentence_index, u.n));
            assert!((0.0..=1.0).contains(&u.norm_h_ks) && (0.0..=1.0).contains(&u.norm_h_deg), "{u:?}");
        }
        let b = uniform_baseline(&real, &config, table50()).unwrap();
        assert_eq!(a.rows, b.rows);
        let other = uniform_baseline(&real, &RunConfig { seed: 2, ..config }, table50()).unwrap();
        assert_ne!(a.rows, other.rows);
    }

    #[test]
    fn optimize_takes_at_most_population_trees() {
        let real = fake_real(&["aa", "bb"], 25, 2);
        let config = small_config();
        let baseline = uniform_baseline(&real, &config, table50()).unwrap();
        let mut trees = baseline.trees.clone();
        trees.retain(|t| t.language == "aa" || t.sentence_index < 15);
        let out = optimize(&trees, &config, table50()).unwrap();
        let counts = by_language(&out.stage.rows, |r| &r.language);
        assert_eq!(counts["aa"].len(), 10);
        assert_eq!(counts["bb"].len(), 5);
        assert_eq!(out.trajectories["aa"].points.len(), 20);
        assert_eq!(out.stage.rows, optimize(&trees, &config, table50()).unwrap().stage.rows);
    }

    #[test]
    fn pa_override_and_estimate() {
        let real = fake_real(&["aa", "bb"], 30, 3);
        let config = small_config();
        let estimated = pa_alphas(&real, &config);
        let direct: f64 = real.iter().filter(|r| r.language == "aa").map(|r| r.alpha_hat).sum::<f64>() / 30.0;
        assert!((estimated["aa"] - direct).abs() < 1e-12);
        let forced = pa_alphas(&real, &RunConfig { alpha_override: Some(0.5), ..config.clone() });
        assert!(forced.values().all(|&a| a == 0.5));
        let out = pa_baseline(&real, &config, table50()).unwrap();
        assert_eq!(out.rows.len(), real.len());
    }

    #[test]
    fn sweep_has_one_row_per_alpha() {
        let real = fake_real(&["aa", "bb"], 60, 4);
        let (rows, failures) = pa_sweep(&real, &small_config(), table50()).unwrap();
        assert!(failures.is_empty(), "{failures:?}");
        assert_eq!(rows.len(), 2 * 3);
        assert_eq!(rows[0].mode, "estimated");
        assert_eq!(rows[1].alpha, 0.25);
        assert!(rows.iter().all(|r| r.kld.is_finite() && r.kld >= -1e-9));
    }

    #[test]
    fn compare_reports_every_language_and_condition() {
        let real = fake_real(&["aa", "bb", "cc"], 80, 5);
        let config = small_config();
        let uniform = uniform_baseline(&real, &config, table50()).unwrap().rows;
        let out = compare(&real, &[("uniform".into(), uniform.clone())], &config).unwrap();
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        assert_eq!(out.reports.len(), 3);
        assert_eq!(out.classifiers.len(), 2);
        assert_eq!(out.paired.len(), 2);
        assert_eq!(out.paired[0].df, 2);
        for r in &out.reports {
            assert_eq!(r.n_compared, 80);
            assert!(r.zero_baseline >= 0.0 && r.kld_vs_real.is_finite());
        }
        let again = compare(&real, &[("uniform".into(), uniform)], &config).unwrap();
        assert_eq!(out.reports, again.reports);
    }

    #[test]
    fn divergence_downsamples_the_larger_side() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let sample = |n: usize, rng: &mut ChaCha8Rng| -> Vec<CostPair> {
            (0..n)
                .map(|_| CostPair::of(&sample_uniform_directed_tree(rng.random_range(4..=30), rng).unwrap()).unwrap())
                .collect()
        };
        let (a, b) = (sample(300, &mut rng), sample(120, &mut rng));
        let d = divergence(&a, &b, 5, 1, "t", "xx").unwrap();
        assert_eq!(d.n_compared, 120);
    }

    #[test]
    fn failures_are_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let text = "1\ta\t_\tNOUN\t_\t_\t2\t_\t_\t_\n2\tb\t_\tVERB\t_\t_\t0\t_\t_\t_\n3\tc\t_\tNOUN\t_\t_\t2\t_\t_\t_\n4\td\t_\tADJ\t_\t_\t3\t_\t_\t_\n\n".repeat(60);
        std::fs::write(dir.path().join("good.conllu"), &text).unwrap();
        std::fs::write(dir.path().join("bad.conllu"), "1\tonly\n").unwrap();
        let manifest =
            Manifest::parse("good\tgood.conllu\nbad\tbad.conllu\nmissing\tnope.conllu\n", dir.path()).unwrap();
        let out = measure_corpus(&manifest, &RunConfig::default(), table50()).unwrap();
        assert_eq!(out.stage.rows.len(), 60);
        let failed: Vec<&str> = out.stage.failures.iter().map(|f| f.language.as_str()).collect();
        assert_eq!(failed, vec!["bad", "missing"]);
        assert_eq!(out.ingest["good"].trees, 60);
    }
}
