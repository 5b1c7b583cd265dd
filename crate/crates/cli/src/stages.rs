//! Stage implementations: file inputs, calls into the core pipeline, file
//! outputs and the run summary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use deptopo_core::conllu::Manifest;
use deptopo_core::io::{self, fmt_sig, MeasureRow};
use deptopo_core::measures::{build_extrema_table, EntropyExtremaTable};
use deptopo_core::pipeline::{self, CompareOutput, Failure, RunConfig, StageOutput, SweepRow};
use deptopo_core::Trajectory;
use serde_json::{json, Value};

pub const EXTREMA: &str = "extrema.csv";
pub const SUMMARY: &str = "run_summary.json";

/// Synthetic conditions looked for by `compare` when none are named.
const CONDITIONS: [&str; 3] = ["uniform", "optimized", "pa"];

pub struct Context {
    config: RunConfig,
    out: PathBuf,
}

fn measures_file(condition: &str) -> String {
    format!("{condition}_measures.csv")
}

fn trees_file(condition: &str) -> String {
    format!("{condition}_trees.csv")
}

impl Context {
    pub fn new(config: RunConfig) -> Result<Self> {
        let out = config.output_dir.clone();
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        Ok(Self { config, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// Loads the cached table if it covers `n_max`, else builds and caches it.
    fn table(&self, n_max: usize) -> Result<EntropyExtremaTable> {
        let path = self.path(EXTREMA);
        if path.exists() {
            let table = EntropyExtremaTable::read_from(io::open(&path)?)
                .with_context(|| format!("reading {}", path.display()))?;
            if table.n_max() >= n_max {
                return Ok(table);
            }
        }
        let table = build_extrema_table(n_max)?;
        table.write_to(io::create(&path)?)?;
        Ok(table)
    }

    fn table_for_config(&self) -> Result<EntropyExtremaTable> {
        self.table(self.config.max_len.max(4))
    }

    fn read_measures(&self, path: &Path) -> Result<Vec<MeasureRow>> {
        io::read_measures(io::open(path)?).with_context(|| format!("reading {}", path.display()))
    }

    fn write_stage(&self, condition: &str, stage: &StageOutput) -> Result<Vec<String>> {
        let (m, t) = (measures_file(condition), trees_file(condition));
        io::write_measures(io::create(&self.path(&m))?, &stage.rows)?;
        io::write_trees(io::create(&self.path(&t))?, &stage.trees)?;
        Ok(vec![m, t])
    }

    /// Merges this stage's entry into the run summary.
    fn summarize(&self, stage: &str, entry: Value) -> Result<()> {
        let path = self.path(SUMMARY);
        let mut summary: BTreeMap<String, Value> = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
            Err(_) => BTreeMap::new(),
        };
        summary.insert("config".into(), serde_json::to_value(&self.config)?);
        summary.insert(stage.into(), entry);
        fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
        Ok(())
    }

    fn stage_entry(rows: &[MeasureRow], failures: &[Failure], outputs: &[String]) -> Value {
        let mut per_language: BTreeMap<&str, usize> = BTreeMap::new();
        for r in rows {
            *per_language.entry(&r.language).or_default() += 1;
        }
        json!({
            "status": if failures.is_empty() { "ok" } else { "partial" },
            "rows": rows.len(),
            "languages": per_language,
            "failures": failures,
            "outputs": outputs,
        })
    }

    fn require_rows(stage: &str, rows: &[MeasureRow], failures: &[Failure]) -> Result<()> {
        if rows.is_empty() {
            let reasons: Vec<String> = failures.iter().map(|f| format!("{}: {}", f.language, f.message)).collect();
            bail!(
                "{stage} produced no rows ({})",
                if reasons.is_empty() { "no input".into() } else { reasons.join("; ") }
            );
        }
        Ok(())
    }

    pub fn extrema(&self, n_max: usize) -> Result<()> {
        let table = build_extrema_table(n_max)?;
        table.write_to(io::create(&self.path(EXTREMA))?)?;
        self.summarize(
            "extrema",
            json!({ "status": "ok", "n_max": n_max, "rows": table.rows().len(), "outputs": [EXTREMA] }),
        )
    }

    pub fn measure(&self, ud_root: Option<&Path>) -> Result<()> {
        let manifest = match (ud_root, &self.config.manifest) {
            (Some(root), _) => Manifest::from_ud_root(root).with_context(|| format!("scanning {}", root.display()))?,
            (None, Some(path)) => {
                Manifest::load(path).with_context(|| format!("reading manifest {}", path.display()))?
            }
            (None, None) => bail!("no corpus given: pass --manifest or --ud-root, or set manifest in the config file"),
        };
        if manifest.languages.is_empty() {
            bail!("the manifest lists no languages");
        }
        let table = self.table_for_config()?;
        let out = pipeline::measure_corpus(&manifest, &self.config, &table)?;
        Self::require_rows("measure", &out.stage.rows, &out.stage.failures)?;
        let mut outputs = self.write_stage("real", &out.stage)?;
        fs::write(self.path("manifest.tsv"), manifest.to_text())?;
        outputs.push("manifest.tsv".into());
        let mut entry = Self::stage_entry(&out.stage.rows, &out.stage.failures, &outputs);
        entry["ingest"] = serde_json::to_value(&out.ingest)?;
        self.summarize("measure", entry)
    }

    fn real_rows(&self, real: Option<&Path>) -> Result<Vec<MeasureRow>> {
        let path = real.map(Path::to_path_buf).unwrap_or_else(|| self.path(&measures_file("real")));
        let rows = self.read_measures(&path)?;
        if rows.is_empty() {
            bail!("{} has no rows", path.display());
        }
        Ok(rows)
    }

    pub fn baseline(&self, real: Option<&Path>) -> Result<()> {
        let real = self.real_rows(real)?;
        let table = self.table(real.iter().map(|r| r.n).max().unwrap_or(4).max(4))?;
        let out = pipeline::uniform_baseline(&real, &self.config, &table)?;
        Self::require_rows("baseline", &out.rows, &out.failures)?;
        let outputs = self.write_stage("uniform", &out)?;
        self.summarize("baseline", Self::stage_entry(&out.rows, &out.failures, &outputs))
    }

    pub fn optimize(&self, baseline: Option<&Path>) -> Result<()> {
        let path = baseline.map(Path::to_path_buf).unwrap_or_else(|| self.path(&trees_file("uniform")));
        let trees = io::read_trees(io::open(&path)?).with_context(|| format!("reading {}", path.display()))?;
        let table = self.table(trees.iter().map(|t| t.tree.n()).max().unwrap_or(4).max(4))?;
        let out = pipeline::optimize(&trees, &self.config, &table)?;
        Self::require_rows("optimize", &out.stage.rows, &out.stage.failures)?;
        let mut outputs = self.write_stage("optimized", &out.stage)?;
        write_trajectories(&self.path("trajectory.csv"), &out.trajectories)?;
        outputs.push("trajectory.csv".into());
        self.summarize("optimize", Self::stage_entry(&out.stage.rows, &out.stage.failures, &outputs))
    }

    pub fn pa(&self, real: Option<&Path>, sweep: bool) -> Result<()> {
        let real = self.real_rows(real)?;
        let table = self.table(real.iter().map(|r| r.n).max().unwrap_or(4).max(4))?;
        let out = pipeline::pa_baseline(&real, &self.config, &table)?;
        Self::require_rows("pa", &out.rows, &out.failures)?;
        let mut outputs = self.write_stage("pa", &out)?;
        let mut failures = out.failures.clone();
        if sweep {
            let (rows, sweep_failures) = pipeline::pa_sweep(&real, &self.config, &table)?;
            io::write_table(
                io::create(&self.path("pa_sweep.csv"))?,
                "pa-sweep",
                &SweepRow::HEADER,
                rows.iter().map(SweepRow::record),
            )?;
            outputs.push("pa_sweep.csv".into());
            failures.extend(sweep_failures);
        }
        let mut entry = Self::stage_entry(&out.rows, &failures, &outputs);
        entry["alpha"] = serde_json::to_value(pipeline::pa_alphas(&real, &self.config))?;
        self.summarize("pa", entry)
    }

    pub fn compare(&self, real: Option<&Path>, synthetic: &[String]) -> Result<()> {
        let real_rows = self.real_rows(real)?;
        let mut conditions: Vec<(String, Vec<MeasureRow>)> = Vec::new();
        if synthetic.is_empty() {
            for name in CONDITIONS {
                let path = self.path(&measures_file(name));
                if path.exists() {
                    conditions.push((name.to_string(), self.read_measures(&path)?));
                }
            }
        } else {
            for arg in synthetic {
                let (name, file) = arg.split_once('=').ok_or_else(|| anyhow!("expected NAME=FILE, got {arg:?}"))?;
                conditions.push((name.to_string(), self.read_measures(Path::new(file))?));
            }
        }
        if conditions.is_empty() {
            bail!("nothing to compare: no synthetic measures found in {}", self.out.display());
        }

        let out = pipeline::compare(&real_rows, &conditions, &self.config)?;
        if out.reports.is_empty() {
            bail!("no language could be compared");
        }
        let outputs = self.write_comparison(&real_rows, &conditions, &out)?;
        let entry = json!({
            "status": if out.failures.is_empty() { "ok" } else { "partial" },
            "reports": out.reports.len(),
            "classifiers": out.classifiers,
            "paired_t": out.paired,
            "failures": out.failures,
            "outputs": outputs,
        });
        self.summarize("compare", entry)
    }

    fn write_comparison(
        &self,
        real: &[MeasureRow],
        conditions: &[(String, Vec<MeasureRow>)],
        out: &CompareOutput,
    ) -> Result<Vec<String>> {
        let opt = |x: Option<f64>| x.map_or_else(|| "na".to_string(), fmt_sig);
        io::write_table(
            io::create(&self.path("comparisons.csv"))?,
            "comparisons",
            &[
                "language",
                "condition",
                "n_real",
                "n_synthetic",
                "n_compared",
                "kld",
                "zero_baseline",
                "accuracy_all",
                "accuracy_min10",
            ],
            out.reports.iter().map(|r| {
                vec![
                    r.language.clone(),
                    r.condition.clone(),
                    r.n_real.to_string(),
                    r.n_synthetic.to_string(),
                    r.n_compared.to_string(),
                    fmt_sig(r.kld_vs_real),
                    fmt_sig(r.zero_baseline),
                    opt(r.accuracy_all),
                    opt(r.accuracy_min10),
                ]
            }),
        )?;

        io::write_table(
            io::create(&self.path("classifiers.csv"))?,
            "classifiers",
            &["condition", "subset", "accuracy", "train_size", "test_size"],
            out.classifiers.iter().map(|c| {
                vec![
                    c.condition.clone(),
                    c.subset.clone(),
                    fmt_sig(c.accuracy),
                    c.train_size.to_string(),
                    c.test_size.to_string(),
                ]
            }),
        )?;

        io::write_table(
            io::create(&self.path("paired_t.csv"))?,
            "paired-t",
            &["condition", "measure", "t", "df", "mean_real", "mean_synthetic"],
            out.paired.iter().map(|p| {
                vec![
                    p.condition.clone(),
                    p.measure.clone(),
                    fmt_sig(p.t),
                    p.df.to_string(),
                    fmt_sig(p.mean_real),
                    fmt_sig(p.mean_synthetic),
                ]
            }),
        )?;

        let mut mean_rows = Vec::new();
        let all = std::iter::once(("real", real)).chain(conditions.iter().map(|(n, r)| (n.as_str(), r.as_slice())));
        for (condition, rows) in all {
            for (language, group) in pipeline::by_language(rows, |r| &r.language) {
                let k = group.len() as f64;
                let mean = |f: fn(&MeasureRow) -> f64| fmt_sig(group.iter().map(|r| f(r)).sum::<f64>() / k);
                mean_rows.push(vec![
                    language,
                    condition.to_string(),
                    group.len().to_string(),
                    mean(|r| r.norm_h_ks),
                    mean(|r| r.norm_h_deg),
                    mean(|r| r.alpha_hat),
                ]);
            }
        }
        io::write_table(
            io::create(&self.path("means.csv"))?,
            "means",
            &["language", "condition", "n", "mean_H_ks", "mean_H_deg", "mean_alpha_hat"],
            mean_rows,
        )?;

        let mut outputs: Vec<String> =
            ["comparisons.csv", "classifiers.csv", "paired_t.csv", "means.csv"].map(String::from).to_vec();
        for r in &out.reports {
            let name = format!("reports/{}.{}.txt", r.language, r.condition);
            let path = self.path(&name);
            io::create(&path)?;
            fs::write(&path, r.to_key_value())?;
            outputs.push(name);
        }
        Ok(outputs)
    }
}

fn write_trajectories(path: &Path, trajectories: &BTreeMap<String, Trajectory>) -> Result<()> {
    let records = trajectories.iter().flat_map(|(language, t)| {
        t.points
            .iter()
            .map(move |p| vec![language.clone(), p.epoch.to_string(), fmt_sig(p.mean_h_deg), fmt_sig(p.mean_h_ks)])
    });
    io::write_table(io::create(path)?, "trajectory", &["language", "epoch", "mean_H_deg", "mean_H_ks"], records)?;
    Ok(())
}
