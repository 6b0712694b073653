//! `slthresh`: derive, evaluate and compare weighted-misclassification rules
//! built on stacked ensembles.

mod config;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use slthresh::data::{load_csv, Dataset};
use slthresh::evaluation::{ExperimentReport, ReportRow};
use slthresh::experiment::{self, CommonSettings, CvExperiment, DerivedRule, Outcome, SimExperiment};
use slthresh::loss::relative_difference;
use slthresh::seed;
use slthresh::simulation::{self, bayes_rule_risk, SimConfig};
use slthresh::{EnsembleRule, LossSpec};

use config::{read_config, ConfigMap, Resolved, Source};

#[derive(Parser, Debug)]
#[command(name = "slthresh", version, about = "Weighted-misclassification classification rules from stacked ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate simulated samples and report the Bayes rule's risk on them.
    Simulate(Shared),
    /// Derive rules on a whole dataset and save them.
    Fit(Shared),
    /// Refit saved rules on training data and measure their risk on test data.
    Evaluate(Shared),
    /// Compare methods: train/test risk for simulations, outer cross-validated
    /// risk for a CSV dataset.
    Compare(Shared),
}

#[derive(Args, Debug, Default)]
struct Shared {
    /// Comma-separated loss weights in (0,1) [default: 0.05,0.10,...,0.95]
    #[arg(long)]
    lambda: Option<String>,
    /// `four`, `eight`, or a comma list of learner kinds [default: four]
    #[arg(long)]
    library: Option<String>,
    /// Comma list from conditional,two_step,crs [default: all]
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated master seeds [default: 1]
    #[arg(long)]
    seed: Option<String>,
    /// Output directory [default: out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value file; flags given on the command line take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write each cross-validated score matrix as CSV into this directory
    #[arg(long)]
    dump_z: Option<PathBuf>,
    /// Write per-observation ensemble scores and thresholds into this directory
    #[arg(long)]
    dump_densities: Option<PathBuf>,
    /// Outer cross-validation repetitions averaged per seed [default: 1]
    #[arg(long)]
    repeats: Option<usize>,
    /// Outer cross-validation folds [default: 10]
    #[arg(long)]
    folds_outer: Option<usize>,
    /// Inner (stacking) cross-validation folds [default: 10]
    #[arg(long)]
    folds_inner: Option<usize>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    workers: Option<usize>,
    /// Record wall-clock seconds in the report (otherwise NA)
    #[arg(long)]
    timings: bool,
    /// Simulation setting: setting1 or setting2
    #[arg(long)]
    sim: Option<String>,
    /// Simulated sample size for training and for testing [default: 10000]
    #[arg(long)]
    n: Option<usize>,
    /// Training data as CSV with a header row
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Name of the label column [default: label]
    #[arg(long)]
    label_col: Option<String>,
    /// Label value treated as positive [default: the larger level]
    #[arg(long)]
    positive_level: Option<String>,
    /// Fill missing cells with 0 and add missing-indicator columns
    #[arg(long)]
    impute_indicator: bool,
    /// Column to drop before parsing (repeatable)
    #[arg(long)]
    ignore_col: Vec<String>,
    /// Test data for `evaluate` with --csv
    #[arg(long)]
    test_csv: Option<PathBuf>,
    /// Rule file for `evaluate` (repeatable)
    #[arg(long)]
    rule: Vec<PathBuf>,
}

impl Shared {
    fn to_map(&self) -> Result<ConfigMap> {
        let mut map = match &self.config {
            Some(p) => read_config(p)?,
            None => ConfigMap::new(),
        };
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                map.insert(k.to_owned(), v);
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        put("lambda", self.lambda.clone());
        put("library", self.library.clone());
        put("methods", self.methods.clone());
        put("seed", self.seed.clone());
        put("out", path(&self.out));
        put("dump_z", path(&self.dump_z));
        put("dump_densities", path(&self.dump_densities));
        put("repeats", self.repeats.map(|v| v.to_string()));
        put("folds_outer", self.folds_outer.map(|v| v.to_string()));
        put("folds_inner", self.folds_inner.map(|v| v.to_string()));
        put("workers", self.workers.map(|v| v.to_string()));
        put("timings", self.timings.then(|| "true".to_owned()));
        put("sim", self.sim.clone());
        put("n", self.n.map(|v| v.to_string()));
        put("csv", path(&self.csv));
        put("label_col", self.label_col.clone());
        put("positive_level", self.positive_level.clone());
        put("impute_indicator", self.impute_indicator.then(|| "true".to_owned()));
        put("test_csv", path(&self.test_csv));
        if !self.ignore_col.is_empty() {
            put("ignore_col", Some(self.ignore_col.join(",")));
        }
        if !self.rule.is_empty() {
            put("rule", Some(self.rule.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")));
        }
        Ok(map)
    }
}

fn common(r: &Resolved) -> CommonSettings {
    CommonSettings {
        lambdas: r.lambdas.clone(),
        methods: r.methods.clone(),
        kinds: r.kinds.clone(),
        overrides: r.overrides.clone(),
        seeds: r.seeds.clone(),
        inner_folds: r.folds_inner,
        crs: r.crs.clone(),
        timings: r.timings,
        dump_z: r.dump_z.clone(),
        dump_densities: r.dump_densities.clone(),
    }
}

fn load(path: &Path, r: &Resolved) -> Result<Dataset> {
    let Some(Source::Csv { load, .. }) = &r.source else {
        unreachable!("caller checked the source");
    };
    load_csv(path, load).with_context(|| format!("loading {}", path.display()))
}

fn rule_file_name(seed: u64, rule: &EnsembleRule) -> String {
    format!("rule_{}_lambda{}_seed{seed}.txt", rule.method.name(), rule.lambda)
}

fn write_rules(dir: &Path, rules: &[DerivedRule]) -> Result<()> {
    if rules.is_empty() {
        return Ok(());
    }
    let dir = dir.join("rules");
    fs::create_dir_all(&dir)?;
    for d in rules {
        fs::write(dir.join(rule_file_name(d.seed, &d.rule)), d.rule.to_string())?;
    }
    Ok(())
}

fn finish(r: &Resolved, outcome: &Outcome) -> Result<()> {
    outcome.report.write_csv(r.out.join("report.csv"))?;
    write_rules(&r.out, &outcome.rules)?;
    print!("{}", outcome.report.summary());
    if r.methods.contains(&slthresh::Method::Crs) && outcome.dominance_checks > 0 {
        println!(
            "crs vs two_step training objective: {} checks passed",
            outcome.dominance_checks
        );
    }
    println!("wrote {}", r.out.join("report.csv").display());
    Ok(())
}

fn simulate(r: &Resolved) -> Result<Outcome> {
    let Some(Source::Sim(setting)) = r.source else {
        bail!("simulate needs --sim setting1|setting2");
    };
    for &s in &r.seeds {
        for (tag, name) in [("sim-train", "train"), ("sim-test", "test")] {
            let sample = simulation::generate(&SimConfig::new(r.n, setting, seed::derive(s, tag)))?;
            let path = r.out.join(format!("{}_seed{s}_{name}.csv", setting.name()));
            simulation::write_csv(&sample, &path)?;
        }
    }
    Ok(experiment::run_bayes_baseline(setting, r.n, &r.lambdas, &r.seeds)?)
}

fn fit(r: &Resolved) -> Result<Outcome> {
    let c = common(r);
    match &r.source {
        Some(Source::Sim(setting)) => {
            let mut out = Outcome::default();
            for &s in &r.seeds {
                let train = simulation::generate(&SimConfig::new(r.n, *setting, seed::derive(s, "sim-train")))?;
                let one = experiment::run_fit(&train.dataset, &CommonSettings { seeds: vec![s], ..c.clone() })?;
                out.report.rows.extend(one.report.rows);
                out.rules.extend(one.rules);
                out.dominance_checks += one.dominance_checks;
            }
            out.report.rows.sort_by_key(|row| {
                let m = r.methods.iter().position(|m| m.name() == row.method);
                let l = r.lambdas.iter().position(|&l| l == row.lambda);
                (m, l)
            });
            Ok(out)
        }
        Some(Source::Csv { path, .. }) => Ok(experiment::run_fit(&load(path, r)?, &c)?),
        None => bail!("fit needs --sim or --csv"),
    }
}

fn evaluate(r: &Resolved) -> Result<Outcome> {
    if r.rules.is_empty() {
        bail!("evaluate needs at least one --rule file");
    }
    let rules = r
        .rules
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            text.parse::<EnsembleRule>().with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Outcome::default();
    match &r.source {
        Some(Source::Sim(setting)) => {
            for &s in &r.seeds {
                let train = simulation::generate(&SimConfig::new(r.n, *setting, seed::derive(s, "sim-train")))?;
                let test = simulation::generate(&SimConfig::new(r.n, *setting, seed::derive(s, "sim-test")))?;
                for rule in &rules {
                    let risk = experiment::evaluate_rule(rule, &train.dataset, &test.dataset)?;
                    let bayes = bayes_rule_risk(&test, LossSpec::new(rule.lambda)?);
                    out.report.rows.push(row(rule, risk, Some(relative_difference(risk, bayes)?), s));
                }
            }
        }
        Some(Source::Csv { path, .. }) => {
            let Some(test_path) = &r.test_csv else {
                bail!("evaluate with --csv needs --test-csv");
            };
            let train = load(path, r)?;
            let test = load(test_path, r)?;
            for rule in &rules {
                let risk = experiment::evaluate_rule(rule, &train, &test)?;
                out.report.rows.push(row(rule, risk, None, r.seeds[0]));
            }
        }
        None => bail!("evaluate needs --sim or --csv"),
    }
    Ok(out)
}

fn row(rule: &EnsembleRule, risk: f64, rel_diff: Option<f64>, seed: u64) -> ReportRow {
    ReportRow {
        method: rule.method.name().to_owned(),
        lambda: rule.lambda,
        k: rule.k(),
        risk,
        rel_diff,
        threshold: Some(rule.threshold),
        alpha: rule.alpha.clone(),
        seed,
        runtime_s: None,
    }
}

fn compare(r: &Resolved) -> Result<Outcome> {
    let c = common(r);
    let out = match &r.source {
        Some(Source::Sim(setting)) => experiment::run_simulation(&SimExperiment {
            setting: *setting,
            n_train: r.n,
            n_test: r.n,
            common: c,
        })?,
        Some(Source::Csv { path, .. }) => experiment::run_cv(&CvExperiment {
            data: load(path, r)?,
            outer_folds: r.folds_outer,
            repeats: r.repeats,
            common: c,
        })?,
        None => bail!("compare needs --sim or --csv"),
    };
    if !out.bayes.is_empty() {
        let bayes = ExperimentReport {
            rows: out
                .bayes
                .iter()
                .map(|&(s, l, risk)| ReportRow {
                    method: "bayes".into(),
                    lambda: l,
                    k: 0,
                    risk,
                    rel_diff: Some(0.0),
                    threshold: Some(1.0 - l),
                    alpha: Vec::new(),
                    seed: s,
                    runtime_s: None,
                })
                .collect(),
        };
        bayes.write_csv(r.out.join("bayes.csv"))?;
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    let (name, shared) = match &cli.command {
        Command::Simulate(s) => ("simulate", s),
        Command::Fit(s) => ("fit", s),
        Command::Evaluate(s) => ("evaluate", s),
        Command::Compare(s) => ("compare", s),
    };
    let resolved = Resolved::from_map(&shared.to_map()?)?;
    if let Some(w) = resolved.workers {
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global()?;
    }
    fs::create_dir_all(&resolved.out).with_context(|| format!("creating {}", resolved.out.display()))?;
    fs::write(resolved.out.join("manifest.txt"), resolved.manifest(name))?;
    let outcome = match cli.command {
        Command::Simulate(_) => simulate(&resolved)?,
        Command::Fit(_) => fit(&resolved)?,
        Command::Evaluate(_) => evaluate(&resolved)?,
        Command::Compare(_) => compare(&resolved)?,
    };
    finish(&resolved, &outcome)
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
