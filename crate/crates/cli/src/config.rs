//! `key=value` run configuration. A config file and command-line flags feed
//! the same map (flags last, so they win); [`Resolved::from_map`] validates it
//! and expands defaults, and [`Resolved::manifest`] writes it back out in the
//! same format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use slthresh::data::LoadOptions;
use slthresh::experiment::ParamOverride;
use slthresh::learners::{EIGHT_LEARNERS, FOUR_LEARNERS};
use slthresh::simulation::Setting;
use slthresh::{CrsOptions, LearnerKind, Method};

pub type ConfigMap = BTreeMap<String, String>;

const PLAIN_KEYS: &[&str] = &[
    "lambda",
    "library",
    "methods",
    "seed",
    "out",
    "repeats",
    "folds_outer",
    "folds_inner",
    "workers",
    "timings",
    "dump_z",
    "dump_densities",
    "sim",
    "n",
    "csv",
    "label_col",
    "positive_level",
    "impute_indicator",
    "ignore_col",
    "test_csv",
    "rule",
];

const CRS_KEYS: &[&str] = &["crs.population", "crs.max_evaluations", "crs.xtol_rel"];

pub fn parse_config(text: &str) -> Result<ConfigMap> {
    let mut map = ConfigMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("config line {}: expected key=value, got `{raw}`", i + 1))?;
        let key = k.trim().replace('-', "_");
        check_key(&key).with_context(|| format!("config line {}", i + 1))?;
        map.insert(key, v.trim().to_owned());
    }
    Ok(map)
}

pub fn read_config(path: &Path) -> Result<ConfigMap> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text)
}

fn check_key(key: &str) -> Result<()> {
    if PLAIN_KEYS.contains(&key) || CRS_KEYS.contains(&key) {
        return Ok(());
    }
    if let Some((kind, param)) = key.split_once('.') {
        let kind: LearnerKind = kind.parse()?;
        if kind.defaults().iter().any(|(k, _)| *k == param) {
            return Ok(());
        }
        bail!("{kind} has no parameter `{param}`");
    }
    bail!("unknown config key `{key}`")
}

#[derive(Debug, Clone)]
pub enum Source {
    Sim(Setting),
    Csv { path: PathBuf, load: LoadOptions },
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub lambdas: Vec<f64>,
    pub library: String,
    pub kinds: Vec<LearnerKind>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub repeats: usize,
    pub folds_outer: usize,
    pub folds_inner: usize,
    pub workers: Option<usize>,
    pub timings: bool,
    pub dump_z: Option<PathBuf>,
    pub dump_densities: Option<PathBuf>,
    pub source: Option<Source>,
    pub n: usize,
    pub test_csv: Option<PathBuf>,
    pub rules: Vec<PathBuf>,
    pub overrides: Vec<ParamOverride>,
    pub crs: CrsOptions,
}

fn list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| anyhow!("{key}: cannot parse `{v}`: {e}"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => bail!("{key}: expected true or false, got `{v}`"),
    }
}

/// `0.05, 0.10, ..., 0.95`.
pub fn default_lambda_grid() -> Vec<f64> {
    (1..20).map(|i| f64::from(i) / 20.0).collect()
}

pub fn parse_library(v: &str) -> Result<Vec<LearnerKind>> {
    let kinds = match v {
        "four" => FOUR_LEARNERS.to_vec(),
        "eight" => EIGHT_LEARNERS.to_vec(),
        custom => list(custom).map(str::parse).collect::<Result<Vec<LearnerKind>, _>>()?,
    };
    if kinds.is_empty() {
        bail!("library is empty");
    }
    Ok(kinds)
}

impl Resolved {
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        for key in map.keys() {
            check_key(key)?;
        }
        let get = |k: &str| map.get(k).map(String::as_str);

        let lambdas = match get("lambda") {
            Some(v) => list(v).map(|x| parse_num::<f64>("lambda", x)).collect::<Result<Vec<_>>>()?,
            None => default_lambda_grid(),
        };
        if lambdas.is_empty() {
            bail!("lambda grid is empty");
        }
        if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
            bail!("lambda {l} is outside (0, 1)");
        }
        let library = get("library").unwrap_or("four").to_owned();
        let kinds = parse_library(&library)?;
        let methods = match get("methods") {
            Some(v) => list(v).map(str::parse).collect::<Result<Vec<Method>, _>>()?,
            None => Method::ALL.to_vec(),
        };
        if methods.is_empty() {
            bail!("no methods requested");
        }
        let seeds = match get("seed") {
            Some(v) => list(v).map(|x| parse_num::<u64>("seed", x)).collect::<Result<Vec<_>>>()?,
            None => vec![1],
        };
        if seeds.is_empty() {
            bail!("no seeds given");
        }

        let sim = get("sim").map(|v| v.parse::<Setting>().map_err(|e| anyhow!(e))).transpose()?;
        let csv = get("csv").map(PathBuf::from);
        let source = match (sim, csv) {
            (Some(_), Some(_)) => bail!("give either sim or csv, not both"),
            (Some(s), None) => Some(Source::Sim(s)),
            (None, Some(path)) => {
                let mut load = LoadOptions::new(get("label_col").unwrap_or("label"));
                load.positive_level = get("positive_level").map(str::to_owned);
                load.impute_indicator = get("impute_indicator").map(|v| parse_bool("impute_indicator", v)).transpose()?.unwrap_or(false);
                load.ignore_columns = get("ignore_col").map(|v| list(v).map(str::to_owned).collect()).unwrap_or_default();
                Some(Source::Csv { path, load })
            }
            (None, None) => None,
        };

        let mut overrides = Vec::new();
        for (key, v) in map {
            if let Some((kind, param)) = key.split_once('.') {
                if kind != "crs" {
                    overrides.push(ParamOverride {
                        kind: kind.parse()?,
                        key: param.to_owned(),
                        value: parse_num(key, v)?,
                    });
                }
            }
        }
        let mut crs = CrsOptions::default();
        if let Some(v) = get("crs.population") {
            crs.population_size = Some(parse_num("crs.population", v)?);
        }
        if let Some(v) = get("crs.max_evaluations") {
            crs.max_evaluations = parse_num("crs.max_evaluations", v)?;
        }
        if let Some(v) = get("crs.xtol_rel") {
            crs.xtol_rel = parse_num("crs.xtol_rel", v)?;
        }

        let count = |k: &str, default: usize| -> Result<usize> { get(k).map_or(Ok(default), |v| parse_num(k, v)) };
        let workers = get("workers").map(|v| parse_num::<usize>("workers", v)).transpose()?;
        if workers == Some(0) {
            bail!("workers must be at least 1");
        }
        Ok(Self {
            lambdas,
            library,
            kinds,
            methods,
            seeds,
            out: PathBuf::from(get("out").unwrap_or("out")),
            repeats: count("repeats", 1)?.max(1),
            folds_outer: count("folds_outer", 10)?,
            folds_inner: count("folds_inner", 10)?,
            workers,
            timings: get("timings").map(|v| parse_bool("timings", v)).transpose()?.unwrap_or(false),
            dump_z: get("dump_z").map(PathBuf::from),
            dump_densities: get("dump_densities").map(PathBuf::from),
            source,
            n: count("n", 10_000)?,
            test_csv: get("test_csv").map(PathBuf::from),
            rules: get("rule").map(|v| list(v).map(PathBuf::from).collect()).unwrap_or_default(),
            overrides,
            crs,
        })
    }

    /// Every setting, defaults included, as `key=value` lines.
    pub fn manifest(&self, command: &str) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut s = format!("# resolved configuration for `{command}`\n");
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        line("lambda", join(self.lambdas.iter().map(f64::to_string).collect()));
        line("library", self.library.clone());
        line("methods", join(self.methods.iter().map(|m| m.name().to_owned()).collect()));
        line("seed", join(self.seeds.iter().map(u64::to_string).collect()));
        line("out", self.out.display().to_string());
        line("repeats", self.repeats.to_string());
        line("folds_outer", self.folds_outer.to_string());
        line("folds_inner", self.folds_inner.to_string());
        if let Some(w) = self.workers {
            line("workers", w.to_string());
        }
        line("timings", self.timings.to_string());
        if let Some(p) = &self.dump_z {
            line("dump_z", p.display().to_string());
        }
        if let Some(p) = &self.dump_densities {
            line("dump_densities", p.display().to_string());
        }
        match &self.source {
            Some(Source::Sim(setting)) => {
                line("sim", setting.name().to_owned());
                line("n", self.n.to_string());
            }
            Some(Source::Csv { path, load }) => {
                line("csv", path.display().to_string());
                line("label_col", load.label_column.clone());
                if let Some(p) = &load.positive_level {
                    line("positive_level", p.clone());
                }
                line("impute_indicator", load.impute_indicator.to_string());
                if !load.ignore_columns.is_empty() {
                    line("ignore_col", load.ignore_columns.join(","));
                }
            }
            None => {}
        }
        if let Some(p) = &self.test_csv {
            line("test_csv", p.display().to_string());
        }
        if !self.rules.is_empty() {
            line("rule", join(self.rules.iter().map(|p| p.display().to_string()).collect()));
        }
        let dim_hint = self.kinds.len() + 1;
        line(
            "crs.population",
            self.crs.population_size.unwrap_or_else(|| self.crs.population_for(dim_hint)).to_string(),
        );
        line("crs.max_evaluations", self.crs.max_evaluations.to_string());
        line("crs.xtol_rel", self.crs.xtol_rel.to_string());
        let mut kinds = self.kinds.clone();
        kinds.sort();
        kinds.dedup();
        for kind in kinds {
            for (param, default) in kind.defaults() {
                let value = self
                    .overrides
                    .iter()
                    .rev()
                    .find(|o| o.kind == kind && o.key == *param)
                    .map_or(*default, |o| o.value);
                line(&format!("{kind}.{param}"), value.to_string());
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_namespaces() {
        let map = parse_config("# run\nlambda = 0.2, 0.8\nrandom_forest.trees=50 # fewer\n\ncrs.max_evaluations=500\n").unwrap();
        let r = Resolved::from_map(&map).unwrap();
        assert_eq!(r.lambdas, vec![0.2, 0.8]);
        assert_eq!(r.crs.max_evaluations, 500);
        assert_eq!(
            r.overrides,
            vec![ParamOverride {
                kind: LearnerKind::RandomForest,
                key: "trees".into(),
                value: 50.0
            }]
        );
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(parse_config("lambda").is_err());
        assert!(parse_config("colour=red").is_err());
        assert!(parse_config("knn.trees=3").is_err());
        assert!(parse_config("nonsense.k=3").is_err());
        let bad = parse_config("lambda=0.2,1.0").unwrap();
        assert!(Resolved::from_map(&bad).is_err());
        let both = parse_config("sim=setting1\ncsv=a.csv").unwrap();
        assert!(Resolved::from_map(&both).is_err());
    }

    #[test]
    fn defaults_and_manifest_round_trip() {
        let r = Resolved::from_map(&ConfigMap::new()).unwrap();
        assert_eq!(r.lambdas.len(), 19);
        assert_eq!(r.lambdas[2], 0.15);
        assert_eq!(r.kinds, FOUR_LEARNERS.to_vec());
        assert_eq!(r.methods, Method::ALL.to_vec());
        let manifest = r.manifest("compare");
        assert!(manifest.contains("random_forest.trees=500\n"));
        let again = Resolved::from_map(&parse_config(&manifest).unwrap()).unwrap();
        assert_eq!(again.manifest("compare"), manifest);
    }

    #[test]
    fn library_forms() {
        assert_eq!(parse_library("eight").unwrap().len(), 8);
        assert_eq!(parse_library("knn, logistic").unwrap(), vec![LearnerKind::Knn, LearnerKind::Logistic]);
        assert!(parse_library("knn,forest").is_err());
        assert!(parse_library("").is_err());
    }
}
