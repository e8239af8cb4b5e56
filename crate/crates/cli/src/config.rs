//! Run configuration: command-line flags merged over an optional
//! `key = value` file, resolved into a [`RunConfig`].

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::PathBuf;

use serde::Serialize;
use sigma_forest::experiments::DEFAULT_EPS;
use sigma_forest::parallel::Execution;

use crate::CliError;

/// Keys accepted in config files; flags use the same names.
pub const KEYS: [&str; 19] = [
    "command",
    "graph",
    "ladder-base",
    "ladder-l",
    "beta-vertical",
    "beta-horizontal",
    "pi",
    "eps",
    "pair",
    "samples",
    "burn-in",
    "thin",
    "seed",
    "chains",
    "max-vertices",
    "random",
    "trees",
    "sequential",
    "out",
];

/// Raw settings: key to the list of values given for it.
#[derive(Debug, Default, Clone)]
pub struct Settings(BTreeMap<String, Vec<String>>);

fn normalize(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

impl Settings {
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.0.insert(normalize(key), vec![value.to_string()]);
    }

    pub fn set_all(&mut self, key: &str, values: &[String]) {
        if !values.is_empty() {
            self.0.insert(normalize(key), values.to_vec());
        }
    }

    /// Parses `key = value` lines; `#` starts a comment and repeated keys
    /// accumulate.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut out = Settings::default();
        for (lno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("config line {}: expected `key = value`", lno + 1)))?;
            let key = normalize(k);
            if !KEYS.contains(&key.as_str()) {
                return Err(CliError::config(format!("config line {}: unknown key `{}`", lno + 1, k.trim())));
            }
            out.0.entry(key).or_default().push(v.trim().to_string());
        }
        Ok(out)
    }

    /// Keys set here replace those of `base` entirely.
    pub fn over(self, mut base: Settings) -> Settings {
        base.0.extend(self.0);
        base
    }

    fn one(&self, key: &str) -> Result<Option<&str>, CliError> {
        match self.0.get(key).map(Vec::as_slice) {
            None | Some([]) => Ok(None),
            Some([v]) => Ok(Some(v)),
            Some(_) => Err(CliError::config(format!("`{key}` given more than once"))),
        }
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.one(key)?
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::config(format!("`{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Verify,
    Sample,
    ComparePinning,
    LadderDecay,
    Independence,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Sample => "sample",
            Command::ComparePinning => "compare-pinning",
            Command::LadderDecay => "ladder-decay",
            Command::Independence => "independence",
        }
    }

    fn default_eps(self) -> Vec<f64> {
        match self {
            Command::ComparePinning => DEFAULT_EPS.to_vec(),
            Command::LadderDecay => vec![0.01],
            Command::Independence => vec![0.5],
            Command::Verify | Command::Sample => vec![1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GraphSource {
    File(String),
    Ladder {
        base: String,
        l_minus: usize,
        l_plus: usize,
        beta_vertical: f64,
        beta_horizontal: f64,
    },
}

/// Pinning profile `π`, before the graph size is known.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PiSpec {
    Uniform(f64),
    /// 1-based vertex label.
    Delta(usize),
    List(Vec<f64>),
}

impl PiSpec {
    fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::config(format!("`pi`: expected a number, `delta:X` or a list, got `{s}`"));
        if let Some(x) = s.strip_prefix("delta:") {
            let x: usize = x.trim().parse().map_err(|_| bad())?;
            return Ok(PiSpec::Delta(x));
        }
        let values = parse_list::<f64>(s).map_err(|_| bad())?;
        match values.as_slice() {
            [v] => Ok(PiSpec::Uniform(*v)),
            _ => Ok(PiSpec::List(values)),
        }
    }

    /// Profile on `n` vertices.
    pub fn profile(&self, n: usize) -> Result<Vec<f64>, CliError> {
        match self {
            PiSpec::Uniform(v) => Ok(vec![*v; n]),
            PiSpec::Delta(x) => {
                if *x == 0 || *x > n {
                    return Err(CliError::config(format!("`pi`: vertex {x} out of range 1..={n}")));
                }
                let mut pi = vec![0.0; n];
                pi[x - 1] = 1.0;
                Ok(pi)
            }
            PiSpec::List(v) if v.len() == n => Ok(v.clone()),
            PiSpec::List(v) => Err(CliError::config(format!(
                "`pi`: {} values for a graph with {n} vertices",
                v.len()
            ))),
        }
    }

    fn echo(&self) -> String {
        match self {
            PiSpec::Uniform(v) => v.to_string(),
            PiSpec::Delta(x) => format!("delta:{x}"),
            PiSpec::List(v) => join(v),
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, ()> {
    s.split(',').map(|p| p.trim().parse().map_err(|_| ())).collect()
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub graph: Option<GraphSource>,
    pub pi: PiSpec,
    pub eps: Vec<f64>,
    /// 1-based vertex labels.
    pub pairs: Vec<(usize, usize)>,
    pub samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub max_vertices: usize,
    pub random: usize,
    pub trees: bool,
    pub execution: Execution,
    /// Not part of the echo, so reruns into another directory compare equal.
    #[serde(skip)]
    pub out: PathBuf,
}

impl RunConfig {
    pub fn resolve(command: Command, s: &Settings) -> Result<Self, CliError> {
        if let Some(c) = s.one("command")? {
            if c != command.name() {
                return Err(CliError::config(format!("config is for `{c}`, not `{}`", command.name())));
            }
        }
        let graph = match (s.one("graph")?, s.one("ladder-base")?) {
            (Some(_), Some(_)) => {
                return Err(CliError::config("give either `graph` or `ladder-base`, not both"));
            }
            (Some(file), None) => Some(GraphSource::File(file.to_string())),
            (None, Some(base)) => {
                let l = s
                    .one("ladder-l")?
                    .ok_or_else(|| CliError::config("`ladder-base` needs `ladder-L MINUS,PLUS`"))?;
                let (l_minus, l_plus) = match parse_list::<usize>(l).as_deref() {
                    Ok([a, b]) => (*a, *b),
                    _ => return Err(CliError::config(format!("`ladder-L`: expected MINUS,PLUS, got `{l}`"))),
                };
                Some(GraphSource::Ladder {
                    base: base.to_string(),
                    l_minus,
                    l_plus,
                    beta_vertical: s.parsed("beta-vertical")?.unwrap_or(1.0),
                    beta_horizontal: s.parsed("beta-horizontal")?.unwrap_or(1.0),
                })
            }
            (None, None) => None,
        };
        let eps = match s.one("eps")? {
            Some(list) => parse_list(list).map_err(|_| CliError::config(format!("`eps`: cannot parse `{list}`")))?,
            None => command.default_eps(),
        };
        let pairs = s
            .0
            .get("pair")
            .into_iter()
            .flatten()
            .map(|p| match parse_list::<usize>(p).as_deref() {
                Ok([x, y]) => Ok((*x, *y)),
                _ => Err(CliError::config(format!("`pair`: expected X,Y, got `{p}`"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let sequential: bool = s.parsed("sequential")?.unwrap_or(false);
        Ok(RunConfig {
            command,
            graph,
            pi: s.one("pi")?.map(PiSpec::parse).transpose()?.unwrap_or(PiSpec::Uniform(1.0)),
            eps,
            pairs,
            samples: s.parsed("samples")?.unwrap_or(10_000),
            burn_in: s.parsed("burn-in")?.unwrap_or(2_000),
            thin: s.parsed("thin")?.unwrap_or(1),
            seed: s.parsed("seed")?.unwrap_or(0),
            chains: s.parsed("chains")?.unwrap_or(4),
            max_vertices: s.parsed("max-vertices")?.unwrap_or(7),
            random: s.parsed("random")?.unwrap_or(0),
            trees: s.parsed("trees")?.unwrap_or(command == Command::Sample),
            execution: if sequential { Execution::Sequential } else { Execution::Parallel },
            out: PathBuf::from(s.one("out")?.unwrap_or("out")),
        })
    }

    /// `key = value` lines in config-file syntax, excluding `out`.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let mut lines = vec![("command", self.command.name().to_string())];
        match &self.graph {
            Some(GraphSource::File(f)) => lines.push(("graph", f.clone())),
            Some(GraphSource::Ladder {
                base,
                l_minus,
                l_plus,
                beta_vertical,
                beta_horizontal,
            }) => {
                lines.push(("ladder-base", base.clone()));
                lines.push(("ladder-L", format!("{l_minus},{l_plus}")));
                lines.push(("beta-vertical", beta_vertical.to_string()));
                lines.push(("beta-horizontal", beta_horizontal.to_string()));
            }
            None => {}
        }
        lines.push(("pi", self.pi.echo()));
        lines.push(("eps", join(&self.eps)));
        for (x, y) in &self.pairs {
            lines.push(("pair", format!("{x},{y}")));
        }
        lines.extend([
            ("samples", self.samples.to_string()),
            ("burn-in", self.burn_in.to_string()),
            ("thin", self.thin.to_string()),
            ("seed", self.seed.to_string()),
            ("chains", self.chains.to_string()),
            ("max-vertices", self.max_vertices.to_string()),
            ("random", self.random.to_string()),
            ("trees", self.trees.to_string()),
            ("sequential", (self.execution == Execution::Sequential).to_string()),
        ]);
        lines
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_flag_override() {
        let file = Settings::parse("# sweep\nsamples = 500\npair = 1,2\npair = 2,3 # second\neps = 0.1, 0.05\n").unwrap();
        let mut flags = Settings::default();
        flags.set("samples", 900);
        let cfg = RunConfig::resolve(Command::ComparePinning, &flags.over(file)).unwrap();
        assert_eq!(cfg.samples, 900);
        assert_eq!(cfg.pairs, vec![(1, 2), (2, 3)]);
        assert_eq!(cfg.eps, vec![0.1, 0.05]);
    }

    #[test]
    fn echo_round_trips_through_the_file_syntax() {
        let mut s = Settings::default();
        s.set("ladder-base", "base.txt");
        s.set("ladder_L", "1,3");
        s.set("pi", "delta:2");
        s.set("sequential", true);
        let cfg = RunConfig::resolve(Command::LadderDecay, &s).unwrap();
        let text: String = cfg.echo().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let again = RunConfig::resolve(Command::LadderDecay, &Settings::parse(&text).unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn bad_settings_are_rejected() {
        assert!(Settings::parse("colour = red").is_err());
        assert!(Settings::parse("samples 10").is_err());
        let mut s = Settings::default();
        s.set("pi", "delta:x");
        assert!(RunConfig::resolve(Command::Sample, &s).is_err());
        let mut s = Settings::default();
        s.set("ladder-base", "b.txt");
        assert!(RunConfig::resolve(Command::Sample, &s).is_err());
        let s = Settings::parse("command = verify").unwrap();
        assert!(RunConfig::resolve(Command::Sample, &s).is_err());
    }

    #[test]
    fn pi_profiles() {
        assert_eq!(PiSpec::parse("2").unwrap().profile(2).unwrap(), vec![2.0, 2.0]);
        assert_eq!(PiSpec::parse("delta:2").unwrap().profile(3).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(PiSpec::parse("delta:4").unwrap().profile(3).is_err());
        assert!(PiSpec::parse("1,0").unwrap().profile(3).is_err());
    }
}
