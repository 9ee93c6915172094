//! Plain-text run configuration: one `key = value` per line, `#` starts a
//! comment. Relative paths are resolved against the file's directory.
//!
//! ```text
//! # model
//! kappa = 50
//! mu = 0.01
//! nu = 0.01
//! lambda = 20
//! p = 3
//! tau = 0.05
//! T = 1
//! # anisotropy: l1 | euclid | ngon
//! family = l1
//! epsilon = 0.1
//! # files
//! input = noisy.pgm
//! output_dir = out
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::anisotropy::{Anisotropy, Family};
use crate::energy::ModelParams;
use crate::error::{Error, Result};
use crate::solver::SolveConfig;
use crate::theory::EmbeddingConstants;

/// Anisotropy family and its parameters as written in a config.
#[derive(Debug, Clone, PartialEq)]
pub struct AnisotropySpec {
    /// `l1`, `euclid` or `ngon`.
    pub family: String,
    pub epsilon: f64,
    /// Number of directions for `ngon` (ignored when `weights` is given).
    pub n: Option<usize>,
    /// Per-direction weights for `ngon`.
    pub weights: Option<Vec<f64>>,
}

impl AnisotropySpec {
    pub fn build(&self) -> Result<Anisotropy<f64>> {
        match self.family.as_str() {
            "l1" => Anisotropy::smoothed_l1(self.epsilon),
            "euclid" => Anisotropy::smoothed_euclid(self.epsilon),
            "ngon" => {
                let weights = match (&self.weights, self.n) {
                    (Some(w), _) => w.clone(),
                    (None, Some(n)) => vec![1.0; n],
                    (None, None) => {
                        return Err(Error::Config("family = ngon needs n or weights".into()))
                    }
                };
                Anisotropy::new(Family::SmoothedNgon { weights }, self.epsilon)
            }
            other => Err(Error::Config(format!(
                "unknown anisotropy family {other:?}; expected l1, euclid or ngon"
            ))),
        }
    }
}

/// Everything a CLI run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams<f64>,
    pub anisotropy: AnisotropySpec,
    pub solver: SolveConfig<f64>,
    /// Overrides of the default embedding constants.
    pub c_poincare: Option<f64>,
    pub c_sob_1: Option<f64>,
    pub c_sob_2: Option<f64>,
    /// Override of `|∇γ|_{W^{1,∞}}` in the threshold formulas.
    pub gamma_w1inf: Option<f64>,
    /// Noisy image `u_org`.
    pub input: Option<PathBuf>,
    /// Initial image `u₀`; defaults to `input`.
    pub u0: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Levels of written PGM files.
    pub maxval: u16,
    /// Extra random initial guesses for the orientation solve (diagnostic).
    pub multistart: usize,
    pub seed: u64,
}

const KEYS: &[&str] = &[
    "kappa", "mu", "nu", "lambda", "p", "tau", "T", "family", "epsilon", "n", "weights",
    "tol_res", "max_outer", "max_inner", "armijo_c", "backtrack", "init_step", "c_poincare",
    "c_sob_1", "c_sob_2", "gamma_w1inf", "input", "u0", "output_dir", "maxval", "multistart",
    "seed",
];

const REQUIRED: &[&str] = &["kappa", "mu", "nu", "lambda", "p", "tau", "T", "family", "epsilon"];

fn num<V: std::str::FromStr>(key: &str, v: &str) -> Result<V> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

impl RunConfig {
    /// Reads and validates a configuration file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    /// Parses and validates configuration text; paths are taken relative to `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut offset = 0;
        for line in text.lines() {
            let content = line.split('#').next().unwrap_or("").trim();
            if !content.is_empty() {
                let (k, v) = content.split_once('=').ok_or_else(|| Error::Parse {
                    offset,
                    message: format!("expected key = value, got {content:?}"),
                })?;
                let (k, v) = (k.trim(), v.trim());
                let key = if k == "t_final" { "T" } else { k };
                if !KEYS.contains(&key) {
                    return Err(Error::Config(format!("unknown key {k:?}")));
                }
                if map.insert(key.to_string(), v.to_string()).is_some() {
                    return Err(Error::Config(format!("duplicate key {k:?}")));
                }
            }
            offset += line.len() + 1;
        }
        if let Some(missing) = REQUIRED.iter().find(|k| !map.contains_key(**k)) {
            return Err(Error::Config(format!("missing required key {missing:?}")));
        }
        let get = |k: &str| map.get(k).map(String::as_str);
        let real = |k: &str| -> Result<f64> { num(k, get(k).expect("required key")) };
        let opt_real = |k: &str| -> Result<Option<f64>> { get(k).map(|v| num(k, v)).transpose() };
        let path_of = |k: &str| get(k).map(|v| base.join(v));

        let params = ModelParams {
            kappa: real("kappa")?,
            mu: real("mu")?,
            nu: real("nu")?,
            lambda: real("lambda")?,
            p: real("p")?,
            tau: real("tau")?,
            t_final: real("T")?,
        };
        let weights = get("weights")
            .map(|w| {
                w.split(',')
                    .map(|s| num::<f64>("weights", s.trim()))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        let anisotropy = AnisotropySpec {
            family: get("family").expect("required key").to_string(),
            epsilon: real("epsilon")?,
            n: get("n").map(|v| num("n", v)).transpose()?,
            weights,
        };
        let d = SolveConfig::<f64>::default();
        let solver = SolveConfig {
            tol_res: opt_real("tol_res")?.unwrap_or(d.tol_res),
            max_outer: get("max_outer").map(|v| num("max_outer", v)).transpose()?.unwrap_or(d.max_outer),
            max_inner: get("max_inner").map(|v| num("max_inner", v)).transpose()?.unwrap_or(d.max_inner),
            armijo_c: opt_real("armijo_c")?.unwrap_or(d.armijo_c),
            backtrack: opt_real("backtrack")?.unwrap_or(d.backtrack),
            init_step: opt_real("init_step")?.unwrap_or(d.init_step),
        };
        let cfg = Self {
            params,
            anisotropy,
            solver,
            c_poincare: opt_real("c_poincare")?,
            c_sob_1: opt_real("c_sob_1")?,
            c_sob_2: opt_real("c_sob_2")?,
            gamma_w1inf: opt_real("gamma_w1inf")?,
            input: path_of("input"),
            u0: path_of("u0"),
            output_dir: path_of("output_dir").unwrap_or_else(|| base.to_path_buf()),
            maxval: get("maxval").map(|v| num("maxval", v)).transpose()?.unwrap_or(255),
            multistart: get("multistart").map(|v| num("multistart", v)).transpose()?.unwrap_or(0),
            seed: get("seed").map(|v| num("seed", v)).transpose()?.unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks (A0) and (A2) and the solver settings; (A1)/(A3) are checked on
    /// the images once loaded.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.anisotropy.build()?;
        self.solver.validate()?;
        if self.maxval == 0 {
            return Err(Error::Config("maxval must be at least 1".into()));
        }
        if let Some(g) = self.gamma_w1inf {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::Config(format!("gamma_w1inf must be positive, got {g}")));
            }
        }
        for (k, v) in [
            ("c_poincare", self.c_poincare),
            ("c_sob_1", self.c_sob_1),
            ("c_sob_2", self.c_sob_2),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::Config(format!("{k} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Default constants for the rectangle `(0,a)×(0,b)` with overrides applied.
    pub fn embeddings(&self, a: f64, b: f64) -> Result<EmbeddingConstants<f64>> {
        let d = EmbeddingConstants::default_for(a, b, self.params.p)?;
        EmbeddingConstants::new(
            self.c_poincare.unwrap_or(d.c_poincare),
            self.c_sob_1.unwrap_or(d.c_sob_1),
            self.c_sob_2.unwrap_or(d.c_sob_2),
        )
    }
}
