//! Text checkpoint holding a parametrization and its parameter vector.
//!
//! ```text
//! # stiffparam checkpoint v1
//! model = mlp
//! input_width = 5
//! hidden_layers = 4
//! hidden_width = 5
//! activation = tanh
//! layout = b_in,W_1,b_1,...,W_L,b_L,w_out,b_out (row-major weights)
//! seed = 7
//! count = 131
//! theta
//! -1.2345678901234567e-1
//! ...
//! ```
//!
//! Values are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::{FourierBasis, MlpArchitecture, Model, ParamVector, Parametrization};
use crate::error::{Error, Result};

const MAGIC: &str = "# stiffparam checkpoint v1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub theta: ParamVector,
    pub seed: Option<u64>,
}

impl Checkpoint {
    pub fn new(model: Model, theta: ParamVector, seed: Option<u64>) -> Result<Self> {
        crate::error::check_len("checkpoint parameters", model.param_count(), theta.len())?;
        Ok(Self { model, theta, seed })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{MAGIC}").unwrap();
        match &self.model {
            Model::Mlp(a) => {
                writeln!(s, "model = mlp").unwrap();
                writeln!(s, "input_width = {}", a.input_width).unwrap();
                writeln!(s, "hidden_layers = {}", a.hidden_layers).unwrap();
                writeln!(s, "hidden_width = {}", a.hidden_width).unwrap();
                writeln!(s, "activation = tanh").unwrap();
                writeln!(
                    s,
                    "layout = b_in,W_1,b_1,...,W_L,b_L,w_out,b_out (row-major weights)"
                )
                .unwrap();
            }
            Model::Fourier(f) => {
                writeln!(s, "model = fourier").unwrap();
                writeln!(s, "k_max = {}", f.k_max).unwrap();
                writeln!(s, "layout = c_0,a_1,b_1,...,a_K,b_K (cos/sin pairs)").unwrap();
            }
        }
        if let Some(seed) = self.seed {
            writeln!(s, "seed = {seed}").unwrap();
        }
        writeln!(s, "count = {}", self.theta.len()).unwrap();
        writeln!(s, "theta").unwrap();
        for v in self.theta.iter() {
            writeln!(s, "{v:.16e}").unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(MAGIC) {
            return Err(Error::Parse("missing checkpoint header".into()));
        }
        let mut header = std::collections::BTreeMap::new();
        for line in lines.by_ref() {
            let line = line.trim();
            if line == "theta" {
                break;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header line `{line}`")))?;
            header.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get_usize = |key: &str| -> Result<usize> {
            header
                .get(key)
                .ok_or_else(|| Error::Parse(format!("missing `{key}`")))?
                .parse()
                .map_err(|e| Error::Parse(format!("`{key}`: {e}")))
        };
        let model = match header.get("model").map(String::as_str) {
            Some("mlp") => {
                if let Some(act) = header.get("activation") {
                    if act != "tanh" {
                        return Err(Error::Unsupported(format!("activation `{act}`")));
                    }
                }
                Model::Mlp(MlpArchitecture::new(
                    get_usize("input_width")?,
                    get_usize("hidden_layers")?,
                    get_usize("hidden_width")?,
                )?)
            }
            Some("fourier") => Model::Fourier(FourierBasis::new(get_usize("k_max")?)),
            other => return Err(Error::Parse(format!("unknown model {other:?}"))),
        };
        let seed = match header.get("seed") {
            Some(s) => Some(
                s.parse()
                    .map_err(|e| Error::Parse(format!("`seed`: {e}")))?,
            ),
            None => None,
        };
        let count = get_usize("count")?;
        let theta: Vec<f64> = lines
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("theta entry `{l}`: {e}")))
            })
            .collect::<Result<_>>()?;
        crate::error::check_len("checkpoint count", count, theta.len())?;
        let theta = ParamVector::from_vec(theta);
        if !theta.is_finite() {
            return Err(Error::Parse("non-finite parameter".into()));
        }
        Self::new(model, theta, seed)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}
