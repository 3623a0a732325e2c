//! Model parameters, norms and the derived constants shared by every sampler.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// The norm `|·|` used for edge lengths, balls and segment costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Norm {
    L1,
    #[default]
    L2,
    LInf,
}

impl Norm {
    pub const ALL: [Norm; 3] = [Norm::L1, Norm::L2, Norm::LInf];

    pub fn as_str(self) -> &'static str {
        match self {
            Norm::L1 => "L1",
            Norm::L2 => "L2",
            Norm::LInf => "LINF",
        }
    }

    /// Lebesgue volume of the unit ball of this norm in dimension `d`.
    pub fn unit_ball_volume(self, d: usize) -> f64 {
        let df = d as f64;
        match self {
            Norm::L2 => PI.powf(df / 2.0) / gamma(df / 2.0 + 1.0),
            Norm::L1 => 2f64.powi(d as i32) / gamma(df + 1.0),
            Norm::LInf => 2f64.powi(d as i32),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L1" | "ABS1" => Ok(Norm::L1),
            "L2" | "EUCLID" | "EUCLIDEAN" => Ok(Norm::L2),
            "LINF" | "L_INF" | "INF" | "MAX" => Ok(Norm::LInf),
            other => Err(Error::Parse(format!("unknown norm `{other}`"))),
        }
    }
}

/// `|x|` in the chosen norm.
pub fn norm_len(x: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::L1 => x.iter().map(|v| v.abs()).sum(),
        Norm::L2 => {
            if x.len() == 1 {
                x[0].abs()
            } else {
                x.iter().map(|v| v * v).sum::<f64>().sqrt()
            }
        }
        Norm::LInf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

/// `|a - b|` in the chosen norm without allocating.
pub fn norm_dist(a: &[f64], b: &[f64], norm: Norm) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    match norm {
        Norm::L1 => a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum(),
        Norm::L2 => {
            if a.len() == 1 {
                (a[0] - b[0]).abs()
            } else {
                a.iter()
                    .zip(b)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt()
            }
        }
        Norm::LInf => a
            .iter()
            .zip(b)
            .fold(0.0, |m, (p, q)| m.max((p - q).abs())),
    }
}

/// Euclidean length, used for the canonical ordering of edge endpoints.
pub fn euclid_len(x: &[f64]) -> f64 {
    norm_len(x, Norm::L2)
}

/// Parameters of the long-range percolation model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: usize,
    pub s: f64,
    pub beta: f64,
    /// Thinning parameter of the subadditivity randomization, `0 < eta <= 1`.
    pub eta: f64,
    pub norm: Norm,
}

impl ModelParams {
    pub fn new(d: usize, s: f64, beta: f64) -> Result<Self> {
        let p = ModelParams {
            d,
            s,
            beta,
            eta: 1.0,
            norm: Norm::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        self.eta = eta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        self.beta = beta;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Domain("dimension d must be at least 1".into()));
        }
        let d = self.d as f64;
        if !(self.s > d && self.s < 2.0 * d) {
            return Err(Error::Domain(format!(
                "decay exponent s = {} must lie in (d, 2d) = ({}, {})",
                self.s,
                d,
                2.0 * d
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Domain(format!("beta = {} must be > 0", self.beta)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Domain(format!("eta = {} must lie in (0, 1]", self.eta)));
        }
        Ok(())
    }

    pub fn derive(&self) -> Result<DerivedConstants> {
        derive_constants(self)
    }

    /// `gamma = s / 2d`.
    pub fn gamma(&self) -> f64 {
        self.s / (2.0 * self.d as f64)
    }

    /// `Delta = 1 / log2(1 / gamma)`.
    pub fn delta(&self) -> f64 {
        1.0 / (1.0 / self.gamma()).log2()
    }

    /// Canonical text of the parameters; hashed into every output file.
    pub fn canonical_string(&self) -> String {
        format!(
            "d={};s={};beta={};eta={};norm={}",
            self.d,
            crate::io::fmt_f64(self.s),
            crate::io::fmt_f64(self.beta),
            crate::io::fmt_f64(self.eta),
            self.norm
        )
    }
}

/// Constants derived from [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub gamma: f64,
    pub delta: f64,
    pub gamma_tilde: f64,
    /// Volume of the unit ball of the chosen norm.
    pub unit_ball_volume: f64,
    /// Volume of `{(z, z') : |z|^{2d} + |z'|^{2d} <= 1}`, equal to `pi V^2 / 4`.
    pub c0: f64,
}

pub fn derive_constants(params: &ModelParams) -> Result<DerivedConstants> {
    params.validate()?;
    let gamma = params.gamma();
    let v = params.norm.unit_ball_volume(params.d);
    Ok(DerivedConstants {
        gamma,
        delta: params.delta(),
        gamma_tilde: 0.5 * (1.0 + gamma),
        unit_ball_volume: v,
        c0: PI * v * v / 4.0,
    })
}

/// Work budget in number of sampled items (edges or candidates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_items: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_items: 4.0e7 }
    }
}

impl Budget {
    pub fn new(max_items: f64) -> Self {
        Budget { max_items }
    }

    pub fn check(&self, estimate: f64) -> Result<()> {
        if estimate.is_finite() && estimate <= self.max_items {
            Ok(())
        } else {
            Err(Error::Budget {
                estimate,
                budget: self.max_items,
            })
        }
    }
}
