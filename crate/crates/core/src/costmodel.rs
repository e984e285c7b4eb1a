//! Closed-form FLOP, peak-memory, traffic and transfer-time estimates.
//!
//! The FLOP formulas use `pmin = min(a, cℓ)` and `qmax = max(a, cℓ)`; the
//! traffic model's bit-width is `bits_per_scalar`. The two are unrelated.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alignment::Method;
use crate::error::{Error, Result};

/// Inputs of the traffic/time model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    /// Anchor rows.
    pub a: u64,
    /// Feature dimension.
    pub m: u64,
    /// Latent dimension.
    #[serde(alias = "ell")]
    pub l: u64,
    /// Number of users.
    pub c: u64,
    /// Mean private samples per user.
    pub n_bar: f64,
    /// Parameter count of the downstream model.
    #[serde(alias = "N")]
    pub n_params: u64,
    #[serde(alias = "q")]
    pub bits_per_scalar: u32,
    /// Anchor replication factor; defaults to `c` (unicast distribution).
    #[serde(default)]
    pub gamma: Option<f64>,
    /// FL rounds.
    #[serde(alias = "R", default = "default_rounds")]
    pub rounds: u64,
    /// FL per-round participation fraction.
    #[serde(alias = "p", default = "default_participation")]
    pub participation: f64,
    /// Bottleneck goodput in bits/s.
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Round-trip time in seconds.
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_rounds() -> u64 {
    1
}

fn default_participation() -> f64 {
    1.0
}

fn default_beta() -> f64 {
    1e9
}

fn default_tau() -> f64 {
    0.05
}

impl CostParams {
    /// The 100-hospital example: `c=100, n̄=1000, a=1000, m=784, ℓ=100,
    /// N=2.5e7, q=32, γ=c`, one full-participation FL round.
    pub fn healthcare_example() -> Self {
        CostParams {
            a: 1000,
            m: 784,
            l: 100,
            c: 100,
            n_bar: 1000.0,
            n_params: 25_000_000,
            bits_per_scalar: 32,
            gamma: None,
            rounds: 1,
            participation: 1.0,
            beta: 1e9,
            tau: 0.05,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(self.c as f64)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("m", self.m),
            ("l", self.l),
            ("c", self.c),
            ("n_params", self.n_params),
        ] {
            if v == 0 {
                return Err(Error::Validation(format!("{name} must be positive")));
            }
        }
        if self.bits_per_scalar == 0 {
            return Err(Error::Validation("bits_per_scalar must be positive".into()));
        }
        if !(self.n_bar.is_finite() && self.n_bar > 0.0) {
            return Err(Error::Validation(format!("n_bar must be positive, got {}", self.n_bar)));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::Validation(format!(
                "participation must lie in (0, 1], got {}",
                self.participation
            )));
        }
        let g = self.gamma();
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::Validation(format!(
                "gamma must be finite and non-negative, got {g}"
            )));
        }
        if self.beta.is_nan() || self.beta <= 0.0 {
            return Err(Error::Validation(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::Validation(format!("tau must be non-negative, got {}", self.tau)));
        }
        Ok(())
    }

    fn bytes_per_scalar(&self) -> f64 {
        self.bits_per_scalar as f64 / 8.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopBreakdown {
    pub method: Method,
    /// Sum of `terms`, accumulated in order.
    pub total: f64,
    pub terms: Vec<Term>,
    pub pmin: f64,
    pub qmax: f64,
}

fn breakdown(method: Method, pmin: f64, qmax: f64, terms: Vec<(&str, f64)>) -> FlopBreakdown {
    let terms: Vec<Term> = terms
        .into_iter()
        .map(|(l, v)| Term {
            label: l.to_string(),
            value: v,
        })
        .collect();
    let total = terms.iter().map(|t| t.value).sum();
    FlopBreakdown {
        method,
        total,
        terms,
        pmin,
        qmax,
    }
}

fn pq(a: f64, l: f64, c: f64) -> (f64, f64) {
    let cl = c * l;
    (a.min(cl), a.max(cl))
}

/// `4·qmax·pmin² + 8·pmin³ + (6c+2)aℓ² + 8cℓ³`.
pub fn flops_imakura(a: u64, l: u64, c: u64) -> FlopBreakdown {
    let (a, l, c) = (a as f64, l as f64, c as f64);
    let (p, q) = pq(a, l, c);
    breakdown(
        Method::Imakura,
        p,
        q,
        vec![
            ("svd_qp2", 4.0 * q * p * p),
            ("svd_p3", 8.0 * p * p * p),
            ("pinv_and_products", (6.0 * c + 2.0) * a * l * l),
            ("pinv_svd", 8.0 * c * l * l * l),
        ],
    )
}

/// `4·qmax·pmin² + 8·pmin³ + c(2aℓ² + ⅔ℓ³)`.
pub fn flops_kawakami(a: u64, l: u64, c: u64) -> FlopBreakdown {
    let (a, l, c) = (a as f64, l as f64, c as f64);
    let (p, q) = pq(a, l, c);
    breakdown(
        Method::Kawakami,
        p,
        q,
        vec![
            ("svd_qp2", 4.0 * q * p * p),
            ("svd_p3", 8.0 * p * p * p),
            ("qr_and_solves", c * (2.0 * a * l * l + 2.0 / 3.0 * l * l * l)),
        ],
    )
}

/// `2caℓ² + 16cℓ³`.
pub fn flops_odc(a: u64, l: u64, c: u64) -> FlopBreakdown {
    let (a, l, c) = (a as f64, l as f64, c as f64);
    let (p, q) = pq(a, l, c);
    breakdown(
        Method::Odc,
        p,
        q,
        vec![
            ("cross_products", 2.0 * c * a * l * l),
            ("small_svds", 16.0 * c * l * l * l),
        ],
    )
}

pub fn flops(method: Method, a: u64, l: u64, c: u64) -> FlopBreakdown {
    match method {
        Method::Imakura => flops_imakura(a, l, c),
        Method::Kawakami => flops_kawakami(a, l, c),
        Method::Odc => flops_odc(a, l, c),
    }
}

/// Leading-term peak memory in scalars.
pub fn peak_mem(method: Method, a: u64, l: u64, c: u64) -> f64 {
    let (a, l, c) = (a as f64, l as f64, c as f64);
    let base = a * c * l + c * l * l;
    match method {
        Method::Imakura => base + a * l,
        Method::Kawakami => base,
        Method::Odc => base + 2.0 * l * l,
    }
}

/// Aggregate DC traffic in bytes, split by phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcTraffic {
    /// All users' `X̃_i` and `A_i`.
    pub uplink: f64,
    /// All users' `G_i` and the trained model.
    pub downlink: f64,
    /// Anchor distribution, `γ` copies.
    pub anchor: f64,
    pub total: f64,
}

pub fn dc_traffic(p: &CostParams) -> DcTraffic {
    let s = p.bytes_per_scalar();
    let (a, m, l, c) = (p.a as f64, p.m as f64, p.l as f64, p.c as f64);
    let n = p.n_params as f64;
    let uplink = s * c * (p.n_bar + a) * l;
    let downlink = s * c * (l * l + n);
    let anchor = s * p.gamma() * a * m;
    DcTraffic {
        uplink,
        downlink,
        anchor,
        total: uplink + downlink + anchor,
    }
}

/// `2Rpc·Nq/8` bytes.
pub fn fl_traffic(p: &CostParams) -> f64 {
    2.0 * p.rounds as f64 * p.participation * p.c as f64 * p.n_params as f64 * p.bytes_per_scalar()
}

/// Rounds at which cumulative FL traffic equals one-shot DC traffic.
pub fn break_even_rounds(p: &CostParams) -> f64 {
    let (a, m, l, c) = (p.a as f64, p.m as f64, p.l as f64, p.c as f64);
    let n = p.n_params as f64;
    let denom = 2.0 * p.participation * n;
    (p.n_bar + a) * l / denom + (l * l + n) / denom + p.gamma() * a * m / (denom * c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Dc,
    Fl,
}

/// `8B/β + 3τ` for DC and `8B/β + 2Rτ` for FL, in seconds.
pub fn transfer_time(p: &CostParams, which: Protocol) -> f64 {
    match which {
        Protocol::Dc => 8.0 * dc_traffic(p).total / p.beta + 3.0 * p.tau,
        Protocol::Fl => 8.0 * fl_traffic(p) / p.beta + 2.0 * p.rounds as f64 * p.tau,
    }
}

/// Bytes as decimal gigabytes, e.g. `"10.40 GB"`.
pub fn format_gb(bytes: f64) -> String {
    format!("{:.2} GB", bytes / 1e9)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryEstimate {
    pub method: Method,
    pub scalars: f64,
    pub bytes: f64,
}

/// Everything the `cost` command reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub params: CostParams,
    pub dc_traffic: DcTraffic,
    pub dc_traffic_gb: String,
    pub fl_traffic: f64,
    pub fl_traffic_gb: String,
    pub break_even_rounds: f64,
    pub break_even_rounds_ceil: u64,
    pub time_dc_s: f64,
    pub time_fl_s: f64,
    /// Present when `a > ℓ`.
    pub flops: Vec<FlopBreakdown>,
    pub peak_memory: Vec<MemoryEstimate>,
}

pub fn cost_report(p: &CostParams) -> Result<CostReport> {
    p.validate()?;
    let dc = dc_traffic(p);
    let fl = fl_traffic(p);
    let rstar = break_even_rounds(p);
    let (flops_list, mem) = if p.a > p.l {
        (
            Method::ALL.iter().map(|&m| flops(m, p.a, p.l, p.c)).collect(),
            Method::ALL
                .iter()
                .map(|&m| {
                    let s = peak_mem(m, p.a, p.l, p.c);
                    MemoryEstimate {
                        method: m,
                        scalars: s,
                        bytes: s * 8.0,
                    }
                })
                .collect(),
        )
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(CostReport {
        params: p.clone(),
        dc_traffic_gb: format_gb(dc.total),
        dc_traffic: dc,
        fl_traffic: fl,
        fl_traffic_gb: format_gb(fl),
        break_even_rounds: rstar,
        break_even_rounds_ceil: rstar.ceil() as u64,
        time_dc_s: transfer_time(p, Protocol::Dc),
        time_fl_s: transfer_time(p, Protocol::Fl),
        flops: flops_list,
        peak_memory: mem,
    })
}

/// `R*` over a grid of mean sample counts and model sizes, as CSV rows
/// `n_bar,n_params,participation,r_star`.
pub fn write_rstar_grid(
    path: impl AsRef<Path>,
    base: &CostParams,
    n_bars: &[f64],
    n_params: &[u64],
    ps: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n_bar", "n_params", "participation", "r_star"])?;
    for &p in ps {
        for &nb in n_bars {
            for &np in n_params {
                let params = CostParams {
                    n_bar: nb,
                    n_params: np,
                    participation: p,
                    ..base.clone()
                };
                params.validate()?;
                w.write_record([
                    nb.to_string(),
                    np.to_string(),
                    p.to_string(),
                    break_even_rounds(&params).to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
