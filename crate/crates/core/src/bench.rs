//! Timing sweeps over `(ℓ, a, c)` and log–log slope fitting.
//!
//! Baselines use exact (dense, non-randomized) subspace extraction, so their
//! measured times are upper bounds relative to randomized-SVD variants.

use std::fs;
use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::alignment::{imakura_change_of_basis, kawakami_change_of_basis, odc_change_of_basis, Method};
use crate::costmodel::{flops, peak_mem};
use crate::error::{Error, Result};
use crate::numkernels::{blas_core, blas_threads, haar_orthogonal, seeded_rng, set_blas_threads, Matrix, SVD_BACKEND};
use crate::protocol::splitmix64;

/// Environment variable capping BLAS/LAPACK threads during sweeps.
pub const THREADS_ENV: &str = "DC_MAX_THREADS";

/// Fraction of available memory a single grid point may claim.
const MEMORY_HEADROOM: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreeParam {
    #[serde(rename = "l", alias = "ell")]
    LatentDim,
    #[serde(rename = "a")]
    AnchorRows,
    #[serde(rename = "c")]
    Users,
}

impl FreeParam {
    pub fn symbol(self) -> &'static str {
        match self {
            FreeParam::LatentDim => "l",
            FreeParam::AnchorRows => "a",
            FreeParam::Users => "c",
        }
    }
}

/// The two held-fixed dimensions; the free one must be left out.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPair {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<usize>,
}

/// Inclusive arithmetic progression `start, start+step, …, ≤ stop`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Range {
    pub start: usize,
    pub step: usize,
    pub stop: usize,
}

impl Range {
    pub fn values(&self) -> Vec<usize> {
        if self.step == 0 || self.start > self.stop {
            return Vec::new();
        }
        (self.start..=self.stop).step_by(self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub free_param: FreeParam,
    pub fixed: FixedPair,
    pub range: Range,
    pub repeats: usize,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the environment thread cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Per-point memory budget in bytes; defaults to a fraction of available memory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_budget_bytes: Option<u64>,
}

/// One grid point's dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub a: usize,
    pub l: usize,
    pub c: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Validation("repeats must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Validation("no methods selected".into()));
        }
        if self.range.values().is_empty() {
            return Err(Error::Validation(format!("empty range {:?}", self.range)));
        }
        let f = self.fixed;
        let (free_given, missing) = match self.free_param {
            FreeParam::AnchorRows => (f.a.is_some(), f.l.is_none() || f.c.is_none()),
            FreeParam::LatentDim => (f.l.is_some(), f.a.is_none() || f.c.is_none()),
            FreeParam::Users => (f.c.is_some(), f.a.is_none() || f.l.is_none()),
        };
        if free_given || missing {
            return Err(Error::Validation(format!(
                "fixed must give exactly the two parameters other than '{}'",
                self.free_param.symbol()
            )));
        }
        for d in self.grid() {
            if d.l == 0 || d.c == 0 || d.a <= d.l {
                return Err(Error::Validation(format!(
                    "grid point {d:?} needs a > l >= 1 and c >= 1"
                )));
            }
        }
        Ok(())
    }

    /// Grid points in range order.
    pub fn grid(&self) -> Vec<Dims> {
        let f = self.fixed;
        self.range
            .values()
            .into_iter()
            .map(|v| match self.free_param {
                FreeParam::AnchorRows => Dims {
                    a: v,
                    l: f.l.unwrap_or(0),
                    c: f.c.unwrap_or(0),
                },
                FreeParam::LatentDim => Dims {
                    a: f.a.unwrap_or(0),
                    l: v,
                    c: f.c.unwrap_or(0),
                },
                FreeParam::Users => Dims {
                    a: f.a.unwrap_or(0),
                    l: f.l.unwrap_or(0),
                    c: v,
                },
            })
            .collect()
    }
}

/// Uniform `[0,1)` projected anchors for one grid point; a pure function of
/// `(seed, a, ℓ, c)`.
pub fn sweep_anchors(d: Dims, seed: u64) -> Vec<Matrix> {
    let key = splitmix64(splitmix64(splitmix64(d.a as u64) ^ d.l as u64) ^ d.c as u64);
    let mut rng = seeded_rng(seed ^ key);
    (0..d.c).map(|_| Matrix::uniform(d.a, d.l, &mut rng)).collect()
}

/// Inputs a timed run needs besides the anchors; built outside the timer.
pub struct MethodInputs {
    pub r: Matrix,
    pub o: Matrix,
}

impl MethodInputs {
    pub fn new(l: usize, seed: u64) -> Self {
        MethodInputs {
            r: Matrix::identity(l),
            o: haar_orthogonal(l, seed),
        }
    }
}

fn run_once(method: Method, anchors: &[Matrix], inputs: &MethodInputs) -> Result<Vec<Matrix>> {
    match method {
        Method::Imakura => imakura_change_of_basis(anchors, &inputs.r),
        Method::Kawakami => kawakami_change_of_basis(anchors),
        Method::Odc => odc_change_of_basis(anchors, &inputs.o),
    }
}

/// Wall-clock seconds of `repeats` runs, after one untimed warm-up when `warmup` is set.
pub fn time_method(
    method: Method,
    anchors: &[Matrix],
    inputs: &MethodInputs,
    repeats: usize,
    warmup: bool,
) -> Result<Vec<f64>> {
    if warmup {
        black_box(run_once(method, anchors, inputs)?);
    }
    let mut out = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t0 = Instant::now();
        let g = run_once(method, black_box(anchors), inputs)?;
        out.push(t0.elapsed().as_secs_f64());
        black_box(g);
    }
    Ok(out)
}

pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of an empty sample");
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    pub free_param: FreeParam,
    pub value: usize,
    pub median_s: f64,
    pub repeats: usize,
    pub threads: usize,
    pub svd_backend: String,
    pub dims: Dims,
    pub samples_s: Vec<f64>,
    pub model_flops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedPoint {
    pub method: Method,
    pub value: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostFingerprint {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
    pub cpu_model: Option<String>,
    pub blas_threads: usize,
    /// OpenBLAS kernel set, e.g. `Haswell`.
    #[serde(default)]
    pub blas_core: String,
    pub svd_backend: String,
    pub note: String,
}

impl HostFingerprint {
    pub fn capture() -> Self {
        let cpu_model = fs::read_to_string("/proc/cpuinfo").ok().and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        });
        HostFingerprint {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            logical_cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            cpu_model,
            blas_threads: blas_threads(),
            blas_core: blas_core(),
            svd_backend: SVD_BACKEND.to_string(),
            note: "baselines use exact dense subspace extraction (Gram matrix + partial symmetric \
                   eigensolve), not randomized SVD; their times are upper bounds"
                .to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub spec: SweepSpec,
    pub host: HostFingerprint,
    pub rows: Vec<SweepRow>,
    pub skipped: Vec<SkippedPoint>,
}

impl SweepReport {
    /// `(value, median_s)` pairs for one method, in grid order.
    pub fn series(&self, method: Method) -> (Vec<f64>, Vec<f64>) {
        self.rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.value as f64, r.median_s))
            .unzip()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "method",
            "free_param",
            "value",
            "median_s",
            "repeats",
            "threads",
            "svd_backend",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.method.name().to_string(),
                r.free_param.symbol().to_string(),
                r.value.to_string(),
                format!("{:e}", r.median_s),
                r.repeats.to_string(),
                r.threads.to_string(),
                r.svd_backend.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_sidecar(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

/// Applies the thread cap (`explicit`, else `DC_MAX_THREADS`) and returns the
/// thread count in effect.
pub fn apply_thread_cap(explicit: Option<usize>) -> usize {
    let cap = explicit.or_else(|| {
        let raw = std::env::var(THREADS_ENV).ok()?;
        match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => Some(n),
            _ => {
                warn!("ignoring {THREADS_ENV}={raw:?}: expected a positive integer");
                None
            }
        }
    });
    if let Some(n) = cap {
        set_blas_threads(n);
    }
    blas_threads()
}

fn available_memory() -> Option<u64> {
    let info = fs::read_to_string("/proc/meminfo").ok()?;
    let line = info.lines().find(|l| l.starts_with("MemAvailable:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Estimated working set of one timed run in bytes: the inputs plus the
/// analytic peak plus the Gram matrix used for subspace extraction.
pub fn working_set_bytes(method: Method, d: Dims) -> f64 {
    let (a, l, c) = (d.a as f64, d.l as f64, d.c as f64);
    let gram = match method {
        Method::Odc => 0.0,
        _ => a.min(c * l).powi(2),
    };
    8.0 * (a * c * l + peak_mem(method, d.a as u64, d.l as u64, d.c as u64) + gram)
}

/// Runs every `(grid point, method)` pair. Points that fail or would exceed
/// the memory budget are recorded as skipped and the sweep continues.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    spec.validate()?;
    let threads = apply_thread_cap(spec.threads);
    let budget = spec
        .memory_budget_bytes
        .map(|b| b as f64)
        .or_else(|| available_memory().map(|b| b as f64 * MEMORY_HEADROOM));
    let host = HostFingerprint::capture();
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for d in spec.grid() {
        let value = match spec.free_param {
            FreeParam::AnchorRows => d.a,
            FreeParam::LatentDim => d.l,
            FreeParam::Users => d.c,
        };
        let fits: Vec<(Method, Option<String>)> = spec
            .methods
            .iter()
            .map(|&m| {
                let need = working_set_bytes(m, d);
                let reason = budget.filter(|&b| need > b).map(|b| {
                    format!(
                        "estimated working set {:.2} GB exceeds budget {:.2} GB",
                        need / 1e9,
                        b / 1e9
                    )
                });
                (m, reason)
            })
            .collect();
        if fits.iter().all(|(_, r)| r.is_some()) {
            for (m, r) in fits {
                skipped.push(SkippedPoint {
                    method: m,
                    value,
                    reason: r.unwrap_or_default(),
                });
            }
            continue;
        }
        let anchors = sweep_anchors(d, spec.seed);
        let inputs = MethodInputs::new(d.l, spec.seed ^ splitmix64(value as u64));
        for (method, over_budget) in fits {
            if let Some(reason) = over_budget {
                warn!("{method} at {}={value}: {reason}", spec.free_param.symbol());
                skipped.push(SkippedPoint { method, value, reason });
                continue;
            }
            match time_method(method, &anchors, &inputs, spec.repeats, true) {
                Ok(samples) => {
                    let med = median(&samples);
                    debug!("{method} {}={value}: median {med:.4e} s", spec.free_param.symbol());
                    rows.push(SweepRow {
                        method,
                        free_param: spec.free_param,
                        value,
                        median_s: med,
                        repeats: spec.repeats,
                        threads,
                        svd_backend: SVD_BACKEND.to_string(),
                        dims: d,
                        samples_s: samples,
                        model_flops: flops(method, d.a as u64, d.l as u64, d.c as u64).total,
                    });
                }
                Err(e) => {
                    warn!("{method} at {}={value} skipped: {e}", spec.free_param.symbol());
                    skipped.push(SkippedPoint {
                        method,
                        value,
                        reason: e.to_string(),
                    });
                }
            }
        }
    }
    Ok(SweepReport {
        spec: spec.clone(),
        host,
        rows,
        skipped,
    })
}

/// `log₁₀ t = κ + α·log₁₀ x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha: f64,
    pub kappa: f64,
    pub r_squared: f64,
}

/// `t = β₀ + β₁·c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// Seconds per additional user.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::Fit(format!("{} x values for {} y values", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite input".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= f64::EPSILON * xs.iter().map(|x| x * x).sum::<f64>() {
        return Err(Error::Fit("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((slope, intercept, r2.clamp(0.0, 1.0)))
}

pub fn ols_loglog(xs: &[f64], ts: &[f64]) -> Result<FitResult> {
    if let Some(v) = xs.iter().chain(ts).find(|v| v.is_nan() || **v <= 0.0) {
        return Err(Error::Fit(format!("log-log fit needs positive values, got {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.log10()).collect();
    let lt: Vec<f64> = ts.iter().map(|t| t.log10()).collect();
    let (alpha, kappa, r_squared) = ols(&lx, &lt)?;
    Ok(FitResult {
        alpha,
        kappa,
        r_squared,
    })
}

pub fn incremental_latency(cs: &[usize], ts: &[f64]) -> Result<LinearFit> {
    let xs: Vec<f64> = cs.iter().map(|&c| c as f64).collect();
    let (slope, intercept, r_squared) = ols(&xs, ts)?;
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn spec(methods: Vec<Method>, repeats: usize) -> SweepSpec {
        SweepSpec {
            free_param: FreeParam::LatentDim,
            fixed: FixedPair {
                a: Some(60),
                l: None,
                c: Some(3),
            },
            range: Range {
                start: 2,
                step: 2,
                stop: 8,
            },
            repeats,
            methods,
            seed: 5,
            threads: Some(1),
            memory_budget_bytes: None,
        }
    }

    #[test]
    fn range_values() {
        assert_eq!(
            Range {
                start: 50,
                step: 50,
                stop: 200
            }
            .values(),
            vec![50, 100, 150, 200]
        );
        assert_eq!(
            Range {
                start: 5,
                step: 3,
                stop: 10
            }
            .values(),
            vec![5, 8]
        );
        assert!(Range {
            start: 5,
            step: 0,
            stop: 10
        }
        .values()
        .is_empty());
    }

    #[test]
    fn spec_validation() {
        assert!(spec(Method::ALL.to_vec(), 1).validate().is_ok());
        let mut s = spec(vec![Method::Odc], 0);
        assert!(s.validate().is_err());
        s.repeats = 1;
        s.fixed.l = Some(3);
        assert!(s.validate().is_err());
        let mut s = spec(vec![Method::Odc], 1);
        s.range.stop = 100;
        assert!(s.validate().is_err(), "l reaches a");
    }

    #[test]
    fn spec_json() {
        let text = r#"{"free_param":"l","fixed":{"a":1000,"c":50},"range":{"start":50,"step":50,"stop":400},
                       "repeats":5,"methods":["odc","imakura"],"seed":1}"#;
        let s: SweepSpec = serde_json::from_str(text).unwrap();
        assert_eq!(s.free_param, FreeParam::LatentDim);
        assert_eq!(s.grid().len(), 8);
        assert!(s.validate().is_ok());
    }

    #[test]
    fn sweep_rows_ordered_and_complete() {
        let report = run_sweep(&spec(Method::ALL.to_vec(), 1)).unwrap();
        assert_eq!(report.rows.len(), 12);
        assert!(report.skipped.is_empty());
        let values: Vec<usize> = report.rows.iter().map(|r| r.value).collect();
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
        for r in &report.rows {
            assert_eq!(r.samples_s.len(), 1);
            assert_eq!(r.median_s, r.samples_s[0]);
            assert_eq!(r.threads, 1);
        }
    }

    #[test]
    fn anchors_are_deterministic() {
        let d = Dims { a: 30, l: 4, c: 3 };
        assert_eq!(sweep_anchors(d, 9), sweep_anchors(d, 9));
        assert_ne!(sweep_anchors(d, 9), sweep_anchors(d, 10));
        assert!(sweep_anchors(d, 9)[0].as_slice().iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn tiny_budget_skips() {
        let mut s = spec(vec![Method::Imakura, Method::Odc], 1);
        s.memory_budget_bytes = Some(1);
        let report = run_sweep(&s).unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.skipped.len(), 8);
    }

    #[test]
    fn odc_flops_below_baselines_on_grid() {
        for d in spec(Method::ALL.to_vec(), 1).grid() {
            let (a, l, c) = (d.a as u64, d.l as u64, d.c as u64);
            let odc = flops(Method::Odc, a, l, c).total;
            assert!(odc < flops(Method::Imakura, a, l, c).total);
            assert!(odc < flops(Method::Kawakami, a, l, c).total);
        }
    }

    #[test]
    fn csv_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_sweep(&spec(vec![Method::Odc], 2)).unwrap();
        report.write_csv(dir.path().join("s.csv")).unwrap();
        report.write_sidecar(dir.path().join("s.json")).unwrap();
        let text = fs::read_to_string(dir.path().join("s.csv")).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "method,free_param,value,median_s,repeats,threads,svd_backend"
        );
        assert_eq!(text.lines().count(), 5);
        let back: SweepReport = serde_json::from_slice(&fs::read(dir.path().join("s.json")).unwrap()).unwrap();
        assert_eq!(back.spec, report.spec);
    }

    #[test]
    fn median_cases() {
        assert_eq!(median(&[3.0]), 3.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn exact_power_law() {
        let xs = [10.0, 20.0, 40.0, 80.0, 160.0];
        let ts: Vec<f64> = xs.iter().map(|x| 5.0 * x * x).collect();
        let fit = ols_loglog(&xs, &ts).unwrap();
        assert!((fit.alpha - 2.0).abs() < 1e-10);
        assert!((fit.kappa - 5f64.log10()).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_times() {
        let fit = ols_loglog(&[1.0, 2.0, 3.0], &[0.5, 0.5, 0.5]).unwrap();
        assert!(fit.alpha.abs() < 1e-15);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = seeded_rng(17);
        let xs: Vec<f64> = (1..=20).map(|i| 10.0 * i as f64).collect();
        let ts: Vec<f64> = xs
            .iter()
            .map(|x| 3.0 * x.powf(1.75) * (1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0)))
            .collect();
        let fit = ols_loglog(&xs, &ts).unwrap();
        assert!((1.70..=1.80).contains(&fit.alpha), "{}", fit.alpha);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(
            ols_loglog(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(Error::Fit(_))
        ));
        assert!(matches!(ols_loglog(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::Fit(_))));
        assert!(matches!(
            ols_loglog(&[1.0, -2.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(Error::Fit(_))
        ));
    }

    #[test]
    fn linear_latency() {
        let cs = [10, 20, 30, 40, 50];
        let ts: Vec<f64> = cs.iter().map(|&c| 0.001 * c as f64).collect();
        let fit = incremental_latency(&cs, &ts).unwrap();
        assert!((fit.slope - 0.001).abs() < 1e-15);
        let ts: Vec<f64> = cs.iter().map(|&c| 2.0 + 0.25 * c as f64).collect();
        let fit = incremental_latency(&cs, &ts).unwrap();
        assert!((fit.slope - 0.25).abs() < 1e-10 && (fit.intercept - 2.0).abs() < 1e-10);
    }
}
