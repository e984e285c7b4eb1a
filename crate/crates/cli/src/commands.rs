use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use dc_core::alignment::{
    align_imakura, align_kawakami, align_odc, concordance_report, AlignmentResult, Method, OdcTarget, TargetRecord,
};
use dc_core::bench::{incremental_latency, ols_loglog, run_sweep, FreeParam, SweepSpec};
use dc_core::costmodel::{cost_report, write_rstar_grid, CostParams, CostReport};
use dc_core::numkernels::{seeded_rng, set_blas_threads, Matrix};
use dc_core::protocol::{collude_reconstruct, make_scenario, ScenarioSpec};
use dc_core::Error;
use log::info;
use serde_json::{json, Value};

use crate::layout::{self, ensure_dir, load_bundles, load_json, load_matrix, load_private, save_json, save_matrix};
use crate::{Cli, Command, Format, GlobalOpts, MethodArg, TargetOpts};

/// Tolerance for declaring a collusion reconstruction exact.
const RECOVERY_TOL: f64 = 1e-8;

pub fn run(cli: &Cli) -> Result<ExitCode> {
    let g = &cli.global;
    if let Some(t) = g.threads {
        if t == 0 {
            return Err(Error::Validation("--threads must be positive".into()).into());
        }
        set_blas_threads(t);
    }
    match &cli.command {
        Command::Gen => cmd_gen(g),
        Command::Align { input, target } => cmd_align(g, input, target),
        Command::Verify { input, target } => cmd_verify(g, input, target),
        Command::Cost { rstar_grid } => cmd_cost(g, rstar_grid.as_deref()),
        Command::Bench => cmd_bench(g),
        Command::Demo { input, user } => cmd_demo(g, input, *user),
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str, cmd: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Error::Validation(format!("`{cmd}` requires {flag}")).into())
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn print_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io(e).into()),
        _ => Ok(()),
    }
}

/// Prints `report` and, when `out` is given, writes it there too.
fn emit(report: &Value, out: Option<&Path>) -> Result<()> {
    print_stdout(&format!(
        "{}\n",
        serde_json::to_string_pretty(report).map_err(Error::from)?
    ))?;
    if let Some(path) = out {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            ensure_dir(parent)?;
        }
        save_json(path, report)?;
    }
    Ok(())
}

fn cmd_gen(g: &GlobalOpts) -> Result<ExitCode> {
    let mut spec: ScenarioSpec = load_json(required(&g.config, "--config", "gen")?)?;
    let out = required(&g.out, "--out", "gen")?;
    if let Some(seed) = g.seed {
        spec.seed = seed;
    }
    let sc = make_scenario(&spec)?;
    let bundles = sc.bundles()?;
    ensure_dir(out)?;
    layout::write_scenario(out, &sc, &bundles, g.format == Format::Csv)?;
    info!("wrote scenario with {} users to {}", spec.users, out.display());
    emit(
        &json!({
            "users": spec.users,
            "latent_dim": spec.latent_dim,
            "anchor_shape": [sc.anchor.rows(), sc.anchor.cols()],
            "private_dir": out.join(layout::PRIVATE_DIR),
            "analyst_dir": out.join(layout::ANALYST_DIR),
        }),
        None,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn methods(arg: MethodArg) -> Vec<Method> {
    match arg {
        MethodArg::Odc => vec![Method::Odc],
        MethodArg::Imakura => vec![Method::Imakura],
        MethodArg::Kawakami => vec![Method::Kawakami],
        MethodArg::All => Method::ALL.to_vec(),
    }
}

fn imakura_target(t: &TargetOpts, l: usize) -> Result<Matrix> {
    if let Some(path) = &t.r_matrix {
        return load_matrix(path);
    }
    if let Some(seed) = t.r_seed {
        return Ok(Matrix::gaussian(l, l, &mut seeded_rng(seed)));
    }
    Ok(Matrix::identity(l))
}

fn align_with(method: Method, anchors: &[Matrix], t: &TargetOpts, g: &GlobalOpts) -> Result<AlignmentResult> {
    let l = anchors[0].cols();
    let res = match method {
        Method::Imakura => align_imakura(anchors, &imakura_target(t, l)?)?,
        Method::Kawakami => align_kawakami(anchors)?,
        Method::Odc => align_odc(anchors, &OdcTarget::Seed(t.target_seed.or(g.seed).unwrap_or(0)))?,
    };
    Ok(res)
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn target_json(res: &AlignmentResult) -> Value {
    match &res.target {
        TargetRecord::Imakura { r } => json!({ "kind": "imakura_r", "matrix": matrix_rows(r) }),
        TargetRecord::Kawakami => json!({ "kind": "none" }),
        TargetRecord::Odc { o, seed } => json!({ "kind": "odc_o", "seed": seed, "matrix": matrix_rows(o) }),
    }
}

fn write_result(dir: &Path, res: &AlignmentResult, csv: bool) -> Result<()> {
    ensure_dir(dir)?;
    for (i, gi) in res.g.iter().enumerate() {
        save_matrix(&dir.join(format!("g_{i}.dcm1")), gi, csv)?;
    }
    save_json(
        &dir.join("manifest.json"),
        &json!({
            "method": res.method,
            "users": res.g.len(),
            "latent_dim": res.g[0].rows(),
            "target": target_json(res),
            "anchor_residual": res.anchor_residual,
            "flags": res.flags,
        }),
    )
}

fn cmd_align(g: &GlobalOpts, input: &Path, t: &TargetOpts) -> Result<ExitCode> {
    let bundles = load_bundles(input)?;
    let anchors: Vec<Matrix> = bundles.iter().map(|b| b.a_i.clone()).collect();
    let out = g.out.clone().unwrap_or_else(|| input.join("alignment"));
    ensure_dir(&out)?;
    let mut summary = Vec::new();
    for method in methods(t.method) {
        let res = align_with(method, &anchors, t, g).with_context(|| format!("{method} alignment"))?;
        let dir = out.join(method.name());
        write_result(&dir, &res, g.format == Format::Csv)?;
        summary.push(json!({
            "method": method,
            "anchor_residual": res.anchor_residual,
            "flags": res.flags,
            "dir": dir,
        }));
    }
    let report = json!({ "users": anchors.len(), "results": summary });
    save_json(&out.join("summary.json"), &report)?;
    emit(&report, None)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(g: &GlobalOpts, input: &Path, t: &TargetOpts) -> Result<ExitCode> {
    let private = load_private(input)?;
    let bundles = load_bundles(input)?;
    if bundles.len() != private.users.len() {
        return Err(Error::Validation(format!(
            "{} analyst bundles but {} private users",
            bundles.len(),
            private.users.len()
        ))
        .into());
    }
    let anchors: Vec<Matrix> = bundles.iter().map(|b| b.a_i.clone()).collect();
    let mut reports = Vec::new();
    let mut all_ok = true;
    for method in methods(t.method) {
        let res = align_with(method, &anchors, t, g).with_context(|| format!("{method} alignment"))?;
        let rep = concordance_report(&private.users, &res, res.target_o())?;
        all_ok &= rep.satisfied;
        reports.push(json!({
            "method": method,
            "condition": private.spec.condition,
            "basis_residual": rep.basis_residual,
            "theoretical_check": rep.theoretical_check,
            "anchor_residual": res.anchor_residual,
            "tolerance": rep.tolerance,
            "satisfied": rep.satisfied,
            "flags": res.flags,
        }));
    }
    emit(&json!({ "satisfied": all_ok, "reports": reports }), g.out.as_deref())?;
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cost_csv(r: &CostReport) -> String {
    let mut rows: Vec<(String, f64)> = vec![
        ("dc_uplink_bytes".into(), r.dc_traffic.uplink),
        ("dc_downlink_bytes".into(), r.dc_traffic.downlink),
        ("dc_anchor_bytes".into(), r.dc_traffic.anchor),
        ("dc_total_bytes".into(), r.dc_traffic.total),
        ("fl_total_bytes".into(), r.fl_traffic),
        ("break_even_rounds".into(), r.break_even_rounds),
        ("time_dc_s".into(), r.time_dc_s),
        ("time_fl_s".into(), r.time_fl_s),
    ];
    for f in &r.flops {
        rows.push((format!("flops_{}", f.method), f.total));
    }
    for m in &r.peak_memory {
        rows.push((format!("peak_mem_scalars_{}", m.method), m.scalars));
    }
    let mut out = String::from("quantity,value\n");
    for (k, v) in rows {
        out.push_str(&format!("{k},{v}\n"));
    }
    out
}

fn cmd_cost(g: &GlobalOpts, grid: Option<&Path>) -> Result<ExitCode> {
    let params: CostParams = load_json(required(&g.config, "--config", "cost")?)?;
    let report = cost_report(&params)?;
    match g.format {
        Format::Json => emit(&serde_json::to_value(&report).map_err(Error::from)?, g.out.as_deref())?,
        Format::Csv => {
            let text = cost_csv(&report);
            print_stdout(&text)?;
            if let Some(path) = &g.out {
                std::fs::write(path, text)
                    .map_err(Error::from)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    if let Some(path) = grid {
        let n_bars = [100.0, 300.0, 1_000.0, 3_000.0, 10_000.0];
        let sizes = [100_000, 1_000_000, 10_000_000, 25_000_000, 100_000_000];
        let ps = [0.05, 0.1, 0.25, 0.5, 1.0];
        write_rstar_grid(path, &params, &n_bars, &sizes, &ps)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(g: &GlobalOpts) -> Result<ExitCode> {
    let mut spec: SweepSpec = load_json(required(&g.config, "--config", "bench")?)?;
    let out = required(&g.out, "--out", "bench")?;
    if let Some(seed) = g.seed {
        spec.seed = seed;
    }
    if g.threads.is_some() {
        spec.threads = g.threads;
    }
    let report = run_sweep(&spec)?;
    ensure_dir(out)?;
    report.write_csv(out.join("sweep.csv"))?;
    report.write_sidecar(out.join("sweep.json"))?;
    let mut fits = Vec::new();
    for &m in &spec.methods {
        let (xs, ts) = report.series(m);
        if xs.len() < 3 {
            continue;
        }
        let fit = if spec.free_param == FreeParam::Users {
            let cs: Vec<usize> = xs.iter().map(|&x| x as usize).collect();
            serde_json::to_value(incremental_latency(&cs, &ts)?)
        } else {
            serde_json::to_value(ols_loglog(&xs, &ts)?)
        };
        fits.push(json!({ "method": m, "fit": fit.map_err(Error::from)? }));
    }
    emit(
        &json!({
            "rows": report.rows.len(),
            "skipped": report.skipped,
            "fits": fits,
            "csv": out.join("sweep.csv"),
            "sidecar": out.join("sweep.json"),
        }),
        None,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_demo(g: &GlobalOpts, input: &Path, user: Option<usize>) -> Result<ExitCode> {
    let private = load_private(input)?;
    let bundles = load_bundles(input)?;
    let j = user.unwrap_or(bundles.len() - 1);
    let bundle = bundles
        .get(j)
        .ok_or_else(|| Error::Validation(format!("user {j} out of range (0..{})", bundles.len())))?;
    let f = &private.users[j].f;
    let rec = collude_reconstruct(&private.anchor, &bundle.a_i)?;
    let err = rec.frobenius_distance(f)?;
    let norm = f.frobenius_norm();
    let rel = if norm > 0.0 { err / norm } else { err };
    emit(
        &json!({
            "user": j,
            "anchor_shape": [private.anchor.rows(), private.anchor.cols()],
            "relative_error": rel,
            "recovered": rel <= RECOVERY_TOL,
            "tolerance": RECOVERY_TOL,
        }),
        g.out.as_deref(),
    )?;
    Ok(ExitCode::SUCCESS)
}
