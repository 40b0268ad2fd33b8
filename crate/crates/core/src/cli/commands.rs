//! Subcommand bodies. Each one computes all of its files in memory and only then writes
//! them, so a failing run leaves nothing behind.

use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiment::{optimal_inflation, run_ensemble, with_workers, AssimR};
use crate::matern::length_scale_table;
use crate::spectral::{bounds_sweep, chi_map, kappa_s, log_chi, log_space, spectrum_report};

/// Named file contents produced by a command.
pub type Outputs = Vec<(String, Vec<u8>)>;

/// Name of the resolved-configuration copy written next to every run's outputs.
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

/// Decimal text for CSV cells: plain notation where it stays short, exponent otherwise.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

struct Csv(csv::Writer<Vec<u8>>);

impl Csv {
    fn new() -> Self {
        Self(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new()))
    }

    fn row<I: IntoIterator<Item = S>, S: AsRef<[u8]>>(&mut self, cells: I) -> Result<()> {
        self.0.write_record(cells).map_err(|e| Error::Io(e.to_string()))
    }

    fn finish(self) -> Result<Vec<u8>> {
        self.0.into_inner().map_err(|e| Error::Io(e.to_string()))
    }
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    // Round-trip through `Value`: its map is ordered, giving stable key order.
    let v = serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Eigenvalues of `S` and `S_o` (CSV) and every scalar diagnostic (JSON).
pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Outputs> {
    let spec = cfg.hessian()?;
    let report = spectrum_report(&spec);
    let mut csv = Csv::new();
    csv.row(["index", "eigenvalue_s", "eigenvalue_so"])?;
    for (i, s) in report.eigenvalues_s.iter().enumerate() {
        let so = report.eigenvalues_so.get(i).map(|&v| fmt_f64(v)).unwrap_or_default();
        csv.row([i.to_string(), fmt_f64(*s), so])?;
    }
    Ok(vec![("spectrum.csv".into(), csv.finish()?), ("spectrum.json".into(), json_bytes(&report)?)])
}

fn panel_tag(m_b: u32, d_b: f64) -> String {
    format!("Mb{m_b}_Db{}", fmt_f64(d_b))
}

/// One rectangular `χ` table per `(M_b, D_b)` panel, a long-format table with `log10 χ`,
/// and the per-row minima as JSON.
pub fn cmd_chi_map(cfg: &RunConfig) -> Result<Outputs> {
    let mut out = Outputs::new();
    let mut minima = Vec::new();
    for req in cfg.chi_map_requests()? {
        let map = chi_map(&req)?;
        let tag = panel_tag(map.m_b, map.d_b_km);
        let mut rect = Csv::new();
        rect.row(std::iter::once("M_o\\D_o_km".to_string()).chain(map.d_o_values_km.iter().map(|&d| fmt_f64(d))))?;
        let mut long = Csv::new();
        long.row(["M_o", "D_o_km", "chi", "log10_chi"])?;
        for (r, &m_o) in map.m_o_values.iter().enumerate() {
            rect.row(std::iter::once(m_o.to_string()).chain(map.chi[r].iter().map(|&c| fmt_f64(c))))?;
            for (c, &d) in map.d_o_values_km.iter().enumerate() {
                long.row([m_o.to_string(), fmt_f64(d), fmt_f64(map.chi[r][c]), fmt_f64(map.log10_chi[r][c])])?;
            }
        }
        out.push((format!("chi_map_{tag}.csv"), rect.finish()?));
        out.push((format!("chi_map_{tag}_long.csv"), long.finish()?));
        minima.push(json!({
            "M_b": map.m_b,
            "D_b_km": map.d_b_km,
            "kappa_su": map.kappa_su,
            "rows": map.rows,
        }));
    }
    out.push(("chi_map_minima.json".into(), json_bytes(&json!({ "panels": minima }))?));
    Ok(out)
}

/// Condition number and its three bounds over a log-spaced `L̃_o/L̃_b` sweep.
pub fn cmd_bounds(cfg: &RunConfig) -> Result<Outputs> {
    let spec = cfg.hessian()?;
    if spec.o.order == 0 {
        return Err(Error::Config { key: "observation.M_o".into(), message: "bounds need a correlated R".into() });
    }
    let b = &cfg.bounds;
    let ratios = log_space(b.ratio_min, b.ratio_max, b.count);
    let rows = bounds_sweep(&spec, &ratios, b.infnorm)?;
    let mut csv = Csv::new();
    csv.row(["ratio_lo_lb", "L_o_km", "kappa_s", "kappa_so", "bound_naive", "bound_infnorm", "bound_eta", "eta_case"])?;
    for r in &rows {
        csv.row([
            fmt_f64(r.ratio_lo_lb),
            fmt_f64(r.l_o_km),
            fmt_f64(r.kappa_s),
            fmt_f64(r.kappa_so),
            fmt_f64(r.bound_naive),
            r.bound_infnorm.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.bound_eta),
            serde_json::to_value(r.eta_case).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        ])?;
    }
    Ok(vec![("bounds.csv".into(), csv.finish()?)])
}

/// Table of matched length-scales.
pub fn cmd_lengthscales(cfg: &RunConfig) -> Result<Outputs> {
    let l = &cfg.lengthscales;
    let rows = length_scale_table(&l.orders, l.growth, l.stein_km, l.h_km)?;
    let mut csv = Csv::new();
    csv.row(["M", "growth_L_km", "growth_rho_km", "growth_D_km", "stein_L_km", "stein_rho_km", "stein_D_km"])?;
    for r in &rows {
        csv.row([
            r.order.to_string(),
            fmt_f64(r.growth_l_km),
            fmt_f64(r.growth_stein_km),
            fmt_f64(r.growth_daley_km),
            fmt_f64(r.stein_l_km),
            fmt_f64(r.stein_stein_km),
            fmt_f64(r.stein_daley_km),
        ])?;
    }
    Ok(vec![("lengthscales.csv".into(), csv.finish()?)])
}

/// One convergence curve per assimilation variant, with summary statistics as JSON.
pub fn cmd_convergence(cfg: &RunConfig) -> Result<Outputs> {
    let mut ensembles = Vec::new();
    for &v in &cfg.ensemble.variants {
        let scenario = cfg.scenario(v);
        let e = with_workers(cfg.workers, || run_ensemble(&scenario))??;
        let spec = scenario.hessian()?;
        ensembles.push((v, e, kappa_s(&spec), log_chi(&spec).exp()));
    }
    let len = ensembles.iter().map(|(_, e, ..)| e.curve.len()).max().unwrap_or(0);
    let mut csv = Csv::new();
    csv.row(std::iter::once("iter".to_string()).chain(ensembles.iter().map(|(v, ..)| v.label())))?;
    for l in 0..len {
        let cells = ensembles.iter().map(|(_, e, ..)| fmt_f64(e.curve[l.min(e.curve.len() - 1)]));
        csv.row(std::iter::once(l.to_string()).chain(cells))?;
    }
    let summary: Vec<_> = ensembles
        .iter()
        .map(|(v, e, k, chi)| {
            json!({
                "label": v.label(),
                "assim": v,
                "sigma_a_star": e.sigma_a_star,
                "sigma_a_opt": e.sigma_a_opt,
                "sigma_b": e.sigma_b,
                "reduction": e.reduction,
                "optimal_reduction": e.optimal_reduction,
                "median_iterations": e.median_iterations,
                "min_iterations": e.iterations.iter().min(),
                "max_iterations": e.iterations.iter().max(),
                "unconverged": e.unconverged,
                "iterations": e.iterations,
                "kappa_s": k,
                "chi": chi,
            })
        })
        .collect();
    let doc = json!({
        "name": cfg.name,
        "seed": cfg.seed,
        "realizations": cfg.ensemble.realizations,
        "variants": summary,
    });
    Ok(vec![("convergence.csv".into(), csv.finish()?), ("convergence.json".into(), json_bytes(&doc)?)])
}

/// Search for the optimal inflation factor with common random numbers.
pub fn cmd_inflation(cfg: &RunConfig) -> Result<Outputs> {
    let scenario = cfg.scenario(AssimR::InflatedDiagonal { upsilon: 1.0 });
    let res = with_workers(cfg.workers, || optimal_inflation(&scenario, &cfg.inflation))??;
    let mut evals = res.evaluations.clone();
    evals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut csv = Csv::new();
    csv.row(["upsilon", "sigma_a_star"])?;
    for (u, s) in &evals {
        csv.row([fmt_f64(*u), fmt_f64(*s)])?;
    }
    let doc = json!({
        "name": cfg.name,
        "seed": cfg.seed,
        "realizations": cfg.ensemble.realizations,
        "upsilon_star": res.upsilon,
        "sigma_a_star": res.sigma_a_star,
        "evaluations": res.evaluations.len(),
        "search": cfg.inflation,
    });
    Ok(vec![("inflation.csv".into(), csv.finish()?), ("inflation.json".into(), json_bytes(&doc)?)])
}

/// Write `outputs` plus the resolved config into `dir`.
///
/// Each file is staged under a temporary name and renamed into place once every file has
/// been staged, so an I/O failure leaves no partial outputs.
pub fn write_outputs(dir: &Path, cfg: &RunConfig, mut outputs: Outputs) -> Result<Vec<std::path::PathBuf>> {
    outputs.push((RESOLVED_CONFIG.into(), cfg.to_toml().into_bytes()));
    std::fs::create_dir_all(dir)?;
    let mut staged = Vec::new();
    for (name, bytes) in &outputs {
        let tmp = dir.join(format!(".{name}.partial"));
        if let Err(e) = std::fs::write(&tmp, bytes) {
            for (t, _) in &staged {
                let _ = std::fs::remove_file(t);
            }
            let _ = std::fs::remove_file(&tmp);
            return Err(e.into());
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, fin) in &staged {
        std::fs::rename(tmp, fin)?;
    }
    Ok(staged.into_iter().map(|(_, f)| f).collect())
}
