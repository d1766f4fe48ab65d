//! Dispatch of a parsed configuration to the physics modules.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nvcavity::dressed::{eigen_scan, minimum_splitting, quadrature_map, DressedParams};
use nvcavity::master::{check_truncation, liouvillian_for, steady_state, SystemParams};
use nvcavity::par::Exec;
use nvcavity::sensitivity::{
    analyze_quadrature, calibrate_noise, dressed_sensitivity, optimal_cavity_detuning, sensitivity_vs_coupling,
    NoiseModel, SensitivityReport,
};
use nvcavity::spectrum::{emission_spectrum_of, odmr_map};
use nvcavity::units::{khz, mhz, to_khz, to_mhz};
use serde_json::{json, Value};

use crate::config::{Format, Mode, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{self, jnum, num, opt, Artifact, Csv, Manifest};

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    /// Worker threads; `None` uses all cores, 1 runs sequentially.
    pub jobs: Option<usize>,
    pub strict: bool,
    pub format: Option<Format>,
    /// Directory against which relative input paths are resolved.
    pub base_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub failures: usize,
    pub warnings: Vec<String>,
}

/// Results of one mode before they are written.
struct Emitted {
    csv: Csv,
    json: Value,
    failures: usize,
    warnings: Vec<String>,
}

pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    let start = Instant::now();
    let emitted = with_exec(opts.jobs, |exec| dispatch(cfg, opts, exec))??;
    let format = opts.format.unwrap_or(cfg.output.format);
    let name = cfg.mode.name();
    let mut artifacts: Vec<Artifact> = Vec::new();
    if format.csv() {
        artifacts.push(emitted.csv.into_artifact(format!("{name}.csv")));
    }
    if format.json() {
        let mut body = emitted.json;
        body["schema"] = json!(output::SCHEMA);
        body["mode"] = json!(name);
        artifacts.push(output::json_artifact(format!("{name}.json"), &body)?);
    }
    let manifest = Manifest {
        schema: output::SCHEMA,
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        mode: name.to_string(),
        config: serde_json::to_value(cfg)?,
        wall_time_s: start.elapsed().as_secs_f64(),
        failures: emitted.failures,
        files: output::file_entries(&artifacts),
        warnings: emitted.warnings.clone(),
    };
    let out_dir = opts.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let files = output::write_all(&out_dir, &artifacts, &manifest)?;
    if opts.strict && emitted.failures > 0 {
        return Err(CliError::Strict {
            failures: emitted.failures,
        });
    }
    Ok(RunSummary {
        out_dir,
        files,
        failures: emitted.failures,
        warnings: emitted.warnings,
    })
}

#[cfg(feature = "parallel")]
fn with_exec<T>(jobs: Option<usize>, f: impl FnOnce(Exec) -> T + Send) -> Result<T>
where
    T: Send,
{
    match jobs {
        Some(1) => Ok(f(Exec::Sequential)),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Pool(e.to_string()))?;
            Ok(pool.install(|| f(Exec::Parallel)))
        }
        None => Ok(f(Exec::Parallel)),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_exec<T>(_jobs: Option<usize>, f: impl FnOnce(Exec) -> T) -> Result<T> {
    Ok(f(Exec::Sequential))
}

fn dispatch(cfg: &RunConfig, opts: &RunOptions, exec: Exec) -> Result<Emitted> {
    match cfg.mode {
        Mode::Odmr => odmr(cfg, exec),
        Mode::Spectrum => spectrum(cfg, exec),
        Mode::Homodyne => homodyne(cfg, exec),
        Mode::Eigenscan => eigenscan(cfg, exec),
        Mode::Sensitivity => sensitivity(cfg, opts),
        Mode::Sweep => sweep(cfg, exec),
    }
}

fn to_mhz_all(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| to_mhz(x)).collect()
}

fn photon_number(p: &SystemParams) -> nvcavity::Result<f64> {
    let a = p.cavity_annihilation()?;
    let n = &a.dagger() * &a;
    Ok(steady_state(&liouvillian_for(p)?)?.expect(&n)?.re)
}

fn truncation_warnings(cfg: &RunConfig, p: &SystemParams) -> Result<Vec<String>> {
    if !cfg.system.truncation_check {
        return Ok(Vec::new());
    }
    let check = check_truncation(p, 5, photon_number)?;
    if check.converged() {
        Ok(Vec::new())
    } else {
        Ok(vec![format!(
            "photon number changes by {:.3e} (relative) from fock_dim {} to {}",
            check.relative_change, check.fock_dim, check.extended_fock_dim
        )])
    }
}

fn odmr(cfg: &RunConfig, exec: Exec) -> Result<Emitted> {
    let p = cfg.system_params()?;
    let ds = cfg.grids.delta_s.expect("validated").to_axis()?;
    let dd = cfg.grids.delta_d.expect("validated").to_axis()?;
    let readout = cfg.odmr.readout();
    let map = odmr_map(&p, &ds, &dd, readout, exec)?;
    let (s_mhz, d_mhz) = (to_mhz_all(&map.delta_s_axis), to_mhz_all(&map.delta_d_axis));
    let mut csv = Csv::new(&["delta_s_MHz", "delta_d_MHz", "value"]);
    for (i, &s) in s_mhz.iter().enumerate() {
        for (j, &d) in d_mhz.iter().enumerate() {
            csv.row([num(s), num(d), opt(map.values[[i, j]])]);
        }
    }
    let rows: Vec<Vec<Value>> = map
        .values
        .outer_iter()
        .map(|r| r.iter().map(|&v| jnum(v)).collect())
        .collect();
    let json = json!({
        "readout": readout,
        "delta_s_MHz": s_mhz,
        "delta_d_MHz": d_mhz,
        "values": rows,
        "scale": map.scale,
        "params": p,
    });
    Ok(Emitted {
        csv,
        json,
        failures: map.failures(),
        warnings: truncation_warnings(cfg, &p)?,
    })
}

fn spectrum(cfg: &RunConfig, exec: Exec) -> Result<Emitted> {
    let p = cfg.system_params()?;
    let omegas = cfg.grids.omega.expect("validated").to_axis()?.values();
    let source = cfg.spectrum.source();
    let trace = emission_spectrum_of(&p, source, &omegas, exec)?;
    // poles are dropped from the trace; restore them as missing values
    let mut kept = trace.omegas.iter().zip(&trace.values).peekable();
    let values: Vec<Option<f64>> = omegas
        .iter()
        .map(|&w| match kept.peek() {
            Some(&(&k, &v)) if k == w => {
                kept.next();
                Some(v)
            }
            _ => None,
        })
        .collect();
    let w_mhz = to_mhz_all(&omegas);
    let mut csv = Csv::new(&["omega_MHz", "value"]);
    for (w, v) in w_mhz.iter().zip(&values) {
        csv.row([num(*w), opt(*v)]);
    }
    let json = json!({
        "source": source,
        "omega_MHz": w_mhz,
        "values": values.iter().map(|&v| jnum(v)).collect::<Vec<_>>(),
        "poles_MHz": to_mhz_all(&trace.poles),
        "peaks_MHz": to_mhz_all(&trace.peak_frequencies()),
        "params_hash": trace.params_hash,
        "params": p,
    });
    Ok(Emitted {
        csv,
        json,
        failures: trace.poles.len(),
        warnings: truncation_warnings(cfg, &p)?,
    })
}

fn homodyne(cfg: &RunConfig, exec: Exec) -> Result<Emitted> {
    let d = cfg.dressed_params()?;
    let s = cfg.grids.delta_s.expect("validated").to_axis()?;
    let c = cfg.grids.delta_c.expect("validated").to_axis()?;
    let map = quadrature_map(&d, &s, &c, exec)?;
    let (s_mhz, c_mhz) = (to_mhz_all(&map.delta_s_axis), to_mhz_all(&map.delta_c_axis));
    let mut csv = Csv::new(&["delta_s_MHz", "delta_c_MHz", "Q"]);
    for (i, &x) in s_mhz.iter().enumerate() {
        for (j, &y) in c_mhz.iter().enumerate() {
            csv.row([num(x), num(y), opt(map.values[[i, j]])]);
        }
    }
    let rows: Vec<Vec<Value>> = map
        .values
        .outer_iter()
        .map(|r| r.iter().map(|&v| jnum(v)).collect())
        .collect();
    let json = json!({
        "delta_s_MHz": s_mhz,
        "delta_c_MHz": c_mhz,
        "values": rows,
        "params": d,
    });
    Ok(Emitted {
        csv,
        json,
        failures: map.failures(),
        warnings: Vec::new(),
    })
}

fn eigenscan(cfg: &RunConfig, exec: Exec) -> Result<Emitted> {
    let d = cfg.dressed_params()?;
    let variable = cfg.eigenscan.variable;
    let spec = match variable {
        nvcavity::dressed::ScanVariable::DeltaS => cfg.grids.delta_s,
        nvcavity::dressed::ScanVariable::DeltaC => cfg.grids.delta_c,
    };
    let axis = spec.expect("validated").to_axis()?;
    let scan = eigen_scan(&d, variable, &axis, exec)?;
    let n = scan.first().map_or(0, Vec::len);
    let mut header = vec!["sweep_value".to_string()];
    header.extend((1..=n).map(|k| format!("re_{k}")));
    header.extend((1..=n).map(|k| format!("im_{k}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header);
    let sweep = to_mhz_all(&axis.values());
    for (x, evs) in sweep.iter().zip(&scan) {
        let mut row = vec![num(*x)];
        row.extend(evs.iter().map(|z| num(to_mhz(z.re))));
        row.extend(evs.iter().map(|z| num(to_mhz(z.im))));
        csv.row(row);
    }
    let re: Vec<Vec<f64>> = scan.iter().map(|e| e.iter().map(|z| to_mhz(z.re)).collect()).collect();
    let im: Vec<Vec<f64>> = scan.iter().map(|e| e.iter().map(|z| to_mhz(z.im)).collect()).collect();
    let splitting =
        minimum_splitting(&scan, &axis).map(|(gap, at)| json!({"gap_MHz": to_mhz(gap), "at_MHz": to_mhz(at)}));
    let json = json!({
        "variable": variable,
        "sweep_MHz": sweep,
        "re_MHz": re,
        "im_MHz": im,
        "minimum_splitting": splitting,
        "params": d,
    });
    Ok(Emitted {
        csv,
        json,
        failures: 0,
        warnings: Vec::new(),
    })
}

/// Dressed parameters at the configured cavity detuning, or at the most
/// sensitive one when none is given.
pub fn operating_point(cfg: &RunConfig) -> Result<DressedParams> {
    let mut d = cfg.dressed_params()?;
    if cfg.dressed.delta_c_mhz.is_none() {
        d.delta_c = optimal_cavity_detuning(&d)?;
    }
    Ok(d)
}

/// Noise model of the configuration, rescaled to `noise.target_single_eta`
/// at the operating point when that is set.
pub fn calibrated_noise(cfg: &RunConfig, op: &DressedParams) -> Result<NoiseModel> {
    let noise = cfg.noise_model();
    match cfg.noise.target_single_eta {
        None => Ok(noise),
        Some(target) => {
            let report = model_report(cfg, op, &noise)?;
            Ok(calibrate_noise(&report, &noise, target)?)
        }
    }
}

fn model_report(cfg: &RunConfig, d: &DressedParams, noise: &NoiseModel) -> Result<SensitivityReport> {
    Ok(dressed_sensitivity(
        d,
        cfg.dressed.peak_model,
        &cfg.sensitivity.slope_grid(),
        cfg.half_width(),
        noise,
        cfg.noise.gamma_e,
    )?)
}

/// Reads a two-column quadrature trace (Δ_s in MHz, Q). Lines starting with
/// `#` and a non-numeric header line are skipped.
pub fn read_trace(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let bad = |line: usize, what: &str| CliError::Invalid {
        field: "sensitivity.trace_file".into(),
        reason: format!("{}:{line}: {what}", path.display()),
    };
    let (mut xs, mut qs) = (Vec::new(), Vec::new());
    let mut header_allowed = true;
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 2 {
            return Err(bad(k + 1, "expected two columns"));
        }
        match (cells[0].parse::<f64>(), cells[1].parse::<f64>()) {
            (Ok(x), Ok(q)) => {
                xs.push(mhz(x));
                qs.push(q);
            }
            _ if header_allowed => {}
            _ => return Err(bad(k + 1, "not a number")),
        }
        header_allowed = false;
    }
    Ok((xs, qs))
}

fn sensitivity(cfg: &RunConfig, opts: &RunOptions) -> Result<Emitted> {
    let gamma_e = cfg.noise.gamma_e;
    let (report, noise, delta_c, source) = match &cfg.sensitivity.trace_file {
        Some(file) => {
            let path = match &opts.base_dir {
                Some(base) if file.is_relative() => base.join(file),
                _ => file.clone(),
            };
            let (xs, qs) = read_trace(&path)?;
            let modes = cfg.dressed_params()?.modes;
            let analyze = |noise: &NoiseModel| {
                analyze_quadrature(
                    &xs,
                    &qs,
                    &modes,
                    cfg.half_width(),
                    cfg.sensitivity.window,
                    noise,
                    gamma_e,
                )
            };
            let mut noise = cfg.noise_model();
            let mut report = analyze(&noise)?;
            if let Some(target) = cfg.noise.target_single_eta {
                noise = calibrate_noise(&report, &noise, target)?;
                report = analyze(&noise)?;
            }
            (report, noise, None, "trace_file")
        }
        None => {
            let d = operating_point(cfg)?;
            let noise = calibrated_noise(cfg, &d)?;
            (model_report(cfg, &d, &noise)?, noise, Some(d.delta_c), "model")
        }
    };
    let mut csv = Csv::new(&["peak_k", "peak_l", "center_MHz", "slope", "eta_T_per_sqrtHz"]);
    for p in &report.peaks {
        // slope per MHz of spin detuning
        csv.row([
            p.k.to_string(),
            p.l.to_string(),
            num(to_mhz(p.center)),
            num(p.slope / to_mhz(1.0)),
            num(p.eta),
        ]);
    }
    csv.comment(&format!(
        "summary eta_multi={} enhancement={} jn_floor_ratio={}",
        num(report.eta_multi),
        num(report.enhancement),
        num(report.jn_floor_ratio())
    ));
    let json = json!({
        "source": source,
        "delta_c_MHz": delta_c.map(to_mhz),
        "noise": noise,
        "report": report,
        "jn_floor_ratio": jnum(Some(report.jn_floor_ratio())),
    });
    Ok(Emitted {
        csv,
        json,
        failures: 0,
        warnings: report.warnings.clone(),
    })
}

fn sweep(cfg: &RunConfig, exec: Exec) -> Result<Emitted> {
    let op = operating_point(cfg)?;
    let noise = calibrated_noise(cfg, &op)?;
    let couplings = cfg.grids.g_eff.expect("validated").to_axis()?.values();
    let base = cfg.dressed_params()?;
    let mut csv = Csv::new(&[
        "gamma_kHz",
        "g_eff_MHz",
        "delta_c_MHz",
        "eta_single_T_per_sqrtHz",
        "eta_multi_T_per_sqrtHz",
    ]);
    let mut curves = Vec::new();
    let mut failures = 0;
    for &gamma_khz in &cfg.sweep.gammas_khz {
        let points = sensitivity_vs_coupling(
            &base,
            &couplings,
            khz(gamma_khz),
            cfg.dressed.peak_model,
            &cfg.sensitivity.slope_grid(),
            cfg.half_width(),
            &noise,
            cfg.noise.gamma_e,
            exec,
        )?;
        failures += points.iter().filter(|p| p.is_none()).count();
        for (g, p) in couplings.iter().zip(&points) {
            csv.row([
                num(gamma_khz),
                num(to_mhz(*g)),
                opt(p.map(|p| to_mhz(p.delta_c))),
                opt(p.map(|p| p.eta_single_best)),
                opt(p.map(|p| p.eta_multi)),
            ]);
        }
        curves.push(json!({
            "gamma_kHz": gamma_khz,
            "delta_c_MHz": points.iter().map(|p| jnum(p.map(|p| to_mhz(p.delta_c)))).collect::<Vec<_>>(),
            "eta_single": points.iter().map(|p| jnum(p.map(|p| p.eta_single_best))).collect::<Vec<_>>(),
            "eta_multi": points.iter().map(|p| jnum(p.map(|p| p.eta_multi))).collect::<Vec<_>>(),
        }));
    }
    let json = json!({
        "g_eff_MHz": to_mhz_all(&couplings),
        "curves": curves,
        "noise": noise,
        "calibration_point": {
            "g_eff_MHz": to_mhz(op.g_eff),
            "gamma_kHz": to_khz(op.gamma),
            "delta_c_MHz": to_mhz(op.delta_c),
            "target_single_eta": cfg.noise.target_single_eta,
        },
    });
    Ok(Emitted {
        csv,
        json,
        failures,
        warnings: Vec::new(),
    })
}
