use honeycomb_berry::berry::{
    chern_number, curvature_exact, curvature_grid, curvature_plaquette, dispersion_grid, CurvatureFormula,
};
use honeycomb_berry::mapping::{
    curvature_persistence_report, difference_measurement, dirac_merging_scan, map_curvature, path_profile,
    persistence_window,
};
use honeycomb_berry::oracle::propagate::ComSample;
use honeycomb_berry::oracle::protocol::{oracle_lattice, quantum_difference_run};
use honeycomb_berry::semiclassics::{
    integrate_eom, sweep_duration, ForceSpec, IntegratorOptions, ModelBand, SUITE_ANGLES,
};
use honeycomb_berry::validate::{run_validation, Fault, ValidationOptions};
use honeycomb_berry::{CurvatureGrid, KGrid, KPoint};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{fmt, OutputDir};

/// Trajectory files keep at most this many rows (plus the endpoint).
const MAX_TRAJECTORY_ROWS: usize = 2000;
/// Sub-grid resolution of the `|f|` minimum search in merge-scan.
const MERGE_RESOLUTION: usize = 48;

fn rect_grid(cfg: &RunConfig) -> Result<KGrid, CliError> {
    Ok(KGrid::rect(cfg.window, cfg.grid_nx, cfg.grid_ny)?)
}

fn extrema(g: &CurvatureGrid) -> Value {
    json!({
        "min": g.min().map(|(_, v)| v),
        "max": g.max().map(|(_, v)| v),
        "invalid_nodes": g.invalid_count(),
    })
}

/// Interior local minima of a sampled curve.
fn local_minima(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    (1..ys.len().saturating_sub(1)).filter(|&i| ys[i] < ys[i - 1] && ys[i] <= ys[i + 1]).map(|i| xs[i]).collect()
}

pub fn bands(cfg: &RunConfig) -> Result<(), CliError> {
    let model = cfg.model()?;
    let grid = rect_grid(cfg)?;
    let mut out = OutputDir::create(&cfg.out)?;
    let eps = dispersion_grid(&model, cfg.band, &grid);
    out.write_grid("dispersion.csv", "band energy on the k grid", &eps, None)?;

    // One reciprocal period along kx at ky = 0, through K and K′.
    let period = 4.0 * std::f64::consts::PI / honeycomb_berry::model::SQRT3;
    let n = cfg.grid_nx;
    let xs: Vec<f64> = (0..n).map(|i| period * i as f64 / (n - 1) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&kx| model.dispersion(KPoint::new(kx, 0.0), cfg.band)).collect();
    let rows: Vec<Vec<String>> = xs.iter().zip(&ys).map(|(x, y)| vec![fmt(*x), fmt(0.0), fmt(*y)]).collect();
    out.write_table("cut.csv", "band energy along ky = 0 over one period", &["kx", "ky", "value"], &rows)?;

    let at_gamma = model.dispersion(KPoint::GAMMA, cfg.band);
    let magnitude: Vec<f64> = ys.iter().map(|v| v.abs()).collect();
    let results = json!({
        "dispersion": extrema(&eps),
        "energy_at_gamma": at_gamma,
        "cut_gap_minima_kx": local_minima(&xs, &magnitude),
    });
    out.finish("bands", cfg, results)
}

pub fn curvature(cfg: &RunConfig) -> Result<(), CliError> {
    let model = cfg.model()?;
    let grid = rect_grid(cfg)?;
    let mut out = OutputDir::create(&cfg.out)?;
    let eps = dispersion_grid(&model, cfg.band, &grid);
    let exact = curvature_grid(&model, cfg.band, &grid, CurvatureFormula::Exact);
    let two_band = curvature_grid(&model, cfg.band, &grid, CurvatureFormula::TwoBand);
    // Offset so that no node of the cell grid lands on K or K′.
    let cell = KGrid::primitive_cell(KPoint::new(1e-3, -2e-3), cfg.plaquette_cells)?;
    let plaquette = curvature_plaquette(&model, cfg.band, &cell)?;
    let chern = chern_number(&plaquette)?;

    let analytic_gap = exact
        .iter_valid()
        .filter(|(i, _)| two_band.values[*i].is_finite())
        .map(|(i, v)| (v - two_band.values[i]).abs())
        .fold(0.0, f64::max);
    let (mut abs_dev, mut rel_dev) = (0.0f64, 0.0f64);
    for (i, v) in plaquette.iter_valid() {
        if let Ok(e) = curvature_exact(&model, plaquette.grid.node_at(i), cfg.band) {
            abs_dev = abs_dev.max((v - e).abs());
            if e.abs() > 1e-2 {
                rel_dev = rel_dev.max(((v - e) / e).abs());
            }
        }
    }

    out.write_grid("dispersion.csv", "band energy on the k grid", &eps, None)?;
    out.write_grid("curvature_exact.csv", "closed-form Berry curvature", &exact, None)?;
    out.write_grid("curvature_two_band.csv", "Berry curvature from the two-band formula", &two_band, None)?;
    out.write_grid("curvature_plaquette.csv", "plaquette Berry curvature over one reciprocal cell", &plaquette, None)?;
    let results = json!({
        "chern_number": chern.value,
        "chern_sum": chern.raw,
        "exact": extrema(&exact),
        "exact_vs_two_band_max_abs": analytic_gap,
        "exact_vs_plaquette_max_abs": abs_dev,
        "exact_vs_plaquette_max_rel": rel_dev,
        "plaquette_relative_floor": 1e-2,
    });
    out.finish("curvature", cfg, results)
}

fn angle_tag(phi: f64) -> String {
    format!("{:.0}", phi.to_degrees())
}

pub fn trajectory(cfg: &RunConfig) -> Result<(), CliError> {
    let model = cfg.model()?;
    let field = ModelBand { model, band: cfg.band };
    let mut out = OutputDir::create(&cfg.out)?;
    let mut summary = Vec::new();
    for phi in SUITE_ANGLES {
        let force = ForceSpec::new(cfg.force, phi)?;
        let t_final = sweep_duration(phi, cfg.force);
        let tr = integrate_eom(
            &field,
            KPoint::GAMMA,
            [0.0, 0.0],
            force,
            t_final,
            IntegratorOptions { dt: cfg.dt, check_step: true },
        )?;
        let stride = tr.samples.len().div_ceil(MAX_TRAJECTORY_ROWS).max(1);
        let last = tr.samples.len() - 1;
        let rows: Vec<Vec<String>> = tr
            .samples
            .iter()
            .enumerate()
            .filter(|(i, _)| i % stride == 0 || *i == last)
            .map(|(_, s)| vec![fmt(s.t), fmt(s.r[0]), fmt(s.r[1]), fmt(s.k.kx), fmt(s.k.ky)])
            .collect();
        let name = format!("trajectory_phi{}.csv", angle_tag(phi));
        out.write_table(&name, "position and crystal momentum from Γ", &["t", "x", "y", "kx", "ky"], &rows)?;
        let e = force.perpendicular();
        let perp: Vec<f64> = tr.samples.iter().map(|s| s.r[0] * e[0] + s.r[1] * e[1]).collect();
        summary.push(json!({
            "phi": phi,
            "file": name,
            "duration": t_final,
            "max_abs_perpendicular": perp.iter().fold(0.0f64, |a, v| a.max(v.abs())),
            "final_perpendicular": perp.last(),
        }));
    }
    out.finish("trajectory", cfg, json!({ "sweeps": summary }))
}

pub fn map(cfg: &RunConfig) -> Result<(), CliError> {
    let model = cfg.model()?;
    let protocol = cfg.protocol()?;
    let grid = rect_grid(cfg)?;
    let mut out = OutputDir::create(&cfg.out)?;
    let r = map_curvature(&model, cfg.band, &protocol, &grid)?;
    let status: Vec<&str> = r.status.iter().map(|s| s.label()).collect();
    out.write_grid("mapped.csv", "curvature read out by the difference protocol", &r.mapped, Some(&status))?;
    out.write_grid("exact.csv", "closed-form curvature", &r.exact, Some(&status))?;
    out.write_grid("error.csv", "relative error of the mapped curvature", &r.relative_error, Some(&status))?;
    out.write_grid("displacement.csv", "perpendicular displacement (r+ - r-)", &r.displacement, Some(&status))?;

    let profile = path_profile(&model, cfg.band, &protocol, cfg.profile_samples)?;
    let rows: Vec<Vec<String>> = profile
        .iter()
        .map(|p| {
            vec![
                fmt(p.arc),
                fmt(p.displacement),
                fmt(p.omega_m),
                fmt(p.omega_exact),
                fmt(p.relative_error.unwrap_or(f64::NAN)),
            ]
        })
        .collect();
    out.write_table(
        "profile.csv",
        "Γ → K → K′ cut of the mapping",
        &["arc", "displacement", "omega_m", "omega_exact", "relative_error"],
        &rows,
    )?;

    let at_k = difference_measurement(&ModelBand { model, band: cfg.band }, KPoint::K, &protocol)?;
    let exact_k = curvature_exact(&model, KPoint::K, cfg.band)?;
    let failures: Vec<Value> = r
        .status
        .iter()
        .enumerate()
        .filter_map(|(i, s)| match s {
            honeycomb_berry::mapping::NodeStatus::Failed(msg) => {
                let k = grid.node_at(i);
                Some(json!({ "kx": k.kx, "ky": k.ky, "error": msg }))
            }
            _ => None,
        })
        .collect();
    let results = json!({
        "masked_nodes": r.masked_count(),
        "failed_nodes": r.failed_count(),
        "failures": failures,
        "mask_floor": honeycomb_berry::mapping::ERROR_MASK_FLOOR,
        "max_relative_error": r.relative_error.max().map(|(_, v)| v),
        "omega_m_at_k": at_k.omega_m,
        "omega_exact_at_k": exact_k,
        "displacement_at_k": at_k.displacement,
    });
    out.finish("map", cfg, results)
}

pub fn merge_scan(cfg: &RunConfig) -> Result<(), CliError> {
    let mut out = OutputDir::create(&cfg.out)?;
    let rows = dirac_merging_scan(cfg.delta, &cfg.strains, MERGE_RESOLUTION)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt(r.strain),
                fmt(r.separation),
                fmt(r.closed_form_separation),
                r.minima.len().to_string(),
                fmt(r.min_abs_f),
                fmt(r.band_minimum),
            ]
        })
        .collect();
    out.write_table(
        "merge.csv",
        "separation of the |f| minima against strain",
        &["strain", "separation", "closed_form", "minima", "min_abs_f", "band_minimum"],
        &table,
    )?;
    let worst = rows.iter().map(|r| (r.separation - r.closed_form_separation).abs()).fold(0.0, f64::max);
    let mut results = json!({ "max_abs_deviation_from_closed_form": worst, "resolution": MERGE_RESOLUTION });

    if cfg.delta != 0.0 {
        let grid = KGrid::rect(persistence_window(), 161, 73)?;
        let entries = curvature_persistence_report(cfg.delta, &cfg.strains, &grid)?;
        let table: Vec<Vec<String>> = entries
            .iter()
            .map(|e| {
                vec![
                    fmt(e.strain),
                    fmt(e.positive_peak.k.kx),
                    fmt(e.positive_peak.k.ky),
                    fmt(e.positive_peak.value),
                    fmt(e.negative_peak.k.kx),
                    fmt(e.negative_peak.k.ky),
                    fmt(e.negative_peak.value),
                    fmt(e.peak_separation),
                    u8::from(e.dispersion_merged).to_string(),
                ]
            })
            .collect();
        out.write_table(
            "persistence.csv",
            "curvature extrema near the merging point against strain",
            &["strain", "pos_kx", "pos_ky", "pos_value", "neg_kx", "neg_ky", "neg_value", "separation", "merged"],
            &table,
        )?;
        results["persistence_grid"] = json!({ "window": grid_window(&grid), "nx": grid.na, "ny": grid.nb });
    }
    out.finish("merge-scan", cfg, results)
}

fn grid_window(g: &KGrid) -> [f64; 4] {
    let end = g.node(g.na - 1, g.nb - 1);
    [g.origin.kx, end.kx, g.origin.ky, end.ky]
}

/// Returns whether every check passed.
pub fn validate(cfg: &RunConfig, fault: Option<Fault>, skip_oracle: bool) -> Result<bool, CliError> {
    let mut out = OutputDir::create(&cfg.out)?;
    let report = run_validation(ValidationOptions { fault, include_oracle: !skip_oracle });
    for c in &report.checks {
        println!(
            "{} {}: measured {:.3e}, tolerance {:.1e} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.tolerance,
            c.detail
        );
    }
    let value = serde_json::to_value(&report).expect("report serialises");
    out.write_json("report.json", "self-check results with tolerances", &value)?;
    let passed = report.passed();
    out.finish("validate", cfg, json!({ "passed": passed, "checks": report.checks.len() }))?;
    Ok(passed)
}

fn com_rows(samples: &[ComSample]) -> Vec<Vec<String>> {
    samples.iter().map(|s| vec![fmt(s.t), fmt(s.r[0]), fmt(s.r[1])]).collect()
}

pub fn packet(cfg: &RunConfig) -> Result<(), CliError> {
    let model = cfg.model()?;
    let oracle = cfg.oracle()?;
    let lattice = oracle_lattice(&model, &oracle)?;
    let mut out = OutputDir::create(&cfg.out)?;
    let steps = (cfg.time / cfg.dt).ceil() as usize;
    let run = quantum_difference_run(&lattice, &model, &oracle, cfg.k0, (steps / 200).max(1))?;
    out.write_table("com_plus.csv", "packet centre of mass under +F", &["t", "x", "y"], &com_rows(&run.com_plus))?;
    out.write_table("com_minus.csv", "packet centre of mass under -F", &["t", "x", "y"], &com_rows(&run.com_minus))?;
    let results = json!({ "oracle": oracle, "probe": run.probe });
    out.finish("packet", cfg, results)
}
