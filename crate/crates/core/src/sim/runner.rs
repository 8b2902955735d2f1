//! Coupling loops: Lie splitting, windowed successive approximation, and
//! the dynamics-only mode, plus the top-level `run` driver.

use std::path::Path;

use crate::dynamics::{
    curvature_flow_rhs, facet_velocity, rk4_step, step_facets, KineticParams,
};
use crate::energy::{crystalline_curvature, surface_energy, Anisotropy};
use crate::error::{Error, Result};
use crate::field::{build_grid, flux_budget, FieldGrid};
use crate::geometry::{measures, CrystalState};
use crate::sim::config::{CouplingMode, FluxSection, SimConfig};
use crate::sim::output::{write_snapshot, Record, TimeSeries};

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed,
    /// A facet vanished (or the whole crystal did) at this time.
    Extinct { t: f64 },
}

#[derive(Debug)]
pub struct RunResult {
    pub series: TimeSeries,
    pub outcome: RunOutcome,
    pub final_state: CrystalState,
}

/// Per-step diagnostics of one splitting step.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub kappa: Vec<f64>,
    pub avg_sigma: Vec<f64>,
    pub v: Vec<f64>,
    pub flux_residual: f64,
}

/// One Lie splitting step: field step on the current geometry, velocities
/// from the averaged Gibbs-Thomson law, Euler update of z, re-mask.
pub fn splitting_step(
    state: &CrystalState,
    grid: &mut FieldGrid,
    aniso: &Anisotropy,
    params: &KineticParams,
    g_t: Vec<f64>,
    dt: f64,
    t: f64,
) -> Result<(CrystalState, StepDiagnostics)> {
    grid.flux = g_t;
    let before = grid.clone();
    grid.step(dt, t)?;
    let residual = flux_budget(&before, grid, dt).residual;
    let rep = crystalline_curvature(state, aniso)?;
    let avg: Vec<f64> = (0..state.n_facets())
        .map(|i| grid.facet_average(state, i))
        .collect::<Result<_>>()?;
    let vel = facet_velocity(&rep, &avg, params)?;
    let next = step_facets(state, &vel, dt)?;
    grid.remask(&next)?;
    Ok((
        next,
        StepDiagnostics {
            kappa: rep.kappa,
            avg_sigma: avg,
            v: vel.v,
            flux_residual: residual,
        },
    ))
}

/// Result of one converged Picard window.
#[derive(Debug)]
pub struct PicardResult {
    /// z at every step boundary, length n_steps + 1 (first entry = start).
    pub z_traj: Vec<Vec<f64>>,
    /// Diagnostics for the step starting at each boundary, length n_steps.
    pub diags: Vec<StepDiagnostics>,
    /// Field at the window end of the final iterate.
    pub grid: FieldGrid,
    pub iterations: usize,
    /// Successive trajectory differences, one per iteration.
    pub diffs: Vec<f64>,
}

fn ode_pass(
    state0: &CrystalState,
    aniso: &Anisotropy,
    params: &KineticParams,
    avg_rec: &[Vec<f64>],
    dt: f64,
) -> Result<(Vec<Vec<f64>>, Vec<StepDiagnostics>)> {
    let mut traj = vec![state0.z.clone()];
    let mut diags = Vec::with_capacity(avg_rec.len());
    let mut state = state0.clone();
    for avg in avg_rec {
        let rep = crystalline_curvature(&state, aniso)?;
        let vel = facet_velocity(&rep, avg, params)?;
        state = step_facets(&state, &vel, dt)?;
        traj.push(state.z.clone());
        diags.push(StepDiagnostics {
            kappa: rep.kappa,
            avg_sigma: avg.clone(),
            v: vel.v,
            flux_residual: 0.0,
        });
    }
    Ok((traj, diags))
}

/// Successive approximation over one window [t0, t0 + n_steps * dt].
///
/// Iterate 0 integrates the facet ODE against the frozen entry field; each
/// later iterate solves the field forward along the previous geometry
/// trajectory, then re-integrates the ODE with the recorded facet
/// averages. Converged when the max trajectory difference drops below tol.
pub fn picard_window(
    state0: &CrystalState,
    grid0: &FieldGrid,
    aniso: &Anisotropy,
    params: &KineticParams,
    flux: &FluxSection,
    t0: f64,
    n_steps: usize,
    dt: f64,
    tol: f64,
    max_iters: usize,
) -> Result<PicardResult> {
    let n_facets = state0.n_facets();
    let state_at = |z: &Vec<f64>| state0.advanced(z.clone());
    // iterate 0: frozen entry field
    let avg0: Vec<Vec<f64>> = {
        let mut rec = Vec::with_capacity(n_steps);
        let mut state = state0.clone();
        for _ in 0..n_steps {
            let avg: Vec<f64> = (0..n_facets)
                .map(|i| grid0.facet_average(&state, i))
                .collect::<Result<_>>()?;
            let rep = crystalline_curvature(&state, aniso)?;
            let vel = facet_velocity(&rep, &avg, params)?;
            state = step_facets(&state, &vel, dt)?;
            rec.push(avg);
        }
        rec
    };
    let (mut prev_traj, mut prev_diags) = ode_pass(state0, aniso, params, &avg0, dt)?;
    let mut diffs = Vec::new();
    for iter in 1..=max_iters {
        // field pass along the previous trajectory
        let mut grid = grid0.clone();
        let mut avg_rec = Vec::with_capacity(n_steps);
        let mut residuals = Vec::with_capacity(n_steps);
        for m in 0..n_steps {
            let geo = state_at(&prev_traj[m])?;
            let avg: Vec<f64> = (0..n_facets)
                .map(|i| grid.facet_average(&geo, i))
                .collect::<Result<_>>()?;
            avg_rec.push(avg);
            grid.flux = flux.at(t0 + m as f64 * dt, n_facets)?;
            let before = grid.clone();
            grid.step(dt, t0 + m as f64 * dt)?;
            residuals.push(flux_budget(&before, &grid, dt).residual);
            grid.remask(&state_at(&prev_traj[m + 1])?)?;
        }
        let (traj, mut diags) = ode_pass(state0, aniso, params, &avg_rec, dt)?;
        for (d, r) in diags.iter_mut().zip(&residuals) {
            d.flux_residual = *r;
        }
        let diff = traj
            .iter()
            .zip(&prev_traj)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0_f64, f64::max);
        diffs.push(diff);
        if diff <= tol {
            // one more field pass would reproduce the same trajectory;
            // re-mask the final grid to the converged geometry
            let mut final_grid = grid;
            final_grid.remask(&state_at(traj.last().unwrap())?)?;
            return Ok(PicardResult {
                z_traj: traj,
                diags,
                grid: final_grid,
                iterations: iter,
                diffs,
            });
        }
        prev_traj = traj;
        prev_diags = diags;
    }
    let _ = prev_diags;
    let ratios: Vec<f64> = diffs.windows(2).map(|w| w[1] / w[0].max(1e-300)).collect();
    Err(Error::NoConvergence(format!(
        "picard window at t0 = {t0} did not converge in {max_iters} iterations; \
         differences {diffs:?}, contraction ratios {ratios:?}"
    )))
}

fn make_record(
    t: f64,
    state: &CrystalState,
    aniso: &Anisotropy,
    diag: &StepDiagnostics,
) -> Result<Record> {
    let m = measures(state)?;
    Ok(Record {
        t,
        z: state.z.clone(),
        kappa: diag.kappa.clone(),
        avg_sigma: diag.avg_sigma.clone(),
        v: diag.v.clone(),
        volume: m.volume,
        surface_energy: surface_energy(state, aniso)?,
        flux_residual: diag.flux_residual,
    })
}

/// Executes a full simulation per the config. Snapshots and the time
/// series go to `output_dir` when given.
pub fn run(config: &SimConfig, output_dir: Option<&Path>, quiet: bool) -> Result<RunResult> {
    config.validate()?;
    let aniso = config.anisotropy()?;
    let state0 = config.initial_state()?;
    let n_facets = state0.n_facets();
    let params = config.kinetics(n_facets)?;
    let dt = config.time.dt;
    let n_steps = (config.time.t_end / dt).round().max(1.0) as usize;
    let mut series = TimeSeries::default();
    let mut state = state0.clone();
    let mut outcome = RunOutcome::Completed;
    let mut snapshots: Vec<(usize, FieldGrid, f64)> = Vec::new();

    match config.coupling {
        CouplingMode::Curvature => {
            let sigma = config.boundary.sigma_inf;
            for step in 0..n_steps {
                let t = (step + 1) as f64 * dt;
                match rk4_step(&state, dt, |s| curvature_flow_rhs(s, &aniso, &params, sigma)) {
                    Ok(next) => state = next,
                    Err(Error::DegenerateGeometry(_)) => {
                        outcome = RunOutcome::Extinct { t };
                        break;
                    }
                    Err(e) => return Err(e),
                }
                if (step + 1) % config.output.cadence == 0 {
                    let rep = crystalline_curvature(&state, &aniso)?;
                    let avg = vec![sigma; n_facets];
                    let vel = facet_velocity(&rep, &avg, &params)?;
                    let diag = StepDiagnostics {
                        kappa: rep.kappa,
                        avg_sigma: avg,
                        v: vel.v,
                        flux_residual: 0.0,
                    };
                    series.push(make_record(t, &state, &aniso, &diag)?);
                }
            }
        }
        CouplingMode::Splitting => {
            let mut grid = build_grid(
                &state,
                config.grid.h,
                config.grid.r,
                config.boundary.sigma_inf,
                config.boundary.drift.to_spec(),
                config.boundary.flux.at(0.0, n_facets)?,
            )?;
            check_dt(dt, &grid, config.time.cfl_safety)?;
            for step in 0..n_steps {
                let t = step as f64 * dt;
                let g_t = config.boundary.flux.at(t, n_facets)?;
                match splitting_step(&state, &mut grid, &aniso, &params, g_t, dt, t) {
                    Ok((next, diag)) => {
                        state = next;
                        if (step + 1) % config.output.cadence == 0 {
                            series.push(make_record(t + dt, &state, &aniso, &diag)?);
                            maybe_snapshot(
                                config,
                                &series,
                                &grid,
                                t + dt,
                                &mut snapshots,
                            );
                        }
                    }
                    Err(Error::DegenerateGeometry(_)) => {
                        outcome = RunOutcome::Extinct { t: t + dt };
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        CouplingMode::Picard => {
            let mut grid = build_grid(
                &state,
                config.grid.h,
                config.grid.r,
                config.boundary.sigma_inf,
                config.boundary.drift.to_spec(),
                config.boundary.flux.at(0.0, n_facets)?,
            )?;
            check_dt(dt, &grid, config.time.cfl_safety)?;
            let full_window = ((config.picard.window / dt).round().max(1.0)) as usize;
            let mut window = full_window;
            let mut step = 0usize;
            let mut retries = 0usize;
            let mut clean_windows = 0usize;
            while step < n_steps {
                let w = window.min(n_steps - step);
                let t0 = step as f64 * dt;
                match picard_window(
                    &state,
                    &grid,
                    &aniso,
                    &params,
                    &config.boundary.flux,
                    t0,
                    w,
                    dt,
                    config.picard.tol,
                    config.picard.max_iters,
                ) {
                    Ok(result) => {
                        for m in 0..w {
                            let zs = result.z_traj[m + 1].clone();
                            let s = state.advanced(zs)?;
                            if (step + m + 1) % config.output.cadence == 0 {
                                series.push(make_record(
                                    t0 + (m + 1) as f64 * dt,
                                    &s,
                                    &aniso,
                                    &result.diags[m],
                                )?);
                            }
                        }
                        state = state.advanced(result.z_traj[w].clone())?;
                        grid = result.grid;
                        maybe_snapshot(config, &series, &grid, t0 + w as f64 * dt, &mut snapshots);
                        step += w;
                        clean_windows += 1;
                        if clean_windows >= 3 && window < full_window {
                            window = (window * 2).min(full_window);
                            clean_windows = 0;
                        }
                    }
                    Err(Error::DegenerateGeometry(_)) if window == 1 => {
                        outcome = RunOutcome::Extinct { t: t0 + dt };
                        break;
                    }
                    Err(Error::DegenerateGeometry(_)) | Err(Error::NoConvergence(_))
                        if retries < config.picard.max_retries =>
                    {
                        window = (window / 2).max(1);
                        retries += 1;
                        clean_windows = 0;
                        if !quiet {
                            eprintln!(
                                "picard window halved to {window} steps at t = {t0} (retry {retries})"
                            );
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }

    if let Some(dir) = output_dir {
        std::fs::create_dir_all(dir)?;
        series.write_csv(&dir.join("timeseries.csv"))?;
        for (idx, grid, t) in &snapshots {
            write_snapshot(grid, *t, &dir.join(format!("snapshot_{idx:05}.txt")))?;
        }
    }
    if !quiet {
        match &outcome {
            RunOutcome::Completed => eprintln!("run completed: {} records", series.records.len()),
            RunOutcome::Extinct { t } => eprintln!("crystal extinct at t = {t}"),
        }
    }
    Ok(RunResult {
        series,
        outcome,
        final_state: state,
    })
}

fn check_dt(dt: f64, grid: &FieldGrid, safety: f64) -> Result<()> {
    let limit = safety * grid.cfl_limit();
    if dt > limit {
        return Err(Error::Stability(format!(
            "time.dt = {dt:.3e} exceeds {safety} x CFL = {limit:.3e}"
        )));
    }
    Ok(())
}

fn maybe_snapshot(
    config: &SimConfig,
    series: &TimeSeries,
    grid: &FieldGrid,
    t: f64,
    snapshots: &mut Vec<(usize, FieldGrid, f64)>,
) {
    let every = config.output.snapshot_every;
    if every > 0 && !series.records.is_empty() && series.records.len() % every == 0 {
        snapshots.push((series.records.len(), grid.clone(), t));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::SimConfig;

    fn base_config(coupling: &str) -> SimConfig {
        let text = format!(
            r#"
coupling = "{coupling}"

[anisotropy]
k = 6
gamma_l = 1.0
gamma_t = 1.0

[crystal]
shape = "wulff"
scale = 1.0

[kinetics]
beta = 1.0

[boundary]
sigma_inf = 0.0

[grid]
h = 0.4
r = 9.5

[time]
t_end = 0.02
dt = 0.02

[picard]
window = 0.02
tol = 1e-12
max_iters = 10
"#
        );
        SimConfig::from_toml(&text).unwrap()
    }

    #[test]
    fn curvature_mode_matches_closed_form() {
        let mut cfg = base_config("curvature");
        cfg.time.dt = 1e-3;
        cfg.time.t_end = 0.2;
        cfg.output.cadence = 200;
        let res = run(&cfg, None, true).unwrap();
        assert_eq!(res.outcome, RunOutcome::Completed);
        let r = res.final_state.in_radius();
        assert!((r - (1.0_f64 - 0.8).sqrt()).abs() < 1e-8, "r = {r}");
    }

    #[test]
    fn splitting_shrinks_volume_without_vapor() {
        let mut cfg = base_config("splitting");
        cfg.time.dt = 0.005;
        cfg.time.t_end = 0.05;
        let res = run(&cfg, None, true).unwrap();
        let vols: Vec<f64> = res.series.records.iter().map(|r| r.volume).collect();
        assert!(vols.len() >= 5);
        for w in vols.windows(2) {
            assert!(w[1] < w[0]);
        }
        // logged records satisfy the velocity identity exactly
        for r in &res.series.records {
            for i in 0..r.v.len() {
                assert_eq!(r.v[i], r.kappa[i] + r.avg_sigma[i]);
            }
        }
    }

    #[test]
    fn decoupled_picard_converges_immediately() {
        let cfg = base_config("picard");
        let aniso = cfg.anisotropy().unwrap();
        let state = cfg.initial_state().unwrap();
        let params = cfg.kinetics(8).unwrap();
        let grid = build_grid(
            &state,
            cfg.grid.h,
            cfg.grid.r,
            0.0,
            crate::field::DriftSpec::Zero,
            vec![0.0; 8],
        )
        .unwrap();
        let res = picard_window(
            &state,
            &grid,
            &aniso,
            &params,
            &crate::sim::config::FluxSection::Zero,
            0.0,
            4,
            0.005,
            1e-12,
            10,
        )
        .unwrap();
        // field identically sigma_inf = 0: the first correction is exact
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn rerun_is_bit_identical() {
        let mut cfg = base_config("splitting");
        cfg.boundary.sigma_inf = 0.3;
        cfg.time.dt = 0.005;
        cfg.time.t_end = 0.03;
        let a = run(&cfg, None, true).unwrap().series.to_csv();
        let b = run(&cfg, None, true).unwrap().series.to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn curvature_run_reaches_extinction() {
        let mut cfg = base_config("curvature");
        cfg.time.dt = 1e-3;
        cfg.time.t_end = 0.3;
        cfg.output.cadence = 50;
        let res = run(&cfg, None, true).unwrap();
        match res.outcome {
            RunOutcome::Extinct { t } => assert!((t - 0.25).abs() < 0.01, "t = {t}"),
            _ => panic!("expected extinction"),
        }
    }

    #[test]
    fn run_writes_outputs() {
        let mut cfg = base_config("splitting");
        cfg.time.dt = 0.005;
        cfg.time.t_end = 0.02;
        cfg.output.snapshot_every = 2;
        let dir = tempfile::tempdir().unwrap();
        run(&cfg, Some(dir.path()), true).unwrap();
        assert!(dir.path().join("timeseries.csv").exists());
        assert!(dir.path().join("snapshot_00002.txt").exists());
    }
}
