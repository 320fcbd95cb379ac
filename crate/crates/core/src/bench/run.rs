//! Offline training, sweeps over basis widths, and online solves at the target.

use std::time::Instant;

use nalgebra::DMatrix;

use super::{
    relative_error, trajectory_matrix, BenchError, ExperimentConfig, ExperimentReport, OfflineBreakdown, ReportRow,
    SpaceTimeConfig, SpatialConfig, StMethod,
};
use crate::compression::{
    collect_residual_snapshots, nonlinear_snapshots, run_training, solution_snapshots, st_hosvd, Basis, Pod,
    SpaceTimeBasis,
};
use crate::fom::{ParameterPoint, SemiDiscreteModel};
use crate::hyper::{orthogonalized_projector, sample, build_projector, sns_basis, ObliqueProjector, SamplingMethod};
use crate::integrators::{solve_fom, IntegrationOptions, Scheme, SchemeId, Trajectory};
use crate::par::Execution;
use crate::rom::{self, GaussNewtonTolerances, RomMethod, SnsVariant, SpatialRom};
use crate::strom::{
    lift_space_time, st_gnat_sns_solve, st_gnat_solve, st_lspg_solve, st_projector, st_residual_snapshots,
    st_sns_residual_basis, SpaceTimeProjector, StSolution,
};

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Runs every configured method over its width sweep. Failures are recorded
/// per row; only configuration problems abort the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, BenchError> {
    run_experiment_with(config, Execution::default())
}

pub fn run_experiment_with(config: &ExperimentConfig, exec: Execution) -> Result<ExperimentReport, BenchError> {
    config.validate()?;
    let model = config.problem.build()?;
    let mut report = ExperimentReport { name: config.name.clone(), seed: config.seed, rows: Vec::new() };
    for &scheme in &config.time.schemes {
        let scheme = config.time.scheme(scheme);
        if let Some(sp) = &config.spatial {
            if !sp.methods.is_empty() {
                spatial(config, sp, model.as_ref(), &scheme, exec, &mut report.rows);
            }
        }
        if let Some(st) = &config.space_time {
            if !st.methods.is_empty() {
                space_time(config, st, model.as_ref(), &scheme, exec, &mut report.rows);
            }
        }
    }
    Ok(report)
}

/// Row skeleton before the online solve.
struct Pending {
    method: &'static str,
    n_s: usize,
    n_basis: usize,
    n_z: usize,
    offline: OfflineBreakdown,
    compression_count: usize,
    residual_simulations: usize,
}

impl Pending {
    fn finish(self, scheme: &SchemeId, outcome: Result<(f64, f64, usize), String>) -> ReportRow {
        let (relative_error, online_s, newton_total, failure) = match outcome {
            Ok((e, t, n)) => (e, t, n, None),
            Err(msg) => (f64::NAN, 0.0, 0, Some(msg)),
        };
        ReportRow {
            method: self.method.to_string(),
            scheme: scheme.scheme.name().to_string(),
            n_s: self.n_s,
            n_basis: self.n_basis,
            n_z: self.n_z,
            relative_error,
            offline: self.offline,
            compression_count: self.compression_count,
            residual_simulations: self.residual_simulations,
            online_s,
            newton_total,
            failure,
        }
    }
}

/// Every row a configuration would produce, all failed with `msg`.
fn fail_all(rows: &mut Vec<ReportRow>, scheme: &SchemeId, pending: Vec<Pending>, msg: &str) {
    rows.extend(pending.into_iter().map(|p| p.finish(scheme, Err(msg.to_string()))));
}

fn spatial_widths(method: RomMethod, sp: &SpatialConfig, n_space: usize) -> Vec<(usize, usize)> {
    match method {
        RomMethod::Galerkin | RomMethod::Lspg => vec![(sp.n_s, n_space)],
        RomMethod::Deim | RomMethod::DeimSns => sp.n_basis.values().into_iter().map(|w| (w, w)).collect(),
        RomMethod::Gnat | RomMethod::GnatSns => {
            let n_z = sp.n_z.unwrap_or(n_space);
            sp.n_basis.values().into_iter().map(|w| (w, n_z)).collect()
        }
    }
}

fn spatial_pending(sp: &SpatialConfig, n_space: usize) -> Vec<Pending> {
    let mut out = Vec::new();
    for &m in &sp.methods {
        for (w, z) in spatial_widths(m, sp, n_space) {
            out.push(Pending {
                method: m.name(),
                n_s: sp.n_s,
                n_basis: w,
                n_z: z,
                offline: OfflineBreakdown::default(),
                compression_count: 0,
                residual_simulations: 0,
            });
        }
    }
    out
}

fn online_spatial<'m>(
    build: impl FnOnce() -> Result<SpatialRom<'m>, rom::RomError>,
    scheme: &SchemeId,
    basis: &Basis,
    reference: &DMatrix<f64>,
) -> Result<(f64, f64, usize), String> {
    let u0 = reference.column(0).into_owned();
    let (solved, online_s) = timed(|| build().and_then(|r| r.solve(scheme)));
    let traj = solved.map_err(|e| e.to_string())?;
    let err = relative_error(&traj.lift(basis, &u0), reference).map_err(|e| e.to_string())?;
    if !err.is_finite() {
        return Err("non-finite relative error".into());
    }
    Ok((err, online_s, traj.newton_counts.iter().sum()))
}

fn projector(
    basis: &Basis,
    method: SamplingMethod,
    n_z: usize,
    orthogonalize: bool,
) -> Result<ObliqueProjector, crate::hyper::HyperError> {
    if orthogonalize {
        orthogonalized_projector(basis, method, n_z, None)
    } else {
        let plan = sample(&basis.columns, method, n_z)?;
        build_projector(basis, &plan, false, None)
    }
}

fn spatial(
    config: &ExperimentConfig,
    sp: &SpatialConfig,
    model: &dyn SemiDiscreteModel,
    scheme: &SchemeId,
    exec: Execution,
    rows: &mut Vec<ReportRow>,
) {
    let n_space = model.n_space();
    let training = &config.training.points;
    let target = &config.training.target;
    let record = sp.methods.contains(&RomMethod::Deim);
    let options = IntegrationOptions { record_velocities: record, ..Default::default() };
    let (runs, fom_s) = timed(|| run_training(model, scheme, training, &options, exec));
    let reference = solve_fom(model, target, scheme, &IntegrationOptions::default());
    let (runs, reference) = match (runs, reference) {
        (Ok(r), Ok(f)) => (r, trajectory_matrix(&f.states)),
        (Err(e), _) => return fail_all(rows, scheme, spatial_pending(sp, n_space), &e.to_string()),
        (_, Err(e)) => return fail_all(rows, scheme, spatial_pending(sp, n_space), &format!("reference run: {e}")),
    };
    let snapshots = solution_snapshots(&runs, training, scheme.scheme);
    let (pod, pod_s) = timed(|| Pod::compute(&snapshots, exec));
    let pod = match pod {
        Ok(p) => p,
        Err(e) => return fail_all(rows, scheme, spatial_pending(sp, n_space), &e.to_string()),
    };
    let basis = match if sp.allow_rank_deficient { pod.leading(sp.n_s) } else { pod.basis(sp.n_s) } {
        Ok(b) => b,
        Err(e) => return fail_all(rows, scheme, spatial_pending(sp, n_space), &e.to_string()),
    };
    let take = |pod: &Pod, n: usize| if sp.allow_rank_deficient { pod.leading(n) } else { pod.basis(n) };
    let shared = OfflineBreakdown { fom_s, compression_s: pod_s, ..Default::default() };
    for &method in &sp.methods {
        let widths = spatial_widths(method, sp, n_space);
        let pending = |w: usize, z: usize, offline: OfflineBreakdown, count: usize, sims: usize| Pending {
            method: method.name(),
            n_s: sp.n_s,
            n_basis: w,
            n_z: z,
            offline,
            compression_count: count,
            residual_simulations: sims,
        };
        match method {
            RomMethod::Galerkin | RomMethod::Lspg => {
                let (w, z) = widths[0];
                let outcome = online_spatial(
                    || if method == RomMethod::Lspg { rom::lspg(model, target, &basis) } else { rom::galerkin(model, target, &basis) },
                    scheme,
                    &basis,
                    &reference,
                );
                rows.push(pending(w, z, shared, 1, 0).finish(scheme, outcome));
            }
            RomMethod::Deim | RomMethod::Gnat => {
                // Baseline: collect and compress a second snapshot set.
                let (extra, residual_s) = timed(|| {
                    if method == RomMethod::Deim {
                        Ok(nonlinear_snapshots(&runs, training))
                    } else {
                        collect_residual_snapshots(model, scheme, &basis, training, exec)
                    }
                });
                let sims = if method == RomMethod::Gnat { training.len() } else { 0 };
                let (second, second_s) = match extra {
                    Ok(s) => {
                        let (p, t) = timed(|| Pod::compute(&s, exec));
                        (p, t)
                    }
                    Err(e) => (Err(e), 0.0),
                };
                for (w, z) in widths {
                    let mut offline = shared;
                    offline.residual_s = residual_s;
                    offline.compression_s += second_s;
                    let outcome = match &second {
                        Err(e) => Err(e.to_string()),
                        Ok(pod2) => {
                            let (proj, sampling_s) = timed(|| {
                                let b = take(pod2, w).map_err(|e| e.to_string())?;
                                let m = if method == RomMethod::Deim { SamplingMethod::DeimGreedy } else { sp.sampling };
                                projector(&b, m, z, sp.orthogonalize).map_err(|e| e.to_string())
                            });
                            offline.sampling_s = sampling_s;
                            proj.and_then(|p| {
                                online_spatial(
                                    || if method == RomMethod::Deim { rom::deim(model, target, &basis, &p) } else { rom::gnat(model, target, &basis, &p) },
                                    scheme,
                                    &basis,
                                    &reference,
                                )
                            })
                        }
                    };
                    rows.push(pending(w, z, offline, 2, sims).finish(scheme, outcome));
                }
            }
            RomMethod::DeimSns | RomMethod::GnatSns => {
                for (w, z) in widths {
                    let mut offline = shared;
                    let (nl_basis, sns_s) = timed(|| -> Result<Basis, String> {
                        let source = if w == sp.n_s { basis.clone() } else { take(&pod, w).map_err(|e| e.to_string())? };
                        if w != sp.n_s && sp.sns_variant == SnsVariant::Equal {
                            return Err("equal SNS variant needs n_basis = n_s".into());
                        }
                        Ok(sns_basis(&source, model.mass()))
                    });
                    offline.compression_s += sns_s;
                    let (proj, sampling_s) = timed(|| {
                        let b = nl_basis?;
                        let m = if method == RomMethod::DeimSns { SamplingMethod::DeimGreedy } else { sp.sampling };
                        projector(&b, m, z, sp.orthogonalize).map_err(|e| e.to_string())
                    });
                    offline.sampling_s = sampling_s;
                    let outcome = proj.and_then(|p| {
                        online_spatial(
                            || if method == RomMethod::DeimSns { rom::deim_sns(model, target, &basis, &p) } else { rom::gnat_sns(model, target, &basis, &p) },
                            scheme,
                            &basis,
                            &reference,
                        )
                    });
                    rows.push(pending(w, z, offline, 1, 0).finish(scheme, outcome));
                }
            }
        }
    }
}

fn st_pending(st: &SpaceTimeConfig) -> Vec<Pending> {
    let mut out = Vec::new();
    for &m in &st.methods {
        let widths = if m == StMethod::StLspg { vec![(st.n_st, 0)] } else { st.n_basis.values().into_iter().map(|w| (w, st.n_z)).collect() };
        for (w, z) in widths {
            out.push(Pending {
                method: m.name(),
                n_s: st.n_st,
                n_basis: w,
                n_z: z,
                offline: OfflineBreakdown::default(),
                compression_count: 0,
                residual_simulations: 0,
            });
        }
    }
    out
}

/// `u^n - u^0` for `n = 1..N_t`, one `N_s x N_t` slice per run.
fn centered_slices(runs: &[Trajectory]) -> Vec<DMatrix<f64>> {
    runs.iter()
        .map(|r| {
            let u0 = &r.states[0];
            let nt = r.states.len() - 1;
            DMatrix::from_fn(u0.len(), nt, |s, n| r.states[n + 1][s] - u0[s])
        })
        .collect()
}

fn online_st(
    solve: impl FnOnce() -> Result<StSolution, rom::RomError>,
    basis: &SpaceTimeBasis,
    reference: &DMatrix<f64>,
) -> Result<(f64, f64, usize), String> {
    let u0 = reference.column(0).into_owned();
    let (solved, online_s) = timed(solve);
    let sol = solved.map_err(|e| e.to_string())?;
    let err = relative_error(&lift_space_time(basis, &sol.x, &u0), reference).map_err(|e| e.to_string())?;
    if !err.is_finite() {
        return Err("non-finite relative error".into());
    }
    Ok((err, online_s, sol.iterations))
}

fn space_time(
    config: &ExperimentConfig,
    st: &SpaceTimeConfig,
    model: &dyn SemiDiscreteModel,
    scheme: &SchemeId,
    exec: Execution,
    rows: &mut Vec<ReportRow>,
) {
    debug_assert_eq!(scheme.scheme, Scheme::BackwardEuler);
    let training = &config.training.points;
    let target: &ParameterPoint = &config.training.target;
    let dt = scheme.dt;
    let (runs, fom_s) = timed(|| run_training(model, scheme, training, &IntegrationOptions::default(), exec));
    let reference = solve_fom(model, target, scheme, &IntegrationOptions::default());
    let (runs, reference) = match (runs, reference) {
        (Ok(r), Ok(f)) => (r, trajectory_matrix(&f.states)),
        (Err(e), _) => return fail_all(rows, scheme, st_pending(st), &e.to_string()),
        (_, Err(e)) => return fail_all(rows, scheme, st_pending(st), &format!("reference run: {e}")),
    };
    let slices = centered_slices(&runs);
    drop(runs);
    let widths = st.n_basis.values();
    let sns = st.methods.contains(&StMethod::StGnatSns);
    let n_pairs = if sns { widths.iter().copied().max().unwrap_or(st.n_st).max(st.n_st) } else { st.n_st };
    let (extended, hosvd_s) = timed(|| st_hosvd(&slices, st.spatial_modes, st.temporal_modes, n_pairs, exec));
    let extended = match extended {
        Ok(b) => b,
        Err(e) => return fail_all(rows, scheme, st_pending(st), &e.to_string()),
    };
    let basis = extended.truncated(st.n_st);
    let tol = GaussNewtonTolerances { max_iterations: st.max_iterations, ..Default::default() };
    let shared = OfflineBreakdown { fom_s, compression_s: hosvd_s, ..Default::default() };
    for &method in &st.methods {
        let pending = |w: usize, z: usize, offline: OfflineBreakdown, count: usize, sims: usize| Pending {
            method: method.name(),
            n_s: st.n_st,
            n_basis: w,
            n_z: z,
            offline,
            compression_count: count,
            residual_simulations: sims,
        };
        match method {
            StMethod::StLspg => {
                let outcome = online_st(|| st_lspg_solve(model, &basis, target, dt, &tol), &basis, &reference);
                rows.push(pending(st.n_st, 0, shared, 1, 0).finish(scheme, outcome));
            }
            StMethod::StGnat => {
                let (residuals, residual_s) =
                    timed(|| st_residual_snapshots(model, &basis, training, dt, st.residual_source, &tol, exec));
                let max_w = widths.iter().copied().max().unwrap_or(st.n_st);
                let (rbasis, rhosvd_s) = match residuals {
                    Ok(r) => timed(|| {
                        st_hosvd(&r, st.residual_spatial_modes, st.residual_temporal_modes, max_w, exec).map_err(|e| e.to_string())
                    }),
                    Err(e) => (Err(e.to_string()), 0.0),
                };
                for &w in &widths {
                    let mut offline = shared;
                    offline.residual_s = residual_s;
                    offline.compression_s += rhosvd_s;
                    let outcome = rbasis.clone().and_then(|rb| {
                        let (proj, sampling_s) = timed(|| st_projector(&rb.truncated(w), st.n_z, st.time_blocks));
                        offline.sampling_s = sampling_s;
                        let proj: SpaceTimeProjector = proj.map_err(|e| e.to_string())?;
                        online_st(|| st_gnat_solve(model, &basis, &proj, target, dt, &tol), &basis, &reference)
                    });
                    rows.push(pending(w, st.n_z, offline, 2, training.len()).finish(scheme, outcome));
                }
            }
            StMethod::StGnatSns => {
                for &w in &widths {
                    let mut offline = shared;
                    let (rb, sns_s) = timed(|| st_sns_residual_basis(&extended, st.n_st, w, st.sns_variant, model.mass()));
                    offline.compression_s += sns_s;
                    let outcome = rb.map_err(|e| e.to_string()).and_then(|rb| {
                        let (proj, sampling_s) = timed(|| st_projector(&rb, st.n_z, st.time_blocks));
                        offline.sampling_s = sampling_s;
                        let proj = proj.map_err(|e| e.to_string())?;
                        online_st(|| st_gnat_sns_solve(model, &basis, &proj, target, dt, &tol), &basis, &reference)
                    });
                    rows.push(pending(w, st.n_z, offline, 1, 0).finish(scheme, outcome));
                }
            }
        }
    }
}
