use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use akvf_core::analysis::{convergence_study, eoc_lambda, write_report, StudyConfig};
use akvf_core::assembly::assemble_b;
use akvf_core::fespace::FESpace;
use akvf_core::fields::{check_nondegeneracy, DegeneracyPolicy};
use akvf_core::kernel::{discrete_kernel, rank_diagnostic};
use akvf_core::mesh::{write_mesh, write_vtk, VtkPointData};
use akvf_core::problems::ProblemSpec;
use akvf_core::saddle::Discretization;
use akvf_core::tracking::{
    metrics, project_seeds, ray_points, track_baseline, track_near_isometric, write_metrics_csv,
    write_trajectories_csv, IsometricVelocity, TrackingConfig,
};
use akvf_core::{generate_mesh, Error, Mesh, Result};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;

/// Base mesh size; levels count uniform refinements from it.
const BASE_H: f64 = akvf_core::analysis::BASE_H;

/// Timings and output files of one run, echoed into the manifest.
#[derive(Debug, Default, Serialize)]
pub struct RunLog {
    pub timings: Vec<(String, f64)>,
    pub outputs: Vec<PathBuf>,
}

impl RunLog {
    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.timings.push((phase.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    fn create(&mut self, dir: &Path, name: &str) -> Result<BufWriter<File>> {
        let path = dir.join(name);
        let file = File::create(&path)?;
        self.outputs.push(path);
        Ok(BufWriter::new(file))
    }

    fn write_json(&mut self, dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
        let w = self.create(dir, name)?;
        serde_json::to_writer_pretty(w, value).map_err(|e| Error::Io(std::io::Error::other(e)))
    }
}

fn mesh_at(problem: &ProblemSpec, level: usize) -> Result<Arc<Mesh>> {
    Ok(Arc::new(generate_mesh(&problem.domain, BASE_H)?.refined(level)))
}

fn eval_time(cfg: &RunConfig, problem: &ProblemSpec) -> f64 {
    cfg.time.unwrap_or(problem.t0)
}

/// Enforces `|∇φ| ≥ c_min` on the mesh before any assembly.
fn check_level_set(cfg: &RunConfig, problem: &ProblemSpec, mesh: &Mesh, t: f64) -> Result<Option<serde_json::Value>> {
    let Some(ls) = &problem.level_set else { return Ok(None) };
    let rep = check_nondegeneracy(ls.as_ref(), mesh, t, 2 * cfg.k + 2, problem.c_min);
    if !rep.satisfied {
        match cfg.degeneracy {
            DegeneracyPolicy::Fail => {
                return Err(Error::Degenerate { point: rep.argmin, norm: rep.min_norm, c_min: rep.c_min });
            }
            DegeneracyPolicy::Warn => log::warn!(
                "|grad phi| drops to {:.3e} < {:.3e} at ({:.4}, {:.4}); continuing",
                rep.min_norm,
                rep.c_min,
                rep.argmin.x,
                rep.argmin.y
            ),
        }
    }
    Ok(Some(serde_json::to_value(rep).expect("report serializes")))
}

pub fn mesh(cfg: &RunConfig, log: &mut RunLog) -> Result<()> {
    let problem = cfg.problem_spec()?;
    let level = cfg.finest_level();
    let mesh = log.time("generate", || mesh_at(&problem, level))?;
    let path = cfg.out.join("mesh.txt");
    write_mesh(&mesh, &path)?;
    log.outputs.push(path);
    write_vtk(&mesh, &[], log.create(&cfg.out, "mesh.vtk")?)?;
    println!(
        "mesh level {level}: {} vertices, {} triangles, max diameter {:.4}, min angle {:.1} deg",
        mesh.n_vertices(),
        mesh.n_triangles(),
        mesh.max_diameter(),
        mesh.min_angle_deg()
    );
    Ok(())
}

pub fn solve(cfg: &RunConfig, log: &mut RunLog) -> Result<()> {
    let problem = cfg.problem_spec()?;
    let level = cfg.finest_level();
    let t = eval_time(cfg, &problem);
    let mesh = mesh_at(&problem, level)?;
    let nondegeneracy = check_level_set(cfg, &problem, &mesh, t)?;
    let disc = log.time("assemble", || Discretization::new(FESpace::new(mesh.clone(), cfg.k)?, cfg.boost))?;
    let fs = log.time("solve", || disc.solve(problem.field.as_ref(), t, cfg.tau))?;
    let diag = disc.diagnostics(&fs.solution);
    let nv = mesh.n_vertices();
    let n = disc.space.n_dofs();
    let u: Vec<[f64; 2]> = (0..nv).map(|v| [fs.solution.u[v], fs.solution.u[n + v]]).collect();
    let lambda = &fs.solution.lambda[..nv];
    write_vtk(
        &mesh,
        &[VtkPointData::Vector { name: "u", values: &u }, VtkPointData::Scalar { name: "lambda", values: lambda }],
        log.create(&cfg.out, "solution.vtk")?,
    )?;
    let summary = json!({
        "problem": problem.name,
        "k": cfg.k,
        "boost": cfg.boost,
        "level": level,
        "t": t,
        "n_dofs_u": 2 * n,
        "n_dofs_lambda": n,
        "kernel_dim": fs.kernel.dim,
        "kernel": fs.kernel,
        "alpha": fs.solution.alpha,
        "residuals": fs.solution.residuals,
        "solver": fs.solution.stats,
        "energy": diag,
        "nondegeneracy": nondegeneracy,
    });
    log.write_json(&cfg.out, "summary.json", &summary)?;
    println!(
        "{} k={} level {level}: {} unknowns, kernel dim {}, energy {:.6e}, |lambda|_1 {:.6e}",
        problem.name,
        cfg.k,
        fs.system.matrix.nrows(),
        fs.kernel.dim,
        diag.energy,
        diag.lambda_h1
    );
    Ok(())
}

pub fn converge(cfg: &RunConfig, log: &mut RunLog) -> Result<()> {
    let problem = cfg.problem_spec()?;
    let mesh = mesh_at(&problem, cfg.finest_level())?;
    check_level_set(cfg, &problem, &mesh, problem.t0)?;
    let study_cfg = StudyConfig {
        k: cfg.k,
        boost: cfg.boost,
        levels: cfg.levels.clone(),
        tau: cfg.tau,
        reference_levels_finer: cfg.converge.reference_levels_finer,
        modulo_kernel: cfg.converge.modulo_kernel,
    };
    let study = log.time("study", || convergence_study(&problem, &study_cfg))?;
    write_report(&study, &cfg.out, "convergence")?;
    log.outputs.extend(["convergence.csv", "convergence.json"].map(|f| cfg.out.join(f)));
    let eoc_l = eoc_lambda(&study.records);
    println!("level        h   |u-u_h|_1      EOC   |l-l_h|_1      EOC");
    for (i, r) in study.records.iter().enumerate() {
        let fmt = |x: Option<f64>| x.map_or("       -".to_string(), |v| format!("{v:8.3}"));
        let lam = r.err_lambda_h1.map_or("          -".to_string(), |v| format!("{v:11.4e}"));
        let el = if i == 0 { None } else { eoc_l.get(i - 1).copied().flatten() };
        println!("{:5} {:8.5} {:11.4e} {} {lam} {}", r.level, r.h, r.err_u_h1, fmt(r.eoc_u_h1), fmt(el));
    }
    Ok(())
}

pub fn track(cfg: &RunConfig, log: &mut RunLog) -> Result<()> {
    let problem = cfg.problem_spec()?;
    let Some(ls) = problem.level_set.clone() else {
        return Err(Error::Config(format!("problem `{}` has no level set to track", problem.name)));
    };
    let t_end = match cfg.track.t_end {
        Some(t) => t,
        None if problem.time_interval.1 > problem.time_interval.0 => problem.time_interval.1,
        None => return Err(Error::Config("problem has no time interval; set track.t_end".into())),
    };
    let mesh = mesh_at(&problem, cfg.finest_level())?;
    check_level_set(cfg, &problem, &mesh, 0.0)?;
    let raw = ray_points(cfg.track.seeds, cfg.track.seed_radius);
    let (seeds, rejected) = project_seeds(ls.as_ref(), &raw, 0.0, Some(&mesh));
    for r in &rejected {
        log::warn!("seed {} rejected: {}", r.index, r.reason);
    }
    if seeds.is_empty() {
        return Err(Error::Config("no seed could be projected onto the level set".into()));
    }
    let tcfg = TrackingConfig { steps: cfg.track.steps, t_end, seeds };
    let velocity = IsometricVelocity::new(
        mesh.clone(),
        cfg.k,
        cfg.boost,
        cfg.tau,
        cfg.track.region,
        problem.field.as_ref(),
        ls.as_ref(),
    )?;
    let iso = log.time("near_isometric", || {
        track_near_isometric(&velocity, &tcfg, |i, disc, _| {
            log::info!("step {i}/{}: {} scalar dofs", tcfg.steps, disc.space.n_dofs());
        })
    })?;
    let base = log.time("baseline", || track_baseline(ls.as_ref(), &mesh, problem.c_min, &tcfg))?;
    write_trajectories_csv(&iso, &tcfg, log.create(&cfg.out, "trajectories_near_isometric.csv")?)?;
    write_trajectories_csv(&base, &tcfg, log.create(&cfg.out, "trajectories_baseline.csv")?)?;
    let (mi, mb) = (metrics(&iso, ls.as_ref(), &tcfg), metrics(&base, ls.as_ref(), &tcfg));
    write_metrics_csv(&mi, &mb, &tcfg, log.create(&cfg.out, "metrics.csv")?)?;
    let summary = json!({
        "problem": problem.name,
        "steps": tcfg.steps,
        "t_end": t_end,
        "seeds": tcfg.seeds.len(),
        "rejected_seeds": rejected,
        "near_isometric": { "max_drift": mi.max_drift(), "final_distortion": mi.final_distortion(), "lost": mi.lost },
        "baseline": { "max_drift": mb.max_drift(), "final_distortion": mb.final_distortion(), "lost": mb.lost },
    });
    log.write_json(&cfg.out, "summary.json", &summary)?;
    println!("{} particles, {} steps to t = {t_end}", tcfg.seeds.len(), tcfg.steps);
    for (name, m) in [("near-isometric", &mi), ("baseline", &mb)] {
        println!("{name:>15}: max drift {:.3e}, D(t_end) {:.4e}, lost {}", m.max_drift(), m.final_distortion(), m.lost);
    }
    Ok(())
}

pub fn kernel(cfg: &RunConfig, log: &mut RunLog) -> Result<()> {
    let problem = cfg.problem_spec()?;
    let level = cfg.finest_level();
    let t = eval_time(cfg, &problem);
    let mesh = mesh_at(&problem, level)?;
    check_level_set(cfg, &problem, &mesh, t)?;
    let disc = log.time("assemble", || Discretization::new(FESpace::new(mesh.clone(), cfg.k)?, cfg.boost))?;
    let kb = log.time("detect", || {
        let b = assemble_b(&disc.space, problem.field.as_ref(), t, disc.operator_order())?;
        discrete_kernel(&b, disc.m1_solver(), &disc.mv, &disc.rigid, cfg.tau)
    })?;
    let centroids: Vec<_> = (0..mesh.n_triangles()).map(|i| mesh.centroid(i)).collect();
    let rank = rank_diagnostic(problem.field.as_ref(), t, &centroids)?;
    let report = json!({
        "problem": problem.name,
        "k": cfg.k,
        "level": level,
        "t": t,
        "detected_dim": kb.dim,
        "singular_values": kb.singular_values,
        "threshold": kb.threshold,
        "expected_dim": problem.expected_kernel_dim,
        "rank_diagnostic": rank,
    });
    log.write_json(&cfg.out, "kernel.json", &report)?;
    println!(
        "{} k={} level {level}: detected kernel dim {} (singular values {}), sampled rank {} so continuous dim <= {}",
        problem.name,
        cfg.k,
        kb.dim,
        kb.singular_values.iter().map(|s| format!("{s:.3e}")).collect::<Vec<_>>().join(", "),
        rank.rank,
        rank.kernel_bound
    );
    Ok(())
}
