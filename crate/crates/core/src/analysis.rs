//! Error norms against exact or fine-mesh references, convergence studies
//! and CSV/JSON reports.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fespace::FESpace;
use crate::kernel::KernelBasis;
use crate::mesh::{generate_mesh, Mesh, Point2};
use crate::problems::{ExactSolution, ProblemSpec};
use crate::saddle::{Discretization, EnergyDiagnostics};

/// How far outside the fine mesh a coarse quadrature point may fall when a
/// fine-mesh reference is evaluated. Coarse chords of a curved boundary cut
/// slivers the refined mesh no longer covers; there the nearest fine element
/// is extrapolated.
pub const REFERENCE_EXTRAPOLATION_TOL: f64 = 2e-2;

/// Mesh size of the coarsest mesh of every study.
pub const BASE_H: f64 = 1.0;

/// A discrete solution together with its space.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub space: FESpace,
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// What errors are measured against.
#[derive(Clone, Copy)]
pub enum Reference<'a> {
    Exact { solution: &'a dyn ExactSolution, t: f64 },
    Discrete(&'a DiscreteSolution),
}

/// Velocity value/Jacobian and, when available, multiplier value/gradient.
type RefSample = (([f64; 2], [[f64; 2]; 2]), Option<(f64, [f64; 2])>);

struct Evaluator<'a> {
    reference: Reference<'a>,
    locator: Option<crate::mesh::PointLocator<'a>>,
}

impl<'a> Evaluator<'a> {
    fn new(reference: Reference<'a>) -> Self {
        let locator = match reference {
            Reference::Discrete(d) => Some(d.space.mesh.locator()),
            Reference::Exact { .. } => None,
        };
        Self { reference, locator }
    }

    fn sample(&self, p: Point2) -> Result<RefSample> {
        match self.reference {
            Reference::Exact { solution, t } => Ok((solution.velocity(p, t), solution.multiplier(p, t))),
            Reference::Discrete(d) => {
                let loc = self
                    .locator
                    .as_ref()
                    .and_then(|l| l.locate_or_nearest(p, REFERENCE_EXTRAPOLATION_TOL))
                    .ok_or(Error::OutsideMesh { point: p })?;
                let u = d.space.evaluate_vec(&d.u, loc.triangle, loc.bary);
                let lam = d.space.evaluate(&d.lambda, loc.triangle, loc.bary);
                Ok((u, Some(lam)))
            }
        }
    }
}

/// H¹ and L² norms of the velocity error, and the H¹ norm of the multiplier
/// error when the reference provides a multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub u_h1: f64,
    pub u_l2: f64,
    pub lambda_h1: Option<f64>,
}

/// Integrates the difference between `(u, λ)` and `reference` on the mesh
/// of `space` with a rule of the given order. With `kernel`, the velocity
/// difference is first projected onto the H¹-orthogonal complement of the
/// kernel basis.
pub fn error_norms(
    space: &FESpace,
    u: &[f64],
    lambda: &[f64],
    reference: Reference<'_>,
    kernel: Option<&KernelBasis>,
    order: usize,
) -> Result<ErrorNorms> {
    let eval = Evaluator::new(reference);
    let kernel = kernel.filter(|kb| kb.dim > 0);
    // Samples of e = u_ref - u_h at all quadrature points; kept because the
    // kernel projection needs two passes.
    let mut samples: Vec<(f64, [f64; 2], [[f64; 2]; 2], Vec<([f64; 2], [[f64; 2]; 2])>)> = Vec::new();
    let mut lam_sq = 0.0;
    let mut has_lambda = true;
    let tab = space.tabulate(order);
    let mut qps = Vec::with_capacity(tab.rule.len());
    for t in 0..space.mesh.n_triangles() {
        crate::assembly::element_quadrature(space, &tab, t, &mut qps);
        for (q, qp) in qps.iter().enumerate() {
            let bary = tab.rule.bary(q);
            let ((ur, jr), lr) = eval.sample(qp.point)?;
            let (uh, jh) = space.evaluate_vec(u, t, bary);
            let e = [ur[0] - uh[0], ur[1] - uh[1]];
            let je = [[jr[0][0] - jh[0][0], jr[0][1] - jh[0][1]], [jr[1][0] - jh[1][0], jr[1][1] - jh[1][1]]];
            match lr {
                Some((lv, lg)) => {
                    let (lh, gh) = space.evaluate(lambda, t, bary);
                    lam_sq += qp.weight * ((lv - lh).powi(2) + (lg[0] - gh[0]).powi(2) + (lg[1] - gh[1]).powi(2));
                }
                None => has_lambda = false,
            }
            let ws = kernel
                .map(|kb| kb.vectors.iter().map(|w| space.evaluate_vec(w, t, bary)).collect())
                .unwrap_or_default();
            samples.push((qp.weight, e, je, ws));
        }
    }
    let m = kernel.map_or(0, |kb| kb.dim);
    let mut beta = vec![0.0; m];
    for (w, e, je, ws) in &samples {
        for (j, (wv, wj)) in ws.iter().enumerate() {
            let mut s = e[0] * wv[0] + e[1] * wv[1];
            for c in 0..2 {
                for d in 0..2 {
                    s += je[c][d] * wj[c][d];
                }
            }
            beta[j] += w * s;
        }
    }
    let (mut l2, mut semi) = (0.0, 0.0);
    for (w, e, je, ws) in &samples {
        let (mut e, mut je) = (*e, *je);
        for (b, (wv, wj)) in beta.iter().zip(ws) {
            for c in 0..2 {
                e[c] -= b * wv[c];
                for d in 0..2 {
                    je[c][d] -= b * wj[c][d];
                }
            }
        }
        l2 += w * (e[0] * e[0] + e[1] * e[1]);
        semi += w * je.iter().flatten().map(|x| x * x).sum::<f64>();
    }
    Ok(ErrorNorms { u_h1: (l2 + semi).sqrt(), u_l2: l2.sqrt(), lambda_h1: has_lambda.then(|| lam_sq.sqrt()) })
}

/// Estimated orders `log₂(e_i / e_{i+1})`; `None` where either error is at
/// roundoff level (exact recovery).
pub fn eoc(errors: &[f64]) -> Vec<Option<f64>> {
    const NEGLIGIBLE: f64 = 1e-11;
    errors.windows(2).map(|w| (w[0] > NEGLIGIBLE && w[1] > NEGLIGIBLE).then(|| (w[0] / w[1]).log2())).collect()
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub level: usize,
    pub h: f64,
    pub ndof_u: usize,
    pub ndof_lambda: usize,
    pub err_u_h1: f64,
    pub err_u_l2: f64,
    pub err_lambda_h1: Option<f64>,
    /// Order between the previous level and this one.
    pub eoc_u_h1: Option<f64>,
    pub energy: f64,
    pub lambda_h1: f64,
    pub ratio: Option<f64>,
}

impl ErrorRecord {
    fn new(level: usize, space: &FESpace, norms: ErrorNorms, diag: EnergyDiagnostics) -> Self {
        Self {
            level,
            h: BASE_H / f64::from(1u32 << level),
            ndof_u: 2 * space.n_dofs(),
            ndof_lambda: space.n_dofs(),
            err_u_h1: norms.u_h1,
            err_u_l2: norms.u_l2,
            err_lambda_h1: norms.lambda_h1,
            eoc_u_h1: None,
            energy: diag.energy,
            lambda_h1: diag.lambda_h1,
            ratio: diag.ratio,
        }
    }
}

/// Fills `eoc_u_h1` from consecutive velocity errors.
pub fn fill_eoc(records: &mut [ErrorRecord]) {
    let errs: Vec<f64> = records.iter().map(|r| r.err_u_h1).collect();
    let orders = eoc(&errs);
    if let Some(first) = records.first_mut() {
        first.eoc_u_h1 = None;
    }
    for (r, o) in records.iter_mut().skip(1).zip(orders) {
        r.eoc_u_h1 = o;
    }
}

/// Multiplier orders from a study (`None` entries where no multiplier error exists).
pub fn eoc_lambda(records: &[ErrorRecord]) -> Vec<Option<f64>> {
    records
        .windows(2)
        .map(|w| match (w[0].err_lambda_h1, w[1].err_lambda_h1) {
            (Some(a), Some(b)) => eoc(&[a, b])[0],
            _ => None,
        })
        .collect()
}

pub const CSV_HEADER: [&str; 11] = [
    "level",
    "h",
    "ndof_u",
    "ndof_lambda",
    "err_u_h1",
    "err_u_l2",
    "err_lambda_h1",
    "eoc_u_h1",
    "energy",
    "lambda_h1",
    "ratio",
];

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

pub fn write_csv(records: &[ErrorRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.level.to_string(),
            fmt_f(r.h),
            r.ndof_u.to_string(),
            r.ndof_lambda.to_string(),
            fmt_f(r.err_u_h1),
            fmt_f(r.err_u_l2),
            fmt_opt(r.err_lambda_h1),
            fmt_opt(r.eoc_u_h1),
            fmt_f(r.energy),
            fmt_f(r.lambda_h1),
            fmt_opt(r.ratio),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(input: impl Read) -> Result<Vec<ErrorRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse { line: 1, message: format!("unexpected CSV header {header:?}") });
    }
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let line = i + 2;
        let bad = |what: &str| Error::Parse { line, message: format!("invalid {what}") };
        let f = |j: usize| row[j].parse::<f64>().map_err(|_| bad(CSV_HEADER[j]));
        let u = |j: usize| row[j].parse::<usize>().map_err(|_| bad(CSV_HEADER[j]));
        let opt = |j: usize| if row[j].is_empty() { Ok(None) } else { f(j).map(Some) };
        records.push(ErrorRecord {
            level: u(0)?,
            h: f(1)?,
            ndof_u: u(2)?,
            ndof_lambda: u(3)?,
            err_u_h1: f(4)?,
            err_u_l2: f(5)?,
            err_lambda_h1: opt(6)?,
            eoc_u_h1: opt(7)?,
            energy: f(8)?,
            lambda_h1: f(9)?,
            ratio: opt(10)?,
        });
    }
    Ok(records)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_report(study: &Study, dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(&study.records, std::fs::File::create(dir.join(format!("{stem}.csv")))?)?;
    let json = serde_json::to_string_pretty(study).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    std::fs::write(dir.join(format!("{stem}.json")), json)?;
    Ok(())
}

/// Parameters of a convergence study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyConfig {
    pub k: usize,
    pub boost: usize,
    pub levels: Vec<usize>,
    pub tau: f64,
    /// Measure against a solve this many levels above the finest study level
    /// instead of the exact solution.
    pub reference_levels_finer: Option<usize>,
    /// Measure velocity errors modulo the detected kernel.
    pub modulo_kernel: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Study {
    pub problem: String,
    pub config: StudyConfig,
    pub reference_level: Option<usize>,
    pub kernel_dims: Vec<usize>,
    pub records: Vec<ErrorRecord>,
}

/// Solves `problem` on the mesh `level` times refined from the base mesh.
pub fn solve_level(
    problem: &ProblemSpec,
    base: &Mesh,
    level: usize,
    k: usize,
    boost: usize,
    tau: f64,
) -> Result<(Discretization, crate::saddle::FieldSolve)> {
    let space = FESpace::new(Arc::new(base.refined(level)), k)?;
    let disc = Discretization::new(space, boost)?;
    let solve = disc.solve(problem.field.as_ref(), problem.t0, tau)?;
    Ok((disc, solve))
}

/// Solution on the mesh `level` times refined, for use as a reference.
pub fn reference_solve(
    problem: &ProblemSpec,
    level: usize,
    k: usize,
    boost: usize,
    tau: f64,
) -> Result<DiscreteSolution> {
    let base = generate_mesh(&problem.domain, BASE_H)?;
    let (disc, s) = solve_level(problem, &base, level, k, boost, tau)?;
    Ok(DiscreteSolution { space: disc.space, u: s.solution.u, lambda: s.solution.lambda })
}

/// Runs the level sweep of `cfg` and measures errors.
pub fn convergence_study(problem: &ProblemSpec, cfg: &StudyConfig) -> Result<Study> {
    if cfg.levels.is_empty() {
        return Err(Error::Config("a study needs at least one level".into()));
    }
    let base = generate_mesh(&problem.domain, BASE_H)?;
    let finest = *cfg.levels.iter().max().expect("nonempty");
    let reference_level = match cfg.reference_levels_finer {
        Some(n) if n < 2 => return Err(Error::Config("a fine reference must be at least 2 levels finer".into())),
        Some(n) => Some(finest + n),
        None if problem.exact.is_none() => {
            return Err(Error::Config(format!(
                "problem `{}` has no exact solution; a fine reference is required",
                problem.name
            )))
        }
        None => None,
    };
    let fine = match reference_level {
        Some(l) => {
            log::info!("reference solve at level {l}");
            Some(reference_solve(problem, l, cfg.k, cfg.boost, cfg.tau)?)
        }
        None => None,
    };
    let mut records = Vec::with_capacity(cfg.levels.len());
    let mut kernel_dims = Vec::with_capacity(cfg.levels.len());
    for &level in &cfg.levels {
        let (disc, s) = solve_level(problem, &base, level, cfg.k, cfg.boost, cfg.tau)?;
        let reference = match (&fine, &problem.exact) {
            (Some(f), _) => Reference::Discrete(f),
            (None, Some(exact)) => Reference::Exact { solution: exact.as_ref(), t: problem.t0 },
            (None, None) => unreachable!("checked above"),
        };
        let kernel = cfg.modulo_kernel.then_some(&s.kernel);
        let order = disc.space.quad_order(2);
        let norms = error_norms(&disc.space, &s.solution.u, &s.solution.lambda, reference, kernel, order)?;
        let diag = disc.diagnostics(&s.solution);
        log::info!("level {level}: |e_u|_1 = {:.3e}, kernel dim {}", norms.u_h1, s.kernel.dim);
        kernel_dims.push(s.kernel.dim);
        records.push(ErrorRecord::new(level, &disc.space, norms, diag));
    }
    fill_eoc(&mut records);
    Ok(Study { problem: problem.name.clone(), config: cfg.clone(), reference_level, kernel_dims, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eoc_of_geometric_sequence() {
        let o = eoc(&[0.4, 0.1, 0.025]);
        assert!((o[0].unwrap() - 2.0).abs() < 1e-14 && (o[1].unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(eoc(&[1e-3, 1e-15]), vec![None]);
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), CSV_HEADER.join(","));
    }
}
