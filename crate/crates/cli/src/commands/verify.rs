//! Self-checks: Jacobian against finite differences, determinant-sign
//! classification, kernel checks and audits of stored branch files.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crossflux::continuation::kernel_check;
use crossflux::io::{read_branch_csv, write_branch_csv, BranchRow, BRANCH_COLUMNS};
use crossflux::mesh::{StateVector, SystemProblem};
use crossflux::model::{constant_state, l2_bounds, nonexistence_check};
use crossflux::solver::fd_jacobian_error;
use crossflux::spectral::{critical_d2, mode_block, RootSigns};
use crossflux::{Grid, ModelParams};

use crate::commands::{branches::trace_all, log_samples};
use crate::config::ExperimentConfig;
use crate::{CliError, Output};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn jacobian_check(cfg: &ExperimentConfig, p: &ModelParams) -> Result<Check, CliError> {
    let v = &cfg.verify;
    let grid = Grid::new(v.jacobian_n, p.length, p.x_left)?;
    let c = constant_state(p);
    let problem = SystemProblem::new(p, &grid);
    let mut rng = ChaCha8Rng::seed_from_u64(v.seed);
    let mut worst = 0.0f64;
    for _ in 0..v.jacobian_samples {
        let u = (0..grid.n).map(|_| c.u_star * rng.random_range(0.5..1.5)).collect();
        let w = (0..grid.n).map(|_| c.v_star * rng.random_range(0.5..1.5)).collect();
        let d2 = rng.random_range(cfg.continuation.d2_floor..0.1f64.max(2.0 * cfg.continuation.d2_floor));
        let x = StateVector { u, v: w }.to_flat();
        worst = worst.max(fd_jacobian_error(&problem, &x, d2, v.fd_step)?);
    }
    Ok(Check {
        name: "jacobian_fd".into(),
        detail: format!("{} random states, n = {}, max |J - J_fd| / max(|J|, 1)", v.jacobian_samples, grid.n),
        value: worst,
        tolerance: v.jacobian_tol,
        pass: worst <= v.jacobian_tol,
    })
}

fn det_sign_check(cfg: &ExperimentConfig, p: &ModelParams) -> Check {
    let k = cfg.verify.det_grid;
    let d2s = log_samples(cfg.continuation.d2_floor, cfg.continuation.d2_max, k);
    let mut bad = 0usize;
    for j in 1..=k {
        let d_star = critical_d2(j, p);
        for &d2 in &d2s {
            let m = mode_block(j, d2, p);
            let roots_ok = match m.root_signs() {
                RootSigns::Saddle => m.mu_minus.im == 0.0 && m.mu_minus.re < 0.0 && m.mu_plus.re > 0.0,
                RootSigns::Stable => m.mu_minus.re > 0.0 && m.mu_plus.re > 0.0,
                RootSigns::Critical => true,
            };
            let near = d_star.is_some_and(|d| (d2 - d).abs() <= 1e-10 * d);
            let expect_saddle = d_star.is_some_and(|d| d2 < d);
            let sign_ok = near || (m.det < 0.0) == expect_saddle;
            if !(roots_ok && sign_ok) {
                bad += 1;
            }
        }
    }
    Check {
        name: "det_sign".into(),
        detail: format!("{k} x {k} samples of (j, d2): det < 0 exactly below d_*, root signs match"),
        value: bad as f64,
        tolerance: 0.0,
        pass: bad == 0,
    }
}

fn kernel_checks(cfg: &ExperimentConfig, p: &ModelParams, grid: &Grid) -> Result<Vec<Check>, CliError> {
    let fine = Grid::new(2 * grid.n - 1, grid.length, grid.x_left)?;
    let mut out = Vec::new();
    for &j in &cfg.continuation.j_list {
        if critical_d2(j, p).is_none() {
            continue;
        }
        let a = kernel_check(j, p, grid)?;
        let b = kernel_check(j, p, &fine)?;
        let align = a.alignment.min(b.alignment);
        let ratio = a.eigenvalue.abs() / b.eigenvalue.abs();
        out.push(Check {
            name: format!("kernel_alignment_j{j}"),
            detail: format!("alignment with (phi_j, kappa_j phi_j) at n = {} and {}", grid.n, fine.n),
            value: align,
            tolerance: cfg.verify.kernel_alignment,
            pass: align >= cfg.verify.kernel_alignment,
        });
        out.push(Check {
            name: format!("kernel_order_j{j}"),
            detail: format!("smallest eigenvalue ratio under halving h ({:.3e} -> {:.3e}), expect 4", a.eigenvalue, b.eigenvalue),
            value: ratio,
            tolerance: 1.0,
            pass: (ratio - 4.0).abs() <= 1.0,
        });
    }
    Ok(out)
}

/// `(file, rows)` for every CSV in `dir` carrying the branch header.
fn load_branch_dir(dir: &Path) -> Result<Vec<(PathBuf, Result<Vec<BranchRow>, String>)>, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let header = BRANCH_COLUMNS.join(",");
    let mut out = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(&f)?;
        if text.lines().next() != Some(header.as_str()) {
            continue;
        }
        out.push((f, read_branch_csv(text.as_bytes()).map_err(|e| e.to_string())));
    }
    Ok(out)
}

fn audit_checks(p: &ModelParams, files: &[(PathBuf, Result<Vec<BranchRow>, String>)]) -> Vec<Check> {
    let (bu, bv) = l2_bounds(p);
    let slack = 1.0 + 1e-12;
    let mut rows = 0usize;
    let mut unreadable = Vec::new();
    let mut box_bad = 0usize;
    let mut box_worst = 0.0f64;
    let mut nonexist_bad = 0usize;
    for (f, r) in files {
        let Ok(list) = r else {
            unreadable.push(f.display().to_string());
            continue;
        };
        for row in list {
            let (Some(l2_u), Some(sup_u)) = (row.l2_u, row.sup_u) else { continue };
            rows += 1;
            box_worst = box_worst.max(l2_u / bu).max(row.l2_v / bv);
            if !(l2_u <= bu * slack && row.l2_v <= bv * slack) {
                box_bad += 1;
            }
            let ok = p.with_d2(row.d2).ok().and_then(|q| nonexistence_check(&q, row.d2, sup_u.max(row.sup_v)).ok());
            if ok != Some(true) {
                nonexist_bad += 1;
            }
        }
    }
    let files_ok = unreadable.is_empty() && rows > 0;
    vec![
        Check {
            name: "branch_files".into(),
            detail: if unreadable.is_empty() {
                format!("{} system rows in {} files", rows, files.len())
            } else {
                format!("unreadable: {}", unreadable.join(", "))
            },
            value: unreadable.len() as f64,
            tolerance: 0.0,
            pass: files_ok,
        },
        Check {
            name: "l2_box".into(),
            detail: format!("rows outside |u|_2 <= {bu}, |v|_2 <= {bv}; worst fraction of bound {box_worst:.4}"),
            value: box_bad as f64,
            tolerance: 0.0,
            pass: files_ok && box_bad == 0,
        },
        Check {
            name: "nonexistence".into(),
            detail: "rows where neither necessary inequality holds at the row's own sup-norm".into(),
            value: nonexist_bad as f64,
            tolerance: 0.0,
            pass: files_ok && nonexist_bad == 0,
        },
    ]
}

pub fn checks(cfg: &ExperimentConfig, out: &Output) -> Result<Vec<Check>, CliError> {
    let p = cfg.params()?;
    let grid = cfg.grid()?;
    let mut all = vec![jacobian_check(cfg, &p)?, det_sign_check(cfg, &p)];
    all.extend(kernel_checks(cfg, &p, &grid)?);
    let dir = match &cfg.verify.branch_dir {
        Some(d) => d.clone(),
        None => {
            let mut own = cfg.clone();
            own.continuation.stability = false;
            let dir = out.subdir("branches")?;
            for (_, _, r) in trace_all(&own, &p, &grid) {
                let t = r?;
                let f = std::fs::File::create(dir.join(format!("{}.csv", t.branch.id)))?;
                write_branch_csv(std::io::BufWriter::new(f), &t.branch)?;
            }
            dir
        }
    };
    all.extend(audit_checks(&p, &load_branch_dir(&dir)?));
    Ok(all)
}

pub fn table(checks: &[Check]) -> String {
    let mut lines = vec![format!("{:<22} {:>12} {:>12}  result  detail", "check", "value", "tolerance")];
    for c in checks {
        lines.push(format!(
            "{:<22} {:>12.4e} {:>12.4e}  {:<6}  {}",
            c.name,
            c.value,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" },
            c.detail
        ));
    }
    lines.join("\n")
}

pub fn run(cfg: &ExperimentConfig, out: &Output) -> Result<String, CliError> {
    let all = checks(cfg, out)?;
    out.write_json("verify.json", &all)?;
    let t = table(&all);
    if all.iter().all(|c| c.pass) {
        Ok(t)
    } else {
        Err(CliError::Verification(format!("\n{t}")))
    }
}
