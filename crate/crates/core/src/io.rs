//! CSV files for states and branches.
//!
//! Floats are written with 17 significant digits so that reading a file back
//! reproduces the `f64` values exactly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::continuation::{Branch, Origin};
use crate::error::{Error, Result};
use crate::limit::ScalarBranch;
use crate::mesh::{Grid, StateVector};
use crate::scalar::Scalar;

pub const BRANCH_COLUMNS: [&str; 11] = [
    "id",
    "j_origin",
    "s",
    "d2",
    "l2_u",
    "l2_v",
    "sup_u",
    "sup_v",
    "ratio_defect",
    "stability_index",
    "fold_count",
];

pub fn fmt_float<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

/// Writes `x,u,v` rows after a `# n=.., length=.., x_left=.., d2=..` line.
pub fn write_state_csv<T: Scalar, W: Write>(out: W, state: &StateVector<T>, grid: &Grid<T>, d2: T) -> Result<()> {
    state.check(grid)?;
    let mut out = out;
    writeln!(
        out,
        "# n={} length={} x_left={} d2={}",
        grid.n,
        fmt_float(grid.length),
        fmt_float(grid.x_left),
        fmt_float(d2)
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "u", "v"])?;
    for i in 0..grid.n {
        w.write_record([fmt_float(grid.x(i)), fmt_float(state.u[i]), fmt_float(state.v[i])])?;
    }
    w.flush()?;
    Ok(())
}

/// A state file read back: grid, state and `d2` from the header line.
#[derive(Debug, Clone, PartialEq)]
pub struct StateFile {
    pub grid: Grid<f64>,
    pub state: StateVector<f64>,
    pub d2: f64,
}

fn header_value(header: &str, key: &str) -> Result<f64> {
    header
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| Error::Io(format!("state file header lacks {key}")))?
        .parse()
        .map_err(|e| Error::Io(format!("bad {key} in state header: {e}")))
}

pub fn read_state_csv<R: Read>(mut input: R) -> Result<StateFile> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let (header, body) = text.split_once('\n').ok_or_else(|| Error::Io("empty state file".into()))?;
    let header = header
        .strip_prefix('#')
        .ok_or_else(|| Error::Io("state file must start with a '#' header".into()))?;
    let n = header_value(header, "n")? as usize;
    let grid = Grid::new(n, header_value(header, "length")?, header_value(header, "x_left")?)?;
    let d2 = header_value(header, "d2")?;
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let (mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for rec in rdr.deserialize() {
        let (_, ui, vi): (f64, f64, f64) = rec?;
        u.push(ui);
        v.push(vi);
    }
    let state = StateVector { u, v };
    state.check(&grid)?;
    Ok(StateFile { grid, state, d2 })
}

/// One row of a branch file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchRow {
    pub id: String,
    pub j_origin: String,
    pub s: f64,
    pub d2: f64,
    /// Empty for scalar-limit branches, like `sup_u` and `ratio_defect`.
    pub l2_u: Option<f64>,
    pub l2_v: f64,
    pub sup_u: Option<f64>,
    pub sup_v: f64,
    pub ratio_defect: Option<f64>,
    /// Empty when unknown.
    pub stability_index: Option<usize>,
    pub fold_count: usize,
}

fn origin_tag(origin: &Origin) -> String {
    match origin {
        Origin::Trivial => "trivial".into(),
        Origin::Bifurcation { j, .. } => j.to_string(),
        Origin::Limit { .. } => "limit".into(),
    }
}

pub fn write_branch_csv<T: Scalar, W: Write>(out: W, branch: &Branch<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BRANCH_COLUMNS)?;
    let tag = origin_tag(&branch.origin);
    for p in &branch.points {
        w.write_record([
            branch.id.clone(),
            tag.clone(),
            fmt_float(p.s),
            fmt_float(p.d2),
            fmt_float(p.norms.l2_u),
            fmt_float(p.norms.l2_v),
            fmt_float(p.norms.sup_u),
            fmt_float(p.norms.sup_v),
            fmt_float(p.ratio_defect),
            p.stability_index.map(|k| k.to_string()).unwrap_or_default(),
            branch.fold_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Scalar branches use the same columns; `u` columns are left empty.
pub fn write_scalar_branch_csv<T: Scalar, W: Write>(out: W, branch: &ScalarBranch<T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BRANCH_COLUMNS)?;
    for p in &branch.points {
        w.write_record([
            branch.id.clone(),
            "limit".to_string(),
            fmt_float(p.s),
            fmt_float(p.d2),
            String::new(),
            fmt_float(p.l2_v),
            String::new(),
            fmt_float(p.sup_v),
            String::new(),
            String::new(),
            branch.fold_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a branch file written by either writer.
pub fn read_branch_csv<R: Read>(input: R) -> Result<Vec<BranchRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(BRANCH_COLUMNS) {
        return Err(Error::Io(format!("unexpected branch columns: {headers:?}")));
    }
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<BranchRow>, _>>()?)
}
