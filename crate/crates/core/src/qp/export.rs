//! Plain-text triplet export for cross-checking with external solvers.
//!
//! ```text
//! n <vars> m <rows>
//! P
//! <row> <col> <value>        one line per nonzero
//! q
//! <value>                    one line per variable
//! A
//! <row> <col> <value>
//! l
//! <value>                    `inf` / `-inf` for missing bounds
//! u
//! <value>
//! offset <value>
//! ```

use std::fmt::Write;

use nalgebra::{DMatrix, DVector};

use super::problem::QpProblem;

fn triplets(out: &mut String, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] != 0.0 {
                writeln!(out, "{i} {j} {:.17e}", m[(i, j)]).expect("writing to a string");
            }
        }
    }
}

fn values(out: &mut String, v: &DVector<f64>) {
    for x in v.iter() {
        writeln!(out, "{x:.17e}").expect("writing to a string");
    }
}

pub fn export_triplets(qp: &QpProblem) -> String {
    let mut out = String::new();
    writeln!(out, "n {} m {}", qp.n(), qp.rows()).expect("writing to a string");
    out.push_str("P\n");
    triplets(&mut out, &qp.p);
    out.push_str("q\n");
    values(&mut out, &qp.q);
    out.push_str("A\n");
    triplets(&mut out, &qp.a);
    out.push_str("l\n");
    values(&mut out, &qp.l);
    out.push_str("u\n");
    values(&mut out, &qp.u);
    writeln!(out, "offset {:.17e}", qp.offset).expect("writing to a string");
    out
}
