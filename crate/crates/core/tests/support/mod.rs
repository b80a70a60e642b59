//! Exact oracles shared by the core tests and the workspace acceptance run.
#![allow(dead_code)]

pub mod exact;
pub mod gformula;

/// Row-major `s * I_d`.
pub fn ident(d: usize, s: f64) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = s;
    }
    m
}
