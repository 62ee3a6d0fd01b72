//! Conic programming back end.
//!
//! Programs are expressed in a solver-agnostic standard form
//!
//! ```text
//! minimize    cᵀx
//! subject to  b - A x ∈ K,   K = K₁ × K₂ × …
//! ```
//!
//! where each `Kᵢ` is the zero cone (equalities), the nonnegative orthant or a
//! second-order cone `{(t, u) : ‖u‖ ≤ t}`. Rows of `A` are laid out cone by
//! cone in the order of [`ConvexProgram::cones`].

mod cones;
mod ipm;
pub mod ldl;

use serde::{Deserialize, Serialize};

pub use ipm::solve;

/// Cone block of the standard form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "dims", rename_all = "snake_case")]
pub enum Cone {
    Zero(usize),
    Nonneg(usize),
    Soc(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero(d) | Cone::Nonneg(d) | Cone::Soc(d) => d,
        }
    }
}

/// Sparse matrix in triplet form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Triplets {
    pub m: usize,
    pub n: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Triplets {
    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        if val != 0.0 {
            self.rows.push(row);
            self.cols.push(col);
            self.vals.push(val);
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

/// Linear objective over linear and second-order-cone constraints.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvexProgram {
    pub c: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Triplets,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

impl ConvexProgram {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// Checks that dimensions agree and the cone list covers every row.
    pub fn check(&self) -> Result<(), String> {
        let m: usize = self.cones.iter().map(Cone::dim).sum();
        if m != self.b.len() || self.a.m != m {
            return Err(format!(
                "cone dimensions sum to {m} but program has {} rows (A has {})",
                self.b.len(),
                self.a.m
            ));
        }
        if self.a.n != self.c.len() {
            return Err(format!(
                "A has {} columns but c has {} entries",
                self.a.n,
                self.c.len()
            ));
        }
        if self.a.rows.iter().any(|&r| r >= m) || self.a.cols.iter().any(|&c| c >= self.a.n) {
            return Err("triplet index out of range".into());
        }
        for cone in &self.cones {
            if let Cone::Soc(d) = cone {
                if *d < 2 {
                    return Err("second-order cones need at least two rows".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub max_iter: usize,
    /// Primal/dual feasibility tolerance (relative).
    pub feas_tol: f64,
    /// Absolute duality gap tolerance.
    pub gap_abs_tol: f64,
    /// Relative duality gap tolerance.
    pub gap_rel_tol: f64,
    /// Tolerance of infeasibility certificates.
    pub infeas_tol: f64,
    pub static_reg: f64,
    pub refine_steps: usize,
    /// Accuracy accepted as optimal when progress stalls before the full
    /// tolerances are met.
    pub reduced_tol: f64,
    /// Print one line per iteration to stderr.
    pub verbose: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            max_iter: 120,
            feas_tol: 1e-8,
            gap_abs_tol: 1e-9,
            gap_rel_tol: 1e-8,
            infeas_tol: 1e-8,
            static_reg: 1e-10,
            refine_steps: 6,
            reduced_tol: 1e-6,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    NumericalError,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub x: Vec<f64>,
    /// Dual variables, one per row.
    pub z: Vec<f64>,
    /// Slacks `b - A x`.
    pub s: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

#[cfg(test)]
mod tests;
