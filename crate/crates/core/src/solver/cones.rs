//! Cone arithmetic for the interior-point method: Nesterov-Todd scaling,
//! Jordan products and step-length computations for the nonnegative orthant
//! and second-order cones.

/// A cone block inside the inequality part `h - G x ∈ K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Nonneg { start: usize, dim: usize },
    Soc { start: usize, dim: usize },
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        match *self {
            Block::Nonneg { start, dim } | Block::Soc { start, dim } => start..start + dim,
        }
    }

    /// Barrier degree contributed by the block.
    pub fn degree(&self) -> usize {
        match *self {
            Block::Nonneg { dim, .. } => dim,
            Block::Soc { .. } => 1,
        }
    }
}

/// NT scaling data for one block.
#[derive(Debug, Clone)]
pub enum Scaling {
    /// `W = diag(w)`.
    Nonneg { w: Vec<f64> },
    /// `W = eta * [[wb0, wb1ᵀ], [wb1, I + wb1 wb1ᵀ / (1 + wb0)]]`.
    Soc { eta: f64, wb: Vec<f64> },
}

fn soc_residual(u: &[f64]) -> f64 {
    let tail: f64 = u[1..].iter().map(|v| v * v).sum();
    (u[0] - tail.sqrt()) * (u[0] + tail.sqrt())
}

/// Distance measure used to shift an initial point into the interior:
/// returns the smallest `a` such that `u + a e` is on the cone boundary.
pub fn interior_margin(block: &Block, u: &[f64]) -> f64 {
    match block {
        Block::Nonneg { .. } => -u.iter().cloned().fold(f64::INFINITY, f64::min),
        Block::Soc { .. } => {
            let tail: f64 = u[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            tail - u[0]
        }
    }
}

pub fn add_identity(block: &Block, u: &mut [f64], a: f64) {
    match block {
        Block::Nonneg { .. } => u.iter_mut().for_each(|v| *v += a),
        Block::Soc { .. } => u[0] += a,
    }
}

impl Scaling {
    pub fn compute(block: &Block, s: &[f64], z: &[f64]) -> Option<Self> {
        match block {
            Block::Nonneg { .. } => {
                let w: Vec<f64> = s.iter().zip(z).map(|(s, z)| (s / z).sqrt()).collect();
                if w.iter().all(|v| v.is_finite() && *v > 0.0) {
                    Some(Scaling::Nonneg { w })
                } else {
                    None
                }
            }
            Block::Soc { .. } => {
                let sres = soc_residual(s);
                let zres = soc_residual(z);
                if sres <= 0.0 || zres <= 0.0 || s[0] <= 0.0 || z[0] <= 0.0 {
                    return None;
                }
                let snorm = sres.sqrt();
                let znorm = zres.sqrt();
                let sb: Vec<f64> = s.iter().map(|v| v / snorm).collect();
                let zb: Vec<f64> = z.iter().map(|v| v / znorm).collect();
                let dot: f64 = sb.iter().zip(&zb).map(|(a, b)| a * b).sum();
                let gamma = ((1.0 + dot) / 2.0).sqrt();
                let mut wb = vec![0.0; s.len()];
                wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
                for i in 1..s.len() {
                    wb[i] = (sb[i] - zb[i]) / (2.0 * gamma);
                }
                let eta = (snorm / znorm).sqrt();
                Some(Scaling::Soc { eta, wb })
            }
        }
    }

    /// `out = W u`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Nonneg { w } => {
                for i in 0..u.len() {
                    out[i] = w[i] * u[i];
                }
            }
            Scaling::Soc { eta, wb } => soc_apply(*eta, wb, u, out, false),
        }
    }

    /// `out = W⁻¹ u`.
    pub fn apply_inv(&self, u: &[f64], out: &mut [f64]) {
        match self {
            Scaling::Nonneg { w } => {
                for i in 0..u.len() {
                    out[i] = u[i] / w[i];
                }
            }
            Scaling::Soc { eta, wb } => soc_apply(1.0 / eta, wb, u, out, true),
        }
    }

    /// Dense `W²` in row-major order (diagonal only for the orthant).
    pub fn squared(&self) -> Vec<f64> {
        match self {
            Scaling::Nonneg { w } => w.iter().map(|v| v * v).collect(),
            Scaling::Soc { eta, wb } => {
                let n = wb.len();
                let mut wm = vec![0.0; n * n];
                let mut e = vec![0.0; n];
                let mut col = vec![0.0; n];
                for j in 0..n {
                    e.iter_mut().for_each(|v| *v = 0.0);
                    e[j] = 1.0;
                    soc_apply(*eta, wb, &e, &mut col, false);
                    for i in 0..n {
                        wm[i * n + j] = col[i];
                    }
                }
                let mut sq = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = 0.0;
                        for k in 0..n {
                            acc += wm[i * n + k] * wm[k * n + j];
                        }
                        sq[i * n + j] = acc;
                    }
                }
                sq
            }
        }
    }
}

fn soc_apply(eta: f64, wb: &[f64], u: &[f64], out: &mut [f64], inverse: bool) {
    let n = wb.len();
    let sgn = if inverse { -1.0 } else { 1.0 };
    let tail_dot: f64 = (1..n).map(|i| wb[i] * u[i]).sum();
    out[0] = eta * (wb[0] * u[0] + sgn * tail_dot);
    let coef = sgn * u[0] + tail_dot / (1.0 + wb[0]);
    for i in 1..n {
        out[i] = eta * (u[i] + coef * wb[i]);
    }
}

/// Jordan product `u ∘ v`.
pub fn jordan_product(block: &Block, u: &[f64], v: &[f64], out: &mut [f64]) {
    match block {
        Block::Nonneg { .. } => {
            for i in 0..u.len() {
                out[i] = u[i] * v[i];
            }
        }
        Block::Soc { .. } => {
            out[0] = u.iter().zip(v).map(|(a, b)| a * b).sum();
            for i in 1..u.len() {
                out[i] = u[0] * v[i] + v[0] * u[i];
            }
        }
    }
}

/// Solves `lambda ∘ x = v` for `x`.
pub fn jordan_divide(block: &Block, lambda: &[f64], v: &[f64], out: &mut [f64]) {
    match block {
        Block::Nonneg { .. } => {
            for i in 0..v.len() {
                out[i] = v[i] / lambda[i];
            }
        }
        Block::Soc { .. } => {
            let rho = soc_residual(lambda);
            let tail_dot: f64 = (1..v.len()).map(|i| lambda[i] * v[i]).sum();
            let x0 = (lambda[0] * v[0] - tail_dot) / rho;
            out[0] = x0;
            for i in 1..v.len() {
                out[i] = (v[i] - x0 * lambda[i]) / lambda[0];
            }
        }
    }
}

/// Largest `a` in `(0, cap]` with `u + a d` inside the cone.
pub fn max_step(block: &Block, u: &[f64], d: &[f64], cap: f64) -> f64 {
    match block {
        Block::Nonneg { .. } => {
            let mut a = cap;
            for i in 0..u.len() {
                if d[i] < 0.0 {
                    a = a.min(-u[i] / d[i]);
                }
            }
            a
        }
        Block::Soc { .. } => {
            // (u0 + a d0)^2 - |u1 + a d1|^2 >= 0 and u0 + a d0 >= 0
            let qa = d[0] * d[0] - d[1..].iter().map(|v| v * v).sum::<f64>();
            let qb = u[0] * d[0] - u[1..].iter().zip(&d[1..]).map(|(a, b)| a * b).sum::<f64>();
            let qc = soc_residual(u).max(0.0);
            let mut a = cap;
            if d[0] < 0.0 {
                a = a.min(-u[0] / d[0]);
            }
            // roots of qa a^2 + 2 qb a + qc
            let disc = qb * qb - qa * qc;
            if qa.abs() < 1e-300 {
                if qb < 0.0 {
                    a = a.min(-qc / (2.0 * qb));
                }
            } else if disc >= 0.0 {
                let sq = disc.sqrt();
                // numerically stable root pair
                let t = -(qb + qb.signum() * sq);
                let r1 = t / qa;
                let r2 = if t != 0.0 { qc / t } else { f64::INFINITY };
                for r in [r1, r2] {
                    if r > 0.0 {
                        a = a.min(r);
                    }
                }
            }
            a.max(0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nt_scaling_maps_z_and_s_to_same_point() {
        let b = Block::Soc { start: 0, dim: 4 };
        let s = [2.0, 0.3, -0.4, 0.5];
        let z = [1.5, -0.2, 0.1, 0.7];
        let w = Scaling::compute(&b, &s, &z).unwrap();
        let mut wz = [0.0; 4];
        let mut winv_s = [0.0; 4];
        w.apply(&z, &mut wz);
        w.apply_inv(&s, &mut winv_s);
        for i in 0..4 {
            assert!((wz[i] - winv_s[i]).abs() < 1e-12, "{wz:?} {winv_s:?}");
        }
    }

    #[test]
    fn jordan_divide_inverts_product() {
        let b = Block::Soc { start: 0, dim: 3 };
        let lam = [2.0, 0.5, -0.7];
        let x = [0.3, 1.1, -0.2];
        let mut v = [0.0; 3];
        jordan_product(&b, &lam, &x, &mut v);
        let mut back = [0.0; 3];
        jordan_divide(&b, &lam, &v, &mut back);
        for i in 0..3 {
            assert!((back[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn soc_step_hits_boundary() {
        let b = Block::Soc { start: 0, dim: 2 };
        // u = (1, 0), d = (0, 1): boundary when |a| = 1
        let a = max_step(&b, &[1.0, 0.0], &[0.0, 1.0], 10.0);
        assert!((a - 1.0).abs() < 1e-12);
        let a = max_step(&b, &[1.0, 0.0], &[1.0, 0.5], 10.0);
        assert_eq!(a, 10.0);
    }
}
