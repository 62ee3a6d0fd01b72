//! Primal-dual interior-point method on the homogeneous self-dual embedding
//! with Nesterov-Todd scaling and Mehrotra predictor-corrector steps.

use super::cones::{self, Block, Scaling};
use super::ldl::{KktPattern, LdlFactor};
use super::{Cone, ConvexProgram, Outcome, Settings, Status};

/// Row-compressed sparse matrix used for products with `A` and `G`.
struct Csr {
    m: usize,
    ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
}

impl Csr {
    fn from_rows(m: usize, entries: &mut [(usize, usize, f64)]) -> Self {
        entries.sort_unstable_by_key(|e| (e.0, e.1));
        let mut ptr = vec![0; m + 1];
        for e in entries.iter() {
            ptr[e.0 + 1] += 1;
        }
        for i in 0..m {
            ptr[i + 1] += ptr[i];
        }
        Self {
            m,
            ptr,
            col: entries.iter().map(|e| e.1).collect(),
            val: entries.iter().map(|e| e.2).collect(),
        }
    }

    /// `y += alpha * M x`
    fn mul_add(&self, x: &[f64], alpha: f64, y: &mut [f64]) {
        for i in 0..self.m {
            let mut acc = 0.0;
            for k in self.ptr[i]..self.ptr[i + 1] {
                acc += self.val[k] * x[self.col[k]];
            }
            y[i] += alpha * acc;
        }
    }

    /// `y += alpha * Mᵀ x`
    fn tmul_add(&self, x: &[f64], alpha: f64, y: &mut [f64]) {
        for i in 0..self.m {
            let xi = alpha * x[i];
            if xi == 0.0 {
                continue;
            }
            for k in self.ptr[i]..self.ptr[i + 1] {
                y[self.col[k]] += self.val[k] * xi;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Problem {
    n: usize,
    p: usize,
    m: usize,
    c: Vec<f64>,
    a: Csr,
    b: Vec<f64>,
    g: Csr,
    h: Vec<f64>,
    blocks: Vec<Block>,
    /// Map from standard-form row to (is_equality, index in A or G).
    row_map: Vec<(bool, usize)>,
}

impl Problem {
    fn split(prog: &ConvexProgram) -> Self {
        let mut row_map = Vec::with_capacity(prog.num_rows());
        let mut blocks = Vec::new();
        let (mut p, mut m) = (0, 0);
        for cone in &prog.cones {
            match *cone {
                Cone::Zero(d) => {
                    for _ in 0..d {
                        row_map.push((true, p));
                        p += 1;
                    }
                }
                Cone::Nonneg(d) | Cone::Soc(d) => {
                    blocks.push(match cone {
                        Cone::Soc(_) => Block::Soc { start: m, dim: d },
                        _ => Block::Nonneg { start: m, dim: d },
                    });
                    for _ in 0..d {
                        row_map.push((false, m));
                        m += 1;
                    }
                }
            }
        }
        // merge adjacent orthant blocks
        let mut merged: Vec<Block> = Vec::with_capacity(blocks.len());
        for b in blocks {
            if let (Some(Block::Nonneg { dim: last, .. }), Block::Nonneg { dim, .. }) =
                (merged.last_mut(), b)
            {
                *last += dim;
                continue;
            }
            merged.push(b);
        }

        let mut ae = Vec::new();
        let mut ge = Vec::new();
        for k in 0..prog.a.nnz() {
            let (eq, r) = row_map[prog.a.rows[k]];
            let e = (r, prog.a.cols[k], prog.a.vals[k]);
            if eq {
                ae.push(e);
            } else {
                ge.push(e);
            }
        }
        let mut b = vec![0.0; p];
        let mut h = vec![0.0; m];
        for (row, &(eq, r)) in row_map.iter().enumerate() {
            if eq {
                b[r] = prog.b[row];
            } else {
                h[r] = prog.b[row];
            }
        }
        Self {
            n: prog.num_vars(),
            p,
            m,
            c: prog.c.clone(),
            a: Csr::from_rows(p, &mut ae),
            b,
            g: Csr::from_rows(m, &mut ge),
            h,
            blocks: merged,
            row_map,
        }
    }

    fn degree(&self) -> usize {
        self.blocks.iter().map(Block::degree).sum()
    }
}

/// KKT system `[[δI, Aᵀ, Gᵀ], [A, -δI, 0], [G, 0, -W² - δI]]`.
struct Kkt {
    pattern: KktPattern,
    factor: LdlFactor,
    vals: Vec<f64>,
    /// first triplet index of the scaling block
    w_start: usize,
    slots: Vec<f64>,
    signs: Vec<f64>,
    work: Vec<f64>,
    static_reg: f64,
    w2: Vec<Vec<f64>>,
}

impl Kkt {
    fn new(pb: &Problem, static_reg: f64) -> Self {
        let (n, p) = (pb.n, pb.p);
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        let mut push = |r: usize, c: usize, v: f64| entries.push((r, c, v));
        for i in 0..n {
            push(i, i, static_reg);
        }
        for i in 0..pb.p {
            for k in pb.a.ptr[i]..pb.a.ptr[i + 1] {
                push(pb.a.col[k], n + i, pb.a.val[k]);
            }
            push(n + i, n + i, -static_reg);
        }
        for i in 0..pb.m {
            for k in pb.g.ptr[i]..pb.g.ptr[i + 1] {
                push(pb.g.col[k], n + p + i, pb.g.val[k]);
            }
        }
        let w_start = n + pb.a.val.len() + pb.p + pb.g.val.len();
        for b in &pb.blocks {
            match *b {
                Block::Nonneg { start, dim } => {
                    for i in start..start + dim {
                        push(n + p + i, n + p + i, -1.0);
                    }
                }
                Block::Soc { start, dim } => {
                    for i in 0..dim {
                        for j in i..dim {
                            push(n + p + start + i, n + p + start + j, if i == j { -1.0 } else { 0.0 });
                        }
                    }
                }
            }
        }
        let rows: Vec<usize> = entries.iter().map(|e| e.0).collect();
        let cols: Vec<usize> = entries.iter().map(|e| e.1).collect();
        let vals: Vec<f64> = entries.iter().map(|e| e.2).collect();
        let dim = n + p + pb.m;
        let pattern = KktPattern::new(dim, &rows, &cols);
        let factor = LdlFactor::symbolic(&pattern);
        let mut signs = vec![-1.0; dim];
        signs[..n].iter_mut().for_each(|s| *s = 1.0);
        Self {
            pattern,
            factor,
            vals,
            w_start,
            slots: Vec::new(),
            signs,
            work: Vec::new(),
            static_reg,
            w2: Vec::new(),
        }
    }

    fn update(&mut self, pb: &Problem, scalings: &[Scaling]) -> bool {
        self.w2 = scalings.iter().map(Scaling::squared).collect();
        let mut k = self.w_start;
        for (b, w2) in pb.blocks.iter().zip(&self.w2) {
            match *b {
                Block::Nonneg { dim, .. } => {
                    for i in 0..dim {
                        self.vals[k] = -w2[i] - self.static_reg;
                        k += 1;
                    }
                }
                Block::Soc { dim, .. } => {
                    for i in 0..dim {
                        for j in i..dim {
                            let reg = if i == j { self.static_reg } else { 0.0 };
                            self.vals[k] = -w2[i * dim + j] - reg;
                            k += 1;
                        }
                    }
                }
            }
        }
        self.pattern.assemble(&self.vals, &mut self.slots);
        self.factor
            .factor(&self.pattern, &self.slots, &self.signs, 1e-14, 1e-8)
            .is_ok()
    }

    /// Unregularized KKT product.
    fn mul(&self, pb: &Problem, u: &[f64], out: &mut [f64]) {
        let (n, p) = (pb.n, pb.p);
        out.iter_mut().for_each(|v| *v = 0.0);
        let (x, rest) = u.split_at(n);
        let (y, z) = rest.split_at(p);
        {
            let (ox, orest) = out.split_at_mut(n);
            let (oy, oz) = orest.split_at_mut(p);
            pb.a.tmul_add(y, 1.0, ox);
            pb.g.tmul_add(z, 1.0, ox);
            pb.a.mul_add(x, 1.0, oy);
            pb.g.mul_add(x, 1.0, oz);
            for (b, w2) in pb.blocks.iter().zip(&self.w2) {
                match *b {
                    Block::Nonneg { start, dim } => {
                        for i in 0..dim {
                            oz[start + i] -= w2[i] * z[start + i];
                        }
                    }
                    Block::Soc { start, dim } => {
                        for i in 0..dim {
                            let mut acc = 0.0;
                            for j in 0..dim {
                                acc += w2[i * dim + j] * z[start + j];
                            }
                            oz[start + i] -= acc;
                        }
                    }
                }
            }
        }
    }

    fn solve(&mut self, pb: &Problem, rhs: &[f64], refine: usize) -> Vec<f64> {
        let mut u = rhs.to_vec();
        self.factor.solve_in_place(&mut u, &mut self.work);
        let mut r = vec![0.0; rhs.len()];
        let rhs_norm = norm(rhs).max(1.0);
        let mut last = f64::INFINITY;
        for _ in 0..refine {
            self.mul(pb, &u, &mut r);
            for i in 0..r.len() {
                r[i] = rhs[i] - r[i];
            }
            let rn = norm(&r);
            if rn <= 1e-14 * rhs_norm || rn >= 0.5 * last {
                break;
            }
            last = rn;
            self.factor.solve_in_place(&mut r, &mut self.work);
            for i in 0..u.len() {
                u[i] += r[i];
            }
        }
        u
    }
}

#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

fn shift_into_cone(pb: &Problem, u: &mut [f64]) {
    let mut alpha = f64::NEG_INFINITY;
    for b in &pb.blocks {
        alpha = alpha.max(cones::interior_margin(b, &u[b.range()]));
    }
    let shift = if alpha < 0.0 { 0.0 } else { 1.0 + alpha };
    if shift > 0.0 {
        for b in &pb.blocks {
            let r = b.range();
            cones::add_identity(b, &mut u[r], shift);
        }
    }
}

fn max_step(pb: &Problem, it: &Iterate, ds: &[f64], dz: &[f64], dtau: f64, dkap: f64) -> f64 {
    let mut a: f64 = 1.0 / 0.99;
    for b in &pb.blocks {
        let r = b.range();
        a = cones::max_step(b, &it.s[r.clone()], &ds[r.clone()], a);
        a = cones::max_step(b, &it.z[r.clone()], &dz[r], a);
    }
    if dtau < 0.0 {
        a = a.min(-it.tau / dtau);
    }
    if dkap < 0.0 {
        a = a.min(-it.kappa / dkap);
    }
    a
}

/// Solves a conic program. Deterministic for identical inputs.
pub fn solve(prog: &ConvexProgram, settings: &Settings) -> Outcome {
    if let Err(_msg) = prog.check() {
        return failed(prog, Status::NumericalError, 0);
    }
    let pb = Problem::split(prog);
    let (n, p, m) = (pb.n, pb.p, pb.m);
    let dim = n + p + m;
    let mut kkt = Kkt::new(&pb, settings.static_reg);

    // initial point with identity scaling
    let ident: Vec<Scaling> = pb
        .blocks
        .iter()
        .map(|b| match *b {
            Block::Nonneg { dim, .. } => Scaling::Nonneg { w: vec![1.0; dim] },
            Block::Soc { dim, .. } => {
                let mut wb = vec![0.0; dim];
                wb[0] = 1.0;
                Scaling::Soc { eta: 1.0, wb }
            }
        })
        .collect();
    if !kkt.update(&pb, &ident) {
        return failed(prog, Status::NumericalError, 0);
    }
    let mut rhs = vec![0.0; dim];
    rhs[n..n + p].copy_from_slice(&pb.b);
    rhs[n + p..].copy_from_slice(&pb.h);
    let u = kkt.solve(&pb, &rhs, settings.refine_steps);
    let x0 = u[..n].to_vec();
    let mut s0: Vec<f64> = u[n + p..].iter().map(|v| -v).collect();
    shift_into_cone(&pb, &mut s0);
    rhs.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        rhs[i] = -pb.c[i];
    }
    let u = kkt.solve(&pb, &rhs, settings.refine_steps);
    let y0 = u[n..n + p].to_vec();
    let mut z0 = u[n + p..].to_vec();
    shift_into_cone(&pb, &mut z0);

    let mut it = Iterate {
        x: x0,
        y: y0,
        z: z0,
        s: s0,
        tau: 1.0,
        kappa: 1.0,
    };

    let bh_norm = (norm(&pb.b).powi(2) + norm(&pb.h).powi(2)).sqrt();
    let c_norm = norm(&pb.c);
    let degree = pb.degree() as f64;

    let mut rx = vec![0.0; n];
    let mut ry = vec![0.0; p];
    let mut rz = vec![0.0; m];
    let mut lambda = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    let mut tmp2 = vec![0.0; m];

    let mut status = Status::MaxIterations;
    let mut iters = 0;
    let mut last_res = (f64::NAN, f64::NAN, f64::NAN);
    let mut best: Option<(f64, Iterate, (f64, f64, f64))> = None;
    for iter in 0..settings.max_iter {
        iters = iter;
        // residuals
        rx.iter_mut().for_each(|v| *v = 0.0);
        pb.a.tmul_add(&it.y, 1.0, &mut rx);
        pb.g.tmul_add(&it.z, 1.0, &mut rx);
        let aty_gtz_norm = norm(&rx);
        for i in 0..n {
            rx[i] += pb.c[i] * it.tau;
        }
        // rx now holds A'y + G'z + c tau; the Newton residual is its negation
        ry.iter_mut().for_each(|v| *v = 0.0);
        pb.a.mul_add(&it.x, 1.0, &mut ry);
        let ax_norm = norm(&ry);
        for i in 0..p {
            ry[i] -= pb.b[i] * it.tau;
        }
        rz.iter_mut().for_each(|v| *v = 0.0);
        pb.g.mul_add(&it.x, 1.0, &mut rz);
        let gxs: Vec<f64> = rz.iter().zip(&it.s).map(|(g, s)| g + s).collect();
        let gxs_norm = norm(&gxs);
        for i in 0..m {
            rz[i] = gxs[i] - pb.h[i] * it.tau;
        }
        let cx = dot(&pb.c, &it.x);
        let by = dot(&pb.b, &it.y);
        let hz = dot(&pb.h, &it.z);
        let rtau = it.kappa + cx + by + hz;

        let sz = dot(&it.s, &it.z);
        let mu = (sz + it.tau * it.kappa) / (degree + 1.0);

        let pres = (ry.iter().chain(&rz).map(|v| v * v).sum::<f64>()).sqrt() / it.tau / (1.0 + bh_norm);
        let dres = norm(&rx) / it.tau / (1.0 + c_norm);
        let pcost = cx / it.tau;
        let dcost = -(by + hz) / it.tau;
        let gap = sz / (it.tau * it.tau);
        let relgap = if pcost < 0.0 {
            gap / -pcost
        } else if dcost > 0.0 {
            gap / dcost
        } else {
            f64::INFINITY
        };
        last_res = (pres, dres, gap);
        let merit = pres.max(dres).max(gap.min(relgap));
        if merit.is_finite() && best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, it.clone(), last_res));
        }
        if settings.verbose {
            eprintln!(
                "{iter:3} pcost {pcost:+.6e} dcost {dcost:+.6e} pres {pres:.2e} dres {dres:.2e} gap {gap:.2e} tau {:.2e} kap {:.2e}",
                it.tau, it.kappa
            );
        }
        if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
            status = Status::NumericalError;
            break;
        }
        if pres < settings.feas_tol
            && dres < settings.feas_tol
            && (gap < settings.gap_abs_tol || relgap < settings.gap_rel_tol)
        {
            status = Status::Optimal;
            break;
        }
        if by + hz < 0.0 && aty_gtz_norm / -(by + hz) < settings.infeas_tol {
            status = Status::PrimalInfeasible;
            break;
        }
        if cx < 0.0 && ax_norm.max(gxs_norm) / -cx < settings.infeas_tol {
            status = Status::DualInfeasible;
            break;
        }

        // scaling
        let mut scalings = Vec::with_capacity(pb.blocks.len());
        let mut ok = true;
        for b in &pb.blocks {
            let r = b.range();
            match Scaling::compute(b, &it.s[r.clone()], &it.z[r.clone()]) {
                Some(w) => {
                    w.apply(&it.z[r.clone()], &mut lambda[r]);
                    scalings.push(w);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok || !kkt.update(&pb, &scalings) {
            if settings.verbose {
                eprintln!("scaling or factorization failed (scaling ok: {ok})");
            }
            status = Status::NumericalError;
            break;
        }

        // direction for the tau coefficient
        let mut rhs1 = vec![0.0; dim];
        for i in 0..n {
            rhs1[i] = -pb.c[i];
        }
        rhs1[n..n + p].copy_from_slice(&pb.b);
        rhs1[n + p..].copy_from_slice(&pb.h);
        let u1 = kkt.solve(&pb, &rhs1, settings.refine_steps);
        let denom_base = dot(&pb.c, &u1[..n]) + dot(&pb.b, &u1[n..n + p]) + dot(&pb.h, &u1[n + p..]);

        // solve for a direction given complementarity targets
        let mut direction = |ds_target: &[f64], dk_target: f64, factor: f64| {
            // ds_tilde = W (lambda \ ds_target)
            let mut ds_tilde = vec![0.0; m];
            let mut t = vec![0.0; m];
            for (b, w) in pb.blocks.iter().zip(&scalings) {
                let r = b.range();
                cones::jordan_divide(b, &lambda[r.clone()], &ds_target[r.clone()], &mut t[r.clone()]);
                w.apply(&t[r.clone()], &mut ds_tilde[r]);
            }
            let mut rhs2 = vec![0.0; dim];
            for i in 0..n {
                rhs2[i] = -factor * rx[i];
            }
            for i in 0..p {
                rhs2[n + i] = -factor * ry[i];
            }
            for i in 0..m {
                rhs2[n + p + i] = -factor * rz[i] - ds_tilde[i];
            }
            let u2 = kkt.solve(&pb, &rhs2, settings.refine_steps);
            let num = -factor * rtau - dk_target / it.tau
                - (dot(&pb.c, &u2[..n]) + dot(&pb.b, &u2[n..n + p]) + dot(&pb.h, &u2[n + p..]));
            let den = denom_base - it.kappa / it.tau;
            let dtau = num / den;
            let mut dx = vec![0.0; n];
            let mut dy = vec![0.0; p];
            let mut dz = vec![0.0; m];
            for i in 0..n {
                dx[i] = u2[i] + dtau * u1[i];
            }
            for i in 0..p {
                dy[i] = u2[n + i] + dtau * u1[n + i];
            }
            for i in 0..m {
                dz[i] = u2[n + p + i] + dtau * u1[n + p + i];
            }
            // ds = ds_tilde - W² dz
            let mut ds = ds_tilde;
            let mut wdz = vec![0.0; m];
            let mut w2dz = vec![0.0; m];
            for (b, w) in pb.blocks.iter().zip(&scalings) {
                let r = b.range();
                w.apply(&dz[r.clone()], &mut wdz[r.clone()]);
                w.apply(&wdz[r.clone()], &mut w2dz[r]);
            }
            for i in 0..m {
                ds[i] -= w2dz[i];
            }
            let dkap = (dk_target - it.kappa * dtau) / it.tau;
            (dx, dy, dz, ds, dtau, dkap)
        };

        // affine (predictor) step
        let mut ds_aff_target = vec![0.0; m];
        for b in &pb.blocks {
            let r = b.range();
            cones::jordan_product(b, &lambda[r.clone()], &lambda[r.clone()], &mut ds_aff_target[r]);
        }
        ds_aff_target.iter_mut().for_each(|v| *v = -*v);
        let dk_aff_target = -it.kappa * it.tau;
        let (_, _, dz_a, ds_a, dtau_a, dkap_a) = direction(&ds_aff_target, dk_aff_target, 1.0);
        let alpha_aff = max_step(&pb, &it, &ds_a, &dz_a, dtau_a, dkap_a).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3).clamp(0.0, 1.0);

        // corrector targets
        let mut ds_target = vec![0.0; m];
        for (b, w) in pb.blocks.iter().zip(&scalings) {
            let r = b.range();
            w.apply_inv(&ds_a[r.clone()], &mut tmp[r.clone()]);
            w.apply(&dz_a[r.clone()], &mut tmp2[r.clone()]);
            let mut corr = vec![0.0; r.len()];
            cones::jordan_product(b, &tmp[r.clone()], &tmp2[r.clone()], &mut corr);
            let mut ll = vec![0.0; r.len()];
            cones::jordan_product(b, &lambda[r.clone()], &lambda[r.clone()], &mut ll);
            for (k, i) in r.clone().enumerate() {
                ds_target[i] = -ll[k] - corr[k];
            }
            let e = match b {
                Block::Nonneg { .. } => None,
                Block::Soc { start, .. } => Some(*start),
            };
            match e {
                None => {
                    for i in r {
                        ds_target[i] += sigma * mu;
                    }
                }
                Some(st) => ds_target[st] += sigma * mu,
            }
        }
        let dk_target = -it.kappa * it.tau - dkap_a * dtau_a + sigma * mu;
        let (dx, dy, dz, ds, dtau, dkap) = direction(&ds_target, dk_target, 1.0 - sigma);
        let alpha = (0.99 * max_step(&pb, &it, &ds, &dz, dtau, dkap)).min(1.0);
        if alpha < 1e-12 {
            if settings.verbose {
                eprintln!("step length {alpha:e} too small");
            }
            status = Status::NumericalError;
            break;
        }
        for i in 0..n {
            it.x[i] += alpha * dx[i];
        }
        for i in 0..p {
            it.y[i] += alpha * dy[i];
        }
        for i in 0..m {
            it.z[i] += alpha * dz[i];
            it.s[i] += alpha * ds[i];
        }
        it.tau += alpha * dtau;
        it.kappa += alpha * dkap;
        if it.tau <= 0.0 || it.kappa <= 0.0 {
            status = Status::NumericalError;
            break;
        }
    }

    // stalled: fall back to the most accurate iterate seen
    if matches!(status, Status::NumericalError | Status::MaxIterations) {
        if let Some((merit, b, res)) = best {
            if merit < settings.reduced_tol && b.tau > 0.0 {
                it = b;
                last_res = res;
                status = Status::Optimal;
            }
        }
    }
    let scale = if status == Status::Optimal { 1.0 / it.tau } else { 1.0 };
    let x: Vec<f64> = it.x.iter().map(|v| v * scale).collect();
    let mut z_full = vec![0.0; prog.num_rows()];
    let mut s_full = vec![0.0; prog.num_rows()];
    for (row, &(eq, r)) in pb.row_map.iter().enumerate() {
        if eq {
            z_full[row] = it.y[r] * scale;
        } else {
            z_full[row] = it.z[r] * scale;
            s_full[row] = it.s[r] * scale;
        }
    }
    Outcome {
        status,
        objective: dot(&prog.c, &x),
        x,
        z: z_full,
        s: s_full,
        iterations: iters,
        primal_residual: last_res.0,
        dual_residual: last_res.1,
        gap: last_res.2,
    }
}

fn failed(prog: &ConvexProgram, status: Status, iterations: usize) -> Outcome {
    Outcome {
        status,
        x: vec![f64::NAN; prog.num_vars()],
        z: vec![f64::NAN; prog.num_rows()],
        s: vec![f64::NAN; prog.num_rows()],
        objective: f64::NAN,
        iterations,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        gap: f64::NAN,
    }
}
