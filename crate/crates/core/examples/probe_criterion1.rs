use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn logsumexp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() { return max; }
    let sum: f64 = values.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

// one alternating-scaling pair at eps (Gauss-Seidel order), in place
fn scaling_pair(f: &mut Vec<f64>, g: &mut Vec<f64>, log_a: &[f64], log_b: &[f64], c: &Array2<f64>, eps: f64) {
    let (n, m) = c.dim();
    for i in 0..n {
        let lse = logsumexp((0..m).map(|j| (g[j] - c[[i, j]]) / eps));
        f[i] = eps * (log_a[i] - lse);
    }
    for j in 0..m {
        let lse = logsumexp((0..n).map(|i| (f[i] - c[[i, j]]) / eps));
        g[j] = eps * (log_b[j] - lse);
    }
}

fn violation(f: &[f64], g: &[f64], a: &[f64], b: &[f64], c: &Array2<f64>, eps: f64) -> f64 {
    let (n, m) = c.dim();
    let plan = Array2::from_shape_fn((n, m), |(i, j)| ((f[i] + g[j] - c[[i, j]]) / eps).exp());
    let rl1: f64 = plan.sum_axis(ndarray::Axis(1)).iter().zip(a.iter()).map(|(s, w)| (s - w).abs()).sum();
    let cl1: f64 = plan.sum_axis(ndarray::Axis(0)).iter().zip(b.iter()).map(|(s, w)| (s - w).abs()).sum();
    rl1.max(cl1)
}

// Solve least squares min ||r - R gamma|| for small systems via normal equations + ridge
fn solve_ls(r_hist: &[Vec<f64>], r: &[f64]) -> Vec<f64> {
    let k = r_hist.len();
    let mut ata = vec![vec![0.0; k]; k];
    let mut atb = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            ata[i][j] = r_hist[i].iter().zip(&r_hist[j]).map(|(x, y)| x * y).sum();
        }
        atb[i] = r_hist[i].iter().zip(r).map(|(x, y)| x * y).sum();
        ata[i][i] += 1e-10 * (1.0 + ata[i][i]);
    }
    // gaussian elimination
    let mut aug: Vec<Vec<f64>> = (0..k).map(|i| { let mut row = ata[i].clone(); row.push(atb[i]); row }).collect();
    for col in 0..k {
        let piv = (col..k).max_by(|&x, &y| aug[x][col].abs().partial_cmp(&aug[y][col].abs()).unwrap()).unwrap();
        aug.swap(col, piv);
        let pv = aug[col][col];
        if pv.abs() < 1e-300 { continue; }
        for row in 0..k {
            if row != col {
                let fac = aug[row][col] / pv;
                for x in col..=k { let z = aug[col][x]; aug[row][x] -= fac * z; }
            }
        }
    }
    (0..k).map(|i| if aug[i][i].abs() < 1e-300 { 0.0 } else { aug[i][k] / aug[i][i] }).collect()
}

fn sink_anderson(av: &[f64], bv: &[f64], c: &Array2<f64>, eps: f64, max_iter: usize, tol: f64, depth: usize) -> (bool, usize) {
    let (n, m) = c.dim();
    let log_a: Vec<f64> = av.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = bv.iter().map(|x| x.ln()).collect();
    let maxc = c.iter().fold(0.0f64, |x, &y| x.max(y));
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut eps_cur = maxc.max(eps);
    let mut it = 0usize;
    // annealing phase: plain scaling pairs, halving eps
    while eps_cur > eps && it < max_iter {
        scaling_pair(&mut f, &mut g, &log_a, &log_b, c, eps_cur);
        it += 1;
        eps_cur = (eps_cur * 0.5).max(eps);
    }
    // target phase: Anderson-accelerated scaling
    let mut x: Vec<f64> = f.iter().chain(g.iter()).cloned().collect();
    let mut hist_dx: Vec<Vec<f64>> = Vec::new(); // G(x)-x differences history
    let mut hist_gx: Vec<Vec<f64>> = Vec::new();
    let mut best_rnorm = f64::INFINITY;
    while it < max_iter {
        let mut fx: Vec<f64> = x[..n].to_vec();
        let mut gx: Vec<f64> = x[n..].to_vec();
        scaling_pair(&mut fx, &mut gx, &log_a, &log_b, c, eps);
        it += 1;
        let gxfull: Vec<f64> = fx.iter().chain(gx.iter()).cloned().collect();
        let r: Vec<f64> = gxfull.iter().zip(&x).map(|(p, q)| p - q).collect();
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        // convergence test on the plan from G(x)
        if violation(&fx, &gx, av, bv, c, eps) <= tol {
            return (true, it);
        }
        if rnorm > 10.0 * best_rnorm || !rnorm.is_finite() {
            hist_dx.clear();
            hist_gx.clear();
            x = gxfull;
            best_rnorm = f64::INFINITY;
            continue;
        }
        best_rnorm = best_rnorm.min(rnorm);
        // Anderson mixing
        if hist_gx.is_empty() {
            hist_gx.push(gxfull.clone());
            hist_dx.push(r.clone());
            x = gxfull;
            continue;
        }
        let k = hist_gx.len();
        let dr: Vec<Vec<f64>> = (0..k).map(|i| r.iter().zip(&hist_dx[i]).map(|(a2, b2)| a2 - b2).collect()).collect();
        let gamma = solve_ls(&dr, &r);
        let mut xnew = gxfull.clone();
        for (i, &gam) in gamma.iter().enumerate() {
            for (xx, (gv, _)) in xnew.iter_mut().zip(hist_gx[i].iter().zip(&hist_dx[i])) {
                *xx -= gam * (gxfull[0] * 0.0); let _ = gv; // placeholder, fixed below
            }
        }
        // recompute properly: xnew = G(x) - sum gamma_i (G(x) - G_hist_i)
        let mut xn = gxfull.clone();
        for (i, &gam) in gamma.iter().enumerate() {
            for idx in 0..xn.len() {
                xn[idx] -= gam * (gxfull[idx] - hist_gx[i][idx]);
            }
        }
        hist_gx.push(gxfull);
        hist_dx.push(r);
        if hist_gx.len() > depth { hist_gx.remove(0); hist_dx.remove(0); }
        x = xn;
    }
    let fx: Vec<f64> = x[..n].to_vec();
    let gx: Vec<f64> = x[n..].to_vec();
    (violation(&fx, &gx, av, bv, c, eps) <= tol, it)
}

fn main() {
    for depth in [3usize, 5, 8] {
        let mut rng = ChaCha8Rng::seed_from_u64(20260810);
        let mut fails = 0usize;
        let mut worst = 0usize;
        for _ in 0..1000 {
            let n = rng.random_range(1..=8);
            let m = rng.random_range(1..=8);
            let raw_a: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let sa: f64 = raw_a.iter().sum();
            let av: Vec<f64> = raw_a.iter().map(|x| x / sa).collect();
            let raw_b: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
            let sb: f64 = raw_b.iter().sum();
            let bv: Vec<f64> = raw_b.iter().map(|x| x / sb).collect();
            let cm = Array2::from_shape_fn((n, m), |_| rng.random_range(0.0..2.0));
            let (conv, iters) = sink_anderson(&av, &bv, &cm, 1e-3, 200, 1e-6, depth);
            if conv { worst = worst.max(iters); } else { fails += 1; }
        }
        println!("anderson depth {depth}: fails {fails}/1000, worst converged iters {worst}");
    }
}
