#![allow(dead_code)]

use std::collections::HashMap;

use condrecip::event_store::Family;
use condrecip::glmm::DesignMatrix;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

pub fn families(n: usize) -> Vec<Family> {
    (0..n)
        .map(|k| Family {
            id: format!("F{k:02}"),
            head_mean_age: 30.0 + k as f64,
            size: 4,
            lat: -14.8 + 0.01 * k as f64,
            lon: -66.8,
        })
        .collect()
}

/// One-sample Kolmogorov–Smirnov test against U(0, 1). Returns `(D, p)`.
pub fn ks_uniform(samples: &[f64]) -> (f64, f64) {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(k, v)| ((k as f64 + 1.0) / n - v).max(v - k as f64 / n))
        .fold(0.0, f64::max);
    let lambda = d * (n.sqrt() + 0.12 + 0.11 / n.sqrt());
    let mut p = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}

/// Gauss–Hermite rule for weight `exp(−t²)` by Golub–Welsch.
pub fn gauss_hermite(k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(k, k);
    for i in 1..k {
        let b = (i as f64 / 2.0).sqrt();
        j[(i, i - 1)] = b;
        j[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..k)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

const LOG_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Joint posterior mode of the standardized random effects (host, guest,
/// dyad) and the negative Hessian of the log joint density there.
fn joint_mode(d: &DesignMatrix, eta0: &[f64], sig: [f64; 3]) -> (DVector<f64>, DMatrix<f64>) {
    let (nh, ng, nd) = (d.n_hosts, d.n_guests, d.n_dyads);
    let m = nh + ng + nd;
    let idx = |r: usize| [d.host[r] as usize, nh + d.guest[r] as usize, nh + ng + d.dyad[r] as usize];
    let scale = |c: usize| if c < nh { sig[0] } else if c < nh + ng { sig[1] } else { sig[2] };
    let mut z = DVector::<f64>::zeros(m);
    let mut h = DMatrix::<f64>::identity(m, m);
    for _ in 0..100 {
        let mut g = -z.clone();
        h = DMatrix::identity(m, m);
        for r in 0..d.n_rows() {
            let ix = idx(r);
            let eta = eta0[r] + ix.iter().map(|&c| scale(c) * z[c]).sum::<f64>();
            let mu = 1.0 / (1.0 + (-eta).exp());
            let n = d.trials[r] as f64;
            for &a in &ix {
                g[a] += scale(a) * (d.successes[r] as f64 - n * mu);
                for &b in &ix {
                    h[(a, b)] += scale(a) * scale(b) * n * mu * (1.0 - mu);
                }
            }
        }
        let step = h.clone().cholesky().unwrap().solve(&g);
        z += &step;
        if step.norm() < 1e-12 {
            break;
        }
    }
    (z, h)
}

fn linear_predictor(d: &DesignMatrix, beta: &[f64]) -> Vec<f64> {
    (0..d.n_rows()).map(|r| d.row(r).iter().zip(beta).map(|(x, b)| x * b).sum()).collect()
}

/// Laplace approximation computed directly from the joint mode:
/// `ℓ(z*) − ½‖z*‖² − ½ log det H`.
pub fn laplace_reference(d: &DesignMatrix, beta: &[f64], sigma2: [f64; 3]) -> f64 {
    let sig = sigma2.map(f64::sqrt);
    let eta0 = linear_predictor(d, beta);
    let (z, h) = joint_mode(d, &eta0, sig);
    let (nh, ng) = (d.n_hosts, d.n_guests);
    let ll: f64 = (0..d.n_rows())
        .map(|r| {
            let eta = eta0[r]
                + sig[0] * z[d.host[r] as usize]
                + sig[1] * z[nh + d.guest[r] as usize]
                + sig[2] * z[nh + ng + d.dyad[r] as usize];
            d.successes[r] as f64 * eta - d.trials[r] as f64 * softplus(eta)
        })
        .sum();
    let log_det: f64 = 2.0 * h.cholesky().unwrap().l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    ll - 0.5 * z.norm_squared() - 0.5 * log_det
}

/// Log marginal likelihood of a crossed random-intercept logistic model,
/// integrated numerically. Host and guest intercepts use a tensor
/// Gauss–Hermite rule with `k` nodes per level, centred and scaled at the
/// joint posterior mode; each dyad intercept is integrated by a fine
/// trapezoid rule given the host and guest nodes. Binomial coefficients are
/// left out, matching the fitted likelihood.
pub fn quadrature_loglik(d: &DesignMatrix, beta: &[f64], sigma2: [f64; 3], k: usize) -> f64 {
    let sig = sigma2.map(f64::sqrt);
    let (nh, ng, nd) = (d.n_hosts, d.n_guests, d.n_dyads);
    let eta0 = linear_predictor(d, beta);
    let ll_row = |r: usize, eta: f64| d.successes[r] as f64 * eta - d.trials[r] as f64 * softplus(eta);

    let (z, h) = joint_mode(d, &eta0, sig);
    let cov = h.cholesky().unwrap().inverse();

    let (t, w) = gauss_hermite(k);
    // Outer coordinates: active host and guest levels.
    let mut outer: Vec<usize> = Vec::new();
    if sig[0] > 0.0 {
        outer.extend(0..nh);
    }
    if sig[1] > 0.0 {
        outer.extend(nh..nh + ng);
    }
    let nodes: Vec<Vec<f64>> = outer
        .iter()
        .map(|&c| {
            let s = cov[(c, c)].sqrt();
            t.iter().map(|ti| z[c] + std::f64::consts::SQRT_2 * s * ti).collect()
        })
        .collect();
    let log_wfac: Vec<Vec<f64>> = outer
        .iter()
        .map(|&c| {
            let s = cov[(c, c)].sqrt();
            t.iter()
                .zip(&w)
                .map(|(ti, wi)| (std::f64::consts::SQRT_2 * s * wi).ln() + ti * ti)
                .collect()
        })
        .collect();
    let pos = |c: usize| outer.iter().position(|&o| o == c);

    // Dyad tables over (host node, guest node).
    let mut rows_of: Vec<Vec<usize>> = vec![Vec::new(); nd];
    for r in 0..d.n_rows() {
        rows_of[d.dyad[r] as usize].push(r);
    }
    let (lo, hi, steps) = (-10.0, 10.0, 801usize);
    let dz = (hi - lo) / (steps - 1) as f64;
    let na = |c: Option<usize>| if c.is_some() { k } else { 1 };
    let mut tables: Vec<(Option<usize>, Option<usize>, Vec<f64>)> = Vec::with_capacity(nd);
    for (dy, rows) in rows_of.iter().enumerate() {
        let (hc, gc) = (d.host[rows[0]] as usize, nh + d.guest[rows[0]] as usize);
        let (ph, pg) = (pos(hc), pos(gc));
        let mut table = vec![0.0; na(ph) * na(pg)];
        for a in 0..na(ph) {
            for b in 0..na(pg) {
                let shift = ph.map_or(0.0, |p| sig[0] * nodes[p][a]) + pg.map_or(0.0, |p| sig[1] * nodes[p][b]);
                let at = |zd: f64| rows.iter().map(|&r| ll_row(r, eta0[r] + shift + sig[2] * zd)).sum::<f64>();
                table[a * na(pg) + b] = if sig[2] > 0.0 {
                    let vals: Vec<f64> = (0..steps)
                        .map(|s| {
                            let zd = lo + s as f64 * dz;
                            let wt = if s == 0 || s == steps - 1 { 0.5 } else { 1.0 };
                            at(zd) - 0.5 * zd * zd - LOG_SQRT_2PI + (wt * dz).ln()
                        })
                        .collect();
                    log_sum_exp(&vals)
                } else {
                    at(0.0)
                };
            }
        }
        let _ = dy;
        tables.push((ph, pg, table));
    }

    // Tensor sum over outer nodes.
    let dims = outer.len();
    let mut counter = vec![0usize; dims];
    let mut terms = Vec::with_capacity(k.pow(dims as u32));
    loop {
        let mut l = 0.0;
        for (p, &kk) in counter.iter().enumerate() {
            let zc = nodes[p][kk];
            l += log_wfac[p][kk] - 0.5 * zc * zc - LOG_SQRT_2PI;
        }
        for (ph, pg, table) in &tables {
            let a = ph.map_or(0, |p| counter[p]);
            let b = pg.map_or(0, |p| counter[p]);
            l += table[a * pg.map_or(1, |_| k) + b];
        }
        terms.push(l);
        let mut p = 0;
        loop {
            if p == dims {
                return log_sum_exp(&terms);
            }
            counter[p] += 1;
            if counter[p] < k {
                break;
            }
            counter[p] = 0;
            p += 1;
        }
    }
}

/// Relatedness `2φ` by simulating allele transmission down the pedigree.
/// `parents[k]` refers to earlier indices only.
pub fn gene_drop_relatedness<R: Rng>(parents: &[Option<(usize, usize)>], a: usize, b: usize, drops: usize, rng: &mut R) -> f64 {
    let mut shared = 0u64;
    let mut alleles = vec![[0u32; 2]; parents.len()];
    for _ in 0..drops {
        let mut next = 0u32;
        for k in 0..parents.len() {
            alleles[k] = match parents[k] {
                None => {
                    next += 2;
                    [next - 2, next - 1]
                }
                Some((f, m)) => [alleles[f][rng.gen_range(0..2)], alleles[m][rng.gen_range(0..2)]],
            };
        }
        // φ: a random allele of `a` is identical by descent to a random allele of `b`.
        let x = alleles[a][rng.gen_range(0..2)];
        let y = alleles[b][rng.gen_range(0..2)];
        shared += u64::from(x == y);
    }
    2.0 * shared as f64 / drops as f64
}

/// Great-circle distance from the chord between unit vectors.
pub fn chord_distance_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64, radius: f64) -> f64 {
    let v = |lat: f64, lon: f64| {
        let (p, l) = (lat.to_radians(), lon.to_radians());
        [p.cos() * l.cos(), p.cos() * l.sin(), p.sin()]
    };
    let (a, b) = (v(lat1, lon1), v(lat2, lon2));
    let chord = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
    2.0 * radius * (chord / 2.0).asin()
}

/// Name → index lookup for pedigree fixtures.
pub fn index_of(ids: &[&str]) -> HashMap<String, usize> {
    ids.iter().enumerate().map(|(k, s)| (s.to_string(), k)).collect()
}
