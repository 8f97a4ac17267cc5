use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DesignMatrix, RandomTerm};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Relative change of the penalized deviance that ends PIRLS.
    pub pirls_tol: f64,
    pub pirls_max_iter: usize,
    /// Simplex diameter on `log σ²` that ends the variance search.
    pub outer_tol: f64,
    pub outer_max_evals: usize,
    /// Box on every fixed effect; reaching it flags separation.
    pub beta_bound: f64,
    /// A converged coefficient beyond this magnitude is treated as diverging
    /// and pushed to `beta_bound`.
    pub separation_threshold: f64,
    pub log_var_floor: f64,
    pub log_var_ceiling: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            pirls_tol: 1e-8,
            pirls_max_iter: 200,
            outer_tol: 1e-6,
            outer_max_evals: 500,
            beta_bound: 100.0,
            separation_threshold: 15.0,
            log_var_floor: -20.0,
            log_var_ceiling: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponent {
    pub term: RandomTerm,
    pub variance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub pirls_converged: bool,
    pub pirls_iterations: usize,
    pub outer_converged: bool,
    pub evaluations: usize,
    pub separation: bool,
    /// Best Laplace log-likelihood after each outer iteration.
    pub trace: Vec<f64>,
}

impl Convergence {
    pub fn ok(&self) -> bool {
        self.pirls_converged && self.outer_converged
    }
}

/// Age effects on the raw scale (years, years²).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawAgeEffects {
    pub host_age: Option<(f64, f64)>,
    pub host_age2: Option<(f64, f64)>,
    pub guest_age: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlmmFit {
    pub model: String,
    pub columns: Vec<String>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    /// Row-major covariance of `β` from the observed information.
    pub cov_beta: Vec<f64>,
    pub variances: Vec<VarianceComponent>,
    pub host_effects: Vec<f64>,
    pub guest_effects: Vec<f64>,
    pub dyad_effects: Vec<f64>,
    pub dyad_pairs: Vec<(u32, u32)>,
    pub log_lik: f64,
    pub aic: f64,
    pub n_params: usize,
    pub n_obs: u64,
    pub raw_age: RawAgeEffects,
    pub convergence: Convergence,
}

impl GlmmFit {
    pub fn variance(&self, term: RandomTerm) -> Option<f64> {
        self.variances.iter().find(|v| v.term == term).map(|v| v.variance)
    }

    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some((self.beta[k], self.se[k]))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Fixed effects plus spherical random effects `v`, with `u = σ v`.
#[derive(Clone, Debug)]
struct Theta {
    beta: Vec<f64>,
    v: [Vec<f64>; 3],
}

struct DyadInfo {
    rows: Vec<usize>,
    host: usize,
    guest: usize,
}

struct Problem<'a> {
    d: &'a DesignMatrix,
    dyads: Vec<DyadInfo>,
    opts: FitOptions,
}

struct Mode {
    pdev: f64,
    logdet: f64,
    cov_beta: DMatrix<f64>,
    iterations: usize,
    converged: bool,
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl<'a> Problem<'a> {
    fn new(d: &'a DesignMatrix, opts: FitOptions) -> Result<Self> {
        if d.n_cols() == 0 {
            return Err(Error::Invalid("design has no fixed-effect columns".into()));
        }
        let y = d.total_successes();
        if y == 0 {
            return Err(Error::DegenerateOutcome("positive"));
        }
        if y == d.risk_rows() {
            return Err(Error::DegenerateOutcome("negative"));
        }
        let mut dyads: Vec<DyadInfo> = (0..d.n_dyads)
            .map(|_| DyadInfo {
                rows: Vec::new(),
                host: 0,
                guest: 0,
            })
            .collect();
        for r in 0..d.n_rows() {
            let info = &mut dyads[d.dyad[r] as usize];
            info.rows.push(r);
            info.host = d.host[r] as usize;
            info.guest = d.guest[r] as usize;
        }
        Ok(Problem { d, dyads, opts })
    }

    fn start(&self) -> Theta {
        let d = self.d;
        let mut beta = vec![0.0; d.n_cols()];
        if let Some(k) = d.column("intercept") {
            let rate = d.total_successes() as f64 / d.risk_rows() as f64;
            beta[k] = (rate / (1.0 - rate)).ln();
        }
        Theta {
            beta,
            v: [vec![0.0; d.n_hosts], vec![0.0; d.n_guests], vec![0.0; d.n_dyads]],
        }
    }

    #[inline]
    fn eta(&self, r: usize, th: &Theta, sig: &[f64; 3]) -> f64 {
        let d = self.d;
        d.row(r).iter().zip(&th.beta).map(|(x, b)| x * b).sum::<f64>()
            + sig[0] * th.v[0][d.host[r] as usize]
            + sig[1] * th.v[1][d.guest[r] as usize]
            + sig[2] * th.v[2][d.dyad[r] as usize]
    }

    /// `−2ℓ + |v|²`.
    fn pdev(&self, th: &Theta, sig: &[f64; 3]) -> f64 {
        let d = self.d;
        let mut ll = 0.0;
        for r in 0..d.n_rows() {
            let eta = self.eta(r, th, sig);
            ll += d.successes[r] as f64 * eta - d.trials[r] as f64 * softplus(eta);
        }
        let pen: f64 = th.v.iter().flatten().map(|v| v * v).sum();
        -2.0 * ll + pen
    }

    /// Newton system reduced onto `(β, v_host, v_guest)` by eliminating the
    /// diagonal dyad block. Returns the Schur complement, reduced gradient and
    /// what is needed to back-substitute the dyad step.
    fn system(&self, th: &Theta, sig: &[f64; 3], fix_beta: bool) -> System {
        let d = self.d;
        let p = d.n_cols();
        let (nh, ng) = (d.n_hosts, d.n_guests);
        let m = p + nh + ng;
        let mut s = DMatrix::<f64>::zeros(m, m);
        let mut g = DVector::<f64>::zeros(m);
        let mut dd = vec![1.0; d.n_dyads];
        let mut gd = vec![0.0; d.n_dyads];
        let mut cb = vec![0.0; d.n_dyads * p];
        let mut ch = vec![0.0; d.n_dyads];
        let mut cg = vec![0.0; d.n_dyads];
        for (k, info) in self.dyads.iter().enumerate() {
            let (h, gi) = (p + info.host, p + nh + info.guest);
            for &r in &info.rows {
                let eta = self.eta(r, th, sig);
                let (mu, nu) = (logistic(eta), logistic(-eta));
                let n = d.trials[r] as f64;
                let y = d.successes[r] as f64;
                let w = n * mu * nu;
                let res = y * nu - (n - y) * mu;
                let x = d.row(r);
                if !fix_beta {
                    for a in 0..p {
                        if x[a] == 0.0 {
                            continue;
                        }
                        let wx = w * x[a];
                        for b in a..p {
                            s[(a, b)] += wx * x[b];
                        }
                        s[(a, h)] += wx * sig[0];
                        s[(a, gi)] += wx * sig[1];
                        g[a] += res * x[a];
                        cb[k * p + a] += wx * sig[2];
                    }
                }
                s[(h, h)] += w * sig[0] * sig[0];
                s[(gi, gi)] += w * sig[1] * sig[1];
                s[(h, gi)] += w * sig[0] * sig[1];
                g[h] += res * sig[0];
                g[gi] += res * sig[1];
                dd[k] += w * sig[2] * sig[2];
                gd[k] += res * sig[2];
                ch[k] += w * sig[2] * sig[0];
                cg[k] += w * sig[2] * sig[1];
            }
            gd[k] -= th.v[2][k];
        }
        // Symmetrize the accumulated upper triangle.
        for a in 0..m {
            for b in (a + 1)..m {
                let v = s[(a, b)] + s[(b, a)];
                s[(a, b)] = v;
                s[(b, a)] = v;
            }
        }
        for j in 0..nh {
            s[(p + j, p + j)] += 1.0;
            g[p + j] -= th.v[0][j];
        }
        for j in 0..ng {
            s[(p + nh + j, p + nh + j)] += 1.0;
            g[p + nh + j] -= th.v[1][j];
        }
        if fix_beta {
            for a in 0..p {
                s[(a, a)] = 1.0;
            }
        }
        // Schur complement of the dyad block.
        let mut idx = Vec::with_capacity(p + 2);
        let mut val = Vec::with_capacity(p + 2);
        for (k, info) in self.dyads.iter().enumerate() {
            idx.clear();
            val.clear();
            for a in 0..p {
                if cb[k * p + a] != 0.0 {
                    idx.push(a);
                    val.push(cb[k * p + a]);
                }
            }
            idx.push(p + info.host);
            val.push(ch[k]);
            idx.push(p + nh + info.guest);
            val.push(cg[k]);
            let inv = 1.0 / dd[k];
            for (ia, &a) in idx.iter().enumerate() {
                g[a] -= val[ia] * gd[k] * inv;
                for (ib, &b) in idx.iter().enumerate() {
                    s[(a, b)] -= val[ia] * val[ib] * inv;
                }
            }
        }
        System {
            s,
            g,
            dd,
            gd,
            cb,
            ch,
            cg,
            p,
            nh,
        }
    }

    /// Conditional mode of `(β, v)` (or of `v` alone when `fix_beta`).
    fn mode(&self, th: &mut Theta, sig: &[f64; 3], fix_beta: bool) -> Result<Mode> {
        let bound = self.opts.beta_bound;
        let mut cur = self.pdev(th, sig);
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..self.opts.pirls_max_iter {
            iterations = it + 1;
            let sys = self.system(th, sig, fix_beta);
            let (db, dv) = sys.solve(self)?;
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let mut cand = th.clone();
                for (b, d) in cand.beta.iter_mut().zip(&db) {
                    *b = (*b + step * d).clamp(-bound, bound);
                }
                for t in 0..3 {
                    for (v, d) in cand.v[t].iter_mut().zip(&dv[t]) {
                        *v += step * d;
                    }
                }
                let f = self.pdev(&cand, sig);
                if f.is_finite() && f <= cur + 1e-12 * cur.abs() {
                    accepted = Some((cand, f));
                    break;
                }
                step *= 0.5;
            }
            match accepted {
                None => {
                    converged = true;
                    break;
                }
                Some((cand, f)) => {
                    let rel = (cur - f).abs() / (f.abs() + 0.1);
                    *th = cand;
                    cur = f;
                    if rel < self.opts.pirls_tol {
                        converged = true;
                        break;
                    }
                }
            }
        }
        if !fix_beta && th.beta.iter().any(|b| b.abs() > self.opts.separation_threshold) {
            iterations += self.push_to_bound(th, sig, &mut cur);
        }
        let sys = self.system(th, sig, fix_beta);
        let p = sys.p;
        let m = sys.s.nrows();
        let hg = sys.s.view((p, p), (m - p, m - p)).into_owned();
        let hg_chol = hg
            .cholesky()
            .ok_or_else(|| Error::Numerical("random-effect information is not positive definite".into()))?;
        let logdet =
            sys.dd.iter().map(|x| x.ln()).sum::<f64>() + 2.0 * hg_chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let cov_beta = if fix_beta {
            DMatrix::zeros(p, p)
        } else {
            match sys.s.clone().cholesky() {
                Some(chol) => chol.inverse().view((0, 0), (p, p)).into_owned(),
                None if th.beta.iter().any(|b| b.abs() > self.opts.separation_threshold) => {
                    DMatrix::from_element(p, p, f64::INFINITY)
                }
                None => return Err(Error::Numerical("information matrix is singular (collinear design?)".into())),
            }
        };
        Ok(Mode {
            pdev: cur,
            logdet,
            cov_beta,
            iterations,
            converged,
        })
    }
}

impl Problem<'_> {
    /// Follow Newton directions with an expanding step while the penalized
    /// deviance does not increase, until the diverging coefficients sit on the
    /// box. Returns the number of iterations used.
    fn push_to_bound(&self, th: &mut Theta, sig: &[f64; 3], cur: &mut f64) -> usize {
        let bound = self.opts.beta_bound;
        let mut used = 0;
        for _ in 0..self.opts.pirls_max_iter {
            used += 1;
            let Ok((db, dv)) = self.system(th, sig, false).solve(self) else {
                break;
            };
            let at = |step: f64| {
                let mut c = th.clone();
                for (b, d) in c.beta.iter_mut().zip(&db) {
                    *b = (*b + step * d).clamp(-bound, bound);
                }
                for t in 0..3 {
                    for (v, d) in c.v[t].iter_mut().zip(&dv[t]) {
                        *v += step * d;
                    }
                }
                let f = self.pdev(&c, sig);
                (c, f)
            };
            let (mut best, mut fb) = at(1.0);
            if !(fb.is_finite() && fb <= *cur + 1e-12 * cur.abs()) {
                break;
            }
            let mut step = 1.0;
            while step < 4.0 * bound {
                step *= 2.0;
                let (c, f) = at(step);
                if f.is_finite() && f <= fb {
                    best = c;
                    fb = f;
                } else {
                    break;
                }
            }
            let moved = best.beta.iter().zip(&th.beta).any(|(a, b)| (a - b).abs() > 1e-9);
            *th = best;
            *cur = fb;
            if !moved {
                break;
            }
        }
        used
    }
}

struct System {
    s: DMatrix<f64>,
    g: DVector<f64>,
    dd: Vec<f64>,
    gd: Vec<f64>,
    cb: Vec<f64>,
    ch: Vec<f64>,
    cg: Vec<f64>,
    p: usize,
    nh: usize,
}

impl System {
    fn solve(&self, pr: &Problem<'_>) -> Result<(Vec<f64>, [Vec<f64>; 3])> {
        let chol = self
            .s
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("information matrix is singular (collinear design?)".into()))?;
        let dr = chol.solve(&self.g);
        let p = self.p;
        let d = pr.d;
        let beta: Vec<f64> = dr.iter().take(p).copied().collect();
        let host: Vec<f64> = dr.iter().skip(p).take(self.nh).copied().collect();
        let guest: Vec<f64> = dr.iter().skip(p + self.nh).copied().collect();
        let dyad = pr
            .dyads
            .iter()
            .enumerate()
            .map(|(k, info)| {
                let mut c = 0.0;
                for a in 0..p {
                    c += self.cb[k * p + a] * beta[a];
                }
                c += self.ch[k] * host[info.host] + self.cg[k] * guest[info.guest];
                (self.gd[k] - c) / self.dd[k]
            })
            .collect();
        debug_assert_eq!(guest.len(), d.n_guests);
        Ok((beta, [host, guest, dyad]))
    }
}

fn sigmas(d: &DesignMatrix, log_var: &[f64], floor: f64) -> [f64; 3] {
    let mut sig = [0.0; 3];
    for (k, t) in active_terms(d).iter().enumerate() {
        sig[t.index()] = if log_var[k] <= floor { 0.0 } else { (0.5 * log_var[k]).exp() };
    }
    sig
}

fn active_terms(d: &DesignMatrix) -> Vec<RandomTerm> {
    RandomTerm::ALL.iter().copied().filter(|t| d.has_term(*t)).collect()
}

/// Laplace log-likelihood at fixed `(β, σ²)`, maximizing over the random
/// effects only. `sigma2` is indexed by [`RandomTerm::index`].
pub fn laplace_loglik(d: &DesignMatrix, beta: &[f64], sigma2: [f64; 3]) -> Result<f64> {
    let pr = Problem::new(d, FitOptions::default())?;
    let mut th = pr.start();
    th.beta = beta.to_vec();
    let mut sig = [0.0; 3];
    for t in active_terms(d) {
        sig[t.index()] = sigma2[t.index()].sqrt();
    }
    let m = pr.mode(&mut th, &sig, true)?;
    Ok(-0.5 * m.pdev - 0.5 * m.logdet)
}

/// Fit with the variances held at `sigma2` (indexed by [`RandomTerm::index`]).
pub fn fit_with_variances(d: &DesignMatrix, sigma2: [f64; 3], opts: FitOptions) -> Result<GlmmFit> {
    let pr = Problem::new(d, opts)?;
    let mut th = pr.start();
    let mut sig = [0.0; 3];
    for t in active_terms(d) {
        sig[t.index()] = sigma2[t.index()].max(0.0).sqrt();
    }
    let m = pr.mode(&mut th, &sig, false)?;
    let conv = Convergence {
        pirls_converged: m.converged,
        pirls_iterations: m.iterations,
        outer_converged: true,
        evaluations: 1,
        separation: false,
        trace: vec![-0.5 * m.pdev - 0.5 * m.logdet],
    };
    Ok(assemble_fit(&pr, &th, &sig, &m, conv))
}

/// Maximum-likelihood fit under the Laplace approximation.
pub fn fit(d: &DesignMatrix, opts: FitOptions) -> Result<GlmmFit> {
    let pr = Problem::new(d, opts)?;
    let terms = active_terms(d);
    let q = terms.len();
    let mut warm = pr.start();
    if q == 0 {
        return fit_with_variances(d, [0.0; 3], opts);
    }
    let clamp = |x: &mut Vec<f64>| {
        for v in x.iter_mut() {
            *v = v.clamp(opts.log_var_floor, opts.log_var_ceiling);
        }
    };
    let mut evals = 0usize;
    // Negative Laplace log-likelihood; PIRLS is warm-started from the last evaluation.
    let objective = |x: &[f64], warm: &mut Theta, evals: &mut usize| -> f64 {
        *evals += 1;
        let sig = sigmas(d, x, opts.log_var_floor);
        let mut th = warm.clone();
        match pr.mode(&mut th, &sig, false) {
            Ok(m) => {
                *warm = th;
                0.5 * m.pdev + 0.5 * m.logdet
            }
            Err(_) => f64::INFINITY,
        }
    };

    // Nelder–Mead on log σ².
    let mut simplex: Vec<Vec<f64>> = (0..=q)
        .map(|k| {
            let mut x = vec![0.0; q];
            if k > 0 {
                x[k - 1] = 1.0;
            }
            x
        })
        .collect();
    let mut fs: Vec<f64> = simplex.iter().map(|x| objective(x, &mut warm, &mut evals)).collect();
    let mut trace = Vec::new();
    let mut outer_converged = false;
    while evals < opts.outer_max_evals {
        let mut order: Vec<usize> = (0..=q).collect();
        order.sort_by(|&a, &b| fs[a].total_cmp(&fs[b]));
        simplex = order.iter().map(|&k| simplex[k].clone()).collect();
        fs = order.iter().map(|&k| fs[k]).collect();
        trace.push(-fs[0]);
        let diameter = simplex[1..]
            .iter()
            .flat_map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter < opts.outer_tol || (fs[q] - fs[0]).abs() < 1e-10 * (1.0 + fs[0].abs()) {
            outer_converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..q).map(|k| simplex[..q].iter().map(|x| x[k]).sum::<f64>() / q as f64).collect();
        let worst = simplex[q].clone();
        let along = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid.iter().zip(&worst).map(|(c, w)| c + t * (c - w)).collect();
            clamp(&mut x);
            x
        };
        let xr = along(1.0);
        let fr = objective(&xr, &mut warm, &mut evals);
        if fr < fs[0] {
            let xe = along(2.0);
            let fe = objective(&xe, &mut warm, &mut evals);
            if fe < fr {
                simplex[q] = xe;
                fs[q] = fe;
            } else {
                simplex[q] = xr;
                fs[q] = fr;
            }
        } else if fr < fs[q - 1] {
            simplex[q] = xr;
            fs[q] = fr;
        } else {
            let (xc, fc) = if fr < fs[q] {
                let x = along(0.5);
                let f = objective(&x, &mut warm, &mut evals);
                (x, f)
            } else {
                let x = along(-0.5);
                let f = objective(&x, &mut warm, &mut evals);
                (x, f)
            };
            if fc < fr.min(fs[q]) {
                simplex[q] = xc;
                fs[q] = fc;
            } else {
                for k in 1..=q {
                    let mut x: Vec<f64> = simplex[k].iter().zip(&simplex[0]).map(|(a, b)| b + 0.5 * (a - b)).collect();
                    clamp(&mut x);
                    fs[k] = objective(&x, &mut warm, &mut evals);
                    simplex[k] = x;
                }
            }
        }
    }
    let best = (0..=q).min_by(|&a, &b| fs[a].total_cmp(&fs[b])).unwrap();
    if !fs[best].is_finite() {
        return Err(Error::Numerical("no variance setting gave a finite likelihood".into()));
    }
    let sig = sigmas(d, &simplex[best], opts.log_var_floor);
    let mut th = warm.clone();
    let m = pr.mode(&mut th, &sig, false)?;
    let conv = Convergence {
        pirls_converged: m.converged,
        pirls_iterations: m.iterations,
        outer_converged,
        evaluations: evals,
        separation: false,
        trace,
    };
    Ok(assemble_fit(&pr, &th, &sig, &m, conv))
}

fn assemble_fit(pr: &Problem<'_>, th: &Theta, sig: &[f64; 3], m: &Mode, mut conv: Convergence) -> GlmmFit {
    let d = pr.d;
    let p = d.n_cols();
    let se: Vec<f64> = (0..p).map(|k| m.cov_beta[(k, k)].max(0.0).sqrt()).collect();
    let bound = pr.opts.beta_bound;
    conv.separation = th.beta.iter().any(|b| b.abs() >= bound * (1.0 - 1e-9));
    if conv.separation {
        log::warn!("fixed effects reached ±{bound}; outcome is (quasi-)separated");
    }
    let variances: Vec<VarianceComponent> = active_terms(d)
        .into_iter()
        .map(|t| VarianceComponent {
            term: t,
            variance: sig[t.index()].powi(2),
        })
        .collect();
    let n_params = p + variances.len();
    let log_lik = -0.5 * m.pdev - 0.5 * m.logdet;
    let cov = |a: usize, b: usize| m.cov_beta[(a, b)];
    let c = d.age_center;
    let col = |n: &str| d.column(n);
    let raw_age = RawAgeEffects {
        host_age: col("host_age").map(|a| match col("host_age2") {
            Some(b) => {
                let est = th.beta[a] / 10.0 - 2.0 * c * th.beta[b] / 100.0;
                let (ga, gb) = (0.1, -2.0 * c / 100.0);
                let var = ga * ga * cov(a, a) + gb * gb * cov(b, b) + 2.0 * ga * gb * cov(a, b);
                (est, var.max(0.0).sqrt())
            }
            None => (th.beta[a] / 10.0, se[a] / 10.0),
        }),
        host_age2: col("host_age2").map(|b| (th.beta[b] / 100.0, se[b] / 100.0)),
        guest_age: col("guest_age").map(|a| (th.beta[a] / 10.0, se[a] / 10.0)),
    };
    let mut dyad_pairs = vec![(0u32, 0u32); d.n_dyads];
    for info in pr.dyads.iter().enumerate() {
        dyad_pairs[info.0] = (info.1.host as u32, info.1.guest as u32);
    }
    GlmmFit {
        model: d.model.clone(),
        columns: d.columns.clone(),
        beta: th.beta.clone(),
        se,
        cov_beta: m.cov_beta.transpose().iter().copied().collect(),
        variances,
        host_effects: th.v[0].iter().map(|v| v * sig[0]).collect(),
        guest_effects: th.v[1].iter().map(|v| v * sig[1]).collect(),
        dyad_effects: th.v[2].iter().map(|v| v * sig[2]).collect(),
        dyad_pairs,
        log_lik,
        aic: 2.0 * n_params as f64 - 2.0 * log_lik,
        n_params,
        n_obs: d.risk_rows(),
        raw_age,
        convergence: conv,
    }
}
