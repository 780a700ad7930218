//! Conditioned density-matrix trajectories under homodyne-type monitoring,
//! at finite Fock truncation, and martingale statistics over ensembles.
//!
//! Each channel contributes
//! `dρ = (−i[H,ρ] + LρL† − ½{L†L,ρ}) dt + (Lρ + ρL† − Tr[ρ(L+L†)]ρ) dν`
//! with independent `dν ~ N(0, dt)`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{inf_norm, CMatrix, I};
use crate::qsys::QuantumLinearSystem;
use crate::random;

/// Largest Hilbert-space dimension accepted.
pub const MAX_DIM: usize = 4096;
/// Eigenvalues below `−NEG_EIG_TOL` are clipped after each step.
pub const NEG_EIG_TOL: f64 = 1e-8;
/// Total clipped mass per trajectory above which the run is rejected.
pub const MAX_CLIPPED_MASS: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct TruncatedOperators {
    fock_dim: usize,
    a_ops: Vec<CMatrix>,
    h: CMatrix,
    l_ops: Vec<CMatrix>,
}

/// Truncated annihilation operator `⟨k−1|a|k⟩ = √k`.
pub fn ladder(fock_dim: usize) -> CMatrix {
    CMatrix::from_fn(fock_dim, fock_dim, |i, j| {
        if j == i + 1 {
            Complex64::new((j as f64).sqrt(), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn kron_chain(factors: &[CMatrix]) -> CMatrix {
    factors[1..].iter().fold(factors[0].clone(), |acc, f| acc.kronecker(f))
}

fn hermitize(x: &CMatrix) -> CMatrix {
    (x + x.adjoint()) * Complex64::new(0.5, 0.0)
}

impl TruncatedOperators {
    /// Operators on a caller-chosen space, e.g. for Hamiltonians outside
    /// the quadratic family. `a_ops` may be empty.
    pub fn new(fock_dim: usize, a_ops: Vec<CMatrix>, h: CMatrix, l_ops: Vec<CMatrix>) -> Result<Self> {
        let d = h.nrows();
        if !h.is_square() || a_ops.iter().chain(&l_ops).any(|x| x.shape() != (d, d)) {
            return Err(Error::Dimension(format!("operators must all be {d}x{d}")));
        }
        let herm = inf_norm(&(&h - h.adjoint()));
        if herm > 1e-12 * inf_norm(&h).max(1.0) {
            return Err(Error::Precondition(format!("H is not Hermitian (residual {herm:.3e})")));
        }
        Ok(Self { fock_dim, a_ops, h, l_ops })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    pub fn a_ops(&self) -> &[CMatrix] {
        &self.a_ops
    }

    pub fn h(&self) -> &CMatrix {
        &self.h
    }

    pub fn l_ops(&self) -> &[CMatrix] {
        &self.l_ops
    }

    /// `q_k = (a_k + a_k†)/√2`.
    pub fn q(&self, k: usize) -> CMatrix {
        let a = &self.a_ops[k];
        (a + a.adjoint()) * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)
    }

    /// `p_k = −i(a_k − a_k†)/√2`.
    pub fn p(&self, k: usize) -> CMatrix {
        let a = &self.a_ops[k];
        (a - a.adjoint()) * Complex64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2)
    }

    /// Projector onto states with some mode in its top two Fock levels.
    pub fn top_levels_projector(&self) -> CMatrix {
        let f = self.fock_dim;
        let d = self.dim();
        let n = self.a_ops.len();
        CMatrix::from_fn(d, d, |i, j| {
            if i != j {
                return Complex64::new(0.0, 0.0);
            }
            let mut idx = i;
            let mut top = false;
            for _ in 0..n {
                top |= idx % f + 2 >= f;
                idx /= f;
            }
            Complex64::new(if top { 1.0 } else { 0.0 }, 0.0)
        })
    }
}

/// `L_j = Σ_k (C₋)_{jk} a_k + (C₊)_{jk} a_k†` and `H = ½ ă†Ωă`, on
/// `fock_dim^n` states.
pub fn build_truncated_operators(sys: &QuantumLinearSystem, fock_dim: usize) -> Result<TruncatedOperators> {
    let n = sys.n_modes();
    if fock_dim < 2 {
        return Err(Error::Precondition(format!("fock_dim must be at least 2, got {fock_dim}")));
    }
    let d = (0..n).try_fold(1usize, |acc, _| acc.checked_mul(fock_dim).filter(|&d| d <= MAX_DIM));
    let Some(d) = d else {
        return Err(Error::Resource(format!(
            "{fock_dim}^{n} states exceeds the cap of {MAX_DIM}; lower fock_dim"
        )));
    };
    let a = ladder(fock_dim);
    let id = CMatrix::identity(fock_dim, fock_dim);
    let a_ops: Vec<CMatrix> = (0..n)
        .map(|k| {
            let factors: Vec<CMatrix> = (0..n).map(|j| if j == k { a.clone() } else { id.clone() }).collect();
            kron_chain(&factors)
        })
        .collect();
    let adag: Vec<CMatrix> = a_ops.iter().map(|x| x.adjoint()).collect();
    let breve: Vec<&CMatrix> = a_ops.iter().chain(adag.iter()).collect();
    let omega = sys.omega_doubled();
    let mut h = CMatrix::zeros(d, d);
    for (i, bi) in breve.iter().enumerate() {
        let bi_adj = bi.adjoint();
        for (j, bj) in breve.iter().enumerate() {
            let w = omega[(i, j)];
            if w != Complex64::new(0.0, 0.0) {
                h += &bi_adj * *bj * (w * 0.5);
            }
        }
    }
    let h = hermitize(&h);
    let l_ops = (0..sys.m_channels())
        .map(|j| {
            let mut l = CMatrix::zeros(d, d);
            for k in 0..n {
                l += &a_ops[k] * sys.c_minus()[(j, k)] + &adag[k] * sys.c_plus()[(j, k)];
            }
            l
        })
        .collect();
    Ok(TruncatedOperators { fock_dim, a_ops, h, l_ops })
}

#[derive(Debug, Clone)]
pub struct SpectralProjection {
    pub eigenvalue: f64,
    pub projector: CMatrix,
}

/// Eigenvalues of a Hermitian `l` clustered within `tol`, with their
/// orthogonal projectors.
pub fn spectral_projections(l: &CMatrix, tol: f64) -> Result<Vec<SpectralProjection>> {
    let herm = inf_norm(&(l - l.adjoint()));
    if herm > tol {
        return Err(Error::Precondition(format!("operator is not Hermitian (residual {herm:.3e})")));
    }
    let eig = hermitize(l).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut out: Vec<(Vec<usize>, f64)> = Vec::new();
    for i in order {
        let v = eig.eigenvalues[i];
        match out.last_mut() {
            Some((idx, first)) if v - *first <= tol => idx.push(i),
            _ => out.push((vec![i], v)),
        }
    }
    Ok(out
        .into_iter()
        .map(|(idx, _)| {
            let eigenvalue = idx.iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / idx.len() as f64;
            let d = l.nrows();
            let mut projector = CMatrix::zeros(d, d);
            for &i in &idx {
                let v = eig.eigenvectors.column(i);
                projector += v * v.adjoint();
            }
            SpectralProjection { eigenvalue, projector }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    pub n_traj: usize,
    pub seed: u64,
    /// Observables are recorded at this many equally spaced times after
    /// t = 0 (rounded to whole steps).
    pub checkpoints: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 1e-3, t_final: 1.0, n_traj: 2000, seed: 0, checkpoints: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmeTrajectoryBatch {
    pub times: Vec<f64>,
    /// `values[traj][checkpoint][observable] = Tr(ρ_c X)`.
    pub values: Vec<Vec<Vec<f64>>>,
    pub seed: u64,
    pub dt: f64,
    /// Largest `|Tr ρ_c − 1|` seen after any step, before renormalizing.
    pub max_trace_error: f64,
    /// Largest eigenvalue mass clipped on any single trajectory.
    pub max_clipped_mass: f64,
    /// Largest population in the top two Fock levels at any checkpoint.
    pub max_top_population: f64,
    /// `dt·‖iH + ½ΣL†L‖∞`; well above 0.1 the step is too coarse.
    pub step_stiffness: f64,
}

struct Stepper<'a> {
    ops: &'a TruncatedOperators,
    /// `−iH − ½ Σ L†L`.
    k: CMatrix,
    l_adj: Vec<CMatrix>,
    dt: f64,
}

impl Stepper<'_> {
    fn step(&self, rho: &CMatrix, dnu: &[f64]) -> CMatrix {
        let kr = &self.k * rho;
        let dt = Complex64::new(self.dt, 0.0);
        let mut next = rho + (&kr + kr.adjoint()) * dt;
        for ((l, l_adj), &dw) in self.ops.l_ops.iter().zip(&self.l_adj).zip(dnu) {
            let lr = l * rho;
            next += &lr * l_adj * dt;
            let mean = lr.trace().re * 2.0;
            next += (&lr + lr.adjoint() - rho * Complex64::new(mean, 0.0)) * Complex64::new(dw, 0.0);
        }
        next
    }
}

/// Clips eigenvalues below `−NEG_EIG_TOL` to zero; returns the clipped
/// mass.
fn repair_psd(rho: &mut CMatrix) -> f64 {
    let d = rho.nrows();
    let shifted = &*rho + CMatrix::identity(d, d) * Complex64::new(NEG_EIG_TOL, 0.0);
    if shifted.cholesky().is_some() {
        return 0.0;
    }
    let eig = rho.clone().symmetric_eigen();
    let mut clipped = 0.0;
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < 0.0 {
            clipped -= *v;
            *v = 0.0;
        }
    }
    let vecs = &eig.eigenvectors;
    *rho = vecs * CMatrix::from_diagonal(&vals.map(|v| Complex64::new(v, 0.0))) * vecs.adjoint();
    clipped
}

fn expectation(rho: &CMatrix, x: &CMatrix) -> f64 {
    // Tr(ρX) without forming the product.
    rho.transpose().component_mul(x).sum().re
}

/// Euler–Maruyama integration of the conditioned state, `n_traj`
/// independent trajectories in parallel. Trajectory `j` draws from stream
/// `j` of a generator keyed by `seed`, so results do not depend on thread
/// count.
pub fn simulate_qsme(
    ops: &TruncatedOperators,
    rho0: &CMatrix,
    cfg: &SimConfig,
    tracked: &[CMatrix],
) -> Result<SmeTrajectoryBatch> {
    let d = ops.dim();
    if rho0.shape() != (d, d) || tracked.iter().any(|x| x.shape() != (d, d)) {
        return Err(Error::Dimension(format!("state and observables must be {d}x{d}")));
    }
    let tr = rho0.trace();
    let herm = inf_norm(&(rho0 - rho0.adjoint()));
    let min_eig = hermitize(rho0).symmetric_eigenvalues().min();
    if (tr - 1.0).norm() > 1e-10 || herm > 1e-12 || min_eig < -NEG_EIG_TOL {
        return Err(Error::Precondition(format!(
            "ρ₀ must be a density matrix (trace {tr:.3e}, hermiticity {herm:.1e}, min eigenvalue {min_eig:.3e})"
        )));
    }
    if !(cfg.dt > 0.0 && cfg.t_final > 0.0 && cfg.n_traj > 0 && cfg.checkpoints > 0) {
        return Err(Error::Precondition("dt, T, trajectory and checkpoint counts must be positive".into()));
    }
    let steps = (cfg.t_final / cfg.dt).round() as usize;
    let every = (steps / cfg.checkpoints).max(1);
    let record: Vec<usize> = (0..=steps).filter(|s| s % every == 0 || *s == steps).collect();
    let times = record.iter().map(|&s| s as f64 * cfg.dt).collect();

    let l_adj: Vec<CMatrix> = ops.l_ops.iter().map(|l| l.adjoint()).collect();
    let mut k = &ops.h * -I;
    for (l, la) in ops.l_ops.iter().zip(&l_adj) {
        k -= la * l * Complex64::new(0.5, 0.0);
    }
    let step_stiffness = cfg.dt * inf_norm(&k);
    let stepper = Stepper { ops, k, l_adj, dt: cfg.dt };
    let top = ops.top_levels_projector();
    let m = ops.l_ops.len();
    let sd = cfg.dt.sqrt();

    struct Run {
        values: Vec<Vec<f64>>,
        trace_err: f64,
        clipped: f64,
        top_pop: f64,
    }
    let runs: Vec<Result<Run>> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(j as u64);
            let mut rho = rho0.clone();
            let mut run = Run { values: Vec::with_capacity(record.len()), trace_err: 0.0, clipped: 0.0, top_pop: 0.0 };
            let mut dnu = vec![0.0; m];
            let mut next_record = 0;
            for s in 0..=steps {
                if record.get(next_record) == Some(&s) {
                    run.values.push(tracked.iter().map(|x| expectation(&rho, x)).collect());
                    run.top_pop = run.top_pop.max(expectation(&rho, &top));
                    next_record += 1;
                }
                if s == steps {
                    break;
                }
                for v in dnu.iter_mut() {
                    *v = random::normal(&mut rng) * sd;
                }
                rho = hermitize(&stepper.step(&rho, &dnu));
                run.clipped += repair_psd(&mut rho);
                if run.clipped > MAX_CLIPPED_MASS {
                    return Err(Error::Instability { clipped: run.clipped, limit: MAX_CLIPPED_MASS });
                }
                let t = rho.trace().re;
                run.trace_err = run.trace_err.max((t - 1.0).abs());
                rho /= Complex64::new(t, 0.0);
            }
            Ok(run)
        })
        .collect();
    let mut batch = SmeTrajectoryBatch {
        times,
        values: Vec::with_capacity(cfg.n_traj),
        seed: cfg.seed,
        dt: cfg.dt,
        max_trace_error: 0.0,
        max_clipped_mass: 0.0,
        max_top_population: 0.0,
        step_stiffness,
    };
    for run in runs {
        let run = run?;
        batch.max_trace_error = batch.max_trace_error.max(run.trace_err);
        batch.max_clipped_mass = batch.max_clipped_mass.max(run.clipped);
        batch.max_top_population = batch.max_top_population.max(run.top_pop);
        batch.values.push(run.values);
    }
    Ok(batch)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservableStats {
    pub name: String,
    pub mean: Vec<f64>,
    pub standard_error: Vec<f64>,
    /// Ensemble mean at the last checkpoint minus the mean at t = 0.
    pub drift: f64,
    /// Standard error of the per-trajectory change.
    pub drift_se: f64,
    pub bias_allowance: f64,
    /// `|drift| ≤ 3·(drift_se + bias_allowance)`.
    pub flat: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub times: Vec<f64>,
    pub observables: Vec<ObservableStats>,
    pub n_traj: usize,
}

impl MartingaleReport {
    pub fn all_flat(&self) -> bool {
        self.observables.iter().all(|o| o.flat)
    }
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = if n > 1.0 { xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, (var / n).sqrt())
}

/// Ensemble statistics of each tracked observable. `allowances[i]` covers
/// the integrator's O(dt) bias for observable `i`.
pub fn martingale_stats(batch: &SmeTrajectoryBatch, names: &[String], allowances: &[f64]) -> MartingaleReport {
    let n_obs = names.len();
    let last = batch.times.len() - 1;
    let observables = (0..n_obs)
        .map(|i| {
            let (mean, standard_error): (Vec<f64>, Vec<f64>) =
                (0..=last).map(|c| mean_se(batch.values.iter().map(|v| v[c][i]))).unzip();
            let (drift, drift_se) = mean_se(batch.values.iter().map(|v| v[last][i] - v[0][i]));
            let bias_allowance = allowances.get(i).copied().unwrap_or(0.0);
            ObservableStats {
                name: names[i].clone(),
                mean,
                standard_error,
                drift,
                drift_se,
                bias_allowance,
                flat: drift.abs() <= 3.0 * (drift_se + bias_allowance),
            }
        })
        .collect();
    MartingaleReport { times: batch.times.clone(), observables, n_traj: batch.values.len() }
}

/// Default bias allowance `dt·‖X‖` for each observable.
pub fn default_allowances(dt: f64, tracked: &[CMatrix]) -> Vec<f64> {
    tracked
        .iter()
        .map(|x| dt * hermitize(x).symmetric_eigenvalues().iter().map(|v| v.abs()).fold(0.0, f64::max))
        .collect()
}
