//! Coherent feedback through a beamsplitter: loop reduction, an independent
//! frequency-domain oracle, and a search for coupling gains that make the
//! reduced Hamiltonian purely imaginary.
//!
//! The plant has `m = m₁ + m₂` channels. Outputs `y₂` pass through a
//! beamsplitter `S_b` and return as inputs `u₂`; the reduced system sees only
//! the `m₁` outer channels.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bae::{self, BaeReport};
use crate::error::{Error, Result};
use crate::matcore::{self, block2, complexify, inf_norm, quadrature_blocks, rel_diff, CMatrix, I};
use crate::qsys::{QuantumLinearSystem, SystemParams};
use crate::random;
use crate::xferfn::{eval_tf, FrequencyGrid};

/// Upper bound on the condition number of `I − S₂₂S_b`.
pub const MAX_LOOP_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackNetwork {
    plant: QuantumLinearSystem,
    m1: usize,
    s_b: CMatrix,
}

/// How the Hamiltonian correction of the closed loop is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianRule {
    /// H + Σ_j Im{L_j† S_j2 S_b(I − S₂₂S_b)⁻¹ L₂}, the Hamiltonian of the
    /// closed loop. Agrees with direct interconnection.
    #[default]
    LoopClosure,
    /// Ω̄₋ = Ω₋ − i(k₁₁†S_b k₂₁ − k₂₁†S_b† k₁₁),
    /// Ω̄₊ = Ω₊ − i(k₁₁†S_b k₂₂ − k₂₁†S_b† k₁₂).
    /// Kept for comparison; it does not reproduce the closed loop in
    /// general and Ω̄₊ need not be symmetric.
    Printed,
}

impl FeedbackNetwork {
    /// `plant` carries all `m₁ + m₂` channels; the last `m₂ = m − m₁` are
    /// fed back through `s_b`.
    pub fn new(plant: QuantumLinearSystem, m1: usize, s_b: CMatrix) -> Result<Self> {
        let m = plant.m_channels();
        if m1 == 0 || m1 >= m {
            return Err(Error::Dimension(format!("channel split m1={m1} invalid for m={m}")));
        }
        let m2 = m - m1;
        if s_b.shape() != (m2, m2) {
            return Err(Error::Dimension(format!("beamsplitter is {:?}, expected {m2}x{m2}", s_b.shape())));
        }
        let unit = inf_norm(&(&s_b * s_b.adjoint() - CMatrix::identity(m2, m2)));
        if unit > matcore::DEFAULT_TOL {
            return Err(Error::Validation(vec![crate::error::Violation {
                invariant: "S_b_unitary".into(),
                residual: unit,
                detail: "beamsplitter scattering matrix is not unitary".into(),
            }]));
        }
        let net = Self { plant, m1, s_b };
        net.loop_gain()?;
        Ok(net)
    }

    /// Builds the plant from the Hamiltonian and the four coupling blocks.
    /// `s_g` defaults to the identity.
    #[allow(clippy::too_many_arguments)]
    pub fn from_couplings(
        omega_minus: CMatrix,
        omega_plus: CMatrix,
        k11: &CMatrix,
        k12: &CMatrix,
        k21: &CMatrix,
        k22: &CMatrix,
        s_g: Option<CMatrix>,
        s_b: CMatrix,
    ) -> Result<Self> {
        let (m1, m2) = (k11.nrows(), k21.nrows());
        let n = omega_minus.nrows();
        for (name, k, r) in [("k11", k11, m1), ("k12", k12, m1), ("k21", k21, m2), ("k22", k22, m2)] {
            if k.shape() != (r, n) {
                return Err(Error::Dimension(format!("{name} is {:?}, expected {r}x{n}", k.shape())));
            }
        }
        let stack = |a: &CMatrix, b: &CMatrix| {
            let mut x = CMatrix::zeros(m1 + m2, n);
            x.rows_mut(0, m1).copy_from(a);
            x.rows_mut(m1, m2).copy_from(b);
            x
        };
        let plant = QuantumLinearSystem::new(SystemParams {
            s: s_g.unwrap_or_else(|| CMatrix::identity(m1 + m2, m1 + m2)),
            c_minus: stack(k11, k21),
            c_plus: stack(k12, k22),
            omega_minus,
            omega_plus,
        })?;
        Self::new(plant, m1, s_b)
    }

    pub fn plant(&self) -> &QuantumLinearSystem {
        &self.plant
    }

    pub fn m1(&self) -> usize {
        self.m1
    }

    pub fn m2(&self) -> usize {
        self.plant.m_channels() - self.m1
    }

    pub fn s_b(&self) -> &CMatrix {
        &self.s_b
    }

    fn s_block(&self, i: usize, j: usize) -> CMatrix {
        let (m1, m2) = (self.m1, self.m2());
        let (r0, nr) = if i == 1 { (0, m1) } else { (m1, m2) };
        let (c0, nc) = if j == 1 { (0, m1) } else { (m1, m2) };
        self.plant.s().view((r0, c0), (nr, nc)).into_owned()
    }

    pub fn k(&self, i: usize, j: usize) -> CMatrix {
        let c = if j == 1 { self.plant.c_minus() } else { self.plant.c_plus() };
        let (r0, nr) = if i == 1 { (0, self.m1) } else { (self.m1, self.m2()) };
        c.rows(r0, nr).into_owned()
    }

    /// `S_b(I − S₂₂S_b)⁻¹`, or an ill-posed-loop error.
    pub fn loop_gain(&self) -> Result<CMatrix> {
        let m2 = self.m2();
        let x = CMatrix::identity(m2, m2) - self.s_block(2, 2) * &self.s_b;
        let sv = x.singular_values();
        let cond = if sv.min() == 0.0 { f64::INFINITY } else { sv.max() / sv.min() };
        if !(cond < MAX_LOOP_CONDITION) {
            return Err(Error::IllPosedLoop { condition: cond });
        }
        let inv = x.try_inverse().ok_or(Error::IllPosedLoop { condition: f64::INFINITY })?;
        Ok(&self.s_b * inv)
    }
}

/// Reduced parameters before validation.
pub fn reduced_params(net: &FeedbackNetwork, rule: HamiltonianRule) -> Result<SystemParams> {
    let gain = net.loop_gain()?;
    let s12 = net.s_block(1, 2);
    let through = &s12 * &gain;
    let s = net.s_block(1, 1) + &through * net.s_block(2, 1);
    let c_minus = net.k(1, 1) + &through * net.k(2, 1);
    let c_plus = net.k(1, 2) + &through * net.k(2, 2);
    let (omega_minus, omega_plus) = match rule {
        HamiltonianRule::LoopClosure => loop_closure_omega(net, &gain),
        HamiltonianRule::Printed => printed_omega(net),
    };
    Ok(SystemParams { s, c_minus, c_plus, omega_minus, omega_plus })
}

fn loop_closure_omega(net: &FeedbackNetwork, gain: &CMatrix) -> (CMatrix, CMatrix) {
    let n = net.plant.n_modes();
    let k = |i: usize| {
        let (a, b) = (net.k(i, 1), net.k(i, 2));
        let mut x = CMatrix::zeros(a.nrows(), 2 * n);
        x.columns_mut(0, n).copy_from(&a);
        x.columns_mut(n, n).copy_from(&b);
        x
    };
    let k2 = k(2);
    // H_red − H = ă†Qă with Q = Σ_j (P_j − P_j†)/(2i), P_j = K_j† S_j2 G K₂.
    let mut q = CMatrix::zeros(2 * n, 2 * n);
    for j in [1, 2] {
        let p = k(j).adjoint() * net.s_block(j, 2) * gain * &k2;
        q += (&p - p.adjoint()) * Complex64::new(0.0, -0.5);
    }
    // Doubled-up projection: ă†Qă = ă†·½(Q + ΣQ^#Σ)·ă up to a constant,
    // and H = ½ă†Ωă, so Ω̄ = Ω + Q + ΣQ^#Σ.
    let sigma = swap(n);
    let qd = &q + &sigma * q.conjugate() * &sigma;
    let om = net.plant.omega_minus() + qd.view((0, 0), (n, n));
    let op = net.plant.omega_plus() + qd.view((0, n), (n, n));
    (om, op)
}

fn swap(n: usize) -> CMatrix {
    let e = CMatrix::identity(n, n);
    let z = CMatrix::zeros(n, n);
    block2(&z, &e, &e, &z).expect("square blocks")
}

fn printed_omega(net: &FeedbackNetwork) -> (CMatrix, CMatrix) {
    let (k11, k12, k21, k22) = (net.k(1, 1), net.k(1, 2), net.k(2, 1), net.k(2, 2));
    let sb = &net.s_b;
    let om = net.plant.omega_minus() - (k11.adjoint() * sb * &k21 - k21.adjoint() * sb.adjoint() * &k11) * I;
    let op = net.plant.omega_plus() - (k11.adjoint() * sb * &k22 - k21.adjoint() * sb.adjoint() * &k12) * I;
    (om, op)
}

/// Closes the loop and validates the `m₁`-channel result.
pub fn reduce_network(net: &FeedbackNetwork) -> Result<QuantumLinearSystem> {
    reduce_network_with(net, HamiltonianRule::LoopClosure)
}

pub fn reduce_network_with(net: &FeedbackNetwork, rule: HamiltonianRule) -> Result<QuantumLinearSystem> {
    match QuantumLinearSystem::with_tolerance(reduced_params(net, rule)?, 1e-10) {
        Ok(sys) => Ok(sys),
        Err(Error::Validation(v)) => Err(Error::ReducedStructure(v)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionCheck {
    /// Largest relative deviation between the reduced transfer function and
    /// the directly closed loop over the sampled frequencies.
    pub max_deviation: f64,
    pub frequencies: usize,
    pub tol: f64,
    pub passes: bool,
}

/// Index lists of the quadratures of a channel range within `[q; p]`.
fn quad_indices(m: usize, start: usize, len: usize) -> Vec<usize> {
    (start..start + len).chain(m + start..m + start + len).collect()
}

fn select(x: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| x[(rows[i], cols[j])])
}

/// Closed-loop response of the full plant at `s`:
/// G₁₁ + G₁₂T(I − G₂₂T)⁻¹G₂₁ with `T` the quadrature image of `S_b`.
pub fn closed_loop_tf(net: &FeedbackNetwork, s: Complex64) -> Result<CMatrix> {
    let m = net.plant.m_channels();
    let (m1, m2) = (net.m1, net.m2());
    let g = eval_tf(&net.plant.quad_realization()?, s)?;
    let o = quad_indices(m, 0, m1);
    let f = quad_indices(m, m1, m2);
    let t = complexify(&quadrature_blocks(&net.s_b, &CMatrix::zeros(m2, m2))?);
    let (g11, g12, g21, g22) = (select(&g, &o, &o), select(&g, &o, &f), select(&g, &f, &o), select(&g, &f, &f));
    let x = CMatrix::identity(2 * m2, 2 * m2) - &g22 * &t;
    let y = x
        .lu()
        .solve(&g21)
        .ok_or(Error::IllPosedLoop { condition: f64::INFINITY })?;
    Ok(g11 + g12 * t * y)
}

/// Compares the reduced system with direct interconnection at `points`
/// log-spaced frequencies in [1e−2, 1e2].
pub fn verify_reduction(net: &FeedbackNetwork, rule: HamiltonianRule, tol: f64) -> Result<ReductionCheck> {
    let reduced = QuantumLinearSystem::with_tolerance(reduced_params(net, rule)?, 1e-10)
        .map_err(|e| match e {
            Error::Validation(v) => Error::ReducedStructure(v),
            e => e,
        })?;
    let r = reduced.quad_realization()?;
    let grid = FrequencyGrid { w_min: 1e-2, w_max: 1e2, points: 16 };
    let mut worst: f64 = 0.0;
    for w in grid.omegas() {
        let s = Complex64::new(0.0, w);
        let direct = closed_loop_tf(net, s)?;
        let via = eval_tf(&r, s)?;
        worst = worst.max(rel_diff(&direct, &via));
    }
    Ok(ReductionCheck { max_deviation: worst, frequencies: grid.points, tol, passes: worst <= tol })
}

/// Search configuration for [`design_couplings`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    pub starts: usize,
    pub iterations: usize,
    /// Levenberg–Marquardt steps after the coordinate sweeps; 0 disables.
    pub polish_iterations: usize,
    pub seed: u64,
    /// Candidates need an objective at or below this value.
    pub threshold: f64,
    pub rule: HamiltonianRule,
    /// Tolerance for the structural hypotheses and the BAE certificate of
    /// each returned candidate.
    pub tol: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { starts: 64, iterations: 200, polish_iterations: 50, seed: 0, threshold: 1e-20, rule: HamiltonianRule::LoopClosure, tol: 1e-9 }
    }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub s_b: CMatrix,
    pub k11: CMatrix,
    pub k12: CMatrix,
    pub k21: CMatrix,
    pub k22: CMatrix,
    pub objective: f64,
    pub reduced: Option<QuantumLinearSystem>,
    pub bae: Option<BaeReport>,
}

#[derive(Debug, Clone)]
pub struct DesignOutcome {
    pub candidates: Vec<Candidate>,
    /// Lowest objective found over every start and beamsplitter, whether or
    /// not it met the threshold.
    pub best_objective: f64,
    /// Lowest objective among the random starting points, before refinement.
    pub best_start_objective: f64,
    /// Beamsplitters skipped because the loop was ill-posed.
    pub ill_posed: Vec<String>,
    pub diagnostic: String,
}

struct Problem<'a> {
    omega_minus: &'a CMatrix,
    omega_plus: &'a CMatrix,
    n: usize,
    m1: usize,
    m2: usize,
    s_b: CMatrix,
    gain: CMatrix,
    sigma: CMatrix,
    rule: HamiltonianRule,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        4 * (self.m1 + self.m2) * self.n
    }

    fn unpack(&self, x: &[f64]) -> [CMatrix; 4] {
        let mut off = 0;
        let mut take = |r: usize| {
            let n = self.n;
            let m = CMatrix::from_fn(r, n, |i, j| {
                let k = off + 2 * (i * n + j);
                Complex64::new(x[k], x[k + 1])
            });
            off += 2 * r * n;
            m
        };
        let k11 = take(self.m1);
        let k12 = take(self.m1);
        let k21 = take(self.m2);
        let k22 = take(self.m2);
        [k11, k12, k21, k22]
    }

    fn network(&self, x: &[f64]) -> Result<FeedbackNetwork> {
        let [k11, k12, k21, k22] = self.unpack(x);
        // Build without validating Ω̄; the objective measures its structure.
        let n = self.n;
        let m = self.m1 + self.m2;
        let stack = |a: &CMatrix, b: &CMatrix| {
            let mut out = CMatrix::zeros(m, n);
            out.rows_mut(0, self.m1).copy_from(a);
            out.rows_mut(self.m1, self.m2).copy_from(b);
            out
        };
        let plant = QuantumLinearSystem::new(SystemParams {
            s: CMatrix::identity(m, m),
            c_minus: stack(&k11, &k21),
            c_plus: stack(&k12, &k22),
            omega_minus: self.omega_minus.clone(),
            omega_plus: self.omega_plus.clone(),
        })?;
        FeedbackNetwork::new(plant, self.m1, self.s_b.clone())
    }

    /// Reduced parameters for the identity plant scattering, where the loop
    /// leaves the outer couplings untouched and only Ω moves.
    fn reduced(&self, x: &[f64]) -> Option<SystemParams> {
        let [k11, k12, k21, k22] = self.unpack(x);
        let n = self.n;
        let (omega_minus, omega_plus) = match self.rule {
            HamiltonianRule::LoopClosure => {
                let mut k2 = CMatrix::zeros(self.m2, 2 * n);
                k2.columns_mut(0, n).copy_from(&k21);
                k2.columns_mut(n, n).copy_from(&k22);
                let p = k2.adjoint() * &self.gain * &k2;
                let q = (&p - p.adjoint()) * Complex64::new(0.0, -0.5);
                let qd = &q + &self.sigma * q.conjugate() * &self.sigma;
                (self.omega_minus + qd.view((0, 0), (n, n)), self.omega_plus + qd.view((0, n), (n, n)))
            }
            HamiltonianRule::Printed => {
                let sb = &self.s_b;
                let sb_adj = sb.adjoint();
                let k11_adj = k11.adjoint();
                let k21_adj = k21.adjoint();
                (
                    self.omega_minus - (&k11_adj * sb * &k21 - &k21_adj * &sb_adj * &k11) * I,
                    self.omega_plus - (&k11_adj * sb * &k22 - &k21_adj * &sb_adj * &k12) * I,
                )
            }
        };
        let ok = [&omega_minus, &omega_plus].iter().all(|x| matcore::all_finite(x));
        ok.then(|| SystemParams { s: CMatrix::identity(self.m1, self.m1), c_minus: k11, c_plus: k12, omega_minus, omega_plus })
    }

    /// Residual vector whose squared norm is the objective; `imaginary`
    /// selects which part of the reduced coupling is driven to zero.
    fn residuals(p: &SystemParams, imaginary: bool) -> Vec<f64> {
        let mut r = Vec::new();
        r.extend(p.omega_minus.iter().map(|z| z.re));
        r.extend(p.omega_plus.iter().map(|z| z.re));
        for z in p.c_minus.iter().chain(p.c_plus.iter()) {
            r.push(if imaginary { z.im } else { z.re });
        }
        // Symmetry of Ω̄₊ is automatic for the loop-closure rule only.
        for z in (&p.omega_plus - p.omega_plus.transpose()).iter() {
            r.push(z.re);
            r.push(z.im);
        }
        r
    }

    fn branch(&self, x: &[f64]) -> Option<(f64, bool)> {
        let p = self.reduced(x)?;
        let sq = |r: Vec<f64>| r.iter().map(|v| v * v).sum::<f64>();
        let re = sq(Self::residuals(&p, false));
        let im = sq(Self::residuals(&p, true));
        Some(if re <= im { (re, false) } else { (im, true) })
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.branch(x).map_or(f64::INFINITY, |(v, _)| v)
    }

    /// Levenberg–Marquardt on the residuals with a finite-difference
    /// Jacobian, for the last digits the coordinate sweeps approach slowly.
    fn polish(&self, x: &mut [f64], fx: f64, iterations: usize) -> f64 {
        let Some((_, imaginary)) = self.branch(x) else { return fx };
        let res = |y: &[f64]| self.reduced(y).map(|p| Self::residuals(&p, imaginary));
        let Some(mut r) = res(x) else { return fx };
        let mut cost: f64 = r.iter().map(|v| v * v).sum();
        let mut lambda = 1e-3;
        let n = x.len();
        for _ in 0..iterations {
            if cost == 0.0 {
                break;
            }
            let mut jac = nalgebra::DMatrix::<f64>::zeros(r.len(), n);
            let mut y = x.to_vec();
            for j in 0..n {
                let h = 1e-7 * x[j].abs().max(1.0);
                y[j] = x[j] + h;
                let Some(up) = res(&y) else { return cost.min(fx) };
                y[j] = x[j] - h;
                let Some(down) = res(&y) else { return cost.min(fx) };
                y[j] = x[j];
                for i in 0..r.len() {
                    jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
                }
            }
            let g = jac.transpose() * DVector::from_column_slice(&r);
            let jtj = jac.transpose() * &jac;
            let mut improved = false;
            for _ in 0..10 {
                let mut a = jtj.clone();
                for j in 0..n {
                    a[(j, j)] += lambda * (1.0 + jtj[(j, j)]);
                }
                let Some(step) = a.cholesky().map(|c| c.solve(&g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a - b).collect();
                if let Some(rt) = res(&trial) {
                    let ct: f64 = rt.iter().map(|v| v * v).sum();
                    if ct < cost {
                        x.copy_from_slice(&trial);
                        r = rt;
                        improved = cost - ct > 1e-15 * cost;
                        cost = ct;
                        lambda = (lambda * 0.1).max(1e-12);
                        break;
                    }
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        cost.min(fx)
    }
}

/// Minimizes a function that is a polynomial of degree ≤ 4 along every
/// coordinate: fit the quartic from five samples, move to the best real
/// critical point, keep the move only if it improves.
fn coordinate_descent(f: &dyn Fn(&[f64]) -> f64, x: &mut [f64], iterations: usize) -> f64 {
    let mut fx = f(x);
    for _ in 0..iterations {
        let before = fx;
        for i in 0..x.len() {
            let h = x[i].abs().max(1.0);
            let x0 = x[i];
            let ts = [-2.0, -1.0, 0.0, 1.0, 2.0];
            let mut vals = [0.0; 5];
            for (k, &t) in ts.iter().enumerate() {
                x[i] = x0 + t * h;
                vals[k] = if t == 0.0 { fx } else { f(x) };
            }
            x[i] = x0;
            if vals.iter().any(|v| !v.is_finite()) {
                let (k, v) = vals.iter().enumerate().fold((2, fx), |acc, (k, &v)| if v < acc.1 { (k, v) } else { acc });
                x[i] = x0 + ts[k] * h;
                fx = v;
                continue;
            }
            let coef = quartic_fit(&ts, &vals);
            let mut best = (fx, x0);
            for t in cubic_roots(4.0 * coef[4], 3.0 * coef[3], 2.0 * coef[2], coef[1]) {
                x[i] = x0 + t * h;
                let v = f(x);
                if v < best.0 {
                    best = (v, x[i]);
                }
            }
            for (k, &t) in ts.iter().enumerate() {
                if vals[k] < best.0 {
                    best = (vals[k], x0 + t * h);
                }
            }
            x[i] = best.1;
            fx = best.0;
        }
        if fx == 0.0 || before - fx <= 1e-10 * before {
            break;
        }
    }
    fx
}

fn quartic_fit(ts: &[f64; 5], vals: &[f64; 5]) -> [f64; 5] {
    let v = nalgebra::DMatrix::from_fn(5, 5, |i, j| ts[i].powi(j as i32));
    let sol = v.lu().solve(&DVector::from_column_slice(vals)).expect("distinct nodes");
    [sol[0], sol[1], sol[2], sol[3], sol[4]]
}

/// Real roots of a t³ + b t² + c t + d (lower degree when leading
/// coefficients vanish).
fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if scale == 0.0 || !scale.is_finite() {
        return vec![];
    }
    if a.abs() <= 1e-12 * scale {
        if b.abs() <= 1e-12 * scale {
            return if c != 0.0 { vec![-d / c] } else { vec![] };
        }
        let disc = c * c - 4.0 * b * d;
        if disc < 0.0 {
            return vec![-c / (2.0 * b)];
        }
        let r = disc.sqrt();
        return vec![(-c + r) / (2.0 * b), (-c - r) / (2.0 * b)];
    }
    // Depressed cubic t = u − b/(3a): u³ + pu + q = 0.
    let (b, c, d) = (b / a, c / a, d / a);
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc > 0.0 {
        let r = disc.sqrt();
        vec![(-q / 2.0 + r).cbrt() + (-q / 2.0 - r).cbrt() - shift]
    } else if p == 0.0 {
        vec![-shift]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let theta = (3.0 * q / (p * m)).clamp(-1.0, 1.0).acos() / 3.0;
        (0..3)
            .map(|k| m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift)
            .collect()
    }
}

/// Searches coupling gains for which the reduced Hamiltonian is purely
/// imaginary and the reduced coupling is real or purely imaginary.
///
/// Every candidate below `cfg.threshold` is reduced, checked against the
/// bilateral conditions and certified; candidates failing either are
/// dropped. An empty result carries the best objective found.
pub fn design_couplings(
    omega_minus: &CMatrix,
    omega_plus: &CMatrix,
    split: (usize, usize),
    s_b_candidates: &[CMatrix],
    cfg: &SearchConfig,
) -> Result<DesignOutcome> {
    let n = omega_minus.nrows();
    let (m1, m2) = split;
    let mut candidates = Vec::new();
    let mut ill_posed = Vec::new();
    let mut best_objective = f64::INFINITY;
    let mut best_start_objective = f64::INFINITY;
    for (b_idx, s_b) in s_b_candidates.iter().enumerate() {
        let mut problem = Problem {
            omega_minus,
            omega_plus,
            n,
            m1,
            m2,
            s_b: s_b.clone(),
            gain: CMatrix::zeros(m2, m2),
            sigma: swap(n),
            rule: cfg.rule,
        };
        let probe = vec![0.0; problem.dim()];
        match problem.network(&probe) {
            Err(Error::IllPosedLoop { .. }) => {
                ill_posed.push(format!("{:?}", s_b.iter().map(|z| (z.re, z.im)).collect::<Vec<_>>()));
                continue;
            }
            Err(e) => return Err(e),
            Ok(net) => problem.gain = net.loop_gain()?,
        }
        let runs: Vec<(f64, f64, Vec<f64>)> = (0..cfg.starts)
            .into_par_iter()
            .map(|start| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream((b_idx * cfg.starts + start) as u64);
                let mut x: Vec<f64> = (0..problem.dim()).map(|_| random::normal(&mut rng)).collect();
                // One start keeps the fed-back couplings at zero.
                if start == 0 {
                    let k2_off = 4 * m1 * n;
                    for v in &mut x[k2_off..] {
                        *v = 0.0;
                    }
                }
                let f0 = problem.objective(&x);
                let f = |y: &[f64]| problem.objective(y);
                let fx = coordinate_descent(&f, &mut x, cfg.iterations);
                let fx = problem.polish(&mut x, fx, cfg.polish_iterations);
                (f0, fx, x)
            })
            .collect();
        for (f0, fx, x) in runs {
            best_start_objective = best_start_objective.min(f0);
            best_objective = best_objective.min(fx);
            if fx > cfg.threshold {
                continue;
            }
            let [k11, k12, k21, k22] = problem.unpack(&x);
            let net = problem.network(&x)?;
            let Ok(reduced) = reduce_network_with(&net, cfg.rule) else { continue };
            let Ok(report) = bae::certify_bae(&reduced, cfg.tol) else { continue };
            let bilateral = report.matched_conditions.iter().any(|c| c.condition_id.starts_with("bilateral"));
            if !bilateral || !report.consistency {
                continue;
            }
            candidates.push(Candidate {
                s_b: s_b.clone(),
                k11,
                k12,
                k21,
                k22,
                objective: fx,
                reduced: Some(reduced),
                bae: Some(report),
            });
        }
    }
    candidates.sort_by(|a, b| a.objective.total_cmp(&b.objective));
    let diagnostic = if candidates.is_empty() {
        format!("no candidate reached objective {:.1e}; best found {best_objective:.3e}", cfg.threshold)
    } else {
        format!("{} candidates; best objective {:.3e}", candidates.len(), candidates[0].objective)
    };
    Ok(DesignOutcome { candidates, best_objective, best_start_objective, ill_posed, diagnostic })
}

/// `I`, `iI` and `−iI` of size `m₂`.
pub fn default_beamsplitters(m2: usize) -> Vec<CMatrix> {
    let e = CMatrix::identity(m2, m2);
    vec![e.clone(), &e * I, &e * -I]
}
