//! Transfer functions `G[s] = D + C(sI − A)⁻¹B`, Markov parameters and
//! certification of exactly-zero blocks.
//!
//! A block is certified zero only when two independent tests agree: the
//! Markov parameters `D, CB, …, CA^{K−1}B` up to the Cayley–Hamilton horizon
//! (an exact certificate for a rational transfer function), and a sweep of
//! `G[iω]` over a log-spaced frequency grid.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{flat_adjoint, inf_norm, j_flat, CMatrix, HALF, I};
use crate::qsys::{Form, QuantumLinearSystem, Realization};

/// Resolvents with a condition estimate above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Log-spaced grid of angular frequencies on the imaginary axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub w_min: f64,
    pub w_max: f64,
    pub points: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self { w_min: 1e-3, w_max: 1e3, points: 32 }
    }
}

impl FrequencyGrid {
    pub fn omegas(&self) -> Vec<f64> {
        if self.points <= 1 {
            return vec![self.w_min];
        }
        let (lo, hi) = (self.w_min.log10(), self.w_max.log10());
        (0..self.points)
            .map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (self.points - 1) as f64))
            .collect()
    }
}

fn condition(x: &CMatrix) -> f64 {
    let sv = x.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `(sI − A) X = B` and returns `X` with the condition estimate of
/// `sI − A`.
fn resolvent_apply(a: &CMatrix, b: &CMatrix, s: Complex64) -> Result<(CMatrix, f64)> {
    let n = a.nrows();
    let m = CMatrix::identity(n, n) * s - a;
    let cond = condition(&m);
    if !(cond < MAX_CONDITION) {
        return Err(Error::Singular { s: format!("{s}"), condition: cond });
    }
    let x = m
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular { s: format!("{s}"), condition: cond })?;
    Ok((x, cond))
}

/// `G[s] = D + C(sI − A)⁻¹B`.
pub fn eval_tf(r: &Realization, s: Complex64) -> Result<CMatrix> {
    if r.n_states() == 0 {
        return Ok(r.d.clone());
    }
    let (x, _) = resolvent_apply(&r.a, &r.b, s)?;
    Ok(&r.d + &r.c * x)
}

/// Magnitude bound for the strictly proper part at `s`:
/// ‖C‖‖B‖‖(sI − A)⁻¹‖, used to scale zero tests on sampled values.
fn eval_with_bound(r: &Realization, s: Complex64) -> Result<(CMatrix, f64)> {
    if r.n_states() == 0 {
        return Ok((r.d.clone(), 0.0));
    }
    let n = r.n_states();
    let m = CMatrix::identity(n, n) * s - &r.a;
    let sv = m.singular_values();
    let (max, min) = (sv.max(), sv.min());
    let cond = if min == 0.0 { f64::INFINITY } else { max / min };
    if !(cond < MAX_CONDITION) {
        return Err(Error::Singular { s: format!("{s}"), condition: cond });
    }
    let x = m
        .lu()
        .solve(&r.b)
        .ok_or_else(|| Error::Singular { s: format!("{s}"), condition: cond })?;
    let bound = inf_norm(&r.c) * inf_norm(&r.b) / min;
    Ok((&r.d + &r.c * x, bound))
}

/// `[D, CB, CAB, …, CA^{K−1}B]`.
pub fn markov_params(r: &Realization, k: usize) -> Vec<CMatrix> {
    let mut out = Vec::with_capacity(k);
    out.push(r.d.clone());
    let mut ak_b = r.b.clone();
    for _ in 1..k {
        out.push(&r.c * &ak_b);
        ak_b = &r.a * ak_b;
    }
    out
}

/// `G[iω]` at every grid frequency, evaluated in parallel. Frequencies where
/// the resolvent is singular carry the error.
pub fn sweep(r: &Realization, grid: &FrequencyGrid) -> Vec<(f64, Result<CMatrix>)> {
    grid.omegas()
        .into_par_iter()
        .map(|w| (w, eval_tf(r, Complex64::new(0.0, w))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Qq,
    Qp,
    Pq,
    Pp,
}

impl Block {
    pub const ALL: [Block; 4] = [Block::Qq, Block::Qp, Block::Pq, Block::Pp];

    /// (output half, input half): 0 for q, 1 for p.
    pub fn halves(self) -> (usize, usize) {
        match self {
            Block::Qq => (0, 0),
            Block::Qp => (0, 1),
            Block::Pq => (1, 0),
            Block::Pp => (1, 1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Block::Qq => "qq",
            Block::Qp => "qp",
            Block::Pq => "pq",
            Block::Pp => "pp",
        }
    }
}

/// Sub-block of a `2m_out × 2m_in` matrix.
pub fn sub_block(x: &CMatrix, block: Block) -> CMatrix {
    let (ro, ci) = block.halves();
    let (h, w) = (x.nrows() / 2, x.ncols() / 2);
    x.view((ro * h, ci * w), (h, w)).into_owned()
}

/// Certification record of one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCert {
    pub zero: bool,
    /// Largest Markov-parameter block norm divided by its per-order bound.
    pub markov_max: f64,
    /// Largest sampled block norm divided by its per-frequency bound.
    pub freq_max: f64,
    /// Grid frequencies skipped because the resolvent was singular there.
    pub skipped_frequencies: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPattern {
    pub qq: BlockCert,
    pub qp: BlockCert,
    pub pq: BlockCert,
    pub pp: BlockCert,
    pub tol: f64,
    pub markov_order: usize,
}

impl BlockPattern {
    pub fn get(&self, block: Block) -> &BlockCert {
        match block {
            Block::Qq => &self.qq,
            Block::Qp => &self.qp,
            Block::Pq => &self.pq,
            Block::Pp => &self.pp,
        }
    }

    pub fn is_zero(&self, block: Block) -> bool {
        self.get(block).zero
    }

    pub fn zero_blocks(&self) -> Vec<Block> {
        Block::ALL.into_iter().filter(|&b| self.is_zero(b)).collect()
    }
}

/// Options for [`block_pattern_with`].
#[derive(Debug, Clone)]
#[derive(Default)]
pub struct PatternOptions {
    pub grid: FrequencyGrid,
    /// Number of Markov parameters; `None` means `2·dim(A) + 1` (D plus the
    /// Cayley–Hamilton horizon of `CA^kB`).
    pub markov_order: Option<usize>,
}


/// Certifies which of the four quadrature blocks vanish identically.
pub fn block_pattern(r: &Realization, tol: f64) -> Result<BlockPattern> {
    block_pattern_with(r, tol, &PatternOptions::default())
}

/// Markov test: the k-th parameter's block is compared with
/// `tol·max(scale, ‖A‖^{k−1}‖B‖‖C‖)`, the magnitude of rounding error in
/// `CA^{k−1}B`. Frequency test: each sampled block is compared with
/// `tol·max(scale, ‖C‖‖B‖‖(iω − A)⁻¹‖)`.
pub fn block_pattern_with(r: &Realization, tol: f64, opts: &PatternOptions) -> Result<BlockPattern> {
    if r.form != Form::Quadrature {
        return Err(Error::Precondition("block_pattern needs a quadrature-form realization".into()));
    }
    if !r.n_outputs().is_multiple_of(2) || !r.n_inputs().is_multiple_of(2) {
        return Err(Error::Dimension("transfer function must have even dimensions".into()));
    }
    let scale = r.scale();
    let order = opts.markov_order.unwrap_or(2 * r.n_states() + 1);
    let markov = markov_params(r, order);
    let (na, nb, nc) = (inf_norm(&r.a), inf_norm(&r.b), inf_norm(&r.c));
    let mut markov_max = [0.0f64; 4];
    for (k, mk) in markov.iter().enumerate() {
        let bound = if k == 0 { scale } else { scale.max(na.powi(k as i32 - 1) * nb * nc) };
        for (i, &blk) in Block::ALL.iter().enumerate() {
            markov_max[i] = markov_max[i].max(inf_norm(&sub_block(mk, blk)) / bound);
        }
    }

    let samples: Vec<Result<(CMatrix, f64)>> = opts
        .grid
        .omegas()
        .into_par_iter()
        .map(|w| eval_with_bound(r, Complex64::new(0.0, w)))
        .collect();
    let mut freq_max = [0.0f64; 4];
    let mut skipped = 0;
    for sample in samples {
        match sample {
            Ok((g, bound)) => {
                let bound = scale.max(bound);
                for (i, &blk) in Block::ALL.iter().enumerate() {
                    freq_max[i] = freq_max[i].max(inf_norm(&sub_block(&g, blk)) / bound);
                }
            }
            Err(Error::Singular { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }

    let cert = |i: usize| BlockCert {
        zero: markov_max[i] <= tol && freq_max[i] <= tol,
        markov_max: markov_max[i],
        freq_max: freq_max[i],
        skipped_frequencies: skipped,
    };
    Ok(BlockPattern {
        qq: cert(0),
        qp: cert(1),
        pq: cert(2),
        pp: cert(3),
        tol,
        markov_order: order,
    })
}

/// Σ[s] = ½𝒞(sI + iJΩ)⁻¹𝒞♭.
pub fn sigma_tf(sys: &QuantumLinearSystem, s: Complex64) -> Result<CMatrix> {
    let cc = sys.coupling_doubled();
    let cflat = flat_adjoint(&cc)?;
    let k = j_flat(sys.n_modes()) * sys.omega_doubled() * I;
    let (x, _) = resolvent_apply(&(-k), &cflat, s)?;
    Ok(cc * x * HALF)
}

/// Reads a real block out of a complex matrix carrying a real realization.
pub fn re(x: &CMatrix) -> DMatrix<f64> {
    x.map(|z| z.re)
}
