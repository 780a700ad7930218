//! Sufficient conditions for back-action-evading measurement and their
//! reconciliation with certified transfer-function structure.
//!
//! The conditions form a table: each entry is a conjunction of structural
//! hypotheses on `(S, 𝒞, Ω)` together with the transfer blocks it predicts
//! to vanish.

use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{self, inf_norm, is_imaginary, is_real, CMatrix, HALF, I};
use crate::qsys::QuantumLinearSystem;
use crate::xferfn::{self, Block, BlockPattern};

/// Structural hypotheses appearing in the condition table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    OmegaImaginary,
    CouplingReal,
    CouplingImaginary,
    ScatteringReal,
    ScatteringImaginary,
    /// Re(Ω₋) = Re(Ω₊).
    OmegaSameRealPart,
    /// Re(Ω₋) = −Re(Ω₊).
    OmegaOppositeRealPart,
    /// C₋ = C₊.
    CouplingEqual,
    /// C₋ = −C₊.
    CouplingNegated,
}

impl Hypothesis {
    pub fn holds(self, sys: &QuantumLinearSystem, tol: f64) -> bool {
        let cc = sys.coupling_doubled();
        match self {
            Hypothesis::OmegaImaginary => is_imaginary(&sys.omega_doubled(), tol),
            Hypothesis::CouplingReal => is_real(&cc, tol),
            Hypothesis::CouplingImaginary => is_imaginary(&cc, tol),
            Hypothesis::ScatteringReal => is_real(sys.s(), tol),
            Hypothesis::ScatteringImaginary => is_imaginary(sys.s(), tol),
            Hypothesis::OmegaSameRealPart => {
                real_close(sys.omega_minus(), sys.omega_plus(), 1.0, tol)
            }
            Hypothesis::OmegaOppositeRealPart => {
                real_close(sys.omega_minus(), sys.omega_plus(), -1.0, tol)
            }
            Hypothesis::CouplingEqual => close(sys.c_minus(), sys.c_plus(), 1.0, tol),
            Hypothesis::CouplingNegated => close(sys.c_minus(), sys.c_plus(), -1.0, tol),
        }
    }
}

fn scale_of(a: &CMatrix, b: &CMatrix) -> f64 {
    inf_norm(a).max(inf_norm(b))
}

fn close(a: &CMatrix, b: &CMatrix, sign: f64, tol: f64) -> bool {
    let d = a - b * Complex64::new(sign, 0.0);
    matcore::within(inf_norm(&d), tol, scale_of(a, b))
}

fn real_close(a: &CMatrix, b: &CMatrix, sign: f64, tol: f64) -> bool {
    let d = (a - b * Complex64::new(sign, 0.0)).map(|z| Complex64::new(z.re, 0.0));
    matcore::within(inf_norm(&d), tol, scale_of(a, b))
}

/// One entry of the condition table.
#[derive(Debug, Clone, Copy)]
pub struct Condition {
    pub id: &'static str,
    pub hypotheses: &'static [Hypothesis],
    pub predicted: &'static [Block],
}

use Hypothesis::*;

pub const CATALOG: &[Condition] = &[
    Condition {
        id: "bilateral_diag",
        hypotheses: &[OmegaImaginary, ScatteringReal, CouplingReal],
        predicted: &[Block::Qp, Block::Pq],
    },
    Condition {
        id: "bilateral_diag_imaginary_coupling",
        hypotheses: &[OmegaImaginary, ScatteringReal, CouplingImaginary],
        predicted: &[Block::Qp, Block::Pq],
    },
    Condition {
        id: "bilateral_offdiag",
        hypotheses: &[OmegaImaginary, ScatteringImaginary, CouplingReal],
        predicted: &[Block::Qq, Block::Pp],
    },
    Condition {
        id: "bilateral_offdiag_imaginary_coupling",
        hypotheses: &[OmegaImaginary, ScatteringImaginary, CouplingImaginary],
        predicted: &[Block::Qq, Block::Pp],
    },
    Condition {
        id: "same_re_real_s_real_c",
        hypotheses: &[OmegaSameRealPart, ScatteringReal, CouplingReal],
        predicted: &[Block::Qp],
    },
    Condition {
        id: "same_re_real_s_imaginary_c",
        hypotheses: &[OmegaSameRealPart, ScatteringReal, CouplingImaginary],
        predicted: &[Block::Pq],
    },
    Condition {
        id: "same_re_imaginary_s_real_c",
        hypotheses: &[OmegaSameRealPart, ScatteringImaginary, CouplingReal],
        predicted: &[Block::Qq],
    },
    Condition {
        id: "same_re_imaginary_s_imaginary_c",
        hypotheses: &[OmegaSameRealPart, ScatteringImaginary, CouplingImaginary],
        predicted: &[Block::Pp],
    },
    Condition {
        id: "opposite_re_real_s_real_c",
        hypotheses: &[OmegaOppositeRealPart, ScatteringReal, CouplingReal],
        predicted: &[Block::Pq],
    },
    Condition {
        id: "opposite_re_real_s_imaginary_c",
        hypotheses: &[OmegaOppositeRealPart, ScatteringReal, CouplingImaginary],
        predicted: &[Block::Qp],
    },
    Condition {
        id: "opposite_re_imaginary_s_real_c",
        hypotheses: &[OmegaOppositeRealPart, ScatteringImaginary, CouplingReal],
        predicted: &[Block::Pp],
    },
    Condition {
        id: "opposite_re_imaginary_s_imaginary_c",
        hypotheses: &[OmegaOppositeRealPart, ScatteringImaginary, CouplingImaginary],
        predicted: &[Block::Qq],
    },
    Condition {
        id: "q_coupling_imaginary",
        hypotheses: &[ScatteringReal, CouplingImaginary, CouplingEqual],
        predicted: &[Block::Qp],
    },
    Condition {
        id: "p_coupling_imaginary",
        hypotheses: &[ScatteringReal, CouplingImaginary, CouplingNegated],
        predicted: &[Block::Pq],
    },
];

pub fn condition(id: &str) -> Option<&'static Condition> {
    CATALOG.iter().find(|c| c.id == id)
}

/// A catalog entry whose hypotheses all hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedCondition {
    pub condition_id: String,
    pub hypotheses_checked: Vec<Hypothesis>,
    pub predicted_pairs: Vec<Block>,
}

/// Every catalog entry whose hypotheses hold within `tol`.
pub fn diagnose_conditions(sys: &QuantumLinearSystem, tol: f64) -> Vec<MatchedCondition> {
    CATALOG
        .iter()
        .filter(|c| c.hypotheses.iter().all(|h| h.holds(sys, tol)))
        .map(|c| MatchedCondition {
            condition_id: c.id.to_string(),
            hypotheses_checked: c.hypotheses.to_vec(),
            predicted_pairs: c.predicted.to_vec(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaeReport {
    /// Blocks of the quadrature transfer function certified identically
    /// zero; `qp` means q_out is free of p_in.
    pub certified_pairs: BTreeSet<Block>,
    pub matched_conditions: Vec<MatchedCondition>,
    /// Every prediction of every matched condition is certified.
    pub consistency: bool,
    pub pattern: BlockPattern,
    pub tol: f64,
}

impl BaeReport {
    pub fn inconsistent(&self) -> Vec<(String, Block)> {
        self.matched_conditions
            .iter()
            .flat_map(|c| c.predicted_pairs.iter().map(move |&b| (c.condition_id.clone(), b)))
            .filter(|(_, b)| !self.certified_pairs.contains(b))
            .collect()
    }
}

/// Certifies zero blocks and checks every matched condition against them.
pub fn certify_bae(sys: &QuantumLinearSystem, tol: f64) -> Result<BaeReport> {
    let pattern = xferfn::block_pattern(&sys.quad_realization()?, tol)?;
    let certified_pairs: BTreeSet<Block> = pattern.zero_blocks().into_iter().collect();
    let matched_conditions = diagnose_conditions(sys, tol);
    let consistency = matched_conditions
        .iter()
        .all(|c| c.predicted_pairs.iter().all(|b| certified_pairs.contains(b)));
    Ok(BaeReport { certified_pairs, matched_conditions, consistency, pattern, tol })
}

/// Diagonal blocks `(𝔾_q[s], 𝔾_p[s])` in closed form when Ω is purely
/// imaginary and `S`, `𝒞` are real:
///
/// 𝔾_q = (I − ℂ_q[sI + i(Ω₋+Ω₊) + ½ℂ_pᵀℂ_q]⁻¹ℂ_pᵀ)·S,
/// 𝔾_p = (I − ℂ_p[sI + i(Ω₋−Ω₊) + ½ℂ_qᵀℂ_p]⁻¹ℂ_qᵀ)·S,
///
/// with ℂ_q = C₋ + C₊ and ℂ_p = C₋ − C₊. For `S = I` this is the familiar
/// `S − ℂ_q[…]⁻¹ℂ_pᵀ`; the right factor is where the input passes through
/// the scattering matrix before reaching the oscillators.
pub fn closed_form_diag_tf(
    sys: &QuantumLinearSystem,
    s: Complex64,
    tol: f64,
) -> Result<(CMatrix, CMatrix)> {
    for h in [OmegaImaginary, ScatteringReal, CouplingReal] {
        if !h.holds(sys, tol) {
            return Err(Error::Precondition(format!("closed form requires {h:?}")));
        }
    }
    let re = |x: &CMatrix| x.map(|z| Complex64::new(z.re, 0.0));
    let cq = re(&(sys.c_minus() + sys.c_plus()));
    let cp = re(&(sys.c_minus() - sys.c_plus()));
    let sum = sys.omega_minus() + sys.omega_plus();
    let dif = sys.omega_minus() - sys.omega_plus();
    let sr = re(sys.s());
    let m = sys.m_channels();
    let n = sys.n_modes();
    let branch = |om: &CMatrix, left: &CMatrix, right: &CMatrix| -> Result<CMatrix> {
        let k = CMatrix::identity(n, n) * s + re(&(om * I)) + right.transpose() * left * HALF;
        let x = k
            .lu()
            .solve(&right.transpose())
            .ok_or_else(|| Error::Singular { s: format!("{s}"), condition: f64::INFINITY })?;
        Ok((CMatrix::identity(m, m) - left * x) * &sr)
    };
    Ok((branch(&sum, &cq, &cp)?, branch(&dif, &cp, &cq)?))
}
