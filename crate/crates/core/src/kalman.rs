//! BAE criteria for the controllable-and-observable subsystem of a system
//! already in Kalman canonical form. The decomposition itself is an input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{complexify, imag_part, inf_norm_real, real_part, sharp_adjoint_real, CMatrix, RMatrix};
use crate::qsys::{Form, Realization};

/// Real quadrature-form `(A_co, B_co, C_co)` with `m` output channels.
/// `C_co` stacks `[C_co,q; C_co,p]`, `B_co` is `[B_co,q | B_co,p]`.
#[derive(Debug, Clone)]
pub struct KalmanCoSubsystem {
    a: RMatrix,
    b: RMatrix,
    c: RMatrix,
    m: usize,
    gamma: Option<(CMatrix, CMatrix)>,
    gamma_h_nonzero: Option<bool>,
}

impl KalmanCoSubsystem {
    pub fn new(a: RMatrix, b: RMatrix, c: RMatrix) -> Result<Self> {
        let ns = a.nrows();
        let ok = a.is_square()
            && ns.is_multiple_of(2)
            && b.nrows() == ns
            && c.ncols() == ns
            && c.nrows() == b.ncols()
            && c.nrows().is_multiple_of(2);
        if !ok {
            return Err(Error::Dimension(format!(
                "Kalman blocks A{:?} B{:?} C{:?} need A 2r×2r, B 2r×2m, C 2m×2r",
                a.shape(),
                b.shape(),
                c.shape()
            )));
        }
        let m = c.nrows() / 2;
        Ok(Self { a, b, c, m, gamma: None, gamma_h_nonzero: None })
    }

    /// Builds `C_co = √2·[[Re Γ_q, Re Γ_p], [Im Γ_q, Im Γ_p]]` and
    /// `B_co = −C_co♯`. When `a` is omitted, `A_co = ½ B_co C_co`, which
    /// satisfies `C A = ½ C B C` by construction.
    pub fn from_gamma(gamma_q: CMatrix, gamma_p: CMatrix, a: Option<RMatrix>) -> Result<Self> {
        if gamma_q.shape() != gamma_p.shape() {
            return Err(Error::Dimension(format!(
                "Γ_q {:?} and Γ_p {:?} must have the same shape",
                gamma_q.shape(),
                gamma_p.shape()
            )));
        }
        let (m, r) = gamma_q.shape();
        let s2 = std::f64::consts::SQRT_2;
        let mut c = RMatrix::zeros(2 * m, 2 * r);
        c.view_mut((0, 0), (m, r)).copy_from(&(real_part(&gamma_q) * s2));
        c.view_mut((0, r), (m, r)).copy_from(&(real_part(&gamma_p) * s2));
        c.view_mut((m, 0), (m, r)).copy_from(&(imag_part(&gamma_q) * s2));
        c.view_mut((m, r), (m, r)).copy_from(&(imag_part(&gamma_p) * s2));
        let b = -sharp_adjoint_real(&c)?;
        let a = a.unwrap_or_else(|| &b * &c * 0.5);
        let mut k = Self::new(a, b, c)?;
        k.gamma = Some((gamma_q, gamma_p));
        Ok(k)
    }

    /// Records whether the user's `Γ_h` block is nonzero. Passed through to
    /// the report; nothing here derives it.
    pub fn with_gamma_h_nonzero(mut self, flag: bool) -> Self {
        self.gamma_h_nonzero = Some(flag);
        self
    }

    pub fn a(&self) -> &RMatrix {
        &self.a
    }

    pub fn b(&self) -> &RMatrix {
        &self.b
    }

    pub fn c(&self) -> &RMatrix {
        &self.c
    }

    pub fn gamma(&self) -> Option<&(CMatrix, CMatrix)> {
        self.gamma.as_ref()
    }

    pub fn m_channels(&self) -> usize {
        self.m
    }

    pub fn c_q(&self) -> RMatrix {
        self.c.rows(0, self.m).into_owned()
    }

    pub fn c_p(&self) -> RMatrix {
        self.c.rows(self.m, self.m).into_owned()
    }

    pub fn b_q(&self) -> RMatrix {
        self.b.columns(0, self.m).into_owned()
    }

    pub fn b_p(&self) -> RMatrix {
        self.b.columns(self.m, self.m).into_owned()
    }

    pub fn scale(&self) -> f64 {
        [&self.a, &self.b, &self.c].iter().map(|x| inf_norm_real(x)).fold(1.0, f64::max)
    }

    /// Quadrature realization `(A_co, B_co, C_co, I)`.
    pub fn realization(&self) -> Realization {
        Realization::new(
            Form::Quadrature,
            complexify(&self.a),
            complexify(&self.b),
            complexify(&self.c),
            CMatrix::identity(2 * self.m, 2 * self.m),
        )
        .expect("shapes checked on construction")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KalmanBaeReport {
    /// `q_out` evades `p_in`: `C_co,q B_co,p = 0`.
    pub q_wrt_p: bool,
    /// `p_out` evades `q_in`: `C_co,p B_co,q = 0`.
    pub p_wrt_q: bool,
    pub q_residual: f64,
    pub p_residual: f64,
    /// Asymmetry of `Re Γ_q Re Γ_pᵀ` and `Im Γ_q Im Γ_pᵀ`, when Γ is known.
    pub gamma_residuals: Option<(f64, f64)>,
    /// Whether `Re(Γ_q Γ_pᵀ)` is symmetric; reported only when both
    /// evasions hold and Γ is known.
    pub re_gamma_product_symmetric: Option<bool>,
    pub qnd_variables_exist: Option<bool>,
    pub scale: f64,
    pub tol: f64,
}

fn asymmetry(x: &RMatrix) -> f64 {
    inf_norm_real(&(x - x.transpose()))
}

pub fn check_kalman_bae(k: &KalmanCoSubsystem, tol: f64) -> KalmanBaeReport {
    let scale = k.scale().powi(2);
    let q_residual = inf_norm_real(&(k.c_q() * k.b_p()));
    let p_residual = inf_norm_real(&(k.c_p() * k.b_q()));
    let q_wrt_p = q_residual <= tol * scale;
    let p_wrt_q = p_residual <= tol * scale;
    let gamma_residuals = k.gamma.as_ref().map(|(gq, gp)| {
        let re = real_part(gq) * real_part(gp).transpose();
        let im = imag_part(gq) * imag_part(gp).transpose();
        (asymmetry(&re), asymmetry(&im))
    });
    let re_gamma_product_symmetric = match (&k.gamma, q_wrt_p && p_wrt_q) {
        (Some((gq, gp)), true) => Some(asymmetry(&real_part(&(gq * gp.transpose()))) <= tol * scale),
        _ => None,
    };
    KalmanBaeReport {
        q_wrt_p,
        p_wrt_q,
        q_residual,
        p_residual,
        gamma_residuals,
        re_gamma_product_symmetric,
        qnd_variables_exist: k.gamma_h_nonzero,
        scale,
        tol,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkovIdentityCheck {
    /// `‖C A − ½ C B C‖`.
    pub premise_residual: f64,
    pub premise_holds: bool,
    /// `max_{1≤k≤K} ‖C A^k B − 2^{−k} (C B)^{k+1}‖`.
    pub residual: f64,
    pub order: usize,
    pub scale: f64,
    pub tol: f64,
}

impl MarkovIdentityCheck {
    pub fn passes(&self) -> bool {
        self.premise_holds && self.residual <= self.tol * self.scale
    }
}

pub fn markov_identity_check(k: &KalmanCoSubsystem, order: usize, tol: f64) -> MarkovIdentityCheck {
    let (a, b, c) = (&k.a, &k.b, &k.c);
    let cb = c * b;
    let premise_residual = inf_norm_real(&(c * a - &cb * c * 0.5));
    let s = k.scale();
    let mut residual: f64 = 0.0;
    let mut scale: f64 = s.powi(3);
    let mut ak_b = b.clone();
    let mut cb_pow = cb.clone();
    for j in 1..=order {
        ak_b = a * ak_b;
        cb_pow = &cb_pow * &cb;
        let lhs = c * &ak_b;
        let rhs = &cb_pow * 0.5f64.powi(j as i32);
        residual = residual.max(inf_norm_real(&(lhs - &rhs)));
        scale = scale.max(inf_norm_real(&rhs)).max(s.powi(j as i32 + 2));
    }
    MarkovIdentityCheck {
        premise_residual,
        premise_holds: premise_residual <= tol * s.powi(3),
        residual,
        order,
        scale,
        tol,
    }
}

/// `‖C_h A_h²² + C_co 𝕁 A₁₂ᵀ + ½ C_co B_co 𝕁_m B_hᵀ‖`, the companion
/// condition to `C A = ½ C B C` for the remaining Kalman blocks.
pub fn first_condition_residual(
    c_h: &RMatrix,
    a_h22: &RMatrix,
    k: &KalmanCoSubsystem,
    a12: &RMatrix,
    b_h: &RMatrix,
) -> Result<f64> {
    let r = k.a.nrows() / 2;
    let jr = crate::matcore::j_sharp_real(r);
    let jm = crate::matcore::j_sharp_real(k.m);
    let conform = c_h.ncols() == a_h22.nrows()
        && a_h22.is_square()
        && a12.ncols() == 2 * r
        && b_h.ncols() == 2 * k.m
        && c_h.nrows() == 2 * k.m
        && a12.nrows() == a_h22.ncols()
        && b_h.nrows() == a_h22.ncols();
    if !conform {
        return Err(Error::Dimension(format!(
            "C_h{:?} A_h22{:?} A12{:?} B_h{:?} do not conform with the co-subsystem",
            c_h.shape(),
            a_h22.shape(),
            a12.shape(),
            b_h.shape()
        )));
    }
    let x = c_h * a_h22 + &k.c * jr * a12.transpose() + &k.c * &k.b * jm * b_h.transpose() * 0.5;
    Ok(inf_norm_real(&x))
}
