//! The `(S, C₋, C₊, Ω₋, Ω₊)` parameter set and its two state-space
//! realizations.
//!
//! The coupling operator is `L = C₋a + C₊a#` and the Hamiltonian is
//! `H = ½ ă†Ωă` with `Ω = Δ(Ω₋, Ω₊)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::matcore::{
    self, block2, complexify, delta, flat_adjoint, imag_part, inf_norm, inf_norm_real, j_flat,
    quadrature_blocks, quadrature_transform, real_part, sharp_adjoint, within, CMatrix, HALF, I,
};

/// Raw parameters, before validation.
#[derive(Debug, Clone)]
pub struct SystemParams {
    pub s: CMatrix,
    pub c_minus: CMatrix,
    pub c_plus: CMatrix,
    pub omega_minus: CMatrix,
    pub omega_plus: CMatrix,
}

/// A validated linear quantum system with `n` modes and `m` field channels.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumLinearSystem {
    n: usize,
    m: usize,
    s: CMatrix,
    c_minus: CMatrix,
    c_plus: CMatrix,
    omega_minus: CMatrix,
    omega_plus: CMatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    AnnihilationCreation,
    Quadrature,
}

/// State-space quadruple `(A, B, C, D)`.
///
/// Quadrature-form matrices are stored as complex matrices with zero
/// imaginary parts so that every routine downstream works on one type.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub form: Form,
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
    pub d: CMatrix,
}

impl Realization {
    pub fn new(form: Form, a: CMatrix, b: CMatrix, c: CMatrix, d: CMatrix) -> Result<Self> {
        let ns = a.nrows();
        let ok = a.is_square()
            && b.nrows() == ns
            && c.ncols() == ns
            && d.nrows() == c.nrows()
            && d.ncols() == b.ncols();
        if !ok {
            return Err(Error::Dimension(format!(
                "realization shapes A{:?} B{:?} C{:?} D{:?} are not conformable",
                a.shape(),
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(Self { form, a, b, c, d })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// max(‖A‖, ‖B‖, ‖C‖, ‖D‖, 1), the scale used by relative zero tests.
    pub fn scale(&self) -> f64 {
        [&self.a, &self.b, &self.c, &self.d]
            .iter()
            .map(|x| inf_norm(x))
            .fold(1.0, f64::max)
    }

    /// Checks the form invariant: real matrices for quadrature form,
    /// doubled-up matrices for annihilation-creation form.
    pub fn check_structure(&self, tol: f64) -> bool {
        let mats = [&self.a, &self.b, &self.c, &self.d];
        match self.form {
            Form::Quadrature => mats.iter().all(|x| matcore::is_real(x, tol)),
            Form::AnnihilationCreation => mats.iter().all(|x| {
                matcore::structure_test(x, matcore::StructureKind::DoubledUp, tol).holds
            }),
        }
    }
}

impl QuantumLinearSystem {
    /// Validates with the default tolerance (1e−9).
    pub fn new(params: SystemParams) -> Result<Self> {
        Self::with_tolerance(params, matcore::DEFAULT_TOL)
    }

    /// Validates every invariant and reports all violations together.
    pub fn with_tolerance(params: SystemParams, tol: f64) -> Result<Self> {
        let violations = validate(&params, tol);
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        let SystemParams { s, c_minus, c_plus, omega_minus, omega_plus } = params;
        Ok(Self {
            n: omega_minus.nrows(),
            m: s.nrows(),
            s,
            c_minus,
            c_plus,
            omega_minus,
            omega_plus,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    pub fn m_channels(&self) -> usize {
        self.m
    }

    pub fn s(&self) -> &CMatrix {
        &self.s
    }

    pub fn c_minus(&self) -> &CMatrix {
        &self.c_minus
    }

    pub fn c_plus(&self) -> &CMatrix {
        &self.c_plus
    }

    pub fn omega_minus(&self) -> &CMatrix {
        &self.omega_minus
    }

    pub fn omega_plus(&self) -> &CMatrix {
        &self.omega_plus
    }

    pub fn params(&self) -> SystemParams {
        SystemParams {
            s: self.s.clone(),
            c_minus: self.c_minus.clone(),
            c_plus: self.c_plus.clone(),
            omega_minus: self.omega_minus.clone(),
            omega_plus: self.omega_plus.clone(),
        }
    }

    /// 𝒞 = Δ(C₋, C₊).
    pub fn coupling_doubled(&self) -> CMatrix {
        delta(&self.c_minus, &self.c_plus).expect("validated shapes")
    }

    /// Ω = Δ(Ω₋, Ω₊).
    pub fn omega_doubled(&self) -> CMatrix {
        delta(&self.omega_minus, &self.omega_plus).expect("validated shapes")
    }

    /// 𝒟 = Δ(S, 0).
    pub fn scattering_doubled(&self) -> CMatrix {
        delta(&self.s, &CMatrix::zeros(self.m, self.m)).expect("validated shapes")
    }

    /// 𝒜 = −iJΩ − ½𝒞♭𝒞, ℬ = −𝒞♭𝒟, 𝒞, 𝒟.
    pub fn ac_realization(&self) -> Realization {
        let cc = self.coupling_doubled();
        let dd = self.scattering_doubled();
        let cflat = flat_adjoint(&cc).expect("even dims");
        let a = -(j_flat(self.n) * self.omega_doubled()) * I - (&cflat * &cc) * HALF;
        let b = -(&cflat * &dd);
        Realization { form: Form::AnnihilationCreation, a, b, c: cc, d: dd }
    }

    /// 𝕁ℍ in quadrature coordinates, from the Re/Im block formula.
    pub fn jh_quadrature(&self) -> CMatrix {
        let sum = &self.omega_minus + &self.omega_plus;
        let dif = &self.omega_minus - &self.omega_plus;
        block2(
            &complexify(&imag_part(&sum)),
            &complexify(&real_part(&dif)),
            &complexify(&(-real_part(&sum))),
            &complexify(&imag_part(&dif)),
        )
        .expect("square blocks")
    }

    /// Real quadrature realization `(𝔸, 𝔹, ℂ, 𝔻)`.
    ///
    /// Computed by conjugating the annihilation-creation realization with
    /// `V_n`, then cross-checked against the explicit Re/Im block formulas.
    /// Any disagreement above 1e−12 (relative) is a consistency error.
    pub fn quad_realization(&self) -> Result<Realization> {
        let (n, m) = (self.n, self.m);
        let ac = self.ac_realization();
        let vn = quadrature_transform(n);
        let vm = quadrature_transform(m);
        let conj = [
            ("A", &vn * &ac.a * vn.adjoint()),
            ("B", &vn * &ac.b * vm.adjoint()),
            ("C", &vm * &ac.c * vn.adjoint()),
            ("D", &vm * &ac.d * vm.adjoint()),
        ];
        let mut real = Vec::with_capacity(4);
        for (name, x) in conj {
            let residue = inf_norm_real(&imag_part(&x));
            if !within(residue, matcore::EQ_TOL, inf_norm(&x).max(1.0)) {
                return Err(Error::Consistency(format!(
                    "quadrature {name} has imaginary residue {residue:.3e}"
                )));
            }
            real.push(complexify(&real_part(&x)));
        }
        let d = real.pop().unwrap();
        let c = real.pop().unwrap();
        let b = real.pop().unwrap();
        let a = real.pop().unwrap();

        let d_formula = complexify(&quadrature_blocks(&self.s, &CMatrix::zeros(m, m))?);
        let c_formula = complexify(&quadrature_blocks(&self.c_minus, &self.c_plus)?);
        let cm_dag = self.c_minus.adjoint();
        let cp_dag = self.c_plus.adjoint();
        let b_left = block2(
            &complexify(&real_part(&(&cm_dag - &cp_dag))),
            &complexify(&(-imag_part(&(&cm_dag - &cp_dag)))),
            &complexify(&imag_part(&(&cm_dag + &cp_dag))),
            &complexify(&real_part(&(&cm_dag + &cp_dag))),
        )?;
        let b_formula = -(b_left * &d_formula);
        let a_formula = self.jh_quadrature() - sharp_adjoint(&c_formula)? * &c_formula * HALF;
        for (name, got, want) in [
            ("D", &d, &d_formula),
            ("C", &c, &c_formula),
            ("B", &b, &b_formula),
            ("A", &a, &a_formula),
        ] {
            let err = matcore::rel_diff(got, want);
            if err > matcore::EQ_TOL {
                return Err(Error::Consistency(format!(
                    "quadrature {name} disagrees with its block formula by {err:.3e}"
                )));
            }
        }
        Ok(Realization { form: Form::Quadrature, a, b, c, d })
    }

    /// Michelson interferometer with mirror mass `mass`, mechanical
    /// frequency `omega_m` and coupling strength `lambda` (two modes, two
    /// channels, S = I).
    pub fn michelson(mass: f64, omega_m: f64, lambda: f64) -> Result<Self> {
        let hi = 0.5 * (mass * omega_m * omega_m + 1.0 / mass);
        let lo = 0.5 * (mass * omega_m * omega_m - 1.0 / mass);
        let g = 0.5 * lambda.sqrt();
        let cm = CMatrix::from_row_slice(2, 2, &[I * g, I * g, I * g, -I * g]);
        Self::new(SystemParams {
            s: CMatrix::identity(2, 2),
            c_minus: cm.clone(),
            c_plus: cm,
            omega_minus: CMatrix::identity(2, 2) * matcore::c(hi, 0.0),
            omega_plus: CMatrix::identity(2, 2) * matcore::c(lo, 0.0),
        })
    }
}

fn validate(p: &SystemParams, tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = p.omega_minus.nrows();
    let m = p.s.nrows();
    let mut shape = |name: &str, x: &CMatrix, r: usize, c: usize| {
        if x.shape() != (r, c) {
            out.push(Violation {
                invariant: format!("{name}_shape"),
                residual: f64::INFINITY,
                detail: format!("{name} is {}x{}, expected {r}x{c}", x.nrows(), x.ncols()),
            });
            false
        } else {
            true
        }
    };
    let shapes_ok = [
        shape("S", &p.s, m, m),
        shape("C_minus", &p.c_minus, m, n),
        shape("C_plus", &p.c_plus, m, n),
        shape("Omega_minus", &p.omega_minus, n, n),
        shape("Omega_plus", &p.omega_plus, n, n),
    ]
    .iter()
    .all(|&ok| ok);
    if n == 0 || m == 0 {
        out.push(Violation {
            invariant: "nonempty".into(),
            residual: f64::INFINITY,
            detail: format!("need at least one mode and one channel (n={n}, m={m})"),
        });
    }
    for (name, x) in [
        ("S", &p.s),
        ("C_minus", &p.c_minus),
        ("C_plus", &p.c_plus),
        ("Omega_minus", &p.omega_minus),
        ("Omega_plus", &p.omega_plus),
    ] {
        if !matcore::all_finite(x) {
            out.push(Violation {
                invariant: format!("{name}_finite"),
                residual: f64::INFINITY,
                detail: format!("{name} contains NaN or infinite entries"),
            });
        }
    }
    if !shapes_ok || !out.is_empty() {
        return out;
    }

    let unit = inf_norm(&(&p.s * p.s.adjoint() - CMatrix::identity(m, m)));
    if unit > tol {
        out.push(Violation {
            invariant: "S_unitary".into(),
            residual: unit,
            detail: "S S† differs from the identity".into(),
        });
    }
    let herm = inf_norm(&(&p.omega_minus - p.omega_minus.adjoint()));
    if !within(herm, tol, inf_norm(&p.omega_minus)) {
        out.push(Violation {
            invariant: "Omega_minus_hermitian".into(),
            residual: herm / inf_norm(&p.omega_minus),
            detail: "Omega_minus is not Hermitian".into(),
        });
    }
    let sym = inf_norm(&(&p.omega_plus - p.omega_plus.transpose()));
    if !within(sym, tol, inf_norm(&p.omega_plus)) {
        out.push(Violation {
            invariant: "Omega_plus_symmetric".into(),
            residual: sym / inf_norm(&p.omega_plus),
            detail: "Omega_plus is not symmetric".into(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{c, identity, zeros};

    fn scalar(z: num_complex::Complex64) -> CMatrix {
        CMatrix::from_element(1, 1, z)
    }

    #[test]
    fn michelson_is_valid() {
        let sys = QuantumLinearSystem::michelson(1.0, 1.0, 1.0).unwrap();
        assert_eq!((sys.n_modes(), sys.m_channels()), (2, 2));
    }

    #[test]
    fn violations_are_named() {
        let bad_s = SystemParams {
            s: CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]),
            c_minus: zeros(2, 1),
            c_plus: zeros(2, 1),
            omega_minus: zeros(1, 1),
            omega_plus: zeros(1, 1),
        };
        match QuantumLinearSystem::new(bad_s) {
            Err(Error::Validation(v)) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].invariant, "S_unitary");
            }
            other => panic!("expected validation error, got {other:?}"),
        }

        let antisym = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        let bad_omega = SystemParams {
            s: identity(1),
            c_minus: zeros(1, 2),
            c_plus: zeros(1, 2),
            omega_minus: zeros(2, 2),
            omega_plus: antisym,
        };
        match QuantumLinearSystem::new(bad_omega) {
            Err(Error::Validation(v)) => {
                assert!(v.iter().any(|x| x.invariant == "Omega_plus_symmetric"));
                assert!(!v.iter().any(|x| x.invariant == "Omega_minus_hermitian"));
            }
            other => panic!("expected validation error, got {other:?}"),
        }

        let mismatched = SystemParams {
            s: identity(1),
            c_minus: zeros(1, 3),
            c_plus: zeros(1, 2),
            omega_minus: zeros(2, 2),
            omega_plus: zeros(2, 2),
        };
        match QuantumLinearSystem::new(mismatched) {
            Err(Error::Validation(v)) => assert_eq!(v[0].invariant, "C_minus_shape"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn decoupled_oscillator() {
        let w = 1.7;
        let sys = QuantumLinearSystem::new(SystemParams {
            s: identity(1),
            c_minus: zeros(1, 1),
            c_plus: zeros(1, 1),
            omega_minus: scalar(c(w, 0.0)),
            omega_plus: zeros(1, 1),
        })
        .unwrap();
        let r = sys.ac_realization();
        let expected_a = CMatrix::from_row_slice(2, 2, &[c(0.0, -w), c(0.0, 0.0), c(0.0, 0.0), c(0.0, w)]);
        assert_eq!(r.a, expected_a);
        assert_eq!(r.b, zeros(2, 2));
        assert_eq!(r.c, zeros(2, 2));
        assert_eq!(r.d, identity(2));
    }

    #[test]
    fn passive_siso_ac_realization() {
        let sys = QuantumLinearSystem::new(SystemParams {
            s: identity(1),
            c_minus: scalar(c(1.0, 0.0)),
            c_plus: zeros(1, 1),
            omega_minus: zeros(1, 1),
            omega_plus: zeros(1, 1),
        })
        .unwrap();
        let r = sys.ac_realization();
        // 𝒞♭𝒞 = I for 𝒞 = I, so 𝒜 = −½I, ℬ = −I.
        assert_eq!(r.a, identity(2) * c(-0.5, 0.0));
        assert_eq!(r.b, -identity(2));
        assert_eq!(r.c, identity(2));
        assert_eq!(r.d, identity(2));
    }

    #[test]
    fn zero_system_quadrature() {
        let sys = QuantumLinearSystem::new(SystemParams {
            s: identity(2),
            c_minus: zeros(2, 3),
            c_plus: zeros(2, 3),
            omega_minus: zeros(3, 3),
            omega_plus: zeros(3, 3),
        })
        .unwrap();
        let q = sys.quad_realization().unwrap();
        assert_eq!(q.a, zeros(6, 6));
        assert_eq!(q.b, zeros(6, 4));
        assert_eq!(q.c, zeros(4, 6));
        assert!(matcore::rel_diff(&q.d, &identity(4)) < 1e-15);
        assert!(q.check_structure(1e-12));
    }
}
