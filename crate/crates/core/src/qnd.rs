//! QND interaction analysis: the commutator `[L, H]`, SISO closed forms,
//! the four special cases with `[L, H] = 0`, and identification of QND
//! variables through observability.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{self, delta, flat_adjoint, inf_norm, is_imaginary, is_real, within, CMatrix, HALF, I};
use crate::qsys::QuantumLinearSystem;
use crate::xferfn::{self, sub_block, Block};

/// `[L, H] = coeff_a·a + coeff_adag·a#`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutatorCoefficients {
    pub coeff_a: CMatrix,
    pub coeff_adag: CMatrix,
}

impl CommutatorCoefficients {
    pub fn residual(&self) -> f64 {
        inf_norm(&self.coeff_a).max(inf_norm(&self.coeff_adag))
    }

    fn plus(&self, o: &Self, sign: f64) -> Self {
        let k = Complex64::new(sign, 0.0);
        Self { coeff_a: &self.coeff_a + &o.coeff_a * k, coeff_adag: &self.coeff_adag + &o.coeff_adag * k }
    }
}

/// Coefficients of `[L, H]` for `L = C₋a + C₊a#`.
pub fn commutator_coeffs(sys: &QuantumLinearSystem) -> CommutatorCoefficients {
    coeffs_for(sys.c_minus(), sys.c_plus(), sys)
}

/// Coefficients of `[L#, H]`, i.e. of the coupling `C₊^# a + C₋^# a#`.
pub fn adjoint_commutator_coeffs(sys: &QuantumLinearSystem) -> CommutatorCoefficients {
    coeffs_for(&sys.c_plus().conjugate(), &sys.c_minus().conjugate(), sys)
}

fn coeffs_for(cm: &CMatrix, cp: &CMatrix, sys: &QuantumLinearSystem) -> CommutatorCoefficients {
    let (om, op) = (sys.omega_minus(), sys.omega_plus());
    CommutatorCoefficients {
        coeff_a: cm * om - cp * op.adjoint(),
        coeff_adag: cm * op - cp * om.transpose(),
    }
}

/// Scale for commutator residuals, ‖𝒞‖·‖Ω‖ (at least 1).
pub fn commutator_scale(sys: &QuantumLinearSystem) -> f64 {
    (inf_norm(&sys.coupling_doubled()) * inf_norm(&sys.omega_doubled())).max(1.0)
}

/// Residual of `𝒞Ω = 2Δ(C₋, 0)Ω`.
pub fn comega_residual(sys: &QuantumLinearSystem) -> f64 {
    let n = sys.n_modes();
    let m = sys.m_channels();
    let om = sys.omega_doubled();
    let lhs = sys.coupling_doubled() * &om;
    let rhs = delta(sys.c_minus(), &CMatrix::zeros(m, n)).expect("same shapes") * &om * Complex64::new(2.0, 0.0);
    inf_norm(&(lhs - rhs))
}

/// Both forms of the `[L, H] = 0` test, with their residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QndInteraction {
    pub holds: bool,
    pub commutator_residual: f64,
    pub comega_residual: f64,
    pub scale: f64,
    pub tol: f64,
}

/// Decides `[L, H] = 0` from the commutator coefficients and from
/// `𝒞Ω = 2Δ(C₋, 0)Ω`; the two must agree.
pub fn qnd_interaction(sys: &QuantumLinearSystem, tol: f64) -> Result<QndInteraction> {
    let scale = commutator_scale(sys);
    let r1 = commutator_coeffs(sys).residual();
    let r2 = comega_residual(sys);
    let a = within(r1, tol, scale);
    let b = within(r2, tol, scale);
    if a != b {
        return Err(Error::Consistency(format!(
            "[L,H] coefficient residual {r1:.3e} and C Omega residual {r2:.3e} disagree at tol {tol:.1e}"
        )));
    }
    Ok(QndInteraction { holds: a, commutator_residual: r1, comega_residual: r2, scale, tol })
}

pub fn is_qnd_interaction(sys: &QuantumLinearSystem, tol: f64) -> Result<bool> {
    Ok(qnd_interaction(sys, tol)?.holds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouplingProperties {
    /// L = L#, i.e. C₋ = C₊^#.
    pub self_adjoint: bool,
    /// [L_j, L_k] = 0 for all j, k, i.e. C₋C₊ᵀ symmetric.
    pub mutually_commuting: bool,
}

pub fn coupling_properties(sys: &QuantumLinearSystem, tol: f64) -> CouplingProperties {
    let (cm, cp) = (sys.c_minus(), sys.c_plus());
    let scale = inf_norm(cm).max(inf_norm(cp));
    let x = cm * cp.transpose();
    CouplingProperties {
        self_adjoint: within(inf_norm(&(cm - cp.conjugate())), tol, scale),
        mutually_commuting: within(inf_norm(&(&x - x.transpose())), tol, scale * scale),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    Q,
    P,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SisoAnalysis {
    /// g = Σ_j |C₋ⱼ|² − |C₊ⱼ|².
    pub g: f64,
    /// Quadrature whose diagonal transfer entry takes the closed form, if
    /// `[L + L*, H] = 0` (q) or `[L − L*, H] = 0` (p).
    pub which_quadrature: Option<Quadrature>,
    pub plus_residual: f64,
    pub minus_residual: f64,
    /// Re(S); the diagonal entry is Re(S)·(s − g/2)/(s + g/2).
    pub s_re: f64,
}

impl SisoAnalysis {
    /// The closed-form diagonal entry of the branch found.
    pub fn tf_at(&self, s: Complex64) -> Option<Complex64> {
        self.which_quadrature?;
        Some(self.s_re * (s - self.g / 2.0) / (s + self.g / 2.0))
    }
}

/// Single-channel analysis.
pub fn siso_analysis(sys: &QuantumLinearSystem, tol: f64) -> Result<SisoAnalysis> {
    if sys.m_channels() != 1 {
        return Err(Error::Precondition(format!(
            "SISO analysis needs one channel, system has {}",
            sys.m_channels()
        )));
    }
    let g = sys.c_minus().iter().map(|z| z.norm_sqr()).sum::<f64>()
        - sys.c_plus().iter().map(|z| z.norm_sqr()).sum::<f64>();
    let l = commutator_coeffs(sys);
    let ls = adjoint_commutator_coeffs(sys);
    let plus = l.plus(&ls, 1.0).residual();
    let minus = l.plus(&ls, -1.0).residual();
    let scale = commutator_scale(sys);
    let which = if within(plus, tol, scale) {
        Some(Quadrature::Q)
    } else if within(minus, tol, scale) {
        Some(Quadrature::P)
    } else {
        None
    };
    Ok(SisoAnalysis { g, which_quadrature: which, plus_residual: plus, minus_residual: minus, s_re: sys.s()[(0, 0)].re })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialCase {
    CplusZero,
    CminusZero,
    OmegaplusZero,
    OmegaminusZero,
}

impl SpecialCase {
    pub const ALL: [SpecialCase; 4] =
        [SpecialCase::CplusZero, SpecialCase::CminusZero, SpecialCase::OmegaplusZero, SpecialCase::OmegaminusZero];
}

/// Closed-form annihilation-creation transfer function for the four
/// special cases of `[L, H] = 0`.
///
/// In all four cases `𝒞JΩ = 0`, so the transfer function is
/// `(sI − ½M)(sI + ½M)⁻¹` in the `a` block and its conjugate in the `a#`
/// block, with `M = C₋C₋† − C₊C₊†`, times `Δ(S, 0)` on the right. Cases 3
/// and 4 need `C₋C₊ᵀ` symmetric for the off-diagonal blocks to vanish.
pub fn special_case_tf(sys: &QuantumLinearSystem, case: SpecialCase, s: Complex64, tol: f64) -> Result<CMatrix> {
    let (cm, cp) = (sys.c_minus(), sys.c_plus());
    let zero = |x: &CMatrix, scale: f64| within(inf_norm(x), tol, scale.max(1.0));
    let cscale = inf_norm(cm).max(inf_norm(cp));
    let oscale = inf_norm(sys.omega_minus()).max(inf_norm(sys.omega_plus()));
    let (name, ok) = match case {
        SpecialCase::CplusZero => ("C_plus = 0", zero(cp, cscale)),
        SpecialCase::CminusZero => ("C_minus = 0", zero(cm, cscale)),
        SpecialCase::OmegaplusZero => ("Omega_plus = 0", zero(sys.omega_plus(), oscale)),
        SpecialCase::OmegaminusZero => ("Omega_minus = 0", zero(sys.omega_minus(), oscale)),
    };
    if !ok {
        return Err(Error::Precondition(format!("special case requires {name}")));
    }
    if !is_qnd_interaction(sys, tol)? {
        return Err(Error::Precondition("special case requires [L, H] = 0".into()));
    }
    if matches!(case, SpecialCase::OmegaplusZero | SpecialCase::OmegaminusZero)
        && !coupling_properties(sys, tol).mutually_commuting
    {
        return Err(Error::Precondition("special case requires C_minus C_plus^T symmetric".into()));
    }
    let m = sys.m_channels();
    let big_m = cm * cm.adjoint() - cp * cp.adjoint();
    let e = CMatrix::identity(m, m);
    let branch = |x: &CMatrix| -> Result<CMatrix> {
        let num = &e * s - x * HALF;
        let den = &e * s + x * HALF;
        let inv = den
            .try_inverse()
            .ok_or_else(|| Error::Singular { s: format!("{s}"), condition: f64::INFINITY })?;
        Ok(num * inv)
    };
    let g_a = branch(&big_m)?;
    let g_adag = branch(&big_m.conjugate())?;
    Ok(matcore::block_diag(&g_a, &g_adag) * sys.scattering_doubled())
}

/// Residual ‖𝒞JΩ‖.
pub fn cjomega_residual(sys: &QuantumLinearSystem) -> f64 {
    inf_norm(&(sys.coupling_doubled() * matcore::j_flat(sys.n_modes()) * sys.omega_doubled()))
}

/// 2s·Σ[s] − 𝒞𝒞♭, zero when 𝒞JΩ = 0.
pub fn sigma_pole_residual(sys: &QuantumLinearSystem, s: Complex64) -> Result<f64> {
    let cc = sys.coupling_doubled();
    let want = &cc * flat_adjoint(&cc)?;
    let got = xferfn::sigma_tf(sys, s)? * (s * 2.0);
    Ok(inf_norm(&(got - want)))
}

/// Numerical rank of the observability matrix `[C; CA; …; CA^{n−1}]`,
/// with singular values below `tol·σ_max` treated as zero.
pub fn observability_rank(a: &CMatrix, c: &CMatrix, tol: f64) -> usize {
    let n = a.nrows();
    let p = c.nrows();
    let mut obs = CMatrix::zeros(p * n, n);
    let mut row = c.clone();
    for k in 0..n {
        obs.view_mut((k * p, 0), (p, n)).copy_from(&row);
        row *= a;
    }
    let sv = obs.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&v| v > tol * max).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityWitness {
    pub pair: String,
    pub rank: usize,
    pub required: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureVerdict {
    pub is_qnd: bool,
    /// The quadrature neither feeds back from its conjugate nor is driven by
    /// the inputs.
    pub structural: bool,
    pub structural_residual: f64,
    pub witnesses: Vec<ObservabilityWitness>,
}

impl QuadratureVerdict {
    fn none() -> Self {
        Self { is_qnd: false, structural: false, structural_residual: f64::NAN, witnesses: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QndCase {
    /// Λ_q = 0 (C₋ = −C₊) with Ω₋ = −Ω₊: p candidate.
    LambdaQZero,
    /// Λ_p = 0 (C₋ = C₊) with Ω₋ = Ω₊: q candidate.
    LambdaPZero,
    /// Ω purely imaginary, 𝒞 real or imaginary, C₋ = C₊: q candidate.
    ImaginaryOmegaQCoupling,
    /// Ω purely imaginary, 𝒞 real or imaginary, C₋ = −C₊: p candidate.
    ImaginaryOmegaPCoupling,
    /// C₊ = 0, C₋ real, Ω₋ = Ω₊: back-action evasion without QND variables.
    RealPassiveCoupling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QndVariableReport {
    pub q: QuadratureVerdict,
    pub p: QuadratureVerdict,
    pub cases_matched: Vec<QndCase>,
    pub tol: f64,
}

impl QndVariableReport {
    pub fn q_is_qnd(&self) -> bool {
        self.q.is_qnd
    }

    pub fn p_is_qnd(&self) -> bool {
        self.p.is_qnd
    }
}

fn rel_close(a: &CMatrix, b: &CMatrix, sign: f64, tol: f64) -> bool {
    let d = a - b * Complex64::new(sign, 0.0);
    within(inf_norm(&d), tol, inf_norm(a).max(inf_norm(b)))
}

/// Structural residual for quadrature `x`: the off-diagonal block of 𝔸
/// feeding `x` and the rows of 𝔹 driving `x`.
fn structural_residual(sys: &QuantumLinearSystem, x: Quadrature) -> Result<(f64, f64)> {
    let r = sys.quad_realization()?;
    let (a_off, b_rows) = match x {
        Quadrature::Q => (sub_block(&r.a, Block::Qp), r.b.rows(0, sys.n_modes()).into_owned()),
        Quadrature::P => (sub_block(&r.a, Block::Pq), r.b.rows(sys.n_modes(), sys.n_modes()).into_owned()),
    };
    Ok((inf_norm(&a_off).max(inf_norm(&b_rows)), r.scale()))
}

/// Finds the structural QND cases that apply and runs their observability
/// tests. A quadrature is reported QND when it is structurally decoupled
/// and at least one of the case's observable pairs has full rank.
pub fn qnd_variable_report(sys: &QuantumLinearSystem, tol: f64) -> Result<QndVariableReport> {
    let (cm, cp) = (sys.c_minus(), sys.c_plus());
    let (om, op) = (sys.omega_minus(), sys.omega_plus());
    let n = sys.n_modes();
    let cscale = inf_norm(cm).max(inf_norm(cp));
    if cscale == 0.0 {
        return Ok(QndVariableReport { q: QuadratureVerdict::none(), p: QuadratureVerdict::none(), cases_matched: vec![], tol });
    }
    let re = |x: &CMatrix| x.map(|z| Complex64::new(z.re, 0.0));
    let im = |x: &CMatrix| x.map(|z| Complex64::new(z.im, 0.0));
    let cc = sys.coupling_doubled();
    let omega_imag = is_imaginary(&sys.omega_doubled(), tol);
    let coupling_ri = is_real(&cc, tol) || is_imaginary(&cc, tol);

    let mut cases = Vec::new();
    let mut pairs: [Vec<(String, CMatrix, CMatrix)>; 2] = [Vec::new(), Vec::new()];
    if rel_close(cm, cp, -1.0, tol) && rel_close(om, op, -1.0, tol) {
        cases.push(QndCase::LambdaQZero);
        pairs[1].push(("(Im Omega_minus, -Im C_minus)".into(), im(om), -im(cm)));
        pairs[1].push(("(Im Omega_minus, Re C_minus)".into(), im(om), re(cm)));
    }
    if rel_close(cm, cp, 1.0, tol) && rel_close(om, op, 1.0, tol) {
        cases.push(QndCase::LambdaPZero);
        pairs[0].push(("(Im Omega_minus, Im C_minus)".into(), im(om), im(cm)));
        pairs[0].push(("(Im Omega_minus, Re C_minus)".into(), im(om), re(cm)));
    }
    if omega_imag && coupling_ri && rel_close(cm, cp, 1.0, tol) {
        cases.push(QndCase::ImaginaryOmegaQCoupling);
        pairs[0].push(("(i(Omega_minus + Omega_plus), C_minus)".into(), (om + op) * I, cm.clone()));
    }
    if omega_imag && coupling_ri && rel_close(cm, cp, -1.0, tol) {
        cases.push(QndCase::ImaginaryOmegaPCoupling);
        pairs[1].push(("(i(Omega_minus - Omega_plus), C_minus)".into(), (om - op) * I, cm.clone()));
    }
    if within(inf_norm(cp), tol, cscale) && is_real(cm, tol) && rel_close(om, op, 1.0, tol) {
        cases.push(QndCase::RealPassiveCoupling);
    }

    let verdict = |x: Quadrature, pairs: &[(String, CMatrix, CMatrix)]| -> Result<QuadratureVerdict> {
        let (res, scale) = structural_residual(sys, x)?;
        let structural = within(res, tol, scale);
        let witnesses: Vec<ObservabilityWitness> = pairs
            .iter()
            .map(|(name, a, c)| ObservabilityWitness {
                pair: name.clone(),
                rank: observability_rank(a, c, tol),
                required: n,
            })
            .collect();
        let observable = witnesses.iter().any(|w| w.rank == w.required);
        Ok(QuadratureVerdict { is_qnd: structural && observable, structural, structural_residual: res, witnesses })
    };
    let q = if cases.is_empty() { QuadratureVerdict::none() } else { verdict(Quadrature::Q, &pairs[0])? };
    let p = if cases.is_empty() { QuadratureVerdict::none() } else { verdict(Quadrature::P, &pairs[1])? };
    Ok(QndVariableReport { q, p, cases_matched: cases, tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcore::{c, rel_diff};
    use crate::qsys::SystemParams;
    use crate::random;
    use crate::xferfn::eval_tf;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: Complex64) -> CMatrix {
        CMatrix::from_element(1, 1, v)
    }

    fn sys(s: CMatrix, cm: CMatrix, cp: CMatrix, om: CMatrix, op: CMatrix) -> QuantumLinearSystem {
        QuantumLinearSystem::new(SystemParams { s, c_minus: cm, c_plus: cp, omega_minus: om, omega_plus: op }).unwrap()
    }

    fn c_plus_zero_example() -> QuantumLinearSystem {
        sys(
            CMatrix::identity(1, 1),
            CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]),
            CMatrix::zeros(1, 2),
            CMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0, 0.0), c(1.0, 0.0)])),
            CMatrix::zeros(2, 2),
        )
    }

    #[test]
    fn commutator_vanishes_for_kernel_hamiltonian() {
        let s = c_plus_zero_example();
        let k = commutator_coeffs(&s);
        assert_eq!(k.residual(), 0.0);
        assert!(is_qnd_interaction(&s, 1e-10).unwrap());
    }

    #[test]
    fn commutator_vanishes_without_hamiltonian() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random::system(&mut rng, 2, 2);
        let s = QuantumLinearSystem::new(SystemParams {
            omega_minus: CMatrix::zeros(2, 2),
            omega_plus: CMatrix::zeros(2, 2),
            ..s.params()
        })
        .unwrap();
        assert_eq!(commutator_coeffs(&s).residual(), 0.0);
    }

    #[test]
    fn commutator_scalar_example() {
        let one = scalar(c(1.0, 0.0));
        let s = sys(one.clone(), one.clone(), one.clone(), one.clone(), scalar(c(0.0, 0.0)));
        let k = commutator_coeffs(&s);
        assert_eq!(k.coeff_a[(0, 0)], c(1.0, 0.0));
        assert!(!is_qnd_interaction(&s, 1e-10).unwrap());
    }

    #[test]
    fn q_coupling_with_equal_real_hamiltonian_is_qnd_interaction() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let cm = random::ginibre(&mut rng, 2, 3);
            let om = random::real_symmetric(&mut rng, 3).map(|v| c(v, 0.0));
            let s = sys(CMatrix::identity(2, 2), cm.clone(), cm, om.clone(), om);
            assert!(is_qnd_interaction(&s, 1e-10).unwrap());
        }
    }

    #[test]
    fn generic_system_is_not_qnd_interaction() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            assert!(!is_qnd_interaction(&random::system(&mut rng, 2, 2), 1e-10).unwrap());
        }
    }

    #[test]
    fn coupling_property_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cm = random::real_gaussian(&mut rng, 2, 2).map(|v| c(v, 0.0));
        let s = sys(CMatrix::identity(2, 2), cm.clone(), cm, CMatrix::zeros(2, 2), CMatrix::zeros(2, 2));
        let p = coupling_properties(&s, 1e-9);
        assert!(p.self_adjoint && p.mutually_commuting);

        let s = sys(
            CMatrix::identity(1, 1),
            random::ginibre(&mut rng, 1, 3),
            random::ginibre(&mut rng, 1, 3),
            CMatrix::zeros(3, 3),
            CMatrix::zeros(3, 3),
        );
        assert!(coupling_properties(&s, 1e-9).mutually_commuting);

        let s = sys(
            CMatrix::identity(2, 2),
            CMatrix::identity(2, 2),
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]),
            CMatrix::zeros(2, 2),
            CMatrix::zeros(2, 2),
        );
        assert!(!coupling_properties(&s, 1e-9).mutually_commuting);
    }

    #[test]
    fn siso_examples() {
        let one = scalar(c(1.0, 0.0));
        let zero = scalar(c(0.0, 0.0));
        let s = sys(one.clone(), one.clone(), zero.clone(), zero.clone(), zero.clone());
        let a = siso_analysis(&s, 1e-9).unwrap();
        assert_eq!(a.g, 1.0);
        assert!((a.tf_at(c(1.0, 0.0)).unwrap() - c(1.0 / 3.0, 0.0)).norm() < 1e-15);

        let s = sys(one.clone(), one.clone(), one.clone(), zero.clone(), zero);
        let a = siso_analysis(&s, 1e-9).unwrap();
        assert_eq!(a.g, 0.0);
        assert_eq!(a.tf_at(c(0.3, 2.0)).unwrap(), c(1.0, 0.0));
        assert!(is_qnd_interaction(&s, 1e-10).unwrap());
    }

    #[test]
    fn siso_without_hamiltonian_matches_state_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let s = sys(
                CMatrix::identity(1, 1),
                random::ginibre(&mut rng, 1, 2),
                random::ginibre(&mut rng, 1, 2),
                CMatrix::zeros(2, 2),
                CMatrix::zeros(2, 2),
            );
            let a = siso_analysis(&s, 1e-9).unwrap();
            assert_eq!(a.which_quadrature, Some(Quadrature::Q));
            let sv = c(0.2, 1.1);
            let g = eval_tf(&s.quad_realization().unwrap(), sv).unwrap();
            assert!((g[(0, 0)] - a.tf_at(sv).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn siso_rejects_mimo() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(siso_analysis(&random::system(&mut rng, 2, 2), 1e-9), Err(Error::Precondition(_))));
    }

    #[test]
    fn special_case_scalar_values() {
        let one = scalar(c(1.0, 0.0));
        let zero = scalar(c(0.0, 0.0));
        let s1 = sys(one.clone(), one.clone(), zero.clone(), zero.clone(), zero.clone());
        let g = special_case_tf(&s1, SpecialCase::CplusZero, c(1.0, 0.0), 1e-10).unwrap();
        assert!((g[(0, 0)] - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((g[(1, 1)] - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
        let s2 = sys(one.clone(), zero.clone(), one, zero.clone(), zero);
        let g = special_case_tf(&s2, SpecialCase::CminusZero, c(1.0, 0.0), 1e-10).unwrap();
        assert!((g[(0, 0)] - c(3.0, 0.0)).norm() < 1e-14);
        assert!((g[(1, 1)] - c(3.0, 0.0)).norm() < 1e-14);
        let ac = eval_tf(&s2.ac_realization(), c(1.0, 0.0)).unwrap();
        assert!(rel_diff(&ac, &g) < 1e-14);
    }

    #[test]
    fn special_case_checks_hypotheses() {
        let s = QuantumLinearSystem::michelson(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            special_case_tf(&s, SpecialCase::CplusZero, c(1.0, 0.0), 1e-10),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn sigma_pole_for_kernel_hamiltonian() {
        let s = c_plus_zero_example();
        assert_eq!(cjomega_residual(&s), 0.0);
        assert!(sigma_pole_residual(&s, c(2.0, 0.0)).unwrap() < 1e-14);
    }

    #[test]
    fn observability_rank_examples() {
        let a = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let c1 = CMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let c2 = CMatrix::from_row_slice(1, 2, &[c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(observability_rank(&a, &c1, 1e-9), 2);
        assert_eq!(observability_rank(&a, &c2, 1e-9), 1);
        assert_eq!(observability_rank(&a, &CMatrix::zeros(1, 2), 1e-9), 0);
    }

    #[test]
    fn p_coupling_with_opposite_real_hamiltonian() {
        let cm = scalar(c(0.0, 0.5));
        let s = sys(
            CMatrix::identity(1, 1),
            cm.clone(),
            -cm,
            scalar(c(0.5, 0.0)),
            scalar(c(-0.5, 0.0)),
        );
        let r = qnd_variable_report(&s, 1e-9).unwrap();
        assert!(r.cases_matched.contains(&QndCase::LambdaQZero));
        assert!(r.p_is_qnd());
        assert!(!r.q_is_qnd());
        assert_eq!(r.p.witnesses[0].rank, 1);
        assert_eq!(r.p.witnesses[1].rank, 0);
    }

    #[test]
    fn passive_real_coupling_has_no_qnd_variable() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let om = random::real_symmetric(&mut rng, 2).map(|v| c(v, 0.0));
        let s = sys(
            CMatrix::identity(1, 1),
            random::real_gaussian(&mut rng, 1, 2).map(|v| c(v, 0.0)),
            CMatrix::zeros(1, 2),
            om.clone(),
            om,
        );
        let r = qnd_variable_report(&s, 1e-9).unwrap();
        assert_eq!(r.cases_matched, vec![QndCase::RealPassiveCoupling]);
        assert!(!r.q_is_qnd() && !r.p_is_qnd());
    }

    #[test]
    fn zero_coupling_matches_no_case() {
        let s = sys(
            CMatrix::identity(1, 1),
            CMatrix::zeros(1, 1),
            CMatrix::zeros(1, 1),
            CMatrix::identity(1, 1),
            CMatrix::zeros(1, 1),
        );
        let r = qnd_variable_report(&s, 1e-9).unwrap();
        assert!(r.cases_matched.is_empty());
        assert!(!r.q_is_qnd() && !r.p_is_qnd());
    }
}
