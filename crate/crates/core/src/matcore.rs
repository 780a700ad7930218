//! Structural complex-matrix algebra for linear quantum systems.
//!
//! Everything here works on `2k × 2r` matrices acting on doubled-up vectors
//! `[a; a#]` of annihilation and creation operators. The two involutions
//! (♭ and ♯ adjoints), the doubled-up constructor Δ(U, V) and the unitary
//! change of basis `V_n` to real quadratures `(q, p)` are the building blocks
//! for realizations, transfer functions and every structural test in the
//! crate.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

/// Default tolerance for structural predicates (relative ∞-norm).
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default tolerance for numerical identities between two computed routes.
pub const EQ_TOL: f64 = 1e-12;

pub const I: Complex64 = Complex64::new(0.0, 1.0);
pub const HALF: Complex64 = Complex64::new(0.5, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Induced ∞-norm (maximum absolute row sum).
pub fn inf_norm(x: &CMatrix) -> f64 {
    x.row_iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn inf_norm_real(x: &RMatrix) -> f64 {
    x.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `residual <= tol * scale`, with an exactly-zero residual always passing.
#[inline]
pub fn within(residual: f64, tol: f64, scale: f64) -> bool {
    residual == 0.0 || residual <= tol * scale
}

/// ‖a − b‖∞ relative to max(‖a‖∞, ‖b‖∞, 1).
pub fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "rel_diff shape mismatch");
    let scale = inf_norm(a).max(inf_norm(b)).max(1.0);
    inf_norm(&(a - b)) / scale
}

pub fn real_part(x: &CMatrix) -> RMatrix {
    x.map(|z| z.re)
}

pub fn imag_part(x: &CMatrix) -> RMatrix {
    x.map(|z| z.im)
}

pub fn complexify(x: &RMatrix) -> CMatrix {
    x.map(|v| Complex64::new(v, 0.0))
}

/// ‖Im X‖∞ ≤ tol·‖X‖∞. Zero matrices are both real and imaginary.
pub fn is_real(x: &CMatrix, tol: f64) -> bool {
    within(inf_norm_real(&imag_part(x)), tol, inf_norm(x))
}

/// ‖Re X‖∞ ≤ tol·‖X‖∞.
pub fn is_imaginary(x: &CMatrix, tol: f64) -> bool {
    within(inf_norm_real(&real_part(x)), tol, inf_norm(x))
}

pub fn all_finite(x: &CMatrix) -> bool {
    x.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMatrix {
    CMatrix::zeros(r, c)
}

/// Assembles `[[tl, tr], [bl, br]]`.
pub fn block2(tl: &CMatrix, tr: &CMatrix, bl: &CMatrix, br: &CMatrix) -> Result<CMatrix> {
    if tl.nrows() != tr.nrows()
        || bl.nrows() != br.nrows()
        || tl.ncols() != bl.ncols()
        || tr.ncols() != br.ncols()
    {
        return Err(Error::Dimension(format!(
            "inconsistent 2x2 block shapes {:?} {:?} / {:?} {:?}",
            tl.shape(),
            tr.shape(),
            bl.shape(),
            br.shape()
        )));
    }
    let (r0, c0) = tl.shape();
    let (r1, c1) = br.shape();
    let mut out = CMatrix::zeros(r0 + r1, c0 + c1);
    out.view_mut((0, 0), (r0, c0)).copy_from(tl);
    out.view_mut((0, c0), (r0, c1)).copy_from(tr);
    out.view_mut((r0, 0), (r1, c0)).copy_from(bl);
    out.view_mut((r0, c0), (r1, c1)).copy_from(br);
    Ok(out)
}

pub fn block_diag(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let tr = zeros(a.nrows(), b.ncols());
    let bl = zeros(b.nrows(), a.ncols());
    block2(a, &tr, &bl, b).expect("block_diag shapes are consistent by construction")
}

/// Splits an even-by-even matrix into its four equal quadrants
/// `[tl, tr, bl, br]`.
pub fn quadrants(x: &CMatrix) -> Result<[CMatrix; 4]> {
    let (k, r) = half_dims(x)?;
    Ok([
        x.view((0, 0), (k, r)).into_owned(),
        x.view((0, r), (k, r)).into_owned(),
        x.view((k, 0), (k, r)).into_owned(),
        x.view((k, r), (k, r)).into_owned(),
    ])
}

fn half_dims(x: &CMatrix) -> Result<(usize, usize)> {
    let (rows, cols) = x.shape();
    if rows % 2 != 0 || cols % 2 != 0 {
        return Err(Error::Dimension(format!(
            "expected even dimensions, got {rows}x{cols}"
        )));
    }
    Ok((rows / 2, cols / 2))
}

/// Doubled-up matrix Δ(U, V) = [[U, V], [V#, U#]].
pub fn delta(u: &CMatrix, v: &CMatrix) -> Result<CMatrix> {
    if u.shape() != v.shape() {
        return Err(Error::Dimension(format!(
            "delta: U is {:?} but V is {:?}",
            u.shape(),
            v.shape()
        )));
    }
    block2(u, v, &v.conjugate(), &u.conjugate())
}

/// J_k = diag(I_k, −I_k).
pub fn j_flat(k: usize) -> CMatrix {
    CMatrix::from_fn(2 * k, 2 * k, |i, j| {
        if i != j {
            Complex64::new(0.0, 0.0)
        } else if i < k {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(-1.0, 0.0)
        }
    })
}

/// 𝕁_k = [[0, I_k], [−I_k, 0]].
pub fn j_sharp(k: usize) -> CMatrix {
    CMatrix::from_fn(2 * k, 2 * k, |i, j| {
        if i < k && j == i + k {
            Complex64::new(1.0, 0.0)
        } else if i >= k && j + k == i {
            Complex64::new(-1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

pub fn j_sharp_real(k: usize) -> RMatrix {
    real_part(&j_sharp(k))
}

/// ♭-adjoint X♭ = J_r X† J_k for X ∈ C^{2k×2r}.
pub fn flat_adjoint(x: &CMatrix) -> Result<CMatrix> {
    let (k, r) = half_dims(x)?;
    Ok(j_flat(r) * x.adjoint() * j_flat(k))
}

/// ♯-adjoint X♯ = −𝕁_r X† 𝕁_k for X ∈ C^{2k×2r}.
pub fn sharp_adjoint(x: &CMatrix) -> Result<CMatrix> {
    let (k, r) = half_dims(x)?;
    Ok(-(j_sharp(r) * x.adjoint() * j_sharp(k)))
}

/// Real-matrix ♯-adjoint, −𝕁_r Xᵀ 𝕁_k.
pub fn sharp_adjoint_real(x: &RMatrix) -> Result<RMatrix> {
    Ok(real_part(&sharp_adjoint(&complexify(x))?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    DoubledUp,
    Bogoliubov,
    Symplectic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureVerdict {
    pub holds: bool,
    /// Largest residual among the checks performed (∞-norm).
    pub residual: f64,
    /// Set when the test could not be carried out (shape violations).
    pub diagnostic: Option<String>,
}

impl StructureVerdict {
    fn rejected(why: String) -> Self {
        Self { holds: false, residual: f64::INFINITY, diagnostic: Some(why) }
    }
}

fn doubled_up_residual(x: &CMatrix) -> Result<f64> {
    let [tl, tr, bl, br] = quadrants(x)?;
    let r1 = inf_norm(&(bl - tr.conjugate()));
    let r2 = inf_norm(&(br - tl.conjugate()));
    Ok(r1.max(r2))
}

/// Tests membership of `x` in the doubled-up set, the Bogoliubov group or
/// the symplectic group.
///
/// Shape violations give `holds = false` with a diagnostic instead of an
/// error.
pub fn structure_test(x: &CMatrix, kind: StructureKind, tol: f64) -> StructureVerdict {
    let (rows, cols) = x.shape();
    if rows % 2 != 0 || cols % 2 != 0 {
        return StructureVerdict::rejected(format!("odd dimensions {rows}x{cols}"));
    }
    if kind != StructureKind::DoubledUp && rows != cols {
        return StructureVerdict::rejected(format!("{kind:?} requires a square matrix, got {rows}x{cols}"));
    }
    let eye = identity(rows);
    match kind {
        StructureKind::DoubledUp => {
            let res = doubled_up_residual(x).expect("even dims checked");
            StructureVerdict { holds: within(res, tol, inf_norm(x)), residual: res, diagnostic: None }
        }
        StructureKind::Bogoliubov => {
            let du = doubled_up_residual(x).expect("even dims checked");
            let xf = flat_adjoint(x).expect("even dims checked");
            let res = inf_norm(&(x * &xf - &eye)).max(inf_norm(&(&xf * x - &eye)));
            let holds = within(du, tol, inf_norm(x)) && res <= tol;
            StructureVerdict { holds, residual: res.max(du), diagnostic: None }
        }
        StructureKind::Symplectic => {
            let xs = sharp_adjoint(x).expect("even dims checked");
            let res = inf_norm(&(x * &xs - &eye)).max(inf_norm(&(&xs * x - &eye)));
            StructureVerdict { holds: res <= tol, residual: res, diagnostic: None }
        }
    }
}

/// V_n = (1/√2)·[[I, I], [−iI, iI]], mapping `[a; a#]` to `[q; p]` with
/// q = (a + a#)/√2 and p = −i(a − a#)/√2.
pub fn quadrature_transform(n: usize) -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ri) = (i / n, i % n);
        let (bj, rj) = (j / n, j % n);
        if ri != rj {
            return Complex64::new(0.0, 0.0);
        }
        match (bi, bj) {
            (0, _) => Complex64::new(h, 0.0),
            (1, 0) => Complex64::new(0.0, -h),
            _ => Complex64::new(0.0, h),
        }
    })
}

/// V_k X V_r† for X ∈ C^{2k×2r}; real whenever X is doubled-up.
pub fn to_quadrature(x: &CMatrix) -> Result<CMatrix> {
    let (k, r) = half_dims(x)?;
    Ok(quadrature_transform(k) * x * quadrature_transform(r).adjoint())
}

/// Quadrature image of Δ(U, V) from the closed form
/// [[Re(U+V), −Im(U−V)], [Im(U+V), Re(U−V)]].
pub fn quadrature_blocks(u: &CMatrix, v: &CMatrix) -> Result<RMatrix> {
    let sum = u + v;
    let dif = u - v;
    let out = block2(
        &complexify(&real_part(&sum)),
        &complexify(&(-imag_part(&dif))),
        &complexify(&imag_part(&sum)),
        &complexify(&real_part(&dif)),
    )?;
    Ok(real_part(&out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[Complex64]) -> CMatrix {
        CMatrix::from_row_slice(rows, cols, data)
    }

    fn assert_close(a: &CMatrix, b: &CMatrix, tol: f64) {
        let d = inf_norm(&(a - b));
        assert!(d <= tol, "matrices differ by {d:e}\n{a}\n{b}");
    }

    #[test]
    fn delta_identity_and_conjugation() {
        let one = m(1, 1, &[c(1.0, 0.0)]);
        let zero = m(1, 1, &[c(0.0, 0.0)]);
        assert_close(&delta(&one, &zero).unwrap(), &identity(2), 0.0);

        let u = m(1, 1, &[I]);
        let expected = m(2, 2, &[I, c(1.0, 0.0), c(1.0, 0.0), -I]);
        assert_close(&delta(&u, &one).unwrap(), &expected, 0.0);
    }

    #[test]
    fn delta_shape_mismatch() {
        let u = zeros(1, 2);
        let v = zeros(2, 1);
        assert!(matches!(delta(&u, &v), Err(Error::Dimension(_))));
    }

    #[test]
    fn flat_adjoint_examples() {
        assert_close(&flat_adjoint(&identity(2)).unwrap(), &identity(2), 0.0);
        // J1 X† J1 expanded by hand.
        let x = m(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let expected = m(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)]);
        assert_close(&flat_adjoint(&x).unwrap(), &expected, 0.0);
    }

    #[test]
    fn adjoints_reject_odd_dimensions() {
        let x = zeros(3, 2);
        assert!(flat_adjoint(&x).is_err());
        assert!(sharp_adjoint(&x).is_err());
    }

    #[test]
    fn sharp_adjoint_of_identity() {
        assert_close(&sharp_adjoint(&identity(4)).unwrap(), &identity(4), 0.0);
    }

    #[test]
    fn structure_examples() {
        for kind in [StructureKind::DoubledUp, StructureKind::Bogoliubov, StructureKind::Symplectic] {
            assert!(structure_test(&identity(2), kind, 1e-12).holds);
        }

        let th: f64 = 0.3;
        let t = delta(&m(1, 1, &[c(th.cosh(), 0.0)]), &m(1, 1, &[c(th.sinh(), 0.0)])).unwrap();
        // T T♭ = [[c,s],[s,c]]·[[c,−s],[−s,c]] = (c²−s²) I.
        let tf = flat_adjoint(&t).unwrap();
        assert_close(&(&t * &tf), &identity(2), 1e-14);
        assert!(structure_test(&t, StructureKind::Bogoliubov, 1e-12).holds);

        let shear = m(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(structure_test(&shear, StructureKind::Symplectic, 1e-12).holds);
        assert!(!structure_test(&shear, StructureKind::Bogoliubov, 1e-12).holds);
    }

    #[test]
    fn structure_shape_violation_is_diagnosed() {
        let v = structure_test(&zeros(2, 4), StructureKind::Symplectic, 1e-9);
        assert!(!v.holds);
        assert!(v.diagnostic.is_some());
        let v = structure_test(&zeros(3, 3), StructureKind::DoubledUp, 1e-9);
        assert!(!v.holds);
    }

    #[test]
    fn quadrature_transform_n1() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = m(2, 2, &[c(h, 0.0), c(h, 0.0), c(0.0, -h), c(0.0, h)]);
        assert_close(&quadrature_transform(1), &expected, 0.0);
        for n in 1..=4 {
            let v = quadrature_transform(n);
            assert_close(&(&v * v.adjoint()), &identity(2 * n), 1e-15);
        }
    }

    #[test]
    fn j_matrices() {
        let j = j_sharp(2);
        assert_close(&(&j * &j), &(-identity(4)), 0.0);
        let jf = j_flat(2);
        assert_close(&(&jf * &jf), &identity(4), 0.0);
    }
}
