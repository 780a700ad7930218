//! System description files: JSON with complex scalars as `[re, im]`.

use linqbae::feedback::{FeedbackNetwork, HamiltonianRule};
use linqbae::kalman::KalmanCoSubsystem;
use linqbae::{CMatrix, QuantumLinearSystem, RMatrix, SystemParams};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub type Cx = [f64; 2];
pub type CxRows = Vec<Vec<Cx>>;
pub type RealRows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub modes: usize,
    pub channels: usize,
    #[serde(rename = "S")]
    pub s: CxRows,
    #[serde(rename = "C_minus")]
    pub c_minus: CxRows,
    #[serde(rename = "C_plus")]
    pub c_plus: CxRows,
    #[serde(rename = "Omega_minus")]
    pub omega_minus: CxRows,
    #[serde(rename = "Omega_plus")]
    pub omega_plus: CxRows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<FeedbackSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kalman: Option<KalmanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

/// Feedback interconnection. Without `k11`..`k22` the system's own coupling
/// rows are split as `[first split[0] rows; last split[1] rows]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSection {
    pub split: [usize; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k11: Option<CxRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k12: Option<CxRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k21: Option<CxRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k22: Option<CxRows>,
    pub beamsplitter: CxRows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<HamiltonianRule>,
}

/// Either the real triple `A_co, B_co, C_co` or the blocks `Gamma_q`,
/// `Gamma_p` (with optional `A_co`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KalmanSection {
    #[serde(rename = "A_co", default, skip_serializing_if = "Option::is_none")]
    pub a_co: Option<RealRows>,
    #[serde(rename = "B_co", default, skip_serializing_if = "Option::is_none")]
    pub b_co: Option<RealRows>,
    #[serde(rename = "C_co", default, skip_serializing_if = "Option::is_none")]
    pub c_co: Option<RealRows>,
    #[serde(rename = "Gamma_q", default, skip_serializing_if = "Option::is_none")]
    pub gamma_q: Option<CxRows>,
    #[serde(rename = "Gamma_p", default, skip_serializing_if = "Option::is_none")]
    pub gamma_p: Option<CxRows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_traj: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Diagonal of the initial density matrix in the product Fock basis;
    /// the vacuum when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0_diag: Option<Vec<f64>>,
}

pub fn to_matrix(name: &str, rows: &CxRows) -> Result<CMatrix, CliError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(CliError::Spec(format!("{name}: row {i} has {} entries, row 0 has {c}", row.len())));
    }
    Ok(CMatrix::from_fn(r, c, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

pub fn to_real_matrix(name: &str, rows: &RealRows) -> Result<RMatrix, CliError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != c) {
        return Err(CliError::Spec(format!("{name}: row {i} has {} entries, row 0 has {c}", row.len())));
    }
    Ok(RMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn from_matrix(x: &CMatrix) -> CxRows {
    (0..x.nrows()).map(|i| (0..x.ncols()).map(|j| [x[(i, j)].re, x[(i, j)].im]).collect()).collect()
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let spec: SpecFile = serde_json::from_str(text)
            .map_err(|e| CliError::Spec(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        if spec.schema_version != SCHEMA_VERSION {
            return Err(CliError::Spec(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                spec.schema_version
            )));
        }
        Ok(spec)
    }

    pub fn emit(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes") + "\n"
    }

    pub fn params(&self) -> Result<SystemParams, CliError> {
        let p = SystemParams {
            s: to_matrix("S", &self.s)?,
            c_minus: to_matrix("C_minus", &self.c_minus)?,
            c_plus: to_matrix("C_plus", &self.c_plus)?,
            omega_minus: to_matrix("Omega_minus", &self.omega_minus)?,
            omega_plus: to_matrix("Omega_plus", &self.omega_plus)?,
        };
        if p.omega_minus.nrows() != self.modes || p.s.nrows() != self.channels {
            return Err(CliError::Spec(format!(
                "declared modes={} channels={} but Omega_minus has {} rows and S has {}",
                self.modes,
                self.channels,
                p.omega_minus.nrows(),
                p.s.nrows()
            )));
        }
        Ok(p)
    }

    pub fn system(&self, tol: f64) -> Result<QuantumLinearSystem, CliError> {
        Ok(QuantumLinearSystem::with_tolerance(self.params()?, tol)?)
    }

    pub fn from_system(sys: &QuantumLinearSystem) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            modes: sys.n_modes(),
            channels: sys.m_channels(),
            s: from_matrix(sys.s()),
            c_minus: from_matrix(sys.c_minus()),
            c_plus: from_matrix(sys.c_plus()),
            omega_minus: from_matrix(sys.omega_minus()),
            omega_plus: from_matrix(sys.omega_plus()),
            feedback: None,
            kalman: None,
            sim: None,
        }
    }

    pub fn feedback_section(&self) -> Result<&FeedbackSection, CliError> {
        self.feedback.as_ref().ok_or_else(|| CliError::Spec("the spec has no feedback section".into()))
    }

    pub fn network(&self, tol: f64) -> Result<FeedbackNetwork, CliError> {
        let fb = self.feedback_section()?;
        let s_b = to_matrix("feedback.beamsplitter", &fb.beamsplitter)?;
        let ks = [&fb.k11, &fb.k12, &fb.k21, &fb.k22];
        let net = if ks.iter().all(|k| k.is_some()) {
            let get = |name: &str, k: &Option<CxRows>| to_matrix(name, k.as_ref().expect("checked"));
            let p = self.params()?;
            let (k11, k12) = (get("feedback.k11", &fb.k11)?, get("feedback.k12", &fb.k12)?);
            let (k21, k22) = (get("feedback.k21", &fb.k21)?, get("feedback.k22", &fb.k22)?);
            let s_g = (p.s.nrows() == k11.nrows() + k21.nrows()).then_some(p.s);
            FeedbackNetwork::from_couplings(p.omega_minus, p.omega_plus, &k11, &k12, &k21, &k22, s_g, s_b)?
        } else if ks.iter().any(|k| k.is_some()) {
            return Err(CliError::Spec("feedback: give all of k11, k12, k21, k22 or none".into()));
        } else {
            let sys = self.system(tol)?;
            if fb.split[0] + fb.split[1] != sys.m_channels() {
                return Err(CliError::Spec(format!(
                    "feedback.split {:?} does not add up to {} channels",
                    fb.split,
                    sys.m_channels()
                )));
            }
            FeedbackNetwork::new(sys, fb.split[0], s_b)?
        };
        Ok(net)
    }

    pub fn kalman_subsystem(&self) -> Result<KalmanCoSubsystem, CliError> {
        let k = self.kalman.as_ref().ok_or_else(|| CliError::Spec("the spec has no kalman section".into()))?;
        let a = k.a_co.as_ref().map(|a| to_real_matrix("kalman.A_co", a)).transpose()?;
        match (&k.gamma_q, &k.gamma_p, &k.b_co, &k.c_co) {
            (Some(gq), Some(gp), None, None) => Ok(KalmanCoSubsystem::from_gamma(
                to_matrix("kalman.Gamma_q", gq)?,
                to_matrix("kalman.Gamma_p", gp)?,
                a,
            )?),
            (None, None, Some(b), Some(c)) => {
                let a = a.ok_or_else(|| CliError::Spec("kalman: A_co is required with B_co and C_co".into()))?;
                Ok(KalmanCoSubsystem::new(a, to_real_matrix("kalman.B_co", b)?, to_real_matrix("kalman.C_co", c)?)?)
            }
            _ => Err(CliError::Spec("kalman: give either Gamma_q and Gamma_p, or A_co, B_co and C_co".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLES: [&str; 4] = [
        include_str!("../examples/michelson.json"),
        include_str!("../examples/broken.json"),
        include_str!("../examples/feedback_network.json"),
        include_str!("../examples/kalman_observer.json"),
    ];

    #[test]
    fn examples_round_trip() {
        for text in EXAMPLES {
            let spec = SpecFile::parse(text).unwrap();
            let again = SpecFile::parse(&spec.emit()).unwrap();
            assert_eq!(spec, again);
        }
    }

    #[test]
    fn awkward_floats_survive_emit() {
        let mut spec = SpecFile::parse(EXAMPLES[0]).unwrap();
        let values = [0.1 + 0.2, -1e-300, 1.0 / 3.0, std::f64::consts::PI * 1e17, 5e-324];
        spec.omega_plus[0][0] = [values[0], values[1]];
        spec.omega_plus[0][1] = [values[2], values[3]];
        spec.omega_plus[1][0] = [values[4], -values[2]];
        let again = SpecFile::parse(&spec.emit()).unwrap();
        assert_eq!(spec.omega_plus, again.omega_plus);
    }

    #[test]
    fn parse_errors_name_the_position() {
        let err = SpecFile::parse("{\n  \"modes\": 1,\n  \"channels\": x\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = SpecFile::parse(&EXAMPLES[1].replace("\"modes\"", "\"nodes\"")).unwrap_err();
        assert!(err.to_string().contains("nodes"), "{err}");
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let rows: CxRows = vec![vec![[1.0, 0.0], [0.0, 0.0]], vec![[1.0, 0.0]]];
        assert!(to_matrix("S", &rows).is_err());
    }

    #[test]
    fn declared_sizes_must_match() {
        let spec = SpecFile::parse(&EXAMPLES[0].replace("\"modes\": 2", "\"modes\": 3")).unwrap();
        assert!(matches!(spec.params(), Err(CliError::Spec(_))));
    }

    #[test]
    fn system_round_trips_through_spec() {
        let sys = SpecFile::parse(EXAMPLES[0]).unwrap().system(1e-9).unwrap();
        let back = SpecFile::from_system(&sys).system(1e-9).unwrap();
        assert_eq!(sys, back);
    }
}
