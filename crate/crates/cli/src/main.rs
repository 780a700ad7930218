use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use linqbae::feedback::{self, HamiltonianRule, SearchConfig};
use linqbae::matcore::{CMatrix, DEFAULT_TOL};
use linqbae::sme::{self, SimConfig};
use linqbae::xferfn::{self, Block, FrequencyGrid};
use linqbae::{bae, kalman, qnd, Realization};
use serde_json::{json, Value};

mod spec;

use spec::{from_matrix, SpecFile, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("malformed spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Core(#[from] linqbae::Error),
    #[error("internal consistency error: {0}")]
    Consistency(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Consistency(_) | CliError::Core(linqbae::Error::Consistency(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "linqbae", version, about = "Back-action evasion and QND analysis of linear quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Relative tolerance for structural tests and certificates.
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the structural invariants of a system.
    Validate { spec: PathBuf },
    /// State-space matrices in the annihilation-creation or quadrature form.
    Realize {
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "quad")]
        form: FormArg,
    },
    /// Quadrature transfer-function magnitudes on a log-spaced grid, as CSV.
    Tf {
        spec: PathBuf,
        #[arg(long, num_args = 3, value_names = ["WMIN", "WMAX", "NPTS"], default_values = ["1e-3", "1e3", "32"])]
        sweep: Vec<String>,
    },
    /// Certify which quadrature cross-blocks vanish.
    Bae { spec: PathBuf },
    /// Commutator conditions and QND variables.
    Qnd { spec: PathBuf },
    /// Coherent-feedback reduction and coupling design.
    Feedback {
        #[command(subcommand)]
        action: FeedbackCommand,
    },
    /// Back-action-evasion conditions of a Kalman-form coherent observer.
    Kalman { spec: PathBuf },
    /// Stochastic master equation trajectories; checkpoint CSV plus statistics.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        fock_dim: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "T")]
        t_final: Option<f64>,
        #[arg(long)]
        traj: Option<usize>,
        /// Statistics report path; stderr when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum FeedbackCommand {
    /// Reduce the network to an equivalent system.
    Reduce {
        spec: PathBuf,
        #[arg(long, value_enum)]
        rule: Option<RuleArg>,
        /// Write the reduced system as a spec file.
        #[arg(long)]
        reduced: Option<PathBuf>,
    },
    /// Search couplings that make the reduced system back-action evading.
    Design {
        spec: PathBuf,
        #[arg(long, value_enum)]
        rule: Option<RuleArg>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        starts: Option<usize>,
        /// Write the best candidate's reduced system as a spec file.
        #[arg(long)]
        reduced: Option<PathBuf>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormArg {
    Ac,
    Quad,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum RuleArg {
    LoopClosure,
    Printed,
}

impl From<RuleArg> for HamiltonianRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::LoopClosure => HamiltonianRule::LoopClosure,
            RuleArg::Printed => HamiltonianRule::Printed,
        }
    }
}

fn read_spec(path: &Path) -> Result<SpecFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    SpecFile::parse(&text)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn report(command: &str, tol: f64, sections: Value) -> Value {
    let mut v = json!({ "schema_version": SCHEMA_VERSION, "command": command, "tol": tol });
    if let (Some(obj), Value::Object(extra)) = (v.as_object_mut(), sections) {
        obj.extend(extra);
    }
    v
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn pair_label(b: Block) -> &'static str {
    match b {
        Block::Qq => "(q_out, q_in)",
        Block::Qp => "(q_out, p_in)",
        Block::Pq => "(p_out, q_in)",
        Block::Pp => "(p_out, p_in)",
    }
}

fn realization_json(r: &Realization, real: bool) -> Value {
    let mat = |x: &CMatrix| {
        if real {
            to_value(&(0..x.nrows()).map(|i| (0..x.ncols()).map(|j| x[(i, j)].re).collect()).collect::<Vec<Vec<f64>>>())
        } else {
            to_value(&from_matrix(x))
        }
    };
    json!({ "A": mat(&r.a), "B": mat(&r.b), "C": mat(&r.c), "D": mat(&r.d) })
}

fn bae_section(sys: &linqbae::QuantumLinearSystem, tol: f64) -> Result<Value, CliError> {
    let rep = bae::certify_bae(sys, tol)?;
    if !rep.consistency {
        return Err(CliError::Consistency(format!(
            "matched conditions predict blocks that were not certified: {:?}",
            rep.inconsistent()
        )));
    }
    let mut v = to_value(&rep);
    v["certified"] = to_value(&rep.certified_pairs.iter().map(|b| pair_label(*b)).collect::<Vec<_>>());
    Ok(v)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let tol = cli.tol;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Validate { spec } => {
            let file = read_spec(&spec)?;
            match file.system(tol) {
                Ok(sys) => {
                    let v = report(
                        "validate",
                        tol,
                        json!({ "validation": { "status": "valid", "modes": sys.n_modes(), "channels": sys.m_channels() } }),
                    );
                    write_output(out, &pretty(&v))
                }
                Err(CliError::Core(linqbae::Error::Validation(violations))) => {
                    let v = report("validate", tol, json!({ "validation": { "status": "invalid", "violations": violations } }));
                    write_output(out, &pretty(&v))?;
                    Err(CliError::Core(linqbae::Error::Validation(violations)))
                }
                Err(e) => Err(e),
            }
        }
        Command::Realize { spec, form } => {
            let sys = read_spec(&spec)?.system(tol)?;
            let (name, r, real) = match form {
                FormArg::Ac => ("ac", sys.ac_realization(), false),
                FormArg::Quad => ("quad", sys.quad_realization()?, true),
            };
            let v = report("realize", tol, json!({ "realizations": { name: realization_json(&r, real) } }));
            write_output(out, &pretty(&v))
        }
        Command::Tf { spec, sweep } => {
            let sys = read_spec(&spec)?.system(tol)?;
            let parse = |s: &str| s.parse::<f64>().map_err(|e| CliError::Spec(format!("--sweep value {s:?}: {e}")));
            let (w_min, w_max) = (parse(&sweep[0])?, parse(&sweep[1])?);
            let points = sweep[2].parse::<usize>().map_err(|e| CliError::Spec(format!("--sweep npts {:?}: {e}", sweep[2])))?;
            if !(w_min > 0.0 && w_max >= w_min && points > 0) {
                return Err(CliError::Spec("--sweep needs 0 < wmin <= wmax and npts >= 1".into()));
            }
            let r = sys.quad_realization()?;
            let m = sys.m_channels();
            let label = |k: usize| if k < m { format!("q{}", k + 1) } else { format!("p{}", k - m + 1) };
            let mut csv = String::from("omega");
            for i in 0..2 * m {
                for j in 0..2 * m {
                    csv.push_str(&format!(",{}_{}", label(i), label(j)));
                }
            }
            csv.push('\n');
            for (w, g) in xferfn::sweep(&r, &FrequencyGrid { w_min, w_max, points }) {
                csv.push_str(&format!("{w:e}"));
                for i in 0..2 * m {
                    for j in 0..2 * m {
                        match &g {
                            Ok(g) => csv.push_str(&format!(",{:e}", g[(i, j)].norm())),
                            Err(_) => csv.push_str(",nan"),
                        }
                    }
                }
                csv.push('\n');
            }
            write_output(out, &csv)
        }
        Command::Bae { spec } => {
            let sys = read_spec(&spec)?.system(tol)?;
            let v = report("bae", tol, json!({ "bae": bae_section(&sys, tol)? }));
            write_output(out, &pretty(&v))
        }
        Command::Qnd { spec } => {
            let sys = read_spec(&spec)?.system(tol)?;
            let interaction = qnd::qnd_interaction(&sys, tol)?;
            let lh = qnd::commutator_coeffs(&sys).residual();
            let lsharp_h = qnd::adjoint_commutator_coeffs(&sys).residual();
            let mut section = json!({
                "interaction": interaction,
                "commutator_residuals": {
                    "L_H": lh,
                    "Lsharp_H": lsharp_h,
                    "scale": qnd::commutator_scale(&sys),
                    "tol": tol,
                },
                "variables": qnd::qnd_variable_report(&sys, tol)?,
            });
            if sys.m_channels() == 1 {
                section["siso"] = to_value(&qnd::siso_analysis(&sys, tol)?);
            }
            write_output(out, &pretty(&report("qnd", tol, json!({ "qnd": section }))))
        }
        Command::Feedback { action } => match action {
            FeedbackCommand::Reduce { spec, rule, reduced } => {
                let file = read_spec(&spec)?;
                let rule = rule.map(Into::into).or(file.feedback_section()?.rule).unwrap_or_default();
                let net = file.network(tol)?;
                let sys = feedback::reduce_network_with(&net, rule)?;
                let check = feedback::verify_reduction(&net, HamiltonianRule::LoopClosure, tol.max(1e-9))?;
                let agreement = feedback::verify_reduction(&net, rule, tol.max(1e-9))?;
                if rule == HamiltonianRule::LoopClosure && !check.passes {
                    return Err(CliError::Consistency(format!(
                        "reduced system deviates from direct interconnection by {:.3e}",
                        check.max_deviation
                    )));
                }
                let reduced_spec = SpecFile::from_system(&sys);
                if let Some(p) = reduced {
                    write_output(Some(&p), &reduced_spec.emit())?;
                }
                let v = report(
                    "feedback reduce",
                    tol,
                    json!({
                        "feedback": {
                            "rule": rule,
                            "reduced_system": reduced_spec,
                            "matches_interconnection": agreement,
                        },
                        "bae": bae_section(&sys, tol)?,
                    }),
                );
                write_output(out, &pretty(&v))
            }
            FeedbackCommand::Design { spec, rule, seed, starts, reduced } => {
                let file = read_spec(&spec)?;
                let fb = file.feedback_section()?;
                let p = file.params()?;
                let mut cfg = SearchConfig { seed, tol: tol.max(1e-9), ..SearchConfig::default() };
                cfg.rule = rule.map(Into::into).or(fb.rule).unwrap_or_default();
                if let Some(s) = starts {
                    cfg.starts = s;
                }
                let s_b = spec::to_matrix("feedback.beamsplitter", &fb.beamsplitter)?;
                let split = (fb.split[0], fb.split[1]);
                let outcome = feedback::design_couplings(&p.omega_minus, &p.omega_plus, split, &[s_b], &cfg)?;
                let best = outcome.candidates.first();
                if let (Some(path), Some(c)) = (reduced, best) {
                    write_output(Some(&path), &SpecFile::from_system(c.reduced.as_ref().expect("candidates are reduced")).emit())?;
                }
                let best_json = best.map(|c| {
                    json!({
                        "objective": c.objective,
                        "k11": from_matrix(&c.k11),
                        "k12": from_matrix(&c.k12),
                        "k21": from_matrix(&c.k21),
                        "k22": from_matrix(&c.k22),
                        "beamsplitter": from_matrix(&c.s_b),
                        "reduced_system": c.reduced.as_ref().map(SpecFile::from_system),
                        "bae": c.bae,
                    })
                });
                let v = report(
                    "feedback design",
                    tol,
                    json!({
                        "feedback": {
                            "search": cfg,
                            "candidates": outcome.candidates.len(),
                            "best_objective": outcome.best_objective,
                            "best_start_objective": outcome.best_start_objective,
                            "ill_posed": outcome.ill_posed,
                            "diagnostic": outcome.diagnostic,
                            "best": best_json,
                        }
                    }),
                );
                write_output(out, &pretty(&v))
            }
        },
        Command::Kalman { spec } => {
            let k = read_spec(&spec)?.kalman_subsystem()?;
            let verdict = kalman::check_kalman_bae(&k, tol);
            let order = 2 * k.a().nrows() + 1;
            let identity = kalman::markov_identity_check(&k, order, tol);
            if identity.premise_holds && !identity.passes() {
                return Err(CliError::Consistency(format!(
                    "Markov identity fails by {:.3e} although its premise holds",
                    identity.residual
                )));
            }
            let v = report("kalman", tol, json!({ "kalman": { "bae": verdict, "markov_identity": identity } }));
            write_output(out, &pretty(&v))
        }
        Command::Simulate { spec, seed, fock_dim, dt, t_final, traj, report: report_path } => {
            let file = read_spec(&spec)?;
            let sys = file.system(tol)?;
            let sim = file.sim.clone().unwrap_or(spec::SimSection {
                fock_dim: None,
                dt: None,
                t_final: None,
                n_traj: None,
                seed: None,
                rho0_diag: None,
            });
            let defaults = SimConfig::default();
            let cfg = SimConfig {
                dt: dt.or(sim.dt).unwrap_or(defaults.dt),
                t_final: t_final.or(sim.t_final).unwrap_or(defaults.t_final),
                n_traj: traj.or(sim.n_traj).unwrap_or(defaults.n_traj),
                seed: seed.or(sim.seed).unwrap_or(defaults.seed),
                checkpoints: defaults.checkpoints,
            };
            let fock = fock_dim.or(sim.fock_dim).unwrap_or(8);
            let ops = sme::build_truncated_operators(&sys, fock)?;
            let d = ops.dim();
            let mut rho = CMatrix::zeros(d, d);
            match &sim.rho0_diag {
                None => rho[(0, 0)] = 1.0.into(),
                Some(p) if p.len() == d && p.iter().all(|&x| x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() < 1e-9 => {
                    for (i, &x) in p.iter().enumerate() {
                        rho[(i, i)] = x.into();
                    }
                }
                Some(p) => {
                    return Err(CliError::Spec(format!(
                        "sim.rho0_diag needs {d} nonnegative entries summing to 1, got {}",
                        p.len()
                    )))
                }
            }
            let mut names = Vec::new();
            let mut tracked = Vec::new();
            for k in 0..sys.n_modes() {
                let a = &ops.a_ops()[k];
                names.extend([format!("q{}", k + 1), format!("p{}", k + 1), format!("n{}", k + 1)]);
                tracked.extend([ops.q(k), ops.p(k), a.adjoint() * a]);
            }
            for (j, l) in ops.l_ops().iter().enumerate() {
                names.push(format!("L{}_re", j + 1));
                tracked.push((l + l.adjoint()) * linqbae::matcore::c(0.5, 0.0));
            }
            let batch = sme::simulate_qsme(&ops, &rho, &cfg, &tracked)?;
            let stats = sme::martingale_stats(&batch, &names, &sme::default_allowances(cfg.dt, &tracked));
            let mut csv = String::from("time");
            for n in &names {
                csv.push_str(&format!(",{n}_mean,{n}_se"));
            }
            csv.push('\n');
            for (c, t) in stats.times.iter().enumerate() {
                csv.push_str(&format!("{t:e}"));
                for o in &stats.observables {
                    csv.push_str(&format!(",{:e},{:e}", o.mean[c], o.standard_error[c]));
                }
                csv.push('\n');
            }
            write_output(out, &csv)?;
            let v = report(
                "simulate",
                tol,
                json!({
                    "simulation": {
                        "config": cfg,
                        "fock_dim": fock,
                        "max_trace_error": batch.max_trace_error,
                        "max_clipped_mass": batch.max_clipped_mass,
                        "max_top_population": batch.max_top_population,
                        "step_stiffness": batch.step_stiffness,
                        "martingale": stats,
                    }
                }),
            );
            match report_path {
                Some(p) => write_output(Some(&p), &pretty(&v)),
                None => {
                    eprint!("{}", pretty(&v));
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
