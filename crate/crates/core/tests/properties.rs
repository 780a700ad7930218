use linqbae::bae;
use linqbae::feedback::{self, FeedbackNetwork, HamiltonianRule};
use linqbae::kalman::{self, KalmanCoSubsystem};
use linqbae::matcore::{
    self, delta, flat_adjoint, inf_norm, is_real, quadrature_blocks, rel_diff, sharp_adjoint, to_quadrature, CMatrix,
};
use linqbae::qnd;
use linqbae::random;
use linqbae::sme::{self, SimConfig};
use linqbae::xferfn::{self, Block};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flat_and_sharp_reverse_products(seed in any::<u64>(), r in 1usize..4, k in 1usize..4, l in 1usize..4) {
        let mut g = rng(seed);
        let a = random::ginibre(&mut g, 2 * r, 2 * k);
        let b = random::ginibre(&mut g, 2 * k, 2 * l);
        let ab = &a * &b;
        let flat = flat_adjoint(&b).unwrap() * flat_adjoint(&a).unwrap();
        prop_assert!(rel_diff(&flat_adjoint(&ab).unwrap(), &flat) < 1e-13);
        let sharp = sharp_adjoint(&b).unwrap() * sharp_adjoint(&a).unwrap();
        prop_assert!(rel_diff(&sharp_adjoint(&ab).unwrap(), &sharp) < 1e-13);
        prop_assert!(rel_diff(&flat_adjoint(&flat_adjoint(&a).unwrap()).unwrap(), &a) < 1e-14);
    }

    #[test]
    fn doubled_up_matrices_have_real_quadrature_images(seed in any::<u64>(), k in 1usize..4, r in 1usize..4) {
        let mut g = rng(seed);
        let (u, v) = (random::ginibre(&mut g, k, r), random::ginibre(&mut g, k, r));
        let x = delta(&u, &v).unwrap();
        let q = to_quadrature(&x).unwrap();
        prop_assert!(is_real(&q, 1e-14 * inf_norm(&x).max(1.0)));
        let closed = matcore::complexify(&quadrature_blocks(&u, &v).unwrap());
        prop_assert!(rel_diff(&q, &closed) < 1e-13);
    }

    #[test]
    fn quadrature_realization_is_real_and_conjugate(seed in any::<u64>(), n in 1usize..4, m in 1usize..4, w in 0.01f64..10.0) {
        let sys = random::system(&mut rng(seed), n, m);
        let quad = sys.quad_realization().unwrap();
        for x in [&quad.a, &quad.b, &quad.c, &quad.d] {
            prop_assert!(is_real(x, 1e-12 * inf_norm(x).max(1.0)));
        }
        let s = Complex64::new(0.0, w);
        let ac = xferfn::eval_tf(&sys.ac_realization(), s);
        let qd = xferfn::eval_tf(&quad, s);
        if let (Ok(ac), Ok(qd)) = (ac, qd) {
            prop_assert!(rel_diff(&to_quadrature(&ac).unwrap(), &qd) < 1e-9);
        }
    }

    #[test]
    fn frequency_response_is_bogoliubov(seed in any::<u64>(), n in 1usize..4, m in 1usize..4, w in 0.01f64..10.0) {
        let sys = random::system(&mut rng(seed), n, m);
        if let Ok(gs) = xferfn::eval_tf(&sys.ac_realization(), Complex64::new(0.0, w)) {
            let size = inf_norm(&gs).powi(2).max(1.0);
            let residual = inf_norm(&(flat_adjoint(&gs).unwrap() * &gs - CMatrix::identity(2 * m, 2 * m)));
            prop_assert!(residual <= 1e-9 * size, "residual {residual:e}");
        }
    }

    #[test]
    fn leading_markov_parameter_is_scattering(seed in any::<u64>(), n in 1usize..4, m in 1usize..4) {
        let sys = random::system(&mut rng(seed), n, m);
        let markov = xferfn::markov_params(&sys.ac_realization(), 2);
        prop_assert!(rel_diff(&markov[0], &sys.scattering_doubled()) < 1e-14);
    }

    #[test]
    fn commutator_forms_agree(seed in any::<u64>(), n in 1usize..4, m in 1usize..4, equal in any::<bool>()) {
        let mut g = rng(seed);
        let sys = if equal {
            // C₋ = C₊ with Ω₋ = Ω₊ real commutes by construction.
            let cm = random::ginibre(&mut g, m, n);
            let om = matcore::complexify(&random::real_symmetric(&mut g, n));
            linqbae::QuantumLinearSystem::new(linqbae::SystemParams {
                s: random::unitary(&mut g, m),
                c_minus: cm.clone(),
                c_plus: cm,
                omega_minus: om.clone(),
                omega_plus: om,
            })
            .unwrap()
        } else {
            random::system(&mut g, n, m)
        };
        let verdict = qnd::qnd_interaction(&sys, 1e-10).unwrap();
        prop_assert_eq!(verdict.holds, equal);
        prop_assert_eq!(verdict.comega_residual <= 1e-10 * verdict.scale, equal);
    }

    #[test]
    fn certified_pairs_match_pattern(seed in any::<u64>(), n in 1usize..3, m in 1usize..3) {
        let sys = random::system(&mut rng(seed), n, m);
        let report = bae::certify_bae(&sys, 1e-10).unwrap();
        for b in [Block::Qp, Block::Pq] {
            prop_assert_eq!(report.certified_pairs.contains(&b), report.pattern.is_zero(b));
        }
    }

    #[test]
    fn loop_closure_reduction_matches_interconnection(seed in any::<u64>(), n in 1usize..4, m1 in 1usize..3, m2 in 1usize..3) {
        let mut g = rng(seed);
        let plant = random::system(&mut g, n, m1 + m2);
        if let Ok(net) = FeedbackNetwork::new(plant, m1, random::unitary(&mut g, m2)) {
            let check = feedback::verify_reduction(&net, HamiltonianRule::LoopClosure, 1e-9).unwrap();
            prop_assert!(check.passes, "deviation {:e}", check.max_deviation);
            let p = feedback::reduced_params(&net, HamiltonianRule::LoopClosure).unwrap();
            prop_assert!(inf_norm(&(&p.omega_minus - p.omega_minus.adjoint())) < 1e-10 * inf_norm(&p.omega_minus).max(1.0));
            prop_assert!(inf_norm(&(&p.omega_plus - p.omega_plus.transpose())) < 1e-10 * inf_norm(&p.omega_plus).max(1.0));
        }
    }

    #[test]
    fn kalman_conditions_match_markov_blocks(seed in any::<u64>(), m in 1usize..4, r in 1usize..4, impose in 0usize..4) {
        let mut g = rng(seed);
        let gq = random::ginibre(&mut g, m, r);
        let mut gp = random::ginibre(&mut g, m, r);
        if impose & 1 == 1 {
            let re = matcore::real_part(&gq) * random::real_symmetric(&mut g, r);
            gp = matcore::complexify(&re) + matcore::complexify(&matcore::imag_part(&gp)) * matcore::I;
        }
        if impose & 2 == 2 {
            let im = matcore::imag_part(&gq) * random::real_symmetric(&mut g, r);
            gp = matcore::complexify(&matcore::real_part(&gp)) + matcore::complexify(&im) * matcore::I;
        }
        let k = KalmanCoSubsystem::from_gamma(gq, gp, None).unwrap();
        let verdict = kalman::check_kalman_bae(&k, 1e-10);
        prop_assert!(impose & 1 == 0 || verdict.q_wrt_p);
        prop_assert!(impose & 2 == 0 || verdict.p_wrt_q);
        let opts = xferfn::PatternOptions { markov_order: Some(4 * r + 1), ..Default::default() };
        let pattern = xferfn::block_pattern_with(&k.realization(), 1e-10, &opts).unwrap();
        prop_assert_eq!(verdict.q_wrt_p, pattern.is_zero(Block::Qp));
        prop_assert_eq!(verdict.p_wrt_q, pattern.is_zero(Block::Pq));
        prop_assert!(kalman::markov_identity_check(&k, 6, 1e-10).passes());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulation_is_reproducible_per_seed(seed in any::<u64>()) {
        let sys = random::system(&mut rng(seed), 1, 1);
        let ops = sme::build_truncated_operators(&sys, 4).unwrap();
        let mut rho = CMatrix::zeros(4, 4);
        rho[(0, 0)] = Complex64::new(1.0, 0.0);
        let cfg = SimConfig { dt: 1e-2, t_final: 0.2, n_traj: 6, seed, checkpoints: 4 };
        let tracked = [ops.q(0)];
        let a = sme::simulate_qsme(&ops, &rho, &cfg, &tracked).unwrap();
        let b = sme::simulate_qsme(&ops, &rho, &cfg, &tracked).unwrap();
        prop_assert_eq!(a.values, b.values);
    }
}
