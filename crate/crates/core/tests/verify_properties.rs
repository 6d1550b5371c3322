use ddcc_core::ambiguity::{MeanModel, MomentAmbiguity};
use ddcc_core::cantelli::{reformulate, tightness_witness};
use ddcc_core::game::{instantiate_bilinear, BilinearFamilyParams};
use ddcc_core::solver::{equilibrium_at, SolverConfig};
use ddcc_core::verify::{
    adversarial_distribution, monte_carlo_chance, verify_equilibrium, ChanceDistribution,
    LeaderCheck,
};
use proptest::prelude::*;

fn ambiguity() -> impl Strategy<Value = MomentAmbiguity> {
    (
        0.001f64..1.0,
        0.02f64..2.0,
        0.02f64..0.3,
        0.5f64..3.0,
        0.0f64..0.3,
        1e-3f64..0.5,
    )
        .prop_map(|(g1, extra, alpha, base, d, var)| {
            MomentAmbiguity::new(MeanModel::new(base, vec![d]), var, g1, g1.max(1.0) + extra, alpha)
                .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn certificate_monotone_in_eps(x in 0.0f64..8.0, eps in 0.0f64..50.0, extra in 0.0f64..50.0) {
        let g = instantiate_bilinear(&BilinearFamilyParams::three_follower_reference()).unwrap();
        let pt = equilibrium_at(&g, &[x], &SolverConfig::default()).unwrap();
        let tight = verify_equilibrium(&g, &pt.x_star, &pt.y_star, 51, eps, &LeaderCheck::Literal).unwrap();
        let loose = verify_equilibrium(&g, &pt.x_star, &pt.y_star, 51, eps + extra, &LeaderCheck::Literal).unwrap();
        prop_assert!(!tight.passed || loose.passed);
    }

    #[test]
    fn monte_carlo_reproducible(amb in ambiguity(), x in 0.0f64..8.0, frac in 0.3f64..1.0, seed in any::<u64>()) {
        let soc = reformulate(&amb, &[x], 20.0).unwrap();
        let y = frac * 20.0 / (soc.mean_at_x + soc.cone_slope());
        let law = adversarial_distribution(&amb, &[x], y, 20.0).unwrap();
        let a = monte_carlo_chance(&amb, &[x], y, 20.0, &law, 2000, seed).unwrap();
        let b = monte_carlo_chance(&amb, &[x], y, 20.0, &law, 2000, seed).unwrap();
        prop_assert_eq!(a.probability.to_bits(), b.probability.to_bits());
        prop_assert_eq!(a.satisfied, b.satisfied);
    }

    /// Laws inside the ambiguity set satisfy a cone-feasible constraint with
    /// frequency at least `1 - α`, up to sampling error.
    #[test]
    fn feasible_y_is_safe_under_admissible_laws(
        amb in ambiguity(),
        x in 0.0f64..8.0,
        frac in 0.5f64..1.0,
        shift in -1.0f64..1.0,
        var_frac in 0.05f64..1.0,
        lambda in 0.01f64..3.0,
        adversarial in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let budget = 20.0;
        let soc = reformulate(&amb, &[x], budget).unwrap();
        let y = frac * budget / (soc.mean_at_x + soc.cone_slope());
        let center = amb.mean_at(&[x]).unwrap();
        let law = if adversarial {
            adversarial_distribution(&amb, &[x], y, budget).unwrap()
        } else {
            // mean shift within sqrt(γ1·Σ), variance within the remaining budget
            let s = amb.variance();
            let delta = shift * (amb.gamma1() * s).sqrt();
            let var = var_frac * (amb.gamma2() * s - delta * delta);
            let w = tightness_witness(center + delta, var.sqrt(), lambda * s.sqrt()).unwrap();
            ChanceDistribution::TwoPoint(w)
        };
        let n = 100_000;
        let out = monte_carlo_chance(&amb, &[x], y, budget, &law, n, seed).unwrap();
        prop_assert!(out.moments_inside);
        let target = 1.0 - amb.alpha();
        let se = (target * (1.0 - target) / n as f64).sqrt();
        prop_assert!(out.probability >= target - 3.0 * se, "{} < {target}", out.probability);
    }
}
