//! Property-based invariants across the public API.

use advmc::attack::{synthesize_attack, Method, OptimizerOptions};
use advmc::case_studies::zeroconf;
use advmc::model::{apply_perturbation, Dtmc};
use advmc::parametric::{rational, Polynomial};
use advmc::property::{parse_property, sat_prob};
use advmc::threat::{feasible, project_box_sum, ThreatKind, ThreatModel};
use approx::assert_abs_diff_eq;
use proptest::prelude::*;

const NVARS: usize = 3;

fn polynomial() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((prop::collection::vec(0u32..3, NVARS), -5i32..=5), 0..5).prop_map(
        |terms| {
            Polynomial::from_terms(
                NVARS,
                terms
                    .into_iter()
                    .map(|(e, c)| (e, rational(c as f64 / 4.0))),
            )
        },
    )
}

fn stochastic_matrix(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0u32..5, n), n).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(s, mut w)| {
                if w.iter().all(|&x| x == 0) {
                    w[s] = 1;
                }
                let total: u32 = w.iter().sum();
                w.iter().map(|&x| x as f64 / total as f64).collect()
            })
            .collect()
    })
}

fn chain() -> impl Strategy<Value = Dtmc> {
    (2usize..=5).prop_flat_map(|n| {
        (
            stochastic_matrix(n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(move |(m, goal)| {
                let states: Vec<usize> = (0..n).filter(|&s| goal[s]).collect();
                Dtmc::from_dense(0, &m)
                    .unwrap()
                    .with_atom("goal", &states)
                    .unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn polynomial_ring_laws(a in polynomial(), b in polynomial(), c in polynomial()) {
        prop_assert_eq!(&a + &b, &b + &a);
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
        prop_assert!((&a - &a).is_zero());
    }

    #[test]
    fn derivative_product_rule(a in polynomial(), b in polynomial(), i in 0..NVARS) {
        let lhs = (&a * &b).derivative(i);
        let rhs = &(&a.derivative(i) * &b) + &(&a * &b.derivative(i));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn evaluation_is_a_homomorphism(a in polynomial(), b in polynomial(), x in prop::array::uniform3(-1.0f64..1.0)) {
        let (fa, fb) = (a.instantiate(&x).unwrap(), b.instantiate(&x).unwrap());
        assert_abs_diff_eq!((&a * &b).instantiate(&x).unwrap(), fa * fb, epsilon = 1e-9);
        assert_abs_diff_eq!((&a + &b).instantiate(&x).unwrap(), fa + fb, epsilon = 1e-9);
    }

    #[test]
    fn projection_lands_in_the_slice(
        cells in prop::collection::vec((0.0f64..1.0, 0.0f64..0.5, -2.0f64..2.0), 1..8),
        frac in 0.0f64..=1.0,
    ) {
        let l: Vec<f64> = cells.iter().map(|c| c.0 - c.1).collect();
        let u: Vec<f64> = cells.iter().map(|c| c.0 + c.1).collect();
        let y: Vec<f64> = cells.iter().map(|c| c.2).collect();
        let (lo, hi): (f64, f64) = (l.iter().sum(), u.iter().sum());
        let target = lo + frac * (hi - lo);
        let v = project_box_sum(&y, &l, &u, target).unwrap();
        prop_assert!((v.iter().sum::<f64>() - target).abs() < 1e-9);
        for i in 0..v.len() {
            prop_assert!(v[i] >= l[i] - 1e-12 && v[i] <= u[i] + 1e-12);
        }
        let again = project_box_sum(&v, &l, &u, target).unwrap();
        for i in 0..v.len() {
            prop_assert!((again[i] - v[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn reachability_grows_with_the_bound(m in chain()) {
        let mut prev = 0.0;
        for k in 0..12 {
            let p = sat_prob(&m, &parse_property(&format!("P=? [ F<={k} goal ]")).unwrap()).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(p >= prev - 1e-12);
            prev = p;
        }
        let limit = sat_prob(&m, &parse_property("P=? [ F goal ]").unwrap()).unwrap();
        prop_assert!(limit >= prev - 1e-12);
    }

    #[test]
    fn globally_is_the_dual_of_eventually(m in chain(), k in 0u32..8) {
        let g = sat_prob(&m, &parse_property(&format!("P=? [ G<={k} !goal ]")).unwrap()).unwrap();
        let f = sat_prob(&m, &parse_property(&format!("P=? [ F<={k} goal ]")).unwrap()).unwrap();
        assert_abs_diff_eq!(g + f, 1.0, epsilon = 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn attacks_are_feasible_and_never_help(m in chain(), eps in 0.0f64..0.3, kind in 0usize..4) {
        let kind = ThreatKind::ALL[kind];
        let tm = if kind.selects_states() {
            ThreatModel::states(kind, eps, 0..m.n()).unwrap()
        } else {
            let cells: Vec<_> = (0..m.n()).flat_map(|s| (0..m.n()).map(move |t| (s, t))).collect();
            ThreatModel::transitions(kind, eps, cells).unwrap()
        };
        let phi = parse_property("P=? [ F<=6 goal ]").unwrap();
        let r = synthesize_attack(&m, &tm, &phi, Method::Direct, &OptimizerOptions::default()).unwrap();
        prop_assert!(feasible(&m, &tm, &r.x_star));
        prop_assert!(r.pr_perturbed <= r.pr_original);
        prop_assert!(r.delta_star >= 0.0);
        let replay = sat_prob(&apply_perturbation(&m, &r.x_star).unwrap(), &phi).unwrap();
        assert_abs_diff_eq!(replay, r.pr_perturbed, epsilon = 1e-12);
    }
}

#[test]
fn early_zeroconf_states_are_more_exposed() {
    let m = zeroconf(10, 50_000, 65_024, 0.5).unwrap();
    let phi = parse_property("P=? [ F<=30 succ ]").unwrap();
    let opts = OptimizerOptions::default();
    for eps in [0.05, 0.1, 0.2, 0.3] {
        let d = |states: std::ops::RangeInclusive<usize>| {
            let tm = ThreatModel::states(ThreatKind::Spss, eps, states).unwrap();
            synthesize_attack(&m, &tm, &phi, Method::Direct, &opts)
                .unwrap()
                .delta_star
        };
        let (early, late) = (d(1..=5), d(6..=10));
        assert!(early >= late, "ε={eps}: early {early} late {late}");
    }
}
