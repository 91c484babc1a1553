use forwarder_aoi::models::stationary_closed_form;
use forwarder_aoi::shs::{
    age_balance_residual, solve_age_balance, stationary_distribution, AgeProcess, RateSymbol,
    ResetMap, ShsModel, Transition,
};
use forwarder_aoi::{analyze, build_model, delivery_probability, PrimitiveKind, RateParams};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = RateParams> {
    (0.001f64..=0.1, 0.1f64..=20.0, 0.5f64..=20.0)
        .prop_map(|(r, b, s)| RateParams::normalized(r, b, s).unwrap())
}

fn kind() -> impl Strategy<Value = PrimitiveKind> {
    prop::sample::select(PrimitiveKind::ALL.to_vec())
}

fn process() -> impl Strategy<Value = AgeProcess> {
    prop_oneof![Just(AgeProcess::Location), Just(AgeProcess::App)]
}

fn ages(kind: PrimitiveKind, p: &RateParams) -> (f64, f64) {
    let a = analyze(kind, p).unwrap();
    (a.age_location(), a.age_app())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn stationary_is_a_distribution(kind in kind(), p in params()) {
        let pi = stationary_distribution(&build_model(kind), &p).unwrap();
        prop_assert!((pi.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(pi.pi.iter().all(|&x| x > 0.0));
        prop_assert!(pi.residual < 1e-10);
    }

    #[test]
    fn closed_forms_match_numeric(kind in kind(), p in params()) {
        let numeric = stationary_distribution(&build_model(kind), &p).unwrap();
        let closed = stationary_closed_form(kind.primitive, &p).unwrap();
        for (a, b) in numeric.pi.iter().zip(&closed.pi) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn age_solution_balances(kind in kind(), proc_ in process(), p in params()) {
        let model = build_model(kind);
        let pi = stationary_distribution(&model, &p).unwrap();
        let sol = solve_age_balance(&model, &p, &pi, proc_).unwrap();
        let recomputed = age_balance_residual(&model, &p, &pi.pi, proc_, &sol.v_bar);
        prop_assert!(recomputed < 1e-9, "residual {recomputed}");
        prop_assert!(sol.v_bar.iter().flatten().all(|&v| v >= -1e-9));
        prop_assert!(sol.average_age > 0.0);
    }

    #[test]
    fn rate_scaling(kind in kind(), p in params(), c in 0.01f64..100.0) {
        let a = analyze(kind, &p).unwrap();
        let b = analyze(kind, &p.scaled(c).unwrap()).unwrap();
        for (x, y) in a.stationary.pi.iter().zip(&b.stationary.pi) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in [(a.age_app(), b.age_app()), (a.age_location(), b.age_location())] {
            prop_assert!((x / c - y).abs() <= 1e-9 * y, "{x} / {c} vs {y}");
        }
    }

    #[test]
    fn identity_self_loops_change_nothing(
        kind in kind(),
        p in params(),
        state in 0usize..5,
        rate in prop::sample::select(RateSymbol::ALL.to_vec()),
    ) {
        let model = build_model(kind);
        let mut padded: ShsModel = model.clone();
        padded.transitions.push(Transition {
            id: 99,
            from: state,
            to: state,
            rate,
            reset_app: ResetMap::IDENTITY,
            reset_loc: ResetMap::IDENTITY,
        });
        let pi = stationary_distribution(&model, &p).unwrap();
        let pi2 = stationary_distribution(&padded, &p).unwrap();
        for process in [AgeProcess::Location, AgeProcess::App] {
            let x = solve_age_balance(&model, &p, &pi, process).unwrap().average_age;
            let y = solve_age_balance(&padded, &p, &pi2, process).unwrap().average_age;
            prop_assert!((x - y).abs() <= 1e-10 * x);
        }
    }

    #[test]
    fn delivery_decreases_with_write_load(
        kind in prop::sample::select(vec![PrimitiveKind::RCU_P, PrimitiveKind::RWL_P]),
        r in 0.001f64..0.1,
        dr in 0.001f64..0.1,
        b in 0.1f64..20.0,
        s in 0.5f64..20.0,
    ) {
        let lo = delivery_probability(kind, &RateParams::normalized(r, b, s).unwrap()).unwrap();
        let hi = delivery_probability(kind, &RateParams::normalized(r + dr, b, s).unwrap()).unwrap();
        prop_assert!(0.0 < hi.value && hi.value < lo.value && lo.value < 1.0);
    }

    #[test]
    fn preemption_never_hurts(
        primitive in prop::sample::select(vec![PrimitiveKind::RCU_P, PrimitiveKind::RWL_P]),
        p in params(),
    ) {
        let np = PrimitiveKind { preemptive: false, ..primitive };
        prop_assert!(ages(primitive, &p).1 <= ages(np, &p).1 * (1.0 + 1e-12));
        // reader preemption leaves the FIB untouched
        prop_assert!((ages(primitive, &p).0 - ages(np, &p).0).abs() <= 1e-9 * ages(np, &p).0);
    }

    #[test]
    fn faster_reads_never_age_the_app(
        kind in kind(),
        r in 0.001f64..0.1,
        b in 0.1f64..20.0,
        s in 0.5f64..20.0,
        ds in 0.01f64..10.0,
    ) {
        let slow = ages(kind, &RateParams::normalized(r, b, s).unwrap()).1;
        let fast = ages(kind, &RateParams::normalized(r, b, s + ds).unwrap()).1;
        prop_assert!(fast <= slow * (1.0 + 1e-12), "{slow} -> {fast}");
    }

    #[test]
    fn reset_maps_keep_ages_nonnegative(bits in prop::array::uniform4(0u8..=1), x0 in 0.0f64..1e6, x1 in 0.0f64..1e6) {
        let map = ResetMap([[bits[0], bits[1]], [bits[2], bits[3]]]);
        let y = map.apply([x0, x1]);
        prop_assert!(y[0] >= 0.0 && y[1] >= 0.0);
    }
}

#[test]
fn tables_round_trip_through_text() {
    for kind in PrimitiveKind::ALL {
        let model = build_model(kind);
        assert_eq!(ShsModel::from_table(&model.to_table()).unwrap(), model);
    }
}
