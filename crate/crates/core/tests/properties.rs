use proptest::prelude::*;

use warmsim::coupling::{marginal_tv, Binning, CouplingOutcome, TVCurve};
use warmsim::hazard::{GeneralizedIntensity, RateFn};
use warmsim::kernel::{simulate, IntensityField, IntensitySlot, PhaseTag, SwitchingPolicy, SystemState};
use warmsim::oracles::{ctmc_stationary, ctmc_transient, CtmcSpec};
use warmsim::rng::{replicate, substream, with_threads};

fn rate_fn() -> impl Strategy<Value = RateFn> {
    prop_oneof![
        (0.05f64..5.0).prop_map(RateFn::constant),
        (0.5f64..6.0).prop_map(RateFn::hyperbolic),
        (0.3f64..3.0, 0.2f64..4.0).prop_map(|(shape, scale)| RateFn::Weibull { shape, scale }),
        prop::collection::vec(0.0f64..4.0, 1..4).prop_map(|mut rates| {
            rates.push(1.0);
            let breakpoints = (0..rates.len()).map(|i| i as f64 * 0.7).collect();
            RateFn::Piecewise { breakpoints, rates }
        }),
    ]
}

/// Jump masses as fractions of the survival left before each location.
fn jumps() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.1f64..3.0, 0.01f64..0.9), 0..4).prop_map(|mut v| {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-3);
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn cdf_is_monotone_and_bounded(rate in rate_fn(), fractions in jumps()) {
        let base = GeneralizedIntensity::continuous(rate.clone()).unwrap();
        let mut kept = 1.0;
        let mut masses = Vec::new();
        for &(a, f) in &fractions {
            masses.push((a, f * kept * base.survival(a).unwrap()));
            kept *= 1.0 - f;
        }
        let gi = GeneralizedIntensity::from_jumps(&masses, rate).unwrap();
        let mut prev = 0.0;
        for i in 0..200 {
            let s = i as f64 * 0.05;
            let f = gi.eval_cdf(s).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!(f >= prev - 1e-15);
            prop_assert!(gi.eval_cdf_left(s).unwrap() <= f + 1e-15);
            prev = f;
        }
    }

    #[test]
    fn jump_masses_round_trip(fractions in jumps(), lambda in 0.0f64..2.0) {
        let rate = if lambda == 0.0 { RateFn::Zero } else { RateFn::constant(lambda) };
        let mut survival_left = 1.0;
        let mut prev = 0.0;
        let mut jumps = Vec::new();
        for &(a, f) in &fractions {
            survival_left *= (-(lambda * (a - prev))).exp();
            let mass = f * survival_left;
            jumps.push((a, mass));
            survival_left -= mass;
            prev = a;
        }
        let gi = GeneralizedIntensity::from_jumps(&jumps, rate).unwrap();
        for &(a, mass) in &jumps {
            let jump = gi.eval_cdf(a).unwrap() - gi.eval_cdf_left(a).unwrap();
            prop_assert!((jump - mass).abs() < 1e-12, "at {a}: {jump} vs {mass}");
        }
    }

    #[test]
    fn envelopes_order_distribution_functions(lo in 0.1f64..2.0, gap in 0.0f64..2.0, frac in 0.0f64..1.0) {
        let hi = lo + gap;
        let mid = lo + frac * gap;
        let phi = GeneralizedIntensity::exponential(lo);
        let q = GeneralizedIntensity::exponential(hi);
        let f = GeneralizedIntensity::continuous(RateFn::hyperbolic(mid)).unwrap();
        let g = GeneralizedIntensity::continuous(RateFn::custom(move |s| mid.max(lo / (1.0 + s)))).unwrap();
        for i in 0..50 {
            let s = i as f64 * 0.2;
            let (pf, pq) = (phi.eval_cdf(s).unwrap(), q.eval_cdf(s).unwrap());
            let m = GeneralizedIntensity::exponential(mid).eval_cdf(s).unwrap();
            prop_assert!(pf <= m + 1e-12 && m <= pq + 1e-12);
            // a hazard below Q everywhere gives a d.f. below G
            prop_assert!(f.eval_cdf(s).unwrap() <= pq + 1e-9);
            prop_assert!(g.eval_cdf(s).unwrap() >= pf - 1e-9);
        }
    }

    #[test]
    fn coupling_curve_is_monotone(taus in prop::collection::vec(prop::option::of(0.0f64..10.0), 1..200)) {
        let outcomes: Vec<CouplingOutcome> =
            taus.iter().map(|&tau| CouplingOutcome { tau, horizon: 10.0, seed: String::new() }).collect();
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let curve = TVCurve::from_outcomes(&outcomes, &grid).unwrap();
        prop_assert!(curve.bound.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(curve.bound.iter().all(|b| (0.0..=1.0).contains(b)));
    }

    #[test]
    fn transient_law_is_a_distribution(rates in prop::array::uniform4(0.01f64..3.0), t in 0.0f64..20.0) {
        let spec = CtmcSpec::independent([rates[0], rates[1]], [rates[2], rates[3]]).unwrap();
        let p = ctmc_transient(&spec, [1.0, 0.0, 0.0, 0.0], t).unwrap();
        prop_assert!(p.iter().all(|&x| x >= -1e-12));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let pi = ctmc_stationary(&spec).unwrap();
        let far = ctmc_transient(&spec, [0.0, 0.0, 0.0, 1.0], 400.0).unwrap();
        for k in 0..4 {
            prop_assert!((far[k] - pi[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn trajectories_replay_their_events(seed in any::<u64>(), gamma in 1.5f64..4.0) {
        let field = IntensityField::symmetric(
            IntensitySlot::new(GeneralizedIntensity::continuous(RateFn::hyperbolic(gamma)).unwrap()),
            IntensitySlot::new(GeneralizedIntensity::exponential(1.0)),
        ).unwrap();
        let delay = GeneralizedIntensity::new(RateFn::constant(4.0), vec![], Some(0.3)).unwrap();
        let policy = SwitchingPolicy::new(delay.clone(), delay, 0.3).unwrap();
        let tr = simulate(&SystemState::both_working(), &field, &policy, 30.0, &mut substream(seed, 0)).unwrap();
        let mut last = 0.0;
        for e in tr.events() {
            prop_assert!(e.wall_time >= last && e.wall_time <= 30.0);
            prop_assert!(e.delay <= 0.3);
            last = e.wall_time;
            let s = tr.state_at(e.wall_time).unwrap();
            prop_assert!(s.validate(0.3).is_ok());
        }
        let occ = tr.status_occupancy(0.0);
        prop_assert!((occ.iter().sum::<f64>() - 30.0).abs() < 1e-9);
    }

    #[test]
    fn marginal_tv_is_a_symmetric_distance(seed in any::<u64>(), n in 1usize..60) {
        let field = IntensityField::constant(1.0, 2.0).unwrap();
        let policy = SwitchingPolicy::instantaneous();
        let draw = |start: SystemState, stream: u64| -> Vec<SystemState> {
            (0..n).map(|i| {
                let tr = simulate(&start, &field, &policy, 1.5, &mut substream(seed ^ stream, i as u64)).unwrap();
                tr.state_at(1.5).unwrap()
            }).collect()
        };
        let a = draw(SystemState::both_working(), 1);
        let b = draw(SystemState::both_under_repair(), 2);
        let bins = Binning::new(vec![0.5, 1.0]);
        let ab = marginal_tv(&a, &b, &bins).unwrap();
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, marginal_tv(&b, &a, &bins).unwrap());
        prop_assert_eq!(marginal_tv(&a, &a, &bins).unwrap(), 0.0);
    }
}

#[test]
fn replication_results_ignore_thread_count() {
    let field = IntensityField::constant(1.0, 1.0).unwrap();
    let policy = SwitchingPolicy::instantaneous();
    let run = |threads| {
        with_threads(threads, || {
            replicate(64, 5, |_, rng| {
                Ok(simulate(&SystemState::both_working(), &field, &policy, 50.0, rng)?
                    .events()
                    .to_vec())
            })
        })
        .unwrap()
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn switching_phases_only_follow_their_statuses() {
    let field = IntensityField::constant(2.0, 1.0).unwrap();
    let delay = GeneralizedIntensity::new(RateFn::constant(2.0), vec![], Some(0.5)).unwrap();
    let policy = SwitchingPolicy::new(delay.clone(), delay, 0.5).unwrap();
    let tr = simulate(
        &SystemState::both_working(),
        &field,
        &policy,
        200.0,
        &mut substream(9, 9),
    )
    .unwrap();
    for e in tr.events() {
        let ok = matches!(
            (e.from, e.to),
            (PhaseTag::Working, PhaseTag::SwitchingToRepair)
                | (PhaseTag::SwitchingToRepair, PhaseTag::UnderRepair)
                | (PhaseTag::UnderRepair, PhaseTag::SwitchingToWork)
                | (PhaseTag::SwitchingToWork, PhaseTag::Working)
        );
        assert!(ok, "{e:?}");
    }
}
