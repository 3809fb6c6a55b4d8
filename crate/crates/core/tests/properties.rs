use std::sync::{Arc, OnceLock};

use num_rational::BigRational;
use proptest::prelude::*;
use serde_json::json;

use topofilter::filter::{enumerate_filters, filter_leq, point_filter, pushforward};
use topofilter::flows::Flow;
use topofilter::graded::{check_graded_axioms, convex_combine, GradedFilter, Grades, Weights};
use topofilter::io::{ingest_str, topology_document, Ingested, IngestOptions};
use topofilter::metric::{check_bound, v_plus_contains, ConeGenerator};
use topofilter::pair::{compose_sets, transpose};
use topofilter::report::{CheckRecord, RunConfig, SuiteReport};
use topofilter::snowflake::snowflake_distance;
use topofilter::topology::{continuous_maps, enumerate_topologies, validate_topology, FiniteTopology};

fn universe() -> &'static Vec<Arc<FiniteTopology>> {
    static ALL: OnceLock<Vec<Arc<FiniteTopology>>> = OnceLock::new();
    ALL.get_or_init(|| (1..=3).flat_map(|n| enumerate_topologies(n, false).unwrap()).map(Arc::new).collect())
}

fn topology() -> impl Strategy<Value = Arc<FiniteTopology>> {
    (0..universe().len()).prop_map(|i| universe()[i].clone())
}

fn unit2() -> impl Strategy<Value = Vec<f64>> {
    (0.0..std::f64::consts::TAU).prop_map(|a: f64| vec![a.cos(), a.sin()])
}

fn point2() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn validation_is_idempotent(t in topology()) {
        let again = validate_topology(t.n(), &t.opens_as_lists()).unwrap();
        prop_assert_eq!(&again, t.as_ref());
    }

    #[test]
    fn topology_documents_round_trip(t in topology()) {
        let text = topology_document(&t).to_string();
        match ingest_str(&text, None, IngestOptions::default()).unwrap() {
            Ingested::Topology(back) => prop_assert_eq!(back.as_ref(), t.as_ref()),
            other => prop_assert!(false, "decoded a {}", other.kind()),
        }
    }

    #[test]
    fn point_filters_injective_iff_t0(t in topology()) {
        let filters: Vec<_> = (0..t.n()).map(|x| point_filter(&t, x).unwrap()).collect();
        let injective = (0..t.n()).all(|x| (0..x).all(|y| filters[x] != filters[y]));
        prop_assert_eq!(injective, t.is_t0());
    }

    #[test]
    fn filter_order_is_partial(t in topology(), i in any::<prop::sample::Index>(), j in any::<prop::sample::Index>(), k in any::<prop::sample::Index>()) {
        let fs = enumerate_filters(&t, false).unwrap();
        let (a, b, c) = (&fs[i.index(fs.len())], &fs[j.index(fs.len())], &fs[k.index(fs.len())]);
        let leq = |x, y| filter_leq(x, y).unwrap();
        prop_assert!(leq(a, a));
        if leq(a, b) && leq(b, a) {
            prop_assert_eq!(a, b);
        }
        if leq(a, b) && leq(b, c) {
            prop_assert!(leq(a, c));
        }
    }

    #[test]
    fn pushforward_is_functorial(s in topology(), t in topology(), u in topology(), i in any::<prop::sample::Index>(), j in any::<prop::sample::Index>()) {
        let fs = continuous_maps(&s, &t);
        let gs = continuous_maps(&t, &u);
        let (f, g) = (&fs[i.index(fs.len())], &gs[j.index(gs.len())]);
        let gf = f.then(g).unwrap();
        for mu in enumerate_filters(&s, true).unwrap() {
            let once = pushforward(&gf, &mu).unwrap();
            let twice = pushforward(g, &pushforward(f, &mu).unwrap()).unwrap();
            prop_assert_eq!(once, twice);
        }
        for x in 0..s.n() {
            prop_assert_eq!(pushforward(f, &point_filter(&s, x).unwrap()).unwrap(), point_filter(&t, f.apply(x)).unwrap());
        }
    }

    #[test]
    fn convex_combinations_stay_graded(t in topology(), w in prop::collection::vec(0u32..10, 1..4)) {
        prop_assume!(w.iter().any(|&a| a > 0));
        let fs = enumerate_filters(&t, true).unwrap();
        let picked: Vec<GradedFilter> = w.iter().enumerate().map(|(k, _)| GradedFilter::from_indicator(&fs[k % fs.len()])).collect();
        let total: u32 = w.iter().sum();
        let weights = Weights::Exact(w.iter().map(|&a| BigRational::new(a.into(), total.into())).collect());
        let mixed = convex_combine(&picked, &weights, true).unwrap();
        let Grades::Exact(values) = mixed.values() else { panic!("exact inputs give exact output") };
        prop_assert!(check_graded_axioms(t.clone(), Grades::Exact(values.clone()), true).is_ok());
    }

    #[test]
    fn relation_composition_laws(n in 1usize..=3, r in any::<u64>(), s in any::<u64>(), q in any::<u64>()) {
        let m = (1u64 << (n * n)) - 1;
        let (r, s, q) = (r & m, s & m, q & m);
        prop_assert_eq!(compose_sets(n, compose_sets(n, r, s), q), compose_sets(n, r, compose_sets(n, s, q)));
        prop_assert_eq!(transpose(n, compose_sets(n, r, s)), compose_sets(n, transpose(n, s), transpose(n, r)));
        prop_assert_eq!(transpose(n, transpose(n, r)), r);
    }

    #[test]
    fn snowflake_is_a_metric(m in 2u32..=4, x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64) {
        let d = |a, b| snowflake_distance(m, a, b);
        prop_assert_eq!(d(x, x), 0.0);
        prop_assert_eq!(d(x, y), d(y, x));
        prop_assert!(x == y || d(x, y) > 0.0);
        prop_assert!(d(x, z) <= d(x, y) + d(y, z) + 1e-12);
    }

    #[test]
    fn cones_grow_with_parameters(x in point2(), u in unit2(), y in point2(), e in 0.01..1.0f64, s in 0.01..0.9f64, de in 0.0..1.0f64, ds in 0.0..0.09f64) {
        let small = ConeGenerator::new(x.clone(), u.clone(), e, s).unwrap();
        let large = ConeGenerator::new(x, u, e + de, s + ds).unwrap();
        prop_assert!(!v_plus_contains(&small, &y) || v_plus_contains(&large, &y));
    }

    #[test]
    fn bound_follows_from_membership(x in point2(), c in point2(), dir in unit2(), mu in 0.01..0.99f64, r in 0.0..1.0f64) {
        let d = topofilter::metric::dist(&x, &c);
        prop_assume!(d > 1e-6);
        let y = topofilter::metric::axpy(&c, r * mu * d / (1.0 + mu), &dir);
        prop_assert_eq!(check_bound(&x, &c, &y, mu), Ok(true));
    }

    #[test]
    fn flows_form_local_groups(s in -0.5..0.5f64, t in -0.5..0.5f64, x in point2(), omega in -2.0..2.0f64) {
        for flow in [Flow::rotation(omega).unwrap(), Flow::scaling(omega, 2).unwrap(), Flow::translation(vec![omega, 1.0]).unwrap()] {
            let a = flow.eval(s, &flow.eval(t, &x).unwrap()).unwrap();
            let b = flow.eval(s + t, &x).unwrap();
            prop_assert!(topofilter::metric::dist(&a, &b) <= 1e-9 * (1.0 + topofilter::metric::norm(&b)));
            prop_assert!(topofilter::metric::dist(&flow.eval(0.0, &x).unwrap(), &x) <= 1e-15);
        }
    }

    #[test]
    fn reports_round_trip(seed in any::<u64>(), values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..6), verdict in 0u8..3) {
        let details = json!({ "values": values });
        let rec = match verdict {
            0 => CheckRecord::pass("a", "def:dfilta", details),
            1 => CheckRecord::fail("a", "def:dfilta", json!({ "values": values }), details),
            _ => CheckRecord::inconclusive("a", "def:dfilta", details),
        }.sampled(seed, values.len());
        let report = SuiteReport::new("x", RunConfig { seed, ..Default::default() }, vec![rec]);
        let text = report.to_json().unwrap();
        let back = SuiteReport::from_json(&text).unwrap();
        prop_assert_eq!(&back, &report);
        prop_assert_eq!(back.to_json().unwrap(), text);
    }
}
