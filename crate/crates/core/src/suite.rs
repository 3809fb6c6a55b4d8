//! Named verification suites. Each check is a deterministic function of the
//! run configuration; records come back in a fixed order.

use std::collections::BTreeSet;
use std::fmt::{Debug, Display};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;
use num_traits::Zero;
use serde_json::{json, Value};

use crate::filter::{
    check_filter_axioms, check_pushforward_continuity, check_refinement, check_support_properties, enumerate_filters, filter_leq, point_filter,
    pushforward, search_refinement, support, IndicatorFilter,
};
use crate::flows::{
    check_flow_conditions, check_flow_transport, lemacon_construct, pushforward_flow, step1_diagonal_check, step3_composition_check, ConditionsConfig,
    Flow, FlowConditionsReport, FlowError, RecipeConfig, Region, TransportConfig,
};
use crate::graded::b_polytope_vertices;
use crate::metric::curve::curve_filter;
use crate::metric::pairs::{check_metric_commutation, check_metric_uniformity, CommutationConfig};
use crate::metric::transport::TransportConfig as SequenceTransportConfig;
use crate::metric::{
    angle, axpy, check_bound, check_monotone, classify_sequence, dist, pair_directional_filter, ClassifyConfig, ConeGenerator, Curve, DirectionalFilter,
    MapSpec, PairDirectionalFilter, Sign,
};
use crate::pair::{check_uniformity, compose_filters, diagonal_filter, swap_pushforward, transpose, Commutation, PairFilter, PairSpace};
use crate::report::{CheckRecord, ReportError, RunConfig, SuiteReport, SUITES};
use crate::sampling::{derive_seed, par_failures, par_sample, point_in_ball, point_in_box, rng_for, uniform, unit_vector, SampleRng};
use crate::snowflake::{
    box_counting_dimension, check_poly_derivable, graph_embed, separate_polynomials, snowflake_distance, verify_separation, ArcMode, Axis, Polynomial,
    ScalarMap, Separation, SeparationConfig,
};
use crate::topology::{continuous_maps, enumerate_topologies, FiniteTopology, Mask, PointSet};

/// Largest point count for the exhaustive pair and pushforward sweeps.
const PAIR_POINTS: usize = 3;
/// Brute force over assignments is skipped above this many open sets.
const BRUTE_OPENS: usize = 10;

pub fn run_suite(name: &str, cfg: &RunConfig) -> Result<SuiteReport, ReportError> {
    cfg.validate()?;
    if !SUITES.contains(&name) {
        return Err(ReportError::UnknownSuite(name.into()));
    }
    let ctx = Ctx { cfg };
    let records = if name == "all" {
        SUITES[..SUITES.len() - 1].iter().flat_map(|s| run_named(&ctx, s)).collect()
    } else {
        run_named(&ctx, name)
    };
    let report = SuiteReport::new(name, cfg.clone(), records);
    report.validate()?;
    Ok(report)
}

fn run_named(ctx: &Ctx, name: &str) -> Vec<CheckRecord> {
    let mut records = match name {
        "finite-axioms" => finite_axioms(ctx),
        "finite-pushforward" => finite_pushforward(ctx),
        "pair-composition" => pair_composition(ctx),
        "cones" => cones(ctx),
        "derivative" => derivative(ctx),
        "snowflake" => snowflake(ctx),
        "flows" => flows(ctx),
        "trad2" => trad2(ctx),
        _ => unreachable!("suite names are checked by run_suite"),
    };
    for r in &mut records {
        r.id = format!("{name}/{}", r.id);
    }
    records
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
}

type Outcome = Result<CheckRecord, String>;

impl Ctx<'_> {
    fn seed(&self, id: &str) -> u64 {
        derive_seed(self.cfg.seed, id)
    }

    fn samples(&self, default: usize) -> usize {
        self.cfg.samples_or(default)
    }

    fn proper(&self) -> bool {
        !self.cfg.improper
    }

    /// Runs one check; errors become failures carrying the message.
    fn check(&self, id: &str, anchor: &str, f: impl FnOnce(u64) -> Outcome) -> CheckRecord {
        let start = Instant::now();
        let seed = self.seed(id);
        let mut r = match f(seed) {
            Ok(r) => r,
            Err(e) => CheckRecord::fail(id, anchor, json!({ "error": e }), Value::Null),
        };
        r.id = id.into();
        r.anchor = anchor.into();
        r.seed = seed;
        if self.cfg.timings {
            r.elapsed_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        }
        r
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or_else(|e| json!({ "unserializable": e.to_string() }))
}

fn debug<T: Debug>(v: &T) -> Value {
    Value::String(format!("{v:?}"))
}

fn err<E: Display>(e: E) -> String {
    e.to_string()
}

fn sets(masks: &[Mask]) -> Vec<Vec<usize>> {
    masks.iter().map(|&m| PointSet(m).indices()).collect()
}

/// Every family of subsets of `n` points that is a topology, by direct
/// closure checks.
fn brute_force_topologies(n: usize) -> BTreeSet<Vec<Mask>> {
    let subsets = 1usize << n;
    let full: Mask = (1 << n) - 1;
    let mut out = BTreeSet::new();
    for family in 0u64..(1u64 << subsets) {
        let has = |m: Mask| family >> m & 1 == 1;
        if !has(0) || !has(full) {
            continue;
        }
        let members: Vec<Mask> = (0..subsets as Mask).filter(|&m| has(m)).collect();
        if members.iter().all(|&a| members.iter().all(|&b| has(a | b) && has(a & b))) {
            out.insert(members);
        }
    }
    out
}

fn opens_of(t: &FiniteTopology) -> Vec<Mask> {
    let mut o = t.opens().to_vec();
    o.sort_unstable();
    o
}

fn all_topologies(max: usize, t0: bool) -> Result<Vec<Arc<FiniteTopology>>, String> {
    let mut out = Vec::new();
    for n in 0..=max {
        out.extend(enumerate_topologies(n, t0).map_err(err)?.into_iter().map(Arc::new));
    }
    Ok(out)
}

fn finite_axioms(ctx: &Ctx) -> Vec<CheckRecord> {
    let max = ctx.cfg.max_points;
    let proper = ctx.proper();
    let mut out = Vec::new();

    out.push(ctx.check("topology-enumeration", "def:finite-topology", |_| {
        let mut counts = Vec::new();
        for n in 0..=max {
            let listed: BTreeSet<Vec<Mask>> = enumerate_topologies(n, false).map_err(err)?.iter().map(opens_of).collect();
            let brute = brute_force_topologies(n);
            let t0 = enumerate_topologies(n, true).map_err(err)?.len();
            if listed != brute {
                let missing: Vec<_> = brute.difference(&listed).take(4).map(|f| sets(f)).collect();
                let extra: Vec<_> = listed.difference(&brute).take(4).map(|f| sets(f)).collect();
                return Ok(CheckRecord::fail("", "", json!({ "n": n, "missing": missing, "extra": extra }), json!({ "counts": counts })));
            }
            counts.push(json!({ "n": n, "families": 1u64 << (1 << n), "topologies": listed.len(), "t0": t0 }));
        }
        Ok(CheckRecord::pass("", "", json!({ "counts": counts })))
    }));

    out.push(ctx.check("filter-enumeration", "def:dfilta", |_| {
        let (mut topologies, mut filters, mut brute_forced) = (0, 0, 0);
        for t in all_topologies(max, false)? {
            let listed = enumerate_filters(&t, proper).map_err(err)?;
            topologies += 1;
            filters += listed.len();
            for mu in &listed {
                if let Err(e) = check_filter_axioms(t.clone(), mu.values().to_vec(), proper) {
                    return Ok(CheckRecord::fail("", "", json!({ "opens": t.opens_as_lists(), "support": sets(&support(mu)), "error": e.to_string() }), Value::Null));
                }
            }
            if t.num_opens() <= BRUTE_OPENS {
                brute_forced += 1;
                let k = t.num_opens();
                let brute: Vec<IndicatorFilter> = (0u32..1 << k)
                    .filter_map(|bits| check_filter_axioms(t.clone(), (0..k).map(|i| bits >> i & 1 == 1).collect(), proper).ok())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                if brute != listed {
                    return Ok(CheckRecord::fail(
                        "",
                        "",
                        json!({ "opens": t.opens_as_lists(), "enumerated": listed.len(), "brute_force": brute.len() }),
                        Value::Null,
                    ));
                }
            }
        }
        Ok(CheckRecord::pass("", "", json!({ "topologies": topologies, "filters": filters, "brute_forced": brute_forced, "proper": proper })))
    }));

    out.push(ctx.check("support-properties", "prop:prop23", |_| {
        let mut checked = 0usize;
        for t in all_topologies(max, false)? {
            let mut family = enumerate_filters(&t, proper).map_err(err)?;
            if proper {
                family.push(IndicatorFilter::principal(t.clone(), 0));
            }
            for mu in &family {
                checked += 1;
                let s = support(mu);
                if let Err(v) = check_support_properties(&t, &s) {
                    return Ok(CheckRecord::fail("", "", json!({ "opens": t.opens_as_lists(), "support": sets(&s), "violation": debug(&v) }), Value::Null));
                }
            }
        }
        Ok(CheckRecord::pass("", "", json!({ "supports": checked })))
    }));

    out.push(ctx.check("point-filters", "def:point-filter", |_| {
        let mut checked = 0usize;
        for t in all_topologies(max, false)? {
            let pts: Vec<IndicatorFilter> = (0..t.n()).map(|x| point_filter(&t, x)).collect::<Result<_, _>>().map_err(err)?;
            for p in &pts {
                check_filter_axioms(t.clone(), p.values().to_vec(), true).map_err(err)?;
            }
            let collision = (0..t.n()).flat_map(|x| (x + 1..t.n()).map(move |y| (x, y))).find(|&(x, y)| pts[x] == pts[y]);
            checked += 1;
            if collision.is_some() != t.t0_witness().is_some() {
                return Ok(CheckRecord::fail("", "", json!({ "opens": t.opens_as_lists(), "collision": collision, "t0_witness": t.t0_witness() }), Value::Null));
            }
        }
        Ok(CheckRecord::pass("", "", json!({ "topologies": checked })))
    }));

    out.push(ctx.check("sierpinski-filters", "def:dfilta", |_| {
        let t = Arc::new(FiniteTopology::sierpinski());
        let got = enumerate_filters(&t, true).map_err(err)?;
        let want = vec![point_filter(&t, 0).map_err(err)?, point_filter(&t, 1).map_err(err)?];
        let supports: Vec<_> = got.iter().map(|f| sets(&support(f))).collect();
        let a: BTreeSet<_> = got.iter().collect();
        let b: BTreeSet<_> = want.iter().collect();
        Ok(if a == b {
            CheckRecord::pass("", "", json!({ "supports": supports }))
        } else {
            CheckRecord::fail("", "", json!({ "supports": supports }), Value::Null)
        })
    }));

    out.push(ctx.check("b-polytope-vertices", "def:dfiltbc", |_| {
        let mut checked = Vec::new();
        for t in all_topologies(max.min(2), false)?.into_iter().chain([Arc::new(FiniteTopology::sierpinski())]) {
            let raw = b_polytope_vertices(&t, proper).map_err(err)?;
            let integral = raw.iter().all(|v| v.iter().all(|x| x.is_integer()));
            let vertices: BTreeSet<Vec<bool>> = raw.iter().map(|v| v.iter().map(|x| !x.is_zero()).collect()).collect();
            let filters: BTreeSet<Vec<bool>> = enumerate_filters(&t, proper).map_err(err)?.iter().map(|f| f.values().to_vec()).collect();
            checked.push(json!({ "opens": t.opens_as_lists(), "vertices": raw.len() }));
            if !integral || vertices != filters {
                let shown: Vec<Vec<String>> = raw.iter().map(|v| v.iter().map(|x| x.to_string()).collect()).collect();
                return Ok(CheckRecord::fail("", "", json!({ "opens": t.opens_as_lists(), "vertices": shown, "filters": filters.len() }), Value::Null));
            }
        }
        Ok(CheckRecord::pass("", "", json!({ "topologies": checked })))
    }));
    out
}

fn finite_pushforward(ctx: &Ctx) -> Vec<CheckRecord> {
    let max = ctx.cfg.max_points.min(PAIR_POINTS);
    let proper = ctx.proper();
    let mut out = Vec::new();

    out.push(ctx.check("continuity", "prop:prop26", |_| {
        let spaces = all_topologies(max, true)?;
        let (mut maps, mut opens) = (0usize, 0usize);
        for s in &spaces {
            for t in &spaces {
                for f in continuous_maps(s, t) {
                    let r = check_pushforward_continuity(&f, proper).map_err(err)?;
                    maps += 1;
                    opens += r.target_opens_checked;
                    if let Some(v) = r.counterexample {
                        return Ok(CheckRecord::fail(
                            "",
                            "",
                            json!({ "source": s.opens_as_lists(), "target": t.opens_as_lists(), "image": f.image(), "target_open": v }),
                            Value::Null,
                        ));
                    }
                }
            }
        }
        Ok(CheckRecord::pass("", "", json!({ "spaces": spaces.len(), "maps": maps, "target_opens": opens })))
    }));

    out.push(ctx.check("point-filters", "def:pushforward", |_| {
        let spaces = all_topologies(max, true)?;
        let mut maps = 0usize;
        for s in &spaces {
            for t in &spaces {
                for f in continuous_maps(s, t) {
                    maps += 1;
                    for x in 0..s.n() {
                        let pushed = pushforward(&f, &point_filter(s, x).map_err(err)?).map_err(err)?;
                        if pushed != point_filter(t, f.apply(x)).map_err(err)? {
                            return Ok(CheckRecord::fail("", "", json!({ "image": f.image(), "point": x }), Value::Null));
                        }
                    }
                    for mu in enumerate_filters(s, proper).map_err(err)? {
                        let pushed = pushforward(&f, &mu).map_err(err)?;
                        check_filter_axioms(t.clone(), pushed.values().to_vec(), proper).map_err(err)?;
                    }
                }
            }
        }
        Ok(CheckRecord::pass("", "", json!({ "maps": maps })))
    }));

    out.push(ctx.check("refinement-search", "def:def27", |_| {
        let mut admitting = 0usize;
        let mut total = 0usize;
        for t in all_topologies(ctx.cfg.max_points, true)? {
            total += 1;
            let search = search_refinement(&t, proper).map_err(err)?;
            let filters = enumerate_filters(&t, proper).map_err(err)?;
            for x in 0..t.n() {
                let px = point_filter(&t, x).map_err(err)?;
                let finer: Vec<&IndicatorFilter> = filters.iter().filter(|mu| **mu != px && filter_leq(&px, mu).unwrap_or(false)).collect();
                let listed: Vec<&IndicatorFilter> = search.candidates[x].iter().collect();
                if finer != listed {
                    return Ok(CheckRecord::fail("", "", json!({ "opens": t.opens_as_lists(), "point": x, "candidates": listed.len(), "finer": finer.len() }), Value::Null));
                }
            }
            if let Some(r) = search.maximal(&t) {
                admitting += 1;
                if let Err(v) = check_refinement(&r) {
                    return Ok(CheckRecord::fail("", "", json!({ "opens": t.opens_as_lists(), "violation": v.to_string() }), Value::Null));
                }
            }
        }
        Ok(CheckRecord::pass("", "", json!({ "t0_topologies": total, "admitting_refinement": admitting, "proper": proper })))
    }));
    out
}

/// `R∘S = {(x, z) : (x, y) ∈ R, (y, z) ∈ S}` from the pair lists.
fn relation_compose(n: usize, r: Mask, s: Mask) -> Mask {
    let mut out = 0;
    for x in 0..n {
        for y in 0..n {
            if r >> (x * n + y) & 1 == 0 {
                continue;
            }
            for z in 0..n {
                if s >> (y * n + z) & 1 == 1 {
                    out |= 1 << (x * n + z);
                }
            }
        }
    }
    out
}

fn principal_table(space: &PairSpace, k: Mask) -> Vec<bool> {
    space.square().opens().iter().map(|&d| k & !d == 0).collect()
}

fn pair_composition(ctx: &Ctx) -> Vec<CheckRecord> {
    let max = ctx.cfg.max_points.min(PAIR_POINTS);
    let mut out = Vec::new();

    out.push(ctx.check("compose-principal", "def:composition", |_| {
        let mut pairs = 0usize;
        for n in 1..=max {
            let space = PairSpace::new(Arc::new(FiniteTopology::discrete(n))).map_err(err)?;
            let rels = 1u64 << (n * n);
            for r in 0..rels {
                let mu = PairFilter::principal(space.clone(), r);
                for s in 0..rels {
                    let nu = PairFilter::principal(space.clone(), s);
                    let c = compose_filters(&mu, &nu).map_err(err)?;
                    pairs += 1;
                    if c.filter().values() != principal_table(&space, relation_compose(n, r, s)).as_slice() {
                        return Ok(CheckRecord::fail("", "", json!({ "n": n, "r": PointSet(r).indices(), "s": PointSet(s).indices() }), Value::Null));
                    }
                }
            }
        }
        Ok(CheckRecord::pass("", "", json!({ "relation_pairs": pairs })))
    }));

    out.push(ctx.check("swap-composition", "def:composition", |_| {
        let mut pairs = 0usize;
        for n in 1..=max {
            let space = PairSpace::new(Arc::new(FiniteTopology::discrete(n))).map_err(err)?;
            let rels = 1u64 << (n * n);
            let filters: Vec<PairFilter> = (0..rels).map(|r| PairFilter::principal(space.clone(), r)).collect();
            let swapped: Vec<PairFilter> = filters.iter().map(swap_pushforward).collect();
            for (r, mu) in filters.iter().enumerate() {
                if swapped[r].kernel() != transpose(n, r as Mask) {
                    return Ok(CheckRecord::fail("", "", json!({ "n": n, "r": PointSet(r as Mask).indices(), "swap": true }), Value::Null));
                }
                for (s, nu) in filters.iter().enumerate() {
                    pairs += 1;
                    let lhs = swap_pushforward(&compose_filters(mu, nu).map_err(err)?);
                    let rhs = compose_filters(&swapped[s], &swapped[r]).map_err(err)?;
                    if lhs != rhs {
                        return Ok(CheckRecord::fail("", "", json!({ "n": n, "r": PointSet(r as Mask).indices(), "s": PointSet(s as Mask).indices() }), Value::Null));
                    }
                }
            }
        }
        Ok(CheckRecord::pass("", "", json!({ "relation_pairs": pairs })))
    }));

    out.push(ctx.check("compose-literal", "def:composition", |_| {
        let mut pairs = 0usize;
        for t in all_topologies(max.min(2), true)? {
            let space = PairSpace::new(t).map_err(err)?;
            let filters = enumerate_filters(space.square(), false).map_err(err)?;
            let opens = space.square().opens().to_vec();
            let n = space.n();
            for mu in &filters {
                for nu in &filters {
                    pairs += 1;
                    let (sm, sn) = (support(mu), support(nu));
                    let literal: Vec<bool> = opens.iter().map(|&d| sm.iter().any(|&e| sn.iter().any(|&f| relation_compose(n, e, f) & !d == 0))).collect();
                    let a = PairFilter::new(space.clone(), mu.clone()).map_err(err)?;
                    let b = PairFilter::new(space.clone(), nu.clone()).map_err(err)?;
                    if compose_filters(&a, &b).map_err(err)?.filter().values() != literal.as_slice() {
                        return Ok(CheckRecord::fail("", "", json!({ "n": n, "mu": sets(&sm), "nu": sets(&sn) }), Value::Null));
                    }
                }
            }
        }
        Ok(CheckRecord::pass("", "", json!({ "filter_pairs": pairs })))
    }));

    out.push(ctx.check("discrete-diagonal-uniformity", "def:uniformity", |_| {
        for n in 1..=max {
            let space = PairSpace::new(Arc::new(FiniteTopology::discrete(n))).map_err(err)?;
            let r = check_uniformity(&diagonal_filter(&space));
            if !r.is_uniformity() {
                return Ok(CheckRecord::fail("", "", json!({ "n": n, "report": debug(&r) }), Value::Null));
            }
        }
        Ok(CheckRecord::pass("", "", json!({ "max_points": max })))
    }));

    out.push(ctx.check("metric-uniformity", "def:uniformity", |seed| {
        let samples = ctx.samples(10_000);
        let reports: Vec<_> = [2usize, 3].iter().map(|&d| check_metric_uniformity(d, samples, seed ^ d as u64, 2.0)).collect();
        let ok = reports.iter().all(|r| r.diagonal && r.half_composition && r.symmetric);
        let details = to_value(&reports);
        Ok(if ok { CheckRecord::pass("", "", details) } else { CheckRecord::fail("", "", details.clone(), details) }.sampled(seed, 2 * samples))
    }));

    out.push(ctx.check("directional-commutation", "prop:commute", |seed| {
        let samples = ctx.samples(2_000);
        let mut rng = rng_for(seed, u64::MAX);
        let mut unresolved = Vec::new();
        let pairs = 10;
        for k in 0..pairs {
            let (u, v) = (unit_vector(&mut rng, 2), unit_vector(&mut rng, 2));
            let mu = pair_directional_filter(u.clone()).map_err(err)?;
            let nu = pair_directional_filter(v.clone()).map_err(err)?;
            match check_metric_commutation(&mu, &nu, samples, derive_seed(seed, &k.to_string()), &CommutationConfig::default()).map_err(err)? {
                Commutation::Commute => {}
                Commutation::Inconclusive { unresolved: c, .. } => unresolved.push(json!({ "u": u, "v": v, "unresolved": c })),
                Commutation::Counterexample(w) => {
                    return Ok(CheckRecord::fail("", "", json!({ "u": u, "v": v, "chain": to_value(&w) }), Value::Null).sampled(seed, samples * pairs));
                }
            }
        }
        let details = json!({ "pairs": pairs, "unresolved": unresolved });
        Ok(if unresolved.is_empty() { CheckRecord::pass("", "", details) } else { CheckRecord::inconclusive("", "", details) }.sampled(seed, samples * pairs))
    }));
    out
}

fn cones(ctx: &Ctx) -> Vec<CheckRecord> {
    let mut out = Vec::new();

    out.push(ctx.check("bound-cone", "eq:bound", |seed| {
        let samples = ctx.samples(20_000);
        let (bad, w) = par_failures(samples, seed, 4, |rng, _| {
            let dim = if rng_bit(rng) { 2 } else { 3 };
            let x = point_in_box(rng, dim, 1.0);
            let u = unit_vector(rng, dim);
            let g = ConeGenerator::new(x.clone(), u, uniform(rng, 1e-3, 1.0), uniform(rng, 0.01, 0.99)).expect("valid parameters");
            let y = g.sample_member(rng);
            let (_, lambda) = g.witness(&y);
            let c = axpy(&x, lambda, g.u());
            match check_bound(&x, &c, &y, g.sigma()) {
                Ok(true) => None,
                other => Some(json!({ "x": x, "y": y, "lambda": lambda, "result": debug(&other) })),
            }
        });
        Ok(CheckRecord::from_witness("", "", (bad > 0).then(|| json!(w)), json!({ "violations": bad })).sampled(seed, samples))
    }));

    out.push(ctx.check("bound-curve", "eq:bound", |seed| {
        let samples = ctx.samples(4_000);
        let curves = [
            Curve::circle([0.0, 0.0], 1.0, -1.0, 1.0).map_err(err)?,
            Curve::line(vec![0.2, -0.1], vec![0.6, 0.8], -1.0, 1.0).map_err(err)?,
            Curve::new("parabola", -1.0, 1.0, |t| vec![t, 0.5 * t * t]).map_err(err)?,
        ];
        let filters: Vec<_> = curves.into_iter().map(|c| curve_filter(c, Sign::Plus)).collect::<Result<_, _>>().map_err(err)?;
        let (bad, w) = par_failures(samples, seed, 4, |rng, i| {
            let f = &filters[i % filters.len()];
            let (eps, mu) = (uniform(rng, 0.01, 0.9), uniform(rng, 0.05, 0.9));
            let lambda = uniform(rng, 0.0, eps);
            let x = f.base_point().to_vec();
            let c = f.curve().at(lambda);
            let r = mu * dist(&x, &c) / (1.0 + mu);
            let y = axpy(&c, 1.0, &point_in_ball(rng, 2, r));
            let Some((gap, lam)) = f.witness(eps, &y) else {
                return Some(json!({ "curve": f.curve().name(), "y": y, "reason": "arc estimate did not converge" }));
            };
            if !(gap < mu * dist(&x, &y)) {
                return Some(json!({ "curve": f.curve().name(), "y": y, "gap": gap, "reason": "sampled member rejected" }));
            }
            match check_bound(&x, &f.curve().at(lam), &y, mu) {
                Ok(true) => None,
                other => Some(json!({ "curve": f.curve().name(), "y": y, "lambda": lam, "result": debug(&other) })),
            }
        });
        Ok(CheckRecord::from_witness("", "", (bad > 0).then(|| json!(w)), json!({ "violations": bad })).sampled(seed, samples))
    }));

    out.push(ctx.check("envelope", "def:cone", |seed| {
        let samples = ctx.samples(10_000);
        let (bad, w) = par_failures(samples, seed, 4, |rng, _| {
            let g = ConeGenerator::new(point_in_box(rng, 2, 1.0), unit_vector(rng, 2), uniform(rng, 1e-3, 1.0), uniform(rng, 0.01, 0.99)).expect("valid");
            let y = g.sample_member(rng);
            (dist(g.x(), &y) >= g.envelope_radius()).then(|| json!({ "x": g.x(), "y": y, "radius": g.envelope_radius() }))
        });
        Ok(CheckRecord::from_witness("", "", (bad > 0).then(|| json!(w)), json!({ "violations": bad })).sampled(seed, samples))
    }));

    out.push(ctx.check("monotone", "def:cone", |seed| {
        let samples = ctx.samples(10_000);
        let f = DirectionalFilter { x: vec![0.1, -0.3], u: vec![0.6, 0.8] };
        let (bad, w) = check_monotone(&f, samples, seed, 1.0, |rng: &mut SampleRng, e| axpy(&f.x, 1.0, &point_in_ball(rng, 2, 2.0 * e)));
        Ok(CheckRecord::from_witness("", "", (bad > 0).then(|| debug(&w)), json!({ "violations": bad })).sampled(seed, samples))
    }));

    out.push(ctx.check("swap-direction", "prop:commute", |seed| {
        let samples = ctx.samples(10_000);
        let (bad, w) = par_failures(samples, seed, 4, |rng, _| {
            let f = PairDirectionalFilter { u: unit_vector(rng, 2) };
            let g = f.swapped();
            let (eps, s) = (uniform(rng, 0.01, 1.0), uniform(rng, 0.05, 0.95));
            let x = point_in_box(rng, 2, 1.0);
            let y = axpy(&x, 1.0, &point_in_ball(rng, 2, 2.0 * eps));
            (f.pair_contains(eps, s, &x, &y) != g.pair_contains(eps, s, &y, &x)).then(|| json!({ "u": f.u, "x": x, "y": y }))
        });
        Ok(CheckRecord::from_witness("", "", (bad > 0).then(|| json!(w)), json!({ "violations": bad })).sampled(seed, samples))
    }));
    out
}

fn rng_bit(rng: &mut SampleRng) -> bool {
    uniform(rng, 0.0, 1.0) < 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceClass {
    Directional,
    Undirected,
    Divergent,
}

/// A sequence of the given class converging (or not) to `x` along `u`.
pub fn labelled_sequence(rng: &mut SampleRng, class: SequenceClass, x: &[f64], u: &[f64], len: usize) -> Vec<Vec<f64>> {
    let dim = x.len();
    let w = unit_vector(rng, dim);
    let v = unit_vector(rng, dim);
    let a = uniform(rng, 0.2, 1.0);
    let b = uniform(rng, -1.0, 1.0);
    let phase = uniform(rng, 0.0, std::f64::consts::TAU);
    (1..=len)
        .map(|h| {
            let t = a / h as f64;
            match class {
                SequenceClass::Directional => axpy(&axpy(x, t, u), b * t * t, &w),
                SequenceClass::Undirected => {
                    let turn = (h as f64 + phase).cos();
                    let side = (h as f64 + phase).sin();
                    axpy(&axpy(x, t * turn, u), t * side, &v)
                }
                SequenceClass::Divergent => axpy(&axpy(x, 0.5 + t, &v), 0.1 * (h as f64).sin(), u),
            }
        })
        .collect()
}

fn derivative(ctx: &Ctx) -> Vec<CheckRecord> {
    let tol = ctx.cfg.tol;
    let mut out = Vec::new();

    out.push(ctx.check("convergence", "prop:convergence", |seed| {
        let samples = ctx.samples(400);
        let cfg = ClassifyConfig::default();
        let results = par_sample(samples, seed, |rng, i| {
            let class = match i % 4 {
                0 | 1 => SequenceClass::Directional,
                2 => SequenceClass::Undirected,
                _ => SequenceClass::Divergent,
            };
            let dim = 2 + i % 2;
            let x = point_in_box(rng, dim, 1.0);
            let u = unit_vector(rng, dim);
            let seq = labelled_sequence(rng, class, &x, &u, 2_000);
            let v = classify_sequence(&seq, &x, &u, &cfg);
            (class, v)
        });
        let mut bad = Vec::new();
        let mut counts = [0usize; 3];
        for (i, (class, v)) in results.iter().enumerate() {
            counts[*class as usize] += 1;
            let ok = match v {
                Ok(v) => !v.disagreement && v.matches_filter == (*class == SequenceClass::Directional),
                Err(_) => false,
            };
            if !ok && bad.len() < 4 {
                bad.push(json!({ "index": i, "class": class, "verdict": debug(v) }));
            }
        }
        let misses = results
            .iter()
            .filter(|(c, v)| !v.as_ref().is_ok_and(|v| !v.disagreement && v.matches_filter == (*c == SequenceClass::Directional)))
            .count();
        let details = json!({ "directional": counts[0], "undirected": counts[1], "divergent": counts[2], "misses": misses });
        Ok(CheckRecord::from_witness("", "", (misses > 0).then(|| json!(bad)), details).sampled(seed, samples))
    }));

    out.push(ctx.check("transport-linear", "thm:derivative", |seed| {
        let samples = ctx.samples(200);
        let results = par_sample(samples, seed, |rng, i| {
            let dim = 2 + i % 2;
            let a = loop {
                let a = DMatrix::from_fn(dim, dim, |_, _| uniform(rng, -2.0, 2.0));
                if a.determinant().abs() > 0.1 {
                    break a;
                }
            };
            let f = MapSpec::linear(&a);
            let x = point_in_box(rng, dim, 1.0);
            let mut worst = 0.0f64;
            for k in 0..10 {
                let u = unit_vector(rng, dim);
                let cfg = SequenceTransportConfig { seed: k, ..Default::default() };
                match crate::metric::transport_via_sequences(&f, &x, &u, 1, &cfg) {
                    Ok(t) => worst = worst.max(angle(&t.direction, &t.expected)),
                    Err(e) => return Err(json!({ "matrix": f, "x": x, "u": u, "error": e.to_string() })),
                }
            }
            Ok(worst)
        });
        transport_record(results, tol, seed, samples * 10)
    }));

    out.push(ctx.check("transport-nonlinear", "thm:derivative", |seed| {
        let battery = MapSpec::nonlinear_battery();
        let directions = 10;
        let results = par_sample(battery.len(), seed, |rng, i| {
            let f = &battery[i];
            let x = point_in_box(rng, f.dim(), 0.5);
            let mut worst = 0.0f64;
            for k in 0..directions {
                let u = unit_vector(rng, f.dim());
                let cfg = SequenceTransportConfig { seed: k as u64, ..Default::default() };
                match crate::metric::transport_via_sequences(f, &x, &u, 1, &cfg) {
                    Ok(t) => worst = worst.max(angle(&t.direction, &t.expected)),
                    Err(e) => return Err(json!({ "map": f.name(), "x": x, "u": u, "error": e.to_string() })),
                }
            }
            Ok(worst)
        });
        transport_record(results, tol, seed, battery.len() * directions)
    }));
    out
}

fn transport_record(results: Vec<Result<f64, Value>>, tol: f64, seed: u64, samples: usize) -> Outcome {
    let worst = results.iter().filter_map(|r| r.as_ref().ok()).copied().fold(0.0f64, f64::max);
    let bad: Vec<Value> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match r {
            Ok(a) if *a <= tol => None,
            Ok(a) => Some(json!({ "case": i, "angle": a })),
            Err(e) => Some(e.clone()),
        })
        .collect();
    let details = json!({ "cases": results.len(), "worst_angle": worst, "tol": tol, "misses": bad.len() });
    let witness = (!bad.is_empty()).then(|| json!(bad.into_iter().take(4).collect::<Vec<_>>()));
    Ok(CheckRecord::from_witness("", "", witness, details).sampled(seed, samples))
}

/// A random `p` with `p(0) = 0` and `1 ≤ deg p ≤ m`, small integer coefficients.
pub fn random_polynomial(rng: &mut SampleRng, m: u32) -> Polynomial {
    loop {
        let mut c = vec![0i64];
        for _ in 1..=m {
            c.push((uniform(rng, 0.0, 5.0).floor() as i64) - 2);
        }
        let p = Polynomial::from_ints(&c);
        if p.check(m).is_ok() {
            return p;
        }
    }
}

/// Twenty distinct pairs, alternating `m = 2, 3`.
pub fn distinct_polynomial_pairs(seed: u64, count: usize) -> Vec<(Polynomial, Polynomial, u32)> {
    let mut rng = rng_for(seed, 0);
    (0..count)
        .map(|k| {
            let m = 2 + (k % 2) as u32;
            let p = random_polynomial(&mut rng, m);
            let q = loop {
                let q = random_polynomial(&mut rng, m);
                if q != p {
                    break q;
                }
            };
            (p, q, m)
        })
        .collect()
}

fn snowflake(ctx: &Ctx) -> Vec<CheckRecord> {
    let mut out = Vec::new();

    out.push(ctx.check("triangle", "prop:snowflake", |seed| {
        let samples = ctx.samples(30_000);
        let (bad, w) = par_failures(samples, seed, 4, |rng, i| {
            let m = 2 + (i % 3) as u32;
            let (x, y, z) = (uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0));
            let d = |a, b| snowflake_distance(m, a, b);
            let ok = d(x, z) <= d(x, y) + d(y, z) + 1e-12 && d(x, y) == d(y, x) && d(x, x) == 0.0 && (x == y || d(x, y) > 0.0);
            (!ok).then(|| json!({ "m": m, "x": x, "y": y, "z": z }))
        });
        Ok(CheckRecord::from_witness("", "", (bad > 0).then(|| json!(w)), json!({ "violations": bad })).sampled(seed, samples))
    }));

    out.push(ctx.check("separation-equal", "prop:snowflake", |seed| {
        let mut rng = rng_for(seed, 0);
        for k in 0..20 {
            let m = 2 + (k % 2) as u32;
            let p = random_polynomial(&mut rng, m);
            let s = separate_polynomials(&p, &p, m, ArcMode::Graph, &SeparationConfig::default()).map_err(err)?;
            if s != Separation::Equal {
                return Ok(CheckRecord::fail("", "", json!({ "p": p.to_string(), "m": m, "result": to_value(&s) }), Value::Null));
            }
        }
        Ok(CheckRecord::pass("", "", json!({ "pairs": 20 })).sampled(seed, 20))
    }));

    out.push(ctx.check("separation-distinct", "prop:snowflake", |seed| {
        let pairs = distinct_polynomial_pairs(seed, 20);
        let mut unseparated = Vec::new();
        let mut separated = 0usize;
        for (p, q, m) in &pairs {
            match separate_polynomials(p, q, *m, ArcMode::Graph, &SeparationConfig::default()).map_err(err)? {
                Separation::Separated(w) => {
                    if !verify_separation(p, q, *m, ArcMode::Graph, &w).map_err(err)? {
                        unseparated.push(json!({ "p": p.to_string(), "q": q.to_string(), "m": m, "reason": "witness did not verify" }));
                    } else {
                        separated += 1;
                    }
                }
                Separation::NotSeparated { ratios_12, ratios_21 } => unseparated.push(json!({
                    "p": p.to_string(), "q": q.to_string(), "m": m,
                    "last_ratio_12": ratios_12.last(), "last_ratio_21": ratios_21.last(),
                })),
                Separation::Equal => unseparated.push(json!({ "p": p.to_string(), "q": q.to_string(), "m": m, "reason": "reported equal" })),
            }
        }
        let details = json!({ "pairs": pairs.len(), "separated": separated });
        Ok(CheckRecord::from_witness("", "", (!unseparated.is_empty()).then(|| json!(unseparated)), details).sampled(seed, pairs.len()))
    }));

    out.push(ctx.check("box-counting", "prop:snowflake", |_| {
        let grid = 200_000;
        let mut dims = Vec::new();
        for m in [2u32, 3] {
            let smallest = (500.0 / grid as f64).powf(1.0 / f64::from(m));
            let radii: Vec<f64> = (0..8).map(|k| 0.3 * (smallest / 0.3).powf(k as f64 / 7.0)).collect();
            let d = box_counting_dimension(m, grid, &radii);
            dims.push(json!({ "m": m, "dimension": d }));
            if (d - f64::from(m)).abs() >= 0.1 * f64::from(m) {
                return Ok(CheckRecord::fail("", "", json!({ "m": m, "dimension": d }), json!({ "dimensions": dims })));
            }
        }
        Ok(CheckRecord::pass("", "", json!({ "dimensions": dims })))
    }));

    out.push(ctx.check("graph-embedding", "prop:snowflake", |_| {
        let mut rows = Vec::new();
        for f in [ScalarMap::Zero, ScalarMap::Identity, ScalarMap::Sin, ScalarMap::Affine { a: -2.0, b: 1.0 }] {
            let g = graph_embed(&f, 2, Axis::First, -1.0, 1.0, 80).map_err(err)?;
            rows.push(json!({ "map": to_value(&f), "lower": g.lower, "upper": g.upper }));
            if !(g.lower > 0.0 && g.upper.is_finite()) {
                return Ok(CheckRecord::fail("", "", json!({ "map": to_value(&f), "lower": g.lower, "upper": g.upper }), Value::Null));
            }
        }
        Ok(CheckRecord::pass("", "", json!({ "maps": rows })))
    }));

    out.push(ctx.check("derivability", "thm:derivable", |_| {
        let cases = [
            (ScalarMap::Identity, 0.0, vec![0, 1]),
            (ScalarMap::Affine { a: 2.0, b: 1.0 }, 0.5, vec![0, 1]),
            (ScalarMap::Poly { coeffs: vec![0.0, 1.0, 1.0] }, 0.0, vec![0, 1, 1]),
            (ScalarMap::Sin, 0.3, vec![0, 1]),
            (ScalarMap::Exp, 0.0, vec![0, 1, 1]),
        ];
        let mut rows = Vec::new();
        for (f, x, p) in cases {
            let r = check_poly_derivable(&f, x, &Polynomial::from_ints(&p), 2).map_err(err)?;
            rows.push(json!({ "map": to_value(&f), "x": x, "q": r.q, "slope": r.slope, "fit_error": r.fit_error }));
            if !r.matches {
                return Ok(CheckRecord::fail("", "", json!({ "map": to_value(&f), "x": x, "report": to_value(&r) }), Value::Null));
            }
        }
        Ok(CheckRecord::pass("", "", json!({ "cases": rows })))
    }));
    out
}

fn plane() -> Region {
    Region::cube(2, 1.0)
}

/// The three model flows on the plane.
pub fn model_flows() -> Vec<Flow> {
    vec![
        Flow::translation(vec![0.6, 0.8]).expect("unit direction"),
        Flow::rotation(1.0).expect("valid rate"),
        Flow::scaling(1.0, 2).expect("valid rate"),
    ]
}

/// Five bi-Lipschitz maps of the plane used for transport checks.
pub fn transport_maps() -> Vec<MapSpec> {
    let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 1.0]);
    vec![
        MapSpec::Identity { dim: 2 },
        MapSpec::linear(&a),
        MapSpec::SineShear { k: 0.5 },
        MapSpec::ArctanMix,
        MapSpec::compose(MapSpec::QuadShear { k: 0.3 }, MapSpec::linear(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.4, 1.5]))),
    ]
}

fn conditions_config(ctx: &Ctx, seed: u64) -> ConditionsConfig {
    ConditionsConfig { samples: ctx.samples(2_000), seed, ..Default::default() }
}

fn conditions_record(r: Result<FlowConditionsReport, FlowError>, through_d: bool, seed: u64) -> Outcome {
    let r = r.map_err(err)?;
    let ok = if through_d { r.passed_through_d() } else { r.passed() };
    let details = json!({
        "identity": r.identity, "equicontinuous": r.equicontinuous, "lipschitz": r.lipschitz,
        "local_group": r.local_group, "chain": r.chain, "c": r.c, "m_sup": r.m_sup(-1.0, 1.0),
        "group_residual": r.group_residual, "identity_residual": r.identity_residual,
    });
    let samples = r.samples;
    Ok(if ok { CheckRecord::pass("", "", details) } else { CheckRecord::fail("", "", to_value(&r), details) }.sampled(seed, samples))
}

fn flow_key(f: &Flow) -> String {
    match f.spec() {
        crate::flows::FlowSpec::Translation { .. } => "translation".into(),
        crate::flows::FlowSpec::Rotation { .. } => "rotation".into(),
        crate::flows::FlowSpec::Scaling { .. } => "scaling".into(),
        _ => f.name(),
    }
}

fn flows(ctx: &Ctx) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    for flow in model_flows() {
        let id = format!("conditions/{}", flow_key(&flow));
        out.push(ctx.check(&id, "thm:trad2", |seed| conditions_record(check_flow_conditions(&flow, &plane(), &conditions_config(ctx, seed)), false, seed)));
    }
    out.push(ctx.check("conditions/reversed-rotation", "thm:trad2", |seed| {
        let flow = Flow::rotation(1.0).map_err(err)?.reversed();
        conditions_record(check_flow_conditions(&flow, &plane(), &conditions_config(ctx, seed)), false, seed)
    }));

    let pushed_maps = [MapSpec::linear(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])), MapSpec::SineShear { k: 0.5 }];
    for (k, f) in pushed_maps.iter().enumerate() {
        out.push(ctx.check(&format!("pushforward/{k}"), "lem:lem2", |seed| {
            let pushed = pushforward_flow(f, &Flow::rotation(1.0).map_err(err)?, &plane()).map_err(err)?;
            let cfg = ConditionsConfig { samples: ctx.samples(500), ratio_points: 64, cell_samples: 40, seed, ..Default::default() };
            let mut rec = conditions_record(check_flow_conditions(&pushed, &plane(), &cfg), true, seed)?;
            rec.details["map"] = Value::String(f.name());
            Ok(rec)
        }));
    }

    out.push(ctx.check("functoriality", "lem:lem2", |seed| {
        let samples = ctx.samples(2_000);
        let f = MapSpec::SineShear { k: 0.5 };
        let g = MapSpec::linear(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 1.0]));
        let flow = Flow::rotation(1.0).map_err(err)?;
        let region = plane();
        let once = pushforward_flow(&MapSpec::compose(f.clone(), g.clone()), &flow, &region).map_err(err)?;
        let twice = pushforward_flow(&g, &pushforward_flow(&f, &flow, &region).map_err(err)?, &Region::cube(2, 4.0)).map_err(err)?;
        let tol = ctx.cfg.tol;
        let results = par_sample(samples, seed, |rng, _| -> Result<f64, FlowError> {
            let x = g.eval(&f.eval(&region.sample(rng)));
            let t = uniform(rng, -1.0, 1.0);
            Ok(dist(&once.eval(t, &x)?, &twice.eval(t, &x)?))
        });
        let mut worst = 0.0f64;
        for r in results {
            worst = worst.max(r.map_err(err)?);
        }
        let details = json!({ "worst_gap": worst, "tol": tol });
        Ok(CheckRecord::from_witness("", "", (worst > tol).then(|| json!({ "worst_gap": worst })), details).sampled(seed, samples))
    }));

    for (k, f) in transport_maps().into_iter().enumerate() {
        out.push(ctx.check(&format!("transport/{k}"), "lem:lem3", |seed| {
            let cfg = TransportConfig { samples: ctx.samples(2_000), seed, ..Default::default() };
            let flow = if k % 2 == 0 { Flow::translation(vec![0.6, 0.8]) } else { Flow::rotation(1.0) }.map_err(err)?;
            let r = check_flow_transport(&f, &flow, &plane(), &cfg).map_err(err)?;
            let details = json!({ "map": f.name(), "flow": flow.name(), "distortion": r.distortion, "mu": r.mu });
            let samples = r.forward_checked + r.backward_checked;
            Ok(match r.verdict {
                Commutation::Commute => CheckRecord::pass("", "", details),
                Commutation::Inconclusive { unresolved, .. } => {
                    let mut d = details;
                    d["unresolved"] = json!(unresolved);
                    CheckRecord::inconclusive("", "", d)
                }
                Commutation::Counterexample(w) => CheckRecord::fail("", "", to_value(&w), details),
            }
            .sampled(seed, samples))
        }));
    }
    out
}

fn trad2(ctx: &Ctx) -> Vec<CheckRecord> {
    let mut out = Vec::new();
    let samples = ctx.samples(10_000);
    for flow in model_flows() {
        let key = flow_key(&flow);
        let report = check_flow_conditions(&flow, &plane(), &conditions_config(ctx, ctx.seed(&format!("conditions/{key}"))));
        let report = report.as_ref().map_err(|e| e.to_string());

        out.push(ctx.check(&format!("step1/{key}"), "thm:trad2:step1", |seed| {
            let r = step1_diagonal_check(&flow, report.clone()?, 0.1, 0.5, &RecipeConfig::new(2, samples, seed)).map_err(err)?;
            let details = json!({ "eps_prime": 0.1, "eps": r.eps, "mu": r.mu, "eps0": r.eps0, "inconclusive": r.check.inconclusive, "bound_violations": r.bound_violations });
            implication_record(r.check.violations + r.bound_violations, r.check.inconclusive, to_value(&r.check.witnesses), details, seed, samples)
        }));

        out.push(ctx.check(&format!("lemacon/{key}"), "lem:lemacon", |seed| {
            let r = lemacon_construct(&flow, report.clone()?, 0.1, 0.5, &RecipeConfig::new(2, samples, seed)).map_err(err)?;
            let details = json!({
                "eps": 0.1, "mu": 0.5, "eps_prime": r.eps_prime, "mu_prime": r.mu_prime, "lambda0": r.lambda0,
                "eps1": r.eps1, "sigma": r.sigma, "eps_sigma": r.eps_sigma, "inconclusive": r.check.inconclusive,
            });
            implication_record(r.check.violations, r.check.inconclusive, to_value(&r.check.witnesses), details, seed, samples)
        }));

        out.push(ctx.check(&format!("step3/{key}"), "thm:trad2:step3", |seed| {
            let r = step3_composition_check(&flow, report.clone()?, 0.2, 0.5, &RecipeConfig::new(2, samples, seed)).map_err(err)?;
            let details = json!({ "eps": 0.2, "mu": 0.5, "eps_prime": r.eps_prime, "mu_prime": r.mu_prime, "c": r.c, "m_sup": r.m_sup, "inconclusive": r.check.inconclusive });
            implication_record(r.check.violations, r.check.inconclusive, to_value(&r.check.witnesses), details, seed, samples)
        }));
    }
    out
}

fn implication_record(violations: usize, inconclusive: usize, witnesses: Value, details: Value, seed: u64, samples: usize) -> Outcome {
    let rec = if violations > 0 {
        let mut d = details;
        d["violations"] = json!(violations);
        CheckRecord::fail("", "", witnesses, d)
    } else if inconclusive > 0 {
        CheckRecord::inconclusive("", "", details)
    } else {
        CheckRecord::pass("", "", details)
    };
    Ok(rec.sampled(seed, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Verdict;

    fn quick() -> RunConfig {
        RunConfig { seed: 1, samples: Some(200), max_points: 3, ..Default::default() }
    }

    #[test]
    fn unknown_suite_and_bad_config() {
        assert!(matches!(run_suite("nope", &RunConfig::default()), Err(ReportError::UnknownSuite(_))));
        assert!(matches!(run_suite("cones", &RunConfig { tol: -1.0, ..Default::default() }), Err(ReportError::ConfigInvalid(_))));
    }

    #[test]
    fn finite_axioms_pass() {
        let r = run_suite("finite-axioms", &quick()).unwrap();
        assert!(r.records.iter().all(|c| c.verdict == Verdict::Pass), "{:#?}", r.records);
        assert!(r.records.iter().any(|c| c.anchor == "def:dfilta") && r.records.iter().any(|c| c.anchor == "prop:prop23"));
        assert!(r.records.iter().all(|c| c.id.starts_with("finite-axioms/")));
    }

    #[test]
    fn finite_pushforward_passes() {
        let r = run_suite("finite-pushforward", &quick()).unwrap();
        assert!(r.passed() && r.summary.inconclusive == 0, "{:#?}", r.records);
    }

    #[test]
    fn cones_and_derivative_pass() {
        for s in ["cones", "derivative"] {
            let r = run_suite(s, &RunConfig { seed: 7, samples: Some(200), ..Default::default() }).unwrap();
            assert!(r.passed(), "{s}: {:#?}", r.records);
        }
    }

    #[test]
    fn labelled_sequences_classify() {
        let mut rng = rng_for(3, 0);
        let cfg = ClassifyConfig::default();
        for class in [SequenceClass::Directional, SequenceClass::Undirected, SequenceClass::Divergent] {
            for _ in 0..20 {
                let x = point_in_box(&mut rng, 2, 1.0);
                let u = unit_vector(&mut rng, 2);
                let s = labelled_sequence(&mut rng, class, &x, &u, 2_000);
                let v = classify_sequence(&s, &x, &u, &cfg).unwrap();
                assert_eq!(v.matches_filter, class == SequenceClass::Directional, "{class:?}");
                assert!(!v.disagreement);
            }
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let a = run_suite("cones", &quick()).unwrap().to_json().unwrap();
        let b = run_suite("cones", &quick()).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }
}
