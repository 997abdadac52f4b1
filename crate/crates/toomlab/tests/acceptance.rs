//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (run with `--nocapture` to see them all).

use std::collections::HashMap;

use toomlab::automaton::{builtin_model, coop_map, nec_map, triangular_maps, NoisyAutomaton, RuleFamily};
use toomlab::certify::{
    build_preset, certificate, coop_polar, cycle_certificate, general_certificate, nec_polar,
    rho_lower_bound, select_charge_sets, triangular_polar, CertificateReport, ContourModelSpec,
    Preset,
};
use toomlab::contour::chain::ChainParams;
use toomlab::contour::{
    exact_chain_distribution, nu_value, nu_value_exact, peierls, sample_contour, ChainOutcome,
    DecorationMode, DecoratedContour, Num,
};
use toomlab::diverge::{
    family_sum, family_sum_brute_force, growth_and_verdict, Verdict,
};
use toomlab::geometry::{
    compensated_edge_speed, edge_speed, farkas_alternative, find_drift, verify_farkas,
    LinearForm, SpatialPolar, SpaceTimePolar,
};
use toomlab::rat::{rat, rint, to_f64, Rat};
use toomlab::rng::Stream;
use toomlab::sim::{empirical_edge_speed_p0, erosion_time, run_max_trajectory, step, TorusState};

fn pass(criterion: &str, detail: String) {
    println!("criterion {criterion}: PASS ({detail})");
}

fn coop_test_spec() -> ContourModelSpec {
    build_preset(&Preset::Coop { r: rat(1, 2) }, Num::from_rat(rat(1, 6)), 0.3).unwrap()
}

#[test]
fn criterion_01_toom_rule_certificate() {
    let start = std::time::Instant::now();
    let spec = build_preset(&Preset::ToomNec, Num::from_rat(rat(1, 20)), 0.14).unwrap();
    let rep = general_certificate(&spec).unwrap();
    assert!((rep.c_bullet - 0.4).abs() <= 1e-12, "C_bullet = {}", rep.c_bullet);
    let c_circ_expect = 0.05f64.powi(-2) * (1.0f64 + 2.0 * 0.05).powi(3);
    assert!((rep.c_circ - c_circ_expect).abs() <= 1e-9 * c_circ_expect);
    let eps = rep.epsilon.unwrap();
    assert!((eps / 8.3928e-5 - 1.0).abs() <= 1e-4, "eps = {eps}");
    assert!(eps >= 1.0 / 12000.0);
    let rho = rho_lower_bound(&rep, 1.0 / 12000.0).unwrap();
    assert!(rho >= 0.999, "rho = {rho}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass("01", format!("eps = {eps:.6e}, rho(1/12000) = {rho:.5}, {elapsed:?}"));
}

#[test]
fn criterion_02_triangular_certificate() {
    let start = std::time::Instant::now();
    // plain weights at a tilt small enough for the closed-form C_bullet
    let spec = build_preset(&Preset::TriangularFirst, Num::from_rat(rat(1, 50)), 0.016).unwrap();
    let rep = general_certificate(&spec).unwrap();
    assert_eq!(rep.b_bullet_exact.as_deref(), Some("11/10"), "B_bullet not exactly 11/10");
    assert_eq!(rep.delta_exact.as_deref(), Some("3/4"), "delta not exactly 3/4");
    let c_expect = 275.0 / 243.0 * 0.75f64.sqrt();
    assert!((rep.c_bullet - c_expect).abs() <= 1e-12, "C_bullet = {}", rep.c_bullet);

    let spec = build_preset(&Preset::TriangularImproved, Num::from_f64(0.033), 0.016).unwrap();
    let rep = general_certificate(&spec).unwrap();
    assert_eq!(rep.delta_exact.as_deref(), Some("3/4"));
    let eps = rep.epsilon.unwrap();
    assert!(eps > 7.7e-13, "eps = {eps}");
    let rho = rho_lower_bound(&rep, eps).unwrap();
    assert!(rho > 1.0 - 5e-11, "rho = {rho}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0);
    pass("02", format!("B=11/10, delta=3/4 exact; improved eps = {eps:.4e}, {elapsed:?}"));
}

#[test]
fn criterion_03_coop_certificate() {
    let start = std::time::Instant::now();
    let mut rng = Stream::new(303, 0);
    for _ in 0..20 {
        let r = rat(1 + rng.next_range(70) as i64, 100); // 0.01 .. 0.70
        let theta = rat(1 + rng.next_range(40) as i64, 100); // 0.01 .. 0.40
        let spec =
            build_preset(&Preset::Coop { r: r.clone() }, Num::from_rat(theta.clone()), 0.01)
                .unwrap();
        let rep = cycle_certificate(&spec).unwrap();
        let expect = to_f64(&(Rat::from_integer(1.into()) - &r + rat(2, 1) * &theta * &r));
        assert!(
            (rep.c_bullet - expect).abs() <= 1e-12,
            "C_bullet {} vs 1-r+2 theta r = {expect}",
            rep.c_bullet
        );
    }
    // quadratic coefficient of the threshold at theta = d = 1/6
    let mut value = 0.0;
    for &r in &[1e-2, 1e-3, 1e-4] {
        let spec = build_preset(
            &Preset::Coop { r: toomlab::rat::from_f64(r).unwrap() },
            Num::from_f64(1.0 / 6.0),
            r / 6.0,
        )
        .unwrap();
        let rep = cycle_certificate(&spec).unwrap();
        value = rep.epsilon.unwrap() / (r * r);
    }
    let coeff = 0.5 * (1.0f64 / 6.0).powi(3);
    assert!((value - coeff).abs() <= 1e-6, "{value} vs {coeff}");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0);
    pass("03", format!("20 random (r,theta) exact; eps/r^2 -> {value:.8} ~ 1/432, {elapsed:?}"));
}

#[test]
fn criterion_04_chain_law() {
    let start = std::time::Instant::now();
    let spec = coop_test_spec();
    let params = ChainParams::from_rat(rat(3, 10), rat(1, 2));
    let dist = exact_chain_distribution(&spec.chain, &params, 8, 50_000_000).unwrap();
    assert!(dist.completed_mass <= rint(1));
    assert!(dist.contours.len() >= 50);
    for (dec, prob, _steps) in &dist.contours {
        let nu = nu_value_exact(dec, &spec.chain, &params).unwrap();
        assert_eq!(prob, &nu, "chain law differs from the measure on a contour");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    pass(
        "04",
        format!(
            "{} contours at depth 8 agree exactly; mass = {:.6} <= 1, {elapsed:?}",
            dist.contours.len(),
            to_f64(&dist.completed_mass)
        ),
    );
}

#[test]
fn criterion_05_sampler_consistency() {
    let start = std::time::Instant::now();
    let spec = coop_test_spec();
    let exact_params = ChainParams::from_rat(rat(3, 10), rat(1, 2));
    let reference = exact_chain_distribution(&spec.chain, &exact_params, 6, 10_000_000).unwrap();
    let params = ChainParams::from_f64(0.3, 0.5);
    let runs = 1_000_000u64;
    let seed = 20240814u64;
    let mut counts: HashMap<Vec<u8>, u64> = HashMap::new();
    for run in 0..runs {
        if let ChainOutcome::Completed { contour, steps } =
            sample_contour(&spec.chain, &params, seed, run, 10_000, false)
        {
            if steps <= 6 {
                *counts.entry(contour.canonical_key().unwrap()).or_default() += 1;
            }
        }
    }
    let mut checked = 0;
    let mut max_sigma: f64 = 0.0;
    for (dec, prob, steps) in &reference.contours {
        if *steps > 6 {
            continue;
        }
        let p = to_f64(prob);
        let expect = runs as f64 * p;
        let sd = (runs as f64 * p * (1.0 - p)).sqrt();
        let got = counts.get(&dec.canonical_key().unwrap()).copied().unwrap_or(0) as f64;
        let pull = (got - expect).abs() / sd;
        max_sigma = max_sigma.max(pull);
        assert!(pull <= 4.0, "contour off by {pull:.2} sigma (law {p:.3e})");
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} contours compared");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    pass(
        "05",
        format!("{checked} contour frequencies within 4 sigma (max pull {max_sigma:.2}), {elapsed:?}"),
    );
}

/// Samples completed contours and checks the per-contour domination of the
/// presence probability by the scaled contour measure.
fn domination_check(
    name: &str,
    spec: &ContourModelSpec,
    report: &CertificateReport,
    cycle_order: bool,
    want: usize,
    seed: u64,
) -> (usize, usize) {
    let eps = report.epsilon.expect("valid certificate");
    let p = eps / 2.0;
    let r = spec.family.intrinsic_f64();
    let bound = p / (report.p_hat * (1.0 - report.p_hat));
    let params = ChainParams::from_f64(report.p_hat, report.p_circ);
    let mut sampled = 0usize;
    let mut nontrivial = 0usize;
    let mut run = 0u64;
    while sampled < want {
        run += 1;
        assert!(run < 50_000_000, "{name}: sampling starved");
        if let ChainOutcome::Completed { contour, .. } =
            sample_contour(&spec.chain, &params, seed, run, 10_000, cycle_order)
        {
            let pi = contour.presence_probability(p, &r);
            let nu = nu_value(&contour, &spec.chain, &params);
            assert!(
                pi <= bound * nu * (1.0 + 1e-12),
                "{name}: pi = {pi:.3e} > bound * nu = {:.3e}",
                bound * nu
            );
            if contour.contour.graph.n_vertices() > 1 {
                nontrivial += 1;
            }
            sampled += 1;
        }
    }
    (sampled, nontrivial)
}

#[test]
fn criterion_06_per_contour_inequality() {
    let nec = build_preset(&Preset::ToomNec, Num::from_f64(0.05), 0.14).unwrap();
    let nec_rep = general_certificate(&nec).unwrap();
    let (n1, t1) = domination_check("nec", &nec, &nec_rep, false, 10_000, 61);

    let tri = build_preset(&Preset::TriangularImproved, Num::from_f64(0.033), 0.016).unwrap();
    let tri_rep = general_certificate(&tri).unwrap();
    let (n2, t2) = domination_check("triangular", &tri, &tri_rep, false, 10_000, 62);

    let coop =
        build_preset(&Preset::Coop { r: rat(1, 2) }, Num::from_rat(rat(1, 6)), 1.0 / 12.0)
            .unwrap();
    let coop_rep = cycle_certificate(&coop).unwrap();
    let (n3, t3) = domination_check("coop", &coop, &coop_rep, true, 10_000, 63);

    pass(
        "06",
        format!(
            "zero violations on {} samples (nontrivial: nec {t1}, tri {t2}, coop {t3})",
            n1 + n2 + n3
        ),
    );
}

fn random_spacetime_polar(rng: &mut Stream, dim: usize, sigma: usize) -> SpaceTimePolar {
    loop {
        let mut forms: Vec<Vec<Rat>> = (0..sigma - 1)
            .map(|_| {
                (0..dim)
                    .map(|_| rat(rng.next_range(11) as i64 - 5, 1 + rng.next_range(3) as i64))
                    .collect()
            })
            .collect();
        let last: Vec<Rat> = (0..dim)
            .map(|j| -forms.iter().map(|f| f[j].clone()).sum::<Rat>())
            .collect();
        forms.push(last);
        let forms: Vec<LinearForm> = forms.into_iter().map(LinearForm::new_allow_zero).collect();
        if let Ok(base) = SpatialPolar::new(forms) {
            let drift: Vec<Rat> =
                (0..dim).map(|_| rat(rng.next_range(7) as i64 - 3, 1 + rng.next_range(3) as i64)).collect();
            return SpaceTimePolar::new(base, drift).unwrap();
        }
    }
}

#[test]
fn criterion_07_structural_invariants() {
    let mut pool: Vec<DecoratedContour> = Vec::new();

    // sampled: branching chain at friendly parameters, then the two
    // sigma = 3 specs
    let coop = coop_test_spec();
    let params = ChainParams::from_f64(0.3, 0.5);
    let mut run = 0u64;
    while pool.len() < 8_000 {
        run += 1;
        if let ChainOutcome::Completed { contour, .. } =
            sample_contour(&coop.chain, &params, 71, run, 10_000, false)
        {
            pool.push(contour);
        }
    }
    for (preset, phat, seed) in [
        (Preset::ToomNec, 0.25, 72u64),
        (Preset::TriangularImproved, 0.25, 73),
    ] {
        let spec = build_preset(&preset, Num::from_f64(preset.default_theta()), phat).unwrap();
        let chain_params = ChainParams::from_f64(phat, 0.5);
        let mut added = 0;
        let mut run = 0u64;
        while added < 800 {
            run += 1;
            if let ChainOutcome::Completed { contour, .. } =
                sample_contour(&spec.chain, &chain_params, seed, run, 10_000, false)
            {
                pool.push(contour);
                added += 1;
            }
        }
    }
    // generated: exhaustive small cycles of the divergence model
    let cc = builtin_model("cc-id(2/5)", None).unwrap();
    let cc_sets = select_charge_sets(&cc, &coop_polar());
    let generated =
        peierls::enumerate_decorated_contours(&cc_sets, DecorationMode::Cycle, true, 8, 10_000_000)
            .unwrap();
    pool.extend(generated.into_iter().map(|(d, _)| d));
    assert!(pool.len() >= 10_000, "pool has {} contours", pool.len());
    let pool = &pool[..10_000.max(pool.len().min(12_000))];

    let mut rng = Stream::new(707, 0);
    let mut polar_checks = 0u64;
    for dec in pool {
        let c = &dec.contour;
        let sigma = c.graph.sigma;
        assert_eq!(c.n_star(), c.n_circ() + 1, "sink/source-edge identity");
        let counts: Vec<usize> =
            (0..sigma).map(|s| c.graph.edges_of_charge(s as u8).count()).collect();
        assert!(counts.windows(2).all(|w| w[0] == w[1]), "unequal charge counts {counts:?}");
        assert!(
            c.n_diamond() <= c.n_circ() + sigma * c.n_bullet() + 1,
            "site-count bound violated"
        );
        for _ in 0..5 {
            let polar = random_spacetime_polar(&mut rng, 2, sigma);
            let sum = c.polar_edge_sum(&polar).unwrap();
            assert!(sum == rint(0), "polar edge sum = {sum}");
            polar_checks += 1;
        }
    }
    pass(
        "07",
        format!("{} contours, {polar_checks} exact polar zero-sums", pool.len()),
    );
}

#[test]
fn criterion_08_edge_speeds() {
    // exact tables
    let tri = triangular_maps();
    let tri_polar = triangular_polar();
    for (k, map) in tri.iter().enumerate() {
        for (s, form) in tri_polar.base.forms().iter().enumerate() {
            let expect = if s == k { rint(1) } else { rint(0) };
            assert_eq!(edge_speed(map, form), expect);
        }
    }
    let cp = coop_polar();
    assert_eq!(edge_speed(&coop_map(), &cp.base.forms()[0]), rint(1));
    assert_eq!(edge_speed(&coop_map(), &cp.base.forms()[1]), rint(0));

    // half-space runs against the exact speeds, random rational forms
    let mut maps: Vec<toomlab::automaton::MonotoneMap> = vec![nec_map(), coop_map()];
    maps.extend(tri.iter().cloned());
    let cc = builtin_model("cc-id(1/2)", None).unwrap();
    maps.push(cc.map(0).clone());
    maps.push(cc.map(1).clone());
    let mut rng = Stream::new(808, 0);
    let mut runs = 0;
    for map in &maps {
        let mut done = 0;
        while done < 10 {
            let coeffs: Vec<Rat> = (0..2)
                .map(|_| rat(rng.next_range(7) as i64 - 3, 1 + rng.next_range(3) as i64))
                .collect();
            let Ok(form) = LinearForm::new(coeffs) else { continue };
            let exact = edge_speed(map, &form);
            let simulated = empirical_edge_speed_p0(map, &form, 4).unwrap();
            assert_eq!(simulated, exact, "half-space speed mismatch for {form:?}");
            done += 1;
            runs += 1;
        }
    }
    pass("08", format!("tables exact; {runs} half-space runs match exactly"));
}

#[test]
fn criterion_09_drift_and_farkas() {
    let coop_single = RuleFamily::new(vec![coop_map()], vec![rint(1)]).unwrap();
    let red = find_drift(&coop_single, &coop_polar().base).unwrap();
    for (s, row) in red.compensated.iter().enumerate() {
        for (k, speed) in row.iter().enumerate() {
            assert!(*speed > rint(0), "coop compensated speed ({s},{k}) = {speed}");
            // re-verify externally
            assert_eq!(
                speed,
                &compensated_edge_speed(coop_single.map(k), &red.reduced.forms()[s], &red.drift)
            );
        }
    }
    let nec = builtin_model("toom-nec", None).unwrap();
    let red = find_drift(&nec, &nec_polar().base).unwrap();
    assert_eq!(red.drift, vec![rat(1, 3), rat(1, 3)]);
    for row in &red.compensated {
        for speed in row {
            assert!(*speed > rint(0));
        }
    }

    let mut rng = Stream::new(909, 0);
    let mut points = 0;
    let mut duals = 0;
    for _ in 0..100 {
        let d = 1 + rng.next_range(3);
        let n = 2 + rng.next_range(4);
        let forms: Vec<LinearForm> = (0..n)
            .map(|_| {
                LinearForm::new_allow_zero(
                    (0..d)
                        .map(|_| rat(rng.next_range(9) as i64 - 4, 1 + rng.next_range(2) as i64))
                        .collect(),
                )
            })
            .collect();
        let eps: Vec<Rat> =
            (0..n).map(|_| rat(rng.next_range(5) as i64 - 2, 1 + rng.next_range(2) as i64)).collect();
        let outcome = farkas_alternative(&forms, &eps);
        assert!(verify_farkas(&forms, &eps, &outcome), "certificate failed verification");
        match outcome {
            toomlab::geometry::FarkasOutcome::Point(_) => points += 1,
            toomlab::geometry::FarkasOutcome::Multipliers(_) => duals += 1,
        }
    }
    assert!(points > 0 && duals > 0, "degenerate sample: {points} points, {duals} duals");
    pass("09", format!("both drifts verified; 100 alternatives certified ({points} feasible, {duals} infeasible)"));
}

#[test]
fn criterion_10_divergence_lab() {
    let start = std::time::Instant::now();
    let p = rat(1, 7);
    let r = rat(2, 5);
    for n in 1..=10 {
        assert_eq!(
            family_sum(n, &p, &r).unwrap(),
            family_sum_brute_force(n, &p, &r).unwrap(),
            "family sum differs from brute force at n = {n}"
        );
    }
    let rep = growth_and_verdict(0.01, 0.05, 2000).unwrap();
    let last = *rep.nth_roots.last().unwrap();
    let rel = (last / rep.transfer_rate - 1.0).abs();
    assert!(rel <= 0.01, "nth root {last} vs transfer rate {} ({rel:.4})", rep.transfer_rate);
    // the proven lower-bound rate sits below the observed growth
    assert!(rep.analytic_rate_lower_bound <= last + 1e-12);

    for p_small in [0.01, 0.001] {
        let rep = growth_and_verdict(p_small, 0.1, 200).unwrap();
        assert_eq!(rep.verdict, Verdict::Diverges, "p = {p_small}");
    }
    let rep = growth_and_verdict(0.5, 1.0, 120).unwrap();
    assert_eq!(rep.verdict, Verdict::Inconclusive);
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    pass(
        "10",
        format!("exact to n = 10; nth root off transfer rate by {:.3}%; verdicts agree, {elapsed:?}", rel * 100.0),
    );
}

#[test]
fn criterion_11_simulation_sanity() {
    // erosion of random finite zero sets at p = 0
    let nec = NoisyAutomaton::new(builtin_model("toom-nec", None).unwrap(), 0.0).unwrap();
    for seed in 0..50u64 {
        let mut rng = Stream::new(1100 + seed, 0);
        let count = 1 + rng.next_range(40);
        let zeros: Vec<Vec<i64>> = (0..count)
            .map(|_| vec![rng.next_range(64) as i64, rng.next_range(64) as i64])
            .collect();
        let t = erosion_time(&nec, 64, &zeros, 200, seed).unwrap();
        assert!(t.is_some(), "seed {seed}: zero set not erased in 200 steps");
    }

    // common-random-number monotone coupling across noise levels
    let fam = builtin_model("toom-nec", None).unwrap();
    let lo = NoisyAutomaton::new(fam.clone(), 0.01).unwrap();
    let hi = NoisyAutomaton::new(fam, 0.05).unwrap();
    let mut s_lo = TorusState::all_ones(64, 2);
    let mut s_hi = TorusState::all_ones(64, 2);
    for t in 0..100u64 {
        s_lo = step(&s_lo, &lo, 1111, 0, t).unwrap();
        s_hi = step(&s_hi, &hi, 1111, 0, t).unwrap();
        assert!(s_hi.dominated_by(&s_lo), "dominance failed at slice {t}");
    }

    // pre-registered density runs at half the certified scale
    let mut densities = Vec::new();
    for (name, family, eps) in [
        ("toom-nec", builtin_model("toom-nec", None).unwrap(), {
            let spec = build_preset(&Preset::ToomNec, Num::from_f64(0.05), 0.14).unwrap();
            certificate(&spec).unwrap().epsilon.unwrap()
        }),
        ("triangular-majority", builtin_model("triangular-majority", None).unwrap(), {
            let spec =
                build_preset(&Preset::TriangularImproved, Num::from_f64(0.033), 0.016).unwrap();
            certificate(&spec).unwrap().epsilon.unwrap()
        }),
        ("coop-id(1/2)", builtin_model("coop-id(1/2)", None).unwrap(), {
            let spec =
                build_preset(&Preset::Coop { r: rat(1, 2) }, Num::from_rat(rat(1, 6)), 1.0 / 12.0)
                    .unwrap();
            certificate(&spec).unwrap().epsilon.unwrap()
        }),
    ] {
        let auto = NoisyAutomaton::new(family, eps / 2.0).unwrap();
        let report = run_max_trajectory(&auto, 64, 500, 2, 1789).unwrap();
        assert!(report.final_mean > 0.9, "{name}: density {} after 500 steps", report.final_mean);
        densities.push(format!("{name} {:.6}", report.final_mean));
    }
    pass("11", format!("erosion, coupling, densities: {}", densities.join(", ")));
}
