//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line straight to stdout (bypassing libtest capture) before asserting.

use std::io::Write;
use std::time::Instant;

use kll_core::eval::{
    gen_stream, max_quantile_error, percentile, run_experiment, ExactOracle, ExperimentConfig,
    SketchKind, StreamKind, StreamSpec,
};
use kll_core::sketch::failure_constant;
use kll_core::weighted::base2_decompose;
use kll_core::{
    epsilon_for, failure_probability, k_for_budget, Backend, Base2Sketch, QuantileSummary, Sketch,
    VariantFlags, WaSketch, WeightedMode, DEFAULT_C,
};
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn report(id: u32, pass: bool, detail: &str) {
    let mut out = std::io::stdout().lock();
    let verdict = if pass { "PASS" } else { "FAIL" };
    writeln!(out, "criterion {id}: {verdict} {detail}").unwrap();
}

fn v(s: &str) -> VariantFlags {
    s.parse().unwrap()
}

fn mean_errors(
    kinds: &[SketchKind],
    budgets: &[usize],
    stream: StreamSpec,
    trials: usize,
) -> Vec<(String, usize, f64)> {
    let config = ExperimentConfig {
        kinds: kinds.to_vec(),
        budgets: budgets.to_vec(),
        streams: vec![stream],
        trials,
        q_count: 1000,
        c: DEFAULT_C,
        backend: Backend::Packed,
        master_seed: 2024,
    };
    run_experiment(&config, |_| Ok(()))
        .unwrap()
        .into_iter()
        .map(|r| (r.variant, r.budget, r.mean_max_err))
        .collect()
}

fn lookup(rows: &[(String, usize, f64)], variant: &str, budget: usize) -> f64 {
    rows.iter()
        .find(|r| r.0 == variant && r.1 == budget)
        .map(|r| r.2)
        .unwrap()
}

#[test]
fn criterion_01_variant_improvement_ratio() {
    let budgets = [256, 512, 1024, 2048];
    let kinds = [SketchKind::plain(v("0000")), SketchKind::plain(v("1111"))];
    let rows = mean_errors(&kinds, &budgets, StreamSpec::shuffled(1_000_000, 1), 50);
    let mut pass = true;
    let mut detail = String::new();
    for b in budgets {
        let (plain, all) = (lookup(&rows, "0000", b), lookup(&rows, "1111", b));
        let ratio = all / plain;
        pass &= ratio <= 0.75;
        detail += &format!("[{b}: 1111={all:.4} 0000={plain:.4} ratio={ratio:.2}] ");
    }
    // Reference point values at 2^8 and 2^9 are soft targets only; the ratio is the gate.
    detail += "soft targets 2^8: 0.0146/0.0299, 2^9: 0.0082/0.0149";
    report(1, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_02_failure_bound() {
    let n = 100_000;
    let items = gen_stream(&StreamSpec::shuffled(n, 5)).unwrap();
    let oracle = ExactOracle::new(items.clone());
    let mut pass = true;
    let mut detail = String::new();
    for budget in [256, 1024] {
        let k = k_for_budget(budget, DEFAULT_C);
        let eps = epsilon_for(0.05, k, DEFAULT_C).unwrap();
        let bound = failure_probability(eps, k, DEFAULT_C).unwrap();
        assert!((bound - 0.05).abs() < 1e-9);
        for flags in [v("0000"), v("1111")] {
            let seeds = 400;
            let mut failures = 0;
            let mut worst: f64 = 0.0;
            for seed in 0..seeds {
                let mut s = Sketch::new(budget, DEFAULT_C, flags, 9000 + seed).unwrap();
                for x in &items {
                    s.update(*x);
                }
                let err = max_quantile_error(&s, &oracle, 1000).unwrap();
                worst = worst.max(err);
                failures += usize::from(err > eps);
            }
            let rate = failures as f64 / seeds as f64;
            pass &= rate <= 0.08;
            detail += &format!("[budget {budget} {flags}: eps={eps:.4} failures={rate:.3} worst={worst:.4}] ");
        }
    }
    report(2, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_03_length_independence() {
    let budgets = [256, 1024];
    let kinds = [SketchKind::plain(v("0000")), SketchKind::plain(v("1111"))];
    let mut rows = Vec::new();
    for (n, trials) in [(100_000, 20), (1_000_000, 20), (10_000_000, 10)] {
        for r in mean_errors(&kinds, &budgets, StreamSpec::shuffled(n, 3), trials) {
            rows.push((n, r));
        }
    }
    let mut pass = true;
    let mut detail = String::new();
    for kind in &kinds {
        let name = kind.to_string();
        for b in budgets {
            let errs: Vec<f64> = rows
                .iter()
                .filter(|(_, r)| r.0 == name && r.1 == b)
                .map(|(_, r)| r.2)
                .collect();
            let hi = errs.iter().cloned().fold(f64::MIN, f64::max);
            let lo = errs.iter().cloned().fold(f64::MAX, f64::min);
            pass &= hi < 2.0 * lo;
            detail += &format!("[{name} {b}: {errs:.4?} spread={:.2}] ", hi / lo);
        }
    }
    report(3, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_04_sorted_sweep_advantage() {
    let kinds = [SketchKind::plain(v("0000")), SketchKind::plain(v("1111"))];
    let rows = mean_errors(&kinds, &[512], StreamSpec::sorted(1_000_000), 50);
    let (plain, all) = (lookup(&rows, "0000", 512), lookup(&rows, "1111", 512));
    let ratio = all / plain;
    let mut pass = ratio <= 0.5;
    let mut detail = format!("1111={all:.4} 0000={plain:.4} ratio={ratio:.2} (soft: 0.0018 vs 0.0053); ");

    // Spreading off: on sorted input every level sweeps once and never resets.
    for flags in [v("1101"), v("0001")] {
        for seed in 0..5 {
            let mut s = Sketch::new(512, DEFAULT_C, flags, seed).unwrap();
            for x in gen_stream(&StreamSpec::sorted(1_000_000)).unwrap() {
                s.update(x);
            }
            let sweeps = s.sweeps_per_level();
            // A level's first compaction starts its sweep, so a level that
            // compacted at all shows exactly 1; 0 means it never compacted.
            let ok = sweeps.iter().all(|&c| c <= 1) && sweeps[0] == 1;
            if !ok || seed == 0 {
                detail += &format!("[{flags} seed {seed} sweeps per level {sweeps:?}] ");
            }
            pass &= ok;
        }
    }
    report(4, pass, &detail);
    assert!(pass, "{detail}");
}

/// Running mean and variance.
#[derive(Default, Clone, Copy)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn std_err(&self) -> f64 {
        (self.m2 / (self.n - 1.0)).sqrt() / self.n.sqrt()
    }
}

#[test]
fn criterion_05_unbiasedness() {
    let n = 10_000;
    let budget = 256;
    let seeds = 20_000u64;
    let items = gen_stream(&StreamSpec::shuffled(n, 77)).unwrap();
    let mut wrng = ChaCha8Rng::seed_from_u64(78);
    let weights: Vec<u64> = (0..n).map(|_| wrng.random_range(1..=16)).collect();

    let unit = ExactOracle::new(items.clone());
    let weighted = ExactOracle::weighted(items.iter().copied().zip(weights.iter().copied()).collect());
    let queries: Vec<f64> = (0..10).map(|j| unit.quantile(0.05 + 0.1 * j as f64).unwrap() + 0.5).collect();

    let mut configs: Vec<(String, WeightedMode, VariantFlags)> = VariantFlags::all_variants()
        .map(|f| (f.to_string(), WeightedMode::None, f))
        .collect();
    for mode in [WeightedMode::Base2, WeightedMode::WeightAware] {
        for f in [v("0000"), v("1111")] {
            configs.push((format!("{f}-{mode}"), mode, f));
        }
    }

    let mut pass = true;
    let mut detail = String::new();
    for (name, mode, flags) in configs {
        let oracle = if mode == WeightedMode::None { &unit } else { &weighted };
        let per_seed: Vec<Vec<u64>> = (0..seeds)
            .into_par_iter()
            .map(|seed| match mode {
                WeightedMode::None => {
                    let mut s = Sketch::new(budget, DEFAULT_C, flags, seed).unwrap();
                    for x in &items {
                        s.update(*x);
                    }
                    queries.iter().map(|q| s.rank(q).value).collect()
                }
                WeightedMode::Base2 => {
                    let mut s = Base2Sketch::new(budget, DEFAULT_C, flags, seed).unwrap();
                    for (x, w) in items.iter().zip(&weights) {
                        s.update(*x, *w).unwrap();
                    }
                    queries.iter().map(|q| s.rank(q).value).collect()
                }
                WeightedMode::WeightAware => {
                    let mut s = WaSketch::new(budget, DEFAULT_C, flags, seed).unwrap();
                    for (x, w) in items.iter().zip(&weights) {
                        s.update(*x, *w).unwrap();
                    }
                    assert_eq!(s.discarded(), 0);
                    queries.iter().map(|q| s.rank(q).value).collect()
                }
            })
            .collect();
        let mut moments = [Moments::default(); 10];
        for ranks in per_seed {
            for (m, r) in moments.iter_mut().zip(ranks) {
                m.push(r as f64);
            }
        }
        let worst_z = queries
            .iter()
            .zip(&moments)
            .map(|(q, m)| {
                let exact = oracle.rank(q) as f64;
                let se = m.std_err();
                if se == 0.0 {
                    if m.mean == exact { 0.0 } else { f64::INFINITY }
                } else {
                    (m.mean - exact).abs() / se
                }
            })
            .fold(0.0, f64::max);
        let ok = worst_z <= 3.0;
        pass &= ok;
        detail += &format!("[{name}: max|z|={worst_z:.2}] ");
    }
    report(5, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_06_weight_conservation() {
    use proptest::prelude::*;

    let stream = proptest::collection::vec(
        (
            0u32..5000,
            prop_oneof![
                3 => 1u64..64,
                1 => (0u32..40).prop_flat_map(|e| (1u64 << e)..(2u64 << e)),
            ],
        ),
        1..300,
    );
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let worst_ratio = std::cell::Cell::new(0.0f64);
    let result = runner.run(
        &(stream, 0u8..16, any::<u64>(), prop_oneof![Just(16usize), Just(64), Just(256)]),
        |(updates, bits, seed, budget)| {
            let flags = VariantFlags::from_bits(bits);
            let mut b2 = Base2Sketch::<f64>::new(budget, DEFAULT_C, flags, seed).unwrap();
            let mut wa = WaSketch::<f64>::new(budget, DEFAULT_C, flags, seed).unwrap();
            let mut total: u128 = 0;
            for (x, w) in updates {
                let x = f64::from(x);
                total += u128::from(w);
                b2.update(x, w).unwrap();
                wa.update(x, w).unwrap();
                prop_assert_eq!(b2.inner().stored_weight(), total);
                prop_assert_eq!(wa.stored_weight() + u128::from(wa.discarded()), total);
                prop_assert_eq!(u128::from(wa.n_total()), total);
            }
            let eps = epsilon_for(0.01, wa.k(), DEFAULT_C).unwrap();
            let ratio = wa.discarded() as f64 / (eps * total as f64);
            worst_ratio.set(worst_ratio.get().max(ratio));
            prop_assert!(ratio <= 3.0, "discarded {} > 3 eps W ({eps}, {total})", wa.discarded());
            Ok(())
        },
    );
    let pass = result.is_ok();
    let detail = format!(
        "1000 random weighted streams, base2 and weight-aware; worst discarded/(eps W) = {:.3} (limit 3); {:?}",
        worst_ratio.get(),
        result.err()
    );
    report(6, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_07_weighted_equivalence() {
    // Decomposition of w = 861 between H_s = 3 and H = 8:
    // 861 = 3 * 2^8 + 2^6 + 2^4 + 13, with 13 going to the sampler.
    let d = base2_decompose(861, 3, 8, 150).unwrap();
    let coeffs: Vec<u64> = (3..=8).map(|h| d.coeff(h)).collect();
    let mut pass = coeffs == [0, 1, 0, 1, 0, 3] && d.w_prime == 13;
    let mut detail = format!("861 -> coeffs h=3..8 {coeffs:?} w'={}; ", d.w_prime);

    let n = 10_000;
    let budget = 256;
    let items = gen_stream(&StreamSpec::shuffled(n, 11)).unwrap();
    let mut wrng = ChaCha8Rng::seed_from_u64(12);
    let weights: Vec<u64> = (0..n).map(|_| wrng.random_range(1..=1024)).collect();
    let oracle = ExactOracle::weighted(items.iter().copied().zip(weights.iter().copied()).collect());
    let mut base2_errs = Vec::new();
    let mut unit_errs = Vec::new();
    for seed in 0..50 {
        let mut b = Base2Sketch::new(budget, DEFAULT_C, VariantFlags::ALL, seed).unwrap();
        let mut u = Sketch::new(budget, DEFAULT_C, VariantFlags::ALL, seed).unwrap();
        for (x, w) in items.iter().zip(&weights) {
            b.update(*x, *w).unwrap();
            for _ in 0..*w {
                u.update(*x);
            }
        }
        base2_errs.push(max_quantile_error(&b, &oracle, 1000).unwrap());
        unit_errs.push(max_quantile_error(&u, &oracle, 1000).unwrap());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    for (label, a, b) in [
        ("mean", mean(&base2_errs), mean(&unit_errs)),
        ("p50", percentile(&base2_errs, 50.0), percentile(&unit_errs, 50.0)),
        ("p95", percentile(&base2_errs, 95.0), percentile(&unit_errs, 95.0)),
    ] {
        let ratio = a / b;
        pass &= (0.5..=2.0).contains(&ratio);
        detail += &format!("[{label}: base2={a:.4} unit={b:.4} ratio={ratio:.2}] ");
    }
    report(7, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_08_backend_differential() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let kinds = [StreamKind::Sorted, StreamKind::Shuffled, StreamKind::Trending, StreamKind::Brownian];
    let mut mismatches = Vec::new();
    let mut sweep_or_spread = 0;
    for t in 0..1000 {
        let seed: u64 = rng.random();
        let budget = rng.random_range(8..=600);
        let flags = VariantFlags::from_bits(rng.random_range(0..16));
        sweep_or_spread += usize::from(flags.sweep || flags.spreading);
        let n = rng.random_range(0..20_000);
        let spec = StreamSpec {
            trend: 10.0,
            noise: 3.0,
            ..StreamSpec::new(kinds[t % kinds.len()], n).with_seed(seed)
        };
        let items = gen_stream(&spec).unwrap();
        let same = if t % 4 == 3 {
            let mut a = Base2Sketch::with_backend(budget, DEFAULT_C, flags, seed, Backend::Packed).unwrap();
            let mut b = Base2Sketch::with_backend(budget, DEFAULT_C, flags, seed, Backend::List).unwrap();
            for (i, x) in items.iter().enumerate() {
                let w = 1 + (i as u64 * 2654435761) % 300;
                a.update(*x, w).unwrap();
                b.update(*x, w).unwrap();
            }
            a.to_bytes() == b.to_bytes()
        } else {
            let mut a = Sketch::with_backend(budget, DEFAULT_C, flags, seed, Backend::Packed).unwrap();
            let mut b = Sketch::with_backend(budget, DEFAULT_C, flags, seed, Backend::List).unwrap();
            for x in &items {
                a.update(*x);
                b.update(*x);
            }
            a.to_bytes() == b.to_bytes()
        };
        if !same {
            mismatches.push((seed, budget, flags.to_string(), n));
        }
    }
    let pass = mismatches.is_empty();
    let detail = format!(
        "1000 triples ({sweep_or_spread} with sweep or spreading), mismatches: {:?}",
        &mismatches[..mismatches.len().min(5)]
    );
    report(8, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_09_failure_constant() {
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let oracle = c.powi(3) * (2.0 * c - 1.0) / 2.0;
    let got = failure_constant(c);
    let wrong = 2.0 * c * c * (2.0 * c - 1.0);
    let (eps, k) = (0.05, 150);
    let p = failure_probability(eps, k, c).unwrap();
    let p_oracle = 2.0 * (-oracle * eps * eps * f64::from(k) * f64::from(k)).exp();
    let pass = (got - oracle).abs() <= 1e-9
        && (got - 0.07322).abs() <= 1e-5
        && (got - wrong).abs() > 0.1
        && (p - p_oracle).abs() <= 1e-12;
    let detail = format!("C({c:.6}) = {got:.9} (oracle {oracle:.9}); P(0.05, 150) = {p:.6}");
    report(9, pass, &detail);
    assert!(pass, "{detail}");
}

#[test]
fn criterion_10_throughput() {
    let n = 10_000_000;
    let items = gen_stream(&StreamSpec::shuffled(n, 10)).unwrap();
    let mut detail = String::new();
    let mut packed_rate = 0.0;
    for backend in [Backend::Packed, Backend::List] {
        let mut s = Sketch::with_backend(512, DEFAULT_C, VariantFlags::ALL, 1, backend).unwrap();
        let started = Instant::now();
        for x in &items {
            s.update(*x);
        }
        let elapsed = started.elapsed().as_secs_f64();
        let rate = n as f64 / elapsed / 1e6;
        if backend == Backend::Packed {
            packed_rate = rate;
        }
        detail += &format!("[{backend}: {rate:.1}M updates/s");
        if let Some(sort) = s.sort_time() {
            let sort = sort.as_secs_f64();
            detail += &format!(
                ", level-0 sorting {:.0}% of time, {:.1}M/s excluding it",
                100.0 * sort / elapsed,
                n as f64 / (elapsed - sort) / 1e6
            );
        }
        detail += "] ";
        assert!(s.total_weight() == n as u64);
    }
    detail += "(soft target 5M/s, not a gate)";
    let verdict = if packed_rate >= 5.0 { "PASS" } else { "SOFT-MISS" };
    writeln!(std::io::stdout().lock(), "criterion 10: {verdict} {detail}").unwrap();
}
