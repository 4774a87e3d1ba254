//! Acceptance checks, one line per criterion. Exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use juryopt_cli::{preset, run_preset, Command, ExperimentConfig, ResultSet};
use juryopt_core::audit::theorem2_constant;
use juryopt_core::competence::{minimal_consistent_k, CompetenceFunction, Density};
use juryopt_core::multi::{
    is_correct, max_sum_rho, multi_majority_exact, multi_majority_mc, multi_majority_product, CompetenceVector,
};
use juryopt_core::partition::{
    brute_force_best_per_group_count, fixed_cost_size_bound, near_homogeneous_merge, optimal_l_polynomial,
    success_detail, sweep_homogeneous, CostModel, Partition,
};
use juryopt_core::prob::{majority_prob_profile, pb_majority_upper_bound, poisson_binomial_pmf, SuccessProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn house_mu() -> CompetenceFunction {
    CompetenceFunction::max_uniform(0.45, 0.52).unwrap()
}

const HOUSE_N: u64 = 235_000_000;

fn criterion_1() -> Outcome {
    let mu = house_mu();
    let start = Instant::now();
    let s = |p: Partition| success_detail(&p, &mu).unwrap().success;
    let k1 = s(Partition::homogeneous(HOUSE_N, 1).unwrap());
    let k3 = s(Partition::homogeneous(HOUSE_N, 3).unwrap());
    let k9 = s(Partition::homogeneous(HOUSE_N, 9).unwrap());
    let l: Vec<f64> = [2175, 870, 435]
        .iter()
        .map(|&l| s(Partition::with_group_count(HOUSE_N, l).unwrap()))
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    ensure(k1 < 1e-6, format!("success(K=1) = {k1:e}"))?;
    ensure(k3 > 0.9999 && k9 > 0.9999, format!("success(K=3) = {k3}, success(K=9) = {k9}"))?;
    for (got, want, label) in [(l[0], 0.97, 2175), (l[1], 0.88, 870), (l[2], 0.80, 435)] {
        ensure((got - want).abs() <= 0.015, format!("success(L={label}) = {got:.4}, want {want} ± 0.015"))?;
    }
    ensure(elapsed < 5.0, format!("took {elapsed:.2} s"))?;
    Ok(format!(
        "K=1 {k1:.1e}, K=3 {k3:.6}, K=9 {k9:.6}, L=2175 {:.4}, L=870 {:.4}, L=435 {:.4} in {elapsed:.3} s",
        l[0], l[1], l[2]
    ))
}

fn criterion_2() -> Outcome {
    let mu = house_mu();
    let k_star = minimal_consistent_k(&mu, 200).unwrap();
    let sweep = sweep_homogeneous(HOUSE_N, &mu, &CostModel::fixed(0.0).unwrap(), 1..=200).unwrap();
    let k_opt = sweep.best_row().k;
    ensure(k_star == Some(3), format!("K_* = {k_star:?}"))?;
    ensure(k_opt.abs_diff(9) <= 1, format!("K^* = {k_opt}"))?;
    Ok(format!("K_* = 3, K^* = {k_opt}"))
}

fn criterion_3() -> Outcome {
    let cfg = preset("tradeoff").unwrap();
    let mu = cfg.competence().unwrap();
    let start = Instant::now();
    let sweep = sweep_homogeneous(2000, &mu, &CostModel::fixed(0.0).unwrap(), 1..=100).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let best = sweep.best_row();
    let at8 = sweep.rows.iter().find(|r| r.k == 8).unwrap().success;
    ensure(elapsed < 10.0, format!("took {elapsed:.2} s"))?;
    ensure((4..=12).contains(&best.k), format!("argmax K = {}", best.k))?;
    ensure(best.success - at8 <= 0.03, format!("success(8) = {at8}, max = {}", best.success))?;
    let flag = if best.k == 8 { String::new() } else { format!(" [flag: argmax {} differs from reference 8]", best.k) };
    Ok(format!(
        "argmax K = {} (success {:.5}), success(K=8) = {at8:.5}, {elapsed:.3} s{flag}",
        best.k, best.success
    ))
}

fn criterion_4() -> Outcome {
    let f = preset("example4").unwrap().voter_types().unwrap().unwrap();
    let rho = max_sum_rho(&f, 2).unwrap();
    let want = [5.0 / 36.0, 7.0 / 36.0, 13.0 / 36.0, 11.0 / 36.0];
    for (got, want) in rho.mass().iter().zip(want) {
        ensure((got - want).abs() <= 1e-12, format!("mass {:?}", rho.mass()))?;
    }
    let m = rho.marginals();
    ensure((m[0] - 2.0 / 3.0).abs() <= 1e-12 && (m[1] - 0.5).abs() <= 1e-12, format!("marginals {m:?}"))?;
    Ok("mass (5/36, 7/36, 13/36, 11/36), marginals (2/3, 1/2)".into())
}

fn enumerate_pmf(p: &[f64]) -> Vec<f64> {
    let l = p.len();
    let mut mass = vec![0.0; l + 1];
    for mask in 0u32..(1 << l) {
        let prob: f64 = (0..l).map(|i| if mask >> i & 1 == 1 { p[i] } else { 1.0 - p[i] }).product();
        mass[mask.count_ones() as usize] += prob;
    }
    mass
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let l = rng.random_range(1..=12);
        let p: Vec<f64> = (0..l).map(|_| rng.random::<f64>()).collect();
        let dp = poisson_binomial_pmf(&SuccessProfile::new(p.clone()).unwrap()).unwrap();
        for (a, b) in dp.mass().iter().zip(enumerate_pmf(&p)) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-12, format!("max deviation {worst:e}"))?;
    Ok(format!("200 profiles, max deviation {worst:.1e}"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10_000 {
        let l = rng.random_range(1..=13);
        let p: Vec<f64> = (0..l).map(|_| rng.random::<f64>()).collect();
        let mean = p.iter().sum::<f64>() / l as f64;
        let p: Vec<f64> = if mean > 0.5 { p.iter().map(|x| x * 0.5 / mean).collect() } else { p };
        let actual: f64 = enumerate_pmf(&p)[l / 2 + 1..].iter().sum();
        let bound = pb_majority_upper_bound(&SuccessProfile::new(p.clone()).unwrap()).unwrap();
        ensure(actual <= bound + 1e-12, format!("{p:?}: {actual} > {bound}"))?;
    }
    let prof = SuccessProfile::new(vec![5.0 / 6.0, 5.0 / 6.0, 5.0 / 6.0, 0.0, 0.0]).unwrap();
    let actual = majority_prob_profile(&prof).unwrap();
    let bound = pb_majority_upper_bound(&prof).unwrap();
    ensure((actual - 0.5787).abs() < 1e-4, format!("construction actual {actual}"))?;
    ensure((bound - 0.614).abs() < 1e-3, format!("construction bound {bound}"))?;
    ensure(actual <= bound, "construction exceeds bound")?;
    Ok(format!("10000 profiles dominated; construction {actual:.4} ≤ {bound:.4}"))
}

fn criterion_7() -> Outcome {
    let rs = run_preset(Command::Audit, "audit").unwrap();
    let summary = &rs.summary;
    let l3 = summary["reported_violations"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|v| v.as_str().unwrap().ends_with("(L=3;p=0.7)"))
        .count();
    ensure(l3 == 1, format!("L=3/p=0.7 reported {l3} times"))?;
    let families = summary["families"].as_object().unwrap();
    let failing: Vec<String> = families
        .iter()
        .filter(|(_, c)| c["asserted_failures"].as_u64().unwrap() > 0)
        .map(|(name, c)| format!("{name}: {}", c["asserted_failures"]))
        .collect();
    ensure(
        failing.is_empty(),
        format!("asserted-grid violations ({}); L=3/p=0.7 reported once", failing.join(", ")),
    )?;
    Ok("no asserted violations; L=3/p=0.7 reported once".into())
}

fn criterion_8() -> Outcome {
    let mut merges = 0;
    for mu in [CompetenceFunction::max_uniform(0.0, 1.0).unwrap(), CompetenceFunction::max_uniform(0.44, 0.55).unwrap()] {
        for n in 1..=14 {
            for (best, _) in brute_force_best_per_group_count(n, &mu).unwrap() {
                ensure(best.spread() <= 1, format!("n={n}: optimum {:?}", best.sizes()))?;
                for start in [Partition::with_group_count(n, best.len() as u64).unwrap(), best.clone()] {
                    let m = near_homogeneous_merge(&start, &mu).map_err(|e| e.to_string())?;
                    ensure(m.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12), format!("n={n}: trace {:?}", m.trace))?;
                    merges += 1;
                }
            }
        }
    }
    Ok(format!("optima near-homogeneous for n ≤ 14, {merges} merge traces non-decreasing"))
}

fn criterion_9() -> Outcome {
    let mu = CompetenceFunction::max_uniform(0.44, 0.55).unwrap();
    let (tc, bound) = fixed_cost_size_bound(&mu, 200).unwrap().ok_or("no size bound")?;
    ensure((tc.a() - 1.0 / (2.0 * 1.0 / 0.11)).abs() < 1e-12 && tc.alpha() == 1.0, "constants")?;
    ensure((bound - theorem2_constant(&tc) * tc.k_star() as f64).abs() <= 1e-9 * bound, "bound")?;
    let mut opts = Vec::new();
    for n in [500u64, 1000, 2000, 5000, 10_000] {
        let k = sweep_homogeneous(n, &mu, &CostModel::fixed(0.0).unwrap(), 1..=n.min(200)).unwrap().best_row().k;
        ensure(k as f64 <= bound, format!("n={n}: K_opt = {k} > {bound}"))?;
        opts.push(k);
    }
    Ok(format!("K_opt {opts:?} ≤ c·K_* = {bound:.1}"))
}

fn criterion_10() -> Outcome {
    let mu = CompetenceFunction::max_uniform(0.45, 0.9).unwrap();
    let ratios: Vec<f64> = (10..=16)
        .map(|e| {
            let n = 1u64 << e;
            let l = optimal_l_polynomial(n, &mu, 1.0, 1.0, 1..=n).unwrap().best_row().l;
            l as f64 / (n as f64).ln()
        })
        .collect();
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    ensure(lo > 0.0 && hi / lo <= 3.0, format!("L_opt/ln n = {ratios:.3?}"))?;
    Ok(format!("L_opt/ln n in [{lo:.3}, {hi:.3}], spread {:.2}", hi / lo))
}

fn criterion_11() -> Outcome {
    let mu = CompetenceFunction::max_general(Density::uniform(0.0, 1.0).unwrap());
    let mut worst: f64 = 0.0;
    for k in 1..=64u64 {
        worst = worst.max((mu.evaluate(k).unwrap() - k as f64 / (k as f64 + 1.0)).abs());
    }
    ensure(worst <= 1e-6, format!("max deviation {worst:e}"))?;
    Ok(format!("K ≤ 64, max deviation {worst:.1e}"))
}

fn random_vector(rng: &mut ChaCha8Rng, d: usize) -> CompetenceVector {
    let raw: Vec<f64> = (0..1 << d).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    CompetenceVector::new(d, raw.iter().map(|x| x / total).collect()).unwrap()
}

fn enumerate_joint(l: u32, rho: &CompetenceVector) -> f64 {
    let d = rho.d();
    let outcomes = rho.mass().len();
    let mut total = 0.0;
    for code in 0..outcomes.pow(l) {
        let mut c = code;
        let mut prob = 1.0;
        let mut tally = vec![0u32; d];
        for _ in 0..l {
            let b = c % outcomes;
            c /= outcomes;
            prob *= rho.mass()[b];
            for (i, t) in tally.iter_mut().enumerate() {
                *t += u32::from(is_correct(b, i, d));
            }
        }
        if tally.iter().all(|&t| 2 * t > l) {
            total += prob;
        }
    }
    total
}

fn criterion_12() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut enum_dev: f64 = 0.0;
    for _ in 0..20 {
        let rho = random_vector(&mut rng, 2);
        for l in 1..=5 {
            enum_dev = enum_dev.max((multi_majority_exact(l as u64, &rho).unwrap() - enumerate_joint(l, &rho)).abs());
        }
    }
    ensure(enum_dev <= 1e-12, format!("enumeration deviation {enum_dev:e}"))?;

    let mut prod_dev: f64 = 0.0;
    for _ in 0..20 {
        let d = rng.random_range(1..=3);
        let marg: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let rho = CompetenceVector::product(&marg).unwrap();
        for l in [1u64, 2, 7, 20, 41] {
            let exact = multi_majority_exact(l, &rho).unwrap();
            prod_dev = prod_dev.max((exact - multi_majority_product(l, &marg).unwrap()).abs());
        }
    }
    ensure(prod_dev <= 1e-10, format!("product path deviation {prod_dev:e}"))?;

    let mut worst_z: f64 = 0.0;
    for case in 0..50u64 {
        let d = rng.random_range(1..=3);
        let l = rng.random_range(1..=25);
        let rho = random_vector(&mut rng, d);
        let exact = multi_majority_exact(l, &rho).unwrap();
        let est = multi_majority_mc(l, &rho, 100_000, case).unwrap();
        // standard error at the exact value
        let stderr = (exact * (1.0 - exact) / 100_000.0).sqrt();
        let diff = (est.mean - exact).abs();
        ensure(diff <= 4.0 * stderr, format!("case {case}: {est:?} vs {exact}"))?;
        if stderr > 0.0 {
            worst_z = worst_z.max(diff / stderr);
        }
    }
    Ok(format!(
        "enumeration {enum_dev:.1e}, product path {prod_dev:.1e}, MC worst |z| = {worst_z:.2} over 50 cases"
    ))
}

fn preset_command(name: &str) -> Command {
    match name {
        "tradeoff" | "polynomial" => Command::Sweep,
        "house" => Command::House,
        "optk" => Command::Optk,
        "audit" => Command::Audit,
        _ => Command::Multi,
    }
}

fn csv_files(rs: &ResultSet) -> Vec<(String, String)> {
    std::iter::once(("rows.csv".to_string(), &rs.rows))
        .chain(rs.extra.iter().map(|(n, t)| (n.clone(), t)))
        .map(|(n, t)| (n, t.to_csv().unwrap()))
        .collect()
}

fn criterion_13() -> Outcome {
    let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    let (one, four) = (pool(1), pool(4));
    for name in juryopt_cli::PRESET_NAMES {
        let cfg: ExperimentConfig = preset(name).unwrap();
        let cmd = preset_command(name);
        let a = one.install(|| cmd.run(&cfg)).unwrap();
        let b = four.install(|| cmd.run(&cfg)).unwrap();
        let c = four.install(|| cmd.run(&cfg)).unwrap();
        ensure(csv_files(&a) == csv_files(&b), format!("{name}: 1 vs 4 threads differ"))?;
        ensure(csv_files(&b) == csv_files(&c), format!("{name}: rerun differs"))?;
    }
    Ok(format!("{} presets byte-identical across 1 and 4 threads and reruns", juryopt_cli::PRESET_NAMES.len()))
}

fn main() -> ExitCode {
    let criteria: [fn() -> Outcome; 13] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
        criterion_11,
        criterion_12,
        criterion_13,
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(c)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
