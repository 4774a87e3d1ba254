//! The five experiment commands.

use clap::ValueEnum;
use juryopt_core::audit::{run_audit, AuditRecord};
use juryopt_core::competence::{minimal_consistent_k, CompetenceFunction};
use juryopt_core::multi::{
    max_sum_rho, multi_consistency_check, multi_majority_exact, multi_majority_mc, simulate_max_sum_independent,
    CompetenceVector, EXACT_MAX_ISSUES, EXACT_MAX_REPRESENTATIVES,
};
use juryopt_core::partition::{
    fixed_cost_size_bound, optimal_l_polynomial, success_detail, sweep_homogeneous, CostModel, Partition, Sweep,
};
use juryopt_core::prob::{majority_prob_profile, pb_majority_upper_bound, SuccessProfile};
use serde_json::{json, Value};

use crate::config::{preset, DistributionSpec, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::output::{num, opt, pct, ResultSet, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Sweep,
    House,
    Optk,
    Audit,
    Multi,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::House => "house",
            Command::Optk => "optk",
            Command::Audit => "audit",
            Command::Multi => "multi",
        }
    }

    /// Preset used when neither `--config` nor `--preset` is given.
    pub fn default_preset(self) -> &'static str {
        match self {
            Command::Sweep => "tradeoff",
            Command::House => "house",
            Command::Optk => "optk",
            Command::Audit => "audit",
            Command::Multi => "example4",
        }
    }

    pub fn run(self, cfg: &ExperimentConfig) -> Result<ResultSet> {
        match self {
            Command::Sweep => cmd_sweep(cfg),
            Command::House => cmd_house(cfg),
            Command::Optk => cmd_optk(cfg),
            Command::Audit => cmd_audit(cfg),
            Command::Multi => cmd_multi(cfg),
        }
    }
}

/// Runs `command` on a named preset.
pub fn run_preset(command: Command, name: &str) -> Result<ResultSet> {
    command.run(&preset(name)?)
}

fn field(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config { field: field.into(), message: message.into() }
}

fn result(command: Command, cfg: &ExperimentConfig, rows: Table, summary: Value) -> ResultSet {
    ResultSet { command: command.name(), config: cfg.clone(), rows, extra: Vec::new(), summary, asserted_failures: 0 }
}

const SWEEP_HEADER: [&str; 7] = ["K", "L", "success", "success_pct", "ln_failure", "cost", "welfare"];

fn sweep_table(s: &Sweep) -> Table {
    let mut t = Table::new(SWEEP_HEADER);
    for r in &s.rows {
        t.push(vec![
            r.k.to_string(),
            r.l.to_string(),
            num(r.success),
            pct(r.success),
            num(r.ln_failure),
            num(r.cost),
            num(r.welfare),
        ]);
    }
    t
}

fn optimum_json(s: &Sweep) -> Value {
    let b = s.best_row();
    json!({
        "k_opt": b.k,
        "l_opt": b.l,
        "success_at_opt": b.success,
        "ln_failure_at_opt": b.ln_failure,
        "welfare_at_opt": b.welfare,
    })
}

fn reference_flag(cfg: &ExperimentConfig, k_opt: u64) -> Value {
    match cfg.reference_k_opt {
        Some(r) => json!({ "reference_k_opt": r, "matches_reference": r == k_opt }),
        None => Value::Null,
    }
}

fn size_bound_json(mu: &CompetenceFunction, n: u64) -> Result<Value> {
    Ok(match fixed_cost_size_bound(mu, n.min(10_000))? {
        Some((tc, bound)) => json!({
            "eps": tc.eps(),
            "a": tc.a(),
            "alpha": tc.alpha(),
            "k_star": tc.k_star(),
            "k_opt_bound": bound,
        }),
        None => Value::Null,
    })
}

/// Homogeneous `K` sweep, or an `L` sweep under polynomial cost.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<ResultSet> {
    let n = cfg.n()?;
    let mu = cfg.competence()?;
    let cost = cfg.cost_model()?;
    let mut summary = serde_json::Map::new();
    let sweep = if let Some((lo, hi)) = cfg.l_range(Some(n))? {
        let CostModel::Polynomial { q1, q2 } = cost else {
            return Err(field("l_range", "L sweeps need a polynomial cost"));
        };
        let s = optimal_l_polynomial(n, &mu, q1, q2, lo..=hi)?;
        summary.insert("mode".into(), json!("l_sweep"));
        summary.insert("l_opt_over_ln_n".into(), json!(s.best_row().l as f64 / (n as f64).ln()));
        s
    } else {
        let (lo, hi) = cfg.k_range(Some(n))?.ok_or_else(|| field("k_range", "k_range or l_range is required"))?;
        let s = sweep_homogeneous(n, &mu, &cost, lo..=hi)?;
        summary.insert("mode".into(), json!("k_sweep"));
        if matches!(cost, CostModel::Fixed { .. }) {
            summary.insert("size_bound".into(), size_bound_json(&mu, n)?);
        }
        s
    };
    if let Value::Object(o) = optimum_json(&sweep) {
        summary.extend(o);
    }
    summary.insert("reference".into(), reference_flag(cfg, sweep.best_row().k));
    Ok(result(Command::Sweep, cfg, sweep_table(&sweep), Value::Object(summary)))
}

/// Success of selected homogeneous and fixed-`L` partitions plus the `K`
/// sweep that locates the optimum.
pub fn cmd_house(cfg: &ExperimentConfig) -> Result<ResultSet> {
    let n = cfg.n()?;
    let mu = cfg.competence()?;
    let k_values = cfg.k_values.clone().unwrap_or_else(|| vec![1, 3, 9]);
    let l_values = cfg.l_values.clone().unwrap_or_else(|| vec![2175, 870, 435]);
    let (lo, hi) = cfg.k_range(Some(n))?.unwrap_or((1, n.min(200)));

    let mut entries = Vec::new();
    for &k in &k_values {
        let p = Partition::homogeneous(n, k).map_err(|e| field("k_values", e.to_string()))?;
        entries.push((format!("K={k}"), k, p));
    }
    for &l in &l_values {
        let p = Partition::with_group_count(n, l).map_err(|e| field("l_values", e.to_string()))?;
        entries.push((format!("L={l}"), n / l, p));
    }
    let mut rows = Table::new(["column", "K", "L", "success", "success_pct", "ln_failure"]);
    let mut table = serde_json::Map::new();
    for (label, k, p) in entries {
        let m = success_detail(&p, &mu)?;
        rows.push(vec![label.clone(), k.to_string(), p.len().to_string(), num(m.success), pct(m.success), num(m.ln_failure)]);
        table.insert(label, json!(m.success));
    }

    let sweep = sweep_homogeneous(n, &mu, &cfg.cost_model()?, lo..=hi)?;
    let k_star = minimal_consistent_k(&mu, hi)?;
    let best = sweep.best_row();
    let summary = json!({
        "success": table,
        "k_star": k_star,
        "k_opt": best.k,
        "success_at_opt": best.success,
        "ln_failure_at_opt": best.ln_failure,
        "reference": reference_flag(cfg, best.k),
    });
    let mut rs = result(Command::House, cfg, rows, summary);
    rs.extra.push(("sweep.csv".into(), sweep_table(&sweep)));
    Ok(rs)
}

/// `K_*` and the optimal `K` as the upper end of a uniform competence range
/// varies with the lower end fixed.
pub fn cmd_optk(cfg: &ExperimentConfig) -> Result<ResultSet> {
    let n = cfg.n()?;
    let Some(DistributionSpec::Uniform { a, .. }) = cfg.distribution else {
        return Err(field("distribution", "optk needs a uniform distribution"));
    };
    let b_grid = cfg.b_grid.as_ref().ok_or_else(|| field("b_grid", "required by this command"))?;
    if b_grid.is_empty() {
        return Err(field("b_grid", "must not be empty"));
    }
    if let Some(b) = b_grid.iter().find(|&&b| !(b > a && b <= 1.0)) {
        return Err(field("b_grid", format!("{b} outside ({a}, 1]")));
    }
    let (lo, hi) = cfg.k_range(Some(n))?.unwrap_or((1, n.min(200)));
    let cost = cfg.cost_model()?;

    let mut rows = Table::new(["b", "K_star", "K_opt", "success_at_opt", "success_pct"]);
    let mut points = Vec::new();
    for &b in b_grid {
        let mu = cfg.competence_with(Some(&DistributionSpec::Uniform { a, b }))?;
        let k_star = minimal_consistent_k(&mu, hi)?;
        let sweep = sweep_homogeneous(n, &mu, &cost, lo..=hi)?;
        let best = sweep.best_row();
        rows.push(vec![num(b), opt(k_star), best.k.to_string(), num(best.success), pct(best.success)]);
        points.push(json!({ "b": b, "k_star": k_star, "k_opt": best.k, "success_at_opt": best.success }));
    }
    Ok(result(Command::Optk, cfg, rows, json!({ "a": a, "n": n, "points": points })))
}

// Profiles with K+1 members at (2K+1)/(2K+2) and K at 0, whose mean is
// exactly 1/2; the bound must dominate their majority probability.
fn pb_construction_records() -> Result<Vec<AuditRecord>> {
    (1..=10u64)
        .map(|k| {
            let p = (2 * k + 1) as f64 / (2 * k + 2) as f64;
            let mut probs = vec![p; k as usize + 1];
            probs.extend(std::iter::repeat_n(0.0, k as usize));
            let prof = SuccessProfile::new(probs)?;
            let actual = majority_prob_profile(&prof)?;
            let bound = pb_majority_upper_bound(&prof)?;
            let mut r = AuditRecord::check("pb_majority_bound", vec![format!("K={k}")], 0.0, actual, bound);
            r.asserted = true;
            Ok(r)
        })
        .collect()
}

/// Full bound audit over the configured grids.
pub fn cmd_audit(cfg: &ExperimentConfig) -> Result<ResultSet> {
    let mut records = run_audit(&cfg.audit_grid()?)?.records;
    records.extend(pb_construction_records()?);

    let mut rows = Table::new(["name", "params", "lower", "value", "upper", "satisfied", "asserted"]);
    let mut families: Vec<(String, [usize; 3])> = Vec::new();
    let mut asserted = Vec::new();
    let mut reported = Vec::new();
    for r in &records {
        rows.push(vec![
            r.name.clone(),
            r.params_joined(),
            num(r.lower),
            num(r.value),
            num(r.upper),
            r.satisfied.to_string(),
            r.asserted.to_string(),
        ]);
        let idx = match families.iter().position(|(n, _)| *n == r.name) {
            Some(i) => i,
            None => {
                families.push((r.name.clone(), [0; 3]));
                families.len() - 1
            }
        };
        let c = &mut families[idx].1;
        c[0] += 1;
        if !r.satisfied {
            let id = format!("{}({})", r.name, r.params_joined());
            if r.asserted {
                c[1] += 1;
                asserted.push(id);
            } else {
                c[2] += 1;
                reported.push(id);
            }
        }
    }
    let by_family: serde_json::Map<String, Value> = families
        .into_iter()
        .map(|(n, [total, a, v])| (n, json!({ "records": total, "asserted_failures": a, "reported_violations": v })))
        .collect();
    let summary = json!({
        "records": records.len(),
        "families": by_family,
        "asserted_failures": asserted,
        "reported_violations": reported,
    });
    let mut rs = result(Command::Audit, cfg, rows, summary);
    rs.asserted_failures = asserted.len();
    Ok(rs)
}

fn outcome_labels(d: usize) -> Vec<String> {
    (0..1usize << d).map(|b| format!("rho_{b:0d$b}")).collect()
}

fn curve_table(cfg: &ExperimentConfig, rho: &CompetenceVector) -> Result<Table> {
    let (lo, hi) = cfg.l_range(None)?.unwrap_or((1, 25));
    let mut t = Table::new(["L", "joint_success", "stderr", "method"]);
    for l in lo..=hi {
        let row = if rho.d() <= EXACT_MAX_ISSUES && l <= EXACT_MAX_REPRESENTATIVES {
            vec![l.to_string(), num(multi_majority_exact(l, rho)?), String::new(), "exact".into()]
        } else {
            let e = multi_majority_mc(l, rho, cfg.samples, cfg.seed)?;
            vec![l.to_string(), num(e.mean), num(e.stderr), "monte_carlo".into()]
        };
        t.push(row);
    }
    Ok(t)
}

fn curve_vector(cfg: &ExperimentConfig, table: &[CompetenceVector], k_lo: u64) -> Result<CompetenceVector> {
    let k = cfg.curve_k.unwrap_or(k_lo + table.len() as u64 - 1);
    k.checked_sub(k_lo)
        .and_then(|i| table.get(i as usize))
        .cloned()
        .ok_or_else(|| field("curve_k", format!("{k} outside k_range")))
}

/// Max-sum representative table over `K`, per-issue consistency and the
/// joint-majority curve over `L`.
pub fn cmd_multi(cfg: &ExperimentConfig) -> Result<ResultSet> {
    let (k_lo, k_hi) = cfg.k_range(None)?.unwrap_or((1, 8));
    let mut rows;
    let mut table = Vec::new();
    if let Some(f) = cfg.voter_types()? {
        let d = f.d();
        rows = Table::new(
            std::iter::once("K".to_string())
                .chain(outcome_labels(d))
                .chain((1..=d).map(|i| format!("mu_{i}")))
                .chain(std::iter::once("marginal_sum".to_string())),
        );
        for k in k_lo..=k_hi {
            let rho = max_sum_rho(&f, k)?;
            let m = rho.marginals();
            let mut row = vec![k.to_string()];
            row.extend(rho.mass().iter().map(|&x| num(x)));
            row.extend(m.iter().map(|&x| num(x)));
            row.push(num(m.iter().sum()));
            rows.push(row);
            table.push(rho);
        }
    } else if let Some(f) = cfg.independent()? {
        let d = f.d();
        rows = Table::new(
            std::iter::once("K".to_string())
                .chain((1..=d).flat_map(|i| [format!("mu_{i}"), format!("stderr_{i}")]))
                .chain(outcome_labels(d))
                .chain(std::iter::once("marginal_sum".to_string())),
        );
        for k in k_lo..=k_hi {
            let est = simulate_max_sum_independent(&f, k, cfg.samples, cfg.seed)?;
            let mut row = vec![k.to_string()];
            row.extend(est.marginals.iter().flat_map(|e| [num(e.mean), num(e.stderr)]));
            row.extend(est.rho.iter().map(|&x| num(x)));
            row.push(num(est.marginals.iter().map(|e| e.mean).sum()));
            rows.push(row);
            let total: f64 = est.rho.iter().sum();
            table.push(CompetenceVector::new(d, est.rho.iter().map(|x| x / total).collect())?);
        }
    } else {
        return Err(field("voter_types", "multi needs voter_types or independent"));
    }

    let verdict = multi_consistency_check(&table)?;
    let rho = curve_vector(cfg, &table, k_lo)?;
    let curve = curve_table(cfg, &rho)?;
    let summary = json!({
        "d": rho.d(),
        "first_consistent_k": verdict.first_k,
        "consistent": verdict.consistent,
        "curve_k": cfg.curve_k.unwrap_or(k_hi),
    });
    let mut rs = result(Command::Multi, cfg, rows, summary);
    rs.extra.push(("curve.csv".into(), curve));
    Ok(rs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_k_sweep() {
        let cfg = ExperimentConfig { k_range: Some([1, 1]), ..preset("tradeoff").unwrap() };
        let rs = cmd_sweep(&cfg).unwrap();
        assert_eq!(rs.rows.rows.len(), 1);
        assert_eq!(rs.summary["k_opt"], 1);
    }

    #[test]
    fn l_sweep_requires_polynomial_cost() {
        let cfg = ExperimentConfig { l_range: Some([1, 10]), ..preset("tradeoff").unwrap() };
        let err = cmd_sweep(&cfg).unwrap_err();
        assert!(matches!(err, CliError::Config { ref field, .. } if field == "l_range"));
    }

    #[test]
    fn optk_rejects_b_below_a() {
        let cfg = ExperimentConfig { b_grid: Some(vec![0.44]), ..preset("optk").unwrap() };
        let err = cmd_optk(&cfg).unwrap_err();
        assert!(matches!(err, CliError::Config { ref field, .. } if field == "b_grid"));
    }

    #[test]
    fn outcome_labels_are_binary() {
        assert_eq!(outcome_labels(2), ["rho_00", "rho_01", "rho_10", "rho_11"]);
    }

    #[test]
    fn construction_records_hold() {
        let recs = pb_construction_records().unwrap();
        assert!(recs.iter().all(|r| r.satisfied));
        assert!((recs[1].value - (5.0f64 / 6.0).powi(3)).abs() < 1e-12);
    }
}
