use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use siteplan_core::baselines::{exhaustive_oracle, modified_bse, modified_sdr_toa, random_placement};
use siteplan_core::kpi::plan as run_plan;
use siteplan_core::model::Topology;
use siteplan_core::peb::{precompute_geometry, Geometry};
use siteplan_core::report::{fmt_opt, peb_map as compute_peb_map, write_peb_map_csv, PlanReport};
use siteplan_core::rng::derive_seed;
use siteplan_core::scenarios::{self, ScenarioKind, ScenarioSpec};

use crate::config::RunConfig;
use crate::manifest::{sibling, Recorder};
use crate::{CompareArgs, GenerateArgs, OracleArgs, PebMapArgs, PlanArgs};

/// 2 for infeasibility, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<siteplan_core::Error>() {
        Some(err) if err.is_infeasibility() => 2,
        _ => 1,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn json_text<T: serde::Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn load_topology(path: &Path, budget: Option<usize>) -> Result<Topology> {
    let mut topo = scenarios::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(g) = budget {
        topo.budget = g;
    }
    topo.validate()?;
    Ok(topo)
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    let kind = ScenarioKind::parse(&a.kind).ok_or_else(|| anyhow!("unknown scenario kind {:?} (use H, SU or DU)", a.kind))?;
    let mut spec = ScenarioSpec::new(kind, a.seed);
    spec.budget = a.budget;
    let rec = Recorder::new("generate", &spec, Some(a.seed), &[])?;
    let topo = scenarios::generate(&spec)?;
    write_file(&a.out, &scenarios::to_json(&topo)?)?;
    rec.finish(&[&a.out], &sibling(&a.out))
}

pub fn plan(a: &PlanArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.common.config.as_deref())?;
    cfg.apply(a.tpr, a.seed, a.budget);
    cfg.validate()?;
    let topo = load_topology(&a.scenario, cfg.budget)?;
    let mut rec = Recorder::new("plan", &cfg, Some(cfg.plan.solver.seed), &[&a.scenario])?;
    let geom = precompute_geometry(&topo)?;
    let result = run_plan(&geom, &cfg.plan)?;
    rec.converged.push(result.converged);

    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let json_path = a.out.join("plan.json");
    let csv_path = a.out.join("points.csv");
    write_file(&json_path, &json_text(&result)?)?;
    let mut csv = Vec::new();
    result.report.write_points_csv(&mut csv)?;
    write_file(&csv_path, std::str::from_utf8(&csv)?)?;
    let mut outputs = vec![json_path.as_path(), csv_path.as_path()];
    let mut lines = String::new();
    if let Some(trace) = &a.trace {
        for t in result.routine_traces() {
            lines.push_str(&serde_json::to_string(t)?);
            lines.push('\n');
        }
        write_file(trace, &lines)?;
        outputs.push(trace.as_path());
    }
    rec.finish(&outputs, &a.out.join("manifest.json"))
}

fn parse_deployment(spec: &str, n_sites: usize) -> Result<Vec<bool>> {
    let as_indices: Option<Vec<usize>> = spec.split(',').map(|s| s.trim().parse().ok()).collect();
    if let Some(idx) = as_indices {
        let mut x = vec![false; n_sites];
        for j in idx {
            if j >= n_sites {
                bail!("site index {j} out of range (topology has {n_sites} sites)");
            }
            x[j] = true;
        }
        return Ok(x);
    }
    let text = std::fs::read_to_string(spec).with_context(|| format!("reading deployment {spec}"))?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(siteplan_core::Error::from)?;
    let x = v.get("report").and_then(|r| r.get("x")).or_else(|| v.get("x")).ok_or_else(|| anyhow!("{spec}: no deployment vector `x`"))?;
    let x: Vec<bool> = serde_json::from_value(x.clone())?;
    if x.len() != n_sites {
        bail!("{spec}: deployment has {} entries, topology has {n_sites} sites", x.len());
    }
    Ok(x)
}

pub fn peb_map(a: &PebMapArgs) -> Result<()> {
    let topo = load_topology(&a.scenario, None)?;
    let x = parse_deployment(&a.deployment, topo.n_sites())?;
    let mut inputs = vec![a.scenario.as_path()];
    let dep_path = Path::new(&a.deployment);
    if dep_path.is_file() {
        inputs.push(dep_path);
    }
    let rec = Recorder::new("peb-map", &serde_json::json!({ "x": x, "grid_spacing_m": a.grid_spacing }), None, &inputs)?;
    let cells = compute_peb_map(&topo, &x, a.grid_spacing)?;
    let mut csv = Vec::new();
    write_peb_map_csv(&cells, &mut csv)?;
    write_file(&a.out, std::str::from_utf8(&csv)?)?;
    rec.finish(&[&a.out], &sibling(&a.out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Planner {
    Joint,
    Bse,
    SdrToa,
    Oracle,
    Random,
}

impl Planner {
    fn parse(s: &str) -> Result<Planner> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "joint" | "loko" => Planner::Joint,
            "bse" => Planner::Bse,
            "sdr-toa" | "sdr_toa" => Planner::SdrToa,
            "oracle" => Planner::Oracle,
            "random" => Planner::Random,
            other => bail!("unknown planner {other:?}"),
        })
    }

    fn id(self) -> &'static str {
        match self {
            Planner::Joint => "joint",
            Planner::Bse => "bse",
            Planner::SdrToa => "sdr-toa",
            Planner::Oracle => "oracle",
            Planner::Random => "random",
        }
    }

    /// Output does not depend on the seed.
    fn seedless(self) -> bool {
        matches!(self, Planner::Bse | Planner::Oracle)
    }
}

fn parse_budgets(s: Option<&str>, default: usize) -> Result<Vec<usize>> {
    let Some(s) = s else { return Ok(vec![default]) };
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().with_context(|| format!("bad budget range {s:?}"))?;
        let b: usize = b.trim().parse().with_context(|| format!("bad budget range {s:?}"))?;
        if a > b {
            bail!("empty budget range {s:?}");
        }
        Ok((a..=b).collect())
    } else {
        Ok(vec![s.trim().parse().with_context(|| format!("bad budget {s:?}"))?])
    }
}

fn run_planner(p: Planner, topo: &Topology, geom: &Geometry, cfg: &RunConfig, seed: u64) -> Result<(PlanReport, Option<bool>)> {
    let mu = cfg.plan.mu;
    let mut solver = cfg.plan.solver;
    solver.seed = seed;
    Ok(match p {
        Planner::Joint => {
            let mut pc = cfg.plan;
            pc.solver = solver;
            let r = run_plan(geom, &pc)?;
            (r.report, Some(r.converged))
        }
        Planner::Bse => (modified_bse(geom, cfg.bse_rate_floor_mbps, mu)?.report, None),
        Planner::SdrToa => (modified_sdr_toa(topo, geom, cfg.sdr_toa_rate_threshold_mbps, &solver, mu)?.report, None),
        Planner::Oracle => (exhaustive_oracle(geom, mu, cfg.oracle_max_evals)?.report, None),
        Planner::Random => (random_placement(geom, mu, derive_seed(seed, &[0x72616e64]))?.report, None),
    })
}

pub fn compare(a: &CompareArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.common.config.as_deref())?;
    cfg.apply(a.tpr, None, None);
    cfg.validate()?;
    let planners: Vec<Planner> = a.planners.split(',').map(Planner::parse).collect::<Result<_>>()?;
    let base = load_topology(&a.scenario, None)?;
    let budgets = parse_budgets(a.budget_range.as_deref(), cfg.budget.unwrap_or(base.budget))?;
    if a.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let mut rec = Recorder::new("compare", &cfg, None, &[&a.scenario])?;
    let mut geom = precompute_geometry(&base)?;

    let mut csv = String::from("planner,G,seed,min_rate_mbps,max_peb_m,avg_peb_m,joint_value\n");
    for &g in &budgets {
        let mut topo = base.clone();
        topo.budget = g;
        topo.validate()?;
        geom.budget = g;
        for &p in &planners {
            let mut cached: Option<PlanReport> = None;
            for seed in 0..a.seeds {
                let report = match (&cached, p.seedless()) {
                    (Some(r), true) => r.clone(),
                    _ => {
                        let (r, conv) = run_planner(p, &topo, &geom, &cfg, seed)?;
                        rec.converged.extend(conv);
                        if p.seedless() {
                            cached = Some(r.clone());
                        }
                        r
                    }
                };
                writeln!(
                    csv,
                    "{},{g},{seed},{:.6},{},{},{}",
                    p.id(),
                    report.min_rate_mbps,
                    fmt_opt(report.max_peb_m),
                    fmt_opt(report.avg_peb_m),
                    report.joint_value.map_or("-inf".to_string(), |v| format!("{v:.6}"))
                )?;
            }
        }
    }
    write_file(&a.out, &csv)?;
    rec.finish(&[&a.out], &sibling(&a.out))
}

pub fn oracle(a: &OracleArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.common.config.as_deref())?;
    cfg.apply(a.tpr, None, a.budget);
    if let Some(m) = a.max_evals {
        cfg.oracle_max_evals = m;
    }
    cfg.validate()?;
    let topo = load_topology(&a.scenario, cfg.budget)?;
    let rec = Recorder::new("oracle", &cfg, None, &[&a.scenario])?;
    let geom = precompute_geometry(&topo)?;
    let result = exhaustive_oracle(&geom, cfg.plan.mu, cfg.oracle_max_evals)?;
    let text = json_text(&result)?;
    match &a.out {
        Some(out) => {
            write_file(out, &text)?;
            rec.finish(&[out], &sibling(out))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
