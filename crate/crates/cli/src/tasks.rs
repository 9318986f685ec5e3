//! One function per experiment task.

use dynrisk::dynamics::{build_dynamic, check_cocycle, check_recursion_dynamic, expand_dual};
use dynrisk::gexp::{bsb_solve, robust_lattice_price, robust_lattice_price_lower, GridSpec, Surface, VolatilityBand};
use dynrisk::measures::capacity;
use dynrisk::risk::{acceptance_check, minimal_penalty, rm_evaluate};
use dynrisk::skorokhod::{dhat_distance, dm_distance, j1_distance, StepPath};
use dynrisk::stability::{enumerate_selections, is_stable, paste, rectangular_hull};
use dynrisk::{MeasureFamily, NodeRef, ScenarioLattice, StoppingTime};
use serde_json::{json, Value};

use crate::config::{
    default_tolerances, Engine, LoadedConfig, Metric, Task, VariableSpec, DEFAULT_KAPPA, DEFAULT_RADIUS,
    DEFAULT_SAMPLES, DEFAULT_SELECTION_CAP,
};
use crate::inputs::{fixture_rng, variables, Inputs};
use crate::report::{Check, Outcome, Table};
use crate::RunError;

/// Time steps of a surface written to CSV: about ten, always the first and last.
const SURFACE_ROWS: usize = 10;

fn tolerance(loaded: &LoadedConfig, name: &str) -> f64 {
    let c = &loaded.config;
    c.tolerances.get(name).copied().unwrap_or_else(|| {
        default_tolerances(c.task)
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .expect("known tolerance")
    })
}

fn node_id(time: usize, index: usize) -> String {
    format!("{time}:{index}")
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn run(loaded: &LoadedConfig, inputs: &mut Inputs<'_>, seed: u64) -> Result<Outcome, RunError> {
    match loaded.config.task {
        Task::Eval => eval(loaded, inputs, seed),
        Task::Penalty => penalty(loaded, inputs),
        Task::Consistency => consistency(loaded, inputs, seed),
        Task::Stability => stability(loaded, inputs),
        Task::Gexp => gexp(loaded),
        Task::Skorokhod => skorokhod(loaded),
        Task::AcceptanceSuite => Ok(acceptance_suite(seed)),
    }
}

fn eval(loaded: &LoadedConfig, inputs: &mut Inputs<'_>, seed: u64) -> Result<Outcome, RunError> {
    let c = &loaded.config;
    let l = inputs.lattice()?;
    let rep = inputs.dual(&l)?;
    let family = if c.measures.is_empty() {
        None
    } else {
        let members = inputs.measures(&l)?;
        Some(MeasureFamily::new(members, c.p.unwrap_or(1.0)).map_err(|e| RunError::input(loaded, "p", e))?)
    };
    let spec = c.variable.as_ref().ok_or_else(|| RunError::missing(loaded, "variable"))?;
    let xs = variables(loaded, &l, spec, &mut fixture_rng(seed))?;
    let tol = tolerance(loaded, "acceptance");
    let run = |e| RunError::from_core(loaded, "variable", e);

    let mut table = Table::new("eval.csv", vec!["variable", "node_id", "time", "value"]);
    let mut out = Vec::new();
    for (k, x) in xs.iter().enumerate() {
        let v = rm_evaluate(&l, &rep, x).map_err(run)?;
        let acc = acceptance_check(&l, &rep, x, None).map_err(run)?;
        let accepted_nodes: Vec<bool> = acc
            .risk
            .iter()
            .zip(&acc.relevant)
            .map(|(&r, &rel)| !rel || r <= tol)
            .collect();
        for (i, &r) in v.value.values().iter().enumerate() {
            table.push(vec![k.to_string(), node_id(rep.s(), i), rep.s().to_string(), num(r)]);
        }
        let cap = match &family {
            Some(f) => Some(capacity(&l, x, f).map_err(run)?),
            None => None,
        };
        out.push(json!({
            "risk": v.value.values(),
            "argmax": v.argmax,
            "accepted": accepted_nodes.iter().all(|&a| a),
            "accepted_nodes": accepted_nodes,
            "capacity": cap,
        }));
    }
    let mut outcome = Outcome {
        results: json!({ "s": rep.s(), "t": rep.t(), "components": rep.components().len(), "variables": out }),
        tables: vec![table],
        ..Outcome::default()
    };
    outcome.tolerances.insert("acceptance".into(), tol);
    Ok(outcome)
}

fn penalty(loaded: &LoadedConfig, inputs: &mut Inputs<'_>) -> Result<Outcome, RunError> {
    let l = inputs.lattice()?;
    let rep = inputs.dual(&l)?;
    let queries = inputs.queries(&l)?;
    let mut table = Table::new("penalty.csv", vec!["query", "node_id", "time", "value"]);
    let mut out = Vec::new();
    for (name, q) in loaded.config.queries.iter().zip(&queries) {
        let pen = minimal_penalty(&l, &rep, q).map_err(|e| RunError::from_core(loaded, "queries", e))?;
        for (i, v) in pen.values.iter().enumerate() {
            table.push(vec![name.clone(), node_id(pen.time, i), pen.time.to_string(), v.to_string()]);
        }
        out.push(json!({ "measure": name, "time": pen.time, "penalty": pen.values }));
    }
    Ok(Outcome {
        results: json!({ "s": rep.s(), "t": rep.t(), "queries": out }),
        tables: vec![table],
        ..Outcome::default()
    })
}

fn consistency(loaded: &LoadedConfig, inputs: &mut Inputs<'_>, seed: u64) -> Result<Outcome, RunError> {
    let c = &loaded.config;
    let l = inputs.lattice()?;
    let d = build_dynamic(&l, inputs.structure(&l)?).map_err(|e| RunError::input(loaded, "structure", e))?;
    let big_t = l.terminal();
    let spec = c.variable.clone().unwrap_or(VariableSpec::Random {
        time: big_t,
        count: c.samples.unwrap_or(DEFAULT_SAMPLES),
        scale: 1.0,
    });
    let xs = variables(loaded, &l, &spec, &mut fixture_rng(seed))?;
    let run = |e| RunError::from_core(loaded, "structure", e);
    let recursion = check_recursion_dynamic(&d, &xs).map_err(run)?;

    let cap = c.selection_cap.unwrap_or(DEFAULT_SELECTION_CAP);
    let mut table = Table::new("cocycle.csv", vec!["r", "s", "t", "selections", "max_abs"]);
    let mut worst = 0.0f64;
    let mut indeterminate = Vec::new();
    for r in 0..=big_t {
        for s in r + 1..=big_t {
            for t in s + 1..=big_t {
                let rt = expand_dual(&d, r, t, cap).map_err(run)?;
                let rs = expand_dual(&d, r, s, cap).map_err(run)?;
                let st = expand_dual(&d, s, t, cap).map_err(run)?;
                let mut triple = 0.0f64;
                for comp in rt.components() {
                    let rep = check_cocycle(&l, &rt, &rs, &st, &comp.measure).map_err(run)?;
                    triple = triple.max(rep.max_abs);
                    indeterminate.extend(rep.indeterminate.iter().map(|n| (r, s, t, *n)));
                }
                worst = worst.max(triple);
                table.push(vec![r.to_string(), s.to_string(), t.to_string(), rt.components().len().to_string(), num(triple)]);
            }
        }
    }
    let mut outcome = Outcome {
        results: json!({
            "normalized": d.is_normalized(),
            "samples": xs.len(),
            "recursion": recursion,
            "cocycle_max_abs": worst,
            "indeterminate": indeterminate.iter().map(|(r, s, t, n)| json!([r, s, t, n])).collect::<Vec<_>>(),
        }),
        checks: vec![
            Check::new("recursion", recursion.max_violation, tolerance(loaded, "recursion")),
            Check::new("cocycle", worst, tolerance(loaded, "cocycle")),
        ],
        tables: vec![table],
        ..Outcome::default()
    };
    if !indeterminate.is_empty() {
        outcome.failures.push(format!("{} indeterminate cocycle residuals", indeterminate.len()));
    }
    Ok(outcome)
}

fn stopping_time(loaded: &LoadedConfig, l: &ScenarioLattice) -> Result<StoppingTime, RunError> {
    let err = |e| RunError::input(loaded, "stopping_time", e);
    match &loaded.config.stopping_time {
        Some(st) => match (&st.time, &st.nodes) {
            (Some(t), None) => StoppingTime::deterministic(l, *t).map_err(err),
            (None, Some(nodes)) => StoppingTime::new(l, nodes.iter().copied()).map_err(err),
            _ => Err(RunError::config(loaded, "stopping_time", "give exactly one of `time` or `nodes`".into())),
        },
        None => StoppingTime::deterministic(l, l.terminal().min(1)).map_err(err),
    }
}

fn stability(loaded: &LoadedConfig, inputs: &mut Inputs<'_>) -> Result<Outcome, RunError> {
    let l = inputs.lattice()?;
    let family = inputs.measures(&l)?;
    let tau = stopping_time(loaded, &l)?;
    let cap = loaded.config.selection_cap.unwrap_or(DEFAULT_SELECTION_CAP);
    let run = |e| RunError::from_core(loaded, "measures", e);

    let mut tables = Vec::new();
    let pasted = if family.len() >= 2 {
        let r = paste(&l, &family[0], &family[1], &tau).map_err(run)?;
        let mut t = Table::new("paste.csv", vec!["node_id", "time", "child", "weight"]);
        for k in &r.to_spec().kernels {
            for (j, w) in k.weights.iter().enumerate() {
                t.push(vec![node_id(k.node.time, k.node.index), k.node.time.to_string(), j.to_string(), num(*w)]);
            }
        }
        tables.push(t);
        Some(r.to_spec())
    } else {
        None
    };
    let taus = StoppingTime::enumerate(&l, cap).map_err(run)?;
    let describe = |check: dynrisk::stability::StabilityCheck| {
        json!({
            "stable": check.stable,
            "missing": check.missing.map(|m| json!({
                "p_index": m.p_index,
                "q_index": m.q_index,
                "stopping_time": taus[m.tau_index].nodes().iter().collect::<Vec<&NodeRef>>(),
            })),
        })
    };
    let family_check = describe(is_stable(&l, &family, &taus).map_err(run)?);
    let hull = rectangular_hull(&l, &family).map_err(run)?;
    let selections = enumerate_selections(&l, &hull, cap).map_err(run)?;
    let hull_check = describe(is_stable(&l, &selections, &taus).map_err(run)?);
    Ok(Outcome {
        results: json!({
            "stopping_time": tau.nodes().iter().collect::<Vec<&NodeRef>>(),
            "paste": pasted,
            "stopping_times_checked": taus.len(),
            "family": family_check,
            "hull_selections": selections.len(),
            "hull": hull_check,
        }),
        tables,
        ..Outcome::default()
    })
}

fn surface_table(file: &str, s: &Surface) -> Table {
    let mut t = Table::new(file, vec!["t", "x", "value"]);
    let last = s.rows.len() - 1;
    let stride = (last / SURFACE_ROWS).max(1);
    for (k, row) in s.rows.iter().enumerate() {
        if k % stride != 0 && k != last {
            continue;
        }
        for (i, v) in row.values.iter().enumerate() {
            t.push(vec![num(row.time), num(s.x(row.first_level + i as i64)), num(*v)]);
        }
    }
    t
}

fn gexp(loaded: &LoadedConfig) -> Result<Outcome, RunError> {
    let g = loaded.config.gexp.as_ref().ok_or_else(|| RunError::missing(loaded, "gexp"))?;
    let band = VolatilityBand::constant(g.sigma_low, g.sigma_high).map_err(|e| RunError::input(loaded, "sigma_low", e))?;
    let h = g
        .h
        .unwrap_or_else(|| GridSpec::cfl_step(g.dt, g.sigma_high, g.kappa.unwrap_or(DEFAULT_KAPPA)));
    let probe = GridSpec {
        dt: g.dt,
        h,
        levels: 1,
        maturity: g.maturity,
    };
    let steps = probe.check_cfl(&band).map_err(|e| RunError::from_core(loaded, "dt", e))?;
    let payoff = |x: f64| g.payoff.eval(x);
    let negated = |x: f64| -g.payoff.eval(x);
    let run = |e| RunError::from_core(loaded, "gexp", e);

    let mut results = serde_json::Map::new();
    results.insert("h".into(), json!(h));
    results.insert("steps".into(), json!(steps));
    let mut tables = Vec::new();
    let mut values: Vec<(f64, f64)> = Vec::new();
    if matches!(g.engine, Engine::Lattice | Engine::Both) {
        let grid = GridSpec {
            levels: g.levels.unwrap_or(steps),
            ..probe
        };
        let ask = robust_lattice_price(&payoff, &band, &grid).map_err(run)?;
        let bid = robust_lattice_price_lower(&payoff, &band, &grid).map_err(run)?;
        results.insert("lattice".into(), json!({ "levels": grid.levels, "ask": ask.value(), "bid": bid.value() }));
        values.push((ask.value(), bid.value()));
        tables.push(surface_table("gexp_lattice.csv", &ask));
    }
    if matches!(g.engine, Engine::Pde | Engine::Both) {
        let grid = match g.levels {
            Some(levels) => GridSpec { levels, ..probe },
            None => GridSpec::with_radius(g.dt, h, g.radius.unwrap_or(DEFAULT_RADIUS), g.maturity),
        };
        let ask = bsb_solve(&payoff, &band, &grid).map_err(run)?;
        let bid = bsb_solve(&negated, &band, &grid).map_err(run)?.negated();
        results.insert("pde".into(), json!({ "levels": grid.levels, "ask": ask.value(), "bid": bid.value() }));
        values.push((ask.value(), bid.value()));
        tables.push(surface_table("gexp_pde.csv", &ask));
    }

    let mut checks = Vec::new();
    if let Some(e) = g.expected {
        let worst = values.iter().map(|v| (v.0 - e).abs()).fold(0.0, f64::max);
        checks.push(Check::new("expected", worst, tolerance(loaded, "expected")));
    }
    if let Some(e) = g.expected_lower {
        let worst = values.iter().map(|v| (v.1 - e).abs()).fold(0.0, f64::max);
        checks.push(Check::new("expected_lower", worst, tolerance(loaded, "expected_lower")));
    }
    if let [a, b] = values[..] {
        let gap = (a.0 - b.0).abs().max((a.1 - b.1).abs());
        checks.push(Check::new("engine_gap", gap, tolerance(loaded, "engine_gap")));
    }
    Ok(Outcome {
        results: Value::Object(results),
        checks,
        tables,
        ..Outcome::default()
    })
}

fn distance(metric: &Metric, x: &StepPath, y: &StepPath) -> dynrisk::Result<(f64, Value)> {
    Ok(match metric {
        Metric::Dm { m } => {
            let r = dm_distance(x, y, *m)?;
            (r.value, json!(r.lambda.knots))
        }
        Metric::J1 { horizon } => {
            let r = j1_distance(x, y, *horizon)?;
            (r.value, json!(r.lambda.knots))
        }
        Metric::Dhat { t, max_m } => {
            let r = dhat_distance(x, y, *t, *max_m)?;
            (r.value, json!({ "terms": r.terms, "tail_bound": r.tail_bound }))
        }
    })
}

fn skorokhod(loaded: &LoadedConfig) -> Result<Outcome, RunError> {
    let spec = loaded.config.skorokhod.as_ref().ok_or_else(|| RunError::missing(loaded, "skorokhod"))?;
    let run = |e| RunError::from_core(loaded, "pairs", e);
    let mut table = Table::new("skorokhod.csv", vec!["pair", "value", "reverse"]);
    let mut out = Vec::new();
    let mut asymmetry = 0.0f64;
    for (k, (x, y)) in spec.pairs.iter().enumerate() {
        let (d, detail) = distance(&spec.metric, x, y).map_err(run)?;
        let (rev, _) = distance(&spec.metric, y, x).map_err(run)?;
        asymmetry = asymmetry.max((d - rev).abs());
        table.push(vec![k.to_string(), num(d), num(rev)]);
        out.push(json!({ "value": d, "reverse": rev, "detail": detail }));
    }
    Ok(Outcome {
        results: json!({ "pairs": out }),
        checks: vec![Check::new("symmetry", asymmetry, tolerance(loaded, "symmetry"))],
        tables: vec![table],
        ..Outcome::default()
    })
}

fn acceptance_suite(seed: u64) -> Outcome {
    let results = dynrisk_verify::run_all(seed);
    let mut table = Table::new("acceptance.csv", vec!["criterion", "metric", "value", "tolerance", "passed"]);
    let mut failures = Vec::new();
    let mut checks = Vec::new();
    let mut out = Vec::new();
    for r in &results {
        // Wall-clock metrics would make the report differ between runs.
        let metrics: Vec<_> = r.metrics.iter().filter(|m| !m.name.contains("runtime")).collect();
        for m in &metrics {
            table.push(vec![r.id.to_string(), m.name.clone(), num(m.value), num(m.tolerance), m.passed.to_string()]);
        }
        let failed = r.metrics.iter().filter(|m| !m.passed).count();
        checks.push(Check::new(&format!("criterion_{}_failed_metrics", r.id), failed as f64, 0.0));
        if !r.passed && failed == 0 {
            failures.push(format!("criterion {} ({}) exceeded its time limit", r.id, r.name));
        }
        out.push(json!({
            "id": r.id,
            "name": r.name,
            "passed": r.passed,
            "time_limit_secs": r.time_limit_secs,
            "metrics": metrics,
            "notes": r.notes,
        }));
    }
    Outcome {
        results: json!({ "criteria": out }),
        checks,
        tables: vec![table],
        failures,
        ..Outcome::default()
    }
}
