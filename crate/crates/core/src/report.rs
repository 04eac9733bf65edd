//! Reports, run manifests and DOT snapshots.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cascade::{CascadeTrajectory, StepRecord};
use crate::identify::{cost, SearchResult};
use crate::error::Result;
use crate::network::PowerNetwork;

/// Rounds to `digits` significant digits.
pub fn round_sig(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let text = format!("{:.*e}", digits.saturating_sub(1) as usize, x);
    text.parse().unwrap_or(x)
}

fn round_value(v: &mut Value, digits: u32) {
    match v {
        Value::Number(n) => {
            if let Some(f) = n.as_f64().filter(|_| !n.is_i64() && !n.is_u64()) {
                if let Some(r) = serde_json::Number::from_f64(round_sig(f, digits)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| round_value(x, digits)),
        Value::Object(map) => map.values_mut().for_each(|x| round_value(x, digits)),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 12 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("report types serialize");
    round_value(&mut v, 12);
    serde_json::to_string_pretty(&v).expect("values serialize") + "\n"
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTable {
    pub k: usize,
    /// One-based display label, `Step k+1`.
    pub label: String,
    pub admittances: Vec<f64>,
    pub flows: Vec<f64>,
    pub line_states: Vec<f64>,
    /// One-based bus ids per island.
    pub islands: Vec<Vec<usize>>,
    /// One-based ids of branches out at this step.
    pub dead: Vec<usize>,
    pub outages: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub island_count: usize,
    pub multi_bus_islands: usize,
    pub isolated_buses: usize,
    /// Islands containing a bus with positive injection.
    pub energized_islands: usize,
    pub dead_branches: Vec<usize>,
    pub served_load: f64,
    pub unserved_load: f64,
    pub terminal_cost: f64,
    pub total_cost: f64,
    pub last_outage_step: usize,
    pub steady_state_step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub note: String,
    pub target_branch: usize,
    pub controls: Vec<f64>,
    pub steps: Vec<StepTable>,
    pub summary: ReportSummary,
}

fn ids(network: &PowerNetwork, branches: &[usize]) -> Vec<usize> {
    branches.iter().map(|&l| network.branch(l).id).collect()
}

impl StepTable {
    pub fn from_record(network: &PowerNetwork, rec: &StepRecord) -> Self {
        StepTable {
            k: rec.k,
            label: format!("Step {}", rec.k + 1),
            admittances: rec.y.0.clone(),
            flows: rec.flows.flows.clone(),
            line_states: rec.line_state.0.clone(),
            islands: rec.islands.bus_ids(),
            dead: ids(network, &rec.dead),
            outages: ids(network, &rec.outages),
        }
    }
}

/// Load in islands with and without a positive-injection bus.
pub fn load_service(network: &PowerNetwork, islands: &[Vec<usize>]) -> (f64, f64) {
    let mut served = 0.0;
    let mut unserved = 0.0;
    for island in islands {
        let inj: Vec<f64> = island.iter().map(|&b| network.bus(b - 1).injection).collect();
        let load: f64 = inj.iter().filter(|p| **p < 0.0).map(|p| -p).sum();
        if inj.iter().any(|p| *p > 0.0) {
            served += load;
        } else {
            unserved += load;
        }
    }
    (served, unserved)
}

impl CascadeReport {
    pub fn from_trajectory(
        network: &PowerNetwork,
        trajectory: &CascadeTrajectory,
        epsilon: f64,
    ) -> Result<Self> {
        let steps: Vec<StepTable> = trajectory
            .steps
            .iter()
            .map(|r| StepTable::from_record(network, r))
            .collect();
        let last = steps.last().expect("trajectory is never empty");
        let (served_load, unserved_load) = load_service(network, &last.islands);
        let breakdown = cost(trajectory, epsilon)?;
        let summary = ReportSummary {
            island_count: last.islands.len(),
            multi_bus_islands: last.islands.iter().filter(|i| i.len() > 1).count(),
            isolated_buses: last.islands.iter().filter(|i| i.len() == 1).count(),
            energized_islands: last
                .islands
                .iter()
                .filter(|isl| isl.iter().any(|&b| network.bus(b - 1).injection > 0.0))
                .count(),
            dead_branches: last.dead.clone(),
            served_load,
            unserved_load,
            terminal_cost: breakdown.terminal,
            total_cost: breakdown.total,
            last_outage_step: trajectory.last_outage_step(),
            steady_state_step: trajectory.steady_state_step,
        };
        Ok(CascadeReport {
            note: "k counts cascade steps from 0; the label Step k+1 is one-based"
                .into(),
            target_branch: network.branch(trajectory.plan.target).id,
            controls: trajectory.plan.controls.clone(),
            steps,
            summary,
        })
    }

    /// One CSV row per (step, branch).
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "branch", "admittance", "flow", "line_state", "dead"])?;
        for s in &self.steps {
            for (l, ((y, p), g)) in s
                .admittances
                .iter()
                .zip(&s.flows)
                .zip(&s.line_states)
                .enumerate()
            {
                let dead = s.dead.contains(&(l + 1));
                w.write_record([
                    s.k.to_string(),
                    (l + 1).to_string(),
                    fmt6(*y),
                    fmt6(*p),
                    fmt6(*g),
                    dead.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt6(x: f64) -> String {
    round_sig(x, 6).to_string()
}

/// Ranking table with the columns `branch, abs_u0, j_star`.
pub fn write_ranking_csv<W: Write>(results: &[SearchResult], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["branch", "abs_u0", "j_star"])?;
    for r in results {
        w.write_record([r.branch.to_string(), fmt6(r.u0().abs()), fmt6(r.j_star)])?;
    }
    w.flush()?;
    Ok(())
}

/// Graphviz description of one step: buses as nodes, live branches solid
/// with their flow, dead branches dashed.
pub fn emit_dot(network: &PowerNetwork, step: &StepRecord) -> String {
    let mut s = format!("graph step_{} {{\n  label=\"Step {}\";\n", step.k, step.k + 1);
    for bus in network.buses() {
        s += &format!(
            "  b{} [label=\"{} {}\\n{:.3}\"];\n",
            bus.id,
            bus.id,
            bus.kind.letter(),
            bus.injection
        );
    }
    for (l, br) in network.branches().iter().enumerate() {
        if step.dead.contains(&l) {
            s += &format!(
                "  b{} -- b{} [label=\"{}\", style=dashed, color=gray];\n",
                br.from_bus, br.to_bus, br.id
            );
        } else {
            s += &format!(
                "  b{} -- b{} [label=\"{}: {:.3}\", style=solid];\n",
                br.from_bus, br.to_bus, br.id, step.flows.flows[l]
            );
        }
    }
    s + "}\n"
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub case_path: String,
    pub output_dir: String,
    pub config: Value,
    pub tool_version: String,
    pub wall_time_seconds: f64,
    pub artifacts: Vec<String>,
}
