//! LP-based branch and bound over binary variables.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::simplex::{LpData, LpStatus};
use crate::error::{Error, Result};
use crate::milp::{MilpModel, VarKind};

/// Integrality tolerance on binaries.
pub const INT_TOL: f64 = 1e-6;
/// Largest row, bound or integrality violation accepted from a heuristic.
pub const HEURISTIC_TOL: f64 = 1e-6;
/// After the first incumbent, the heuristic runs on every this-many nodes.
const HEURISTIC_EVERY: usize = 10;

/// Problem-specific completion of a fractional LP point into a full
/// assignment. Proposals are checked against the model before acceptance.
pub trait PrimalHeuristic: Sync {
    fn propose(&self, lp_x: &[f64]) -> Option<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branching {
    MostFractional,
    PseudoCost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeOrder {
    /// Lowest open bound first, diving depth-first until a first incumbent.
    BestBound,
    DepthFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Seconds.
    pub time_limit: f64,
    pub node_limit: usize,
    pub mip_gap_target: f64,
    pub branching: Branching,
    pub node_order: NodeOrder,
    /// Emit a log line every this many nodes (0 disables periodic lines).
    pub log_interval: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            time_limit: 1000.0,
            node_limit: usize::MAX,
            mip_gap_target: 0.0,
            branching: Branching::MostFractional,
            node_order: NodeOrder::BestBound,
            log_interval: 100,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_limit > 0.0) {
            return Err(Error::InvalidArgument("time_limit must be positive".into()));
        }
        if self.node_limit == 0 {
            return Err(Error::InvalidArgument("node_limit must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.mip_gap_target) {
            return Err(Error::InvalidArgument("mip_gap_target must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MilpStatus {
    Optimal,
    /// A limit stopped the search with an incumbent in hand.
    FeasibleLimitHit,
    Infeasible,
    Unbounded,
    /// A limit stopped the search before any incumbent was found.
    LimitNoIncumbent,
}

impl MilpStatus {
    pub fn label(self) -> &'static str {
        match self {
            MilpStatus::Optimal => "optimal",
            MilpStatus::FeasibleLimitHit => "feasible-limit-hit",
            MilpStatus::Infeasible => "infeasible",
            MilpStatus::Unbounded => "unbounded",
            MilpStatus::LimitNoIncumbent => "limit-no-incumbent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpResult {
    pub status: MilpStatus,
    pub incumbent: Option<Vec<f64>>,
    /// Incumbent objective, `+inf` without one.
    pub objective: f64,
    pub best_bound: f64,
    /// `+inf` without an incumbent.
    pub mip_gap: f64,
    pub nodes: usize,
    pub wall_time: f64,
    /// Nodes whose LP failed numerically; their subtrees were not explored.
    pub abandoned_nodes: usize,
    pub log: Vec<String>,
}

pub fn mip_gap(objective: f64, bound: f64) -> f64 {
    if !objective.is_finite() {
        return f64::INFINITY;
    }
    ((objective - bound) / objective.abs().max(1e-9)).max(0.0)
}

struct Node {
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Parent LP objective, a valid bound for the subtree.
    bound: f64,
    depth: usize,
    /// (variable, went up, fractional distance moved, parent objective)
    branched: Option<(usize, bool, f64, f64)>,
}

#[derive(Default, Clone, Copy)]
struct PseudoCost {
    down_sum: f64,
    down_n: u32,
    up_sum: f64,
    up_n: u32,
}

pub fn solve_milp(model: &MilpModel, cfg: &SolveConfig) -> Result<MilpResult> {
    solve_milp_with(model, cfg, None)
}

/// Branch and bound with an optional primal heuristic.
pub fn solve_milp_with(
    model: &MilpModel,
    cfg: &SolveConfig,
    heuristic: Option<&dyn PrimalHeuristic>,
) -> Result<MilpResult> {
    model.validate()?;
    cfg.validate()?;
    let start = Instant::now();
    let lp = LpData::from_model(model);
    let binaries: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| i)
        .collect();

    let mut open = vec![Node {
        lower: lp.lower.clone(),
        upper: lp.upper.clone(),
        bound: f64::NEG_INFINITY,
        depth: 0,
        branched: None,
    }];
    let mut incumbent: Option<Vec<f64>> = None;
    let mut inc_obj = f64::INFINITY;
    let mut best_bound = f64::NEG_INFINITY;
    let mut nodes = 0usize;
    let mut abandoned = 0usize;
    let mut abandoned_bound = f64::INFINITY;
    let mut log = Vec::new();
    let mut pseudo = vec![PseudoCost::default(); model.num_vars()];
    let mut unbounded = false;
    let mut hit_limit = false;

    let log_line = |nodes: usize, bound: f64, inc: f64, start: &Instant| {
        format!(
            "node,{nodes},bound,{bound},incumbent,{inc},gap,{},time_s,{:.3}",
            mip_gap(inc, bound),
            start.elapsed().as_secs_f64()
        )
    };

    loop {
        let open_min = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
        let lower = open_min.min(abandoned_bound).min(inc_obj);
        if lower > best_bound {
            best_bound = lower;
        }
        if incumbent.is_some() && mip_gap(inc_obj, best_bound) <= cfg.mip_gap_target && abandoned == 0 {
            break;
        }
        if open.is_empty() {
            break;
        }
        if nodes >= cfg.node_limit || start.elapsed().as_secs_f64() >= cfg.time_limit {
            hit_limit = true;
            break;
        }

        let pick = match (cfg.node_order, incumbent.is_some()) {
            (NodeOrder::BestBound, true) => {
                let mut best = 0;
                for (i, n) in open.iter().enumerate() {
                    // Ties go to the most recently created node.
                    if n.bound <= open[best].bound {
                        best = i;
                    }
                }
                best
            }
            _ => open.len() - 1,
        };
        let node = open.swap_remove(pick);
        if node.bound >= inc_obj - prune_tol(inc_obj) {
            continue;
        }
        nodes += 1;

        let res = match lp.solve(&node.lower, &node.upper) {
            Ok(r) => r,
            Err(_) => {
                abandoned += 1;
                abandoned_bound = abandoned_bound.min(node.bound);
                continue;
            }
        };
        if cfg.log_interval > 0 && nodes % cfg.log_interval == 0 {
            log.push(log_line(nodes, best_bound, inc_obj, &start));
        }
        match res.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                unbounded = true;
                break;
            }
            LpStatus::Optimal => {}
        }
        if let Some((var, up, dist, parent_obj)) = node.branched {
            if parent_obj.is_finite() && dist > 0.0 {
                let per_unit = ((res.objective - parent_obj) / dist).max(0.0);
                let pc = &mut pseudo[var];
                if up {
                    pc.up_sum += per_unit;
                    pc.up_n += 1;
                } else {
                    pc.down_sum += per_unit;
                    pc.down_n += 1;
                }
            }
        }
        if res.objective >= inc_obj - prune_tol(inc_obj) {
            continue;
        }

        let fractional: Vec<(usize, f64)> = binaries
            .iter()
            .map(|&j| (j, res.x[j]))
            .filter(|&(_, v)| (v - v.round()).abs() > INT_TOL)
            .collect();
        if fractional.is_empty() {
            let x = polish(&lp, &node, &binaries, &res.x);
            let obj = model.objective_value(&x);
            if obj < inc_obj {
                inc_obj = obj;
                incumbent = Some(x);
                log.push(log_line(nodes, best_bound.min(inc_obj), inc_obj, &start));
            }
            continue;
        }

        if let Some(h) = heuristic {
            if incumbent.is_none() || nodes % HEURISTIC_EVERY == 1 {
                if let Some(mut x) = h.propose(&res.x) {
                    for &j in &binaries {
                        x[j] = x[j].round();
                    }
                    let obj = model.objective_value(&x);
                    if obj < inc_obj && model.max_violation(&x) <= HEURISTIC_TOL {
                        inc_obj = obj;
                        incumbent = Some(x);
                        log.push(log_line(nodes, best_bound.min(inc_obj), inc_obj, &start));
                        if res.objective >= inc_obj - prune_tol(inc_obj) {
                            continue;
                        }
                    }
                }
            }
        }

        let (var, val) = match cfg.branching {
            Branching::MostFractional => most_fractional(&fractional),
            Branching::PseudoCost => pseudo_cost_pick(&fractional, &pseudo),
        };
        let frac = val - val.floor();
        let mut down = Node {
            lower: node.lower.clone(),
            upper: node.upper.clone(),
            bound: res.objective,
            depth: node.depth + 1,
            branched: Some((var, false, frac, res.objective)),
        };
        down.upper[var] = 0.0;
        let mut up = Node {
            lower: node.lower,
            upper: node.upper,
            bound: res.objective,
            depth: node.depth + 1,
            branched: Some((var, true, 1.0 - frac, res.objective)),
        };
        up.lower[var] = 1.0;
        // The child on the rounding side is pushed last so dives follow it.
        if frac >= 0.5 {
            open.push(down);
            open.push(up);
        } else {
            open.push(up);
            open.push(down);
        }
    }

    let wall_time = start.elapsed().as_secs_f64();
    let open_min = open.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let final_lower = open_min.min(abandoned_bound).min(inc_obj);
    if final_lower > best_bound {
        best_bound = final_lower;
    }
    let status = if unbounded {
        MilpStatus::Unbounded
    } else if incumbent.is_some() {
        if !hit_limit && abandoned == 0 || mip_gap(inc_obj, best_bound) <= cfg.mip_gap_target && abandoned == 0 {
            MilpStatus::Optimal
        } else {
            MilpStatus::FeasibleLimitHit
        }
    } else if hit_limit || abandoned > 0 {
        MilpStatus::LimitNoIncumbent
    } else {
        MilpStatus::Infeasible
    };
    if status == MilpStatus::Optimal {
        best_bound = best_bound.min(inc_obj);
    }
    let result = MilpResult {
        status,
        objective: inc_obj,
        best_bound,
        mip_gap: mip_gap(inc_obj, best_bound),
        incumbent,
        nodes,
        wall_time,
        abandoned_nodes: abandoned,
        log: {
            log.push(log_line(nodes, best_bound, inc_obj, &start));
            log
        },
    };
    Ok(result)
}

fn prune_tol(obj: f64) -> f64 {
    if obj.is_finite() {
        1e-9 * obj.abs().max(1.0)
    } else {
        0.0
    }
}

/// Re-solve an integral node with its binaries fixed at their rounded values
/// so the continuous part is consistent with exact 0/1 values.
fn polish(lp: &LpData, node: &Node, binaries: &[usize], x: &[f64]) -> Vec<f64> {
    let mut lower = node.lower.clone();
    let mut upper = node.upper.clone();
    for &j in binaries {
        let v = x[j].round();
        lower[j] = v;
        upper[j] = v;
    }
    let mut out = match lp.solve(&lower, &upper) {
        Ok(r) if r.status == LpStatus::Optimal => r.x,
        _ => x.to_vec(),
    };
    for &j in binaries {
        out[j] = x[j].round();
    }
    out
}

fn most_fractional(fractional: &[(usize, f64)]) -> (usize, f64) {
    let mut best = fractional[0];
    let mut best_score = -1.0;
    for &(j, v) in fractional {
        let f = v - v.floor();
        let score = f.min(1.0 - f);
        if score > best_score + 1e-12 {
            best_score = score;
            best = (j, v);
        }
    }
    best
}

fn pseudo_cost_pick(fractional: &[(usize, f64)], pseudo: &[PseudoCost]) -> (usize, f64) {
    let (mut sum, mut cnt) = (0.0, 0u32);
    for pc in pseudo {
        sum += pc.down_sum + pc.up_sum;
        cnt += pc.down_n + pc.up_n;
    }
    let fallback = if cnt > 0 { sum / cnt as f64 } else { 1.0 };
    let mean = |s: f64, n: u32| if n > 0 { s / n as f64 } else { fallback };
    let mut best = fractional[0];
    let mut best_score = -1.0;
    for &(j, v) in fractional {
        let f = v - v.floor();
        let pc = pseudo[j];
        let down = (mean(pc.down_sum, pc.down_n) * f).max(1e-6);
        let up = (mean(pc.up_sum, pc.up_n) * (1.0 - f)).max(1e-6);
        let score = down * up;
        if score > best_score * (1.0 + 1e-12) {
            best_score = score;
            best = (j, v);
        }
    }
    best
}
