//! Unit-commitment MILP and its frequency-security extension.

use std::fmt::Write as _;

use crate::encode::{
    attach_nadir_limit, compute_activation_bounds, encode_feature_link, encode_network, feature_box,
    ActivationBounds,
};
use crate::error::{Error, Result};
use crate::milp::{MilpModel, Sense, VarId};
use crate::mlp::MlpParams;
use crate::solver::{solve_milp_with, LpData, LpStatus, MilpResult, MilpStatus, PrimalHeuristic, SolveConfig};
use crate::system::{OperatingPoint, SystemSpec};

/// Binaries within this distance of 0 or 1 are accepted as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;

/// A unit-commitment model together with the ids of its decision variables,
/// indexed `[generator][step]`.
#[derive(Debug, Clone)]
pub struct UcModel {
    pub model: MilpModel,
    pub spec: SystemSpec,
    pub u: Vec<Vec<VarId>>,
    pub v: Vec<Vec<VarId>>,
    pub p: Vec<Vec<VarId>>,
    /// Predicted-nadir variable per step once frequency constraints are attached.
    pub nadir: Option<Vec<VarId>>,
    /// Network encoded by the frequency constraints.
    pub network: Option<MlpParams>,
    /// Lower limit on the predicted nadir, `-inf` when unconstrained.
    pub nadir_floor: f64,
    /// Variable and row counts of the plain commitment model.
    base_vars: usize,
    base_rows: usize,
}

/// Cost-minimising commitment and dispatch with capacity, ramp, startup and
/// minimum up/down constraints. All units start offline.
pub fn build_uc(spec: &SystemSpec) -> Result<UcModel> {
    spec.validate()?;
    let ng = spec.num_generators();
    let nt = spec.horizon();
    let mut m = MilpModel::new();
    let mut u = vec![Vec::with_capacity(nt); ng];
    let mut v = vec![Vec::with_capacity(nt); ng];
    let mut p = vec![Vec::with_capacity(nt); ng];
    for t in 0..nt {
        for g in 0..ng {
            let (gn, tn) = (g + 1, t + 1);
            u[g].push(m.add_binary(format!("u_g{gn}_t{tn}")));
            v[g].push(m.add_binary(format!("v_g{gn}_t{tn}")));
            p[g].push(m.add_continuous(format!("p_g{gn}_t{tn}"), 0.0, spec.generators[g].p_max));
        }
    }
    for (g, gen) in spec.generators.iter().enumerate() {
        for t in 0..nt {
            m.add_objective_term(u[g][t], gen.cost_fixed);
            m.add_objective_term(p[g][t], gen.cost_marginal);
            if t >= 1 {
                m.add_objective_term(v[g][t], gen.cost_startup);
            }
        }
    }

    for t in 0..nt {
        let tn = t + 1;
        m.add_constraint(
            format!("balance_t{tn}"),
            (0..ng).map(|g| (p[g][t], 1.0)).collect(),
            Sense::Eq,
            spec.load_profile_mw[t],
        );
    }
    for (g, gen) in spec.generators.iter().enumerate() {
        let gn = g + 1;
        for t in 0..nt {
            let tn = t + 1;
            let (ut, vt, pt) = (u[g][t], v[g][t], p[g][t]);
            m.add_constraint(format!("pmin_g{gn}_t{tn}"), vec![(pt, 1.0), (ut, -gen.p_min)], Sense::Ge, 0.0);
            m.add_constraint(format!("pmax_g{gn}_t{tn}"), vec![(pt, 1.0), (ut, -gen.p_max)], Sense::Le, 0.0);
            if t == 0 {
                m.add_constraint(format!("start_g{gn}_t{tn}"), vec![(vt, 1.0), (ut, -1.0)], Sense::Eq, 0.0);
                continue;
            }
            let (up, pp) = (u[g][t - 1], p[g][t - 1]);
            m.add_constraint(
                format!("start_g{gn}_t{tn}"),
                vec![(vt, 1.0), (ut, -1.0), (up, 1.0)],
                Sense::Ge,
                0.0,
            );
            m.add_constraint(format!("start_on_g{gn}_t{tn}"), vec![(vt, 1.0), (ut, -1.0)], Sense::Le, 0.0);
            m.add_constraint(format!("start_off_g{gn}_t{tn}"), vec![(vt, 1.0), (up, 1.0)], Sense::Le, 1.0);
            m.add_constraint(
                format!("ramp_up_g{gn}_t{tn}"),
                vec![(pt, 1.0), (pp, -1.0), (up, gen.p_max - gen.ramp_up)],
                Sense::Le,
                gen.p_max,
            );
            m.add_constraint(
                format!("ramp_down_g{gn}_t{tn}"),
                vec![(pp, 1.0), (pt, -1.0), (ut, gen.p_max - gen.ramp_down)],
                Sense::Le,
                gen.p_max,
            );
        }
        let up_time = gen.min_up as usize;
        if up_time > 1 {
            for t in 1..nt {
                let first = (t + 1).saturating_sub(up_time);
                let mut terms: Vec<(VarId, f64)> = (first..=t).map(|k| (v[g][k], 1.0)).collect();
                terms.push((u[g][t], -1.0));
                m.add_constraint(format!("min_up_g{gn}_t{}", t + 1), terms, Sense::Le, 0.0);
            }
        }
        let down_time = gen.min_down as usize;
        if down_time > 1 {
            // A start at any step in (t - DT, t] needs the unit off at t - DT.
            for t in 1..nt {
                let first = (t + 1).saturating_sub(down_time);
                let mut terms: Vec<(VarId, f64)> = (first..=t).map(|k| (v[g][k], 1.0)).collect();
                if t >= down_time {
                    terms.push((u[g][t - down_time], 1.0));
                }
                m.add_constraint(format!("min_down_g{gn}_t{}", t + 1), terms, Sense::Le, 1.0);
            }
        }
    }
    Ok(UcModel {
        base_vars: m.num_vars(),
        base_rows: m.num_constraints(),
        model: m,
        spec: spec.clone(),
        u,
        v,
        p,
        nadir: None,
        network: None,
        nadir_floor: f64::NEG_INFINITY,
    })
}

/// Append, for every step, the feature link, network encoding and nadir floor
/// (skipped when `y_floor` is `-inf`). `bounds` defaults to interval bounds
/// over the system's feature box.
pub fn attach_frequency_constraints(
    uc: &mut UcModel,
    params: &MlpParams,
    bounds: Option<&ActivationBounds>,
    y_floor: f64,
) -> Result<()> {
    let ng = uc.spec.num_generators();
    if params.input_dim() != 2 * ng {
        return Err(Error::DimensionMismatch {
            expected: 2 * ng,
            got: params.input_dim(),
        });
    }
    let computed;
    let bounds = match bounds {
        Some(b) => b,
        None => {
            computed = compute_activation_bounds(params, &feature_box(&uc.spec))?;
            &computed
        }
    };
    let mut outputs = Vec::with_capacity(uc.spec.horizon());
    for t in 0..uc.spec.horizon() {
        let u: Vec<VarId> = (0..ng).map(|g| uc.u[g][t]).collect();
        let p: Vec<VarId> = (0..ng).map(|g| uc.p[g][t]).collect();
        let link = encode_feature_link(&uc.spec, t, &u, &p).merge_into(&mut uc.model);
        let net = attach_nadir_limit(encode_network(params, bounds, t, &link.features), y_floor);
        let merged = net.merge_into(&mut uc.model);
        outputs.push(merged.output.expect("network block has an output"));
    }
    uc.nadir = Some(outputs);
    uc.network = Some(params.clone());
    uc.nadir_floor = y_floor;
    Ok(())
}

impl UcModel {
    /// The commitment model without any frequency rows or variables.
    pub fn base_model(&self) -> MilpModel {
        let mut m = MilpModel::new();
        for var in &self.model.variables[..self.base_vars] {
            m.add_var(var.name.clone(), var.kind, var.lower, var.upper);
        }
        for c in &self.model.constraints[..self.base_rows] {
            m.add_constraint(c.name.clone(), c.terms.clone(), c.sense, c.rhs);
        }
        m.set_objective(self.model.objective.clone());
        m
    }
}

/// Rounds the commitment of an LP point, re-dispatches it, and fills in the
/// feature-link and network variables by a forward pass. Steps whose
/// predicted nadir falls short of the floor get extra units committed.
pub struct UcHeuristic<'a> {
    uc: &'a UcModel,
    params: &'a MlpParams,
    economic: LpData,
    /// Minimises `sum |p - target|`; targets are fixed variables.
    projection: LpData,
    targets: Vec<Vec<VarId>>,
    /// Minimises the largest output per step ahead of cost.
    flat: LpData,
    step_vars: Vec<StepVars>,
}

/// Objective value and full assignment.
type Candidate = (f64, Vec<f64>);

struct StepVars {
    mu: Vec<VarId>,
    pmax: VarId,
    xp: Vec<VarId>,
    z: Vec<Vec<VarId>>,
    a: Vec<Vec<VarId>>,
    out: VarId,
}

#[derive(Clone, Copy)]
enum Dispatch<'x> {
    Economic,
    Project(&'x [f64]),
    Flat,
}

impl<'a> UcHeuristic<'a> {
    /// `None` unless frequency constraints are attached.
    pub fn new(uc: &'a UcModel) -> Option<Self> {
        let params = uc.network.as_ref()?;
        let base = uc.base_model();
        let economic = LpData::from_model(&base);

        let mut proj = base.clone();
        proj.set_objective(Vec::new());
        let mut targets = vec![Vec::new(); uc.p.len()];
        for (g, row) in uc.p.iter().enumerate() {
            for (t, &p) in row.iter().enumerate() {
                let (gn, tn) = (g + 1, t + 1);
                let target = proj.add_continuous(format!("target_g{gn}_t{tn}"), 0.0, 0.0);
                let up = proj.add_continuous(format!("dev_up_g{gn}_t{tn}"), 0.0, f64::INFINITY);
                let down = proj.add_continuous(format!("dev_down_g{gn}_t{tn}"), 0.0, f64::INFINITY);
                proj.add_constraint(
                    format!("dev_g{gn}_t{tn}"),
                    vec![(p, 1.0), (target, -1.0), (up, -1.0), (down, 1.0)],
                    Sense::Eq,
                    0.0,
                );
                proj.add_objective_term(up, 1.0);
                proj.add_objective_term(down, 1.0);
                targets[g].push(target);
            }
        }

        let mut flat = base;
        let weight = 100.0
            * uc.spec.generators.iter().map(|g| g.cost_marginal.abs()).fold(1.0, f64::max)
            * uc.spec.num_generators() as f64;
        for t in 0..uc.spec.horizon() {
            let top = flat.add_continuous(format!("top_t{}", t + 1), 0.0, f64::INFINITY);
            flat.add_objective_term(top, weight);
            for (g, row) in uc.p.iter().enumerate() {
                flat.add_constraint(
                    format!("top_g{}_t{}", g + 1, t + 1),
                    vec![(row[t], 1.0), (top, -1.0)],
                    Sense::Le,
                    0.0,
                );
            }
        }

        let ng = uc.spec.num_generators();
        let find = |name: String| uc.model.var_by_name(&name);
        let mut step_vars = Vec::new();
        for t in 1..=uc.spec.horizon() {
            let mu = (1..=ng).map(|g| find(format!("mu_g{g}_t{t}"))).collect::<Option<Vec<_>>>()?;
            let xp = (1..=ng).map(|g| find(format!("xp_g{g}_t{t}"))).collect::<Option<Vec<_>>>()?;
            let mut z = Vec::new();
            let mut a = Vec::new();
            for (l, &width) in params.topology.hidden_sizes.iter().enumerate() {
                let l = l + 1;
                z.push((1..=width).map(|n| find(format!("z_l{l}_n{n}_t{t}"))).collect::<Option<Vec<_>>>()?);
                a.push((1..=width).map(|n| find(format!("a_l{l}_n{n}_t{t}"))).collect::<Option<Vec<_>>>()?);
            }
            step_vars.push(StepVars {
                mu,
                pmax: find(format!("pmax_t{t}"))?,
                xp,
                z,
                a,
                out: find(format!("nadir_t{t}"))?,
            });
        }
        Some(Self {
            uc,
            params,
            economic,
            projection: LpData::from_model(&proj),
            targets,
            flat: LpData::from_model(&flat),
            step_vars,
        })
    }

    fn dispatch(&self, commit: &[Vec<bool>], mode: Dispatch<'_>) -> Option<Vec<Vec<f64>>> {
        let lp = match mode {
            Dispatch::Economic => &self.economic,
            Dispatch::Project(_) => &self.projection,
            Dispatch::Flat => &self.flat,
        };
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        for (g, row) in self.uc.u.iter().enumerate() {
            for (t, &id) in row.iter().enumerate() {
                let on = if commit[g][t] { 1.0 } else { 0.0 };
                lower[id.0] = on;
                upper[id.0] = on;
            }
        }
        if let Dispatch::Project(x) = mode {
            for (g, row) in self.targets.iter().enumerate() {
                for (t, id) in row.iter().enumerate() {
                    let target = x[self.uc.p[g][t].0];
                    lower[id.0] = target;
                    upper[id.0] = target;
                }
            }
        }
        let r = lp.solve(&lower, &upper).ok()?;
        if r.status != LpStatus::Optimal {
            return None;
        }
        Some(self.uc.p.iter().map(|row| row.iter().map(|id| r.x[id.0]).collect()).collect())
    }

    /// Network input at step `t`, in the scaling used by the encoding.
    fn network_input(&self, commit: &[Vec<bool>], p: &[Vec<f64>], t: usize) -> (usize, Vec<f64>) {
        let ng = self.uc.spec.num_generators();
        let op = OperatingPoint {
            u: (0..ng).map(|g| commit[g][t]).collect(),
            p: (0..ng).map(|g| p[g][t]).collect(),
        };
        let largest = op.largest_unit();
        let mut input: Vec<f64> = op.u.iter().map(|&on| f64::from(u8::from(on))).collect();
        input.extend((0..ng).map(|g| if g == largest { op.p[g] } else { 0.0 }));
        input.iter_mut().zip(&self.params.input_scale).for_each(|(v, s)| *v *= s);
        (largest, input)
    }

    fn predicted_nadir(&self, commit: &[Vec<bool>], p: &[Vec<f64>], t: usize) -> f64 {
        self.params.predict(&self.network_input(commit, p, t).1)
    }

    /// Full model assignment for commitment `commit` and dispatch `p`.
    fn complete(&self, commit: &[Vec<bool>], p: &[Vec<f64>]) -> Vec<f64> {
        let uc = self.uc;
        let mut x = vec![0.0; uc.model.num_vars()];
        for g in 0..uc.spec.num_generators() {
            for t in 0..uc.spec.horizon() {
                let on = commit[g][t];
                let started = on && (t == 0 || !commit[g][t - 1]);
                x[uc.u[g][t].0] = f64::from(u8::from(on));
                x[uc.v[g][t].0] = f64::from(u8::from(started));
                x[uc.p[g][t].0] = p[g][t];
            }
        }
        for (t, sv) in self.step_vars.iter().enumerate() {
            let (largest, input) = self.network_input(commit, p, t);
            x[sv.mu[largest].0] = 1.0;
            x[sv.pmax.0] = p[largest][t];
            x[sv.xp[largest].0] = p[largest][t];
            for (l, zs) in self.params.pre_activations(&input).iter().enumerate() {
                for (n, &pre) in zs.iter().enumerate() {
                    x[sv.z[l][n].0] = pre.max(0.0);
                    x[sv.a[l][n].0] = if pre > 0.0 { 1.0 } else { 0.0 };
                }
            }
            x[sv.out.0] = self.params.predict(&input);
        }
        x
    }

    /// First step whose predicted nadir is below the floor.
    fn short_step(&self, commit: &[Vec<bool>], p: &[Vec<f64>]) -> Option<usize> {
        let floor = self.uc.nadir_floor + crate::solver::bnb::HEURISTIC_TOL;
        (0..self.uc.spec.horizon()).find(|&t| self.predicted_nadir(commit, p, t) < floor)
    }

    /// Commits units at short steps until the flat dispatch meets the floor.
    /// A unit switched on stays on from its previous run (or from `t`) to the
    /// end of the horizon, which keeps minimum up and down times satisfied.
    fn repair(&self, mut commit: Vec<Vec<bool>>) -> Option<Vec<Vec<bool>>> {
        let (ng, nt) = (self.uc.spec.num_generators(), self.uc.spec.horizon());
        for _ in 0..ng * nt {
            let p = self.dispatch(&commit, Dispatch::Flat);
            let t = match &p {
                Some(p) => match self.short_step(&commit, p) {
                    Some(t) => t,
                    None => return Some(commit),
                },
                None => (0..nt).find(|&t| (0..ng).any(|g| !commit[g][t]))?,
            };
            let mut best: Option<(f64, Vec<Vec<bool>>)> = None;
            for g in (0..ng).filter(|&g| !commit[g][t]) {
                let mut trial = commit.clone();
                let from = (0..t).rev().find(|&k| trial[g][k]).map_or(t, |k| k + 1);
                trial[g][from..].iter_mut().for_each(|on| *on = true);
                let score = match self.dispatch(&trial, Dispatch::Flat) {
                    Some(p) => self.predicted_nadir(&trial, &p, t),
                    None => f64::NEG_INFINITY,
                };
                if best.as_ref().map_or(true, |(b, _)| score > *b) {
                    best = Some((score, trial));
                }
            }
            commit = best?.1;
        }
        None
    }

    /// Cheapest feasible completion of `commit` over the dispatch modes.
    fn evaluate(&self, commit: &[Vec<bool>], modes: &[Dispatch<'_>]) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for &mode in modes {
            let Some(p) = self.dispatch(commit, mode) else { continue };
            let x = self.complete(commit, &p);
            if self.uc.model.max_violation(&x) > crate::solver::bnb::HEURISTIC_TOL {
                continue;
            }
            let obj = self.uc.model.objective_value(&x);
            if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                best = Some((obj, x));
            }
        }
        best
    }

    /// Greedy descent that switches single unit-steps off while the
    /// completion stays feasible and gets cheaper.
    fn improve(&self, mut commit: Vec<Vec<bool>>, mut best: Candidate) -> Candidate {
        let modes = [Dispatch::Economic, Dispatch::Flat];
        loop {
            let mut step: Option<(Vec<Vec<bool>>, Candidate)> = None;
            for g in 0..commit.len() {
                for t in (0..commit[g].len()).filter(|&t| commit[g][t]) {
                    let mut trial = commit.clone();
                    trial[g][t] = false;
                    let Some(cand) = self.evaluate(&trial, &modes) else { continue };
                    let target = step.as_ref().map_or(best.0, |(_, c)| c.0);
                    if cand.0 < target - 1e-9 * target.abs().max(1.0) {
                        step = Some((trial, cand));
                    }
                }
            }
            match step {
                Some((c, cand)) => {
                    commit = c;
                    best = cand;
                }
                None => return best,
            }
        }
    }
}

impl PrimalHeuristic for UcHeuristic<'_> {
    fn propose(&self, lp_x: &[f64]) -> Option<Vec<f64>> {
        let mut best: Option<Candidate> = None;
        let mut consider = |commit: &[Vec<bool>], modes: &[Dispatch<'_>]| {
            if let Some(cand) = self.evaluate(commit, modes) {
                let cand = self.improve(commit.to_vec(), cand);
                if best.as_ref().map_or(true, |(b, _)| cand.0 < *b) {
                    best = Some(cand);
                }
            }
        };
        for threshold in [0.5, 1e-6] {
            let commit: Vec<Vec<bool>> = self
                .uc
                .u
                .iter()
                .map(|row| row.iter().map(|id| lp_x[id.0] > threshold).collect())
                .collect();
            consider(&commit, &[Dispatch::Project(lp_x), Dispatch::Economic, Dispatch::Flat]);
            if let Some(fixed) = self.repair(commit) {
                consider(&fixed, &[Dispatch::Economic, Dispatch::Flat]);
            }
        }
        best.map(|(_, x)| x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UcSolution {
    /// `[generator][step]`.
    pub u: Vec<Vec<bool>>,
    pub v: Vec<Vec<bool>>,
    pub p: Vec<Vec<f64>>,
    pub total_cost: f64,
    /// Predicted nadir per step when frequency constraints are attached.
    pub nadir_pred: Option<Vec<f64>>,
}

fn round_binary(name: &str, value: f64) -> Result<bool> {
    if (value - 1.0).abs() <= INTEGRALITY_TOL {
        Ok(true)
    } else if value.abs() <= INTEGRALITY_TOL {
        Ok(false)
    } else {
        Err(Error::Integrality {
            name: name.to_string(),
            value,
        })
    }
}

/// Read typed schedules from a full assignment of `uc.model`'s variables.
pub fn extract_solution(uc: &UcModel, x: &[f64]) -> Result<UcSolution> {
    if x.len() != uc.model.num_vars() {
        return Err(Error::DimensionMismatch {
            expected: uc.model.num_vars(),
            got: x.len(),
        });
    }
    let read = |ids: &Vec<Vec<VarId>>| -> Result<Vec<Vec<bool>>> {
        ids.iter()
            .map(|row| row.iter().map(|&id| round_binary(&uc.model.var(id).name, x[id.0])).collect())
            .collect()
    };
    let u = read(&uc.u)?;
    let v = read(&uc.v)?;
    let p: Vec<Vec<f64>> = uc.p.iter().map(|row| row.iter().map(|id| x[id.0]).collect()).collect();
    let mut total_cost = 0.0;
    for (g, gen) in uc.spec.generators.iter().enumerate() {
        for t in 0..uc.spec.horizon() {
            if u[g][t] {
                total_cost += gen.cost_fixed;
            }
            total_cost += gen.cost_marginal * p[g][t];
            if t >= 1 && v[g][t] {
                total_cost += gen.cost_startup;
            }
        }
    }
    let nadir_pred = uc.nadir.as_ref().map(|ids| ids.iter().map(|id| x[id.0]).collect());
    Ok(UcSolution {
        u,
        v,
        p,
        total_cost,
        nadir_pred,
    })
}

impl UcSolution {
    pub fn horizon(&self) -> usize {
        self.u.first().map_or(0, Vec::len)
    }

    pub fn committed_count(&self, t: usize) -> usize {
        self.u.iter().filter(|row| row[t]).count()
    }

    pub fn committed_unit_hours(&self) -> usize {
        self.u.iter().flatten().filter(|&&b| b).count()
    }

    /// Largest `|sum_g p - load|` over steps.
    pub fn balance_residual(&self, spec: &SystemSpec) -> f64 {
        (0..self.horizon())
            .map(|t| (self.p.iter().map(|row| row[t]).sum::<f64>() - spec.load_profile_mw[t]).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self, spec: &SystemSpec) -> String {
        let mut s = String::from("t,g,u,v,p_mw,nadir_pred_hz\n");
        for t in 0..self.horizon() {
            let nadir = match &self.nadir_pred {
                Some(n) => format!("{}", n[t]),
                None => "n/a".to_string(),
            };
            for (g, gen) in spec.generators.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    t + 1,
                    gen.id,
                    u8::from(self.u[g][t]),
                    u8::from(self.v[g][t]),
                    self.p[g][t],
                    nadir
                );
            }
        }
        s
    }

    /// One row per step, one column per unit: `·` when off, otherwise a
    /// shade proportional to output over capacity.
    pub fn to_grid(&self, spec: &SystemSpec) -> String {
        let width = spec.generators.iter().map(|g| g.id.chars().count()).max().unwrap_or(1).max(1);
        let mut s = format!("{:>4} ", "t");
        for gen in &spec.generators {
            let _ = write!(s, " {:>width$}", gen.id);
        }
        s.push_str("  on  nadir_hz\n");
        for t in 0..self.horizon() {
            let _ = write!(s, "{:>4} ", t + 1);
            for (g, gen) in spec.generators.iter().enumerate() {
                let c = if self.u[g][t] { shade(self.p[g][t] / gen.p_max) } else { '·' };
                let _ = write!(s, " {c:>width$}");
            }
            let nadir = self.nadir_pred.as_ref().map_or("n/a".to_string(), |n| format!("{:.3}", n[t]));
            let _ = writeln!(s, "  {:>2}  {nadir}", self.committed_count(t));
        }
        s
    }
}

fn shade(ratio: f64) -> char {
    match ratio {
        r if r <= 0.25 => '░',
        r if r <= 0.5 => '▒',
        r if r <= 0.75 => '▓',
        _ => '█',
    }
}

/// Build, optionally constrain, and solve a unit-commitment instance.
pub fn solve_uc(
    spec: &SystemSpec,
    network: Option<&MlpParams>,
    y_floor: f64,
    cfg: &SolveConfig,
) -> Result<(UcModel, MilpResult, Option<UcSolution>)> {
    let mut uc = build_uc(spec)?;
    if let Some(params) = network {
        attach_frequency_constraints(&mut uc, params, None, y_floor)?;
    }
    let heuristic = UcHeuristic::new(&uc);
    let result = solve_milp_with(&uc.model, cfg, heuristic.as_ref().map(|h| h as &dyn PrimalHeuristic))?;
    let solution = match (&result.incumbent, result.status) {
        (Some(x), MilpStatus::Optimal | MilpStatus::FeasibleLimitHit) => Some(extract_solution(&uc, x)?),
        _ => None,
    };
    Ok((uc, result, solution))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::build_feature_vector;
    use crate::mlp::tests::random_params;
    use crate::mlp::{feature_input_scale, forward, DenseLayer, Topology};
    use crate::solver::{solve_lp, solve_milp, LpStatus};
    use crate::system::tests::{gen, three_gen_spec};
    use crate::system::{big_m_gamma, OperatingPoint};

    fn one_unit_spec(load: Vec<f64>) -> SystemSpec {
        let mut g = gen("g1", 0.0, 10.0);
        g.cost_fixed = 10.0;
        g.cost_marginal = 2.0;
        SystemSpec {
            f_nominal_hz: 50.0,
            nadir_limit_hz: 49.2,
            load_damping_d: 1.0,
            system_mva_base: 100.0,
            load_profile_mw: load,
            generators: vec![g],
        }
    }

    #[test]
    fn single_unit_cost() {
        let spec = one_unit_spec(vec![5.0]);
        let (_, r, sol) = solve_uc(&spec, None, f64::NEG_INFINITY, &SolveConfig::default()).unwrap();
        assert_eq!(r.status, MilpStatus::Optimal);
        assert_eq!(r.objective, 20.0);
        assert_eq!(sol.unwrap().total_cost, 20.0);
    }

    #[test]
    fn startup_is_forced() {
        let spec = one_unit_spec(vec![0.0, 5.0]);
        let mut uc = build_uc(&spec).unwrap();
        let (u1, u2) = (uc.u[0][0], uc.u[0][1]);
        uc.model.var_mut(u1).upper = 0.0;
        uc.model.var_mut(u2).lower = 1.0;
        let r = solve_milp(&uc.model, &SolveConfig::default()).unwrap();
        let sol = extract_solution(&uc, r.incumbent.as_ref().unwrap()).unwrap();
        assert!(sol.v[0][1]);
        assert_eq!(r.objective, 10.0 + 10.0 + 50.0);
    }

    fn small_pair() -> SystemSpec {
        let mut a = gen("a", 2.0, 6.0);
        a.cost_fixed = 5.0;
        a.cost_marginal = 1.0;
        a.cost_startup = 7.0;
        a.ramp_up = 3.0;
        a.ramp_down = 3.0;
        let mut b = gen("b", 1.0, 5.0);
        b.cost_fixed = 2.0;
        b.cost_marginal = 3.0;
        b.cost_startup = 1.0;
        b.min_up = 2;
        SystemSpec {
            f_nominal_hz: 50.0,
            nadir_limit_hz: 49.2,
            load_damping_d: 1.0,
            system_mva_base: 100.0,
            load_profile_mw: vec![4.0, 8.0],
            generators: vec![a, b],
        }
    }

    #[test]
    fn matches_commitment_enumeration() {
        let spec = small_pair();
        let uc = build_uc(&spec).unwrap();
        let r = solve_milp(&uc.model, &SolveConfig::default()).unwrap();
        let mut best = f64::INFINITY;
        for mask in 0u32..16 {
            let mut m = uc.model.clone();
            for g in 0..2 {
                for t in 0..2 {
                    let on = ((mask >> (2 * g + t)) & 1) as f64;
                    let id = uc.u[g][t];
                    m.var_mut(id).lower = on;
                    m.var_mut(id).upper = on;
                }
            }
            // Startups follow from u; dispatch is an LP.
            let fixed = solve_milp(&m, &SolveConfig::default()).unwrap();
            if fixed.status == MilpStatus::Optimal {
                best = best.min(fixed.objective);
            }
        }
        assert!((r.objective - best).abs() < 1e-9, "{} vs {best}", r.objective);
        let sol = extract_solution(&uc, r.incumbent.as_ref().unwrap()).unwrap();
        assert!(sol.balance_residual(&spec) < 1e-6 * 8.0);
    }

    #[test]
    fn ramp_and_min_up_bind() {
        let mut spec = small_pair();
        spec.load_profile_mw = vec![6.0, 2.0, 6.0];
        let uc = build_uc(&spec).unwrap();
        let r = solve_milp(&uc.model, &SolveConfig::default()).unwrap();
        let sol = extract_solution(&uc, r.incumbent.as_ref().unwrap()).unwrap();
        for t in 1..3 {
            let d = sol.p[0][t] - sol.p[0][t - 1];
            if sol.u[0][t - 1] && sol.u[0][t] {
                assert!(d.abs() <= 3.0 + 1e-9);
            }
        }
        for t in 1..3 {
            if sol.v[1][t - 1] {
                assert!(sol.u[1][t]);
            }
        }
        assert!(uc.model.max_violation(r.incumbent.as_ref().unwrap()) < 1e-6);
    }

    #[test]
    fn rejects_infeasible_load() {
        let spec = one_unit_spec(vec![50.0]);
        assert!(matches!(build_uc(&spec), Err(Error::Validation(_))));
    }

    fn constant_network(n_inputs: usize, value: f64) -> MlpParams {
        let mut out = DenseLayer::zeros(1, 1);
        out.biases[0] = value;
        MlpParams {
            topology: Topology::new(n_inputs, vec![1]).unwrap(),
            layers: vec![DenseLayer::zeros(n_inputs, 1), out],
            input_scale: vec![1.0; n_inputs],
        }
    }

    #[test]
    fn counts_added_binaries() {
        let mut spec = three_gen_spec();
        spec.load_profile_mw.truncate(3);
        let mut uc = build_uc(&spec).unwrap();
        let before = uc.model.num_binaries();
        let p = random_params(6, &[4], 1);
        attach_frequency_constraints(&mut uc, &p, None, 49.2).unwrap();
        assert_eq!(uc.model.num_binaries() - before, 3 * (3 + 4));
    }

    #[test]
    fn dimension_mismatch() {
        let mut uc = build_uc(&three_gen_spec()).unwrap();
        let p = random_params(4, &[4], 1);
        assert!(matches!(
            attach_frequency_constraints(&mut uc, &p, None, 49.2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn constant_networks_slack_and_infeasible() {
        let spec = three_gen_spec();
        let cfg = SolveConfig::default();
        let (_, plain, _) = solve_uc(&spec, None, f64::NEG_INFINITY, &cfg).unwrap();
        let (_, slack, sol) = solve_uc(&spec, Some(&constant_network(6, 49.9)), 49.2, &cfg).unwrap();
        assert_eq!(slack.status, MilpStatus::Optimal);
        assert!((slack.objective - plain.objective).abs() < 1e-6);
        assert!(sol.unwrap().nadir_pred.unwrap().iter().all(|&y| (y - 49.9).abs() < 1e-9));
        let mut uc = build_uc(&spec).unwrap();
        attach_frequency_constraints(&mut uc, &constant_network(6, 49.0), None, 49.2).unwrap();
        assert_eq!(solve_lp(&uc.model).unwrap().status, LpStatus::Infeasible);
        let r = solve_milp(&uc.model, &cfg).unwrap();
        assert_eq!(r.status, MilpStatus::Infeasible);
    }

    #[test]
    fn predicted_nadir_matches_forward_at_optimum() {
        let spec = three_gen_spec();
        let gamma = big_m_gamma(&spec);
        let mut p = random_params(6, &[4], 3);
        p.input_scale = feature_input_scale(3, gamma);
        let (_, r, sol) = solve_uc(&spec, Some(&p), f64::NEG_INFINITY, &SolveConfig::default()).unwrap();
        assert_eq!(r.status, MilpStatus::Optimal);
        let sol = sol.unwrap();
        let pred = sol.nadir_pred.clone().unwrap();
        for t in 0..spec.horizon() {
            let op = OperatingPoint {
                u: (0..3).map(|g| sol.u[g][t]).collect(),
                p: (0..3).map(|g| sol.p[g][t]).collect(),
            };
            let expect = forward(&p, &build_feature_vector(&op, gamma)).unwrap();
            assert!((pred[t] - expect).abs() < 1e-6, "{} vs {expect}", pred[t]);
        }
    }

    #[test]
    fn heuristic_proposals_are_feasible() {
        let spec = three_gen_spec();
        let gamma = big_m_gamma(&spec);
        for seed in 0..5 {
            let mut p = random_params(6, &[6, 4], seed);
            p.input_scale = feature_input_scale(3, gamma);
            let mut uc = build_uc(&spec).unwrap();
            attach_frequency_constraints(&mut uc, &p, None, f64::NEG_INFINITY).unwrap();
            let heuristic = UcHeuristic::new(&uc).unwrap();
            let root = solve_lp(&uc.model.relaxed()).unwrap();
            assert_eq!(root.status, LpStatus::Optimal);
            let x = heuristic.propose(&root.x).expect("rounded commitment is dispatchable");
            assert!(uc.model.max_violation(&x) <= 1e-6);
            let sol = extract_solution(&uc, &x).unwrap();
            assert!(sol.balance_residual(&spec) < 1e-6);
        }
    }

    #[test]
    fn heuristic_needs_a_network() {
        let uc = build_uc(&three_gen_spec()).unwrap();
        assert!(UcHeuristic::new(&uc).is_none());
    }

    #[test]
    fn fractional_assignment_rejected() {
        let spec = one_unit_spec(vec![5.0]);
        let uc = build_uc(&spec).unwrap();
        let mut x = vec![0.0; uc.model.num_vars()];
        x[uc.u[0][0].0] = 0.5;
        assert!(matches!(extract_solution(&uc, &x), Err(Error::Integrality { .. })));
    }

    #[test]
    fn reports() {
        let spec = three_gen_spec();
        let (_, _, sol) = solve_uc(&spec, None, f64::NEG_INFINITY, &SolveConfig::default()).unwrap();
        let sol = sol.unwrap();
        let csv = sol.to_csv(&spec);
        assert!(csv.starts_with("t,g,u,v,p_mw,nadir_pred_hz\n"));
        assert_eq!(csv.lines().count(), 1 + 3 * 4);
        assert!(csv.lines().nth(1).unwrap().ends_with(",n/a"));
        let grid = sol.to_grid(&spec);
        assert_eq!(grid.lines().count(), 5);
        let on_col: Vec<usize> = grid.lines().skip(1).map(|l| {
            l.split_whitespace().rev().nth(1).unwrap().parse().unwrap()
        }).collect();
        assert_eq!(on_col, (0..4).map(|t| sol.committed_count(t)).collect::<Vec<_>>());
        assert!(grid.contains('·') || sol.committed_unit_hours() == 12);
    }
}
