//! Mixed-integer encoding of a trained ReLU network and of the feature
//! vector it reads from a unit-commitment model.
//!
//! Hidden pre-activations are kept as affine expressions inside the rows that
//! use them; only post-activations `z`, indicators `a` and the scalar output
//! get their own variables.

use crate::error::{Error, Result};
use crate::milp::{MilpModel, Sense, VarId, VarKind};
use crate::mlp::MlpParams;
use crate::system::{big_m_gamma, SystemSpec};

/// Widening applied to every propagated bound.
pub const BOUND_WIDENING: f64 = 1e-6;

/// Pre-activation bounds for every hidden neuron, indexed `[layer][neuron]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationBounds {
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
}

impl ActivationBounds {
    /// Bounds scaled away from zero by `factor >= 1`.
    pub fn widened(&self, factor: f64) -> Self {
        let scale = |b: &Vec<Vec<f64>>| b.iter().map(|l| l.iter().map(|v| v * factor).collect()).collect();
        Self {
            lower: scale(&self.lower),
            upper: scale(&self.upper),
        }
    }

    pub fn contains(&self, pre_activations: &[Vec<f64>]) -> bool {
        pre_activations.iter().enumerate().all(|(l, z)| {
            z.iter()
                .enumerate()
                .all(|(n, &v)| self.lower[l][n] <= v && v <= self.upper[l][n])
        })
    }
}

/// Interval propagation of `feature_box` through the hidden layers.
pub fn compute_activation_bounds(params: &MlpParams, feature_box: &[(f64, f64)]) -> Result<ActivationBounds> {
    params.check_finite()?;
    if feature_box.len() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            got: feature_box.len(),
        });
    }
    let mut lo_in: Vec<f64> = feature_box.iter().map(|b| b.0).collect();
    let mut hi_in: Vec<f64> = feature_box.iter().map(|b| b.1).collect();
    let hidden = params.layers.len() - 1;
    let mut bounds = ActivationBounds {
        lower: Vec::with_capacity(hidden),
        upper: Vec::with_capacity(hidden),
    };
    for layer in &params.layers[..hidden] {
        let mut lo = Vec::with_capacity(layer.out_dim);
        let mut hi = Vec::with_capacity(layer.out_dim);
        for o in 0..layer.out_dim {
            let (mut l, mut h) = (layer.biases[o], layer.biases[o]);
            for (k, &w) in layer.row(o).iter().enumerate() {
                if w >= 0.0 {
                    l += w * lo_in[k];
                    h += w * hi_in[k];
                } else {
                    l += w * hi_in[k];
                    h += w * lo_in[k];
                }
            }
            lo.push((l - BOUND_WIDENING).min(-BOUND_WIDENING));
            hi.push((h + BOUND_WIDENING).max(BOUND_WIDENING));
        }
        lo_in = lo.iter().map(|v| v.max(0.0)).collect();
        hi_in = hi.iter().map(|v| v.max(0.0)).collect();
        bounds.lower.push(lo);
        bounds.upper.push(hi);
    }
    Ok(bounds)
}

/// Feature box for a system: commitment flags in [0, 1], dispatch features in
/// [0, p_max / gamma].
pub fn feature_box(spec: &SystemSpec) -> Vec<(f64, f64)> {
    let gamma = big_m_gamma(spec);
    let mut b = vec![(0.0, 1.0); spec.num_generators()];
    b.extend(spec.generators.iter().map(|g| (0.0, g.p_max / gamma)));
    b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockVar {
    /// A variable already present in the host model.
    Host(VarId),
    /// Index into the block's own variable list.
    Local(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalVar {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockConstraint {
    pub name: String,
    pub terms: Vec<(BlockVar, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// New variables and rows to be appended to a host model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintBlock {
    pub vars: Vec<LocalVar>,
    pub constraints: Vec<BlockConstraint>,
    /// Network inputs in host units (flags, MW), for feature-link blocks.
    pub features: Vec<BlockVar>,
    /// Network output, for network blocks.
    pub output: Option<BlockVar>,
}

/// Host ids of a merged block's local variables.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedBlock {
    pub local: Vec<VarId>,
    pub features: Vec<VarId>,
    pub output: Option<VarId>,
}

impl MergedBlock {
    pub fn resolve(&self, v: BlockVar) -> VarId {
        match v {
            BlockVar::Host(id) => id,
            BlockVar::Local(i) => self.local[i],
        }
    }
}

impl ConstraintBlock {
    fn add_var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> BlockVar {
        self.vars.push(LocalVar {
            name,
            kind,
            lower,
            upper,
        });
        BlockVar::Local(self.vars.len() - 1)
    }

    fn add_row(&mut self, name: String, terms: Vec<(BlockVar, f64)>, sense: Sense, rhs: f64) {
        self.constraints.push(BlockConstraint {
            name,
            terms,
            sense,
            rhs,
        });
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Append the block to `model`.
    pub fn merge_into(&self, model: &mut MilpModel) -> MergedBlock {
        let local: Vec<VarId> = self
            .vars
            .iter()
            .map(|v| model.add_var(v.name.clone(), v.kind, v.lower, v.upper))
            .collect();
        let merged = MergedBlock {
            features: Vec::new(),
            output: None,
            local,
        };
        for c in &self.constraints {
            let terms = c.terms.iter().map(|&(v, a)| (merged.resolve(v), a)).collect();
            model.add_constraint(c.name.clone(), terms, c.sense, c.rhs);
        }
        MergedBlock {
            features: self.features.iter().map(|&v| merged.resolve(v)).collect(),
            output: self.output.map(|v| merged.resolve(v)),
            ..merged
        }
    }
}

/// Feature vector of step `t` (1-based in names) tied to host commitment
/// `u` and dispatch `p`. Binaries `mu` select the largest dispatched unit;
/// only its dispatch slot is nonzero.
pub fn encode_feature_link(spec: &SystemSpec, t: usize, u: &[VarId], p: &[VarId]) -> ConstraintBlock {
    let n = spec.num_generators();
    assert_eq!(u.len(), n);
    assert_eq!(p.len(), n);
    let gamma = big_m_gamma(spec);
    let mut b = ConstraintBlock::default();
    let tt = t + 1;
    let mu: Vec<BlockVar> = (0..n)
        .map(|g| b.add_var(format!("mu_g{}_t{tt}", g + 1), VarKind::Binary, 0.0, 1.0))
        .collect();
    let pmax = b.add_var(format!("pmax_t{tt}"), VarKind::Continuous, 0.0, gamma);
    let xp: Vec<BlockVar> = (0..n)
        .map(|g| b.add_var(format!("xp_g{}_t{tt}", g + 1), VarKind::Continuous, 0.0, gamma))
        .collect();

    b.add_row(format!("mu_sum_t{tt}"), mu.iter().map(|&m| (m, 1.0)).collect(), Sense::Eq, 1.0);
    for g in 0..n {
        let pg = BlockVar::Host(p[g]);
        let gn = g + 1;
        b.add_row(format!("pmax_ge_g{gn}_t{tt}"), vec![(pmax, 1.0), (pg, -1.0)], Sense::Ge, 0.0);
        b.add_row(
            format!("pmax_le_g{gn}_t{tt}"),
            vec![(pmax, 1.0), (pg, -1.0), (mu[g], gamma)],
            Sense::Le,
            gamma,
        );
        b.add_row(
            format!("xp_le_g{gn}_t{tt}"),
            vec![(xp[g], 1.0), (pg, -1.0), (mu[g], gamma)],
            Sense::Le,
            gamma,
        );
        b.add_row(
            format!("xp_ge_g{gn}_t{tt}"),
            vec![(xp[g], 1.0), (pg, -1.0), (mu[g], -gamma)],
            Sense::Ge,
            -gamma,
        );
        b.add_row(format!("xp_sel_g{gn}_t{tt}"), vec![(xp[g], 1.0), (mu[g], -gamma)], Sense::Le, 0.0);
    }
    b.features = u.iter().map(|&v| BlockVar::Host(v)).chain(xp).collect();
    b
}

/// Big-M encoding of `params` for step `t` reading host-unit `inputs`.
pub fn encode_network(params: &MlpParams, bounds: &ActivationBounds, t: usize, inputs: &[VarId]) -> ConstraintBlock {
    assert_eq!(inputs.len(), params.input_dim());
    let hidden = params.layers.len() - 1;
    assert_eq!(bounds.lower.len(), hidden);
    let tt = t + 1;
    let mut b = ConstraintBlock::default();
    // Current layer inputs as (var, scale) so the first layer folds input_scale.
    let mut cur: Vec<(BlockVar, f64)> = inputs
        .iter()
        .zip(&params.input_scale)
        .map(|(&v, &s)| (BlockVar::Host(v), s))
        .collect();
    for (l, layer) in params.layers[..hidden].iter().enumerate() {
        let ln = l + 1;
        let mut next = Vec::with_capacity(layer.out_dim);
        for o in 0..layer.out_dim {
            let on = o + 1;
            let (lo, hi) = (bounds.lower[l][o], bounds.upper[l][o]);
            let z = b.add_var(format!("z_l{ln}_n{on}_t{tt}"), VarKind::Continuous, 0.0, hi);
            let a = b.add_var(format!("a_l{ln}_n{on}_t{tt}"), VarKind::Binary, 0.0, 1.0);
            let affine: Vec<(BlockVar, f64)> = cur
                .iter()
                .zip(layer.row(o))
                .filter(|(_, &w)| w != 0.0)
                .map(|(&(v, s), &w)| (v, -w * s))
                .collect();
            let bias = layer.biases[o];
            // z <= Z - lo (1 - a)
            let mut row = vec![(z, 1.0)];
            row.extend(affine.iter().copied());
            row.push((a, -lo));
            b.add_row(format!("relu_ub_l{ln}_n{on}_t{tt}"), row, Sense::Le, bias - lo);
            // z >= Z
            let mut row = vec![(z, 1.0)];
            row.extend(affine.iter().copied());
            b.add_row(format!("relu_lb_l{ln}_n{on}_t{tt}"), row, Sense::Ge, bias);
            // z <= hi a
            b.add_row(format!("relu_on_l{ln}_n{on}_t{tt}"), vec![(z, 1.0), (a, -hi)], Sense::Le, 0.0);
            // z >= 0
            b.add_row(format!("relu_nn_l{ln}_n{on}_t{tt}"), vec![(z, 1.0)], Sense::Ge, 0.0);
            next.push((z, 1.0));
        }
        cur = next;
    }
    let out_layer = params.output_layer();
    let y = b.add_var(format!("nadir_t{tt}"), VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY);
    let mut row = vec![(y, 1.0)];
    row.extend(
        cur.iter()
            .zip(out_layer.row(0))
            .filter(|(_, &w)| w != 0.0)
            .map(|(&(v, s), &w)| (v, -w * s)),
    );
    b.add_row(format!("nadir_def_t{tt}"), row, Sense::Eq, out_layer.biases[0]);
    b.output = Some(y);
    b
}

/// Require the block's output to be at least `y_floor`. A floor of `-inf`
/// leaves the block unchanged.
pub fn attach_nadir_limit(mut block: ConstraintBlock, y_floor: f64) -> ConstraintBlock {
    let y = block.output.expect("block has no output variable");
    if y_floor == f64::NEG_INFINITY {
        return block;
    }
    let name = match y {
        BlockVar::Local(i) => format!("{}_floor", block.vars[i].name),
        BlockVar::Host(id) => format!("v{}_floor", id.0),
    };
    block.add_row(name, vec![(y, 1.0)], Sense::Ge, y_floor);
    block
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::build_feature_vector;
    use crate::mlp::tests::random_params;
    use crate::mlp::{forward, DenseLayer, Topology};
    use crate::solver::{solve_lp, solve_milp, LpStatus, MilpStatus, SolveConfig};
    use crate::system::tests::three_gen_spec;
    use crate::system::OperatingPoint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_neuron(w: Vec<f64>, b: f64) -> MlpParams {
        let n = w.len();
        MlpParams {
            topology: Topology::new(n, vec![1]).unwrap(),
            layers: vec![
                DenseLayer {
                    in_dim: n,
                    out_dim: 1,
                    weights: w,
                    biases: vec![b],
                },
                DenseLayer {
                    in_dim: 1,
                    out_dim: 1,
                    weights: vec![1.0],
                    biases: vec![0.0],
                },
            ],
            input_scale: vec![1.0; n],
        }
    }

    #[test]
    fn interval_examples() {
        let b = compute_activation_bounds(&single_neuron(vec![1.0, -1.0], 0.0), &[(0.0, 1.0); 2]).unwrap();
        assert_eq!(b.lower[0][0], -1.0 - 1e-6);
        assert_eq!(b.upper[0][0], 1.0 + 1e-6);
        let b = compute_activation_bounds(&single_neuron(vec![2.0, 3.0], 1.0), &[(0.0, 1.0); 2]).unwrap();
        assert_eq!(b.upper[0][0], 6.0 + 1e-6);
        assert_eq!(b.lower[0][0], -1e-6);
    }

    #[test]
    fn rejects_non_finite_weights() {
        let p = single_neuron(vec![f64::NAN, 1.0], 0.0);
        assert!(matches!(
            compute_activation_bounds(&p, &[(0.0, 1.0); 2]),
            Err(Error::NonFiniteWeights { .. })
        ));
    }

    #[test]
    fn monte_carlo_containment() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for seed in 0..5 {
            let p = random_params(6, &[8, 6], seed);
            let b = compute_activation_bounds(&p, &[(0.0, 1.0); 6]).unwrap();
            for _ in 0..20_000 {
                let x: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..=1.0)).collect();
                assert!(b.contains(&p.pre_activations(&x)));
            }
        }
    }

    /// Host model with fixed commitment and dispatch.
    fn fixed_host(spec: &SystemSpec, op: &OperatingPoint) -> (MilpModel, Vec<VarId>, Vec<VarId>) {
        let mut m = MilpModel::new();
        let mut u = Vec::new();
        let mut p = Vec::new();
        for g in 0..spec.num_generators() {
            let uv = if op.u[g] { 1.0 } else { 0.0 };
            u.push(m.add_var(format!("u{g}"), VarKind::Binary, uv, uv));
            p.push(m.add_continuous(format!("p{g}"), op.p[g], op.p[g]));
        }
        (m, u, p)
    }

    fn feasible_mu(spec: &SystemSpec, op: &OperatingPoint, mu: usize) -> Option<Vec<f64>> {
        let (mut m, u, p) = fixed_host(spec, op);
        let link = encode_feature_link(spec, 0, &u, &p).merge_into(&mut m);
        for g in 0..spec.num_generators() {
            let v = if g == mu { 1.0 } else { 0.0 };
            let id = m.var_by_name(&format!("mu_g{}_t1", g + 1)).unwrap();
            m.var_mut(id).lower = v;
            m.var_mut(id).upper = v;
        }
        let r = solve_lp(&m).unwrap();
        (r.status == LpStatus::Optimal).then(|| link.features.iter().map(|f| r.x[f.0]).collect())
    }

    #[test]
    fn argmax_link_selects_largest() {
        let spec = three_gen_spec();
        let op = OperatingPoint {
            u: vec![true, true, false],
            p: vec![150.0, 270.0, 0.0],
        };
        let feasible: Vec<usize> = (0..3).filter(|&g| feasible_mu(&spec, &op, g).is_some()).collect();
        assert_eq!(feasible, vec![1]);
        let x = feasible_mu(&spec, &op, 1).unwrap();
        assert_eq!(&x[3..], &[0.0, 270.0, 0.0]);
    }

    #[test]
    fn argmax_ties_give_identical_inputs() {
        let spec = three_gen_spec();
        let op = OperatingPoint {
            u: vec![true, true, false],
            p: vec![100.0, 100.0, 0.0],
        };
        let a = feasible_mu(&spec, &op, 0).unwrap();
        let b = feasible_mu(&spec, &op, 1).unwrap();
        assert!(feasible_mu(&spec, &op, 2).is_none());
        // Slots differ, but the dispatch value seen by the network is the same.
        assert_eq!(a[3..].iter().sum::<f64>(), b[3..].iter().sum::<f64>());
    }

    /// Min and max of the encoded output with the host fixed at `op`.
    fn output_range(spec: &SystemSpec, p: &MlpParams, op: &OperatingPoint, widen: f64) -> (f64, f64) {
        let bounds = compute_activation_bounds(p, &feature_box(spec)).unwrap().widened(widen);
        let (mut m, u, pv) = fixed_host(spec, op);
        let link = encode_feature_link(spec, 0, &u, &pv).merge_into(&mut m);
        let net = encode_network(p, &bounds, 0, &link.features).merge_into(&mut m);
        let y = net.output.unwrap();
        let mut ends = [0.0; 2];
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            m.set_objective(vec![(y, sign)]);
            let r = solve_milp(&m, &SolveConfig::default()).unwrap();
            assert_eq!(r.status, MilpStatus::Optimal);
            ends[k] = r.incumbent.unwrap()[y.0];
        }
        (ends[0], ends[1])
    }

    fn random_op(rng: &mut ChaCha8Rng, spec: &SystemSpec) -> OperatingPoint {
        let u: Vec<bool> = (0..spec.num_generators()).map(|_| rng.gen_bool(0.7)).collect();
        let p = spec
            .generators
            .iter()
            .zip(&u)
            .map(|(g, &on)| if on { rng.gen_range(g.p_min..=g.p_max) } else { 0.0 })
            .collect();
        OperatingPoint { u, p }
    }

    #[test]
    fn encoded_output_matches_forward() {
        let spec = three_gen_spec();
        let gamma = big_m_gamma(&spec);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for seed in 0..15 {
            let hidden: Vec<usize> = (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(1..=8)).collect();
            let mut p = random_params(6, &hidden, seed);
            p.input_scale = crate::mlp::feature_input_scale(3, gamma);
            for _ in 0..4 {
                let op = random_op(&mut rng, &spec);
                let expect = forward(&p, &build_feature_vector(&op, gamma)).unwrap();
                let (lo, hi) = output_range(&spec, &p, &op, 1.0);
                assert!((lo - expect).abs() < 1e-6 && (hi - expect).abs() < 1e-6, "{lo} {hi} {expect}");
            }
        }
    }

    #[test]
    fn relu_branches_forced() {
        // One neuron fed by a fixed host variable: Z = x.
        for (x, z_expect, a_expect) in [(-3.0, 0.0, 0.0), (2.0, 2.0, 1.0)] {
            let p = single_neuron(vec![1.0], 0.0);
            let bounds = ActivationBounds {
                lower: vec![vec![-10.0]],
                upper: vec![vec![10.0]],
            };
            let mut m = MilpModel::new();
            let xv = m.add_continuous("x", x, x);
            let blk = encode_network(&p, &bounds, 0, &[xv]).merge_into(&mut m);
            let z = m.var_by_name("z_l1_n1_t1").unwrap();
            let a = m.var_by_name("a_l1_n1_t1").unwrap();
            for sign in [1.0, -1.0] {
                m.set_objective(vec![(z, sign), (a, sign)]);
                let r = solve_milp(&m, &SolveConfig::default()).unwrap();
                let s = r.incumbent.unwrap();
                assert_eq!((s[z.0], s[a.0]), (z_expect, a_expect));
                assert_eq!(s[blk.output.unwrap().0], z_expect);
            }
        }
    }

    #[test]
    fn four_relu_rows_per_neuron() {
        let p = random_params(6, &[4, 3], 2);
        let b = compute_activation_bounds(&p, &[(0.0, 1.0); 6]).unwrap();
        let mut m = MilpModel::new();
        let inputs: Vec<VarId> = (0..6).map(|i| m.add_continuous(format!("x{i}"), 0.0, 1.0)).collect();
        let blk = encode_network(&p, &b, 0, &inputs);
        let relu_rows = blk.constraints.iter().filter(|c| c.name.starts_with("relu_")).count();
        assert_eq!(relu_rows, 4 * 7);
        assert_eq!(blk.num_binaries(), 7);
    }

    #[test]
    fn widened_bounds_keep_optimum_and_loosen_relaxation() {
        let spec = three_gen_spec();
        let gamma = big_m_gamma(&spec);
        for seed in 0..4 {
            let mut p = random_params(6, &[5, 4], seed);
            p.input_scale = crate::mlp::feature_input_scale(3, gamma);
            let build = |widen: f64| {
                let bounds = compute_activation_bounds(&p, &feature_box(&spec)).unwrap().widened(widen);
                let mut m = MilpModel::new();
                let mut u = Vec::new();
                let mut pv = Vec::new();
                for (g, gen) in spec.generators.iter().enumerate() {
                    let uv = m.add_binary(format!("u{g}"));
                    let pg = m.add_continuous(format!("p{g}"), 0.0, gen.p_max);
                    m.add_constraint(format!("cap{g}"), vec![(pg, 1.0), (uv, -gen.p_max)], Sense::Le, 0.0);
                    u.push(uv);
                    pv.push(pg);
                }
                m.add_constraint("load", pv.iter().map(|&v| (v, 1.0)).collect(), Sense::Eq, 250.0);
                let link = encode_feature_link(&spec, 0, &u, &pv).merge_into(&mut m);
                let net = encode_network(&p, &bounds, 0, &link.features).merge_into(&mut m);
                m.set_objective(vec![(net.output.unwrap(), 1.0)]);
                m
            };
            let tight = build(1.0);
            let wide = build(10.0);
            let lp_tight = solve_lp(&tight).unwrap().objective;
            let lp_wide = solve_lp(&wide).unwrap().objective;
            assert!(lp_wide <= lp_tight + 1e-7, "{lp_wide} > {lp_tight}");
            let a = solve_milp(&tight, &SolveConfig::default()).unwrap();
            let b = solve_milp(&wide, &SolveConfig::default()).unwrap();
            assert!((a.objective - b.objective).abs() < 1e-6);
        }
    }

    #[test]
    fn nadir_floor() {
        let p = single_neuron(vec![1.0], 0.0);
        let bounds = compute_activation_bounds(&p, &[(0.0, 1.0)]).unwrap();
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0);
        let blk = encode_network(&p, &bounds, 0, &[x]);
        let rows = blk.constraints.len();
        assert_eq!(attach_nadir_limit(blk.clone(), f64::NEG_INFINITY).constraints.len(), rows);
        let limited = attach_nadir_limit(blk, 49.2);
        assert_eq!(limited.constraints.len(), rows + 1);
        limited.merge_into(&mut m);
        assert_eq!(solve_lp(&m).unwrap().status, LpStatus::Infeasible);
    }
}
