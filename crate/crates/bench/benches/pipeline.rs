use criterion::{black_box, criterion_group, criterion_main, Criterion};
use freqsec_core::mlp::feature_input_scale;
use freqsec_core::uc::{attach_frequency_constraints, build_uc};
use freqsec_core::*;

fn demo_network(spec: &SystemSpec, hidden: &[usize]) -> MlpParams {
    let topology = Topology::new(2 * spec.num_generators(), hidden.to_vec()).unwrap();
    let scale = feature_input_scale(spec.num_generators(), big_m_gamma(spec));
    MlpParams::init(topology, scale, 0).unwrap()
}

fn demo_op() -> OperatingPoint {
    OperatingPoint {
        u: vec![true, true, true, false, true],
        p: vec![250.0, 200.0, 120.0, 0.0, 60.0],
    }
}

fn simplex(c: &mut Criterion) {
    let spec = SystemSpec::demo();
    let plain = build_uc(&spec).unwrap().model.relaxed();
    c.bench_function("root_lp_plain_uc", |b| b.iter(|| solve_lp(black_box(&plain)).unwrap()));
    for hidden in [vec![8], vec![32]] {
        let mut uc = build_uc(&spec).unwrap();
        attach_frequency_constraints(&mut uc, &demo_network(&spec, &hidden), None, 49.2).unwrap();
        let lp = uc.model.relaxed();
        c.bench_function(&format!("root_lp_uc_nn{hidden:?}"), |b| b.iter(|| solve_lp(black_box(&lp)).unwrap()));
    }
}

fn forward_pass(c: &mut Criterion) {
    let spec = SystemSpec::demo();
    let x = build_feature_vector(&demo_op(), big_m_gamma(&spec));
    for hidden in [vec![32], vec![16, 8, 8]] {
        let params = demo_network(&spec, &hidden);
        c.bench_function(&format!("forward{hidden:?}"), |b| b.iter(|| forward(&params, black_box(&x)).unwrap()));
    }
}

fn simulation(c: &mut Criterion) {
    let spec = SystemSpec::demo();
    let op = demo_op();
    let cfg = SimConfig::default();
    c.bench_function("simulate_contingency_30s", |b| {
        b.iter(|| simulate_contingency(&spec, black_box(&op), &cfg).unwrap())
    });
}

criterion_group!(benches, simplex, forward_pass, simulation);
criterion_main!(benches);
