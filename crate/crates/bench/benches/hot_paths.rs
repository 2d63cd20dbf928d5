use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use eqs_core::aqce::{synthesize_isometry, AqceConfig};
use eqs_core::numerics::{self, CMatrix, HermitianMatrix};
use eqs_core::simulator::{
    apply_gate, environment_tensor, run_circuit, GateCircuit, StateVector, TwoQubitGate,
};

fn random_gate(rng: &mut ChaCha8Rng, pair: (usize, usize)) -> TwoQubitGate {
    let mut params = [0.0; 15];
    for p in &mut params {
        let u1: f64 = rand::Rng::gen::<f64>(rng);
        let u2: f64 = rand::Rng::gen::<f64>(rng);
        *p = (-2.0 * u1.max(f64::MIN_POSITIVE).ln()).sqrt()
            * (2.0 * std::f64::consts::PI * u2).cos();
    }
    TwoQubitGate::from_params(pair, params).unwrap()
}

fn bench_gate_application(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_gate");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [6usize, 10, 14] {
        let state = StateVector::random(&mut rng, n);
        let gate = random_gate(&mut rng, (0, n / 2));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| apply_gate(&state, &gate).unwrap())
        });
    }
    group.finish();
}

fn bench_environment_tensor(c: &mut Criterion) {
    let mut group = c.benchmark_group("environment_tensor");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [6usize, 10, 14] {
        let bra = StateVector::random(&mut rng, n);
        let ket = StateVector::random(&mut rng, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| environment_tensor(&[(&bra, &ket)], (1, n - 1)).unwrap())
        });
    }
    group.finish();
}

fn bench_eigh(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigh");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for dim in [4usize, 32, 128] {
        let mut m: CMatrix = (0..dim)
            .map(|_| {
                (0..dim)
                    .map(|_| {
                        num_complex::Complex64::new(
                            rand::Rng::gen::<f64>(&mut rng) - 0.5,
                            rand::Rng::gen::<f64>(&mut rng) - 0.5,
                        )
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        for i in 0..dim {
            for j in 0..i {
                m[j][i] = m[i][j].conj();
            }
            m[i][i] = num_complex::Complex64::new(m[i][i].re, 0.0);
        }
        let h = HermitianMatrix::new(m).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| numerics::eigh(&h).unwrap())
        });
    }
    group.finish();
}

fn bench_synthesis(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let planted = GateCircuit::new(
        5,
        vec![random_gate(&mut rng, (0, 1)), random_gate(&mut rng, (2, 3)), random_gate(&mut rng, (1, 4))],
    )
    .unwrap();
    let target = run_circuit(&planted, &StateVector::zero(5)).unwrap();
    let config = AqceConfig {
        initial_gates: 3,
        growth_per_step: 3,
        sweeps_per_step: 2,
        max_gates: Some(9),
        target_fidelity: 0.999,
        ..AqceConfig::default()
    };
    c.bench_function("synthesize_plant_recover_n5", |b| {
        b.iter(|| synthesize_isometry(std::slice::from_ref(&target), &config).unwrap())
    });
}

criterion_group!(
    benches,
    bench_gate_application,
    bench_environment_tensor,
    bench_eigh,
    bench_synthesis
);
criterion_main!(benches);
