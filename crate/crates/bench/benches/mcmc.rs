use criterion::{criterion_group, criterion_main, Criterion};
use trust_bench::data;
use trust_core::copula::{fit_copula_mcmc, pseudo_observations};
use trust_core::inference::{run_mcmc, McmcConfig, PriorConfig};
use trust_core::numkernel::RngStream;

fn sweeps(n: usize) -> McmcConfig {
    McmcConfig {
        n_burn: n,
        n_keep: n,
        ..Default::default()
    }
}

fn mcmc(c: &mut Criterion) {
    let mut g = c.benchmark_group("mcmc");
    g.sample_size(10);
    for q in [1, 2] {
        let y = data(q, 1040);
        g.bench_function(format!("distribution 20 sweeps n1040 q{q}"), |b| {
            b.iter(|| run_mcmc(&y, q, &sweeps(10), &PriorConfig::default(), &mut RngStream::new(1, 1)))
        });
    }
    let u = pseudo_observations(&data(2, 1040)).unwrap();
    g.bench_function("copula 4 sweeps n1040 q2", |b| {
        b.iter(|| fit_copula_mcmc(&u, 2, &sweeps(2), &PriorConfig::default(), &mut RngStream::new(1, 1)))
    });
    g.finish();
}

criterion_group!(benches, mcmc);
criterion_main!(benches);
