use criterion::{black_box, criterion_group, criterion_main, Criterion};
use trust_bench::{data, omega3, params};
use trust_core::copula::{bivariate_copula_cdf, copula_log_density_rows, kendall, pseudo_observations, spearman};
use trust_core::numkernel::{mvn_cdf, mvt_cdf, RngStream};
use trust_core::trust::{log_pdf_joint, MarginalTable};

fn densities(c: &mut Criterion) {
    for q in [1, 2, 3] {
        let p = params(q);
        c.bench_function(&format!("log_pdf_joint d3 q{q}"), |b| b.iter(|| log_pdf_joint(black_box(&[0.3, -0.2, 1.1]), &p)));
        c.bench_function(&format!("marginal table d3 q{q}"), |b| b.iter(|| MarginalTable::new(black_box(&p), 2)));
    }
    let p = params(2);
    let u = pseudo_observations(&data(2, 1040)).unwrap();
    c.bench_function("copula log density 1040 rows q2, cached margins", |b| b.iter(|| copula_log_density_rows(black_box(&u), &p)));
}

fn distribution_functions(c: &mut Criterion) {
    let sigma = omega3();
    let x = [0.2, -0.1, 0.4];
    c.bench_function("mvn_cdf d3", |b| b.iter(|| mvn_cdf(black_box(&x), &sigma, 1 << 12, &mut RngStream::new(1, 0))));
    c.bench_function("mvt_cdf d3 nu5", |b| b.iter(|| mvt_cdf(black_box(&x), &sigma, 5.0, 1 << 12, &mut RngStream::new(1, 0))));
    let big = trust_core::DMatrix::from_fn(6, 6, |i, j| if i == j { 1.0 } else { 0.3 });
    c.bench_function("mvt_cdf d6 nu5 4096 points", |b| {
        b.iter(|| mvt_cdf(black_box(&[0.0; 6]), &big, 5.0, 1 << 12, &mut RngStream::new(1, 0)))
    });
}

fn dependence(c: &mut Criterion) {
    let mut g = c.benchmark_group("dependence");
    g.sample_size(10);
    for q in [1, 2] {
        let p = params(q);
        g.bench_function(format!("kendall q{q}"), |b| b.iter(|| kendall(black_box(&p), (1, 2))));
        g.bench_function(format!("spearman q{q}"), |b| b.iter(|| spearman(black_box(&p), (1, 2))));
        g.bench_function(format!("copula cdf q{q}"), |b| b.iter(|| bivariate_copula_cdf(black_box(0.05), 0.05, &p, (1, 2))));
    }
    g.finish();
}

criterion_group!(benches, densities, distribution_functions, dependence);
criterion_main!(benches);
