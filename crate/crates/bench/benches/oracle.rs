use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mallows_core::{partition_function, ExactModel, ModelParams};

fn enumeration(c: &mut Criterion) {
    let mut group = c.benchmark_group("partition_function");
    group.sample_size(10);
    for n in [6, 8, 9] {
        let params = ModelParams::new(n, 0.7).unwrap();
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| partition_function(&params).unwrap())
        });
    }
    group.finish();

    let params = ModelParams::new(8, 0.7).unwrap();
    c.bench_function("exact_table/8", |b| {
        b.iter(|| ExactModel::new(params).unwrap())
    });
}

criterion_group!(benches, enumeration);
criterion_main!(benches);
