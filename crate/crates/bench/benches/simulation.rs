use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use ncsat_core::harness::{self, Scenario};
use ncsat_core::{Link, LinkProfile, SimDuration, SimTime};

fn niue(plain: usize, tunneled: usize) -> Scenario {
    Scenario::parse(&format!(
        "[scenario]\nname = niue\nduration_s = 30\nseed = 1\n\
         [downlink]\nbandwidth_mbps = 8\norbit = geo\nrandom_loss = 0.01\n\
         [uplink]\nbandwidth_mbps = 2\norbit = geo\n\
         [flows]\nplain = {plain}\ntunneled = {tunneled}\n"
    ))
    .unwrap()
}

fn link(c: &mut Criterion) {
    let mut g = c.benchmark_group("link");
    let packets = 10_000u64;
    g.throughput(Throughput::Elements(packets));
    g.bench_function("offer_advance", |b| {
        b.iter(|| {
            let profile = LinkProfile::new(10_000_000, SimDuration::from_millis(270), 500_000).with_random_loss(0.01);
            let mut l: Link<u64> = Link::new(profile, 1);
            let mut delivered = 0;
            for i in 0..packets {
                let now = SimTime::from_nanos(i * 1_100_000);
                l.offer(i, 1250, now);
                delivered += l.advance(now).len();
            }
            black_box(delivered)
        })
    });
    g.finish();
}

fn run(c: &mut Criterion) {
    let mut g = c.benchmark_group("run_30s_niue");
    g.sample_size(10);
    g.bench_function("plain", |b| b.iter(|| harness::run(black_box(&niue(1, 0))).unwrap()));
    g.bench_function("tunneled", |b| b.iter(|| harness::run(black_box(&niue(0, 1))).unwrap()));
    g.finish();
}

criterion_group!(benches, link, run);
criterion_main!(benches);
