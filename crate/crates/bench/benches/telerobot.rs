use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, Criterion};
use telerobot::protocol::{decode, encode, WireJoints};
use telerobot::session::{ClientId, SessionState};
use telerobot::simnet::{profiles, run_scenario, ScenarioScript, SimConfig};
use telerobot::{forward_kinematics, ArmConfig};
use telerobot_bench::{sample_messages, sample_poses};

fn codec(c: &mut Criterion) {
    let msgs = sample_messages();
    let lines: Vec<Vec<u8>> = msgs.iter().map(|m| encode(m).unwrap()).collect();
    c.bench_function("encode all prefixes", |b| {
        b.iter(|| {
            for m in &msgs {
                black_box(encode(black_box(m)).unwrap());
            }
        })
    });
    c.bench_function("decode all prefixes", |b| {
        b.iter(|| {
            for l in &lines {
                black_box(decode(black_box(l)).unwrap());
            }
        })
    });
}

fn kinematics(c: &mut Criterion) {
    let cfg = ArmConfig::default();
    let poses = sample_poses(256);
    c.bench_function("forward kinematics x256", |b| {
        b.iter(|| {
            for p in &poses {
                black_box(forward_kinematics(&cfg, black_box(p)));
            }
        })
    });
}

fn session(c: &mut Criterion) {
    let ids: Vec<ClientId> = (0..8).map(|i| ClientId::new(format!("c{i}"))).collect();
    let sp = WireJoints([100, 200, 0, 0, 0]);
    c.bench_function("session submit+complete 8 clients", |b| {
        b.iter(|| {
            let mut s = SessionState::default();
            for id in &ids {
                s.join(id.clone(), "h").unwrap();
            }
            for id in &ids {
                s.submit(id, sp, Duration::ZERO).unwrap();
            }
            while s.active().is_some() {
                black_box(s.complete_active(sp, Duration::ZERO).unwrap());
            }
        })
    });
}

fn simnet(c: &mut Criterion) {
    let script = ScenarioScript::table1(1);
    let cfg = SimConfig::default();
    let profile = profiles::inter_lan();
    c.bench_function("simnet table1 script, inter-lan", |b| {
        b.iter(|| black_box(run_scenario(&profile, &script, &cfg).unwrap()))
    });
}

criterion_group!(benches, codec, kinematics, session, simnet);
criterion_main!(benches);
