//! Wire-codec fuzzing: random messages must survive encode then decode
//! unchanged, and mangled lines must be rejected without panicking.

use congra_core::cqi::{decode_message, encode_message, CqiCommand, CqiData, Payload, COMMAND_TOPIC, DATA_TOPIC};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::Report;

fn random_f64(rng: &mut StdRng) -> f64 {
    match rng.gen_range(0..8) {
        0 => 0.0,
        1 => -0.0,
        2 => f64::MAX * if rng.gen() { 1.0 } else { -1.0 },
        3 => f64::MIN_POSITIVE * rng.gen_range(0.0..1.0),
        4 => rng.gen_range(-1e6..1e6),
        5 => f64::from_bits(rng.gen::<u64>() & !(0x7ffu64 << 52) | (rng.gen_range(1u64..0x7ff) << 52)),
        6 => rng.gen_range(-10.0..10.0),
        _ => (rng.gen_range(-1000..1000) as f64) * 0.05,
    }
}

fn random_text(rng: &mut StdRng) -> String {
    const POOL: &[&str] = &[
        "a", "soda_can_1", "marker", " ", "\"", "\\", "\n", "\t", "é", "机器人", "🤖", "{", "}", ":", ",", "none", "\u{0}",
        "\u{7f}", "null",
    ];
    let len = rng.gen_range(1..8);
    (0..len).map(|_| POOL[rng.gen_range(0..POOL.len())]).collect()
}

pub fn random_payload(rng: &mut StdRng) -> Payload {
    match rng.gen_range(0..6) {
        0 => CqiCommand::MoveToPose {
            x: random_f64(rng),
            y: random_f64(rng),
            theta: random_f64(rng),
        }
        .into(),
        1 => CqiCommand::GraspObject {
            object_label: random_text(rng),
        }
        .into(),
        2 => CqiCommand::Release {}.into(),
        3 => CqiData::AtPose {
            x: random_f64(rng),
            y: random_f64(rng),
            theta: random_f64(rng),
        }
        .into(),
        4 => CqiData::Holding {
            object: if rng.gen_bool(0.3) { "none".into() } else { random_text(rng) },
        }
        .into(),
        _ => CqiData::HasProperty {
            object: random_text(rng),
            property: random_text(rng),
            value: random_text(rng),
        }
        .into(),
    }
}

fn same_bits(a: &Payload, b: &Payload) -> bool {
    let bits = |p: &Payload| match p {
        Payload::Command(CqiCommand::MoveToPose { x, y, theta }) | Payload::Data(CqiData::AtPose { x, y, theta }) => {
            Some([x.to_bits(), y.to_bits(), theta.to_bits()])
        }
        _ => None,
    };
    a == b && bits(a) == bits(b)
}

/// Round-trip `cases` random messages and decode as many mangled lines.
pub fn check_round_trip(cases: usize, seed: u64) -> Report {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut report = Report::default();
    for case in 0..cases {
        report.cases += 1;
        let payload = random_payload(&mut rng);
        let topic = match payload {
            Payload::Command(_) => COMMAND_TOPIC,
            Payload::Data(_) => DATA_TOPIC,
        };
        let seq: u64 = rng.gen();
        let stamp = random_f64(&mut rng).abs();
        let line = match encode_message(topic, &payload, seq, stamp) {
            Ok(l) => l,
            Err(e) => {
                report.mismatches.push(format!("case {case}: encode failed: {e}"));
                continue;
            }
        };
        if !line.ends_with('\n') || line[..line.len() - 1].contains('\n') {
            report.mismatches.push(format!("case {case}: not one LF-terminated line"));
            continue;
        }
        match decode_message(&line) {
            Ok(env)
                if env.topic == topic
                    && same_bits(&env.payload, &payload)
                    && env.seq == seq
                    && env.stamp.to_bits() == stamp.to_bits() => {}
            other => report
                .mismatches
                .push(format!("case {case}: {line:?} decoded to {other:?}")),
        }
        let mut bytes = line.into_bytes();
        match rng.gen_range(0..3) {
            0 => bytes.truncate(rng.gen_range(0..bytes.len())),
            1 => {
                let i = rng.gen_range(0..bytes.len());
                bytes[i] = rng.gen();
            }
            _ => {
                let i = rng.gen_range(0..bytes.len());
                bytes.insert(i, b"{}[],:\"x0"[rng.gen_range(0..9)]);
            }
        }
        let mangled = String::from_utf8_lossy(&bytes);
        let _ = decode_message(&mangled);
    }
    report
}
