mod oracles;

use std::net::TcpListener;
use std::thread;
use std::time::{Duration, Instant};

use congra_core::cqi::{serve_robot, SimParams, Simulator};
use congra_core::session::{render_transcript, run_script, EventKind, Session, TcpLink, NO_PARSE_REPLY};
use congra_core::world::Level;
use oracles::harness::{replay, run_scenario, script_lines, script_world};
use oracles::{fixture_world, repo_root, shipped_grammar};

fn read(rel: &str) -> String {
    std::fs::read_to_string(repo_root().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// (script, world override, golden, expected exit status)
fn golden_cases() -> Vec<(String, Option<&'static str>, String, i32)> {
    let mut cases = Vec::new();
    for entry in std::fs::read_dir(repo_root().join("scripts")).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        let stem = name.trim_end_matches(".txt").to_string();
        let failing = ["already_holding", "pronoun", "transitivity", "unparseable"].contains(&stem.as_str());
        cases.push((stem.clone(), None, stem, i32::from(failing)));
    }
    cases.push((
        "scenario1".into(),
        Some("kitchen_empty_counter.json"),
        "scenario1_empty_counter".into(),
        0,
    ));
    cases.sort();
    cases
}

#[test]
fn golden_transcripts_are_byte_stable() {
    let g = shipped_grammar();
    let cases = golden_cases();
    assert_eq!(cases.len(), 15);
    for (script, world, golden, status) in cases {
        let text = read(&format!("scripts/{script}.txt"));
        let world = world.unwrap_or_else(|| script_world(&text));
        let started = Instant::now();
        let (transcript, code) = run_script(&text, g.clone(), fixture_world(&g, world));
        assert!(started.elapsed() < Duration::from_secs(5), "{golden} took {:?}", started.elapsed());
        assert_eq!(transcript, read(&format!("golden/{golden}.transcript")), "{golden}");
        assert_eq!(code, status, "{golden}");
        let (again, _) = run_script(&text, g.clone(), fixture_world(&g, world));
        assert_eq!(again, transcript, "{golden} is not deterministic");
    }
}

#[test]
fn gibberish_gets_exactly_one_reply() {
    let g = shipped_grammar();
    let mut s = Session::builtin(g.clone(), fixture_world(&g, "lab.json"), false);
    let events = s.repl_turn("asdf qwer");
    let replies: Vec<_> = events.iter().filter(|e| e.kind == EventKind::Reply).collect();
    assert_eq!(replies.len(), 1);
    assert_eq!(replies[0].text, NO_PARSE_REPLY);
    assert!(replies[0].error);
    assert!(!events.iter().any(|e| e.kind == EventKind::CqiCmd));
}

#[test]
fn model_tracks_the_simulator_in_both_scenarios() {
    let g = shipped_grammar();
    for (script, world) in [
        ("scenario1", "kitchen.json"),
        ("scenario1", "kitchen_empty_counter.json"),
        ("scenario2", "lab.json"),
        ("scenario2_two_blue", "lab_two_blue.json"),
    ] {
        let text = read(&format!("scripts/{script}.txt"));
        let start = fixture_world(&g, world);
        let run = run_scenario(&g, &start, &script_lines(&text));
        assert!(!run.failed, "{script} on {world}");
        assert_eq!(replay(&start, &run.recording.data), run.simulated, "{script} on {world}");
        assert_eq!(run.model, run.simulated, "{script} on {world}");
    }
}

#[test]
fn scenario_one_ends_on_the_dining_table() {
    let g = shipped_grammar();
    let text = read("scripts/scenario1.txt");
    let run = run_scenario(&g, &fixture_world(&g, "kitchen.json"), &script_lines(&text));
    assert_eq!(run.recording.commands.len(), 4);
    assert_eq!(run.model.robot.holding, None);
    assert_eq!(
        run.model.objects["soda_can_1"].level,
        Level::Surface("dining_table".into())
    );
}

#[test]
fn tcp_link_matches_the_builtin_link() {
    let g = shipped_grammar();
    for (script, world) in [("scenario1", "kitchen.json"), ("scenario2", "lab.json")] {
        let text = read(&format!("scripts/{script}.txt"));
        let start = fixture_world(&g, world);
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let sim = Simulator::new(start.clone(), SimParams::default());
        let server = thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            serve_robot(stream, sim, false)
        });
        let link = TcpLink::connect(addr, Duration::from_secs(5)).unwrap();
        let mut session = Session::new(g.clone(), start.clone(), Box::new(link), None).unwrap();
        for line in script_lines(&text) {
            session.repl_turn(line);
        }
        let over_tcp = render_transcript(session.transcript());
        let model = session.model().clone();
        drop(session);
        server.join().unwrap().unwrap();
        let (builtin, _) = run_script(&text, g.clone(), start);
        assert_eq!(over_tcp, builtin, "{script}");
        assert_eq!(&model, &run_scenario(&g, &fixture_world(&g, world), &script_lines(&text)).model);
    }
}
