use std::path::Path;
use std::process::{Command, Output};

use timbre::features::{CandidateMatrix, CANDIDATES};
use timbre::session::{Event, NoLookup, Session};
use timbre::ParameterVector;

fn timbre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timbre"))
        .args(args)
        .output()
        .expect("spawn timbre")
}

fn ok(args: &[&str]) -> String {
    let out = timbre(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = timbre(args);
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(
        err.trim_end().lines().count(),
        1,
        "one-line diagnostic, got {err:?}"
    );
    err
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn every_subcommand_has_help() {
    for cmd in [
        &["synth", "render"][..],
        &["corpus", "build"],
        &["features", "extract"],
        &["features", "select"],
        &["gtm", "train"],
        &["surface", "build"],
        &["surface", "query"],
        &["serve"],
        &["session", "replay"],
        &["synth"],
        &["surface"],
        &[],
    ] {
        let mut args = cmd.to_vec();
        args.push("--help");
        let out = ok(&args);
        assert!(out.contains("Usage:"), "{cmd:?}");
    }
}

#[test]
fn synth_render_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.wav"), dir.path().join("b.wav"));
    ok(&[
        "synth",
        "render",
        "--params",
        "0.5x16",
        "--out",
        s(&a),
        "--duration",
        "0.5",
    ]);
    ok(&[
        "synth",
        "render",
        "--params",
        "0.5×16",
        "--out",
        s(&b),
        "--duration",
        "0.5",
    ]);
    let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ba, bb);
    let (samples, rate) = timbre::wav::decode(&ba).unwrap();
    assert_eq!((samples.len(), rate), (22050, 44100));
}

#[test]
fn failures_exit_nonzero_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.wav");
    assert!(fails(&["synth", "render", "--params", "0.5x15", "--out", s(&out)]).contains("params"));
    fails(&[
        "synth",
        "render",
        "--params",
        "0.5x16",
        "--out",
        s(&out),
        "--octave",
        "9",
    ]);
    let missing = dir.path().join("none.json");
    assert!(fails(&[
        "surface",
        "query",
        "--surface",
        s(&missing),
        "--x",
        "0",
        "--y",
        "0"
    ])
    .contains("none.json"));
    fails(&[
        "features",
        "select",
        "--candidates",
        s(&missing),
        "--out",
        s(&out),
    ]);

    let garbage = dir.path().join("garbage.tsfm");
    std::fs::write(&garbage, b"TSFMnonsense").unwrap();
    assert!(
        fails(&["gtm", "train", "--features", s(&garbage), "--out", s(&out)])
            .contains("feature matrix")
    );
}

fn toy_candidates(n: usize, seed: u64) -> CandidateMatrix {
    let mut state = seed;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let params: Vec<ParameterVector> = (0..n)
        .map(|_| ParameterVector::from_slice(&(0..16).map(|_| next()).collect::<Vec<_>>()).unwrap())
        .collect();
    let rows = nalgebra::DMatrix::from_fn(n, CANDIDATES, |_, j| next() * (1.0 + j as f64));
    CandidateMatrix {
        input_hash: format!("toy{seed}"),
        ids: (0..n).map(|i| format!("{seed}e{i:04}")).collect(),
        params,
        octaves: vec![0; n],
        rows,
    }
}

#[test]
fn stages_refuse_mismatched_chains() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    toy_candidates(80, 1).save(&p("c1.tsfc")).unwrap();
    toy_candidates(80, 2).save(&p("c2.tsfc")).unwrap();
    ok(&[
        "features",
        "select",
        "--candidates",
        s(&p("c1.tsfc")),
        "--out",
        s(&p("f1.tsfm")),
    ]);
    ok(&[
        "features",
        "select",
        "--candidates",
        s(&p("c2.tsfc")),
        "--out",
        s(&p("f2.tsfm")),
    ]);
    assert!(p("f1.tsfm.names.txt").exists());
    let train = |f: &str, m: &str| {
        ok(&[
            "gtm",
            "train",
            "--features",
            s(&p(f)),
            "--out",
            s(&p(m)),
            "--latent",
            "5",
            "--basis",
            "3",
            "--max-iter",
            "10",
        ]);
    };
    train("f1.tsfm", "m1.tsgm");

    let err = fails(&[
        "surface",
        "build",
        "--features",
        s(&p("f2.tsfm")),
        "--model",
        s(&p("m1.tsgm")),
        "--out",
        s(&p("s.json")),
    ]);
    assert!(err.contains("chain"), "{err}");
    assert!(!p("s.json").exists());

    let out = ok(&[
        "surface",
        "build",
        "--features",
        s(&p("f1.tsfm")),
        "--model",
        s(&p("m1.tsgm")),
        "--out",
        s(&p("s.json")),
        "--clusters",
        "5",
    ]);
    assert!(out.starts_with("80 points"));
    let surface = timbre::surface::TimbreSurface::import(&p("s.json")).unwrap();
    assert_eq!(
        surface.input_hash(),
        timbre::artifact::hash_file(&p("m1.tsgm")).unwrap()
    );

    let pt = &surface.points()[17];
    let printed = ok(&[
        "surface",
        "query",
        "--surface",
        s(&p("s.json")),
        "--x",
        &pt.x.to_string(),
        "--y",
        &pt.y.to_string(),
    ]);
    let got: ParameterVector = printed.trim().parse().unwrap();
    assert_eq!(got, pt.params);
    let blended = ok(&[
        "surface",
        "query",
        "--surface",
        s(&p("s.json")),
        "--x",
        &pt.x.to_string(),
        "--y",
        &pt.y.to_string(),
        "--interpolate",
    ]);
    assert_eq!(
        blended.trim().parse::<ParameterVector>().unwrap(),
        pt.params
    );
}

#[test]
fn session_replay_prints_state_hash() {
    let dir = tempfile::tempdir().unwrap();
    let mut session = Session::new();
    session.submit("ana", Event::Join, 1, &NoLookup).unwrap();
    session
        .submit(
            "ana",
            Event::CreateNode {
                id: "n".into(),
                position: [0.25, -0.5],
                channel: None,
            },
            2,
            &NoLookup,
        )
        .unwrap();
    let log = dir.path().join("s.jsonl");
    std::fs::write(&log, session.to_jsonl()).unwrap();
    let out = ok(&["session", "replay", "--log", s(&log)]);
    assert_eq!(out.trim(), format!("2 {}", session.state.hash()));

    let mut text = session.to_jsonl();
    text = text.replacen("\"seq\":2", "\"seq\":3", 1);
    std::fs::write(&log, text).unwrap();
    assert!(fails(&["session", "replay", "--log", s(&log)]).contains("sequence gap"));
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("timbre.toml");
    let out = dir.path().join("c.wav");
    std::fs::write(
        &cfg,
        format!(
            "[synth.render]\nparams = \"0.25x16\"\nduration = 0.25\nout = {:?}\n",
            s(&out)
        ),
    )
    .unwrap();
    ok(&["--config", s(&cfg), "synth", "render"]);
    let (samples, _) = timbre::wav::read(&out).unwrap();
    assert_eq!(samples.len(), 11025);

    // command line wins
    ok(&["--config", s(&cfg), "synth", "render", "--duration", "0.5"]);
    assert_eq!(timbre::wav::read(&out).unwrap().0.len(), 22050);
}
