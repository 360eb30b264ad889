//! End-to-end tests of the `navar` binary: artifact round-trips, exit-code
//! contract, configuration precedence, checkpoint resume after a hard kill,
//! and conformance of the DOT output to the graph grammar subset it claims.

use std::fs;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use navar::io::csv;

fn navar() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_navar"));
    // Isolate from ambient overrides so assertions see only their own flags.
    cmd.env_remove("NAVAR_MASTER_SEED");
    cmd.env_remove("NAVAR_WORKERS");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary spawns")
}

fn assert_code(output: &Output, expected: i32, context: &str) {
    let code = output.status.code().expect("process exits normally");
    assert_eq!(
        code,
        expected,
        "{context}: expected exit {expected}, got {code}\nstderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

fn stderr_text(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Simulates a small panel into `path` and returns the file bytes.
fn simulate_panel(path: &Path, p: usize, n: usize, seed: u64) -> Vec<u8> {
    let output = run(navar()
        .arg("simulate")
        .args(["--p", &p.to_string()])
        .args(["--edges-per-row", "2"])
        .args(["--n", &n.to_string()])
        .args(["--seed", &seed.to_string()])
        .args(["--burn-in", "100"])
        .arg("--out")
        .arg(path));
    assert_code(&output, 0, "simulate");
    fs::read(path).expect("panel file written")
}

#[test]
fn simulate_output_round_trips_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    let original = simulate_panel(&path, 6, 40, 3);

    let parsed = csv::read_panel(original.as_slice()).expect("panel parses");
    assert_eq!(parsed.n_rows(), 40);
    assert_eq!(parsed.n_vars(), 6);
    assert_eq!(
        parsed.labels.as_deref(),
        Some(&["x1", "x2", "x3", "x4", "x5", "x6"].map(String::from)[..])
    );

    let mut rewritten = Vec::new();
    csv::write_panel(&mut rewritten, &parsed).expect("rewrite");
    assert_eq!(original, rewritten, "round trip must be bit-identical");
}

#[test]
fn simulate_is_deterministic_in_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let first = simulate_panel(&dir.path().join("a.csv"), 5, 30, 7);
    let second = simulate_panel(&dir.path().join("b.csv"), 5, 30, 7);
    let other = simulate_panel(&dir.path().join("c.csv"), 5, 30, 8);
    assert_eq!(first, second, "same seed, same bytes");
    assert_ne!(first, other, "different seed, different panel");
}

#[test]
fn exit_codes_follow_the_contract() {
    // 0: help.
    assert_code(&run(navar().arg("--help")), 0, "help");

    // 2: clap-level parse failure.
    assert_code(&run(navar().arg("simulate").arg("--bogus")), 2, "unknown flag");

    // 2: domain validation (cluster blocks need p divisible by the block size).
    let output = run(navar()
        .arg("simulate")
        .args(["--pattern", "cluster", "--p", "15", "--n", "30"]));
    assert_code(&output, 2, "cluster p=15");
    assert!(!stderr_text(&output).is_empty());

    // 2: zero workers is rejected before any work starts.
    let output = run(navar().args(["--workers", "0", "simulate", "--n", "30"]));
    assert_code(&output, 2, "workers 0");

    // 3: model precondition (a single row is not a series).
    let output = run(navar().arg("simulate").args(["--n", "1", "--p", "5"]));
    assert_code(&output, 3, "n=1");

    // 4: I/O failure surfaces as an internal error.
    let output = run(navar()
        .arg("fit")
        .args(["--input", "/nonexistent/panel.csv", "--lambda", "1"]));
    assert_code(&output, 4, "missing input");
}

#[test]
fn malformed_csv_is_rejected_with_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "a,b\n1,2\n3\n").unwrap();
    let output = run(navar().arg("fit").arg("--input").arg(&ragged).args(["--lambda", "1"]));
    assert_code(&output, 2, "ragged row");
    let message = stderr_text(&output);
    assert!(message.contains("row 3"), "diagnostic names the row: {message}");

    let textual = dir.path().join("textual.csv");
    fs::write(&textual, "a,b\n1,oops\n2,3\n").unwrap();
    let output = run(navar().arg("fit").arg("--input").arg(&textual).args(["--lambda", "1"]));
    assert_code(&output, 2, "non-numeric cell");
    let message = stderr_text(&output);
    assert!(
        message.contains("row 2") && message.contains("column 2"),
        "diagnostic names the cell: {message}"
    );
}

#[test]
fn config_file_flag_and_env_precedence() {
    let dir = tempfile::tempdir().unwrap();

    let config = dir.path().join("sim.conf");
    fs::write(&config, "# panel shape\nn = 30\np = 5\nseed = 9\nedges-per-row = 2\nburn-in = 100\n").unwrap();

    let from_config = dir.path().join("fromconf.csv");
    let output = run(navar()
        .arg("simulate")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&from_config));
    assert_code(&output, 0, "config-driven simulate");
    let reference = simulate_panel(&dir.path().join("ref9.csv"), 5, 30, 9);
    assert_eq!(fs::read(&from_config).unwrap(), reference, "file values apply");

    // A flag overrides the file.
    let flag_wins = dir.path().join("flag.csv");
    let output = run(navar()
        .arg("simulate")
        .arg("--config")
        .arg(&config)
        .args(["--seed", "4"])
        .arg("--out")
        .arg(&flag_wins));
    assert_code(&output, 0, "flag override");
    let reference4 = simulate_panel(&dir.path().join("ref4.csv"), 5, 30, 4);
    assert_eq!(fs::read(&flag_wins).unwrap(), reference4, "flag beats file");

    // The environment overrides both.
    let env_wins = dir.path().join("env.csv");
    let output = run(navar()
        .arg("simulate")
        .arg("--config")
        .arg(&config)
        .args(["--seed", "4"])
        .env("NAVAR_MASTER_SEED", "11")
        .arg("--out")
        .arg(&env_wins));
    assert_code(&output, 0, "env override");
    let reference11 = simulate_panel(&dir.path().join("ref11.csv"), 5, 30, 11);
    assert_eq!(fs::read(&env_wins).unwrap(), reference11, "env beats flag");

    // Unknown keys are rejected with their line number.
    let broken = dir.path().join("broken.conf");
    fs::write(&broken, "n = 30\nbogus = 1\n").unwrap();
    let output = run(navar().arg("simulate").arg("--config").arg(&broken));
    assert_code(&output, 2, "unknown config key");
    let message = stderr_text(&output);
    assert!(
        message.contains("bogus") && message.contains("line 2"),
        "diagnostic names key and line: {message}"
    );
}

#[test]
fn worker_override_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let serial = dir.path().join("serial.csv");
    let output = run(navar()
        .args(["--workers", "1"])
        .arg("eval-table1")
        .args(["--patterns", "random", "--p-list", "6", "--n-list", "30"])
        .args(["--reps", "4", "--seed", "2", "--burn-in", "50", "--edges-per-row", "2"])
        .arg("--out")
        .arg(&serial));
    assert_code(&output, 0, "one worker");

    let parallel = dir.path().join("parallel.csv");
    let output = run(navar()
        .arg("eval-table1")
        .args(["--patterns", "random", "--p-list", "6", "--n-list", "30"])
        .args(["--reps", "4", "--seed", "2", "--burn-in", "50", "--edges-per-row", "2"])
        .env("NAVAR_WORKERS", "3")
        .arg("--out")
        .arg(&parallel));
    assert_code(&output, 0, "three workers");
    assert_eq!(
        fs::read(&serial).unwrap(),
        fs::read(&parallel).unwrap(),
        "summaries are scheduling-independent"
    );
}

// ---------------------------------------------------------------------------
// fit / predict artifacts
// ---------------------------------------------------------------------------

#[test]
fn huge_penalty_gives_an_edgeless_graph() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    simulate_panel(&panel, 5, 60, 12);
    let dot_path = dir.path().join("graph.dot");
    let json_path = dir.path().join("model.json");
    let output = run(navar()
        .arg("fit")
        .arg("--input")
        .arg(&panel)
        .args(["--lambda", "1e9"])
        .arg("--out-json")
        .arg(&json_path)
        .arg("--out-dot")
        .arg(&dot_path));
    assert_code(&output, 0, "huge lambda fit");

    let dot = fs::read_to_string(&dot_path).unwrap();
    assert!(!dot.contains("->"), "no edges expected: {dot}");
    for label in ["x1", "x5"] {
        assert!(dot.contains(&format!("\"{label}\";")), "nodes still listed");
    }

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json_path).unwrap())
        .expect("model JSON parses");
    assert_eq!(report["fit"]["support"].as_array().unwrap().len(), 0);
    assert_eq!(report["labels"].as_array().unwrap().len(), 5);
    assert!(report["cv"].is_null(), "fixed-penalty fit records no cv table");
}

#[test]
fn fit_predict_flow_reuses_the_model_faithfully() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    simulate_panel(&panel, 4, 90, 21);
    let json_path = dir.path().join("model.json");
    let output = run(navar()
        .arg("fit")
        .arg("--input")
        .arg(&panel)
        .args(["--cv", "--folds", "3", "--grid-points", "8", "--basis-size", "3"])
        .arg("--out-json")
        .arg(&json_path));
    assert_code(&output, 0, "cv fit");
    assert!(stderr_text(&output).contains("fitted lambda"));

    let forecasts = dir.path().join("forecast.csv");
    let output = run(navar()
        .arg("predict")
        .arg("--model")
        .arg(&json_path)
        .arg("--input")
        .arg(&panel)
        .arg("--out")
        .arg(&forecasts));
    assert_code(&output, 0, "predict");
    let predicted = csv::read_panel(fs::read(&forecasts).unwrap().as_slice()).unwrap();
    assert_eq!(predicted.n_rows(), 90);
    assert_eq!(predicted.n_vars(), 4);
    assert!(predicted.data.iter().all(|v| v.is_finite()));

    // Renamed columns must be refused: forecasts are per-variable.
    let mut renamed = String::from_utf8(fs::read(&panel).unwrap()).unwrap();
    renamed = renamed.replacen("x1,x2,x3,x4", "g1,g2,g3,g4", 1);
    let renamed_path = dir.path().join("renamed.csv");
    fs::write(&renamed_path, renamed).unwrap();
    let output = run(navar()
        .arg("predict")
        .arg("--model")
        .arg(&json_path)
        .arg("--input")
        .arg(&renamed_path));
    assert_code(&output, 2, "label mismatch");
}

// ---------------------------------------------------------------------------
// DOT grammar conformance
// ---------------------------------------------------------------------------

#[derive(Debug, PartialEq)]
enum Token {
    Word(String),
    Quoted(String),
    Symbol(char),
    Arrow,
}

/// Tokenizes the DOT subset: bare words, double-quoted strings with `\"` and
/// `\\` escapes, the `->` arrow, and single-character punctuation.
fn tokenize_dot(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '"' => {
                chars.next();
                let mut value = String::new();
                loop {
                    match chars.next().expect("unterminated string") {
                        '\\' => {
                            let escaped = chars.next().expect("dangling escape");
                            assert!(
                                escaped == '"' || escaped == '\\',
                                "unsupported escape \\{escaped}"
                            );
                            value.push(escaped);
                        }
                        '"' => break,
                        other => value.push(other),
                    }
                }
                tokens.push(Token::Quoted(value));
            }
            '-' => {
                chars.next();
                assert_eq!(chars.next(), Some('>'), "stray dash outside an arrow");
                tokens.push(Token::Arrow);
            }
            c if c.is_alphanumeric() || c == '_' => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        word.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                tokens.push(Token::Word(word));
            }
            c => {
                chars.next();
                tokens.push(Token::Symbol(c));
            }
        }
    }
    tokens
}

/// Parses the emitted digraph and returns (node names, edges with labels).
fn parse_digraph(text: &str) -> (Vec<String>, Vec<(String, String, f64)>) {
    let tokens = tokenize_dot(text);
    let mut cursor = tokens.iter().peekable();
    assert_eq!(cursor.next(), Some(&Token::Word("digraph".into())));
    assert!(matches!(cursor.next(), Some(Token::Word(_))), "graph name");
    assert_eq!(cursor.next(), Some(&Token::Symbol('{')));

    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    loop {
        match cursor.next().expect("unterminated graph body") {
            Token::Symbol('}') => break,
            // Attribute statement, e.g. rankdir=LR;
            Token::Word(key) => {
                assert!(!key.is_empty());
                assert_eq!(cursor.next(), Some(&Token::Symbol('=')));
                assert!(matches!(cursor.next(), Some(Token::Word(_))));
                assert_eq!(cursor.next(), Some(&Token::Symbol(';')));
            }
            Token::Quoted(name) => match cursor.peek() {
                Some(Token::Symbol(';')) => {
                    cursor.next();
                    nodes.push(name.clone());
                }
                Some(Token::Arrow) => {
                    cursor.next();
                    let Some(Token::Quoted(target)) = cursor.next() else {
                        panic!("edge target must be quoted");
                    };
                    assert_eq!(cursor.next(), Some(&Token::Symbol('[')));
                    assert_eq!(cursor.next(), Some(&Token::Word("label".into())));
                    assert_eq!(cursor.next(), Some(&Token::Symbol('=')));
                    let Some(Token::Quoted(weight)) = cursor.next() else {
                        panic!("edge label must be quoted");
                    };
                    assert_eq!(cursor.next(), Some(&Token::Symbol(']')));
                    assert_eq!(cursor.next(), Some(&Token::Symbol(';')));
                    let weight: f64 = weight.parse().expect("edge label is numeric");
                    edges.push((name.clone(), target.clone(), weight));
                }
                other => panic!("unexpected token after string: {other:?}"),
            },
            other => panic!("unexpected token {other:?}"),
        }
    }
    assert!(cursor.next().is_none(), "content after closing brace");
    (nodes, edges)
}

#[test]
fn dot_output_conforms_to_the_grammar_subset() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    simulate_panel(&panel, 5, 100, 33);
    let dot_path = dir.path().join("dense.dot");
    // A small penalty guarantees edges, exercising the edge grammar.
    let output = run(navar()
        .arg("fit")
        .arg("--input")
        .arg(&panel)
        .args(["--lambda", "0.001", "--basis-size", "3"])
        .arg("--out-dot")
        .arg(&dot_path)
        .arg("--out-json")
        .arg(dir.path().join("m.json")));
    assert_code(&output, 0, "dense fit");

    let text = fs::read_to_string(&dot_path).unwrap();
    let (nodes, edges) = parse_digraph(&text);
    assert_eq!(nodes, ["x1", "x2", "x3", "x4", "x5"].map(String::from));
    assert!(!edges.is_empty(), "small penalty should activate edges");
    for (source, target, weight) in &edges {
        assert!(nodes.contains(source) && nodes.contains(target));
        assert!(weight.is_finite() && *weight > 0.0);
    }

    // The graph must agree with the JSON support (edge k -> j for block (j, k)).
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    let support = report["fit"]["support"].as_array().unwrap();
    assert_eq!(support.len(), edges.len());
    for entry in support {
        let j = entry[0].as_u64().unwrap() as usize;
        let k = entry[1].as_u64().unwrap() as usize;
        let expected = (format!("x{}", k + 1), format!("x{}", j + 1));
        assert!(
            edges.iter().any(|(s, t, _)| (s.clone(), t.clone()) == expected),
            "support ({j}, {k}) missing from the graph"
        );
    }
}

// ---------------------------------------------------------------------------
// eval-table1 checkpointing
// ---------------------------------------------------------------------------

fn eval_command(dir: &Path, checkpoint: Option<&Path>, out: &Path) -> Command {
    let mut cmd = navar();
    cmd.arg("eval-table1")
        .args(["--patterns", "random", "--p-list", "8", "--n-list", "40,60"])
        .args(["--reps", "24", "--seed", "5", "--burn-in", "60", "--edges-per-row", "3"])
        .arg("--out")
        .arg(out);
    if let Some(checkpoint_dir) = checkpoint {
        cmd.arg("--checkpoint-dir").arg(checkpoint_dir);
    }
    cmd.current_dir(dir);
    cmd
}

fn data_lines(path: &Path) -> usize {
    match fs::read_to_string(path) {
        Ok(text) => text.lines().count().saturating_sub(1),
        Err(_) => 0,
    }
}

#[test]
fn checkpointed_runs_survive_a_hard_kill() {
    let dir = tempfile::tempdir().unwrap();

    // Reference: straight-through run without checkpoints.
    let plain_out = dir.path().join("plain.csv");
    assert_code(
        &run(&mut eval_command(dir.path(), None, &plain_out)),
        0,
        "plain run",
    );

    // Checkpointed, uninterrupted.
    let smooth_dir = dir.path().join("ckpt-smooth");
    let smooth_out = dir.path().join("smooth.csv");
    assert_code(
        &run(&mut eval_command(dir.path(), Some(&smooth_dir), &smooth_out)),
        0,
        "checkpointed run",
    );
    assert_eq!(
        fs::read(&plain_out).unwrap(),
        fs::read(&smooth_out).unwrap(),
        "checkpointing must not change the summary"
    );

    // Checkpointed with a SIGKILL mid-flight, then resumed.
    let killed_dir = dir.path().join("ckpt-killed");
    let killed_out = dir.path().join("killed.csv");
    let mut child = eval_command(dir.path(), Some(&killed_dir), &killed_out)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .expect("spawn");
    let first_cell = killed_dir.join("cell-random-p8-n40-s5.csv");
    let deadline = Instant::now() + Duration::from_secs(60);
    loop {
        if data_lines(&first_cell) >= 6 {
            break;
        }
        if child.try_wait().expect("poll").is_some() || Instant::now() > deadline {
            break;
        }
        std::thread::sleep(Duration::from_millis(2));
    }
    let _ = child.kill();
    let _ = child.wait();

    let progress = data_lines(&first_cell);
    // Simulate a torn final line from the kill: an unterminated fragment must
    // be discarded on resume rather than poisoning the file.
    if progress > 0 {
        let mut bytes = fs::read(&first_cell).unwrap();
        bytes.extend_from_slice(b"23,0.9");
        fs::write(&first_cell, bytes).unwrap();
    }

    assert_code(
        &run(&mut eval_command(dir.path(), Some(&killed_dir), &killed_out)),
        0,
        "resumed run",
    );
    assert_eq!(
        fs::read(&plain_out).unwrap(),
        fs::read(&killed_out).unwrap(),
        "kill + resume must reproduce the uninterrupted summary (progress at kill: {progress} rows)"
    );

    // A checkpoint from an incompatible layout is an input error.
    let bad_dir = dir.path().join("ckpt-bad");
    fs::create_dir_all(&bad_dir).unwrap();
    fs::write(bad_dir.join("cell-random-p8-n40-s5.csv"), "wrong,header\n1,2\n").unwrap();
    let output = run(&mut eval_command(dir.path(), Some(&bad_dir), &killed_out));
    assert_code(&output, 2, "corrupt checkpoint header");
}

// ---------------------------------------------------------------------------
// cv and tails subcommands
// ---------------------------------------------------------------------------

#[test]
fn cv_emits_the_candidate_table() {
    let dir = tempfile::tempdir().unwrap();
    let panel = dir.path().join("panel.csv");
    simulate_panel(&panel, 4, 80, 2);
    let table = dir.path().join("cv.csv");
    let output = run(navar()
        .arg("cv")
        .arg("--input")
        .arg(&panel)
        .args(["--basis-sizes", "2,3", "--folds", "3", "--grid-points", "8"])
        .arg("--out")
        .arg(&table));
    assert_code(&output, 0, "cv run");
    assert!(stderr_text(&output).contains("selected lambda"));

    let (headers, rows) = csv::read_table(fs::read(&table).unwrap().as_slice()).unwrap();
    assert_eq!(headers, ["basis_size", "lambda", "mean_error"]);
    assert_eq!(rows.len(), 2 * 8, "two levels, eight penalties each");
    for row in &rows {
        assert!(row[1].parse::<f64>().unwrap() > 0.0);
        assert!(row[2].parse::<f64>().unwrap().is_finite());
    }

    // Truncation levels make no sense for the linear family.
    let output = run(navar()
        .arg("cv")
        .arg("--input")
        .arg(&panel)
        .args(["--family", "linear", "--basis-sizes", "2,3"]));
    assert_code(&output, 2, "linear family with basis sizes");
}

#[test]
fn tails_emits_dominating_envelope_and_monotone_tables() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("tails.json");
    let prefix = dir.path().join("tail");
    let output = run(navar()
        .arg("tails")
        .args(["--rho", "0.2", "--n-list", "20,40,80", "--reps", "10000", "--seed", "4"])
        .arg("--out-prefix")
        .arg(&prefix)
        .arg("--out-json")
        .arg(&json_path));
    assert_code(&output, 0, "tails run");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(report["envelope"]["dominated_fraction"].as_f64(), Some(1.0));
    assert!(report["long_run_sd"].as_f64().unwrap() > 0.0);
    assert_eq!(report["estimates"].as_array().unwrap().len(), 3);

    for n in [20, 40, 80] {
        let table_path = dir.path().join(format!("tail-n{n}.csv"));
        let (headers, rows) = csv::read_table(fs::read(&table_path).unwrap().as_slice()).unwrap();
        assert_eq!(headers, ["z", "empirical", "wilson_hi", "envelope"]);
        let mut previous = f64::INFINITY;
        for row in &rows {
            let empirical: f64 = row[1].parse().unwrap();
            let wilson: f64 = row[2].parse().unwrap();
            let envelope: f64 = row[3].parse().unwrap();
            assert!(empirical <= previous, "empirical tail must be nonincreasing");
            assert!(wilson >= empirical, "the upper limit sits above the estimate");
            assert!(envelope >= wilson, "the fitted envelope dominates pointwise");
            previous = empirical;
        }
    }
}
