use std::process::{Command, Output};

use zk3col_core::adversary::exact_value_std2;
use zk3col_core::graph::fixtures::k4;
use zk3col_core::{Epsilon, Transcript};

fn graph(name: &str) -> String {
    format!("{}/../../graphs/{name}.g", env!("CARGO_MANIFEST_DIR"))
}

fn zk3col(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zk3col")).args(args).output().expect("run zk3col")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn honest_run_accepts_every_round() {
    let k3 = graph("k3");
    let o = zk3col(&["run", "--graph", &k3, "--protocol", "qnl3", "--rounds", "1000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "accepted 1000/1000");
}

#[test]
fn cheating_run_exits_one() {
    let k4 = graph("k4");
    let o = zk3col(&["run", "--graph", &k4, "--protocol", "loc2", "--rounds", "200", "--prover", "zero-coloring"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("rejected EDGE_VERIFICATION_FAILED"));
}

#[test]
fn seeded_runs_are_reproducible_and_tsv_parses() {
    let c5 = graph("c5");
    let args = [
        "--format",
        "tsv",
        "run",
        "--graph",
        &c5,
        "--protocol",
        "loc2",
        "--rounds",
        "50",
        "--seed",
        "3",
        "--transcripts",
    ];
    let a = stdout(&zk3col(&args));
    assert_eq!(a, stdout(&zk3col(&args)));
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), 51);
    for line in &lines[..50] {
        let t = Transcript::from_tsv(line).unwrap();
        assert!(t.verdict.accepted);
        assert_eq!(t.to_tsv(), *line);
    }
    assert_eq!(lines[50], "accepted\t50\t50");
}

#[test]
fn text_transcripts_parse() {
    let k3 = graph("k3");
    let o = zk3col(&["run", "--graph", &k3, "--protocol", "std2", "--rounds", "5", "--transcripts"]);
    for line in stdout(&o).lines().take(5) {
        assert_eq!(line.parse::<Transcript>().unwrap().to_string(), line);
    }
}

#[test]
fn zk_verify_reports_perfect_equality() {
    let o = zk3col(&["zk-verify", "--graph", &graph("k3"), "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next(), Some("PERFECT-ZK: all question triples equal"));
}

#[test]
fn zk_verify_single_triple() {
    let k3 = graph("k3");
    let o = zk3col(&["zk-verify", "--graph", &k3, "--triple", "e=(1,2) 1 1 | e=(1,2) 2 2 | e=(1,4) 1 1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("pattern=EDGE unveiled=1,2\n"));
    assert!(out.trim_end().ends_with("EQUAL"));
}

#[test]
fn bounds_line() {
    let o = zk3col(&["bounds", "--edges", "6"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().next(), Some("classical ≤ 71/72, quantum ≤ 1 − 1/150⁴"));
}

#[test]
fn value_matches_library() {
    let o = zk3col(&["value", "--graph", &graph("k4"), "--protocol", "std2"]);
    assert_eq!(o.status.code(), Some(0));
    let first = stdout(&o).lines().next().unwrap().to_string();
    let expected = exact_value_std2(&k4(), Epsilon::default()).unwrap();
    assert!(first.contains(&format!("value={}", expected.value)), "{first}");
}

#[test]
fn local_search_value_is_reproducible() {
    let k4 = graph("k4");
    let args = ["value", "--graph", &k4, "--protocol", "loc2", "--restarts", "10", "--seed", "5", "--jobs", "2"];
    let a = zk3col(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&zk3col(&args)));
    assert!(stdout(&a).starts_with("local-search value="));
}

#[test]
fn dist_check_passes_and_sums_to_one() {
    let k3 = graph("k3");
    for kind in ["base", "committed", "triple"] {
        let o = zk3col(&["dist-check", "--graph", &k3, "--kind", kind, "--samples", "50000", "--seed", "1", "--quiet"]);
        assert_eq!(o.status.code(), Some(0), "{kind}");
        let out = stdout(&o);
        assert!(out.contains("total 1\n"));
        assert!(out.trim_end().ends_with("PASS"));
    }
}

#[test]
fn timing_table_has_header_and_rows() {
    let o = zk3col(&["--format", "tsv", "timing", "--n", "500"]);
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows[0][0], "n");
    assert_eq!(rows[1][..3], ["500", "22", "50000000"]);
    let text = stdout(&zk3col(&["timing", "--n", "500"]));
    assert!(text.contains("14.990 km"));
    assert!(text.lines().any(|l| l.starts_with('#')));
}

#[test]
fn usage_errors_exit_two() {
    let k3 = graph("k3");
    for args in [
        vec!["run", "--graph", "/nonexistent.g", "--protocol", "loc2"],
        vec!["run", "--graph", &k3, "--protocol", "nope"],
        vec!["run", "--graph", &k3, "--protocol", "loc2", "--epsilon", "3/2"],
        vec!["bounds", "--edges", "0"],
        vec!["zk-verify", "--graph", &k3, "--triple", "e=(1,2) 1 1"],
        vec!["frobnicate"],
    ] {
        let o = zk3col(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn honest_run_on_uncolorable_graph_is_refused() {
    let o = zk3col(&["run", "--graph", &graph("k4"), "--protocol", "loc2"]);
    assert_eq!(o.status.code(), Some(2));
}

struct Server(std::process::Child, String);

impl Server {
    fn start(delay_ms: &str) -> Server {
        use std::io::BufRead;
        let mut child = Command::new(env!("CARGO_BIN_EXE_zk3col"))
            .args(["serve-prover", "--listen", "127.0.0.1:0", "--graph", &graph("k3"), "--seed", "4"])
            .args(["--delay-ms", delay_ms])
            .stdout(std::process::Stdio::piped())
            .spawn()
            .unwrap();
        let mut line = String::new();
        std::io::BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let addr = line.trim().strip_prefix("listening on ").unwrap().to_string();
        Server(child, addr)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn remote_provers_end_to_end() {
    let servers: Vec<Server> = (0..3).map(|_| Server::start("0")).collect();
    let addrs = servers.iter().map(|s| s.1.as_str()).collect::<Vec<_>>().join(",");
    let k3 = graph("k3");
    let o = zk3col(&["verify-remote", "--provers", &addrs, "--graph", &k3, "--protocol", "qnl3", "--rounds", "20"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "accepted 20/20\ndeadline violations 0\n");

    let slow = Server::start("300");
    let pair = format!("{},{}", servers[0].1, slow.1);
    let o = zk3col(&["verify-remote", "--provers", &pair, "--graph", &k3, "--protocol", "loc2", "--deadline-ms", "50"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("rejected DEADLINE_EXCEEDED 1"));
}
