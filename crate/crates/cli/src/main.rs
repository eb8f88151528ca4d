use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use zk3col_core::adversary::{
    classical_bound, exact_value_std2, local_search_value, quantum_bound, Game, GameValueReport, EXACT_STD2_EDGE_LIMIT,
};
use zk3col_core::dist::{
    chi_square, chi_square_critical, pmf_base, pmf_committed, pmf_triple, sample_base, sample_committed, sample_triple,
    Pmf, Token,
};
use zk3col_core::engine::run_round;
use zk3col_core::netrunner::{round_secret, Coordinator, ProverServer, ServerOptions};
use zk3col_core::timing::{format_distance, meters_f64, timing_table, TABLE_RATES};
use zk3col_core::zk::{exact_sim_dist, exact_view_dist, leakage, verify_all_triples};
use zk3col_core::{
    seeded_rng, Epsilon, Graph, HonestProver, Protocol, Prover, Question, Transcript, Trit, VerdictReason,
};

/// Write to stdout; a closed pipe ends the process quietly.
fn emit(args: std::fmt::Arguments, newline: bool) {
    let mut out = std::io::stdout().lock();
    let res = out.write_fmt(args).and_then(|_| if newline { out.write_all(b"\n") } else { Ok(()) });
    if let Err(e) = res {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        panic!("writing to stdout: {e}");
    }
}

macro_rules! out {
    () => { emit(format_args!(""), true) };
    ($($t:tt)*) => { emit(format_args!($($t)*), true) };
}

macro_rules! outn {
    ($($t:tt)*) => { emit(format_args!($($t)*), false) };
}

#[derive(Parser)]
#[command(name = "zk3col", version, about = "Multi-prover proofs for graph 3-colorability")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Tsv,
}

#[derive(Subcommand)]
enum Command {
    /// Play rounds in-process and report how many were accepted.
    Run(RunArgs),
    /// Compute the classical value of a protocol's game on a graph.
    Value(ValueArgs),
    /// Compare real and simulated views for every question triple.
    ZkVerify(ZkArgs),
    /// Print an exact question distribution, optionally testing the sampler.
    DistCheck(DistArgs),
    /// Print the classical and quantum soundness bounds for `m` edges.
    Bounds(BoundsArgs),
    /// Print message sizes and minimum verifier separations.
    Timing(TimingArgs),
    /// Run an honest prover that answers coordinator sessions over TCP.
    ServeProver(ServeArgs),
    /// Play rounds against remote provers with a reply deadline.
    VerifyRemote(RemoteArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    protocol: Protocol,
    #[arg(long, default_value_t = Epsilon::default())]
    epsilon: Epsilon,
    #[arg(long, default_value_t = 1)]
    rounds: u64,
    /// Round `k` draws its questions from seed `seed + k`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed of the provers' shared secrets [default: bitwise complement of --seed].
    #[arg(long)]
    prover_seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = ProverKind::Honest)]
    prover: ProverKind,
    /// Print every transcript.
    #[arg(long)]
    transcripts: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProverKind {
    /// Commit to a fresh proper coloring each round.
    Honest,
    /// Every vertex colored 0 under zero masks.
    ZeroColoring,
}

#[derive(Args)]
struct ValueArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    protocol: Protocol,
    #[arg(long, default_value_t = Epsilon::default())]
    epsilon: Epsilon,
    #[arg(long, value_enum, default_value_t = ValueMethod::Auto)]
    method: ValueMethod,
    /// Random starts for local search.
    #[arg(long, default_value_t = 200)]
    restarts: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads [default: all cores].
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ValueMethod {
    /// Exact for the unmasked protocol on small graphs, local search otherwise.
    Auto,
    Exact,
    LocalSearch,
}

#[derive(Args)]
struct ZkArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Check a single triple `Q1 | Q2 | Q3` and print both distributions.
    #[arg(long)]
    triple: Option<String>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DistKind {
    Base,
    Committed,
    Triple,
}

#[derive(Args)]
struct DistArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, default_value_t = Epsilon::default())]
    epsilon: Epsilon,
    #[arg(long, value_enum, default_value_t = DistKind::Committed)]
    kind: DistKind,
    /// Draw this many samples and run a chi-square test against the pmf.
    #[arg(long, default_value_t = 0)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    /// Skip the pmf listing.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    edges: u64,
}

#[derive(Args)]
struct TimingArgs {
    /// Vertex counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [4u64, 10, 100, 500, 1000, 10_000])]
    n: Vec<u64>,
    #[arg(long, default_value_t = Protocol::Qnl3)]
    protocol: Protocol,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    listen: String,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Sleep before every answer.
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
}

#[derive(Args)]
struct RemoteArgs {
    /// Prover addresses, comma separated, one per prover slot.
    #[arg(long, value_delimiter = ',', required = true)]
    provers: Vec<String>,
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    protocol: Protocol,
    #[arg(long, default_value_t = Epsilon::default())]
    epsilon: Epsilon,
    #[arg(long, default_value_t = 1)]
    rounds: u64,
    #[arg(long, default_value_t = 1000)]
    deadline_ms: u64,
    /// Round `k` draws its questions from seed `seed + k`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    transcripts: bool,
}

enum Failure {
    /// Bad input: exit code 2.
    Usage(String),
    /// The check ran and did not pass: exit code 1.
    Rejected(String),
}

type Outcome = Result<(), Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ZK3COL_LOG", "warn")).init();
    let cli = Cli::parse();
    let format = cli.format;
    let result = match cli.command {
        Command::Run(a) => run(a, format),
        Command::Value(a) => value(a, format),
        Command::ZkVerify(a) => zk_verify(a),
        Command::DistCheck(a) => dist_check(a),
        Command::Bounds(a) => bounds(a),
        Command::Timing(a) => timing(a, format),
        Command::ServeProver(a) => serve(a),
        Command::VerifyRemote(a) => verify_remote(a, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rejected(msg)) => {
            if !msg.is_empty() {
                eprintln!("{msg}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn read_graph(path: &Path) -> Result<Graph, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("--graph {}: {e}", path.display())))?;
    Graph::parse(&text).map_err(|e| usage(format!("--graph {}: {e}", path.display())))
}

fn set_jobs(jobs: Option<usize>) -> Outcome {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(usage("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(usage)?;
    }
    Ok(())
}

fn transcript_line(t: &Transcript, format: Format) -> String {
    match format {
        Format::Text => t.to_string(),
        Format::Tsv => t.to_tsv(),
    }
}

/// Accept count and per-reason rejection counts.
#[derive(Default)]
struct Tally {
    accepted: u64,
    total: u64,
    reasons: BTreeMap<&'static str, u64>,
}

impl Tally {
    fn add(&mut self, t: &Transcript) {
        self.total += 1;
        if t.verdict.accepted {
            self.accepted += 1;
        } else {
            *self.reasons.entry(t.verdict.reason.token()).or_default() += 1;
        }
    }

    fn print(&self, format: Format) {
        match format {
            Format::Text => {
                out!("accepted {}/{}", self.accepted, self.total);
                for (reason, n) in &self.reasons {
                    out!("rejected {reason} {n}");
                }
            }
            Format::Tsv => {
                out!("accepted\t{}\t{}", self.accepted, self.total);
                for (reason, n) in &self.reasons {
                    out!("rejected\t{reason}\t{n}");
                }
            }
        }
    }

    fn outcome(&self) -> Outcome {
        if self.accepted == self.total {
            Ok(())
        } else {
            Err(Failure::Rejected(String::new()))
        }
    }
}

struct ZeroColoring;

impl Prover for ZeroColoring {
    fn answer(&self, _: &zk3col_core::Query) -> zk3col_core::Answer {
        zk3col_core::Answer::Committed(Trit::ZERO, Trit::ZERO)
    }
}

fn run(a: RunArgs, format: Format) -> Outcome {
    let g = read_graph(&a.graph)?;
    let prover_seed = a.prover_seed.unwrap_or(!a.seed);
    if a.prover == ProverKind::Honest && g.base_coloring().is_none() {
        return Err(usage("graph has no proper 3-coloring; honest provers do not exist"));
    }
    let mut tally = Tally::default();
    for k in 0..a.rounds {
        let transcript = match a.prover {
            ProverKind::Honest => {
                let secret = round_secret(&g, prover_seed, k).map_err(usage)?;
                let p = HonestProver::new(&g, &secret);
                run_round(
                    &g,
                    a.protocol,
                    a.epsilon,
                    a.seed.wrapping_add(k),
                    &vec![&p as &dyn Prover; a.protocol.arity()],
                )
            }
            ProverKind::ZeroColoring => run_round(
                &g,
                a.protocol,
                a.epsilon,
                a.seed.wrapping_add(k),
                &vec![&ZeroColoring as &dyn Prover; a.protocol.arity()],
            ),
        }
        .map_err(usage)?;
        if a.transcripts {
            out!("{}", transcript_line(&transcript, format));
        }
        tally.add(&transcript);
    }
    tally.print(format);
    tally.outcome()
}

fn print_report(report: &GameValueReport, format: Format) {
    match format {
        Format::Text => outn!("{report}"),
        Format::Tsv => {
            out!("{}\t{}\t{}\t{}", report.method, report.value, report.restarts, report.iterations);
            for (slot, w) in report.witnesses.iter().enumerate() {
                for line in w.to_token_lines(slot + 1) {
                    out!("{}", line.replace(" | ", "\t"));
                }
            }
        }
    }
}

fn value(a: ValueArgs, format: Format) -> Outcome {
    set_jobs(a.jobs)?;
    let g = read_graph(&a.graph)?;
    let exact = match a.method {
        ValueMethod::Exact => true,
        ValueMethod::LocalSearch => false,
        ValueMethod::Auto => a.protocol == Protocol::Std2 && g.edge_count() <= EXACT_STD2_EDGE_LIMIT,
    };
    let report = if exact {
        if a.protocol != Protocol::Std2 {
            return Err(usage("--method exact is only available for --protocol std2"));
        }
        exact_value_std2(&g, a.epsilon).map_err(usage)?
    } else {
        let game = Game::new(&g, a.protocol, a.epsilon).map_err(usage)?;
        info!("game with {} outcomes", game.support_size());
        local_search_value(&game, a.restarts, a.seed).map_err(usage)?
    };
    print_report(&report, format);
    if format == Format::Text && a.protocol.is_committed() {
        out!("classical bound {}", classical_bound(g.edge_count() as u64));
    }
    Ok(())
}

fn parse_triple(text: &str) -> Result<[Question; 3], Failure> {
    let parts: Vec<&str> = text.split('|').map(str::trim).collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(usage("--triple expects three questions separated by `|`"));
    };
    let q = |s: &str| s.parse::<Question>().map_err(|e| usage(format!("--triple: {e}")));
    Ok([q(a)?, q(b)?, q(c)?])
}

fn zk_verify(a: ZkArgs) -> Outcome {
    set_jobs(a.jobs)?;
    let g = read_graph(&a.graph)?;
    if let Some(text) = a.triple {
        let triple = parse_triple(&text)?;
        let real = exact_view_dist(&g, &triple).map_err(usage)?;
        let sim = exact_sim_dist(&g, &triple).map_err(usage)?;
        out!("{}", leakage(&g, &triple));
        out!("# real");
        outn!("{}", real.dump());
        out!("# simulated");
        outn!("{}", sim.dump());
        return if real == sim {
            out!("EQUAL");
            Ok(())
        } else {
            out!("DIFFERENT");
            Err(Failure::Rejected(String::new()))
        };
    }
    let report = verify_all_triples(&g).map_err(usage)?;
    if report.perfect() {
        out!("PERFECT-ZK: all question triples equal");
        out!("triples checked: {}", report.triples_checked);
        Ok(())
    } else {
        out!("ZK-VIOLATION: {} of {} triples differ", report.mismatch_count, report.triples_checked);
        for t in &report.mismatches {
            out!("{}", t.token());
        }
        Err(Failure::Rejected(String::new()))
    }
}

fn check_pmf<T, F>(pmf: &Pmf<T>, a: &DistArgs, mut draw: F) -> Outcome
where
    T: Ord + Clone + Token,
    F: FnMut(&mut zk3col_core::SeededRng) -> T,
{
    if !a.quiet {
        outn!("{}", pmf.dump());
    }
    let total = pmf.total();
    out!("total {total}");
    out!("support {}", pmf.len());
    if a.samples == 0 {
        return Ok(());
    }
    let mut rng = seeded_rng(a.seed);
    let mut counts = BTreeMap::new();
    for _ in 0..a.samples {
        *counts.entry(draw(&mut rng)).or_insert(0u64) += 1;
    }
    let (stat, dof) = chi_square(pmf, &counts);
    let critical = chi_square_critical(dof, a.alpha);
    let pass = stat < critical;
    out!("chi2 {stat:.3} dof {dof} critical {critical:.3} alpha {} {}", a.alpha, if pass { "PASS" } else { "FAIL" });
    if pass {
        Ok(())
    } else {
        Err(Failure::Rejected(String::new()))
    }
}

fn dist_check(a: DistArgs) -> Outcome {
    let g = read_graph(&a.graph)?;
    let eps = a.epsilon;
    match a.kind {
        DistKind::Base => check_pmf(&pmf_base(&g, eps).map_err(usage)?, &a, |r| sample_base(&g, eps, r)),
        DistKind::Committed => check_pmf(&pmf_committed(&g, eps).map_err(usage)?, &a, |r| sample_committed(&g, eps, r)),
        DistKind::Triple => check_pmf(&pmf_triple(&g, eps).map_err(usage)?, &a, |r| sample_triple(&g, eps, r)),
    }
}

fn superscript(n: u64) -> String {
    const DIGITS: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    n.to_string().bytes().map(|b| DIGITS[(b - b'0') as usize]).collect()
}

fn bounds(a: BoundsArgs) -> Outcome {
    let m = a.edges;
    let q = quantum_bound(m);
    out!("classical ≤ {}, quantum ≤ 1 − 1/{}{}", classical_bound(m), 25 * m, superscript(4));
    out!("questions per prover {}", q.questions_per_prover);
    out!("sqrt(delta) ≥ {} ≥ {}", q.sqrt_delta, q.sqrt_delta_floor);
    out!("quantum value ≤ {} ≤ {}", q.implied_value(), q.bound);
    if q.chain_holds() {
        Ok(())
    } else {
        Err(Failure::Rejected("bound chain does not hold".into()))
    }
}

fn rate_label(rate: u64) -> String {
    match rate {
        1_000_000_000 => "1Gb/s".into(),
        1_000_000_000_000 => "1Tb/s".into(),
        r => format!("{r}b/s"),
    }
}

fn timing(a: TimingArgs, format: Format) -> Outcome {
    if a.n.iter().any(|&n| n < 2) {
        return Err(usage("--n values must be at least 2"));
    }
    let rows = timing_table(a.protocol, &a.n);
    let mut header = vec!["n".to_string(), "ours_bits".into(), "cl17_bits".into()];
    for rate in TABLE_RATES {
        header.push(format!("ours@{}", rate_label(rate)));
        header.push(format!("cl17@{}", rate_label(rate)));
    }
    let mut out = String::new();
    if format == Format::Text {
        writeln!(out, "# separation = c * bits / rate with c = 2.998e8 m/s").unwrap();
        writeln!(out, "# ours_bits = larger one-way flow of {} (the question; replies are 4 bits)", a.protocol)
            .unwrap();
        writeln!(out, "# propagation time of the reply itself is excluded").unwrap();
        writeln!(out, "# published estimate for the earlier scheme at n=500: at least 100 km").unwrap();
    }
    writeln!(out, "{}", header.join("\t")).unwrap();
    for row in rows {
        let mut cells = vec![row.n.to_string(), row.ours.larger_flow().to_string(), row.cl17.to_string()];
        for (ours, theirs) in &row.separations {
            match format {
                Format::Text => {
                    cells.push(format_distance(ours));
                    cells.push(format_distance(theirs));
                }
                Format::Tsv => {
                    cells.push(format!("{}", meters_f64(ours)));
                    cells.push(format!("{}", meters_f64(theirs)));
                }
            }
        }
        writeln!(out, "{}", cells.join("\t")).unwrap();
    }
    outn!("{out}");
    Ok(())
}

fn serve(a: ServeArgs) -> Outcome {
    let g = read_graph(&a.graph)?;
    let options = ServerOptions { delay: Duration::from_millis(a.delay_ms) };
    let server = ProverServer::bind(a.listen.as_str(), g, a.seed, options).map_err(usage)?;
    let addr = server.local_addr().map_err(usage)?;
    out!("listening on {addr}");
    std::io::stdout().flush().map_err(usage)?;
    server.run().map_err(|e| Failure::Rejected(e.to_string()))
}

fn verify_remote(a: RemoteArgs, format: Format) -> Outcome {
    let g = read_graph(&a.graph)?;
    let mut coord = Coordinator::connect(&a.provers, g, a.protocol).map_err(|e| match e {
        zk3col_core::NetError::Protocol(p) => usage(p),
        other => Failure::Rejected(format!("connect: {other}")),
    })?;
    let deadline = Duration::from_millis(a.deadline_ms);
    let mut tally = Tally::default();
    let mut violations = 0u64;
    for k in 0..a.rounds {
        let (transcript, timing) = coord
            .coordinate_round(a.epsilon, a.seed.wrapping_add(k), deadline)
            .map_err(|e| Failure::Rejected(format!("round {k}: {e}")))?;
        if transcript.verdict.reason == VerdictReason::DeadlineExceeded {
            violations += 1;
        }
        if a.transcripts {
            let latencies: Vec<String> = timing
                .provers
                .iter()
                .map(|t| t.latency().map_or("-".to_string(), |l| format!("{}us", l.as_micros())))
                .collect();
            match format {
                Format::Text => out!("{} | latency {}", transcript, latencies.join(" ")),
                Format::Tsv => out!("{}\t{}", transcript.to_tsv(), latencies.join("\t")),
            }
        }
        tally.add(&transcript);
    }
    tally.print(format);
    match format {
        Format::Text => out!("deadline violations {violations}"),
        Format::Tsv => out!("deadline_violations\t{violations}"),
    }
    tally.outcome()
}
