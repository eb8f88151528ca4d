use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;

use proptest::prelude::*;
use zk3col_core::engine::run_round;
use zk3col_core::graph::fixtures::{k3, petersen};
use zk3col_core::netrunner::{round_secret, Coordinator, ProverServer, ServerHandle, ServerOptions, WireMessage};
use zk3col_core::{
    Edge, Epsilon, HonestProver, NetError, NonzeroTrit, Protocol, Prover, Query, Question, Trit, Verdict, VerdictReason,
};

const PROVER_SEED: u64 = 99;

fn server(g: &zk3col_core::Graph, delay: Duration) -> ServerHandle {
    ProverServer::bind("127.0.0.1:0", g.clone(), PROVER_SEED, ServerOptions { delay }).unwrap().spawn().unwrap()
}

fn generous() -> Duration {
    Duration::from_secs(5)
}

#[test]
fn network_rounds_match_in_process_rounds() {
    let g = k3();
    let mut servers: Vec<ServerHandle> = (0..3).map(|_| server(&g, Duration::ZERO)).collect();
    let addrs: Vec<_> = servers.iter().map(|s| s.addr).collect();
    let mut coord = Coordinator::connect(&addrs, g.clone(), Protocol::Qnl3).unwrap();
    let eps = Epsilon::default();
    let mut questions_by_slot = vec![Vec::new(); 3];
    for k in 0..100u64 {
        let seed = 1000 + k;
        let (remote, timing) = coord.coordinate_round(eps, seed, generous()).unwrap();
        let secret = round_secret(&g, PROVER_SEED, k).unwrap();
        let p = HonestProver::new(&g, &secret);
        let local = run_round(&g, Protocol::Qnl3, eps, seed, &[&p, &p, &p]).unwrap();
        assert_eq!(remote.to_string(), local.to_string());
        assert!(remote.verdict.accepted);
        assert!(timing.violations().is_empty());
        assert!(timing.provers.iter().all(|t| t.received.unwrap() >= t.sent));
        for (slot, q) in remote.questions.iter().enumerate() {
            questions_by_slot[slot].push(WireMessage::Q(*q).encode());
        }
    }
    drop(coord);
    // Each session saw exactly its own questions and nothing else.
    std::thread::sleep(Duration::from_millis(200));
    for (slot, s) in servers.iter_mut().enumerate() {
        let logs = s.session_logs();
        let log = logs.iter().find(|l| !l.received.is_empty()).expect("one session");
        let qs: Vec<String> = log.received.iter().filter(|l| l.starts_with("Q ")).cloned().collect();
        assert_eq!(qs, questions_by_slot[slot]);
        assert!(log.received[0].starts_with("HELLO qnl3"));
        assert!(log.received[0].ends_with(&format!(" {}", slot + 1)));
        s.shutdown();
    }
}

#[test]
fn slow_prover_breaks_the_deadline() {
    let g = k3();
    let servers = [server(&g, Duration::ZERO), server(&g, Duration::from_millis(300))];
    let addrs: Vec<_> = servers.iter().map(|s| s.addr).collect();
    let mut coord = Coordinator::connect(&addrs, g.clone(), Protocol::Loc2).unwrap();
    let (tr, timing) = coord.coordinate_round(Epsilon::default(), 1, Duration::from_millis(50)).unwrap();
    assert_eq!(tr.verdict, Verdict::reject(VerdictReason::DeadlineExceeded));
    assert_eq!(timing.violations(), vec![2]);
    assert!(timing.provers[1].received.is_none());
    // The session recovers once the late reply is drained.
    let (tr, timing) = coord.coordinate_round(Epsilon::default(), 2, generous()).unwrap();
    assert!(tr.verdict.accepted);
    assert!(timing.violations().is_empty());
    assert!(timing.provers[1].latency().unwrap() >= Duration::from_millis(300));
}

#[test]
fn digest_mismatch_is_reported() {
    let s = server(&petersen(), Duration::ZERO);
    let err = Coordinator::connect(&[s.addr, s.addr], k3(), Protocol::Loc2).err().unwrap();
    assert!(matches!(err, NetError::Remote { slot: 1, .. }), "{err}");
}

#[test]
fn arity_is_checked_before_connecting() {
    let s = server(&k3(), Duration::ZERO);
    assert!(Coordinator::connect(&[s.addr], k3(), Protocol::Qnl3).is_err());
}

#[test]
fn raw_session() {
    let g = k3();
    let s = server(&g, Duration::ZERO);
    let stream = TcpStream::connect(s.addr).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut writer = stream;
    let mut exchange = |line: &str| {
        writeln!(writer, "{line}").unwrap();
        let mut reply = String::new();
        reader.read_line(&mut reply).unwrap();
        reply.trim_end().to_string()
    };
    let hello = format!("HELLO loc2 {:016x} 1", g.digest());
    assert_eq!(exchange(&hello), hello);
    let secret = round_secret(&g, PROVER_SEED, 0).unwrap();
    let q = Question::new(Edge::new(1, 2).unwrap(), NonzeroTrit::ONE, NonzeroTrit::TWO);
    let expected = HonestProver::new(&g, &secret).answer(&Query::Committed(q));
    assert_eq!(exchange("Q 1 2 1 2"), WireMessage::from_answer(expected).encode());
    assert_eq!(exchange("Q 1 4 1 1"), "A-REFUSE");
    assert!(exchange("Q 1 2").starts_with("ERR "));
}

#[test]
fn bad_hello_closes_the_session() {
    let s = server(&k3(), Duration::ZERO);
    let stream = TcpStream::connect(s.addr).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut writer = stream;
    writeln!(writer, "HELLO loc2 0000000000000000 1").unwrap();
    let mut reply = String::new();
    reader.read_line(&mut reply).unwrap();
    assert!(reply.starts_with("ERR digest mismatch"));
    reply.clear();
    assert_eq!(reader.read_line(&mut reply).unwrap(), 0);
}

fn arb_message() -> impl Strategy<Value = WireMessage> {
    let trit = (0u8..3).prop_map(Trit::new);
    let nonzero = prop_oneof![Just(NonzeroTrit::ONE), Just(NonzeroTrit::TWO)];
    let edge = (1usize..10_000, 1usize..10_000)
        .prop_filter("loop", |(a, b)| a != b)
        .prop_map(|(a, b)| Edge::new(a, b).unwrap());
    let reason = prop_oneof![
        Just(VerdictReason::AllPassed),
        Just(VerdictReason::EdgeVerificationFailed),
        Just(VerdictReason::WellDefinitionFailed),
        Just(VerdictReason::ConsistencyFailed),
        Just(VerdictReason::ProverRefused),
        Just(VerdictReason::DeadlineExceeded),
    ];
    prop_oneof![
        (0usize..3, any::<u64>(), 1usize..4).prop_map(|(p, digest, role)| WireMessage::Hello {
            protocol: Protocol::ALL[p],
            digest,
            role
        }),
        edge.clone().prop_map(|e| WireMessage::Q(Query::Plain(e))),
        (edge, nonzero.clone(), nonzero).prop_map(|(e, r, s)| WireMessage::Q(Query::Committed(Question::new(e, r, s)))),
        (trit.clone(), trit).prop_map(|(a, b)| WireMessage::A(a, b)),
        Just(WireMessage::ARefuse),
        reason.prop_map(|r| WireMessage::Verdict(if r == VerdictReason::AllPassed {
            Verdict::ACCEPT
        } else {
            Verdict::reject(r)
        })),
        "[ -~]{0,40}".prop_map(WireMessage::Error),
    ]
}

proptest! {
    #[test]
    fn frames_round_trip(msg in arb_message()) {
        let line = msg.encode();
        prop_assert!(!line.contains('\n'));
        prop_assert_eq!(WireMessage::decode(&line).unwrap(), msg);
    }
}
