//! Acceptance gate: every release-blocking property, one pass/fail
//! line each. Run with `cargo test --test acceptance -- --nocapture`
//! to see the lines; the test fails if any criterion fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::{BTreeMap, BTreeSet};
use strongchain::chain::ConsensusKind;
use strongchain::core::{EventKind, MessageId, ProcessId};
use strongchain::harness::report::{analyze, RunReport};
use strongchain::harness::scenario::{bundled, bundled_by_name};
use strongchain::harness::sweep::{seeds, sweep};
use strongchain::harness::{run_scenario, RunOutput};
use strongchain::node::{Miner, MinerConfig};
use strongchain::protocol::{body_digest, Payload};
use strongchain::rounds::{Behavior, Ctx, Destination, Mailbox, RoundEngine};
use strongchain::tcrypto::{self, BackendKind, DecryptionShare, ShareValue};

fn report_for(name: &str) -> RunReport {
    let sc = bundled_by_name(name).unwrap_or_else(|| panic!("missing bundled scenario {name}"));
    analyze(&run_scenario(&sc).expect("run")).expect("analyze")
}

fn run_for(name: &str) -> RunOutput {
    let sc = bundled_by_name(name).unwrap_or_else(|| panic!("missing bundled scenario {name}"));
    run_scenario(&sc).expect("run")
}

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

/// Every correct miner holds an identical mempool (same transactions,
/// same delivery rounds, same causal pasts) at the end of every round,
/// across 20 seeds; and the plaintext is unobtainable below the 2t+1
/// share threshold.
fn identical_mempools() -> Verdict {
    let sc = bundled_by_name("clean-strong-t1").unwrap();
    let reports = sweep(&sc, &seeds(5000, 20)).map_err(|e| e.to_string())?;
    let bad: Vec<u64> =
        reports.iter().filter(|r| !r.digests_consistent).map(|r| r.seed).collect();
    if !bad.is_empty() {
        return Err(format!("mempool digests diverged for seeds {bad:?}"));
    }
    // below-threshold decryption must fail, so no miner can act early
    let km = tcrypto::generate(BackendKind::Mock, 4, 3, 9).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let c = tcrypto::encrypt(&km.public, b"secret", b"label", &mut rng);
    let two: Vec<DecryptionShare> =
        (1..=2).map(|i| tcrypto::share(km.secret_for(i), i, &c)).collect();
    if tcrypto::combine(&km.verification, &c, 3, &two).is_ok() {
        return Err("combine succeeded with 2 of 3 shares".into());
    }
    Ok("identical mempools at every round end across 20 seeds; < 2t+1 shares decrypt nothing"
        .into())
}

/// No strong-chain run, attacked or not, records transactions against
/// causal order.
fn strong_chain_safety() -> Verdict {
    let mut checked = 0;
    for sc in bundled().iter().filter(|s| s.consensus == ConsensusKind::RoundRobinStrong) {
        let rep = analyze(&run_scenario(sc).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        if !rep.violations.is_empty() {
            return Err(format!("{}: {} causal inversions on chain", sc.name, rep.violations.len()));
        }
        if !rep.strong_blockchain {
            return Err(format!("{}: recorded order inverts delivery order", sc.name));
        }
        checked += 1;
    }
    let sc = bundled_by_name("clean-strong-t1").unwrap();
    for rep in sweep(&sc, &seeds(7000, 10)).map_err(|e| e.to_string())? {
        if !rep.violations.is_empty() || !rep.strong_blockchain {
            return Err(format!("seed {}: causal inversion on chain", rep.seed));
        }
        checked += 1;
    }
    Ok(format!("zero causal inversions across {checked} strong runs (attacked and clean)"))
}

/// Every broadcast by a correct process is causally delivered at every
/// correct miner within (broadcast + observed-BRB-latency + 1) rounds,
/// and within broadcast + 4 rounds.
fn delivery_liveness() -> Verdict {
    let mut checked = 0;
    for name in ["clean-strong-t1", "clean-strong-t2", "clean-strong-dlog-t1"] {
        let rep = report_for(name);
        if rep.liveness.is_empty() {
            return Err(format!("{name}: no deliveries to check"));
        }
        for l in &rep.liveness {
            if !l.within_beta_bound {
                return Err(format!(
                    "{name}: {} delivered at {} > broadcast {} + beta + 1",
                    l.txid, l.deliver_round, l.broadcast_round
                ));
            }
            if l.from_client && !l.within_worst_bound {
                return Err(format!(
                    "{name}: {} delivered at {} > broadcast {} + 4",
                    l.txid, l.deliver_round, l.broadcast_round
                ));
            }
            checked += 1;
        }
    }
    Ok(format!("all {checked} broadcasts delivered within both latency bounds"))
}

/// Each front-running strategy fails on the causal chain and succeeds
/// on the fee-priority baseline, and the detector flags violations
/// exactly on the successful runs.
fn front_running_outcomes() -> Verdict {
    let mut lines = Vec::new();
    for kind in ["displacement", "sandwich", "suppression"] {
        for t in [1, 2] {
            let strong = report_for(&format!("{kind}-strong-t{t}"));
            let baseline = report_for(&format!("{kind}-baseline-t{t}"));
            let s = strong.attack.as_ref().ok_or("strong run missing attack verdict")?;
            let b = baseline.attack.as_ref().ok_or("baseline run missing attack verdict")?;
            if s.success {
                return Err(format!("{kind} t={t} succeeded against the causal chain"));
            }
            if !s.victim_recorded {
                return Err(format!("{kind} t={t}: victim starved on the causal chain"));
            }
            if !b.success {
                return Err(format!("{kind} t={t} failed against the fee-priority baseline"));
            }
            if !strong.violations.is_empty() {
                return Err(format!("{kind} t={t}: violations flagged on the causal chain"));
            }
            if baseline.violations.is_empty() {
                return Err(format!("{kind} t={t}: successful attack left no detectable violation"));
            }
            lines.push(format!("{kind}/t{t}"));
        }
    }
    Ok(format!(
        "all {} attack pairs: blocked on causal chain, succeed on baseline with violations flagged",
        lines.len()
    ))
}

/// One transaction broadcast costs exactly 3n^2 + n point-to-point
/// messages (init n, echo n^2, ready n^2, share n^2), so quadratic
/// growth: 52 at n = 4, 154 at n = 7.
fn message_complexity() -> Verdict {
    let mut totals = BTreeMap::new();
    for (name, n) in [("clean-strong-t1", 4usize), ("clean-strong-t2", 7usize)] {
        let rep = report_for(name);
        let expected = 3 * n * n + n;
        if rep.messages.is_empty() {
            return Err(format!("{name}: no instances measured"));
        }
        for m in &rep.messages {
            if m.envelopes != expected {
                return Err(format!(
                    "{name}: instance {} used {} envelopes, expected {expected}",
                    m.instance, m.envelopes
                ));
            }
        }
        totals.insert(n, expected as f64);
    }
    let ratio = totals[&7] / totals[&4];
    if !(2.9..=3.2).contains(&ratio) {
        return Err(format!("n=7/n=4 cost ratio {ratio:.3} outside [2.9, 3.2]"));
    }
    Ok(format!("every broadcast costs exactly 3n^2+n envelopes (52 @ n=4, 154 @ n=7, ratio {ratio:.2})"))
}

/// A Byzantine sender and a colluding miner can skew when correct
/// miners reliably deliver, but never what: agreement and integrity
/// hold, and the spread stays under twice the fastest delivery.
fn reliable_broadcast_under_attack() -> Verdict {
    const BODY: &[u8] = b"skewed-body";
    let instance = || MessageId::new(ProcessId::client(1), b"skew".to_vec());

    /// sends the INIT to only two of four miners
    struct PartialSender;
    impl Behavior<Payload> for PartialSender {
        fn on_round_start(&mut self, ctx: &mut Ctx<'_>, mail: &mut Mailbox<Payload>) {
            if ctx.round == 0 {
                let inst = MessageId::new(ctx.id, b"skew".to_vec());
                for m in [1, 2] {
                    mail.send(
                        Destination::One(ProcessId::miner(m)),
                        Payload::BrbInit { instance: inst.clone(), body: BODY.to_vec() },
                        Some(inst.clone()),
                    );
                }
            }
        }
    }

    /// colluding miner: selective echoes in round 1, selective ready in
    /// round 2, silence otherwise
    struct Colluder;
    impl Behavior<Payload> for Colluder {
        fn on_round_start(&mut self, ctx: &mut Ctx<'_>, mail: &mut Mailbox<Payload>) {
            let inst = MessageId::new(ProcessId::client(1), b"skew".to_vec());
            let digest = body_digest(BODY);
            match ctx.round {
                1 => {
                    for m in [1, 2] {
                        mail.send(
                            Destination::One(ProcessId::miner(m)),
                            Payload::BrbEcho { instance: inst.clone(), digest, body: BODY.to_vec() },
                            Some(inst.clone()),
                        );
                    }
                }
                2 => {
                    mail.send(
                        Destination::One(ProcessId::miner(1)),
                        Payload::BrbReady { instance: inst.clone(), digest },
                        Some(inst.clone()),
                    );
                }
                _ => {}
            }
        }
    }

    let km = tcrypto::generate(BackendKind::Mock, 4, 3, 3).unwrap();
    let mut eng: RoundEngine<Payload> = RoundEngine::new(3, 1);
    let cfg = MinerConfig { n: 4, t: 1, block_limit: 4, consensus: ConsensusKind::RoundRobinStrong };
    for i in 1..=4u32 {
        let id = ProcessId::miner(i);
        let m = Miner::new(id, cfg.clone(), km.secret_for(i as usize).clone(), km.verification.clone());
        eng.add_process(id, Box::new(m)).unwrap();
    }
    eng.add_process(ProcessId::client(1), Box::new(PartialSender)).unwrap();
    eng.byzantine_hook(ProcessId::miner(4), Box::new(Colluder)).unwrap();
    eng.run(8);

    let mut per_miner: BTreeMap<ProcessId, Vec<u64>> = BTreeMap::new();
    for ev in eng.trace() {
        if let EventKind::BrDeliver { instance: inst } = &ev.kind {
            if *inst == instance() {
                per_miner.entry(ev.process).or_default().push(ev.round);
            }
        }
    }
    let correct: BTreeSet<ProcessId> = (1..=3).map(ProcessId::miner).collect();
    let delivered: BTreeSet<ProcessId> = per_miner.keys().copied().collect();
    if !delivered.is_superset(&correct) {
        return Err(format!("agreement broken: only {delivered:?} delivered"));
    }
    if per_miner.values().any(|rounds| rounds.len() != 1) {
        return Err("integrity broken: a miner delivered the instance twice".into());
    }
    let (gamma, beta) =
        strongchain::brb::measured_latency(eng.trace(), &instance()).ok_or("latency missing")?;
    if beta <= gamma {
        return Err(format!("attack failed to skew deliveries (gamma {gamma}, beta {beta})"));
    }
    if beta >= 2 * gamma {
        return Err(format!("delivery spread beta {beta} >= 2 * gamma {gamma}"));
    }
    // validity: in a clean run every broadcast reliably delivers at all
    // four miners
    let out = run_for("clean-strong-t1");
    let mut per_instance: BTreeMap<MessageId, usize> = BTreeMap::new();
    for ev in &out.trace {
        if let EventKind::BrDeliver { instance } = &ev.kind {
            *per_instance.entry(instance.clone()).or_insert(0) += 1;
        }
    }
    if per_instance.is_empty() || per_instance.values().any(|c| *c != 4) {
        return Err("validity broken: a clean broadcast missed a miner".into());
    }
    Ok(format!(
        "agreement, integrity and validity hold under attack; skewed deliveries (gamma {gamma}, beta {beta}) stay under 2x"
    ))
}

/// Threshold encryption: random round-trips on both backends, any
/// k-subset of shares reconstructs the same plaintext, and forged
/// shares never verify.
fn threshold_encryption() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(0x74637279);
    for backend in [BackendKind::Mock, BackendKind::Dlog] {
        let km = tcrypto::generate(backend, 4, 3, 21).unwrap();
        for i in 0..1000 {
            let len = rng.gen_range(0..64);
            let m: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let label: Vec<u8> = (0..8).map(|_| rng.gen()).collect();
            let c = tcrypto::encrypt(&km.public, &m, &label, &mut rng);
            let shares: Vec<DecryptionShare> =
                (1..=3).map(|h| tcrypto::share(km.secret_for(h), h, &c)).collect();
            let back = tcrypto::combine(&km.verification, &c, 3, &shares)
                .map_err(|e| format!("{backend} round-trip {i}: {e}"))?;
            if back != m {
                return Err(format!("{backend} round-trip {i}: wrong plaintext"));
            }
        }
    }
    // subset independence: all C(n, k) share subsets agree
    for (n, k) in [(4usize, 3usize), (7, 5)] {
        let km = tcrypto::generate(BackendKind::Dlog, n, k, 5).unwrap();
        let c = tcrypto::encrypt(&km.public, b"subset", b"l", &mut rng);
        let all: Vec<DecryptionShare> =
            (1..=n).map(|h| tcrypto::share(km.secret_for(h), h, &c)).collect();
        let mut subsets = 0;
        let mut pick = vec![0usize; k];
        fn visit(
            pick: &mut Vec<usize>,
            depth: usize,
            start: usize,
            n: usize,
            f: &mut impl FnMut(&[usize]),
        ) {
            if depth == pick.len() {
                f(pick);
                return;
            }
            for v in start..n {
                pick[depth] = v;
                visit(pick, depth + 1, v + 1, n, f);
            }
        }
        let mut failure = None;
        visit(&mut pick, 0, 0, n, &mut |subset| {
            subsets += 1;
            let chosen: Vec<DecryptionShare> = subset.iter().map(|&i| all[i].clone()).collect();
            match tcrypto::combine(&km.verification, &c, k, &chosen) {
                Ok(m) if m == b"subset" => {}
                other => failure = Some(format!("subset {subset:?}: {other:?}")),
            }
        });
        if let Some(f) = failure {
            return Err(format!("C({n},{k}) disagreement: {f}"));
        }
        let expected = match (n, k) {
            (4, 3) => 4,
            (7, 5) => 21,
            _ => unreachable!(),
        };
        if subsets != expected {
            return Err(format!("enumerated {subsets} subsets, expected {expected}"));
        }
    }
    // forgery resistance: 10^4 corrupted or fabricated shares, none
    // may verify
    let km = tcrypto::generate(BackendKind::Mock, 4, 3, 33).unwrap();
    let kd = tcrypto::generate(BackendKind::Dlog, 4, 3, 34).unwrap();
    let cm = tcrypto::encrypt(&km.public, b"forge-me", b"l", &mut rng);
    let cd = tcrypto::encrypt(&kd.public, b"forge-me", b"l", &mut rng);
    for i in 0..10_000u32 {
        if i % 2 == 0 {
            let mut bytes = [0u8; 32];
            rng.fill(&mut bytes);
            let forged = DecryptionShare {
                holder: 1 + (i as usize % 4),
                value: ShareValue::Mock(bytes),
            };
            if tcrypto::verify(&km.verification, &cm, &forged) {
                return Err(format!("random mock share {i} verified"));
            }
        } else {
            let mut s = tcrypto::share(kd.secret_for(1 + (i as usize % 4)), 1 + (i as usize % 4), &cd);
            if let ShareValue::Dlog(v) = &mut s.value {
                v.sigma += 1u32 + (i % 97);
            }
            if tcrypto::verify(&kd.verification, &cd, &s) {
                return Err(format!("corrupted dlog share {i} verified"));
            }
        }
    }
    Ok("10^3 round-trips per backend, all C(4,3) and C(7,5) subsets agree, 10^4 forgeries rejected"
        .into())
}

/// Fairness on the causal chain: dependencies are never recorded after
/// their dependents, and nothing starves in the mempool beyond the
/// rotation bound.
fn fairness() -> Verdict {
    let mut max_seen = 0;
    for name in ["clean-strong-t1", "clean-strong-t2"] {
        let rep = report_for(name);
        if !rep.strong_blockchain {
            return Err(format!("{name}: a causal dependency was recorded after its dependent"));
        }
        if rep.pending_txs != 0 {
            return Err(format!("{name}: {} transactions never recorded", rep.pending_txs));
        }
        if !rep.fairness_ok {
            return Err(format!(
                "{name}: max mempool age {} slots exceeds bound {}",
                rep.max_age_slots, rep.fairness_bound_slots
            ));
        }
        max_seen = max_seen.max(rep.max_age_slots);
    }
    let sc = bundled_by_name("clean-strong-t1").unwrap();
    for rep in sweep(&sc, &seeds(9000, 10)).map_err(|e| e.to_string())? {
        if !rep.fairness_ok || !rep.strong_blockchain {
            return Err(format!("seed {}: fairness bound violated", rep.seed));
        }
    }
    Ok(format!("causal order respected and max mempool age {max_seen} slots stays within n*ceil(|MP|/limit)+n"))
}

#[test]
fn acceptance_criteria() {
    let criteria: Vec<Criterion> = vec![
        ("identical mempools everywhere", identical_mempools),
        ("strong chain records causal order", strong_chain_safety),
        ("bounded delivery liveness", delivery_liveness),
        ("front-running blocked vs baseline", front_running_outcomes),
        ("3n^2+n message complexity", message_complexity),
        ("reliable broadcast under attack", reliable_broadcast_under_attack),
        ("threshold encryption guarantees", threshold_encryption),
        ("fairness of recording", fairness),
    ];
    let mut failures = Vec::new();
    for (idx, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} ({name}): PASS — {detail}", idx + 1),
            Err(reason) => {
                println!("criterion {} ({name}): FAIL — {reason}", idx + 1);
                failures.push(format!("{name}: {reason}"));
            }
        }
    }
    assert!(failures.is_empty(), "failed acceptance criteria:\n{}", failures.join("\n"));
}
