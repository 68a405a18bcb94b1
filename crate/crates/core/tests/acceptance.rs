//! Acceptance suite. Runs as a plain binary (`harness = false`) and prints one
//! line per criterion, then exits non-zero if any failed.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use ssagg::aggregator::SourceStatus;
use ssagg::canonical;
use ssagg::crypto::{hash, AsymmetricKeyPair, CryptoProvider, DecryptionKey, DeterministicProvider, KeyId, SystemProvider};
use ssagg::identity::{issue_vc, verify_ownership, Did, DidDocument, Identity, IdentityError, Registry, VerifiableCredential};
use ssagg::ledger::{Ledger, LedgerConfig, PropValue, Threshold, Transaction, TxDraft, TxKind};
use ssagg::netsim::{run_scenario, ScenarioConfig, ScenarioResult, TraceEvent};
use ssagg::storage::{
    parse_locations, partition, BackendKind, DecentralizedStorage, LocationEntry, LocationPool, LocationTable, PolicyKind, StorageBackend,
    StoredRef,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- threshold

fn threshold_law() -> Outcome {
    let mut cases = 0;
    for n in 2..=12usize {
        for (num, den) in [(1u64, 2u64), (2, 3)] {
            let delta = Threshold::new(num, den).map_err(|e| e.to_string())?;
            for accepted in 0..=n {
                let ledger = Ledger::new(LedgerConfig::with_acceptors(n, delta, accepted)).map_err(|e| e.to_string())?;
                let draft = TxDraft::new(TxKind::Collection, ssagg::crypto::WalletAddress::of(SystemProvider.gen_keypair(Some(1)).public()))
                    .with("srcIds", PropValue::List(vec!["did:agg:x".into()]))
                    .with("consumer", PropValue::text("did:agg:y"))
                    .with("run", PropValue::text("run-1"));
                let res = ledger.submit(draft).map_err(|e| e.to_string())?;
                // accepted > δ·n  ⇔  accepted·den > num·n
                let expected = accepted as u64 * den > num * n as u64;
                ensure(res.accepted_nodes == accepted, || format!("n={n}: {} votes, wanted {accepted}", res.accepted_nodes))?;
                ensure(res.finalized == expected, || format!("n={n} δ={num}/{den} accepted={accepted}: finalized={}", res.finalized))?;
                ensure(ledger.len() == usize::from(expected), || "finalized set disagrees with the result".into())?;
                ensure(res.timestamp.is_some() == expected, || "timestamp present iff finalized".into())?;
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} cases"))
}

// ---------------------------------------------------------------- ownership

fn flip_hex_char(s: &str, rng: &mut ChaCha8Rng, skip: usize) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let i = rng.gen_range(skip..chars.len());
    let old = chars[i];
    let hexdigits: Vec<char> = "0123456789abcdef".chars().filter(|c| *c != old).collect();
    chars[i] = *hexdigits.choose(rng).expect("non-empty");
    chars.into_iter().collect()
}

fn flip_hex_byte(s: &str, rng: &mut ChaCha8Rng) -> String {
    let mut bytes = hex::decode(s).expect("hex field");
    let i = rng.gen_range(0..bytes.len());
    bytes[i] ^= 1 << rng.gen_range(0..8);
    hex::encode(bytes)
}

fn rebuild(v: &Value) -> Option<VerifiableCredential> {
    serde_json::from_value(v.clone()).ok()
}

fn ownership_mutations() -> Outcome {
    let ledger = Arc::new(Ledger::new(LedgerConfig::default()).map_err(|e| e.to_string())?);
    let registry = Registry::new(ledger);
    let issuers: Vec<Identity> = (0..8)
        .map(|i| {
            let id = Identity::generate(&SystemProvider, Some(70_000 + i));
            registry.propagate(&id.document(), &id.keyring.auth).expect("propagates");
            id
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut honest = Vec::with_capacity(1000);
    for i in 0..1000u64 {
        let subject = Identity::generate(&SystemProvider, Some(80_000 + i)).did;
        let len = rng.gen_range(1..512);
        let data: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let issuer = &issuers[rng.gen_range(0..issuers.len())];
        let vc = issue_vc(&registry, issuer, &subject, hash(&data).as_bytes().to_vec()).map_err(|e| e.to_string())?;
        honest.push((vc, subject, data));
    }

    let (mut false_rejects, mut false_accepts, mut mutants) = (0, 0, 0);
    let mut accepted_fields = HashSet::new();
    for (vc, subject, data) in &honest {
        if !verify_ownership(vc, subject, data).holds() {
            false_rejects += 1;
        }
        let start = rng.gen_range(0..honest.len());
        let others = (0..honest.len()).map(|k| &honest[(start + k) % honest.len()]);
        let base = serde_json::to_value(vc).map_err(|e| e.to_string())?;

        let mut variants: Vec<(&str, VerifiableCredential, Vec<u8>)> = Vec::new();
        let edit = |path: [&str; 2], f: &dyn Fn(&Value, &mut ChaCha8Rng) -> Value, rng: &mut ChaCha8Rng| {
            let mut v = base.clone();
            let slot = &mut v[path[0]][path[1]];
            *slot = f(slot, rng);
            rebuild(&v)
        };
        let fields = [["credentialSubject", "id"], ["credentialSubject", "claim"], ["proof", "key"], ["proof", "value"]];
        for path in fields {
            // whole field swapped for a different value taken from another
            // credential; credentials of the same issuer share proof.key
            let replacement = others
                .clone()
                .map(|o| serde_json::to_value(&o.0).expect("serializes")[path[0]][path[1]].clone())
                .find(|v| *v != base[path[0]][path[1]])
                .ok_or("no differing value")?;
            if let Some(m) = edit(path, &|_, _| replacement.clone(), &mut rng) {
                variants.push((path[1], m, data.clone()));
            } else {
                mutants += 1;
            }
            // one byte changed
            let flip: &dyn Fn(&Value, &mut ChaCha8Rng) -> Value = match path[1] {
                "id" => &|v, r| Value::String(flip_hex_char(v.as_str().unwrap(), r, "did:agg:0x".len())),
                "key" => &|v, r| Value::String(flip_hex_char(v.as_str().unwrap(), r, "key:".len())),
                _ => &|v, r| Value::String(flip_hex_byte(v.as_str().unwrap(), r)),
            };
            if let Some(m) = edit(path, flip, &mut rng) {
                variants.push((path[1], m, data.clone()));
            } else {
                mutants += 1;
            }
        }
        let mut d = data.clone();
        let k = rng.gen_range(0..d.len());
        d[k] ^= 1 << rng.gen_range(0..8);
        variants.push(("data", vc.clone(), d));
        let other_data = others.map(|o| &o.2).find(|d| *d != data).ok_or("no differing data")?;
        variants.push(("data", vc.clone(), other_data.clone()));

        for (what, m, d) in variants {
            mutants += 1;
            if verify_ownership(&m, subject, &d).holds() {
                false_accepts += 1;
                accepted_fields.insert(what);
            }
        }
    }
    ensure(false_rejects == 0 && false_accepts == 0, || {
        format!("{false_rejects} false rejects, {false_accepts} false accepts in {accepted_fields:?}")
    })?;
    Ok(format!("1000 credentials, {mutants} mutants, 0 false accepts, 0 false rejects"))
}

// ---------------------------------------------------------------- registry

/// Resolution by folding the finalized log by hand: the registry transaction
/// with the greatest timestamp for `did` decides.
fn fold_resolve(log: &[Transaction], did: &Did) -> Option<DidDocument> {
    let mut latest: Option<&Transaction> = None;
    for tx in log {
        let registry_kind = matches!(tx.kind, TxKind::Propagation | TxKind::Update | TxKind::Deletion);
        if registry_kind && tx.text("did") == Some(did.as_str()) && latest.is_none_or(|l| tx.timestamp > l.timestamp) {
            latest = Some(tx);
        }
    }
    let tx = latest?;
    if tx.kind == TxKind::Deletion {
        return None;
    }
    let key = |n| tx.text(n).and_then(|s| s.parse::<KeyId>().ok());
    Some(DidDocument { id: did.clone(), auth: key("auth")?, assert: key("assert")? })
}

fn registry_lifecycle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let keys: Vec<AsymmetricKeyPair> = (0..48).map(|i| SystemProvider.gen_keypair(Some(90_000 + i))).collect();
    let (mut ops, mut accepted, mut rejected_by_ledger) = (0usize, 0usize, 0usize);
    for seq in 0..500u64 {
        let byzantine = seq % 5 == 0;
        let mut config = LedgerConfig::honest(4, Threshold::TWO_THIRDS);
        if byzantine {
            config = config.with_byzantine(2, seq);
        }
        let ledger = Arc::new(Ledger::new(config).map_err(|e| e.to_string())?);
        let registry = Registry::new(ledger.clone());
        let n_dids = rng.gen_range(1..=8);
        // each DID has its own pool of six keys; key 0 names the DID
        let pools: Vec<&[AsymmetricKeyPair]> = (0..n_dids).map(|i| &keys[i * 6..i * 6 + 6]).collect();
        let dids: Vec<Did> = pools.iter().map(|p| Did::for_key(p[0].public())).collect();
        let mut model: HashMap<Did, DidDocument> = HashMap::new();

        for _ in 0..rng.gen_range(1..=40) {
            let i = rng.gen_range(0..n_dids);
            let (did, pool) = (&dids[i], pools[i]);
            let current = model.get(did).cloned();
            let pick = |rng: &mut ChaCha8Rng| &pool[rng.gen_range(0..pool.len())];
            let (result, valid, next) = match rng.gen_range(0..3) {
                0 => {
                    let (auth, assert) = (pick(&mut rng), pick(&mut rng));
                    let submitter = if rng.gen_bool(0.8) { auth } else { pick(&mut rng) };
                    let doc = DidDocument { id: did.clone(), auth: auth.id().clone(), assert: assert.id().clone() };
                    let valid = current.is_none() && submitter.id() == auth.id() && auth.id() != assert.id();
                    (registry.propagate(&doc, submitter), valid, Some(doc))
                }
                1 => {
                    let new_auth = rng.gen_bool(0.5).then(|| pick(&mut rng).id().clone());
                    let new_assert = rng.gen_bool(0.5).then(|| pick(&mut rng).id().clone());
                    let controller = match (&current, rng.gen_bool(0.7)) {
                        (Some(doc), true) => pool.iter().find(|k| k.id() == &doc.auth).unwrap_or(&pool[0]),
                        _ => pick(&mut rng),
                    };
                    let next = current.as_ref().map(|doc| DidDocument {
                        id: did.clone(),
                        auth: new_auth.clone().unwrap_or_else(|| doc.auth.clone()),
                        assert: new_assert.clone().unwrap_or_else(|| doc.assert.clone()),
                    });
                    let valid = current.as_ref().is_some_and(|doc| &doc.auth == controller.id())
                        && next.as_ref().is_some_and(|n| n.auth != n.assert);
                    (registry.update(did, new_auth, new_assert, controller), valid, next)
                }
                _ => {
                    let controller = match (&current, rng.gen_bool(0.7)) {
                        (Some(doc), true) => pool.iter().find(|k| k.id() == &doc.auth).unwrap_or(&pool[0]),
                        _ => pick(&mut rng),
                    };
                    let valid = current.as_ref().is_some_and(|doc| &doc.auth == controller.id());
                    (registry.delete(did, controller), valid, None)
                }
            };
            ops += 1;
            match (&result, valid) {
                (Ok(_), true) => {
                    accepted += 1;
                    match next {
                        Some(doc) => model.insert(did.clone(), doc),
                        None => model.remove(did),
                    };
                }
                (Err(IdentityError::LedgerRejection(_)), true) if byzantine => rejected_by_ledger += 1,
                (Err(_), false) => {}
                (r, v) => return Err(format!("sequence {seq}: valid={v} but got {r:?}")),
            }
            let log = ledger.snapshot();
            for d in &dids {
                let resolved = registry.resolve(d).document();
                ensure(resolved == fold_resolve(&log, d), || format!("sequence {seq}: {d} differs from the log fold"))?;
                ensure(resolved.as_ref() == model.get(d), || format!("sequence {seq}: {d} differs from the model"))?;
            }
        }
    }
    Ok(format!("500 sequences, {ops} operations ({accepted} finalized, {rejected_by_ledger} refused by byzantine votes)"))
}

// ---------------------------------------------------------------- storage

/// γ = 0 gives one partition, otherwise ⌊1/γ⌋ + 1, in exact integer arithmetic.
fn expected_partitions(gamma_percent: u64) -> usize {
    100u64.checked_div(gamma_percent).map_or(1, |q| q as usize + 1)
}

fn storage_roundtrip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let provider: Arc<dyn CryptoProvider> = Arc::new(DeterministicProvider::new(4));
    let ledger = Arc::new(Ledger::new(LedgerConfig::default()).map_err(|e| e.to_string())?);
    let owner = ssagg::crypto::WalletAddress::of(provider.gen_keypair(Some(4)).public());
    let grid = [0u64, 10, 33, 50, 99];
    let mut total = 0usize;
    for n in 0..200usize {
        let size = match n {
            0 => 1,
            1 => 1 << 20,
            _ => (2f64.powf(rng.gen_range(0.0..20.0)) as usize).clamp(1, 1 << 20),
        };
        let mut data = vec![0u8; size];
        rng.fill(&mut data[..]);
        total += size;
        for &g in &grid {
            let gamma = g as f64 / 100.0;
            let want = expected_partitions(g);
            let set = partition(&data, gamma).map_err(|e| e.to_string())?;
            ensure(set.count() == want, || format!("γ={gamma}: {} partitions, wanted {want}", set.count()))?;

            let ids: Vec<String> = (0..6).map(|i| format!("loc-{i}")).collect();
            let store = DecentralizedStorage {
                ledger: ledger.clone(),
                provider: provider.clone(),
                table: Arc::new(LocationTable::new(ids.iter().map(LocationEntry::new).collect())),
                pool: Arc::new(LocationPool::new(ids.clone())),
                policy: PolicyKind::RoundRobin.build(),
                gamma,
                owner: owner.clone(),
                partition_key: (n % 2 == 0).then(|| provider.gen_symmetric(Some(n as u64))),
                location_key: (n % 3 == 0).then(|| provider.gen_symmetric(Some(1000 + n as u64))),
                max_attempts: 3,
            };
            ensure(store.kind() == BackendKind::Decentralized, || "backend kind".into())?;
            let r = store.store(&data).map_err(|e| e.to_string())?;
            let StoredRef::Decentralized { tx } = &r else { return Err("wrong reference kind".into()) };
            let tx = ledger.get(*tx).ok_or("location transaction not finalized")?;
            let key = store.location_key.as_ref().map(DecryptionKey::Symmetric);
            let recorded = parse_locations(&tx, key).map_err(|e| e.to_string())?.len();
            ensure(recorded == want, || format!("γ={gamma}: {recorded} recorded locations, wanted {want}"))?;
            let back = store.load(&r).map_err(|e| e.to_string())?;
            ensure(back == data, || format!("payload {n} ({size} B) at γ={gamma} did not round-trip"))?;
        }
    }
    Ok(format!("200 payloads ({total} B) x {} scatter degrees", grid.len()))
}

// ---------------------------------------------------------------- protocol

/// `Ψ` computed directly on plaintext records: copy each mapped path, then
/// concatenate in source order.
fn oracle_transform(sources: &[&Vec<Value>], fields: Option<&[(String, String)]>) -> Vec<Value> {
    let mut out = Vec::new();
    for records in sources {
        for r in records.iter() {
            let Some(fields) = fields else {
                out.push(r.clone());
                continue;
            };
            let mut o = Map::new();
            for (from, to) in fields {
                let mut v = r;
                for part in from.split('.') {
                    v = &v[part];
                }
                insert_path(&mut o, to, v.clone());
            }
            out.push(Value::Object(o));
        }
    }
    out
}

fn insert_path(o: &mut Map<String, Value>, path: &str, v: Value) {
    match path.split_once('.') {
        None => {
            o.insert(path.to_string(), v);
        }
        Some((head, rest)) => {
            let inner = o.entry(head.to_string()).or_insert_with(|| Value::Object(Map::new()));
            if let Value::Object(m) = inner {
                insert_path(m, rest, v);
            }
        }
    }
}

fn oracle_envelope(spec: &Value, payload: Vec<Value>) -> Vec<u8> {
    // sorted keys, compact: the same rule the library uses for every export
    serde_json::to_vec(&json!({"payload": payload, "spec": spec})).expect("json")
}

fn word(rng: &mut ChaCha8Rng, len: usize) -> String {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
    (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())] as char).collect()
}

fn random_record(rng: &mut ChaCha8Rng) -> Value {
    let tags: Vec<String> = (0..rng.gen_range(0..4))
        .map(|_| {
            let len = rng.gen_range(8..14);
            word(rng, len)
        })
        .collect();
    let (name_len, city_len) = (rng.gen_range(10..18), rng.gen_range(9..15));
    json!({
        "name": word(rng, name_len),
        "score": if rng.gen_bool(0.5) { json!(rng.gen_range(0..1_000_000)) } else { json!(rng.gen_range(0..10_000) as f64 / 4.0) },
        "flag": rng.gen_bool(0.5),
        "tags": tags,
        "place": {"city": word(rng, city_len), "zip": rng.gen_range(10_000..99_999)},
    })
}

const LEAVES: [(&str, &str); 6] = [
    ("name", "string"),
    ("score", "number"),
    ("flag", "boolean"),
    ("tags", "string[]"),
    ("place.city", "string"),
    ("place.zip", "number"),
];

struct RandomScenario {
    config: ScenarioConfig,
    records: BTreeMap<String, Vec<Value>>,
    sources: Vec<String>,
    fields: Option<Vec<(String, String)>>,
    output_spec: Value,
}

fn random_scenario(i: u64) -> Result<RandomScenario, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(500 + i);
    let source_spec = json!({
        "name": "string", "score": "number", "flag": "boolean", "tags": "string[]", "place": "Place",
        "Place": {"city": "string", "zip": "number"}
    });
    let k = rng.gen_range(2..=5);
    let sources: Vec<String> = (0..k).map(|j| format!("src-{j}")).collect();
    let mut records = BTreeMap::new();
    let mut entities = vec![
        json!({"name": "auth-a", "roles": ["authority"]}),
        json!({"name": "auth-b", "roles": ["authority"]}),
        json!({"name": "buyer", "roles": ["consumer"]}),
    ];
    for s in &sources {
        let recs: Vec<Value> = (0..rng.gen_range(1..=4)).map(|_| random_record(&mut rng)).collect();
        entities.push(json!({
            "name": s, "roles": ["source"],
            "authority": if rng.gen_bool(0.5) { "auth-a" } else { "auth-b" },
            "spec": source_spec, "records": recs,
        }));
        records.insert(s.clone(), recs);
    }
    let (fields, output_spec, transform) = if rng.gen_bool(0.25) {
        (None, source_spec.clone(), json!({}))
    } else {
        let mut chosen: Vec<_> = LEAVES.to_vec();
        chosen.shuffle(&mut rng);
        chosen.truncate(rng.gen_range(1..=LEAVES.len()));
        let mut out_spec = Map::new();
        let mut out_fields = Vec::new();
        for (n, (from, t)) in chosen.iter().enumerate() {
            let to = format!("f{n}");
            out_spec.insert(to.clone(), json!(t));
            out_fields.push((from.to_string(), to));
        }
        let fields_json: Vec<Value> = out_fields.iter().map(|(f, t)| json!({"from": f, "to": t})).collect();
        let output = Value::Object(out_spec);
        (Some(out_fields), output.clone(), json!({"fields": fields_json, "output": output}))
    };
    let backend = if i.is_multiple_of(2) { "decentralized" } else { "self-hosted" };
    let gamma = [0.0, 0.1, 0.33, 0.5, 0.99][rng.gen_range(0..5)];
    let acquisition = |name: &str, mode: &str| {
        json!({
            "name": name, "consumer": "buyer", "sources": sources, "mode": mode, "transform": transform,
            "expect": {"sources": sources.iter().map(|s| (s.clone(), json!("verified"))).collect::<Map<_, _>>(), "output": true}
        })
    };
    let config = json!({
        "name": format!("random-{i}"),
        "key_seed": 1000 + i,
        "storage": {"backend": backend, "gamma": gamma, "host": "data-center"},
        "locations": (0..12).map(|l| format!("node-{l}")).collect::<Vec<_>>(),
        "entities": entities,
        "acquisitions": [acquisition("on", "onchain"), acquisition("off", "offchain")],
    });
    let config = ScenarioConfig::from_json(&config.to_string()).map_err(|e| format!("random-{i}: {e}"))?;
    Ok(RandomScenario { config, records, sources, fields, output_spec })
}

fn end_to_end(runs: &mut Vec<(RandomScenario, ScenarioResult)>) -> Outcome {
    let mut backends = [0usize; 2];
    for i in 0..50u64 {
        let scenario = random_scenario(i)?;
        let result = run_scenario(&scenario.config, i).map_err(|e| format!("random-{i}: {e}"))?;
        let inputs: Vec<&Vec<Value>> = scenario.sources.iter().map(|s| &scenario.records[s]).collect();
        let want = oracle_envelope(&scenario.output_spec, oracle_transform(&inputs, scenario.fields.as_deref()));
        let mut outputs = Vec::new();
        for run in &result.runs {
            let Some(out) = &run.outcome.output else {
                return Err(format!("random-{i} {}: no output ({:?})", run.name, run.outcome.report.error));
            };
            for s in &run.outcome.report.sources {
                ensure(s.status == SourceStatus::Verified, || format!("random-{i} {}: {:?}", run.name, s.status))?;
            }
            let got = canonical::to_bytes(out).map_err(|e| e.to_string())?;
            ensure(got == want, || {
                format!("random-{i} {}: output differs from oracle\n got {}\nwant {}", run.name, String::from_utf8_lossy(&got), String::from_utf8_lossy(&want))
            })?;
            outputs.push(got);
        }
        ensure(outputs.len() == 2 && outputs[0] == outputs[1], || format!("random-{i}: modes disagree"))?;
        backends[(i % 2) as usize] += 1;
        runs.push((scenario, result));
    }
    Ok(format!("50 scenarios ({} decentralized, {} self-hosted), 100 runs equal to the oracle", backends[0], backends[1]))
}

/// First plaintext-classified wire payload sharing an 8-byte window with any
/// source's data, and the number of plaintext payloads inspected.
fn find_leak(scenario: &RandomScenario, result: &ScenarioResult) -> Result<(Option<String>, usize), String> {
    const W: usize = 8;
    let mut data = Vec::new();
    for s in &scenario.sources {
        data.push(result.world.envelope(s).ok_or("missing envelope")?.to_bytes());
        for r in &scenario.records[s] {
            data.push(serde_json::to_vec(r).map_err(|e| e.to_string())?);
            data.push(r["name"].as_str().unwrap_or_default().as_bytes().to_vec());
            data.push(r["place"]["city"].as_str().unwrap_or_default().as_bytes().to_vec());
        }
    }
    let windows: HashSet<&[u8]> = data.iter().flat_map(|d| d.windows(W)).collect();
    let mut checked = 0;
    for r in result.trace.records() {
        let (Some(class), Some(payload)) = (r.event.class(), r.event.payload()) else { continue };
        if !class.as_str().starts_with("plaintext") {
            continue;
        }
        checked += 1;
        if let Some(hit) = payload.windows(W).find(|w| windows.contains(w)) {
            let (TraceEvent::Send { label, .. } | TraceEvent::Drop { label, .. }) = &r.event else { unreachable!() };
            let leak = format!("{}: {label} carries source bytes {:?}", result.name, String::from_utf8_lossy(hit));
            return Ok((Some(leak), checked));
        }
    }
    Ok((None, checked))
}

fn confidentiality(runs: &[(RandomScenario, ScenarioResult)]) -> Outcome {
    let mut checked = 0;
    for (scenario, result) in runs {
        let (leak, n) = find_leak(scenario, result)?;
        if let Some(leak) = leak {
            return Err(leak);
        }
        checked += n;
    }
    // control: with partitions stored in the clear the detector must fire
    let mut control = random_scenario(0)?;
    control.config.storage.encrypt_partitions = false;
    let result = run_scenario(&control.config, 0).map_err(|e| e.to_string())?;
    ensure(find_leak(&control, &result)?.0.is_some(), || "detector missed unencrypted partitions".into())?;
    Ok(format!("{checked} plaintext payloads in {} runs, 0 leaks; unencrypted control detected", runs.len() * 2))
}

// ---------------------------------------------------------------- adversaries

const ADVERSARY_SUITE: &str = include_str!("../scenarios/adversary-suite.json");
const NEUROSCIENCE: &str = include_str!("../scenarios/neuroscience.json");

fn adversary_detection() -> Outcome {
    let config = ScenarioConfig::from_json(ADVERSARY_SUITE).map_err(|e| e.to_string())?;
    let mut verdicts = 0;
    for seed in 0..20 {
        let result = run_scenario(&config, seed).map_err(|e| format!("seed {seed}: {e}"))?;
        for (acq, run) in config.acquisitions.iter().zip(&result.runs) {
            let expect = acq.expect.as_ref().ok_or("acquisition without expectations")?;
            for (name, want) in &expect.sources {
                let did = result.world.did(name).ok_or("unknown source")?;
                let got = match run.outcome.report.status_of(did) {
                    Some(SourceStatus::Verified) => "verified".to_string(),
                    Some(s) => s.reason().map(|r| r.to_string()).unwrap_or_else(|| format!("{s:?}")),
                    None => "absent".into(),
                };
                ensure(&got == want, || format!("seed {seed} {}: {name} is {got}, expected {want}", run.name))?;
                verdicts += 1;
            }
        }
        ensure(result.passed(), || format!("seed {seed}: scenario checks failed"))?;
    }
    Ok(format!("{} faults x 20 seeds, {verdicts} verdicts as expected", config.acquisitions.len()))
}

// ---------------------------------------------------------------- cost

fn ledger_cost() -> Outcome {
    let mut lines = Vec::new();
    for (seed, backend) in [(0u64, "decentralized"), (1, "self-hosted"), (2, "decentralized"), (3, "self-hosted")] {
        let spec = json!({"v": "number"});
        let config = json!({
            "name": "cost",
            "storage": {"backend": backend, "gamma": 0.33, "host": "data-center"},
            "locations": ["a", "b", "c", "d"],
            "entities": [
                {"name": "auth", "roles": ["authority"]},
                {"name": "strict-auth", "roles": ["authority"], "policy": {"deny_consumers": ["buyer"]}},
                {"name": "buyer", "roles": ["consumer"]},
                {"name": "s1", "roles": ["source"], "authority": "auth", "spec": spec, "records": [{"v": 1}]},
                {"name": "s2", "roles": ["source"], "authority": "auth", "spec": spec, "records": [{"v": 2}]},
                {"name": "s3", "roles": ["source"], "authority": "strict-auth", "spec": spec, "records": [{"v": 3}]},
            ],
            "acquisitions": [
                {"name": "off", "consumer": "buyer", "sources": ["s1", "s2", "s3"], "mode": "offchain"},
                {"name": "on", "consumer": "buyer", "sources": ["s1", "s2", "s3"], "mode": "onchain"},
            ],
        });
        let config = ScenarioConfig::from_json(&config.to_string()).map_err(|e| e.to_string())?;
        let result = run_scenario(&config, seed).map_err(|e| e.to_string())?;
        let log = result.world.ledger().snapshot();
        let setup = result.runs[0].ledger_before;
        let setup_kinds: HashSet<TxKind> = log[..setup].iter().map(|t| t.kind).collect();
        ensure(setup_kinds.contains(&TxKind::Propagation), || "no DID propagation at setup".into())?;

        let off = &result.runs[0];
        ensure(off.ledger_after == off.ledger_before, || format!("off-chain run added {} transactions", off.ledger_after - off.ledger_before))?;

        let on = &result.runs[1];
        let approved = on.outcome.report.sources.iter().filter(|s| s.status == SourceStatus::Verified).count();
        ensure(approved == 2, || format!("{approved} approved sources, expected 2"))?;
        let added = &log[on.ledger_before..on.ledger_after];
        let count = |k| added.iter().filter(|t| t.kind == k).count();
        let (c, e, s) = (count(TxKind::Collection), count(TxKind::Endorsement), count(TxKind::Storage));
        ensure(c >= 1 && e == approved && s == approved && added.len() == c + e + s, || {
            format!("{backend}: on-chain added {} transactions: {c} collection, {e} endorsement, {s} store", added.len())
        })?;
        lines.push(format!("{}+{}+{}", c, e, s));
    }
    Ok(format!("off-chain +0; on-chain collection+endorsement+store = {} with 2 of 3 sources approved", lines.join(", ")))
}

// ---------------------------------------------------------------- neuroscience

fn neuroscience() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_ssagg"))
        .args(["run", "neuroscience", "--seed", "0", "--out"])
        .arg(dir.path())
        .env_remove("SSAGG_CRYPTO")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.code() == Some(0), || format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))?;

    let config: Value = serde_json::from_str(NEUROSCIENCE).map_err(|e| e.to_string())?;
    let acq = &config["acquisitions"][0];
    let entity = |name: &str| config["entities"].as_array().unwrap().iter().find(|e| e["name"] == name).cloned().unwrap_or_default();
    let sources: Vec<Value> = acq["sources"].as_array().ok_or("sources")?.iter().map(|s| entity(s.as_str().unwrap_or_default())).collect();
    let records: Vec<&Vec<Value>> = sources.iter().map(|e| e["records"].as_array().expect("records")).collect();
    let fields: Vec<(String, String)> = acq["transform"]["fields"]
        .as_array()
        .ok_or("fields")?
        .iter()
        .map(|f| (f["from"].as_str().unwrap_or_default().to_string(), f["to"].as_str().unwrap_or_default().to_string()))
        .collect();
    let want = oracle_envelope(&acq["transform"]["output"], oracle_transform(&records, Some(&fields)));
    let name = acq["name"].as_str().unwrap_or_default();
    let got = std::fs::read(dir.path().join(format!("output-{name}.json"))).map_err(|e| e.to_string())?;
    ensure(got.strip_suffix(b"\n").unwrap_or(&got) == want.as_slice(), || {
        format!("output differs from oracle:\n got {}\nwant {}", String::from_utf8_lossy(&got), String::from_utf8_lossy(&want))
    })?;
    let report: Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let verified = report["runs"][0]["report"]["sources"].as_array().map_or(0, |s| s.iter().filter(|s| s["status"] == "verified").count());
    ensure(verified == sources.len(), || format!("{verified} of {} subjects verified", sources.len()))?;
    let payload = serde_json::from_slice::<Value>(&got).map_err(|e| e.to_string())?["payload"].as_array().map_or(0, Vec::len);
    Ok(format!("exit 0, {verified} subjects verified, {payload} records equal to the oracle"))
}

// ---------------------------------------------------------------- driver

fn main() {
    // `cargo test` passes harness flags; a name filter other than ours skips the suite
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }

    let mut failed = 0;
    let mut report = |n: usize, name: &str, budget: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let outcome = match (outcome, budget) {
            (Ok(msg), Some(b)) if took > b => Err(format!("{msg}; took {took:.2?}, budget {b:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(msg) => println!("criterion {n} PASS  {name}: {msg} [{took:.2?}]"),
            Err(msg) => {
                failed += 1;
                println!("criterion {n} FAIL  {name}: {msg} [{took:.2?}]");
            }
        }
    };
    let secs = |s| Some(Duration::from_secs(s));
    let mut runs = Vec::new();
    report(1, "threshold finalization", secs(1), &mut threshold_law);
    report(2, "credential ownership mutations", secs(10), &mut ownership_mutations);
    report(3, "registry lifecycle", secs(10), &mut registry_lifecycle);
    report(4, "storage round trip", secs(30), &mut storage_roundtrip);
    report(5, "protocol equivalence", secs(60), &mut || end_to_end(&mut runs));
    report(6, "wire confidentiality", None, &mut || confidentiality(&runs));
    report(7, "adversary detection", secs(60), &mut adversary_detection);
    report(8, "ledger cost", None, &mut ledger_cost);
    report(9, "neuroscience scenario", secs(10), &mut neuroscience);
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
