use std::sync::Arc;

use serde_json::json;

use super::*;
use crate::crypto::{sign_recover, SystemProvider};
use crate::identity::{verify_ownership, Did, Identity, Registry};
use crate::ledger::{Ledger, LedgerConfig, PropValue, TxDraft, TxKind};
use crate::storage::{DataEnvelope, DataSpecification};

fn registry() -> Registry {
    Registry::new(Arc::new(Ledger::new(LedgerConfig::default()).unwrap()))
}

fn propagated(reg: &Registry, seed: u64) -> Identity {
    let id = Identity::generate(&SystemProvider, Some(seed));
    reg.propagate(&id.document(), &id.keyring.auth).unwrap();
    id
}

fn person_spec() -> DataSpecification {
    DataSpecification::parse(json!({"firstName": "string", "age": "number"})).unwrap()
}

fn envelope(records: &[serde_json::Value]) -> DataEnvelope {
    DataEnvelope::new(person_spec(), records).unwrap()
}

#[test]
fn identity_transform_keeps_payload() {
    let env = envelope(&[json!({"firstName": "Ada", "age": 36})]);
    let out = process_transform(std::slice::from_ref(&env), &TransformSpec::identity()).unwrap();
    assert_eq!(out, env);
}

#[test]
fn rename_over_two_sources() {
    let a = envelope(&[json!({"firstName": "Ada", "age": 36}), json!({"firstName": "Alan", "age": 41})]);
    let b = envelope(&[json!({"firstName": "Grace", "age": 85}), json!({"firstName": "Edsger", "age": 72})]);
    let output = DataSpecification::parse(json!({"given": "string", "age": "number"})).unwrap();
    let psi = TransformSpec::mapping(vec![FieldMap::new("firstName", "given"), FieldMap::new("age", "age")], output);
    let out = process_transform(&[a, b], &psi).unwrap();
    assert_eq!(
        out.payload,
        vec![
            json!({"given": "Ada", "age": 36}),
            json!({"given": "Alan", "age": 41}),
            json!({"given": "Grace", "age": 85}),
            json!({"given": "Edsger", "age": 72}),
        ]
    );
    out.validate().unwrap();
}

#[test]
fn nesting_through_output_types() {
    let a = envelope(&[json!({"firstName": "Ada", "age": 36})]);
    let output = DataSpecification::parse(json!({
        "person": "Person",
        "Person": {"name": "string", "years": "number"}
    }))
    .unwrap();
    let psi = TransformSpec::mapping(
        vec![FieldMap::new("firstName", "person.name"), FieldMap::new("age", "person.years")],
        output,
    );
    let out = process_transform(&[a], &psi).unwrap();
    assert_eq!(out.payload, vec![json!({"person": {"name": "Ada", "years": 36}})]);
}

#[test]
fn unknown_field_in_psi() {
    let a = envelope(&[json!({"firstName": "Ada", "age": 36})]);
    let output = DataSpecification::parse(json!({"surname": "string"})).unwrap();
    let psi = TransformSpec::mapping(vec![FieldMap::new("lastName", "surname")], output);
    let err = process_transform(&[a.clone(), a], &psi).unwrap_err();
    assert!(matches!(err, AggregatorError::UnknownFieldInPsi { ref field, source_index: 0 } if field == "lastName"));
}

#[test]
fn identity_transform_needs_a_shared_spec() {
    let a = envelope(&[json!({"firstName": "Ada", "age": 36})]);
    let other = DataSpecification::parse(json!({"name": "string"})).unwrap();
    let b = DataEnvelope::new(other, &[json!({"name": "Bob"})]).unwrap();
    assert!(matches!(
        process_transform(&[a, b], &TransformSpec::identity()),
        Err(AggregatorError::InvalidTransform(_))
    ));
    let psi = TransformSpec { fields: Some(vec![FieldMap::new("age", "age")]), output: None };
    assert!(process_transform(&[], &psi).is_err());
}

#[test]
fn endorsement_paths() {
    let reg = registry();
    let source = propagated(&reg, 1);
    let authority = propagated(&reg, 2);
    let data = b"neural recordings".to_vec();

    let rec = endorse_data(&reg, &source.did, &authority, &data, &ApprovalPolicy::default()).unwrap();
    assert!(verify_ownership(&rec.vc, &source.did, &data).holds());
    let mut mutated = data.clone();
    mutated[0] ^= 1;
    assert!(!verify_ownership(&rec.vc, &source.did, &mutated).holds());

    let mut policy = ApprovalPolicy::default();
    policy.deny_sources.insert(source.did.clone());
    assert!(matches!(
        endorse_data(&reg, &source.did, &authority, &data, &policy),
        Err(AggregatorError::EndorsementRejected { .. })
    ));

    let stranger = Identity::generate(&SystemProvider, Some(3));
    assert!(matches!(
        endorse_data(&reg, &stranger.did, &authority, &data, &ApprovalPolicy::default()),
        Err(AggregatorError::UnresolvableDid(d)) if d == stranger.did
    ));
}

struct Fixture {
    reg: Registry,
    source: Identity,
    consumer: Identity,
    authority: Identity,
    vc: crate::identity::VerifiableCredential,
}

fn fixture() -> Fixture {
    let reg = registry();
    let source = propagated(&reg, 10);
    let consumer = propagated(&reg, 11);
    let authority = propagated(&reg, 12);
    let vc = endorse_data(&reg, &source.did, &authority, b"payload", &ApprovalPolicy::default()).unwrap().vc;
    Fixture { reg, source, consumer, authority, vc }
}

fn signed(vc: &crate::identity::VerifiableCredential, id: &Identity) -> Vec<u8> {
    sign_recover(vc.to_canonical().as_bytes(), id.keyring.auth.secret()).to_bytes()
}

fn omega(f: &Fixture, approver: &Identity, nonce: u64) -> Vec<u8> {
    let inner = sign_recover(&nonce.to_be_bytes(), f.source.keyring.auth.secret()).to_bytes();
    sign_recover(&inner, approver.keyring.auth.secret()).to_bytes()
}

#[test]
fn offchain_verdicts() {
    let f = fixture();
    let vc = signed(&f.vc, &f.source);
    let check = |signed_vc: &[u8], omega: &[u8], nonce: u64| {
        let evidence = Evidence {
            source: &f.source.did,
            consumer: &f.consumer.did,
            signed_vc,
            approval: Approval::OffChain { omega, nonce },
        };
        arbitrate(&evidence, &f.reg)
    };
    let good = check(&vc, &omega(&f, &f.authority, 7), 7);
    assert!(good.accepted(), "{:?}", good.failures);
    assert_eq!(good.vc.as_ref(), Some(&f.vc));

    assert_eq!(check(&vc, &omega(&f, &f.authority, 8), 7).reason(), Some(ReasonCode::NonceMismatch));
    assert_eq!(check(&vc, &omega(&f, &f.consumer, 7), 7).reason(), Some(ReasonCode::ApprovalFail));
    assert_eq!(check(&vc, &[], 7).reason(), Some(ReasonCode::ApprovalFail));

    // signed with someone else's key
    assert_eq!(check(&signed(&f.vc, &f.consumer), &omega(&f, &f.authority, 7), 7).reason(), Some(ReasonCode::AuthFail));

    // credential about another subject
    let other = endorse_data(&f.reg, &f.consumer.did, &f.authority, b"x", &ApprovalPolicy::default()).unwrap().vc;
    assert_eq!(check(&signed(&other, &f.source), &omega(&f, &f.authority, 7), 7).reason(), Some(ReasonCode::AuthFail));

    let mut tampered = f.vc.clone();
    tampered.id.push('x');
    assert_eq!(
        check(&signed(&tampered, &f.source), &omega(&f, &f.authority, 7), 7).reason(),
        Some(ReasonCode::OwnProofInvalid)
    );
}

#[test]
fn onchain_verdicts() {
    let f = fixture();
    let vc = signed(&f.vc, &f.source);
    let ledger = f.reg.ledger();
    let check = || {
        let evidence = Evidence {
            source: &f.source.did,
            consumer: &f.consumer.did,
            signed_vc: &vc,
            approval: Approval::OnChain { ledger, run: None },
        };
        arbitrate(&evidence, &f.reg)
    };
    assert_eq!(check().reason(), Some(ReasonCode::ApprovalFail));

    let endorse = |by: &Identity| {
        TxDraft::new(TxKind::Endorsement, by.wallet())
            .with("s", PropValue::text(f.source.did.as_str()))
            .with("c", PropValue::text(f.consumer.did.as_str()))
            .with("o", PropValue::text(by.did.as_str()))
    };
    // an endorsement by an authority that did not issue the credential
    ledger.submit(endorse(&f.consumer)).unwrap();
    assert_eq!(check().reason(), Some(ReasonCode::ApprovalFail));
    ledger.submit(endorse(&f.authority)).unwrap();
    assert!(check().accepted());
}

#[test]
fn claim_check_after_fetch() {
    let f = fixture();
    assert_eq!(check_claim(&f.vc, &f.source.did, b"payload"), Ok(()));
    assert_eq!(check_claim(&f.vc, &f.source.did, b"payloae"), Err(ReasonCode::OwnClaimMismatch));
    assert_eq!(check_claim(&f.vc, &f.consumer.did, b"payload"), Err(ReasonCode::OwnSubjectMismatch));
}

#[test]
fn request_validation() {
    let f = fixture();
    let third = propagated(&f.reg, 13);
    let request = |sources: Vec<Did>, mode, nonce| AggregationRequest {
        consumer: f.consumer.did.clone(),
        sources,
        transform: TransformSpec::identity(),
        mode,
        nonce,
        strict: false,
    };
    let two = vec![f.source.did.clone(), third.did.clone()];
    assert!(request(two.clone(), Mode::OnChain, None).validate(&f.reg).is_ok());
    assert!(request(two.clone(), Mode::OffChain, Some(1)).validate(&f.reg).is_ok());
    assert!(matches!(request(two, Mode::OffChain, None).validate(&f.reg), Err(AggregatorError::MissingNonce)));
    assert!(matches!(
        request(vec![f.source.did.clone()], Mode::OnChain, None).validate(&f.reg),
        Err(AggregatorError::TooFewSources)
    ));
    assert!(matches!(
        request(vec![f.source.did.clone(), f.source.did.clone()], Mode::OnChain, None).validate(&f.reg),
        Err(AggregatorError::DuplicateSource(_))
    ));
    let ghost = Identity::generate(&SystemProvider, Some(99)).did;
    assert!(matches!(
        request(vec![f.source.did.clone(), ghost], Mode::OnChain, None).validate(&f.reg),
        Err(AggregatorError::UnresolvableDid(_))
    ));
}

#[test]
fn status_transitions() {
    use SourceStatus::*;
    assert!(Pending.can_become(Delivered));
    assert!(Delivered.can_become(Authorized));
    assert!(Authorized.can_become(Verified));
    assert!(Pending.can_become(Rejected));
    assert!(!Delivered.can_become(Rejected));
    assert!(!Pending.can_become(Verified));
    assert!(!Rejected.can_become(Delivered));
    assert!(Authorized.can_become(Failed(ReasonCode::StagingUnreachable)));
    assert!(!Verified.can_become(Failed(ReasonCode::Timeout)));
    assert_eq!(Rejected.reason(), Some(ReasonCode::Rejected));

    let json = serde_json::to_value(Failed(ReasonCode::OwnProofInvalid)).unwrap();
    assert_eq!(json, json!({"status": "failed", "reason": "OWN_PROOF_INVALID"}));
    assert_eq!(serde_json::to_value(Verified).unwrap(), json!({"status": "verified"}));
}

#[test]
fn reason_codes_and_modes_roundtrip() {
    for code in ["AUTH_FAIL", "NONCE_MISMATCH", "PORT_CLOSED", "OWN_CLAIM_MISMATCH", "TERMINATED"] {
        assert_eq!(code.parse::<ReasonCode>().unwrap().as_str(), code);
    }
    assert!("NOPE".parse::<ReasonCode>().is_err());
    assert_eq!("on-chain".parse::<Mode>().unwrap(), Mode::OnChain);
    assert_eq!("offchain".parse::<Mode>().unwrap(), Mode::OffChain);
}

#[test]
fn messages_roundtrip_and_classify() {
    let did = Identity::generate(&SystemProvider, Some(5)).did;
    let msgs = vec![
        Message::Notify { run: RunId(1), consumer: did.clone(), nonce: 9, port: "z:run-1".into() },
        Message::StagePut { run: RunId(1), bytes: vec![1, 2, 3] },
        Message::Abort { run: RunId(1), source: did, reason: ReasonCode::Rejected },
        Message::PartitionData { run: RunId(1), index: 0, bytes: Some(vec![0]), sealed: false },
    ];
    for m in &msgs {
        assert_eq!(Message::decode(&m.encode()).as_ref(), Some(m));
    }
    let classes: Vec<_> = msgs.iter().map(Message::class).collect();
    assert_eq!(
        classes,
        vec![
            PayloadClass::PlaintextMetadata,
            PayloadClass::Ciphertext,
            PayloadClass::PlaintextMetadata,
            PayloadClass::PlaintextData
        ]
    );
}
