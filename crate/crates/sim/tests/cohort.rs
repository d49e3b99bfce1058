use std::collections::BTreeMap;
use std::sync::Arc;

use nudgelab_core::analytics::{metrics_from_export, MetricsConfig};
use nudgelab_core::audit::{audit_export, audit_store, AuditPolicy};
use nudgelab_core::engine::PolicyConfig;
use nudgelab_core::store::Store;
use nudgelab_core::time::ManualClock;
use nudgelab_service::{ApiService, InProcess};
use nudgelab_sim::{inject_duplicates, local_service, replay, run_cohort, CohortConfig, RunOutput};

fn policy() -> PolicyConfig {
    PolicyConfig { rng_seed: Some(11), ..PolicyConfig::default() }
}

fn world() -> (Arc<ApiService>, ManualClock) {
    let clock = ManualClock::new(CohortConfig::default().start());
    let store = Arc::new(Store::open_in_memory().unwrap());
    (local_service(store, policy(), &clock, "sim-secret").unwrap(), clock)
}

fn run(config: &CohortConfig) -> (Arc<ApiService>, RunOutput) {
    let (svc, clock) = world();
    let out = run_cohort(config, InProcess(svc.clone()), &clock, &policy()).unwrap();
    (svc, out)
}

fn export(svc: &ApiService) -> String {
    let mut buf = Vec::new();
    svc.store().export_events(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn zero_rate_registers_everyone_and_emits_nothing() {
    let config = CohortConfig { attempts_per_day_rate: 0.0, ..CohortConfig::default() };
    let (svc, out) = run(&config);
    assert_eq!(out.manifest.users.len(), 22);
    assert_eq!(svc.store().read(|tx| tx.users()).unwrap().len(), 22);
    assert_eq!(out.manifest.events_emitted, 0);
    assert_eq!(svc.store().read(|tx| tx.event_count()).unwrap(), 0);
    assert!(out.log.iter().all(|e| e.path.ends_with("/register")));
}

#[test]
fn default_cohort_respects_policy() {
    let config = CohortConfig { attempts_per_day_rate: 8.0, ..CohortConfig::default() };
    let (svc, out) = run(&config);
    assert!(out.manifest.policy_violations.is_empty(), "{:?}", out.manifest.policy_violations);
    for t in &out.manifest.tallies {
        assert!(t.interventions <= 35, "user {} got {}", t.user_id, t.interventions);
    }
    let audit = AuditPolicy::from_config(&policy()).unwrap();
    assert!(svc.store().read(|tx| audit_store(&audit, tx)).unwrap().is_empty());
    let records = svc.store().read(|tx| tx.export_records()).unwrap();
    assert!(audit_export(&audit, &records).is_empty());
    // At 8 attempts a day the cap must actually bind for someone.
    assert!(out.manifest.tallies.iter().any(|t| t.interventions == 35));
}

#[test]
fn shadow_tallies_match_computed_metrics() {
    let (svc, out) = run(&CohortConfig::default());
    let records = svc.store().read(|tx| tx.export_records()).unwrap();
    let participants: BTreeMap<_, _> = out.manifest.users.iter().map(|u| (u.user_id, u.app_variant)).collect();
    let metrics = metrics_from_export(&records, &participants, &MetricsConfig::default()).unwrap();
    assert_eq!(metrics.len(), out.manifest.tallies.len());
    for (m, t) in metrics.iter().zip(out.manifest.tallies.iter()) {
        assert_eq!(m.user_id, t.user_id);
        assert_eq!((m.edits, m.posts, m.shares), (t.edits, t.posts, t.shares));
        // Abandoned pop-ups leave no event.
        assert_eq!(m.interventions_received + t.abandoned, t.interventions);
    }
    assert_eq!(records.len() as u64, out.manifest.events_emitted);
}

#[test]
fn same_seed_same_export() {
    let config = CohortConfig { rng_seed: 42, ..CohortConfig::default() };
    let (a, out_a) = run(&config);
    let (b, out_b) = run(&config);
    assert_eq!(export(&a), export(&b));
    assert_eq!(out_a.manifest.tallies, out_b.manifest.tallies);
    let (c, _) = run(&CohortConfig { rng_seed: 43, ..config });
    assert_ne!(export(&a), export(&c));
}

#[test]
fn zero_duplicate_rate_is_identity() {
    let (_, out) = run(&CohortConfig { n_group1: 2, n_group2: 2, ..CohortConfig::default() });
    assert_eq!(inject_duplicates(&out.log, 0.0, 5), out.log);
}

#[test]
fn duplicated_replay_matches_clean_replay() {
    let config = CohortConfig { n_group1: 3, n_group2: 3, experiment_days: 5, ..CohortConfig::default() };
    let (original, out) = run(&config);
    assert!(out.manifest.events_emitted >= 60, "only {} events", out.manifest.events_emitted);

    let (clean, clean_clock) = world();
    let clean_resp = replay(&out.log, &InProcess(clean.clone()), &clean_clock).unwrap();
    assert!(clean_resp.iter().all(|r| r.status == 200));

    let noisy_log = inject_duplicates(&out.log, 0.2, 9);
    let dups = noisy_log.iter().filter(|e| e.duplicate).count();
    assert!(dups > 10, "only {dups} duplicates injected");
    let (noisy, noisy_clock) = world();
    let noisy_resp = replay(&noisy_log, &InProcess(noisy.clone()), &noisy_clock).unwrap();

    let count = |s: &ApiService| s.store().read(|tx| tx.event_count()).unwrap();
    assert_eq!(count(&clean), count(&noisy));
    assert_eq!(count(&original), count(&noisy));
    assert_eq!(export(&clean), export(&noisy));
    assert_eq!(export(&original), export(&noisy));
    for r in noisy_resp.iter().filter(|r| r.entry.duplicate) {
        assert_eq!(r.status, 200);
        assert_eq!(r.response, r.entry.response, "duplicate of {} answered differently", r.entry.path);
    }
}

#[test]
fn attempt_volume_scales_with_rate() {
    let base = CohortConfig { n_group1: 15, n_group2: 15, ..CohortConfig::default() };
    let user_days = f64::from(30 * 7);
    for rate in [1.0, 4.0] {
        let (_, out) = run(&CohortConfig { attempts_per_day_rate: rate, ..base.clone() });
        let initial: u32 = out.manifest.tallies.iter().map(|t| t.attempts).sum::<u32>()
            - out.manifest.tallies.iter().map(|t| t.edits).sum::<u32>();
        let expected = rate * user_days;
        let sigma = expected.sqrt();
        assert!(
            (f64::from(initial) - expected).abs() < 3.0 * sigma,
            "rate {rate}: {initial} initial attempts, expected {expected}"
        );
    }
}
