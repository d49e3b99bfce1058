use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::Serialize;

use nudgelab_core::analytics::{
    analyze_events, analyze_summaries, read_summaries_from_path, read_survey_from_path, render_report, score_survey,
    AnalysisConfig, MetricsConfig,
};
use nudgelab_core::audit::{audit_export, audit_store, AuditPolicy, Violation};
use nudgelab_core::domain::{ConstructScale, Corpus};
use nudgelab_core::engine::PolicyConfig;
use nudgelab_core::export::read_events_from_path;
use nudgelab_core::store::Store;
use nudgelab_core::time::{ManualClock, SystemClock};
use nudgelab_core::Error;
use nudgelab_service::{ApiService, InProcess, ServiceConfig};
use nudgelab_sim::{inject_duplicates, local_service, replay, run_cohort, CohortConfig, RunManifest};

use crate::error::{io_err, CliError};
use crate::{participants, AuditArgs, ExportArgs, Format, ReportArgs, SeedCorpusArgs, ServeArgs, SimulateArgs, SurveyScoreArgs};

/// Secret for the throwaway in-process service behind `simulate`.
const SIM_SECRET: &str = "nudgelab-simulation";

/// Runs `f` on `path`, naming the path in I/O failures.
fn load<T>(path: &Path, f: impl FnOnce(&Path) -> nudgelab_core::Result<T>) -> Result<T, CliError> {
    f(path).map_err(|e| match e {
        Error::Io(io) => io_err(path.display(), io),
        other => other.into(),
    })
}

fn open_existing(path: &Path) -> Result<Store, CliError> {
    if !path.is_file() {
        return Err(io_err(path.display(), "no such database"));
    }
    load(path, Store::open)
}

fn emit(output: Option<&Path>, content: &str) -> Result<(), CliError> {
    match output {
        Some(p) => fs::write(p, content).map_err(|e| io_err(p.display(), e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes()).and_then(|_| out.flush()).map_err(|e| io_err("stdout", e))
        }
    }
}

fn policy_from(path: Option<&Path>) -> Result<PolicyConfig, CliError> {
    match path {
        Some(p) => load(p, PolicyConfig::from_path),
        None => Ok(PolicyConfig::default()),
    }
}

pub fn serve(a: ServeArgs) -> Result<(), CliError> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let mut cfg = match &a.config {
        Some(p) => load(p, ServiceConfig::from_path)?,
        None => ServiceConfig::default(),
    };
    cfg.apply_env(|k| std::env::var(k).ok());
    if let Some(b) = a.bind {
        cfg.bind = b;
    }
    if let Some(d) = a.database {
        cfg.database = d;
    }
    cfg.validate()?;
    let policy = cfg.policy()?;
    let store = Arc::new(load(&cfg.database, Store::open)?);
    let service = Arc::new(ApiService::new(store, policy, Arc::new(SystemClock), cfg.options())?);

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| io_err("tokio runtime", e))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&cfg.bind)
            .await
            .map_err(|e| io_err(format!("cannot listen on {}", cfg.bind), e))?;
        let addr = listener.local_addr().map_err(|e| io_err("listener", e))?;
        eprintln!("listening on http://{addr}");
        let sweep = Duration::from_secs(cfg.sweep_interval_seconds.max(1));
        nudgelab_service::http::serve(listener, service, sweep, shutdown_signal())
            .await
            .map_err(|e| io_err("server", e))
    })?;
    eprintln!("shut down cleanly");
    Ok(())
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
    tracing::info!("interrupt received, draining requests");
}

pub fn seed_corpus(a: SeedCorpusArgs) -> Result<(), CliError> {
    let corpus = match &a.corpus {
        Some(p) => load(p, Corpus::from_path)?,
        None => Corpus::default_corpus(),
    };
    let store = load(&a.database, Store::open)?;
    let n = store.seed_corpus(&corpus)?;
    println!("seeded {n} messages into {}", a.database.display());
    Ok(())
}

#[derive(Serialize)]
struct DuplicateCheck {
    rate: f64,
    resubmissions: usize,
    store_identical: bool,
}

#[derive(Serialize)]
struct SimulationManifest {
    #[serde(flatten)]
    run: RunManifest,
    store_audit: Vec<Violation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    duplicates: Option<DuplicateCheck>,
}

fn export_string(svc: &ApiService) -> Result<String, CliError> {
    let mut buf = Vec::new();
    svc.store().export_events(&mut buf)?;
    String::from_utf8(buf).map_err(|e| CliError::Validation(e.to_string()))
}

pub fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let mut cohort = match &a.config {
        Some(p) => CohortConfig::from_path(p)?,
        None => CohortConfig::default(),
    };
    if let Some(v) = a.seed {
        cohort.rng_seed = v;
    }
    if let Some(v) = a.n_group1 {
        cohort.n_group1 = v;
    }
    if let Some(v) = a.n_group2 {
        cohort.n_group2 = v;
    }
    if let Some(v) = a.days {
        cohort.experiment_days = v;
    }
    if let Some(v) = a.rate {
        cohort.attempts_per_day_rate = v;
    }
    cohort.validate()?;
    if !(0.0..=1.0).contains(&a.duplicates) {
        return Err(CliError::Validation(format!("--duplicates must lie in [0, 1], got {}", a.duplicates)));
    }
    let mut policy = policy_from(a.policy.as_deref())?;
    policy.rng_seed.get_or_insert(cohort.rng_seed);

    fs::create_dir_all(&a.out).map_err(|e| io_err(a.out.display(), e))?;
    let store = match &a.database {
        Some(p) => load(p, Store::open)?,
        None => Store::open_in_memory()?,
    };
    let clock = ManualClock::new(cohort.start());
    let svc = local_service(Arc::new(store), policy.clone(), &clock, SIM_SECRET)?;
    let run = run_cohort(&cohort, InProcess(svc.clone()), &clock, &policy)?;

    let audit_policy = AuditPolicy::from_config(&policy)?;
    let store_audit = svc.store().read(|tx| audit_store(&audit_policy, tx))?;
    let export = export_string(&svc)?;

    let mut log = run.log;
    let mut duplicates = None;
    if a.duplicates > 0.0 {
        let noisy = inject_duplicates(&log, a.duplicates, cohort.rng_seed);
        let resubmissions = noisy.len() - log.len();
        let replay_clock = ManualClock::new(cohort.start());
        let target = local_service(Arc::new(Store::open_in_memory()?), policy.clone(), &replay_clock, SIM_SECRET)?;
        let responses = replay(&noisy, &InProcess(target.clone()), &replay_clock)
            .map_err(|e| CliError::Validation(format!("replay failed: {e}")))?;
        let answers_match = responses
            .iter()
            .filter(|r| r.entry.duplicate)
            .all(|r| r.status == r.entry.status && r.response == r.entry.response);
        let store_identical = answers_match && export_string(&target)? == export;
        duplicates = Some(DuplicateCheck { rate: a.duplicates, resubmissions, store_identical });
        log = noisy;
    }

    let participants = run.manifest.users.iter().map(|u| (u.user_id, u.app_variant)).collect();
    let write = |name: &str, content: &[u8]| {
        let p = a.out.join(name);
        fs::write(&p, content).map_err(|e| io_err(p.display(), e))
    };
    write("events.csv", export.as_bytes())?;
    let mut buf = Vec::new();
    participants::write(&mut buf, &participants)?;
    write("participants.csv", &buf)?;
    let mut lines = String::new();
    for entry in &log {
        lines.push_str(&serde_json::to_string(entry).expect("log entry serializes"));
        lines.push('\n');
    }
    write("requests.jsonl", lines.as_bytes())?;

    let manifest = SimulationManifest { run: run.manifest, store_audit, duplicates };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    write("manifest.json", json.as_bytes())?;

    println!(
        "{} users, {} requests, {} events written to {}",
        manifest.run.users.len(),
        manifest.run.requests,
        manifest.run.events_emitted,
        a.out.display()
    );
    if let Some(d) = &manifest.duplicates {
        println!(
            "replayed with {} duplicate submissions: store {}",
            d.resubmissions,
            if d.store_identical { "identical" } else { "DIFFERS" }
        );
        if !d.store_identical {
            return Err(CliError::Validation("duplicate replay produced a different store".into()));
        }
    }
    let violations = manifest.run.policy_violations.len() + manifest.store_audit.len();
    if violations > 0 {
        for v in &manifest.run.policy_violations {
            eprintln!("violation: {v}");
        }
        for v in &manifest.store_audit {
            eprintln!("violation: {v}");
        }
        return Err(CliError::Violations(violations));
    }
    Ok(())
}

pub fn report(a: ReportArgs) -> Result<(), CliError> {
    let config = AnalysisConfig {
        metrics: MetricsConfig { experiment_days: a.days, max_per_day: a.max_per_day },
        pairing_window_minutes: a.pairing_window,
        alpha: a.alpha,
    };
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(CliError::Validation(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    let report = match (&a.events, &a.summary) {
        (_, Some(summary)) => analyze_summaries(&load(summary, read_summaries_from_path)?, &config)?,
        (Some(events), None) => {
            let records = load(events, read_events_from_path)?;
            let participants = match &a.participants {
                Some(p) => load(p, participants::read_path)?,
                None => Default::default(),
            };
            let survey = a.survey.as_deref().map(|p| load(p, read_survey_from_path)).transpose()?;
            analyze_events(&records, &participants, survey.as_ref(), &config)?
        }
        (None, None) => return Err(CliError::Usage("either --events or --summary is required".into())),
    };
    let rendered = render_report(&report);
    let body = match a.format {
        Format::Text => rendered.text,
        Format::Json => rendered.json + "\n",
    };
    emit(a.output.as_deref(), &body)
}

pub fn export(a: ExportArgs) -> Result<(), CliError> {
    let store = open_existing(&a.database)?;
    let mut buf = Vec::new();
    let n = store.export_events(&mut buf)?;
    emit(a.output.as_deref(), &String::from_utf8_lossy(&buf))?;
    if a.output.is_some() {
        println!("exported {n} events");
    }
    Ok(())
}

pub fn survey_score(a: SurveyScoreArgs) -> Result<(), CliError> {
    let file = load(&a.survey, read_survey_from_path)?;
    let scored = score_survey(&file.responses, &ConstructScale::standard_set())?;
    let body = match a.format {
        Format::Json => serde_json::to_string_pretty(&scored).expect("scores serialize") + "\n",
        Format::Text => {
            let mut t = String::from("participant  scale     score\n");
            for s in &scored.scores {
                t.push_str(&format!("{:>11}  {:<6} {:>7.3}\n", s.participant_id, s.scale_id.as_str(), s.score));
            }
            t.push_str("\nscale     alpha  items  respondents  flag\n");
            for r in &scored.reliability {
                let alpha = r.cronbach_alpha.map_or_else(|| "-".to_owned(), |v| format!("{v:.3}"));
                let flag = if r.below_threshold { "below 0.70" } else { "" };
                t.push_str(&format!(
                    "{:<6} {:>8} {:>6} {:>12}  {flag}\n",
                    r.scale_id.as_str(),
                    alpha,
                    r.item_count,
                    r.respondent_count
                ));
            }
            t
        }
    };
    emit(a.output.as_deref(), &body)
}

pub fn audit(a: AuditArgs) -> Result<(), CliError> {
    let policy = AuditPolicy::from_config(&policy_from(a.policy.as_deref())?)?;
    let (violations, checked) = match (&a.database, &a.events) {
        (Some(db), _) => {
            let store = open_existing(db)?;
            store.read(|tx| Ok((audit_store(&policy, tx)?, tx.event_count()?)))?
        }
        (None, Some(events)) => {
            let records = load(events, read_events_from_path)?;
            (audit_export(&policy, &records), records.len())
        }
        (None, None) => return Err(CliError::Usage("either --database or --events is required".into())),
    };
    let body = match a.format {
        Format::Json => serde_json::to_string_pretty(&violations).expect("violations serialize") + "\n",
        Format::Text if violations.is_empty() => format!("no violations in {checked} events\n"),
        Format::Text => violations.iter().map(|v| format!("violation: {v}\n")).collect(),
    };
    emit(None, &body)?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violations(violations.len()))
    }
}
