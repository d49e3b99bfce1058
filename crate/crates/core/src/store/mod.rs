//! Durable storage on an embedded SQLite database.
//!
//! Event ingestion is idempotent on the client-assigned `client_event_id`,
//! so retried submissions never produce duplicate rows.

mod schema;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Utc};
use chrono_tz::Tz;
use parking_lot::Mutex;
use rusqlite::{params, Connection, OptionalExtension, Row, TransactionBehavior};
use uuid::Uuid;

use crate::domain::{
    make_registration_code, ActivityEvent, AppVariant, Corpus, InterventionMessage, Language,
    MessageId, NewActivityEvent, PopupAction, UserAccount, UserId, CATEGORIES,
};
use crate::engine::{InterventionToken, IssuedIntervention, TokenState};
use crate::export::{write_events, ExportRecord};
use crate::time::{calendar_day, from_millis, to_millis};
use crate::{Error, Result};

/// Result of [`StoreTx::append_event`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Appended {
    pub event_id: i64,
    /// `false` when the client_event_id was already stored.
    pub inserted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InterventionsToday {
    pub count: usize,
    /// Most recent issuance ever, not only today; feeds the gap check.
    pub last_issued_at: Option<DateTime<Utc>>,
    pub shown_message_ids: BTreeSet<MessageId>,
}

/// Half-open `[from, to)` range; either side may be open.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TimeRange {
    pub from: Option<DateTime<Utc>>,
    pub to: Option<DateTime<Utc>>,
}

impl TimeRange {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.from.is_none_or(|f| t >= f) && self.to.is_none_or(|e| t < e)
    }
}

pub struct Store {
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store").finish_non_exhaustive()
    }
}

impl Store {
    /// Opens (creating if needed) a database file. Commits are fsynced
    /// before they are acknowledged.
    pub fn open(path: &Path) -> Result<Self> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "FULL")?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self> {
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.set_prepared_statement_cache_capacity(64);
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        conn.execute_batch(schema::SCHEMA)?;
        for cat in &CATEGORIES {
            conn.execute(
                "INSERT INTO intervention_categories (category_id, name) VALUES (?1, ?2)
                 ON CONFLICT(category_id) DO UPDATE SET name = excluded.name",
                params![cat.category_id, cat.name],
            )?;
        }
        for action in PopupAction::ALL {
            conn.execute(
                "INSERT INTO popup_actions (action_id, description) VALUES (?1, ?2)
                 ON CONFLICT(action_id) DO UPDATE SET description = excluded.description",
                params![action.code(), action.description()],
            )?;
        }
        Ok(Self { conn: Mutex::new(conn) })
    }

    /// Runs `f` inside an IMMEDIATE transaction, committing only on `Ok`.
    /// All writers go through here, which serializes them.
    pub fn transaction<T>(&self, f: impl FnOnce(&StoreTx<'_>) -> Result<T>) -> Result<T> {
        let mut conn = self.conn.lock();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let out = f(&StoreTx { conn: &tx })?;
        tx.commit()?;
        Ok(out)
    }

    pub fn read<T>(&self, f: impl FnOnce(&StoreTx<'_>) -> Result<T>) -> Result<T> {
        let conn = self.conn.lock();
        f(&StoreTx { conn: &conn })
    }

    pub fn append_event(&self, event: &NewActivityEvent) -> Result<Appended> {
        self.transaction(|tx| tx.append_event(event))
    }

    pub fn query_user_events(&self, user_id: UserId, range: TimeRange) -> Result<Vec<ActivityEvent>> {
        self.read(|tx| tx.query_user_events(user_id, range))
    }

    pub fn interventions_today(
        &self,
        user_id: UserId,
        now: DateTime<Utc>,
        tz: Tz,
    ) -> Result<InterventionsToday> {
        self.read(|tx| tx.interventions_today(user_id, now, tz))
    }

    pub fn seed_corpus(&self, corpus: &Corpus) -> Result<usize> {
        self.transaction(|tx| tx.seed_corpus(corpus))
    }

    pub fn corpus(&self) -> Result<Option<Corpus>> {
        self.read(|tx| tx.corpus())
    }

    /// Writes every activity row in the export format; returns the row count.
    pub fn export_events<W: Write>(&self, out: W) -> Result<usize> {
        let records = self.read(|tx| tx.export_records())?;
        write_events(out, &records)?;
        Ok(records.len())
    }

    pub fn export_events_to_path(&self, path: &Path) -> Result<usize> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        let n = self.export_events(&mut out)?;
        out.flush()?;
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        Ok(n)
    }
}

/// Query surface shared by transactions and plain reads.
pub struct StoreTx<'a> {
    conn: &'a Connection,
}

fn uuid_col(row: &Row<'_>, idx: usize) -> rusqlite::Result<Uuid> {
    let raw: String = row.get(idx)?;
    Uuid::parse_str(&raw).map_err(|e| {
        rusqlite::Error::FromSqlConversionFailure(idx, rusqlite::types::Type::Text, Box::new(e))
    })
}

fn parsed_col<T>(row: &Row<'_>, idx: usize) -> rusqlite::Result<T>
where
    T: std::str::FromStr<Err = Error>,
{
    let raw: String = row.get(idx)?;
    raw.parse().map_err(|e: Error| {
        rusqlite::Error::FromSqlConversionFailure(idx, rusqlite::types::Type::Text, Box::new(e))
    })
}

const USER_COLUMNS: &str =
    "user_id, username, password_digest, app_variant, language, registration_code, created_at";

fn user_from_row(row: &Row<'_>) -> rusqlite::Result<UserAccount> {
    Ok(UserAccount {
        user_id: row.get(0)?,
        username: row.get(1)?,
        password_digest: row.get(2)?,
        app_variant: parsed_col(row, 3)?,
        language: parsed_col(row, 4)?,
        registration_code: row.get(5)?,
        created_at: from_millis(row.get(6)?),
    })
}

const EVENT_COLUMNS: &str = "event_id, client_event_id, user_id, popup_action, msg_id, \
     post_length, post_hash, image_hash, timestamp";

fn event_from_row(row: &Row<'_>) -> rusqlite::Result<ActivityEvent> {
    let code: u8 = row.get(3)?;
    Ok(ActivityEvent {
        event_id: row.get(0)?,
        client_event_id: uuid_col(row, 1)?,
        user_id: row.get(2)?,
        popup_action: PopupAction::from_code(code).map_err(|e| {
            rusqlite::Error::FromSqlConversionFailure(3, rusqlite::types::Type::Integer, Box::new(e))
        })?,
        message_id: row.get(4)?,
        post_length: row.get(5)?,
        post_hash: parsed_col(row, 6)?,
        image_hash: parsed_col(row, 7)?,
        timestamp: from_millis(row.get(8)?),
    })
}

const TOKEN_COLUMNS: &str =
    "token, user_id, msg_id, issued_at, expires_at, state, attempt_client_event_id, ordinal";

fn token_from_row(row: &Row<'_>) -> rusqlite::Result<InterventionToken> {
    Ok(InterventionToken {
        token: uuid_col(row, 0)?,
        user_id: row.get(1)?,
        message_id: row.get(2)?,
        issued_at: from_millis(row.get(3)?),
        expires_at: from_millis(row.get(4)?),
        state: parsed_col(row, 5)?,
        attempt_client_event_id: uuid_col(row, 6)?,
        ordinal: row.get(7)?,
    })
}

impl StoreTx<'_> {
    // Statements are prepared once per connection and reused.
    fn query_row<T, P: rusqlite::Params>(
        &self,
        sql: &str,
        params: P,
        f: impl FnOnce(&Row<'_>) -> rusqlite::Result<T>,
    ) -> rusqlite::Result<T> {
        self.conn.prepare_cached(sql)?.query_row(params, f)
    }

    fn execute<P: rusqlite::Params>(&self, sql: &str, params: P) -> rusqlite::Result<usize> {
        self.conn.prepare_cached(sql)?.execute(params)
    }

    // ---- users ---------------------------------------------------------

    /// Inserts an account and derives its registration code from the
    /// assigned id.
    pub fn insert_user(
        &self,
        username: &str,
        password_digest: &str,
        app_variant: AppVariant,
        language: Language,
        created_at: DateTime<Utc>,
        server_secret: &str,
    ) -> Result<UserAccount> {
        if username.is_empty() {
            return Err(Error::validation("username must not be empty"));
        }
        if self.user_by_name(username)?.is_some() {
            return Err(Error::Conflict(format!("username {username:?} is taken")));
        }
        self.execute(
            "INSERT INTO users_table (username, password_digest, app_variant, language, \
             registration_code, created_at) VALUES (?1, ?2, ?3, ?4, '', ?5)",
            params![
                username,
                password_digest,
                app_variant.as_str(),
                language.as_str(),
                to_millis(created_at)
            ],
        )?;
        let user_id = self.conn.last_insert_rowid();
        let code = make_registration_code(user_id, server_secret)?;
        self.execute(
            "UPDATE users_table SET registration_code = ?1 WHERE user_id = ?2",
            params![code, user_id],
        )?;
        self.user(user_id)?
            .ok_or_else(|| Error::NotFound(format!("user {user_id} vanished after insert")))
    }

    pub fn user(&self, user_id: UserId) -> Result<Option<UserAccount>> {
        Ok(self
            .query_row(
                &format!("SELECT {USER_COLUMNS} FROM users_table WHERE user_id = ?1"),
                [user_id],
                user_from_row,
            )
            .optional()?)
    }

    pub fn user_by_name(&self, username: &str) -> Result<Option<UserAccount>> {
        Ok(self
            .query_row(
                &format!("SELECT {USER_COLUMNS} FROM users_table WHERE username = ?1"),
                [username],
                user_from_row,
            )
            .optional()?)
    }

    pub fn users(&self) -> Result<Vec<UserAccount>> {
        let mut stmt = self
            .conn
            .prepare_cached(&format!("SELECT {USER_COLUMNS} FROM users_table ORDER BY user_id"))?;
        let rows = stmt.query_map([], user_from_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    // ---- sessions ------------------------------------------------------

    pub fn insert_session(
        &self,
        session_token: &str,
        user_id: UserId,
        issued_at: DateTime<Utc>,
        expires_at: DateTime<Utc>,
    ) -> Result<()> {
        self.execute(
            "INSERT INTO sessions (session_token, user_id, issued_at, expires_at) VALUES (?1, ?2, ?3, ?4)",
            params![session_token, user_id, to_millis(issued_at), to_millis(expires_at)],
        )?;
        Ok(())
    }

    /// The user owning an unexpired session.
    pub fn session_user(&self, session_token: &str, now: DateTime<Utc>) -> Result<Option<UserId>> {
        Ok(self
            .query_row(
                "SELECT user_id FROM sessions WHERE session_token = ?1 AND expires_at > ?2",
                params![session_token, to_millis(now)],
                |r| r.get(0),
            )
            .optional()?)
    }

    pub fn delete_session(&self, session_token: &str) -> Result<bool> {
        Ok(self
            .execute("DELETE FROM sessions WHERE session_token = ?1", [session_token])?
            > 0)
    }

    pub fn purge_sessions(&self, now: DateTime<Utc>) -> Result<usize> {
        Ok(self
            .execute("DELETE FROM sessions WHERE expires_at <= ?1", [to_millis(now)])?)
    }

    // ---- corpus --------------------------------------------------------

    pub fn seed_corpus(&self, corpus: &Corpus) -> Result<usize> {
        let mut stmt = self.conn.prepare_cached(
            "INSERT INTO interventions (msg_id, category_id, risk_value, text_en, text_de)
             VALUES (?1, ?2, ?3, ?4, ?5)
             ON CONFLICT(msg_id) DO UPDATE SET category_id = excluded.category_id,
                 risk_value = excluded.risk_value, text_en = excluded.text_en,
                 text_de = excluded.text_de",
        )?;
        for m in corpus.messages() {
            stmt.execute(params![m.message_id, m.category_id, m.risk_value, m.text_en, m.text_de])?;
        }
        Ok(corpus.messages().len())
    }

    /// `None` when the corpus has not been seeded.
    pub fn corpus(&self) -> Result<Option<Corpus>> {
        let mut stmt = self.conn.prepare_cached(
            "SELECT msg_id, category_id, risk_value, text_en, text_de FROM interventions ORDER BY msg_id",
        )?;
        let messages = stmt
            .query_map([], |r| {
                Ok(InterventionMessage {
                    message_id: r.get(0)?,
                    category_id: r.get(1)?,
                    risk_value: r.get(2)?,
                    text_en: r.get(3)?,
                    text_de: r.get(4)?,
                })
            })?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        if messages.is_empty() {
            return Ok(None);
        }
        Corpus::new(messages).map(Some)
    }

    fn message_exists(&self, id: MessageId) -> Result<bool> {
        Ok(self
            .query_row("SELECT 1 FROM interventions WHERE msg_id = ?1", [id], |_| Ok(()))
            .optional()?
            .is_some())
    }

    // ---- events --------------------------------------------------------

    /// Idempotent insert keyed by `client_event_id`.
    pub fn append_event(&self, event: &NewActivityEvent) -> Result<Appended> {
        event.validate()?;
        if let Some(existing) = self.event_by_client_id(event.client_event_id)? {
            if existing.user_id != event.user_id {
                return Err(Error::Conflict(format!(
                    "client_event_id {} already used by another user",
                    event.client_event_id
                )));
            }
            return Ok(Appended { event_id: existing.event_id, inserted: false });
        }
        let user = self
            .user(event.user_id)?
            .ok_or_else(|| Error::validation(format!("event references unknown user {}", event.user_id)))?;
        if let Some(id) = event.message_id {
            if !self.message_exists(id)? {
                return Err(Error::validation(format!("event references unknown message {id}")));
            }
        }
        if event.popup_action.follows_intervention()
            && event.message_id.is_some() != (user.app_variant == AppVariant::V2)
        {
            return Err(Error::validation(format!(
                "action {} must carry a message id exactly for V2 users",
                event.popup_action.code()
            )));
        }
        self.execute(
            "INSERT INTO user_activity (client_event_id, user_id, popup_action, msg_id, post_length, \
             post_hash, image_hash, timestamp, client_timestamp, intervention_token) \
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10)",
            params![
                event.client_event_id.to_string(),
                event.user_id,
                event.popup_action.code(),
                event.message_id,
                event.post_length,
                event.post_hash.as_str(),
                event.image_hash.as_str(),
                to_millis(event.timestamp),
                event.client_timestamp.map(to_millis),
                event.intervention_token.map(|t| t.to_string()),
            ],
        )?;
        Ok(Appended { event_id: self.conn.last_insert_rowid(), inserted: true })
    }

    pub fn event_by_client_id(&self, client_event_id: Uuid) -> Result<Option<ActivityEvent>> {
        Ok(self
            .query_row(
                &format!("SELECT {EVENT_COLUMNS} FROM user_activity WHERE client_event_id = ?1"),
                [client_event_id.to_string()],
                event_from_row,
            )
            .optional()?)
    }

    /// The event that resolved `token`, if any.
    pub fn event_for_token(&self, token: Uuid) -> Result<Option<ActivityEvent>> {
        Ok(self
            .query_row(
                &format!("SELECT {EVENT_COLUMNS} FROM user_activity WHERE intervention_token = ?1"),
                [token.to_string()],
                event_from_row,
            )
            .optional()?)
    }

    /// Events of one user in `range`, ascending by timestamp then event_id.
    pub fn query_user_events(&self, user_id: UserId, range: TimeRange) -> Result<Vec<ActivityEvent>> {
        if self.user(user_id)?.is_none() {
            return Err(Error::NotFound(format!("user {user_id}")));
        }
        let mut stmt = self.conn.prepare_cached(&format!(
            "SELECT {EVENT_COLUMNS} FROM user_activity
             WHERE user_id = ?1 AND timestamp >= ?2 AND timestamp < ?3
             ORDER BY timestamp, event_id"
        ))?;
        let from = range.from.map_or(i64::MIN, to_millis);
        let to = range.to.map_or(i64::MAX, to_millis);
        let rows = stmt.query_map(params![user_id, from, to], event_from_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn event_count(&self) -> Result<usize> {
        let n: i64 = self
            .query_row("SELECT COUNT(*) FROM user_activity", [], |r| r.get(0))?;
        Ok(n as usize)
    }

    /// All activity rows joined with the owner's app variant, by event_id.
    pub fn export_records(&self) -> Result<Vec<ExportRecord>> {
        let mut stmt = self.conn.prepare_cached(
            "SELECT a.event_id, a.client_event_id, a.user_id, a.popup_action, a.msg_id, \
             a.post_length, a.post_hash, a.image_hash, a.timestamp, u.app_variant \
             FROM user_activity a JOIN users_table u ON u.user_id = a.user_id ORDER BY a.event_id",
        )?;
        let rows = stmt.query_map([], |r| {
            Ok(ExportRecord { event: event_from_row(r)?, app_variant: parsed_col(r, 9)? })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    // ---- intervention tokens -------------------------------------------

    pub fn insert_token(&self, token: &InterventionToken) -> Result<()> {
        self.execute(
            &format!("INSERT INTO intervention_tokens ({TOKEN_COLUMNS}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)"),
            params![
                token.token.to_string(),
                token.user_id,
                token.message_id,
                to_millis(token.issued_at),
                to_millis(token.expires_at),
                token.state.as_str(),
                token.attempt_client_event_id.to_string(),
                token.ordinal,
            ],
        )?;
        Ok(())
    }

    pub fn token(&self, token: Uuid) -> Result<Option<InterventionToken>> {
        Ok(self
            .query_row(
                &format!("SELECT {TOKEN_COLUMNS} FROM intervention_tokens WHERE token = ?1"),
                [token.to_string()],
                token_from_row,
            )
            .optional()?)
    }

    pub fn token_by_attempt(&self, attempt_client_event_id: Uuid) -> Result<Option<InterventionToken>> {
        Ok(self
            .query_row(
                &format!(
                    "SELECT {TOKEN_COLUMNS} FROM intervention_tokens WHERE attempt_client_event_id = ?1"
                ),
                [attempt_client_event_id.to_string()],
                token_from_row,
            )
            .optional()?)
    }

    /// Compare-and-set on the token state; `false` if it was not in `from`.
    pub fn transition_token(&self, token: Uuid, from: TokenState, to: TokenState) -> Result<bool> {
        Ok(self.execute(
            "UPDATE intervention_tokens SET state = ?1 WHERE token = ?2 AND state = ?3",
            params![to.as_str(), token.to_string(), from.as_str()],
        )? == 1)
    }

    pub fn expire_tokens(&self, now: DateTime<Utc>) -> Result<usize> {
        Ok(self.execute(
            "UPDATE intervention_tokens SET state = 'EXPIRED' WHERE state = 'PENDING' AND expires_at <= ?1",
            [to_millis(now)],
        )?)
    }

    /// Issuance log of one user, oldest first.
    pub fn issuance_history(&self, user_id: UserId) -> Result<Vec<IssuedIntervention>> {
        let mut stmt = self.conn.prepare_cached(
            "SELECT token, issued_at, msg_id FROM intervention_tokens WHERE user_id = ?1 ORDER BY issued_at, rowid",
        )?;
        let rows = stmt.query_map([user_id], |r| {
            Ok(IssuedIntervention {
                token: uuid_col(r, 0)?,
                issued_at: from_millis(r.get(1)?),
                message_id: r.get(2)?,
            })
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn all_tokens(&self) -> Result<Vec<InterventionToken>> {
        let mut stmt = self.conn.prepare_cached(&format!(
            "SELECT {TOKEN_COLUMNS} FROM intervention_tokens ORDER BY user_id, issued_at, rowid"
        ))?;
        let rows = stmt.query_map([], token_from_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn interventions_today(
        &self,
        user_id: UserId,
        now: DateTime<Utc>,
        tz: Tz,
    ) -> Result<InterventionsToday> {
        if self.user(user_id)?.is_none() {
            return Err(Error::NotFound(format!("user {user_id}")));
        }
        let history = self.issuance_history(user_id)?;
        let today = calendar_day(now, tz);
        let mut out = InterventionsToday {
            last_issued_at: history.iter().map(|h| h.issued_at).max(),
            ..Default::default()
        };
        for h in history.iter().filter(|h| calendar_day(h.issued_at, tz) == today) {
            out.count += 1;
            out.shown_message_ids.extend(h.message_id);
        }
        Ok(out)
    }
}
