//! Five experiment tables plus the auxiliary token and session tables.

pub(crate) const SCHEMA: &str = r#"
CREATE TABLE IF NOT EXISTS users_table (
    user_id           INTEGER PRIMARY KEY,
    username          TEXT    NOT NULL UNIQUE CHECK (length(username) > 0),
    password_digest   TEXT    NOT NULL,
    app_variant       TEXT    NOT NULL CHECK (app_variant IN ('V1', 'V2')),
    language          TEXT    NOT NULL CHECK (language IN ('EN', 'DE')),
    registration_code TEXT    NOT NULL,
    created_at        INTEGER NOT NULL
);

CREATE TABLE IF NOT EXISTS intervention_categories (
    category_id INTEGER PRIMARY KEY,
    name        TEXT    NOT NULL
);

CREATE TABLE IF NOT EXISTS interventions (
    msg_id      INTEGER PRIMARY KEY CHECK (msg_id BETWEEN 1 AND 26),
    category_id INTEGER NOT NULL REFERENCES intervention_categories(category_id),
    risk_value  REAL    NOT NULL CHECK (risk_value >= 0),
    text_en     TEXT    NOT NULL,
    text_de     TEXT    NOT NULL
);

CREATE TABLE IF NOT EXISTS popup_actions (
    action_id   INTEGER PRIMARY KEY,
    description TEXT    NOT NULL
);

CREATE TABLE IF NOT EXISTS intervention_tokens (
    token                   TEXT    PRIMARY KEY,
    user_id                 INTEGER NOT NULL REFERENCES users_table(user_id),
    msg_id                  INTEGER REFERENCES interventions(msg_id),
    issued_at               INTEGER NOT NULL,
    expires_at              INTEGER NOT NULL,
    state                   TEXT    NOT NULL,
    attempt_client_event_id TEXT    NOT NULL UNIQUE,
    ordinal                 INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS intervention_tokens_user ON intervention_tokens(user_id, issued_at);

CREATE TABLE IF NOT EXISTS user_activity (
    event_id           INTEGER PRIMARY KEY,
    client_event_id    TEXT    NOT NULL UNIQUE,
    user_id            INTEGER NOT NULL REFERENCES users_table(user_id),
    popup_action       INTEGER NOT NULL REFERENCES popup_actions(action_id),
    msg_id             INTEGER REFERENCES interventions(msg_id),
    post_length        INTEGER NOT NULL CHECK (post_length >= 0),
    post_hash          TEXT    NOT NULL,
    image_hash         TEXT    NOT NULL,
    timestamp          INTEGER NOT NULL,
    client_timestamp   INTEGER,
    intervention_token TEXT    UNIQUE REFERENCES intervention_tokens(token)
);
CREATE INDEX IF NOT EXISTS user_activity_user_time ON user_activity(user_id, timestamp, event_id);

CREATE TABLE IF NOT EXISTS sessions (
    session_token TEXT    PRIMARY KEY,
    user_id       INTEGER NOT NULL REFERENCES users_table(user_id),
    issued_at     INTEGER NOT NULL,
    expires_at    INTEGER NOT NULL
);
"#;
