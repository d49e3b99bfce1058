//! Delimited event export, format `events-v1`.
//!
//! Comma-separated, one header row, then one row per activity event:
//!
//! ```text
//! event_id,client_event_id,user_id,app_variant,popup_action,message_id,post_length,post_hash,image_hash,timestamp_iso8601
//! ```
//!
//! `message_id` is empty when absent. Timestamps are UTC with millisecond
//! precision (`2026-01-05T10:00:00.000Z`).

use std::io::{Read, Write};
use std::path::Path;

use uuid::Uuid;

use crate::domain::{ActivityEvent, AppVariant, PopupAction};
use crate::time::{format_iso, parse_iso};
use crate::{Error, Result};

pub const EXPORT_HEADER: [&str; 10] = [
    "event_id",
    "client_event_id",
    "user_id",
    "app_variant",
    "popup_action",
    "message_id",
    "post_length",
    "post_hash",
    "image_hash",
    "timestamp_iso8601",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportRecord {
    pub event: ActivityEvent,
    pub app_variant: AppVariant,
}

pub fn write_events<W: Write>(out: W, records: &[ExportRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(EXPORT_HEADER).map_err(io)?;
    for r in records {
        let e = &r.event;
        w.write_record([
            e.event_id.to_string(),
            e.client_event_id.to_string(),
            e.user_id.to_string(),
            r.app_variant.to_string(),
            e.popup_action.code().to_string(),
            e.message_id.map(|m| m.to_string()).unwrap_or_default(),
            e.post_length.to_string(),
            e.post_hash.to_string(),
            e.image_hash.to_string(),
            format_iso(e.timestamp),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events_from_path(path: &Path) -> Result<Vec<ExportRecord>> {
    let file = std::fs::File::open(path)?;
    read_events(file, &path.display().to_string())
}

/// Parses an `events-v1` file; errors name the file, line and column.
pub fn read_events<R: Read>(input: R, source: &str) -> Result<Vec<ExportRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let parse_err = |line: u64, field: &str, message: String| Error::Parse {
        file: source.to_owned(),
        line,
        field: field.to_owned(),
        message,
    };
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, "header", e.to_string()))?
        .clone();
    // A zero-byte file is an export of an empty store.
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    if headers.iter().ne(EXPORT_HEADER.iter().copied()) {
        return Err(parse_err(
            1,
            "header",
            format!("expected columns {}", EXPORT_HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            parse_err(e.position().map_or(0, |p| p.line()), "record", e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let col = |i: usize| row.get(i).unwrap_or("");
        fn num<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            s.parse::<T>().map_err(|e| format!("{s:?}: {e}"))
        }
        let field = |i: usize, m: String| parse_err(line, EXPORT_HEADER[i], m);
        let event = ActivityEvent {
            event_id: num(col(0)).map_err(|m| field(0, m))?,
            client_event_id: Uuid::parse_str(col(1)).map_err(|e| field(1, e.to_string()))?,
            user_id: num(col(2)).map_err(|m| field(2, m))?,
            popup_action: num::<u8>(col(4))
                .and_then(|c| PopupAction::from_code(c).map_err(|e| e.to_string()))
                .map_err(|m| field(4, m))?,
            message_id: match col(5) {
                "" => None,
                s => Some(num(s).map_err(|m| field(5, m))?),
            },
            post_length: num(col(6)).map_err(|m| field(6, m))?,
            post_hash: col(7).parse().map_err(|e: Error| field(7, e.to_string()))?,
            image_hash: col(8).parse().map_err(|e: Error| field(8, e.to_string()))?,
            timestamp: parse_iso(col(9)).map_err(|e| field(9, e.to_string()))?,
        };
        let app_variant = col(3).parse().map_err(|e: Error| field(3, e.to_string()))?;
        out.push(ExportRecord { event, app_variant });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::digest_content;
    use crate::time::from_millis;
    use proptest::prelude::*;

    fn record(id: i64, msg: Option<u16>, ts_ms: i64) -> ExportRecord {
        ExportRecord {
            event: ActivityEvent {
                event_id: id,
                client_event_id: Uuid::from_u128(id as u128 * 7919),
                user_id: 3,
                popup_action: if msg.is_some() { PopupAction::Post } else { PopupAction::ShareNoIntervention },
                message_id: msg,
                post_length: 12,
                post_hash: digest_content(3, "caption"),
                image_hash: digest_content(3, "IMG_1.jpg"),
                timestamp: from_millis(ts_ms),
            },
            app_variant: AppVariant::V2,
        }
    }

    #[test]
    fn empty_export_is_header_only() {
        let mut buf = Vec::new();
        write_events(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", EXPORT_HEADER.join(",")));
    }

    #[test]
    fn absent_message_id_is_empty_field() {
        let mut buf = Vec::new();
        write_events(&mut buf, &[record(1, None, 0)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert_eq!(row.split(',').nth(5), Some(""));
        assert!(row.ends_with("1970-01-01T00:00:00.000Z"));
    }

    #[test]
    fn bad_field_is_reported_with_line_and_column() {
        let mut buf = Vec::new();
        write_events(&mut buf, &[record(1, Some(4), 0), record(2, None, 5)]).unwrap();
        let text = String::from_utf8(buf).unwrap().replace(",V2,2,", ",V3,2,");
        match read_events(text.as_bytes(), "events.csv") {
            Err(Error::Parse { file, line, field, .. }) => {
                assert_eq!((file.as_str(), line, field.as_str()), ("events.csv", 3, "app_variant"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn export_import_round_trips(
            rows in proptest::collection::vec((proptest::option::of(1u16..=26), 0i64..4_000_000_000_000), 0..20)
        ) {
            let records: Vec<_> = rows.iter().enumerate()
                .map(|(i, (m, ts))| record(i as i64 + 1, *m, *ts))
                .collect();
            let mut buf = Vec::new();
            write_events(&mut buf, &records).unwrap();
            let back = read_events(buf.as_slice(), "mem").unwrap();
            prop_assert_eq!(back, records);
        }
    }
}
