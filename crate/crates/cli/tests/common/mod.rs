#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use chrono::{DateTime, TimeZone, Utc};

pub fn nudgelab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nudgelab"))
}

pub fn run(args: &[&str], dir: &Path) -> Output {
    nudgelab().args(args).current_dir(dir).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn at(d: u32, h: u32, m: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 3, d, h, m, 0).unwrap()
}

pub const EXPORT_HEADER: &str =
    "event_id,client_event_id,user_id,app_variant,popup_action,message_id,post_length,post_hash,image_hash,timestamp_iso8601";

/// One export line. Hashes are fixed placeholders of the right shape.
pub fn export_row(event_id: u64, user: i64, variant: &str, action: u8, message: Option<u8>, t: DateTime<Utc>) -> String {
    export_row_keyed(event_id, event_id, user, variant, action, message, t)
}

/// Like [`export_row`] with an explicit client_event_id key, for planting
/// resubmissions.
pub fn export_row_keyed(
    event_id: u64,
    key: u64,
    user: i64,
    variant: &str,
    action: u8,
    message: Option<u8>,
    t: DateTime<Utc>,
) -> String {
    format!(
        "{event_id},00000000-0000-4000-8000-{key:012},{user},{variant},{action},{},12,{},{},{}",
        message.map(|m| m.to_string()).unwrap_or_default(),
        "ab".repeat(32),
        "cd".repeat(32),
        t.format("%Y-%m-%dT%H:%M:%S%.3fZ")
    )
}

pub fn export_file(rows: &[String]) -> String {
    let mut s = String::from(EXPORT_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    s
}

/// (variable, [(n, mean, sd, printed se); 2]) for both groups.
pub type DescriptiveRow = (&'static str, [(usize, f64, f64, f64); 2]);

pub const DESCRIPTIVES: [DescriptiveRow; 8] = [
    ("#EDITS", [(10, 1.000, 0.816, 0.258), (12, 0.750, 0.622, 0.179)]),
    ("#POSTS", [(10, 4.300, 4.270, 1.350), (12, 3.500, 3.778, 1.091)]),
    ("#SHARES", [(10, 1.700, 2.263, 0.716), (12, 1.333, 2.146, 0.620)]),
    ("#PUBLICATIONS", [(10, 6.000, 4.190, 1.325), (12, 4.833, 5.408, 1.561)]),
    ("RSK", [(10, 4.025, 1.003, 0.317), (12, 4.396, 1.281, 0.370)]),
    ("CTRL", [(10, 4.667, 1.432, 0.453), (12, 3.389, 1.441, 0.416)]),
    ("BEN", [(10, 4.850, 0.727, 0.230), (12, 5.313, 0.765, 0.221)]),
    ("EIPC", [(10, 2.900, 1.233, 0.390), (12, 4.111, 1.072, 0.309)]),
];

pub fn descriptives_csv() -> String {
    let mut s = String::from("variable,group,n,mean,sd\n");
    for (name, groups) in DESCRIPTIVES {
        for (g, (n, mean, sd, _)) in groups.iter().enumerate() {
            s.push_str(&format!("{name},G{},{n},{mean},{sd}\n", g + 1));
        }
    }
    s
}
