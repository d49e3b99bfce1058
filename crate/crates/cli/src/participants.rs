//! `user_id,app_variant` lists, written by `simulate` and read by `report`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use nudgelab_core::domain::{AppVariant, UserId};
use nudgelab_core::{Error, Result};

const HEADER: [&str; 2] = ["user_id", "app_variant"];

pub fn write<W: Write>(out: W, participants: &BTreeMap<UserId, AppVariant>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(HEADER).map_err(csv_err)?;
    for (id, v) in participants {
        w.write_record([id.to_string(), v.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read<R: Read>(input: R, source: &str) -> Result<BTreeMap<UserId, AppVariant>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let err = |line: u64, field: &str, message: String| Error::Parse {
        file: source.to_owned(),
        line,
        field: field.to_owned(),
        message,
    };
    let headers = rdr.headers().map_err(|e| err(1, "header", e.to_string()))?;
    if headers.iter().ne(HEADER) {
        return Err(err(1, "header", format!("expected {}", HEADER.join(","))));
    }
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| err(e.position().map_or(0, |p| p.line()), "record", e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let id: UserId = rec[0].parse().map_err(|_| err(line, "user_id", format!("not an id: {:?}", &rec[0])))?;
        let variant: AppVariant = rec[1].parse().map_err(|e: Error| err(line, "app_variant", e.to_string()))?;
        if out.insert(id, variant).is_some() {
            return Err(err(line, "user_id", format!("user {id} listed twice")));
        }
    }
    Ok(out)
}

pub fn read_path(path: &Path) -> Result<BTreeMap<UserId, AppVariant>> {
    read(std::fs::File::open(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_rejects_duplicates() {
        let p = BTreeMap::from([(1, AppVariant::V1), (4, AppVariant::V2)]);
        let mut buf = Vec::new();
        write(&mut buf, &p).unwrap();
        assert_eq!(read(buf.as_slice(), "p.csv").unwrap(), p);
        let e = read("user_id,app_variant\n1,V1\n1,V2\n".as_bytes(), "p.csv").unwrap_err();
        assert!(e.to_string().contains("p.csv:3"), "{e}");
        assert!(read("user_id,app_variant\n1,V3\n".as_bytes(), "p.csv").is_err());
    }
}
