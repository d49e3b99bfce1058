use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::UserId;
use crate::{Error, Result};

/// 64 lowercase hex characters of a SHA-256 digest.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ContentDigest(String);

impl ContentDigest {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for ContentDigest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let well_formed =
            s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if well_formed {
            Ok(ContentDigest(s.to_owned()))
        } else {
            Err(Error::validation(format!(
                "digest must be 64 lowercase hex characters, got {s:?}"
            )))
        }
    }
}

impl TryFrom<String> for ContentDigest {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ContentDigest> for String {
    fn from(d: ContentDigest) -> String {
        d.0
    }
}

impl fmt::Display for ContentDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn sha256_hex(user_id: UserId, suffix: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(user_id.to_string().as_bytes());
    hasher.update(b":");
    hasher.update(suffix.as_bytes());
    hex::encode(hasher.finalize())
}

/// Pseudonym of a caption or image identity: SHA-256 over the UTF-8 bytes of
/// `"{user_id}:{content}"`, rendered as lowercase hex.
///
/// Every client (web UI, simulator) must produce exactly these bytes.
pub fn digest_content(user_id: UserId, content: &str) -> ContentDigest {
    ContentDigest(sha256_hex(user_id, content))
}

/// First 8 hex characters of SHA-256 over `"{user_id}:{server_secret}"`,
/// uppercased.
pub fn make_registration_code(user_id: UserId, server_secret: &str) -> Result<String> {
    if server_secret.is_empty() {
        return Err(Error::Configuration("server secret must not be empty".into()));
    }
    Ok(sha256_hex(user_id, server_secret)[..8].to_ascii_uppercase())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Fixtures computed with Python's hashlib.
    const HELLO_7: &str = "d7bd4189af84a56006c282c883b3be9b6dfd3b6f17dda26411893bb7a62bba87";
    const EMPTY_7: &str = "70fb8417d44dffa58b1b1525d36d36d564dac7ab2f672e6d48839b63c705dda6";
    const HELLO_8: &str = "215c244d2e0d5d45156b0561b9657f9ebf8107f746666e7fe4999379d99312a4";
    const UNICODE_42: &str = "88a1e3527e6281953b4d2acab858c0202e1c7335aa7e2cf12ef2639c2e724d27";

    #[test]
    fn digest_matches_reference_fixtures() {
        assert_eq!(digest_content(7, "hello").as_str(), HELLO_7);
        assert_eq!(digest_content(7, "").as_str(), EMPTY_7);
        assert_eq!(digest_content(8, "hello").as_str(), HELLO_8);
        assert_eq!(digest_content(42, "Grüße aus Köln 🌍").as_str(), UNICODE_42);
    }

    #[test]
    fn digest_is_salted_by_user() {
        assert_eq!(digest_content(7, "hello"), digest_content(7, "hello"));
        assert_ne!(digest_content(7, "hello"), digest_content(8, "hello"));
    }

    #[test]
    fn registration_code_fixture() {
        assert_eq!(make_registration_code(1, "s3cret").unwrap(), "12CF9AE6");
        assert_eq!(
            make_registration_code(1, "s3cret").unwrap(),
            make_registration_code(1, "s3cret").unwrap()
        );
        assert_ne!(
            make_registration_code(1, "secretA").unwrap(),
            make_registration_code(1, "secretB").unwrap()
        );
        assert!(matches!(make_registration_code(1, ""), Err(Error::Configuration(_))));
    }

    #[test]
    fn digest_parsing_rejects_malformed() {
        assert!(HELLO_7.parse::<ContentDigest>().is_ok());
        assert!(HELLO_7.to_uppercase().parse::<ContentDigest>().is_err());
        assert!(HELLO_7[..63].parse::<ContentDigest>().is_err());
        assert!(format!("{}g", &HELLO_7[..63]).parse::<ContentDigest>().is_err());
    }

    proptest! {
        #[test]
        fn digest_is_always_64_lower_hex(user in 1i64..1_000_000, content in ".*") {
            let d = digest_content(user, &content);
            prop_assert!(d.as_str().parse::<ContentDigest>().is_ok());
        }

        #[test]
        fn distinct_inputs_do_not_collide(a in ".{0,40}", b in ".{0,40}") {
            prop_assume!(a != b);
            prop_assert_ne!(digest_content(3, &a), digest_content(3, &b));
        }
    }
}
