//! Canonical JSON helpers shared by every on-disk and wire document.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Serializes with object keys sorted (via `serde_json::Value`'s ordered
/// map), two-space indentation and a trailing newline.
pub fn to_canonical_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let v = serde_json::to_value(value).map_err(|e| Error::Internal(e.to_string()))?;
    let mut out = serde_json::to_vec_pretty(&v).map_err(|e| Error::Internal(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Deserializes and reports the JSON path of the first offending field.
pub fn from_slice_with_path<T: DeserializeOwned>(bytes: &[u8]) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::schema(path, e.into_inner().to_string())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[derive(serde::Deserialize, Debug)]
    #[allow(dead_code)]
    struct Doc {
        items: Vec<Item>,
    }
    #[derive(serde::Deserialize, Debug)]
    #[allow(dead_code)]
    struct Item {
        id: String,
        n: u32,
    }

    #[test]
    fn keys_are_sorted() {
        let mut m = HashMap::new();
        m.insert("zeta", 1);
        m.insert("alpha", 2);
        let s = String::from_utf8(to_canonical_bytes(&m).unwrap()).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
        assert!(s.ends_with('\n'));
    }

    #[test]
    fn error_names_the_path() {
        let err = from_slice_with_path::<Doc>(br#"{"items":[{"id":"a","n":1},{"id":"b","n":"x"}]}"#)
            .unwrap_err();
        match err {
            Error::Schema { path, .. } => assert_eq!(path, "items[1].n"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
