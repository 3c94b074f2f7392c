//! CSV export of metric values.
//!
//! Every row carries a short hash of the configuration text that produced
//! it, so rows from different runs can be told apart after merging.

use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub config_hash: String,
    pub metric: String,
    pub value_db: f64,
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes rows with a `config_hash,metric,value_db` header.
pub fn write_csv<W: Write>(out: W, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let h = config_hash("n = 1024");
        assert_eq!(h.len(), 16);
        assert_eq!(h, config_hash("n = 1024"));
        assert_ne!(h, config_hash("n = 512"));
        let mut buf = Vec::new();
        write_csv(
            &mut buf,
            &[MetricRow { config_hash: h.clone(), metric: "evm_avg".into(), value_db: -31.25 }],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, format!("config_hash,metric,value_db\n{h},evm_avg,-31.25\n"));
    }
}
