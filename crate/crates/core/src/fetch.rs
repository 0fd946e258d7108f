//! Fetch single entities from the Wikidata entity-data endpoint, for
//! building small fixtures. Responses go through the same parser as dump
//! lines, so a fetched record equals the one ingest would produce.

use std::time::Duration;

use serde_json::Value;
use thiserror::Error;

use crate::ingest::parse_entity_value;
use crate::record::{EntityRecord, Qid};

pub const DEFAULT_ENDPOINT: &str = "https://www.wikidata.org/wiki/Special:EntityData";
/// Environment variable overriding the endpoint.
pub const ENDPOINT_ENV: &str = "NAMEBANK_WIKIDATA_ENDPOINT";

#[derive(Debug, Error)]
pub enum FetchError {
    #[error(transparent)]
    InvalidQid(#[from] crate::record::IdError),
    #[error("HTTP {status} fetching {url}")]
    Http { status: u16, url: String },
    #[error("request to {url} failed: {message}")]
    Transport { url: String, message: String },
    #[error("response from {url} is not a usable entity document: {message}")]
    Parse { url: String, message: String },
}

impl FetchError {
    /// Whether retrying the same request may succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(self, FetchError::Http { .. } | FetchError::Transport { .. })
    }

    pub fn status(&self) -> Option<u16> {
        match self {
            FetchError::Http { status, .. } => Some(*status),
            _ => None,
        }
    }
}

/// The endpoint from the environment, falling back to the public one.
pub fn endpoint_from_env() -> String {
    std::env::var(ENDPOINT_ENV)
        .ok()
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| DEFAULT_ENDPOINT.to_string())
}

pub fn entity_url(endpoint: &str, qid: Qid) -> String {
    format!("{}/{qid}.json", endpoint.trim_end_matches('/'))
}

/// Extract and parse the entity from an entity-data response document.
pub fn entity_from_document(document: Value, qid: Qid, url: &str) -> Result<EntityRecord, FetchError> {
    let parse_err = |message: String| FetchError::Parse {
        url: url.to_string(),
        message,
    };
    let Value::Object(mut root) = document else {
        return Err(parse_err("top level is not an object".into()));
    };
    let Some(Value::Object(mut entities)) = root.remove("entities") else {
        return Err(parse_err("missing \"entities\" object".into()));
    };
    // Redirected items are keyed by their target identifier.
    let entity = match entities.remove(&qid.to_string()) {
        Some(e) => e,
        None if entities.len() == 1 => entities.into_iter().next().unwrap().1,
        None => return Err(parse_err(format!("no entity {qid} in response"))),
    };
    parse_entity_value(entity)
        .map(|parsed| parsed.record)
        .map_err(|e| parse_err(e.to_string()))
}

/// Fetch one entity. The identifier is validated before any network call.
pub fn fetch_entity(qid: &str, endpoint: &str) -> Result<EntityRecord, FetchError> {
    let qid: Qid = qid.parse()?;
    let url = entity_url(endpoint, qid);
    let agent = ureq::Agent::new_with_config(
        ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .user_agent(concat!("namebank/", env!("CARGO_PKG_VERSION")))
            .build(),
    );
    let mut response = agent.get(&url).call().map_err(|e| FetchError::Transport {
        url: url.clone(),
        message: e.to_string(),
    })?;
    let status = response.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(FetchError::Http { status, url });
    }
    let body = response
        .body_mut()
        .with_config()
        .limit(64 * 1024 * 1024)
        .read_to_string()
        .map_err(|e| FetchError::Transport {
            url: url.clone(),
            message: e.to_string(),
        })?;
    let document: Value = serde_json::from_str(&body).map_err(|e| FetchError::Parse {
        url: url.clone(),
        message: e.to_string(),
    })?;
    entity_from_document(document, qid, &url)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::q;

    #[test]
    fn invalid_qid_fails_before_network() {
        // An unroutable endpoint proves no request is attempted.
        let err = fetch_entity("Q0", "http://256.256.256.256").unwrap_err();
        assert!(matches!(err, FetchError::InvalidQid(_)));
        assert!(!err.is_retryable());
    }

    #[test]
    fn url_shape() {
        assert_eq!(
            entity_url("https://example.org/Special:EntityData/", q(7251)),
            "https://example.org/Special:EntityData/Q7251.json"
        );
    }

    #[test]
    fn redirected_entity_is_accepted() {
        let doc = serde_json::json!({"entities": {"Q2": {"id": "Q2", "labels": {}}}});
        let rec = entity_from_document(doc, q(1), "u").unwrap();
        assert_eq!(rec.qid, q(2));
    }

    #[test]
    fn document_without_entities_is_a_parse_error() {
        let err = entity_from_document(serde_json::json!([1]), q(1), "u").unwrap_err();
        assert!(matches!(err, FetchError::Parse { .. }));
    }
}
