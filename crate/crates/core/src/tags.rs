//! Parsing for the `name:key=value,key=value` tags used in experiment configs.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tag {
    pub name: String,
    /// Raw remainder after the colon, kept for tags whose payload is a path.
    pub raw: Option<String>,
    pub params: BTreeMap<String, String>,
}

impl Tag {
    pub fn parse(s: &str) -> Result<Tag> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Config("empty tag".into()));
        }
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n.trim(), Some(r.trim())),
            None => (s, None),
        };
        let mut params = BTreeMap::new();
        if let Some(rest) = rest {
            for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
                if let Some((k, v)) = part.split_once('=') {
                    params.insert(k.trim().to_string(), v.trim().to_string());
                }
            }
        }
        Ok(Tag {
            name: name.to_ascii_lowercase(),
            raw: rest.map(str::to_string),
            params,
        })
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.params.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::Config(format!("tag `{}`: bad value for {key}: {v}", self.name))),
        }
    }

    pub fn get_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }
}
