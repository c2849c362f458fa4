//! Portable text format for parameter snapshots.
//!
//! ```text
//! nn-params v1
//! header <key> <value...>
//! tensor <name> <rank> <dim>...
//! <values, space separated, shortest round-trip decimal>
//! ```
//!
//! Header lines come first; each `tensor` line is followed by exactly one value line.

use std::fmt::Write as _;

use super::network::Network;
use super::spec::NetworkSpec;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &str = "nn-params v1";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NamedArrays {
    pub headers: Vec<(String, String)>,
    pub arrays: Vec<(String, Tensor)>,
}

impl NamedArrays {
    pub fn header(&self, key: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        for (k, v) in &self.headers {
            let _ = writeln!(out, "header {k} {v}");
        }
        for (name, t) in &self.arrays {
            let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            let _ = writeln!(out, "tensor {name} {} {}", dims.len(), dims.join(" "));
            let values: Vec<String> = t.data().iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", values.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(MAGIC) => {}
            Some(other) => return Err(Error::parse("parameter snapshot", format!("unsupported version `{other}`"))),
            None => return Err(Error::parse("parameter snapshot", "empty file")),
        }
        let mut out = NamedArrays::default();
        while let Some(line) = lines.next() {
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("header ") {
                let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                out.headers.push((k.to_string(), v.to_string()));
                continue;
            }
            let Some(rest) = line.strip_prefix("tensor ") else {
                return Err(Error::parse("parameter snapshot", format!("unexpected line `{line}`")));
            };
            let mut parts = rest.split_whitespace();
            let name = parts.next().ok_or_else(|| Error::parse("tensor line", "missing name"))?;
            let rank: usize = parts
                .next()
                .and_then(|r| r.parse().ok())
                .ok_or_else(|| Error::parse("tensor line", "missing rank"))?;
            let dims: Vec<usize> = parts
                .map(|d| d.parse::<usize>().map_err(|e| Error::parse("tensor dims", e)))
                .collect::<Result<_>>()?;
            if dims.len() != rank {
                return Err(Error::parse("tensor line", format!("rank {rank} but {} dims", dims.len())));
            }
            let values = lines
                .next()
                .ok_or_else(|| Error::parse("parameter snapshot", format!("missing values for {name}")))?;
            let data: Vec<f64> = values
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|e| Error::parse(name, e)))
                .collect::<Result<_>>()?;
            out.arrays.push((name.to_string(), Tensor::new(dims, data)?));
        }
        Ok(out)
    }
}

impl Network {
    /// The spec travels as a JSON header so the file is self-describing.
    pub fn to_named(&self, prefix: &str) -> NamedArrays {
        let mut named = NamedArrays::default();
        named.headers.push((
            format!("{prefix}spec"),
            serde_json::to_string(self.spec()).expect("spec serializes"),
        ));
        for (name, t) in self.named_params() {
            named.arrays.push((format!("{prefix}{name}"), t.clone()));
        }
        named
    }

    pub fn from_named(named: &NamedArrays, prefix: &str) -> Result<Self> {
        let spec_json = named
            .header(&format!("{prefix}spec"))
            .ok_or_else(|| Error::parse("parameter snapshot", format!("missing {prefix}spec header")))?;
        let spec: NetworkSpec = serde_json::from_str(spec_json).map_err(|e| Error::parse("network spec", e))?;
        let params = named
            .arrays
            .iter()
            .filter(|(n, _)| {
                n.strip_prefix(prefix)
                    .is_some_and(|rest| rest.split('.').next().is_some_and(|i| i.parse::<usize>().is_ok()))
            })
            .map(|(_, t)| t.clone())
            .collect();
        Network::from_parts(spec, params)
    }
}
