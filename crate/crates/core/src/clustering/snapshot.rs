//! Line-oriented cluster log: one line per cluster per slot.
//!
//! ```text
//! <slot> <head> <member>,<member>,...
//! <slot> isolated <member>,<member>,...
//! ```
//! The isolated line is written only when some UAV is isolated.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::task::NodeId;

use super::ClusterState;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotLine {
    pub slot: u64,
    /// `None` for the isolated set.
    pub head: Option<NodeId>,
    pub members: BTreeSet<NodeId>,
}

fn join_ids<'a>(ids: impl IntoIterator<Item = &'a NodeId>) -> String {
    let mut s = String::new();
    for (i, id) in ids.into_iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{id}");
    }
    s
}

pub fn write_snapshot(out: &mut String, slot: u64, state: &ClusterState) {
    for c in &state.clusters {
        let _ = writeln!(out, "{slot} {} {}", c.head, join_ids(&c.members));
    }
    if !state.isolated.is_empty() {
        let _ = writeln!(out, "{slot} isolated {}", join_ids(&state.isolated));
    }
}

pub fn parse_snapshot(text: &str) -> Result<Vec<SnapshotLine>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let bad = || Error::InvalidInput(format!("cluster log line {}: `{line}`", n + 1));
            let mut parts = line.split(' ');
            let slot = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            let head = match parts.next().ok_or_else(bad)? {
                "isolated" => None,
                h => Some(h.parse().map_err(|_| bad())?),
            };
            let members = parts
                .next()
                .ok_or_else(bad)?
                .split(',')
                .map(|m| m.parse().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            if parts.next().is_some() {
                return Err(bad());
            }
            Ok(SnapshotLine { slot, head, members })
        })
        .collect()
}
