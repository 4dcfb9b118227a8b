//! Network checkpoints: a raw little-endian `f64` parameter file plus a
//! text descriptor next to it.
//!
//! ```text
//! format densenet
//! version 1
//! layers 22x128 128x128 128x9
//! hidden tanh
//! heads softmax:8 sigmoid:1
//! params 20105
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{DenseNet, OutputHead};

pub const CHECKPOINT_VERSION: u32 = 1;

fn descriptor_path(bin: &Path) -> PathBuf {
    bin.with_extension("desc")
}

/// Writes `path` (parameters) and `path` with a `.desc` extension.
pub fn save_checkpoint(net: &DenseNet, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(net.param_count() * 8);
    for v in net.params() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;

    let layers: Vec<String> = net.shapes().iter().map(|(i, o)| format!("{i}x{o}")).collect();
    let heads: Vec<String> = net
        .heads()
        .iter()
        .map(|h| match h {
            OutputHead::Identity(n) => format!("identity:{n}"),
            OutputHead::Sigmoid(n) => format!("sigmoid:{n}"),
            OutputHead::Softmax(n) => format!("softmax:{n}"),
        })
        .collect();
    let desc = format!(
        "format densenet\nversion {CHECKPOINT_VERSION}\nlayers {}\nhidden tanh\nheads {}\nparams {}\n",
        layers.join(" "),
        heads.join(" "),
        net.param_count()
    );
    let desc_path = descriptor_path(path);
    fs::write(&desc_path, desc).map_err(|e| Error::io(desc_path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<DenseNet> {
    let desc_path = descriptor_path(path);
    let desc = fs::read_to_string(&desc_path).map_err(|e| Error::io(&desc_path, e))?;
    let bad = |m: &str| Error::Checkpoint(format!("{}: {m}", desc_path.display()));

    let mut shapes = None;
    let mut heads = None;
    let mut count = None;
    let mut version_ok = false;
    for line in desc.lines() {
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "format" if rest == "densenet" => {}
            "version" => version_ok = rest.parse() == Ok(CHECKPOINT_VERSION),
            "hidden" if rest == "tanh" => {}
            "layers" => {
                let parsed: Option<Vec<(usize, usize)>> = rest
                    .split(' ')
                    .map(|s| {
                        let (i, o) = s.split_once('x')?;
                        Some((i.parse().ok()?, o.parse().ok()?))
                    })
                    .collect();
                shapes = Some(parsed.ok_or_else(|| bad("bad layers line"))?);
            }
            "heads" => {
                let parsed: Option<Vec<OutputHead>> = rest
                    .split(' ')
                    .map(|s| {
                        let (kind, n) = s.split_once(':')?;
                        let n = n.parse().ok()?;
                        match kind {
                            "identity" => Some(OutputHead::Identity(n)),
                            "sigmoid" => Some(OutputHead::Sigmoid(n)),
                            "softmax" => Some(OutputHead::Softmax(n)),
                            _ => None,
                        }
                    })
                    .collect();
                heads = Some(parsed.ok_or_else(|| bad("bad heads line"))?);
            }
            "params" => count = Some(rest.parse::<usize>().map_err(|_| bad("bad params line"))?),
            "" => {}
            _ => return Err(bad(&format!("unexpected line `{line}`"))),
        }
    }
    if !version_ok {
        return Err(bad("missing or unsupported version"));
    }
    let shapes = shapes.ok_or_else(|| bad("missing layers"))?;
    let heads = heads.ok_or_else(|| bad("missing heads"))?;
    let count = count.ok_or_else(|| bad("missing params"))?;

    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != count * 8 {
        return Err(Error::Checkpoint(format!(
            "{}: {} bytes for {count} parameters",
            path.display(),
            bytes.len()
        )));
    }
    let params = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    DenseNet::from_parts(shapes, heads, params)
}
