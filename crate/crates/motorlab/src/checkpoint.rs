//! Plain-text network checkpoints with bit-exact round trips.
//!
//! ```text
//! motorlab-checkpoint 1
//! architecture BilateralCC units 10 layers 2 inputs 16 outputs 6
//! cross_talk_severed false
//! tensor dom.hidden0.weight dominant weight 5 16 frozen false
//! 3fd0000000000000 bfb999999999999a ...
//! ```
//!
//! Each tensor header is followed by one line of IEEE-754 bit patterns in
//! hex, row-major.

use std::fmt::Write as _;
use std::path::Path;

use motorlab_core::network::{Group, Role};
use motorlab_core::{ArchitectureConfig, ArchitectureKind, NetworkParams};

use crate::{Error, Result};

const MAGIC: &str = "motorlab-checkpoint 1";

pub fn to_string(params: &NetworkParams) -> String {
    let c = &params.config;
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "architecture {} units {} layers {} inputs {} outputs {}", c.kind.name(), c.units, c.layers, c.inputs, c.outputs).unwrap();
    writeln!(out, "cross_talk_severed {}", params.cross_talk_severed).unwrap();
    for (t, frozen) in params.tensors.iter().zip(&params.frozen) {
        writeln!(out, "tensor {} {} {} {} {} frozen {}", t.name, t.group.name(), t.role.name(), t.rows, t.cols, frozen).unwrap();
        let hex: Vec<String> = t.data.iter().map(|x| format!("{:016x}", x.to_bits())).collect();
        writeln!(out, "{}", hex.join(" ")).unwrap();
    }
    out
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::Checkpoint { line, msg: msg.into() }
}

fn parse_kind(s: &str) -> Option<ArchitectureKind> {
    [ArchitectureKind::Unilateral, ArchitectureKind::Bilateral, ArchitectureKind::BilateralCC]
        .into_iter()
        .find(|k| k.name() == s)
}

fn parse_bool(s: &str, line: usize) -> Result<bool> {
    s.parse().map_err(|_| bad(line, format!("expected true/false, got `{s}`")))
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|_| bad(line, format!("expected an integer, got `{s}`")))
}

/// Parses a checkpoint; tensor names, groups, roles and shapes must match the
/// architecture's own enumeration.
pub fn from_str(text: &str) -> Result<NetworkParams> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| lines.next().ok_or_else(|| bad(0, format!("unexpected end of file, expected {what}")));

    let (n, magic) = next("header")?;
    if magic != MAGIC {
        return Err(bad(n, "not a motorlab checkpoint"));
    }
    let (n, arch) = next("architecture")?;
    let f: Vec<&str> = arch.split_whitespace().collect();
    if f.len() != 10 || f[0] != "architecture" || f[2] != "units" || f[4] != "layers" || f[6] != "inputs" || f[8] != "outputs" {
        return Err(bad(n, "malformed architecture line"));
    }
    let kind = parse_kind(f[1]).ok_or_else(|| bad(n, format!("unknown architecture `{}`", f[1])))?;
    let config = ArchitectureConfig {
        kind,
        units: parse_usize(f[3], n)?,
        layers: parse_usize(f[5], n)?,
        inputs: parse_usize(f[7], n)?,
        outputs: parse_usize(f[9], n)?,
    };
    let mut params = NetworkParams::zeros(config)?;

    let (n, cc) = next("cross_talk_severed")?;
    match cc.split_whitespace().collect::<Vec<_>>()[..] {
        ["cross_talk_severed", v] => params.cross_talk_severed = parse_bool(v, n)?,
        _ => return Err(bad(n, "expected cross_talk_severed")),
    }

    for i in 0..params.tensors.len() {
        let (n, header) = next("tensor header")?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 8 || f[0] != "tensor" || f[6] != "frozen" {
            return Err(bad(n, "malformed tensor header"));
        }
        let t = &params.tensors[i];
        let group = Group::from_name(f[2]).ok_or_else(|| bad(n, format!("unknown group `{}`", f[2])))?;
        let role = Role::from_name(f[3]).ok_or_else(|| bad(n, format!("unknown role `{}`", f[3])))?;
        let (rows, cols) = (parse_usize(f[4], n)?, parse_usize(f[5], n)?);
        if f[1] != t.name || group != t.group || role != t.role || rows != t.rows || cols != t.cols {
            return Err(bad(n, format!("tensor `{}` does not match the architecture (expected `{}` {}x{})", f[1], t.name, t.rows, t.cols)));
        }
        params.frozen[i] = parse_bool(f[7], n)?;
        let (n, values) = next("tensor values")?;
        let data: Vec<f64> = values
            .split_whitespace()
            .map(|h| u64::from_str_radix(h, 16).map(f64::from_bits).map_err(|_| bad(n, format!("bad value `{h}`"))))
            .collect::<Result<_>>()?;
        if data.len() != rows * cols {
            return Err(bad(n, format!("expected {} values, found {}", rows * cols, data.len())));
        }
        params.tensors[i].data = data;
    }
    if let Some((n, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(bad(n, format!("trailing content `{extra}`")));
    }
    Ok(params)
}

pub fn save(params: &NetworkParams, path: &Path) -> Result<()> {
    crate::write_file(path, to_string(params))
}

pub fn load(path: &Path) -> Result<NetworkParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use motorlab_core::checks::perturbed_params;

    #[test]
    fn round_trip_is_bit_exact() {
        for kind in [ArchitectureKind::Unilateral, ArchitectureKind::Bilateral, ArchitectureKind::BilateralCC] {
            let mut p = perturbed_params(kind, 7).unwrap();
            p.frozen[0] = true;
            p.tensors[0].data[0] = -0.0;
            p.cross_talk_severed = kind == ArchitectureKind::BilateralCC;
            let back = from_str(&to_string(&p)).unwrap();
            assert_eq!(to_string(&back), to_string(&p));
            for (a, b) in p.tensors.iter().zip(&back.tensors) {
                assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
            assert_eq!(back.frozen, p.frozen);
            assert_eq!(back.cross_talk_severed, p.cross_talk_severed);
        }
    }

    #[test]
    fn rejects_damage() {
        let p = perturbed_params(ArchitectureKind::Bilateral, 1).unwrap();
        let text = to_string(&p);
        assert!(from_str(&text.replacen("motorlab-checkpoint 1", "other", 1)).is_err());
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(from_str(&truncated).is_err());
        let mut lines: Vec<&str> = text.lines().collect();
        let short = lines[4].rsplit_once(' ').unwrap().0.to_string();
        lines[4] = &short;
        assert!(matches!(from_str(&lines.join("\n")), Err(Error::Checkpoint { line: 5, .. })));
    }
}
