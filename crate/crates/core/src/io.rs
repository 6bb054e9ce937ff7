//! File formats: the `DMTS` binary snapshot sequence, text edge lists and
//! `key=value` configuration files.
//!
//! A `DMTS` file is the magic `DMTS`, a version byte `0x01`, then `n`, `L`
//! and `T` as little-endian `u32`, followed by `T` snapshots of `L` layers.
//! Each layer is the full `n x n` matrix bit-packed row-major into
//! `ceil(n^2 / 8)` bytes, most significant bit first. The first snapshot is
//! the initial state of the series.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::AdjacencySnapshot;

pub const DMTS_MAGIC: &[u8; 4] = b"DMTS";
pub const DMTS_VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 12;

fn layer_bytes(n: usize) -> usize {
    (n * n).div_ceil(8)
}

/// Serializes a snapshot sequence. All snapshots must share `n` and `L`.
pub fn write_dmts<W: Write>(mut w: W, snapshots: &[AdjacencySnapshot]) -> Result<()> {
    let (n, layers) = snapshots.first().map_or((0, 0), |s| (s.n(), s.layers()));
    if snapshots.iter().any(|s| s.n() != n || s.layers() != layers) {
        return Err(Error::usage("all snapshots in a file must have the same dimensions"));
    }
    let as_u32 = |x: usize, what: &str| {
        u32::try_from(x).map_err(|_| Error::usage(format!("{what} = {x} does not fit the file header")))
    };
    w.write_all(DMTS_MAGIC)?;
    w.write_all(&[DMTS_VERSION])?;
    for (x, what) in [(n, "n"), (layers, "L"), (snapshots.len(), "T")] {
        w.write_all(&as_u32(x, what)?.to_le_bytes())?;
    }
    let mut buf = vec![0u8; layer_bytes(n)];
    for snap in snapshots {
        for l in 0..layers {
            buf.fill(0);
            for i in 0..n {
                for j in 0..n {
                    if snap.get(i, j, l) {
                        let bit = i * n + j;
                        buf[bit / 8] |= 0x80 >> (bit % 8);
                    }
                }
            }
            w.write_all(&buf)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses a `DMTS` stream, validating the header, length and symmetry.
/// Errors carry the byte offset of the offending data.
pub fn read_dmts<R: Read>(mut r: R) -> Result<Vec<AdjacencySnapshot>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::parse_at_byte(bytes.len(), "truncated header"));
    }
    if &bytes[..4] != DMTS_MAGIC {
        return Err(Error::parse_at_byte(0, "bad magic, expected \"DMTS\""));
    }
    if bytes[4] != DMTS_VERSION {
        return Err(Error::parse_at_byte(4, format!("unsupported version {}", bytes[4])));
    }
    let read_u32 = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("four bytes")) as usize;
    let (n, layers, t) = (read_u32(5), read_u32(9), read_u32(13));
    let per_layer = layer_bytes(n);
    let expected = per_layer
        .checked_mul(layers)
        .and_then(|x| x.checked_mul(t))
        .and_then(|x| x.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::parse_at_byte(5, "header dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(Error::parse_at_byte(
            bytes.len().min(expected),
            format!("expected {expected} bytes for n={n}, L={layers}, T={t}, found {}", bytes.len()),
        ));
    }
    let mut out = Vec::with_capacity(t);
    let mut at = HEADER_LEN;
    for s in 0..t {
        let mut bits = vec![0u8; n * n * layers];
        for l in 0..layers {
            let layer = &bytes[at..at + per_layer];
            for i in 0..n {
                for j in 0..n {
                    let bit = i * n + j;
                    if layer[bit / 8] & (0x80 >> (bit % 8)) != 0 {
                        bits[(i * n + j) * layers + l] = 1;
                    }
                }
            }
            for i in 0..n {
                let bit = i * n + i;
                if bits[bit * layers + l] != 0 {
                    return Err(Error::parse_at_byte(
                        at + bit / 8,
                        format!("snapshot {s}, layer {l}: self-loop at node {i}"),
                    ));
                }
                for j in (i + 1)..n {
                    if bits[(i * n + j) * layers + l] != bits[(j * n + i) * layers + l] {
                        return Err(Error::parse_at_byte(
                            at + (i * n + j) / 8,
                            format!("snapshot {s}, layer {l}: asymmetric entry ({i}, {j})"),
                        ));
                    }
                }
            }
            at += per_layer;
        }
        out.push(AdjacencySnapshot::from_bits(n, layers, bits)?);
    }
    Ok(out)
}

pub fn save_dmts(path: &Path, snapshots: &[AdjacencySnapshot]) -> Result<()> {
    write_dmts(BufWriter::new(File::create(path)?), snapshots)
}

pub fn load_dmts(path: &Path) -> Result<Vec<AdjacencySnapshot>> {
    read_dmts(BufReader::new(File::open(path)?))
}

/// Maps external node labels to 1-based node indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeMap {
    labels: BTreeMap<String, usize>,
}

impl NodeMap {
    /// Parses `label,index` lines (comma or whitespace separated, `#`
    /// comments allowed). Indices are 1-based.
    pub fn parse<R: BufRead>(r: R) -> Result<Self> {
        let mut labels = BTreeMap::new();
        for (lineno, fields) in data_lines(r) {
            let fields = fields?;
            let [label, idx] = fields.as_slice() else {
                return Err(Error::parse_at_line(lineno, "expected `label,index`"));
            };
            let idx: usize = idx
                .parse()
                .ok()
                .filter(|&x| x >= 1)
                .ok_or_else(|| Error::parse_at_line(lineno, format!("bad node index '{idx}'")))?;
            if labels.insert(label.clone(), idx).is_some() {
                return Err(Error::parse_at_line(lineno, format!("label '{label}' mapped twice")));
            }
        }
        Ok(NodeMap { labels })
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.labels.get(label).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Non-blank, non-comment lines split on commas and whitespace, with their
/// 1-based line numbers.
fn data_lines<R: BufRead>(r: R) -> impl Iterator<Item = (usize, Result<Vec<String>>)> {
    r.lines().enumerate().filter_map(|(idx, line)| {
        let lineno = idx + 1;
        match line {
            Err(e) => Some((lineno, Err(Error::from(e)))),
            Ok(line) => {
                let body = line.split('#').next().unwrap_or("").trim();
                if body.is_empty() {
                    return None;
                }
                let fields = body
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|f| !f.is_empty())
                    .map(str::to_owned)
                    .collect();
                Some((lineno, Ok(fields)))
            }
        }
    })
}

/// Builds `T` snapshots from `(t, i, j, l)` rows, all 1-based. Pairs not
/// listed are absent; repeated rows are harmless. Without a node map, `i` and
/// `j` are node indices; with one, they are looked up as labels. A first
/// line starting with a letter is treated as a header.
pub fn parse_edge_list<R: BufRead>(
    r: R,
    n: usize,
    layers: usize,
    t_max: usize,
    node_map: Option<&NodeMap>,
) -> Result<Vec<AdjacencySnapshot>> {
    if n < 2 || layers == 0 || t_max == 0 {
        return Err(Error::usage("edge-list ingestion needs n >= 2, L >= 1 and T >= 1"));
    }
    let mut snaps = vec![AdjacencySnapshot::empty(n, layers); t_max];
    let mut first = true;
    for (lineno, fields) in data_lines(r) {
        let fields = fields?;
        if std::mem::take(&mut first) && fields[0].starts_with(|c: char| c.is_ascii_alphabetic()) {
            continue;
        }
        let [t, i, j, l] = fields.as_slice() else {
            return Err(Error::parse_at_line(
                lineno,
                format!("expected 4 fields (t, i, j, l), found {}", fields.len()),
            ));
        };
        let int = |s: &str, what: &str, hi: usize| -> Result<usize> {
            s.parse::<usize>()
                .ok()
                .filter(|&x| (1..=hi).contains(&x))
                .ok_or_else(|| Error::parse_at_line(lineno, format!("{what} '{s}' outside 1..={hi}")))
        };
        let node = |s: &str| -> Result<usize> {
            match node_map {
                None => int(s, "node", n),
                Some(map) => map
                    .get(s)
                    .filter(|&x| x <= n)
                    .ok_or_else(|| Error::parse_at_line(lineno, format!("unknown or out-of-range node '{s}'"))),
            }
        };
        let (t, i, j, l) = (int(t, "time", t_max)?, node(i)?, node(j)?, int(l, "layer", layers)?);
        if i == j {
            return Err(Error::parse_at_line(lineno, format!("self-loop on node {i}")));
        }
        snaps[t - 1].set_edge(i - 1, j - 1, l - 1, true)?;
    }
    Ok(snaps)
}

/// Writes the present edges as `t,i,j,l` rows (1-based, `i < j`) with a
/// header; `snapshots[0]` becomes `t = 1`. Reading the output back with
/// [`parse_edge_list`] reproduces the snapshots.
pub fn write_edge_list<W: Write>(mut w: W, snapshots: &[AdjacencySnapshot]) -> Result<()> {
    writeln!(w, "t,i,j,l")?;
    for (t, a) in snapshots.iter().enumerate() {
        for i in 0..a.n() {
            for j in (i + 1)..a.n() {
                for l in 0..a.layers() {
                    if a.get(i, j, l) {
                        writeln!(w, "{},{},{},{}", t + 1, i + 1, j + 1, l + 1)?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Parses `key = value` lines; `#` starts a comment. Later keys override
/// earlier ones.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| Error::parse_at_line(idx + 1, format!("expected key=value, found '{body}'")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::parse_at_line(idx + 1, "empty key"));
        }
        out.insert(key.to_owned(), value.trim().to_owned());
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<AdjacencySnapshot> {
        let mut a = AdjacencySnapshot::empty(3, 2);
        a.set_edge(0, 2, 1, true).unwrap();
        let mut b = AdjacencySnapshot::empty(3, 2);
        b.set_edge(0, 1, 0, true).unwrap();
        b.set_edge(1, 2, 1, true).unwrap();
        vec![a, b]
    }

    #[test]
    fn layout_is_msb_first_row_major() {
        let mut buf = Vec::new();
        write_dmts(&mut buf, &sample()[..1]).unwrap();
        assert_eq!(&buf[..5], b"DMTS\x01");
        assert_eq!(&buf[5..17], &[3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]);
        // Layer 0 empty; layer 1 has bits 2 = (0,2) and 6 = (2,0).
        assert_eq!(&buf[17..], &[0, 0, 0b0010_0010, 0]);
    }

    #[test]
    fn round_trip() {
        let snaps = sample();
        let mut buf = Vec::new();
        write_dmts(&mut buf, &snaps).unwrap();
        assert_eq!(read_dmts(buf.as_slice()).unwrap(), snaps);
    }

    #[test]
    fn corrupt_inputs_report_offsets() {
        let mut buf = Vec::new();
        write_dmts(&mut buf, &sample()).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_dmts(bad.as_slice()), Err(Error::Parse { location, .. }) if location == "byte 0"));
        let truncated = &buf[..buf.len() - 1];
        assert!(matches!(read_dmts(truncated), Err(Error::Parse { .. })));
        let mut asym = buf.clone();
        asym[17] |= 0x40; // (0,1) in layer 0 of the first snapshot only
        match read_dmts(asym.as_slice()) {
            Err(Error::Parse { location, message }) => {
                assert_eq!(location, "byte 17");
                assert!(message.contains("asymmetric"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn edge_list_rules() {
        let text = "t,i,j,l\n1,1,2,1\n1 1 2 1 # duplicate\n\n2,3,1,2\n";
        let snaps = parse_edge_list(text.as_bytes(), 3, 2, 2, None).unwrap();
        assert!(snaps[0].get(0, 1, 0) && snaps[0].get(1, 0, 0));
        assert_eq!(snaps[0].bits().iter().filter(|&&b| b == 1).count(), 2);
        assert!(snaps[1].get(2, 0, 1));
        match parse_edge_list("1,2,2,1\n".as_bytes(), 3, 1, 1, None) {
            Err(Error::Parse { location, message }) => {
                assert_eq!(location, "line 1");
                assert!(message.contains("self-loop"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_edge_list("1,1,2,1\n1,1,4,1\n".as_bytes(), 3, 1, 1, None),
            Err(Error::Parse { location, .. }) if location == "line 2"
        ));
        assert!(parse_edge_list("1,1,2\n".as_bytes(), 3, 1, 1, None).is_err());
    }

    #[test]
    fn node_map_lookup() {
        let map = NodeMap::parse("ATL,1\nORD 2\nJFK,3\n".as_bytes()).unwrap();
        let snaps = parse_edge_list("1,ATL,JFK,1\n".as_bytes(), 3, 1, 1, Some(&map)).unwrap();
        assert!(snaps[0].get(0, 2, 0));
        assert!(parse_edge_list("1,ATL,SFO,1\n".as_bytes(), 3, 1, 1, Some(&map)).is_err());
    }

    #[test]
    fn config_lines() {
        let cfg = parse_config("# comment\nn = 20\nseed=3 # trailing\nn=30\n").unwrap();
        assert_eq!(cfg["n"], "30");
        assert_eq!(cfg["seed"], "3");
        assert!(matches!(parse_config("a=1\noops\n"), Err(Error::Parse { location, .. }) if location == "line 2"));
    }
}
