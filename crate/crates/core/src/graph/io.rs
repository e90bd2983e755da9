//! On-disk dataset directories.
//!
//! A dataset is a directory with four UTF-8 text files:
//!
//! * `meta`: `key=value` lines with keys `name`, `n` (node count), `features`
//!   (feature dimension F), `classes` (class count C) and optionally
//!   `directed=true|false` (default false). Blank lines and lines starting with
//!   `#` are ignored.
//! * `edges`: one edge per line as two whitespace-separated 0-based node ids.
//!   Each line is an undirected edge unless `directed=true`, in which case each
//!   line is one arc and every arc must have its reverse present.
//! * `features`: exactly `n` lines of `F` whitespace-separated decimal reals.
//! * `labels`: exactly `n` lines holding one integer in `0..C`.
//!
//! Self-loops are dropped with a warning; duplicate edges are merged. The
//! writer emits undirected edges `i < j` in row-major order and reals in
//! shortest round-trip form, so a written dataset reloads bit-identically.

use std::collections::HashSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::{split_masks, GraphDataset, SplitFractions};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Accept a directed edge list with missing reverse arcs by adding them.
    pub symmetrize: bool,
    pub split: SplitFractions,
    pub split_seed: u64,
}

struct Meta {
    name: String,
    n: usize,
    features: usize,
    classes: usize,
    directed: bool,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_meta(path: &Path) -> Result<Meta> {
    let text = read(path)?;
    let (mut name, mut n, mut features, mut classes, mut directed) =
        (None, None, None, None, false);
    for (lineno, line) in content_lines(&text) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(path, lineno, "expected key=value"))?;
        let value = value.trim();
        let num = || {
            value
                .parse::<usize>()
                .map_err(|_| parse_err(path, lineno, format!("bad integer {value:?}")))
        };
        match key.trim() {
            "name" => name = Some(value.to_string()),
            "n" => n = Some(num()?),
            "features" => features = Some(num()?),
            "classes" => classes = Some(num()?),
            "directed" => {
                directed = value
                    .parse()
                    .map_err(|_| parse_err(path, lineno, "directed must be true or false"))?
            }
            other => return Err(parse_err(path, lineno, format!("unknown key {other:?}"))),
        }
    }
    let missing = |k: &str| parse_err(path, 0, format!("missing key {k:?}"));
    Ok(Meta {
        name: name.ok_or_else(|| missing("name"))?,
        n: n.ok_or_else(|| missing("n"))?,
        features: features.ok_or_else(|| missing("features"))?,
        classes: classes.ok_or_else(|| missing("classes"))?,
        directed,
    })
}

/// Loads and validates a dataset directory, then assigns masks with `opts.split`.
pub fn load_dataset(dir: impl AsRef<Path>, opts: &LoadOptions) -> Result<GraphDataset> {
    let dir = dir.as_ref();
    let meta = parse_meta(&dir.join("meta"))?;
    let n = meta.n;

    let path = dir.join("edges");
    let text = read(&path)?;
    let mut arcs = Vec::new();
    for (lineno, line) in content_lines(&text) {
        let ids: Vec<&str> = line.split_whitespace().collect();
        if ids.len() != 2 {
            return Err(parse_err(&path, lineno, "expected two node ids"));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| parse_err(&path, lineno, format!("bad node id {s:?}")))
        };
        let (u, v) = (parse(ids[0])?, parse(ids[1])?);
        if u >= n || v >= n {
            return Err(parse_err(
                &path,
                lineno,
                format!("node id out of range 0..{n}"),
            ));
        }
        arcs.push((u, v));
    }
    if meta.directed && !opts.symmetrize {
        let set: HashSet<(usize, usize)> = arcs.iter().copied().collect();
        if let Some(&(u, v)) = arcs
            .iter()
            .find(|&&(u, v)| u != v && !set.contains(&(v, u)))
        {
            return Err(Error::AsymmetricAdjacency(u, v));
        }
    }
    let adjacency = GraphDataset::adjacency_from_edges(n, &arcs)?;

    let path = dir.join("features");
    let text = read(&path)?;
    let rows: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if rows.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{}: {} feature rows, expected {n}",
            path.display(),
            rows.len()
        )));
    }
    let mut data = Vec::with_capacity(n * meta.features);
    for (lineno, line) in rows {
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(
                tok.parse::<f64>()
                    .map_err(|_| parse_err(&path, lineno, format!("bad real {tok:?}")))?,
            );
        }
        if data.len() - before != meta.features {
            return Err(Error::ShapeMismatch(format!(
                "{}:{lineno}: {} feature columns, expected {}",
                path.display(),
                data.len() - before,
                meta.features
            )));
        }
    }
    let features = Tensor::from_vec(n, meta.features, data)?;

    let path = dir.join("labels");
    let text = read(&path)?;
    let labels: Vec<usize> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| parse_err(&path, i + 1, format!("bad label {:?}", l.trim())))
        })
        .collect::<Result<_>>()?;
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{}: {} labels, expected {n}",
            path.display(),
            labels.len()
        )));
    }

    let masks = if n == 0 {
        super::Masks::empty(0)
    } else {
        split_masks(&labels, opts.split, opts.split_seed)?
    };
    GraphDataset::new(meta.name, adjacency, features, labels, meta.classes, masks)
}

fn write_file(path: PathBuf, contents: &str) -> Result<()> {
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::io(&path, e))
}

/// Writes `dataset` in the directory format; masks are not stored.
pub fn write_dataset(dir: impl AsRef<Path>, dataset: &GraphDataset) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(
        dir.join("meta"),
        &format!(
            "name={}\nn={}\nfeatures={}\nclasses={}\n",
            dataset.name(),
            dataset.num_nodes(),
            dataset.num_features(),
            dataset.num_classes()
        ),
    )?;
    let mut edges = String::new();
    for (u, v) in dataset.edges() {
        edges.push_str(&format!("{u} {v}\n"));
    }
    write_file(dir.join("edges"), &edges)?;
    let mut feats = String::new();
    for i in 0..dataset.num_nodes() {
        let row: Vec<String> = dataset
            .features()
            .row_slice(i)
            .iter()
            .map(|x| x.to_string())
            .collect();
        feats.push_str(&row.join(" "));
        feats.push('\n');
    }
    write_file(dir.join("features"), &feats)?;
    let labels: String = dataset.labels().iter().map(|l| format!("{l}\n")).collect();
    write_file(dir.join("labels"), &labels)
}
