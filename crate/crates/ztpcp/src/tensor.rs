//! Sparse binary tensors, mode networks, file ingestion, and holdout splits.
//!
//! Only the positions of one-entries are ever stored. Observed zeros and
//! unobserved cells are indistinguishable during training (a zero forces
//! its latent count to zero and contributes nothing to any update), so a
//! set of indices plus the shape is the complete training representation;
//! held-out evaluation is the only place zeros are materialized, as
//! labeled test rows. This is what lets fitting cost scale with the
//! number of ones instead of the number of cells.
//!
//! File formats (UTF-8 text, `#` starts a comment line, blank lines
//! ignored):
//!
//! * tensor: one entry per line, K whitespace-separated zero-based
//!   coordinates of a one-entry;
//! * network: two integers per line, one undirected edge;
//! * test set: K coordinates followed by a 0/1 label.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{streams, RngHandle};

/// A multi-index into a K-way tensor: one zero-based coordinate per mode.
pub type TensorIndex = Vec<usize>;

/// Labeled cells: each entry pairs a cell index with a 0/1 observation.
pub type LabeledCells = Vec<(TensorIndex, u8)>;

/// A binary tensor stored as its shape plus the set of one-entries.
///
/// Membership queries run in expected constant time against a hash set of
/// linearized indices. An optional holdout mask records cells that belong
/// to a test split and must not be touched during training (neither as
/// ones nor as zero probes).
#[derive(Debug, Clone)]
pub struct SparseBinaryTensor {
    shape: Vec<usize>,
    /// One-entry coordinates, nnz x K row-major.
    ones: Vec<usize>,
    ones_set: HashSet<u64>,
    holdout_mask: HashSet<u64>,
}

impl SparseBinaryTensor {
    /// Build a tensor from a shape and an iterator of one-entry indices.
    ///
    /// Duplicates are dropped. Fails if the shape has fewer than two
    /// modes, a mode size is zero, the cell count overflows `u64` (the
    /// linearization domain), or any coordinate is out of range.
    pub fn new<I>(shape: Vec<usize>, ones: I) -> Result<Self>
    where
        I: IntoIterator<Item = TensorIndex>,
    {
        if shape.len() < 2 {
            return Err(Error::Config(format!(
                "tensor order must be at least 2, got {}",
                shape.len()
            )));
        }
        if shape.contains(&0) {
            return Err(Error::Config(format!("mode sizes must be positive, got {shape:?}")));
        }
        let mut cells: u128 = 1;
        for &n in &shape {
            cells = cells.saturating_mul(n as u128);
        }
        if cells > u64::MAX as u128 {
            return Err(Error::Config(format!(
                "cell count of shape {shape:?} exceeds the addressable range"
            )));
        }
        let mut tensor = SparseBinaryTensor {
            shape,
            ones: Vec::new(),
            ones_set: HashSet::new(),
            holdout_mask: HashSet::new(),
        };
        for index in ones {
            tensor.check_index(&index)?;
            if tensor.ones_set.insert(tensor.linear(&index)) {
                tensor.ones.extend_from_slice(&index);
            }
        }
        Ok(tensor)
    }

    fn check_index(&self, index: &[usize]) -> Result<()> {
        if index.len() != self.order() {
            return Err(Error::Config(format!(
                "index {:?} has {} coordinates, tensor order is {}",
                index,
                index.len(),
                self.order()
            )));
        }
        for (mode0, (&coord, &size)) in index.iter().zip(&self.shape).enumerate() {
            if coord >= size {
                return Err(Error::Config(format!(
                    "coordinate {} out of range for mode {} (size {})",
                    coord,
                    mode0 + 1,
                    size
                )));
            }
        }
        Ok(())
    }

    /// Number of modes K.
    pub fn order(&self) -> usize {
        self.shape.len()
    }

    /// Mode sizes.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Number of stored one-entries.
    pub fn nnz(&self) -> usize {
        if self.ones.is_empty() {
            0
        } else {
            self.ones.len() / self.order()
        }
    }

    /// Total number of cells.
    pub fn cell_count(&self) -> u64 {
        self.shape.iter().map(|&n| n as u64).product()
    }

    /// The n-th stored one-entry, in insertion order.
    pub fn one(&self, n: usize) -> &[usize] {
        let k = self.order();
        &self.ones[n * k..(n + 1) * k]
    }

    /// Iterate over all one-entries in insertion order.
    pub fn ones(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.ones.chunks_exact(self.order())
    }

    /// Row-major linearization of an index; the inverse of [`unlinear`].
    ///
    /// [`unlinear`]: SparseBinaryTensor::unlinear
    pub fn linear(&self, index: &[usize]) -> u64 {
        debug_assert_eq!(index.len(), self.order());
        let mut lin: u64 = 0;
        for (&coord, &size) in index.iter().zip(&self.shape) {
            lin = lin * size as u64 + coord as u64;
        }
        lin
    }

    /// Recover the multi-index of a linearized cell.
    pub fn unlinear(&self, mut lin: u64) -> TensorIndex {
        let mut index = vec![0usize; self.order()];
        for (slot, &size) in index.iter_mut().zip(&self.shape).rev() {
            *slot = (lin % size as u64) as usize;
            lin /= size as u64;
        }
        index
    }

    /// Is this cell a stored one?
    pub fn contains(&self, index: &[usize]) -> bool {
        self.ones_set.contains(&self.linear(index))
    }

    /// Is this cell excluded from training by a holdout split?
    pub fn is_held_out(&self, index: &[usize]) -> bool {
        self.holdout_mask.contains(&self.linear(index))
    }

    /// Number of cells in the holdout mask.
    pub fn holdout_len(&self) -> usize {
        self.holdout_mask.len()
    }
}

/// A symmetric binary network over the entities of one tensor mode,
/// stored as the upper triangle of its adjacency matrix.
#[derive(Debug, Clone)]
pub struct ModeNetwork {
    /// 1-based mode number this network attaches to.
    pub mode: usize,
    /// Entity count; must equal the tensor's size along `mode`.
    pub size: usize,
    edges: Vec<(usize, usize)>,
    edge_set: HashSet<u64>,
    self_loops: usize,
}

impl ModeNetwork {
    /// Build a network from an iterator of undirected edges.
    ///
    /// Edges are normalized to `i <= j` and deduplicated, so `(1, 0)` and
    /// `(0, 1)` collapse to one stored edge. Self-loops are kept but
    /// counted so loaders can flag them.
    pub fn new<I>(mode: usize, size: usize, raw_edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if mode == 0 {
            return Err(Error::Config("network mode numbers are 1-based".into()));
        }
        if size == 0 {
            return Err(Error::Config("network size must be positive".into()));
        }
        let mut net = ModeNetwork {
            mode,
            size,
            edges: Vec::new(),
            edge_set: HashSet::new(),
            self_loops: 0,
        };
        for (a, b) in raw_edges {
            if a >= size || b >= size {
                return Err(Error::Config(format!(
                    "edge ({a}, {b}) out of range for network of size {size}"
                )));
            }
            let (i, j) = if a <= b { (a, b) } else { (b, a) };
            if net.edge_set.insert((i * size + j) as u64) {
                net.edges.push((i, j));
                if i == j {
                    net.self_loops += 1;
                }
            }
        }
        Ok(net)
    }

    /// Zero-based axis of the tensor this network attaches to.
    pub fn mode_axis(&self) -> usize {
        self.mode - 1
    }

    /// Number of stored (normalized) edges.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Number of stored self-loops.
    pub fn self_loops(&self) -> usize {
        self.self_loops
    }

    /// Iterate over normalized edges `(i, j)` with `i <= j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Is there an edge between `a` and `b` (in either order)?
    pub fn contains(&self, a: usize, b: usize) -> bool {
        let (i, j) = if a <= b { (a, b) } else { (b, a) };
        self.edge_set.contains(&((i * self.size + j) as u64))
    }
}

/// How to carve a held-out test set from a tensor.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitSpec {
    /// Remove a uniformly random fraction of the one-entries.
    RandomEntry {
        /// Fraction of ones moved to the test set; must be in (0, 1).
        fraction: f64,
        /// Seed for the selection and for negative sampling.
        seed: u64,
    },
    /// Remove every one-entry whose coordinate along one mode falls in a
    /// half-open range, simulating entities with no observed history.
    ColdStartSlice {
        /// 1-based mode whose slices are held out.
        mode: usize,
        /// Half-open coordinate range `[start, end)` of held-out slices.
        range: (usize, usize),
        /// Seed for negative sampling.
        seed: u64,
    },
}

/// Load a tensor from a text file of one-entry coordinates.
///
/// Each non-comment line holds `shape.len()` whitespace-separated
/// zero-based integers. Duplicate entries are dropped.
pub fn load_tensor(path: impl AsRef<Path>, shape: Vec<usize>) -> Result<SparseBinaryTensor> {
    let path = path.as_ref();
    let order = shape.len();
    let mut tensor = SparseBinaryTensor::new(shape, std::iter::empty())?;
    for (line_no, line) in read_lines(path)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != order {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {} coordinates, found {}", order, fields.len()),
            ));
        }
        let mut index = Vec::with_capacity(order);
        for field in fields {
            index.push(parse_coord(field, path, line_no)?);
        }
        tensor
            .check_index(&index)
            .map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        if tensor.ones_set.insert(tensor.linear(&index)) {
            tensor.ones.extend_from_slice(&index);
        }
    }
    Ok(tensor)
}

/// Write a tensor's one-entries in the format [`load_tensor`] reads.
pub fn write_tensor(path: impl AsRef<Path>, tensor: &SparseBinaryTensor) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(out, "# shape: {}", join_usize(tensor.shape()))?;
        for entry in tensor.ones() {
            writeln!(out, "{}", join_usize(entry))?;
        }
        out.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

/// Load a mode network from a text file of edges, one `i j` pair per line.
///
/// Symmetric duplicates collapse to a single stored edge. Self-loops are
/// accepted; callers can inspect [`ModeNetwork::self_loops`] to flag them.
pub fn load_network(path: impl AsRef<Path>, mode: usize, size: usize) -> Result<ModeNetwork> {
    let path = path.as_ref();
    let mut edges = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 2 endpoints, found {}", fields.len()),
            ));
        }
        let a = parse_coord(fields[0], path, line_no)?;
        let b = parse_coord(fields[1], path, line_no)?;
        if a >= size || b >= size {
            return Err(Error::parse(
                path,
                line_no,
                format!("edge ({a}, {b}) out of range for network of size {size}"),
            ));
        }
        edges.push((a, b));
    }
    ModeNetwork::new(mode, size, edges)
}

/// Write a network's normalized edges in the format [`load_network`] reads.
pub fn write_network(path: impl AsRef<Path>, network: &ModeNetwork) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(out, "# mode {} network, {} entities", network.mode, network.size)?;
        for (i, j) in network.edges() {
            writeln!(out, "{i} {j}")?;
        }
        out.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

/// Load a labeled test set: K coordinates plus a trailing 0/1 label.
pub fn load_test_set(path: impl AsRef<Path>, shape: &[usize]) -> Result<LabeledCells> {
    let path = path.as_ref();
    let order = shape.len();
    let mut rows = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != order + 1 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {} coordinates + label, found {} fields", order, fields.len()),
            ));
        }
        let mut index = Vec::with_capacity(order);
        for (mode0, field) in fields[..order].iter().enumerate() {
            let coord = parse_coord(field, path, line_no)?;
            if coord >= shape[mode0] {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!(
                        "coordinate {} out of range for mode {} (size {})",
                        coord,
                        mode0 + 1,
                        shape[mode0]
                    ),
                ));
            }
            index.push(coord);
        }
        let label = match fields[order] {
            "0" => 0u8,
            "1" => 1u8,
            other => {
                return Err(Error::parse(path, line_no, format!("label must be 0 or 1, got {other}")))
            }
        };
        rows.push((index, label));
    }
    Ok(rows)
}

/// Write a labeled test set in the format [`load_test_set`] reads.
pub fn write_test_set(path: impl AsRef<Path>, rows: &[(TensorIndex, u8)]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        for (index, label) in rows {
            writeln!(out, "{} {}", join_usize(index), label)?;
        }
        out.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

/// Split a tensor into a training tensor and a labeled test set.
///
/// * Random-entry: `round(fraction * nnz)` ones move to the test set with
///   label 1, and `round(zeros_per_one * positives)` distinct zero cells
///   are sampled uniformly (rejecting ones) with label 0.
/// * Cold-start: every one whose designated coordinate falls in the slice
///   range moves to the test set, and the zero labels are sampled from
///   cells inside the held-out slices, since that is where a cold-start
///   model must discriminate.
///
/// The training tensor's holdout mask covers every test cell, positive or
/// negative, so training-time probes never touch the test set. The split
/// is a pure function of the spec's seed.
pub fn split_holdout(
    tensor: &SparseBinaryTensor,
    spec: &SplitSpec,
    zeros_per_one: f64,
) -> Result<(SparseBinaryTensor, LabeledCells)> {
    if !(zeros_per_one.is_finite() && zeros_per_one >= 0.0) {
        return Err(Error::Config(format!(
            "zeros_per_one must be finite and nonnegative, got {zeros_per_one}"
        )));
    }
    let nnz = tensor.nnz();
    // Which one-entries move to the test set, the seed that drives zero
    // sampling, and (for cold-start splits) the held-out axis range.
    struct SplitPlan {
        test_positions: Vec<usize>,
        seed: u64,
        slice: Option<(usize, (usize, usize))>,
    }
    let plan = match *spec {
        SplitSpec::RandomEntry { fraction, seed } => {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::Config(format!(
                    "random-entry fraction must be in (0, 1), got {fraction}"
                )));
            }
            let n_test = ((fraction * nnz as f64).round() as usize).min(nnz);
            let mut rng = RngHandle::new(seed, streams::SPLIT);
            // Partial Fisher-Yates: after i steps the prefix holds a
            // uniform sample of i distinct positions.
            let mut positions: Vec<usize> = (0..nnz).collect();
            for i in 0..n_test {
                let j = rng.gen_range(i..nnz);
                positions.swap(i, j);
            }
            let mut chosen: Vec<usize> = positions[..n_test].to_vec();
            chosen.sort_unstable();
            SplitPlan { test_positions: chosen, seed, slice: None }
        }
        SplitSpec::ColdStartSlice { mode, range, seed } => {
            if mode == 0 || mode > tensor.order() {
                return Err(Error::Config(format!(
                    "cold-start mode {mode} out of range for order {}",
                    tensor.order()
                )));
            }
            let size = tensor.shape()[mode - 1];
            let (start, end) = range;
            if start >= end || end > size {
                return Err(Error::Config(format!(
                    "cold-start range [{start}, {end}) invalid for mode {mode} (size {size})"
                )));
            }
            let axis = mode - 1;
            let chosen: Vec<usize> = (0..nnz)
                .filter(|&n| {
                    let coord = tensor.one(n)[axis];
                    coord >= start && coord < end
                })
                .collect();
            SplitPlan { test_positions: chosen, seed, slice: Some((axis, range)) }
        }
    };
    let SplitPlan { test_positions, seed, slice } = plan;

    if test_positions.len() == nnz {
        return Err(Error::Config(
            "split leaves zero training ones; shrink the fraction or slice".into(),
        ));
    }

    let mut test: LabeledCells = Vec::new();
    let mut test_set: HashSet<u64> = HashSet::new();
    let mut in_test = vec![false; nnz];
    for &pos in &test_positions {
        in_test[pos] = true;
        let index = tensor.one(pos).to_vec();
        test_set.insert(tensor.linear(&index));
        test.push((index, 1));
    }
    let train_ones: Vec<TensorIndex> = (0..nnz)
        .filter(|&n| !in_test[n])
        .map(|n| tensor.one(n).to_vec())
        .collect();

    // Sample labeled zeros, rejecting ones and duplicates. In cold-start
    // splits the candidates are restricted to the held-out slices.
    let n_neg = (zeros_per_one * test.len() as f64).round() as usize;
    let mut rng = RngHandle::new(seed ^ 0x005e_ed0f_2e05, streams::SPLIT);
    let mut negatives = 0usize;
    let mut attempts = 0u64;
    let attempt_cap = 1000 * (n_neg as u64 + 1);
    while negatives < n_neg {
        attempts += 1;
        if attempts > attempt_cap {
            return Err(Error::Config(format!(
                "could not find {n_neg} distinct zero cells for the test set; \
                 the tensor is too dense for zeros_per_one = {zeros_per_one}"
            )));
        }
        let mut index = tensor.unlinear(rng.gen_range(0..tensor.cell_count()));
        if let Some((axis, (start, end))) = slice {
            index[axis] = start + rng.gen_range(0..(end - start));
        }
        let lin = tensor.linear(&index);
        if tensor.ones_set.contains(&lin) || !test_set.insert(lin) {
            continue;
        }
        test.push((index, 0));
        negatives += 1;
    }

    let mut train = SparseBinaryTensor::new(tensor.shape().to_vec(), train_ones)?;
    train.holdout_mask = test_set;
    Ok((train, test))
}

fn join_usize(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_coord(field: &str, path: &Path, line_no: usize) -> Result<usize> {
    field
        .parse::<usize>()
        .map_err(|_| Error::parse(path, line_no, format!("expected a nonnegative integer, got {field:?}")))
}

/// Yield `(1-based line number, content)` for non-comment, non-blank lines.
fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        lines.push((n + 1, trimmed.to_string()));
    }
    Ok(lines)
}
