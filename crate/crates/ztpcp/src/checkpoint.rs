//! Text checkpoints: full parameter states that diff cleanly and
//! round-trip bit-exactly.
//!
//! Layout (fixed field order):
//!
//! ```text
//! ztpcp checkpoint v1
//! kind final|mean|truth
//! shape <n_1> ... <n_K>
//! order <K>
//! rank <R>
//! iteration <t>
//! seed <s>
//! networks <count>
//! network <mode> <size>        (one line per network)
//! factors mode <k>             (then n_k rows of R values)
//! lambda / p                   (one row of R values each)
//! beta <i> / h <i>             (per network)
//! suffstats
//! s_mode <k> rows, s_total row, v_node <i> rows, v_total <i> row
//! end
//! ```
//!
//! Floats are written with 17 significant digits, which is exactly enough
//! to reproduce any `f64` bit pattern on parse, so a written checkpoint
//! read back and written again is byte-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::chain::ParamsSnapshot;
use crate::error::{Error, Result};
use crate::model::{FactorMatrix, GlobalWeights, NetworkWeights, SuffStats};

/// What a checkpoint file holds.
#[derive(Debug, Clone, PartialEq)]
pub enum CheckpointKind {
    /// The last iteration's parameter state.
    Final,
    /// Post-burn-in mean parameters.
    Mean,
    /// Ground truth written by the synthetic generator.
    Truth,
}

impl CheckpointKind {
    fn as_str(&self) -> &'static str {
        match self {
            CheckpointKind::Final => "final",
            CheckpointKind::Mean => "mean",
            CheckpointKind::Truth => "truth",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "final" => Some(CheckpointKind::Final),
            "mean" => Some(CheckpointKind::Mean),
            "truth" => Some(CheckpointKind::Truth),
            _ => None,
        }
    }
}

/// A complete serialized model state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: CheckpointKind,
    pub shape: Vec<usize>,
    pub rank: usize,
    pub iteration: u64,
    pub seed: u64,
    /// `(mode, size)` per attached network, in parameter order.
    pub networks: Vec<(usize, usize)>,
    pub params: ParamsSnapshot,
    /// Latent-count statistics; zeroed for mean and truth checkpoints,
    /// which aggregate over or predate iterations.
    pub suff: SuffStats,
}

impl Checkpoint {
    /// View this checkpoint as a one-sample chain, so every prediction
    /// and reporting function works on it directly. Averaged prediction
    /// over the single stored sample equals plug-in prediction at it.
    pub fn into_chain(self) -> crate::chain::ChainOutput {
        crate::chain::ChainOutput {
            shape: self.shape,
            network_modes: self.networks,
            rank: self.rank,
            seed: self.seed,
            iters: self.iteration as usize,
            burnin: 0,
            thin: 1,
            samples: vec![self.params.clone()],
            mean: self.params.clone(),
            final_params: self.params,
            final_suff: self.suff,
            progress: Vec::new(),
            floored_rate_events: 0,
        }
    }
}

/// Render one f64 with enough digits to round-trip exactly.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_row(out: &mut impl Write, row: &[f64]) -> std::io::Result<()> {
    let mut first = true;
    for &v in row {
        if !first {
            write!(out, " ")?;
        }
        write!(out, "{}", fmt_float(v))?;
        first = false;
    }
    writeln!(out)
}

/// Write a checkpoint to `path`.
pub fn write_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(out, "ztpcp checkpoint v1")?;
        writeln!(out, "kind {}", ckpt.kind.as_str())?;
        let shape_str: Vec<String> = ckpt.shape.iter().map(|n| n.to_string()).collect();
        writeln!(out, "shape {}", shape_str.join(" "))?;
        writeln!(out, "order {}", ckpt.shape.len())?;
        writeln!(out, "rank {}", ckpt.rank)?;
        writeln!(out, "iteration {}", ckpt.iteration)?;
        writeln!(out, "seed {}", ckpt.seed)?;
        writeln!(out, "networks {}", ckpt.networks.len())?;
        for &(mode, size) in &ckpt.networks {
            writeln!(out, "network {mode} {size}")?;
        }
        for (k, fm) in ckpt.params.factors.iter().enumerate() {
            writeln!(out, "factors mode {}", k + 1)?;
            for j in 0..fm.rows() {
                write_row(&mut out, fm.row(j))?;
            }
        }
        writeln!(out, "lambda")?;
        write_row(&mut out, &ckpt.params.weights.lambda)?;
        writeln!(out, "p")?;
        write_row(&mut out, &ckpt.params.weights.p)?;
        for (i, nw) in ckpt.params.net_weights.iter().enumerate() {
            writeln!(out, "beta {}", i + 1)?;
            write_row(&mut out, &nw.beta)?;
            writeln!(out, "h {}", i + 1)?;
            write_row(&mut out, &nw.h)?;
        }
        writeln!(out, "suffstats")?;
        for (k, s) in ckpt.suff.s_mode.iter().enumerate() {
            writeln!(out, "s_mode {}", k + 1)?;
            for row in s.chunks_exact(ckpt.rank) {
                write_row(&mut out, row)?;
            }
        }
        writeln!(out, "s_total")?;
        write_row(&mut out, &ckpt.suff.s_total)?;
        for (i, v) in ckpt.suff.v_node.iter().enumerate() {
            writeln!(out, "v_node {}", i + 1)?;
            for row in v.chunks_exact(ckpt.rank) {
                write_row(&mut out, row)?;
            }
            writeln!(out, "v_total {}", i + 1)?;
            write_row(&mut out, &ckpt.suff.v_total[i])?;
        }
        writeln!(out, "end")?;
        out.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

/// Sequential line reader with positional error messages.
struct LineReader<'a> {
    path: &'a Path,
    lines: Vec<String>,
    pos: usize,
}

impl<'a> LineReader<'a> {
    fn next(&mut self) -> Result<String> {
        let line = self
            .lines
            .get(self.pos)
            .ok_or_else(|| Error::parse(self.path, self.pos + 1, "unexpected end of checkpoint"))?;
        self.pos += 1;
        Ok(line.clone())
    }

    fn line_no(&self) -> usize {
        self.pos
    }

    /// Consume a line that must equal `expected` exactly.
    fn expect(&mut self, expected: &str) -> Result<()> {
        let no = self.pos + 1;
        let line = self.next()?;
        if line != expected {
            return Err(Error::parse(
                self.path,
                no,
                format!("expected {expected:?}, found {line:?}"),
            ));
        }
        Ok(())
    }

    /// Consume a line of the form "<tag> <value...>" and return the rest.
    fn tagged(&mut self, tag: &str) -> Result<String> {
        let no = self.pos + 1;
        let line = self.next()?;
        match line.strip_prefix(tag) {
            Some(rest) if rest.starts_with(' ') || rest.is_empty() => Ok(rest.trim().to_string()),
            _ => Err(Error::parse(
                self.path,
                no,
                format!("expected a {tag:?} line, found {line:?}"),
            )),
        }
    }

    fn float_row(&mut self, expect_len: usize) -> Result<Vec<f64>> {
        let no = self.pos + 1;
        let line = self.next()?;
        let row: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse::<f64>).collect();
        let row = row.map_err(|e| Error::parse(self.path, no, format!("bad float: {e}")))?;
        if row.len() != expect_len {
            return Err(Error::parse(
                self.path,
                no,
                format!("expected {expect_len} values, found {}", row.len()),
            ));
        }
        Ok(row)
    }
}

fn parse_int(s: &str, path: &Path, line_no: usize) -> Result<u64> {
    s.parse::<u64>()
        .map_err(|_| Error::parse(path, line_no, format!("expected an integer, got {s:?}")))
}

/// Read a checkpoint written by [`write_checkpoint`].
pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let lines: std::io::Result<Vec<String>> = BufReader::new(file).lines().collect();
    let lines = lines.map_err(|e| Error::io(path, e))?;
    let mut r = LineReader { path, lines, pos: 0 };

    r.expect("ztpcp checkpoint v1")?;
    let kind_str = r.tagged("kind")?;
    let kind = CheckpointKind::parse(&kind_str)
        .ok_or_else(|| Error::parse(path, r.line_no(), format!("unknown kind {kind_str:?}")))?;
    let shape_str = r.tagged("shape")?;
    let shape: Vec<usize> = {
        let parsed: std::result::Result<Vec<usize>, _> =
            shape_str.split_whitespace().map(str::parse).collect();
        parsed.map_err(|_| Error::parse(path, r.line_no(), "bad shape line"))?
    };
    let order = parse_int(&r.tagged("order")?, path, r.line_no())? as usize;
    if order != shape.len() {
        return Err(Error::parse(
            path,
            r.line_no(),
            format!("order {order} disagrees with shape of length {}", shape.len()),
        ));
    }
    let rank = parse_int(&r.tagged("rank")?, path, r.line_no())? as usize;
    let iteration = parse_int(&r.tagged("iteration")?, path, r.line_no())?;
    let seed = parse_int(&r.tagged("seed")?, path, r.line_no())?;
    let n_nets = parse_int(&r.tagged("networks")?, path, r.line_no())? as usize;
    let mut networks = Vec::with_capacity(n_nets);
    for _ in 0..n_nets {
        let rest = r.tagged("network")?;
        let fields: Vec<&str> = rest.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::parse(path, r.line_no(), "network line needs mode and size"));
        }
        let mode = parse_int(fields[0], path, r.line_no())? as usize;
        let size = parse_int(fields[1], path, r.line_no())? as usize;
        if mode == 0 || mode > order {
            return Err(Error::parse(path, r.line_no(), format!("network mode {mode} out of range")));
        }
        networks.push((mode, size));
    }

    let mut factors = Vec::with_capacity(order);
    for (k, &n) in shape.iter().enumerate() {
        r.expect(&format!("factors mode {}", k + 1))?;
        let mut data = Vec::with_capacity(n * rank);
        for _ in 0..n {
            data.extend(r.float_row(rank)?);
        }
        factors.push(
            FactorMatrix::from_data(k + 1, n, rank, data)
                .map_err(|e| Error::parse(path, r.line_no(), e.to_string()))?,
        );
    }

    r.expect("lambda")?;
    let lambda = r.float_row(rank)?;
    r.expect("p")?;
    let p = r.float_row(rank)?;
    let mut net_weights = Vec::with_capacity(n_nets);
    for i in 0..n_nets {
        r.expect(&format!("beta {}", i + 1))?;
        let beta = r.float_row(rank)?;
        r.expect(&format!("h {}", i + 1))?;
        let h = r.float_row(rank)?;
        net_weights.push(NetworkWeights { beta, h });
    }

    r.expect("suffstats")?;
    let mut s_mode = Vec::with_capacity(order);
    for (k, &n) in shape.iter().enumerate() {
        r.expect(&format!("s_mode {}", k + 1))?;
        let mut data = Vec::with_capacity(n * rank);
        for _ in 0..n {
            data.extend(r.float_row(rank)?);
        }
        s_mode.push(data);
    }
    r.expect("s_total")?;
    let s_total = r.float_row(rank)?;
    let mut v_node = Vec::with_capacity(n_nets);
    let mut v_total = Vec::with_capacity(n_nets);
    for (i, &(_, size)) in networks.iter().enumerate() {
        r.expect(&format!("v_node {}", i + 1))?;
        let mut data = Vec::with_capacity(size * rank);
        for _ in 0..size {
            data.extend(r.float_row(rank)?);
        }
        v_node.push(data);
        r.expect(&format!("v_total {}", i + 1))?;
        v_total.push(r.float_row(rank)?);
    }
    r.expect("end")?;

    Ok(Checkpoint {
        kind,
        shape,
        rank,
        iteration,
        seed,
        networks,
        params: ParamsSnapshot {
            factors,
            weights: GlobalWeights { lambda, p },
            net_weights,
        },
        suff: SuffStats { s_mode, s_total, v_node, v_total },
    })
}
