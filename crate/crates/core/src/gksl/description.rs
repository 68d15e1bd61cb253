//! Plain-text system descriptions.
//!
//! ```text
//! # two-level dephasing
//! [hamiltonian]
//! 0.5  0
//! 0   -0.5
//! [dissipator 0.25]
//! 0.7071  0
//! 0      -0.7071
//! [projector]
//! 1 0
//! 0 0
//! [state]
//! 0.5 0.5
//! 0.5 0.5
//! ```
//!
//! Each block holds one square matrix, row-major, entries separated by
//! whitespace and written as `re`, `re+imj`, `re-imj` or `imj`. A `[projector]`
//! block gives `Pi+`. `[hamiltonian]` and `[projector]` are required,
//! `[dissipator <rate>]` may repeat, and `[state]` defaults to `Pi+ / m`.

use super::{
    build_liouvillian, equiprobable_plus_state, CMatrix, DensityMatrix, DichotomicPvm, Dissipator, Generator,
};
use crate::error::{Error, Result};
use crate::scalar::{cplx, lit, tol, Real};

#[derive(Debug, Clone)]
pub struct SystemDescription<T: Real> {
    pub hamiltonian: CMatrix<T>,
    pub dissipators: Vec<Dissipator<T>>,
    pub measurement: DichotomicPvm<T>,
    pub state: DensityMatrix<T>,
}

#[derive(Debug, PartialEq)]
enum BlockKind {
    Hamiltonian,
    Dissipator(f64),
    Projector,
    State,
}

struct Block {
    kind: BlockKind,
    line: u64,
    rows: Vec<(u64, Vec<(f64, f64)>)>,
}

fn parse_error(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses `re`, `re+imj`, `re-imj`, `imj`, `j` and `-j` (an `i` suffix is
/// accepted too). Returns `None` on malformed input.
pub fn parse_complex(s: &str) -> Option<(f64, f64)> {
    let s = s.trim();
    let Some(body) = s.strip_suffix(['j', 'i']) else {
        return s.parse().ok().map(|re| (re, 0.0));
    };
    let unit = |t: &str| match t {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => t.parse().ok(),
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&p| matches!(bytes[p], b'+' | b'-') && !matches!(bytes[p - 1], b'e' | b'E'));
    match split {
        Some(p) => Some((body[..p].parse().ok()?, unit(&body[p..])?)),
        None => Some((0.0, unit(body)?)),
    }
}

fn parse_header(line: u64, header: &str) -> Result<BlockKind> {
    let mut words = header.split_whitespace();
    let kind = match words.next() {
        Some("hamiltonian") => BlockKind::Hamiltonian,
        Some("projector") => BlockKind::Projector,
        Some("state") => BlockKind::State,
        Some("dissipator") => {
            let rate = words
                .next()
                .ok_or_else(|| parse_error(line, "dissipator block needs a rate"))?;
            let rate: f64 = rate
                .parse()
                .map_err(|_| parse_error(line, format!("bad dissipator rate {rate:?}")))?;
            BlockKind::Dissipator(rate)
        }
        _ => return Err(parse_error(line, format!("unknown block [{header}]"))),
    };
    if let Some(extra) = words.next() {
        return Err(parse_error(line, format!("unexpected {extra:?} in block header")));
    }
    Ok(kind)
}

fn to_matrix<T: Real>(block: &Block) -> Result<CMatrix<T>> {
    let n = block.rows.len();
    if n == 0 {
        return Err(parse_error(block.line, "empty matrix block"));
    }
    for (line, row) in &block.rows {
        if row.len() != n {
            return Err(parse_error(
                *line,
                format!("expected {n} entries (square matrix), found {}", row.len()),
            ));
        }
    }
    Ok(CMatrix::from_fn(n, n, |r, c| {
        let (re, im) = block.rows[r].1[c];
        cplx(lit(re), lit(im))
    }))
}

impl<T: Real> SystemDescription<T> {
    pub fn parse(text: &str) -> Result<Self> {
        let mut blocks: Vec<Block> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx as u64 + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(header) = content.strip_prefix('[') {
                let header = header
                    .strip_suffix(']')
                    .ok_or_else(|| parse_error(line, "unterminated block header"))?;
                blocks.push(Block {
                    kind: parse_header(line, header.trim())?,
                    line,
                    rows: Vec::new(),
                });
                continue;
            }
            let block = blocks
                .last_mut()
                .ok_or_else(|| parse_error(line, "matrix row before any block header"))?;
            let row = content
                .split_whitespace()
                .map(|tok| parse_complex(tok).ok_or_else(|| parse_error(line, format!("bad entry {tok:?}"))))
                .collect::<Result<Vec<_>>>()?;
            block.rows.push((line, row));
        }

        let mut hamiltonian = None;
        let mut projector = None;
        let mut state = None;
        let mut dissipators = Vec::new();
        for block in &blocks {
            let m = to_matrix::<T>(block)?;
            let at = |e: Error| match e {
                Error::Parse { .. } => e,
                other => parse_error(block.line, other.to_string()),
            };
            let slot = match block.kind {
                BlockKind::Dissipator(rate) => {
                    dissipators.push(Dissipator::new(m, lit(rate)).map_err(at)?);
                    continue;
                }
                BlockKind::Hamiltonian => &mut hamiltonian,
                BlockKind::Projector => &mut projector,
                BlockKind::State => &mut state,
            };
            if slot.is_some() {
                return Err(parse_error(block.line, format!("duplicate {:?} block", block.kind)));
            }
            *slot = Some((block.line, m));
        }

        let (h_line, hamiltonian) = hamiltonian.ok_or_else(|| parse_error(0, "missing [hamiltonian] block"))?;
        let (p_line, projector) = projector.ok_or_else(|| parse_error(0, "missing [projector] block"))?;
        let dim = hamiltonian.nrows();
        if projector.nrows() != dim || dissipators.iter().any(|d| d.operator().nrows() != dim) {
            return Err(parse_error(p_line, "all matrices must share one dimension"));
        }
        if super::hermiticity_defect(&hamiltonian) > tol(1e-10) {
            return Err(parse_error(h_line, "hamiltonian is not Hermitian"));
        }
        let measurement = DichotomicPvm::new(projector).map_err(|e| parse_error(p_line, e.to_string()))?;
        let state = match state {
            Some((line, rho)) => {
                if rho.nrows() != dim {
                    return Err(parse_error(line, "state dimension differs from hamiltonian"));
                }
                DensityMatrix::new(rho).map_err(|e| parse_error(line, e.to_string()))?
            }
            None => equiprobable_plus_state(&measurement),
        };
        Ok(Self {
            hamiltonian,
            dissipators,
            measurement,
            state,
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn generator(&self) -> Result<Generator<T>> {
        build_liouvillian(&self.hamiltonian, &self.dissipators)
    }
}
