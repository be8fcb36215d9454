use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::conic::spectral::min_eigenvalue;
use crate::error::{Error, Result};

/// Scale applied to off-diagonal entries in packed PSD blocks.
///
/// A PSD block of side `n` is packed as the lower triangle, row by row:
/// `(0,0), (1,0), (1,1), (2,0), (2,1), (2,2), …`, with every off-diagonal
/// entry multiplied by `√2` so that the packed inner product equals the
/// trace inner product of the symmetric matrices.
pub const PSD_OFFDIAG_SCALE: f64 = std::f64::consts::SQRT_2;

/// Position of entry `(row, col)` (`row >= col`) in a packed PSD block.
pub fn packed_index(row: usize, col: usize) -> usize {
    debug_assert!(row >= col);
    row * (row + 1) / 2 + col
}

pub fn packed_len(side: usize) -> usize {
    side * (side + 1) / 2
}

/// Packs a symmetric matrix into the PSD block convention.
pub fn pack_symmetric(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = vec![0.0; packed_len(n)];
    for i in 0..n {
        for j in 0..=i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[packed_index(i, j)] = if i == j { v } else { v * PSD_OFFDIAG_SCALE };
        }
    }
    out
}

pub fn unpack_symmetric(packed: &[f64], side: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(side, side);
    for i in 0..side {
        for j in 0..=i {
            let v = packed[packed_index(i, j)];
            let v = if i == j { v } else { v / PSD_OFFDIAG_SCALE };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Sparse affine form `Σ coef·y[var] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(index: usize) -> Self {
        Self::term(index, 1.0)
    }

    pub fn term(index: usize, coef: f64) -> Self {
        Self {
            terms: vec![(index, coef)],
            constant: 0.0,
        }
    }

    pub fn plus(mut self, index: usize, coef: f64) -> Self {
        self.terms.push((index, coef));
        self
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn plus_expr(mut self, other: &LinExpr) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }

    pub fn negated(self) -> Self {
        self.scaled(-1.0)
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * y[i]).sum::<f64>() + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// Every row equals zero.
    Zero,
    /// Every row is nonnegative.
    Nonnegative,
    /// `(t, u)` with `‖u‖ ≤ t`; the block dimension includes `t`.
    SecondOrder,
    /// Packed symmetric matrix of the given side, constrained PSD.
    PsdTriangle(usize),
}

impl Cone {
    pub fn label(self) -> String {
        match self {
            Cone::Zero => "zero".into(),
            Cone::Nonnegative => "nonneg".into(),
            Cone::SecondOrder => "soc".into(),
            Cone::PsdTriangle(n) => format!("psd{n}"),
        }
    }
}

/// Affine rows whose value must lie in `cone`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeBlock {
    pub rows: Vec<LinExpr>,
    pub cone: Cone,
}

impl ConeBlock {
    pub fn eval(&self, y: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.eval(y)).collect()
    }

    /// How far the block value at `y` lies outside its cone (0 when inside).
    pub fn violation(&self, y: &[f64]) -> f64 {
        let v = self.eval(y);
        match self.cone {
            Cone::Zero => v.iter().fold(0.0, |acc, x| acc.max(x.abs())),
            Cone::Nonnegative => v.iter().fold(0.0, |acc, &x| acc.max(-x)),
            Cone::SecondOrder => {
                let tail = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                (tail - v[0]).max(0.0)
            }
            Cone::PsdTriangle(n) => (-min_eigenvalue(&unpack_symmetric(&v, n))).max(0.0),
        }
    }
}

/// Minimize `cᵀy` subject to affine blocks in cones.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub blocks: Vec<ConeBlock>,
}

impl ConicProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            blocks: Vec::new(),
        }
    }

    pub fn set_objective(&mut self, index: usize, coef: f64) {
        self.objective[index] = coef;
    }

    pub fn add_block(&mut self, cone: Cone, rows: Vec<LinExpr>) {
        self.blocks.push(ConeBlock { rows, cone });
    }

    pub fn add_zero(&mut self, row: LinExpr) {
        self.add_block(Cone::Zero, vec![row]);
    }

    pub fn add_nonneg(&mut self, row: LinExpr) {
        self.add_block(Cone::Nonnegative, vec![row]);
    }

    /// `‖tail‖ ≤ head`.
    pub fn add_soc(&mut self, head: LinExpr, tail: Vec<LinExpr>) {
        let mut rows = Vec::with_capacity(tail.len() + 1);
        rows.push(head);
        rows.extend(tail);
        self.add_block(Cone::SecondOrder, rows);
    }

    /// Symmetric matrix with affine entries, constrained PSD. `entry(i, j)` is
    /// only queried for `i >= j`.
    pub fn add_psd(&mut self, side: usize, mut entry: impl FnMut(usize, usize) -> LinExpr) {
        let mut rows = vec![LinExpr::default(); packed_len(side)];
        for i in 0..side {
            for j in 0..=i {
                let e = entry(i, j);
                rows[packed_index(i, j)] = if i == j { e } else { e.scaled(PSD_OFFDIAG_SCALE) };
            }
        }
        self.add_block(Cone::PsdTriangle(side), rows);
    }

    pub fn num_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.rows.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(Error::invalid(format!(
                "objective has {} coefficients for {} variables",
                self.objective.len(),
                self.num_vars
            )));
        }
        for (b, block) in self.blocks.iter().enumerate() {
            if block.rows.is_empty() {
                return Err(Error::invalid(format!("cone block {b} is empty")));
            }
            match block.cone {
                Cone::SecondOrder if block.rows.len() < 2 => {
                    return Err(Error::invalid(format!(
                        "second-order block {b} needs at least 2 rows"
                    )));
                }
                Cone::PsdTriangle(n) if n == 0 || block.rows.len() != packed_len(n) => {
                    return Err(Error::invalid(format!(
                        "PSD block {b} of side {n} has {} rows, expected {}",
                        block.rows.len(),
                        packed_len(n)
                    )));
                }
                _ => {}
            }
            for row in &block.rows {
                if !row.constant.is_finite() {
                    return Err(Error::invalid(format!("non-finite offset in block {b}")));
                }
                for &(i, c) in &row.terms {
                    if i >= self.num_vars {
                        return Err(Error::invalid(format!(
                            "block {b} references variable {i} of {}",
                            self.num_vars
                        )));
                    }
                    if !c.is_finite() {
                        return Err(Error::invalid(format!("non-finite coefficient in block {b}")));
                    }
                }
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite objective coefficient"));
        }
        Ok(())
    }

    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective.iter().zip(y).map(|(c, v)| c * v).sum()
    }

    /// Largest cone violation over all blocks at `y`.
    pub fn max_violation(&self, y: &[f64]) -> f64 {
        self.blocks.iter().map(|b| b.violation(y)).fold(0.0, f64::max)
    }

    /// Plain-text sparse dump: a header line, the objective as
    /// `obj <col> <value>` lines, then one `<block> <row> <col> <value>` line
    /// per nonzero (`col = -1` marks the constant offset).
    pub fn to_sparse_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# vars {} blocks {}", self.num_vars, self.blocks.len());
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = writeln!(out, "obj {j} {c}");
            }
        }
        for (b, block) in self.blocks.iter().enumerate() {
            let _ = writeln!(out, "# block {b} {}", block.cone.label());
            for (r, row) in block.rows.iter().enumerate() {
                if row.constant != 0.0 {
                    let _ = writeln!(out, "{b} {r} -1 {}", row.constant);
                }
                let mut terms = row.terms.clone();
                terms.sort_by_key(|t| t.0);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
                for (i, c) in terms {
                    match merged.last_mut() {
                        Some(last) if last.0 == i => last.1 += c,
                        _ => merged.push((i, c)),
                    }
                }
                for (i, c) in merged.into_iter().filter(|t| t.1 != 0.0) {
                    let _ = writeln!(out, "{b} {r} {i} {c}");
                }
            }
        }
        out
    }
}
