use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::linops::{ComplexMatrix, C64, ZERO};

use super::ConicError;

/// One summand `w·X_k[r,c]` of a constraint row; rows read `Re Σ w·X_k[r,c] = b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub weight: C64,
}

impl Entry {
    pub fn new(block: usize, row: usize, col: usize, weight: C64) -> Self {
        Entry { block, row, col, weight }
    }

    /// Contributes `coef·Re X[r,c]`.
    pub fn re(block: usize, row: usize, col: usize, coef: f64) -> Self {
        Entry::new(block, row, col, C64::new(coef, 0.0))
    }

    /// Contributes `coef·Im X[r,c]`.
    pub fn im(block: usize, row: usize, col: usize, coef: f64) -> Self {
        Entry::new(block, row, col, C64::new(0.0, -coef))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Row {
    pub terms: Vec<Entry>,
    pub rhs: f64,
}

/// `Σ_j ⟨C_j, X⟩ = b_j` over a product of Hermitian PSD blocks, optionally
/// maximizing `⟨F, X⟩`. Blocks of size 1 are nonnegative scalars.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProblem {
    pub(crate) blocks: Vec<usize>,
    pub(crate) rows: Vec<Row>,
    pub(crate) objective: Option<Vec<Entry>>,
}

/// Hermitian coefficient restricted to one block, stored as merged `(r, c, C[r,c])`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SparseBlock {
    pub block: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseBlock {
    /// `Re tr(C† X)`.
    pub fn dot(&self, x: &ComplexMatrix) -> f64 {
        self.entries.iter().map(|&(r, c, v)| v.re * x[(r, c)].re + v.im * x[(r, c)].im).sum()
    }

    pub fn add_to(&self, s: f64, out: &mut ComplexMatrix) {
        for &(r, c, v) in &self.entries {
            out[(r, c)] += v * s;
        }
    }

    pub fn dense(&self, n: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        self.add_to(1.0, &mut m);
        m
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|(_, _, v)| v.norm_sqr()).sum()
    }
}

/// Hermitian part of a term list, grouped by block.
pub(crate) fn hermitize(terms: &[Entry]) -> Vec<SparseBlock> {
    let mut acc: BTreeMap<(usize, usize, usize), C64> = BTreeMap::new();
    for t in terms {
        // Re(w X_rc) = ⟨C, X⟩ with C_rc = conj(w)/2, C_cr = w/2
        *acc.entry((t.block, t.row, t.col)).or_insert(ZERO) += t.weight.conj() * 0.5;
        *acc.entry((t.block, t.col, t.row)).or_insert(ZERO) += t.weight * 0.5;
    }
    let mut out: Vec<SparseBlock> = Vec::new();
    for ((block, r, c), v) in acc {
        if v.norm_sqr() == 0.0 {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.block == block => last.entries.push((r, c, v)),
            _ => out.push(SparseBlock { block, entries: vec![(r, c, v)] }),
        }
    }
    out
}

pub(crate) type Blocks = Vec<ComplexMatrix>;

pub(crate) fn blocks_inner(a: &Blocks, b: &Blocks) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.inner(y)).sum()
}

pub(crate) fn blocks_axpy(s: f64, x: &Blocks, out: &mut Blocks) {
    for (o, xi) in out.iter_mut().zip(x) {
        o.axpy(s, xi);
    }
}

pub(crate) fn identity_blocks(sizes: &[usize]) -> Blocks {
    sizes.iter().map(|&n| ComplexMatrix::identity(n)).collect()
}

pub(crate) fn zero_blocks(sizes: &[usize]) -> Blocks {
    sizes.iter().map(|&n| ComplexMatrix::zeros(n, n)).collect()
}

/// Hermitian rows and dense objective in solver form.
#[derive(Debug, Clone)]
pub(crate) struct Compiled {
    pub sizes: Vec<usize>,
    pub rows: Vec<Vec<SparseBlock>>,
    pub rhs: Vec<f64>,
    /// Dense Hermitian cost to maximize, zero for feasibility problems.
    pub objective: Blocks,
}

impl Compiled {
    pub fn apply(&self, x: &Blocks) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|sb| sb.dot(&x[sb.block])).sum()).collect()
    }

    pub fn adjoint(&self, y: &[f64]) -> Blocks {
        let mut out = zero_blocks(&self.sizes);
        for (row, &yj) in self.rows.iter().zip(y) {
            if yj != 0.0 {
                for sb in row {
                    sb.add_to(yj, &mut out[sb.block]);
                }
            }
        }
        out
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an `n × n` PSD block and returns its index.
    pub fn add_block(&mut self, n: usize) -> usize {
        self.blocks.push(n);
        self.blocks.len() - 1
    }

    /// Adds `Re Σ w·X_k[r,c] = rhs` and returns the row index.
    pub fn add_row(&mut self, terms: impl IntoIterator<Item = Entry>, rhs: f64) -> usize {
        self.rows.push(Row { terms: terms.into_iter().collect(), rhs });
        self.rows.len() - 1
    }

    /// Sets the linear functional to maximize.
    pub fn set_objective(&mut self, terms: impl IntoIterator<Item = Entry>) {
        self.objective = Some(terms.into_iter().collect());
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.rhs).collect()
    }

    pub fn has_objective(&self) -> bool {
        self.objective.is_some()
    }

    fn check_entries(&self, terms: &[Entry], what: &str) -> Result<(), ConicError> {
        for t in terms {
            let n = *self.blocks.get(t.block).ok_or_else(|| {
                ConicError::Malformed(format!("{what} references missing block {}", t.block))
            })?;
            if t.row >= n || t.col >= n {
                return Err(ConicError::Malformed(format!(
                    "{what} references entry ({}, {}) of a {n}x{n} block",
                    t.row, t.col
                )));
            }
            if !(t.weight.re.is_finite() && t.weight.im.is_finite()) {
                return Err(ConicError::Malformed(format!("{what} has a non-finite weight")));
            }
        }
        Ok(())
    }

    pub(crate) fn compile(&self) -> Result<Compiled, ConicError> {
        if self.blocks.is_empty() || self.blocks.contains(&0) {
            return Err(ConicError::Malformed("problem needs at least one nonempty block".into()));
        }
        let mut rows = Vec::with_capacity(self.rows.len());
        for (j, row) in self.rows.iter().enumerate() {
            self.check_entries(&row.terms, &format!("row {j}"))?;
            if !row.rhs.is_finite() {
                return Err(ConicError::Malformed(format!("row {j} has a non-finite right-hand side")));
            }
            let sparse = hermitize(&row.terms);
            if sparse.is_empty() && row.rhs.abs() > 1e-12 {
                return Err(ConicError::Malformed(format!(
                    "row {j} has no coefficients but right-hand side {}",
                    row.rhs
                )));
            }
            rows.push(sparse);
        }
        let mut objective = zero_blocks(&self.blocks);
        if let Some(terms) = &self.objective {
            self.check_entries(terms, "objective")?;
            for sb in hermitize(terms) {
                sb.add_to(1.0, &mut objective[sb.block]);
            }
        }
        Ok(Compiled { sizes: self.blocks.clone(), rows, rhs: self.rhs(), objective })
    }

    /// Line-oriented text form: a `blocks` header, one `row <rhs>` line per
    /// constraint and an optional `objective` line, each followed by its
    /// `<block> <r> <c> <re> <im>` terms, closed by `end`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let sizes: Vec<String> = self.blocks.iter().map(|n| n.to_string()).collect();
        writeln!(out, "blocks {} {}", self.blocks.len(), sizes.join(" ")).unwrap();
        let terms = |out: &mut String, ts: &[Entry]| {
            for t in ts {
                writeln!(out, "{} {} {} {:e} {:e}", t.block, t.row, t.col, t.weight.re, t.weight.im).unwrap();
            }
        };
        for row in &self.rows {
            writeln!(out, "row {:e} {}", row.rhs, row.terms.len()).unwrap();
            terms(&mut out, &row.terms);
        }
        if let Some(obj) = &self.objective {
            writeln!(out, "objective {}", obj.len()).unwrap();
            terms(&mut out, obj);
        }
        out.push_str("end\n");
        out
    }

    /// Inverse of [`ConicProblem::dump`].
    pub fn parse_dump(text: &str) -> Result<Self, ConicError> {
        let bad = |msg: &str| ConicError::Malformed(format!("dump: {msg}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty input"))?.split_whitespace().collect();
        if header.first() != Some(&"blocks") || header.len() < 2 {
            return Err(bad("missing blocks header"));
        }
        let count: usize = header[1].parse().map_err(|_| bad("block count"))?;
        let blocks = header[2..].iter().map(|s| s.parse::<usize>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad("block size"))?;
        if blocks.len() != count {
            return Err(bad("block count does not match sizes"));
        }
        let mut p = ConicProblem { blocks, ..Default::default() };
        let read_terms = |lines: &mut dyn Iterator<Item = &str>, n: usize| -> Result<Vec<Entry>, ConicError> {
            (0..n)
                .map(|_| {
                    let f: Vec<&str> = lines.next().ok_or_else(|| bad("truncated terms"))?.split_whitespace().collect();
                    if f.len() != 5 {
                        return Err(bad("term needs five fields"));
                    }
                    let u = |s: &str| s.parse::<usize>().map_err(|_| bad("index"));
                    let r = |s: &str| s.parse::<f64>().map_err(|_| bad("number"));
                    Ok(Entry::new(u(f[0])?, u(f[1])?, u(f[2])?, C64::new(r(f[3])?, r(f[4])?)))
                })
                .collect()
        };
        loop {
            let line = lines.next().ok_or_else(|| bad("missing end"))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.as_slice() {
                ["end"] => break,
                ["row", rhs, n] => {
                    let rhs = rhs.parse().map_err(|_| bad("rhs"))?;
                    let n = n.parse().map_err(|_| bad("term count"))?;
                    let terms = read_terms(&mut lines, n)?;
                    p.rows.push(Row { terms, rhs });
                }
                ["objective", n] => {
                    let n = n.parse().map_err(|_| bad("term count"))?;
                    p.objective = Some(read_terms(&mut lines, n)?);
                }
                _ => return Err(bad(&format!("unexpected line '{line}'"))),
            }
        }
        Ok(p)
    }
}
