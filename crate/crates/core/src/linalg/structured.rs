//! Structured block matrices whose blocks are rank-constrained copies of a
//! shared set of links, and randomized certification of their generic rank.
//!
//! A [`BlockPattern`] records where each link sits. The same link may be
//! placed in several blocks (replicated networks reuse every original
//! channel), and every placement shares one realization. Sampling therefore
//! draws each link once and pastes it wherever it appears.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::prime::{FpMatrix, PrimeField};
use super::{Matrix, ScalarDomain};
use crate::channel::NetworkSpec;
use crate::error::{Error, Result};

/// Trials per randomized rank query. Each trial fails with probability at
/// most `degree / p`, so eight trials put the joint failure far below any
/// practical concern at `p = 2^61 - 1`.
pub const DEFAULT_TRIALS: usize = 8;

/// RNG for trial `trial` of a query seeded with `seed`.
pub(crate) fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LinkShape {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    /// Original `(receiver, transmitter)` pair this link stands for, 0-based.
    pub origin: (usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Placement {
    pub row_block: usize,
    pub col_block: usize,
    pub link: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockPattern {
    pub row_sizes: Vec<usize>,
    pub col_sizes: Vec<usize>,
    pub links: Vec<LinkShape>,
    pub placements: Vec<Placement>,
}

impl BlockPattern {
    pub fn new(row_sizes: Vec<usize>, col_sizes: Vec<usize>) -> Self {
        Self {
            row_sizes,
            col_sizes,
            links: Vec::new(),
            placements: Vec::new(),
        }
    }

    pub fn add_link(&mut self, shape: LinkShape) -> usize {
        self.links.push(shape);
        self.links.len() - 1
    }

    /// Returns the index of the link with this origin, adding it if absent.
    pub fn link_for(&mut self, shape: LinkShape) -> usize {
        match self.links.iter().position(|l| l.origin == shape.origin) {
            Some(idx) => idx,
            None => self.add_link(shape),
        }
    }

    pub fn place(&mut self, row_block: usize, col_block: usize, link: usize) -> Result<()> {
        let shape = self
            .links
            .get(link)
            .ok_or_else(|| Error::DimensionMismatch(format!("no link {link}")))?;
        let (Some(&r), Some(&c)) = (self.row_sizes.get(row_block), self.col_sizes.get(col_block))
        else {
            return Err(Error::DimensionMismatch(format!(
                "block ({row_block}, {col_block}) outside partition"
            )));
        };
        if (r, c) != (shape.rows, shape.cols) {
            return Err(Error::DimensionMismatch(format!(
                "link is {}x{} but block ({row_block}, {col_block}) is {r}x{c}",
                shape.rows, shape.cols
            )));
        }
        if self
            .placements
            .iter()
            .any(|p| p.row_block == row_block && p.col_block == col_block)
        {
            return Err(Error::DimensionMismatch(format!(
                "block ({row_block}, {col_block}) placed twice"
            )));
        }
        self.placements.push(Placement {
            row_block,
            col_block,
            link,
        });
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.row_sizes.iter().sum()
    }

    pub fn cols(&self) -> usize {
        self.col_sizes.iter().sum()
    }

    pub fn row_offset(&self, block: usize) -> usize {
        self.row_sizes[..block].iter().sum()
    }

    pub fn col_offset(&self, block: usize) -> usize {
        self.col_sizes[..block].iter().sum()
    }

    /// Rank cap from block-row and block-column rank sums:
    /// `min(sum_r min(rows_r, sum of ranks in r), same over columns)`.
    pub fn structural_cap(&self) -> usize {
        let mut row_rank = vec![0usize; self.row_sizes.len()];
        let mut col_rank = vec![0usize; self.col_sizes.len()];
        for p in &self.placements {
            let rk = self.links[p.link].rank;
            row_rank[p.row_block] += rk;
            col_rank[p.col_block] += rk;
        }
        let by_rows: usize = row_rank.iter().zip(&self.row_sizes).map(|(a, b)| *a.min(b)).sum();
        let by_cols: usize = col_rank.iter().zip(&self.col_sizes).map(|(a, b)| *a.min(b)).sum();
        by_rows.min(by_cols)
    }

    /// Assembles the full matrix from one value per link.
    pub fn assemble(&self, values: &[Matrix], domain: &ScalarDomain) -> Matrix {
        let mut out = Matrix::zeros(domain, self.rows(), self.cols());
        for p in &self.placements {
            out.paste(self.row_offset(p.row_block), self.col_offset(p.col_block), &values[p.link]);
        }
        out
    }

    fn assemble_prime(&self, field: PrimeField, values: &[FpMatrix]) -> FpMatrix {
        let mut out = FpMatrix::zeros(field, self.rows(), self.cols());
        for p in &self.placements {
            out.paste(self.row_offset(p.row_block), self.col_offset(p.col_block), &values[p.link]);
        }
        out
    }

    /// One random instantiation over `field`: every link is the product of
    /// two uniformly random factors of inner dimension equal to its rank.
    pub fn sample<R: rand::Rng + ?Sized>(&self, field: PrimeField, rng: &mut R) -> FpMatrix {
        let values: Vec<FpMatrix> = self
            .links
            .iter()
            .map(|l| FpMatrix::random_low_rank(field, l.rows, l.cols, l.rank, rng))
            .collect();
        self.assemble_prime(field, &values)
    }

    /// Pattern of the `K x K` block matrix of `spec` restricted to `shape`.
    /// Links are added in lexicographic `(j, i)` order.
    pub fn from_spec(spec: &NetworkSpec, shape: &RankShape) -> Self {
        let k = spec.k();
        let mut pattern = BlockPattern::new(spec.rx_antennas().to_vec(), spec.tx_antennas().to_vec());
        for j in 0..k {
            for i in 0..k {
                let include = match shape {
                    RankShape::Full => true,
                    RankShape::Stripped => i != j,
                    RankShape::Custom(mask) => mask[j][i],
                };
                if !include {
                    continue;
                }
                let link = pattern.add_link(LinkShape {
                    rows: spec.rx(j),
                    cols: spec.tx(i),
                    rank: spec.rank(j, i),
                    origin: (j, i),
                });
                pattern
                    .place(j, i, link)
                    .expect("spec-derived blocks always fit their partition");
            }
        }
        pattern
    }
}

/// Maximum rank over `trials` independent random instantiations of
/// `pattern` over `F_{2^61-1}`. Trial `t` is seeded by `(seed, t)`, so the
/// result is deterministic and non-decreasing in `trials`.
pub fn generic_rank_of(pattern: &BlockPattern, trials: usize, seed: u64) -> usize {
    let field = PrimeField::mersenne61();
    let cap = pattern.structural_cap();
    let mut best = 0;
    for t in 0..trials.max(1) {
        if best == cap {
            break;
        }
        let mut rng = trial_rng(seed, t as u64);
        best = best.max(pattern.sample(field, &mut rng).rank());
    }
    best
}

/// Which blocks of the network matrix take part in a rank query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RankShape {
    /// All `K^2` blocks, desired links at full rank.
    Full,
    /// Desired (diagonal) blocks replaced by zeros.
    Stripped,
    /// `mask[j][i]` selects block `(j, i)`.
    Custom(Vec<Vec<bool>>),
}

/// Generic rank of the network's block matrix under `shape`.
pub fn generic_rank(spec: &NetworkSpec, shape: &RankShape, trials: usize, seed: u64) -> usize {
    generic_rank_of(&BlockPattern::from_spec(spec, shape), trials, seed)
}

/// Coefficient `a^{[term]}` of link `link` in the rank-one expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VarIndex {
    pub link: usize,
    pub term: usize,
}

/// A block pattern whose links are written as sums of rank-one terms
/// `sum_m a^{[m]} v^{[m]} u^{[m]}` with the vectors `v`, `u` frozen at random
/// and the coefficients `a` left free.
#[derive(Clone, Debug)]
pub struct StructuredMatrix {
    pattern: BlockPattern,
    field: PrimeField,
    /// `terms[link][m] = (v, u)`.
    terms: Vec<Vec<(Vec<u64>, Vec<u64>)>>,
}

impl StructuredMatrix {
    pub fn new(pattern: BlockPattern, seed: u64) -> Self {
        let field = PrimeField::mersenne61();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms = pattern
            .links
            .iter()
            .map(|l| {
                (0..l.rank)
                    .map(|_| {
                        let v = (0..l.rows).map(|_| field.random(&mut rng)).collect();
                        let u = (0..l.cols).map(|_| field.random(&mut rng)).collect();
                        (v, u)
                    })
                    .collect()
            })
            .collect();
        Self {
            pattern,
            field,
            terms,
        }
    }

    pub fn pattern(&self) -> &BlockPattern {
        &self.pattern
    }

    /// All coefficient variables in lexicographic `(link, term)` order.
    pub fn variables(&self) -> Vec<VarIndex> {
        self.terms
            .iter()
            .enumerate()
            .flat_map(|(link, ts)| (0..ts.len()).map(move |term| VarIndex { link, term }))
            .collect()
    }

    /// Instantiates the matrix at the given coefficients (`coeffs[link][term]`).
    pub fn evaluate(&self, coeffs: &[Vec<u64>]) -> FpMatrix {
        let f = self.field;
        let values: Vec<FpMatrix> = self
            .pattern
            .links
            .iter()
            .zip(&self.terms)
            .zip(coeffs)
            .map(|((shape, terms), a)| {
                let mut block = FpMatrix::zeros(f, shape.rows, shape.cols);
                for ((v, u), &coef) in terms.iter().zip(a) {
                    if coef == 0 {
                        continue;
                    }
                    for r in 0..shape.rows {
                        let av = f.mul(coef, v[r]);
                        for c in 0..shape.cols {
                            let cur = block.get(r, c);
                            block.set(r, c, f.add(cur, f.mul(av, u[c])));
                        }
                    }
                }
                block
            })
            .collect();
        self.pattern.assemble_prime(f, &values)
    }

    /// True iff the determinant, as a polynomial in the free coefficients
    /// with every variable in `zeroed` fixed to zero, is certified nonzero:
    /// some trial at a random point gives a nonzero determinant.
    pub fn det_nonzero_with_zeroed(&self, zeroed: &[VarIndex], trials: usize, seed: u64) -> Result<bool> {
        let (rows, cols) = (self.pattern.rows(), self.pattern.cols());
        if rows != cols {
            return Err(Error::NotSquare { rows, cols });
        }
        for t in 0..trials.max(1) {
            let mut rng = trial_rng(seed, t as u64);
            let mut coeffs: Vec<Vec<u64>> = self
                .terms
                .iter()
                .map(|ts| ts.iter().map(|_| self.field.random(&mut rng)).collect())
                .collect();
            for var in zeroed {
                coeffs[var.link][var.term] = 0;
            }
            if self.evaluate(&coeffs).determinant()? != 0 {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn det_nonzero_with_var_zeroed(&self, var: VarIndex, trials: usize, seed: u64) -> Result<bool> {
        self.det_nonzero_with_zeroed(&[var], trials, seed)
    }
}
