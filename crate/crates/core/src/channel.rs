//! Network instances and their channel realizations.
//!
//! Indices are 0-based in the API. In JSON, links are keyed `H_j_i` with
//! 1-based receiver `j` and transmitter `i`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::feasibility::ReducedRankCertificate;
use crate::linalg::complex::{self, block_diagonal, CMatrix, C64};
use crate::linalg::{FpMatrix, Matrix, ScalarDomain};

/// Unvalidated network description, exactly as it appears in JSON.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawNetworkSpec {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: Vec<usize>,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    /// `d[j][i]` bounds the rank of the link from transmitter `i` to
    /// receiver `j`; the diagonal is `null`.
    #[serde(rename = "D")]
    pub d: Vec<Vec<Option<usize>>>,
}

/// A validated `K`-user rank-constrained MIMO interference network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    m: Vec<usize>,
    n: Vec<usize>,
    /// Cross ranks; the diagonal holds `min(M_i, N_i)` (desired links are full rank).
    d: Vec<Vec<usize>>,
}

/// Checks shape and rank constraints and returns the validated spec.
pub fn validate_spec(raw: RawNetworkSpec) -> Result<NetworkSpec> {
    let k = raw.k;
    if k < 2 {
        return Err(Error::BadShape(format!("K = {k}, need at least 2 users")));
    }
    if raw.m.len() != k || raw.n.len() != k {
        return Err(Error::BadShape(format!(
            "K = {k} but M has {} and N has {} entries",
            raw.m.len(),
            raw.n.len()
        )));
    }
    if raw.d.len() != k || raw.d.iter().any(|row| row.len() != k) {
        return Err(Error::BadShape(format!("D must be {k}x{k}")));
    }
    if let Some(pos) = raw.m.iter().chain(&raw.n).position(|&a| a == 0) {
        return Err(Error::BadShape(format!("antenna count #{} is zero", pos + 1)));
    }
    let mut d = vec![vec![0; k]; k];
    for j in 0..k {
        for i in 0..k {
            if i == j {
                d[j][i] = raw.m[i].min(raw.n[i]);
                continue;
            }
            let rank = raw.d[j][i].ok_or_else(|| {
                Error::BadShape(format!("D[{}][{}] is null off the diagonal", j + 1, i + 1))
            })?;
            let limit = raw.m[i].min(raw.n[j]);
            if rank > limit {
                return Err(Error::RankExceedsDimension {
                    j: j + 1,
                    i: i + 1,
                    rank,
                    limit,
                });
            }
            d[j][i] = rank;
        }
    }
    Ok(NetworkSpec {
        m: raw.m,
        n: raw.n,
        d,
    })
}

impl NetworkSpec {
    /// `d[j][i]` for `i != j`; diagonal entries are ignored.
    pub fn new(m: Vec<usize>, n: Vec<usize>, d: Vec<Vec<usize>>) -> Result<Self> {
        let k = m.len();
        let d = d
            .into_iter()
            .enumerate()
            .map(|(j, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(i, v)| (i != j).then_some(v))
                    .collect()
            })
            .collect();
        validate_spec(RawNetworkSpec { k, m, n, d })
    }

    /// Square case `N = M`.
    pub fn square(m: Vec<usize>, d: Vec<Vec<usize>>) -> Result<Self> {
        Self::new(m.clone(), m, d)
    }

    /// Every cross link at its maximal rank `min(M_i, N_j)`.
    pub fn full_rank(m: Vec<usize>, n: Vec<usize>) -> Result<Self> {
        let k = m.len();
        if n.len() != k {
            return Err(Error::BadShape("M and N differ in length".into()));
        }
        let d = (0..k)
            .map(|j| (0..k).map(|i| m[i].min(n[j])).collect())
            .collect();
        Self::new(m, n, d)
    }

    /// `K` users with `M` antennas each and every cross rank equal to `D`.
    pub fn symmetric(k: usize, m: usize, d: usize) -> Result<Self> {
        Self::square(vec![m; k], vec![vec![d; k]; k])
    }

    /// Single-user network. Only the ergodic machinery accepts `K = 1`.
    #[cfg(test)]
    pub(crate) fn single_user(m: usize) -> Self {
        NetworkSpec {
            m: vec![m],
            n: vec![m],
            d: vec![vec![m]],
        }
    }

    pub fn k(&self) -> usize {
        self.m.len()
    }

    /// Transmit antennas `M_i`.
    pub fn tx(&self, i: usize) -> usize {
        self.m[i]
    }

    /// Receive antennas `N_j`.
    pub fn rx(&self, j: usize) -> usize {
        self.n[j]
    }

    pub fn tx_antennas(&self) -> &[usize] {
        &self.m
    }

    pub fn rx_antennas(&self) -> &[usize] {
        &self.n
    }

    /// Rank bound of link `(j, i)`; full rank on the diagonal.
    pub fn rank(&self, j: usize, i: usize) -> usize {
        self.d[j][i]
    }

    pub fn m_sum(&self) -> usize {
        self.m.iter().sum()
    }

    pub fn n_sum(&self) -> usize {
        self.n.iter().sum()
    }

    pub fn is_square(&self) -> bool {
        self.m == self.n
    }

    pub fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquareCase)
        }
    }

    pub fn require_k(&self, k: usize) -> Result<()> {
        if self.k() == k {
            Ok(())
        } else {
            Err(Error::WrongK {
                expected: k,
                got: self.k(),
            })
        }
    }

    /// Copy with one cross rank replaced.
    pub fn with_rank(&self, j: usize, i: usize, rank: usize) -> Result<Self> {
        let mut raw = self.to_raw();
        raw.d[j][i] = Some(rank);
        validate_spec(raw)
    }

    /// Copy with users reordered: user `a` of the result is user `perm[a]` of `self`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let k = self.k();
        NetworkSpec {
            m: perm.iter().map(|&p| self.m[p]).collect(),
            n: perm.iter().map(|&p| self.n[p]).collect(),
            d: (0..k)
                .map(|j| (0..k).map(|i| self.d[perm[j]][perm[i]]).collect())
                .collect(),
        }
    }

    pub fn to_raw(&self) -> RawNetworkSpec {
        let k = self.k();
        RawNetworkSpec {
            k,
            m: self.m.clone(),
            n: self.n.clone(),
            d: (0..k)
                .map(|j| (0..k).map(|i| (i != j).then_some(self.d[j][i])).collect())
                .collect(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: RawNetworkSpec = serde_json::from_str(s)?;
        validate_spec(raw)
    }
}

impl Serialize for NetworkSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_raw().serialize(s)
    }
}

impl<'de> Deserialize<'de> for NetworkSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawNetworkSpec::deserialize(d)?;
        validate_spec(raw).map_err(serde::de::Error::custom)
    }
}

/// Dense matrix with a block partition.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    pub row_sizes: Vec<usize>,
    pub col_sizes: Vec<usize>,
    pub data: Matrix,
}

/// One time slot: a matrix for every `(receiver, transmitter)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    spec: NetworkSpec,
    domain: ScalarDomain,
    seed: Option<u64>,
    blocks: Vec<Vec<Matrix>>,
}

/// Generic realization: every cross block `(j, i)` is the product of an
/// `N_j x D_ji` and a `D_ji x M_i` i.i.d. factor; desired blocks are dense
/// i.i.d. Complex entries are CN(0, 1), prime-field entries uniform.
/// Blocks are drawn in row-major `(j, i)` order from a ChaCha stream seeded
/// with `seed`.
pub fn sample_generic(spec: &NetworkSpec, seed: u64, domain: ScalarDomain) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = spec.k();
    let mut blocks = Vec::with_capacity(k);
    for j in 0..k {
        let mut row = Vec::with_capacity(k);
        for i in 0..k {
            let (rows, cols) = (spec.rx(j), spec.tx(i));
            let block = match (&domain, i == j) {
                (ScalarDomain::ComplexFloat { .. }, true) => {
                    Matrix::Complex(complex::random_gaussian(rows, cols, &mut rng))
                }
                (ScalarDomain::ComplexFloat { .. }, false) => {
                    let rank = spec.rank(j, i);
                    let left = complex::random_gaussian(rows, rank, &mut rng);
                    let right = complex::random_gaussian(rank, cols, &mut rng);
                    Matrix::Complex(left * right)
                }
                (ScalarDomain::PrimeField(f), true) => {
                    Matrix::Prime(FpMatrix::random(*f, rows, cols, &mut rng))
                }
                (ScalarDomain::PrimeField(f), false) => Matrix::Prime(FpMatrix::random_low_rank(
                    *f,
                    rows,
                    cols,
                    spec.rank(j, i),
                    &mut rng,
                )),
            };
            row.push(block);
        }
        blocks.push(row);
    }
    ChannelRealization {
        spec: spec.clone(),
        domain,
        seed: Some(seed),
        blocks,
    }
}

/// Zeroes the desired blocks of a square-case realization, giving the
/// `M_sum x M_sum` interference matrix.
pub fn strip_desired(real: &ChannelRealization) -> Result<BlockMatrix> {
    real.spec.require_square()?;
    let mut full = real.full_matrix();
    let k = real.spec.k();
    for kk in 0..k {
        let r0: usize = real.spec.rx_antennas()[..kk].iter().sum();
        let c0: usize = real.spec.tx_antennas()[..kk].iter().sum();
        let zero = Matrix::zeros(&real.domain, real.spec.rx(kk), real.spec.tx(kk));
        full.data.paste(r0, c0, &zero);
    }
    Ok(full)
}

/// The 0/1 realization that wires the antenna groups of a reduced-rank
/// certificate through identity blocks.
///
/// Receiver `i` splits its antennas, in order, into groups of sizes
/// `Dbar[i][i+1], Dbar[i][i+2], ...` (indices mod `K`); transmitter `j`
/// splits its antennas into groups `Dbar[j+1][j], Dbar[j+2][j], ...`. Group
/// `(i, j)` on both sides is joined by an identity. Each antenna then meets
/// exactly one undesired partner, so the stripped matrix is a permutation
/// matrix. Desired blocks are identities.
pub fn canonical_realization(
    spec: &NetworkSpec,
    cert: &ReducedRankCertificate,
    domain: ScalarDomain,
) -> Result<ChannelRealization> {
    spec.require_square()?;
    cert.check(spec)?;
    let k = spec.k();
    let dbar = cert.entries();

    let mut rx_start = vec![vec![0; k]; k];
    for i in 0..k {
        let mut cursor = 0;
        for step in 1..k {
            let j = (i + step) % k;
            rx_start[i][j] = cursor;
            cursor += dbar[i][j];
        }
    }
    let mut tx_start = vec![vec![0; k]; k];
    for j in 0..k {
        let mut cursor = 0;
        for step in 1..k {
            let i = (j + step) % k;
            tx_start[i][j] = cursor;
            cursor += dbar[i][j];
        }
    }

    let blocks = (0..k)
        .map(|r| {
            (0..k)
                .map(|t| {
                    let (rows, cols) = (spec.rx(r), spec.tx(t));
                    let ones: Vec<(usize, usize)> = if r == t {
                        (0..rows.min(cols)).map(|a| (a, a)).collect()
                    } else {
                        (0..dbar[r][t])
                            .map(|a| (rx_start[r][t] + a, tx_start[r][t] + a))
                            .collect()
                    };
                    let mut block = Matrix::zeros(&domain, rows, cols);
                    match &mut block {
                        Matrix::Complex(m) => {
                            for (a, b) in ones {
                                m[(a, b)] = C64::new(1.0, 0.0);
                            }
                        }
                        Matrix::Prime(m) => {
                            for (a, b) in ones {
                                m.set(a, b, 1);
                            }
                        }
                    }
                    block
                })
                .collect()
        })
        .collect();
    Ok(ChannelRealization {
        spec: spec.clone(),
        domain,
        seed: None,
        blocks,
    })
}

impl ChannelRealization {
    /// Wraps explicit blocks, checking every block's shape.
    pub fn from_blocks(
        spec: &NetworkSpec,
        domain: ScalarDomain,
        seed: Option<u64>,
        blocks: Vec<Vec<Matrix>>,
    ) -> Result<Self> {
        let k = spec.k();
        if blocks.len() != k || blocks.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch(format!("need {k}x{k} blocks")));
        }
        for (j, row) in blocks.iter().enumerate() {
            for (i, b) in row.iter().enumerate() {
                if (b.rows(), b.cols()) != (spec.rx(j), spec.tx(i)) {
                    return Err(Error::DimensionMismatch(format!(
                        "H_{}_{} is {}x{}, expected {}x{}",
                        j + 1,
                        i + 1,
                        b.rows(),
                        b.cols(),
                        spec.rx(j),
                        spec.tx(i)
                    )));
                }
                if b.as_complex().is_some() != domain.is_complex() {
                    return Err(Error::UnsupportedDomain(format!(
                        "H_{}_{} is not in the {} domain",
                        j + 1,
                        i + 1,
                        domain.tag()
                    )));
                }
            }
        }
        Ok(Self {
            spec: spec.clone(),
            domain,
            seed,
            blocks,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn domain(&self) -> ScalarDomain {
        self.domain
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn block(&self, j: usize, i: usize) -> &Matrix {
        &self.blocks[j][i]
    }

    pub fn complex_block(&self, j: usize, i: usize) -> Result<&CMatrix> {
        self.blocks[j][i]
            .as_complex()
            .ok_or_else(|| Error::UnsupportedDomain("expected a complex realization".into()))
    }

    /// The overall `N_sum x M_sum` matrix.
    pub fn full_matrix(&self) -> BlockMatrix {
        let spec = &self.spec;
        let mut data = Matrix::zeros(&self.domain, spec.n_sum(), spec.m_sum());
        let mut r0 = 0;
        for j in 0..spec.k() {
            let mut c0 = 0;
            for i in 0..spec.k() {
                data.paste(r0, c0, &self.blocks[j][i]);
                c0 += spec.tx(i);
            }
            r0 += spec.rx(j);
        }
        BlockMatrix {
            row_sizes: spec.rx_antennas().to_vec(),
            col_sizes: spec.tx_antennas().to_vec(),
            data,
        }
    }

    /// JSON object with `seed`, `domain`, and one `H_j_i` entry per block.
    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("seed".into(), json!(self.seed));
        obj.insert("domain".into(), json!(self.domain.tag()));
        self.write_blocks(&mut obj);
        Value::Object(obj)
    }

    fn write_blocks(&self, obj: &mut Map<String, Value>) {
        let k = self.spec.k();
        for j in 0..k {
            for i in 0..k {
                obj.insert(format!("H_{}_{}", j + 1, i + 1), matrix_to_json(&self.blocks[j][i]));
            }
        }
    }

    pub fn from_json(spec: &NetworkSpec, value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::BadShape("realization must be a JSON object".into()))?;
        let domain = match obj.get("domain").and_then(Value::as_str) {
            Some(tag) => ScalarDomain::from_tag(tag)?,
            None => ScalarDomain::complex(),
        };
        let seed = obj.get("seed").and_then(Value::as_u64);
        Self::read_blocks(spec, domain, seed, obj)
    }

    fn read_blocks(
        spec: &NetworkSpec,
        domain: ScalarDomain,
        seed: Option<u64>,
        obj: &Map<String, Value>,
    ) -> Result<Self> {
        let k = spec.k();
        let mut blocks = Vec::with_capacity(k);
        for j in 0..k {
            let mut row = Vec::with_capacity(k);
            for i in 0..k {
                let key = format!("H_{}_{}", j + 1, i + 1);
                let v = obj
                    .get(&key)
                    .ok_or_else(|| Error::BadShape(format!("missing {key}")))?;
                row.push(matrix_from_json(v, &domain, spec.rx(j), spec.tx(i))?);
            }
            blocks.push(row);
        }
        Self::from_blocks(spec, domain, seed, blocks)
    }
}

/// A symbol extension: `n` slots over one network.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedRealization {
    slots: Vec<ChannelRealization>,
}

impl ExtendedRealization {
    pub fn new(slots: Vec<ChannelRealization>) -> Result<Self> {
        let Some(first) = slots.first() else {
            return Err(Error::BadShape("an extension needs at least one slot".into()));
        };
        if slots
            .iter()
            .any(|s| s.spec != first.spec || s.domain.tag() != first.domain.tag())
        {
            return Err(Error::DimensionMismatch("slots disagree on spec or domain".into()));
        }
        Ok(Self { slots })
    }

    pub fn single(real: ChannelRealization) -> Self {
        Self { slots: vec![real] }
    }

    pub fn n(&self) -> usize {
        self.slots.len()
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.slots[0].spec
    }

    pub fn seed(&self) -> Option<u64> {
        self.slots[0].seed
    }

    pub fn slots(&self) -> &[ChannelRealization] {
        &self.slots
    }

    pub fn slot(&self, t: usize) -> &ChannelRealization {
        &self.slots[t]
    }

    /// The `n N_j x n M_i` block-diagonal channel of link `(j, i)`.
    pub fn extended_link(&self, j: usize, i: usize) -> Result<CMatrix> {
        let blocks = self
            .slots
            .iter()
            .map(|s| s.complex_block(j, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(block_diagonal(&blocks))
    }

    /// True when every cross block is identical across slots.
    pub fn cross_links_constant(&self) -> bool {
        let k = self.spec().k();
        (0..k).all(|j| {
            (0..k)
                .filter(|&i| i != j)
                .all(|i| self.slots.iter().all(|s| s.blocks[j][i] == self.slots[0].blocks[j][i]))
        })
    }

    pub fn to_json(&self) -> Value {
        let slots: Vec<Value> = self
            .slots
            .iter()
            .map(|s| {
                let mut obj = Map::new();
                s.write_blocks(&mut obj);
                Value::Object(obj)
            })
            .collect();
        json!({
            "seed": self.seed(),
            "domain": self.slots[0].domain.tag(),
            "n": self.n(),
            "slots": slots,
        })
    }

    /// Reads either the multi-slot form (`"slots": [...]`) or a single
    /// realization object, which becomes a one-slot extension.
    pub fn from_json(spec: &NetworkSpec, value: &Value) -> Result<Self> {
        let Some(slots) = value.get("slots") else {
            return Ok(Self::single(ChannelRealization::from_json(spec, value)?));
        };
        let domain = match value.get("domain").and_then(Value::as_str) {
            Some(tag) => ScalarDomain::from_tag(tag)?,
            None => ScalarDomain::complex(),
        };
        let seed = value.get("seed").and_then(Value::as_u64);
        let slots = slots
            .as_array()
            .ok_or_else(|| Error::BadShape("slots must be an array".into()))?
            .iter()
            .map(|s| {
                let obj = s
                    .as_object()
                    .ok_or_else(|| Error::BadShape("slot must be an object".into()))?;
                ChannelRealization::read_blocks(spec, domain, seed, obj)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(slots)
    }
}

/// Two slots with identical cross links and independently drawn desired
/// links whose slot difference is full rank (redrawn on the null event).
pub fn extend_ergodic_pair(spec: &NetworkSpec, seed: u64) -> ExtendedRealization {
    let first = sample_generic(spec, seed, ScalarDomain::complex());
    let mut rng = crate::linalg::structured::trial_rng(seed, 1);
    let mut second = first.clone();
    for kk in 0..spec.k() {
        let (rows, cols) = (spec.rx(kk), spec.tx(kk));
        let h1 = first.blocks[kk][kk].as_complex().expect("complex sample").clone();
        loop {
            let h2 = complex::random_gaussian(rows, cols, &mut rng);
            let diff = &h1 - &h2;
            if complex::numerical_rank(&diff, complex::DEFAULT_TOLERANCE) == rows.min(cols) {
                second.blocks[kk][kk] = Matrix::Complex(h2);
                break;
            }
        }
    }
    ExtendedRealization {
        slots: vec![first, second],
    }
}

pub(crate) fn cmatrix_to_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| {
                Value::Array(
                    (0..m.ncols())
                        .map(|c| json!([m[(r, c)].re, m[(r, c)].im]))
                        .collect(),
                )
            })
            .collect(),
    )
}

fn matrix_to_json(m: &Matrix) -> Value {
    match m {
        Matrix::Complex(c) => cmatrix_to_json(c),
        Matrix::Prime(p) => Value::Array(
            p.to_rows()
                .into_iter()
                .map(|row| Value::Array(row.into_iter().map(|v| json!([v, 0])).collect()))
                .collect(),
        ),
    }
}

pub(crate) fn cmatrix_from_json(v: &Value, rows: usize, cols: usize) -> Result<CMatrix> {
    let bad = || Error::BadShape(format!("expected a {rows}x{cols} array of [re, im] pairs"));
    let arr = v.as_array().ok_or_else(bad)?;
    if arr.len() != rows {
        return Err(bad());
    }
    let mut m = CMatrix::zeros(rows, cols);
    for (r, row) in arr.iter().enumerate() {
        let row = row.as_array().ok_or_else(bad)?;
        if row.len() != cols {
            return Err(bad());
        }
        for (c, z) in row.iter().enumerate() {
            let pair = z.as_array().filter(|p| p.len() == 2).ok_or_else(bad)?;
            let re = pair[0].as_f64().ok_or_else(bad)?;
            let im = pair[1].as_f64().ok_or_else(bad)?;
            m[(r, c)] = C64::new(re, im);
        }
    }
    Ok(m)
}

fn matrix_from_json(v: &Value, domain: &ScalarDomain, rows: usize, cols: usize) -> Result<Matrix> {
    match domain {
        ScalarDomain::ComplexFloat { .. } => Ok(Matrix::Complex(cmatrix_from_json(v, rows, cols)?)),
        ScalarDomain::PrimeField(f) => {
            let bad = || Error::BadShape(format!("expected a {rows}x{cols} array of [v, 0] pairs"));
            let arr = v.as_array().filter(|a| a.len() == rows).ok_or_else(bad)?;
            let mut m = FpMatrix::zeros(*f, rows, cols);
            for (r, row) in arr.iter().enumerate() {
                let row = row.as_array().filter(|a| a.len() == cols).ok_or_else(bad)?;
                for (c, z) in row.iter().enumerate() {
                    let val = z
                        .as_array()
                        .and_then(|p| p.first())
                        .and_then(Value::as_u64)
                        .ok_or_else(bad)?;
                    m.set(r, c, val);
                }
            }
            Ok(Matrix::Prime(m))
        }
    }
}
