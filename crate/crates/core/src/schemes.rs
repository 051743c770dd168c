//! Linear beamforming schemes over symbol extensions and their verifier.
//!
//! Over `n` slots user `k` sends `m_k` streams through `V_k`
//! (`n M_k x m_k`) and receiver `k` applies `U_k` (`m_k x n N_k`). A scheme
//! is decodable when `U_j H_ji V_i = 0` for every `j != i` and
//! `rank(U_k H_kk V_k) = m_k`, with `H` the block-diagonal extended channel.
//! Fresh symbols per slot are block-diagonal columns of `V_k`; repeated
//! symbols are stacked columns.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::channel::{
    cmatrix_from_json, cmatrix_to_json, extend_ergodic_pair, ChannelRealization, ExtendedRealization,
    NetworkSpec,
};
use crate::error::{Error, Result};
use crate::feasibility::SchemeFamily;
use crate::linalg::complex::{
    frobenius, hstack, left_null_space, null_space_basis, numerical_rank,
    random_gaussian, vstack,
};
use crate::linalg::structured::trial_rng;
use crate::linalg::{CMatrix, DEFAULT_TOLERANCE};
use crate::rational::Dof;

/// Beamformer and filter of one user.
#[derive(Clone, Debug, PartialEq)]
pub struct UserStreams {
    pub m: usize,
    pub v: CMatrix,
    pub u: CMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearScheme {
    pub n: usize,
    pub users: Vec<UserStreams>,
}

impl LinearScheme {
    /// `d_k = m_k / n`.
    pub fn dof(&self) -> Vec<Dof> {
        self.users
            .iter()
            .map(|u| Dof::new(u.m as i64, self.n as i64))
            .collect()
    }

    pub fn sum_dof(&self) -> Dof {
        self.dof().into_iter().sum()
    }

    /// Every user silent.
    pub fn silent(spec: &NetworkSpec, n: usize) -> Self {
        let users = (0..spec.k())
            .map(|k| UserStreams {
                m: 0,
                v: CMatrix::zeros(spec.tx(k) * n, 0),
                u: CMatrix::zeros(0, spec.rx(k) * n),
            })
            .collect();
        Self { n, users }
    }

    fn check_shapes(&self, spec: &NetworkSpec) -> Result<()> {
        if self.n == 0 {
            return Err(Error::DimensionMismatch("extension length must be positive".into()));
        }
        if self.users.len() != spec.k() {
            return Err(Error::DimensionMismatch(format!(
                "scheme has {} users, network has {}",
                self.users.len(),
                spec.k()
            )));
        }
        for (k, s) in self.users.iter().enumerate() {
            let v = (spec.tx(k) * self.n, s.m);
            let u = (s.m, spec.rx(k) * self.n);
            if s.v.shape() != v || s.u.shape() != u {
                return Err(Error::DimensionMismatch(format!(
                    "user {}: V is {:?} (expected {v:?}), U is {:?} (expected {u:?})",
                    k + 1,
                    s.v.shape(),
                    s.u.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "users": self.users.iter().map(|s| json!({
                "m": s.m,
                "V": cmatrix_to_json(&s.v),
                "U": cmatrix_to_json(&s.u),
            })).collect::<Vec<_>>(),
        })
    }

    /// Parses scheme JSON; shapes come from `spec`.
    pub fn from_json(spec: &NetworkSpec, value: &Value) -> Result<Self> {
        let bad = |what: &str| Error::BadShape(format!("scheme JSON: {what}"));
        let n = value["n"].as_u64().ok_or_else(|| bad("missing n"))? as usize;
        let users = value["users"].as_array().ok_or_else(|| bad("missing users"))?;
        if users.len() != spec.k() {
            return Err(bad(&format!("expected {} users", spec.k())));
        }
        let users = users
            .iter()
            .enumerate()
            .map(|(k, u)| {
                let m = u["m"].as_u64().ok_or_else(|| bad("missing m"))? as usize;
                Ok(UserStreams {
                    m,
                    v: cmatrix_from_json(&u["V"], spec.tx(k) * n, m)?,
                    u: cmatrix_from_json(&u["U"], m, spec.rx(k) * n)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let scheme = Self { n, users };
        scheme.check_shapes(spec)?;
        Ok(scheme)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairResidual {
    /// 1-based receiver.
    pub rx: usize,
    /// 1-based transmitter.
    pub tx: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DesiredRank {
    pub user: usize,
    pub rank: usize,
    pub m: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub n: usize,
    pub tolerance: f64,
    pub residuals: Vec<PairResidual>,
    pub desired: Vec<DesiredRank>,
    pub max_residual: f64,
    pub pass: bool,
    pub dof: Vec<Dof>,
    pub sum_dof: Dof,
}

/// `|A B C|_F / (|A|_F |B|_F |C|_F)`, zero when any factor vanishes.
fn relative_residual(u: &CMatrix, h: &CMatrix, v: &CMatrix) -> f64 {
    let scale = frobenius(u) * frobenius(h) * frobenius(v);
    if scale == 0.0 {
        return 0.0;
    }
    frobenius(&(u * h * v)) / scale
}

/// Checks both decodability families on the extended channel. Residuals
/// are relative (see [`relative_residual`]) and compared against `tol`;
/// desired ranks use the realization's rank tolerance.
pub fn verify_scheme(ext: &ExtendedRealization, scheme: &LinearScheme, tol: f64) -> Result<VerificationReport> {
    let spec = ext.spec();
    if scheme.n != ext.n() {
        return Err(Error::DimensionMismatch(format!(
            "scheme spans {} slots, channel has {}",
            scheme.n,
            ext.n()
        )));
    }
    scheme.check_shapes(spec)?;
    let rank_tol = ext.slot(0).domain().tolerance();
    let k = spec.k();
    let mut residuals = Vec::new();
    let mut desired = Vec::new();
    for j in 0..k {
        for i in 0..k {
            let h = ext.extended_link(j, i)?;
            let (uj, vi) = (&scheme.users[j].u, &scheme.users[i].v);
            if i == j {
                desired.push(DesiredRank {
                    user: j + 1,
                    rank: numerical_rank(&(uj * &h * vi), rank_tol),
                    m: scheme.users[j].m,
                });
            } else {
                residuals.push(PairResidual {
                    rx: j + 1,
                    tx: i + 1,
                    residual: relative_residual(uj, &h, vi),
                });
            }
        }
    }
    let max_residual = residuals.iter().map(|r| r.residual).fold(0.0, f64::max);
    let pass = max_residual <= tol && desired.iter().all(|d| d.rank == d.m);
    Ok(VerificationReport {
        n: scheme.n,
        tolerance: tol,
        residuals,
        desired,
        max_residual,
        pass,
        dof: scheme.dof(),
        sum_dof: scheme.sum_dof(),
    })
}

fn require_pair(ext: &ExtendedRealization) -> Result<()> {
    if ext.n() != 2 {
        return Err(Error::NotErgodicPair(format!("need 2 slots, got {}", ext.n())));
    }
    if !ext.cross_links_constant() {
        return Err(Error::NotErgodicPair("cross links differ between slots".into()));
    }
    Ok(())
}

fn desired_difference(ext: &ExtendedRealization, k: usize) -> Result<CMatrix> {
    Ok(ext.slot(0).complex_block(k, k)? - ext.slot(1).complex_block(k, k)?)
}

/// Repeats every symbol over both slots; receivers subtract the slots,
/// cancelling the unchanged interference. `d_k = min(M_k, N_k) / 2`.
pub fn ergodic_half_cake(ext: &ExtendedRealization) -> Result<LinearScheme> {
    require_pair(ext)?;
    let spec = ext.spec();
    let tol = ext.slot(0).domain().tolerance();
    let users = (0..spec.k())
        .map(|k| {
            let delta = desired_difference(ext, k)?;
            let (rx, tx) = (spec.rx(k), spec.tx(k));
            let m = rx.min(tx);
            if numerical_rank(&delta, tol) < m {
                return Err(Error::DegenerateDesiredDifference { user: k + 1 });
            }
            // W projects onto the difference space; V picks its row space
            let (v, w) = match tx.cmp(&rx) {
                std::cmp::Ordering::Equal => (CMatrix::identity(tx, tx), CMatrix::identity(rx, rx)),
                std::cmp::Ordering::Less => (CMatrix::identity(tx, tx), delta.adjoint()),
                std::cmp::Ordering::Greater => (delta.adjoint(), CMatrix::identity(rx, rx)),
            };
            Ok(UserStreams {
                m,
                v: vstack(&[&v, &v]),
                u: hstack(&[&w, &-&w]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LinearScheme { n: 2, users })
}

/// `count` generic combinations of the columns of `basis`.
fn pick<R: Rng>(basis: &CMatrix, count: usize, rng: &mut R, what: &str) -> Result<CMatrix> {
    if basis.ncols() < count {
        return Err(Error::NullSpaceEmpty(format!(
            "{what}: need {count} dimensions, found {}",
            basis.ncols()
        )));
    }
    Ok(basis * random_gaussian(basis.ncols(), count, rng))
}

/// Streams for one user: fresh vectors `z` (one symbol per slot) and
/// repeated `e` columns; filters `uz` per slot plus slot-differenced `ue`.
fn mixed_user(vz: Option<&CMatrix>, ve: &CMatrix, uz: Option<&CMatrix>, ue: &CMatrix) -> UserStreams {
    let mut vcols = Vec::new();
    let mut urows = Vec::new();
    if let (Some(vz), Some(uz)) = (vz, uz) {
        let zv = CMatrix::zeros(vz.nrows(), vz.ncols());
        let zu = CMatrix::zeros(uz.nrows(), uz.ncols());
        vcols.push(vstack(&[vz, &zv]));
        vcols.push(vstack(&[&zv, vz]));
        urows.push(hstack(&[uz, &zu]));
        urows.push(hstack(&[&zu, uz]));
    }
    vcols.push(vstack(&[ve, ve]));
    urows.push(hstack(&[ue, &-ue]));
    let v = hstack(&vcols.iter().collect::<Vec<_>>());
    let u = vstack(&urows.iter().collect::<Vec<_>>());
    UserStreams { m: v.ncols(), v, u }
}

fn scheme_rng(ext: &ExtendedRealization) -> ChaCha8Rng {
    trial_rng(ext.seed().unwrap_or(0), 0x5c4e)
}

fn block(ext: &ExtendedRealization, j: usize, i: usize) -> Result<CMatrix> {
    Ok(ext.slot(0).complex_block(j, i)?.clone())
}

fn require_three_square(spec: &NetworkSpec) -> Result<()> {
    spec.require_k(3)?;
    spec.require_square()
}

/// Stacked zero-forcing and alignment system `A` for the pair `(p, q)`:
/// `A [v_p; v_q] = 0` iff `H_qp v_p = 0`, `H_pq v_q = 0` and
/// `H_rp v_p = H_rq v_q`.
pub fn aligned_pair_system(real: &ChannelRealization, p: usize, q: usize, r: usize) -> Result<CMatrix> {
    let h = |j, i| real.complex_block(j, i).cloned();
    let (hqp, hpq, hrp, hrq) = (h(q, p)?, h(p, q)?, h(r, p)?, h(r, q)?);
    let top = hstack(&[&hqp, &CMatrix::zeros(hqp.nrows(), hpq.ncols())]);
    let mid = hstack(&[&CMatrix::zeros(hpq.nrows(), hqp.ncols()), &hpq]);
    let bot = hstack(&[&hrp, &-&hrq]);
    Ok(vstack(&[&top, &mid, &bot]))
}

/// One aligned zero-forced stream per slot at users `p` and `q`, ergodic
/// alignment for the rest. Needs `D_pq + D_qp < M_p + M_q - M_r`.
/// DoF `((M_p + 1) / 2, (M_q + 1) / 2, (M_r - 1) / 2)`.
pub fn aligned_pair_scheme(ext: &ExtendedRealization, p: usize, q: usize, r: usize) -> Result<LinearScheme> {
    let spec = ext.spec();
    require_three_square(spec)?;
    require_pair(ext)?;
    let (mp, mq, mr) = (spec.tx(p), spec.tx(q), spec.tx(r));
    if spec.rank(p, q) + spec.rank(q, p) + mr >= mp + mq {
        return Err(Error::ConditionFails(format!(
            "D_{0}{1} + D_{1}{0} = {2} is not below M_{0} + M_{1} - M_{3} = {4}",
            p + 1,
            q + 1,
            spec.rank(p, q) + spec.rank(q, p),
            r + 1,
            (mp + mq) as i64 - mr as i64
        )));
    }
    let tol = DEFAULT_TOLERANCE;
    let mut rng = scheme_rng(ext);
    let a = aligned_pair_system(ext.slot(0), p, q, r)?;
    let v = pick(&null_space_basis(&a, tol), 1, &mut rng, "aligned beamformers")?;
    let (vp, vq) = (v.rows(0, mp).into_owned(), v.rows(mp, mq).into_owned());

    // receive side: u_p H_pq = 0, u_q H_qp = 0, u_p H_pr = u_q H_qr
    let (hpq, hqp, hpr, hqr) = (block(ext, p, q)?, block(ext, q, p)?, block(ext, p, r)?, block(ext, q, r)?);
    let b_top = hstack(&[&hpq, &CMatrix::zeros(hpq.nrows(), mp), &hpr]);
    let b_bot = hstack(&[&CMatrix::zeros(hqp.nrows(), mq), &hqp, &-&hqr]);
    let lnull = left_null_space(&vstack(&[&b_top, &b_bot]), tol);
    let u = pick(&lnull.transpose(), 1, &mut rng, "aligned filters")?.transpose();
    let (up, uq) = (u.columns(0, mp).into_owned(), u.columns(mp, mq).into_owned());
    for (x, what) in [(&vp, "v_p"), (&vq, "v_q"), (&up, "u_p"), (&uq, "u_q")] {
        if frobenius(x) < tol {
            return Err(Error::NullSpaceEmpty(format!("{what} vanished")));
        }
    }

    // user r: invisible to the aligned filters and blind to the aligned beam
    let ve_r = pick(&null_space_basis(&(&uq * &hqr), tol), mr - 1, &mut rng, "user r beamformers")?;
    let aligned = block(ext, r, q)? * &vq;
    let ue_r = pick(&left_null_space(&aligned, tol).transpose(), mr - 1, &mut rng, "user r filters")?.transpose();

    let mut users = vec![None, None, None];
    for (k, vz, uz, m) in [(p, &vp, &up, mp), (q, &vq, &uq, mq)] {
        let ve = random_gaussian(m, m - 1, &mut rng);
        let ue = random_gaussian(m - 1, m, &mut rng);
        users[k] = Some(mixed_user(Some(vz), &ve, Some(uz), &ue));
    }
    users[r] = Some(mixed_user(None, &ve_r, None, &ue_r));
    Ok(LinearScheme {
        n: 2,
        users: users.into_iter().map(|u| u.expect("all users set")).collect(),
    })
}

/// One stream per slot at user `p` zero-forced at both other receivers,
/// ergodic alignment for the rest. Needs `D_qp + D_rp < M_p` and
/// `D_pq + D_pr < M_p`. DoF `((M_p + 1) / 2, M_q / 2, M_r / 2)`.
pub fn zero_forcing_scheme(ext: &ExtendedRealization, p: usize) -> Result<LinearScheme> {
    let spec = ext.spec();
    require_three_square(spec)?;
    require_pair(ext)?;
    let (q, r) = ((p + 1) % 3, (p + 2) % 3);
    let mp = spec.tx(p);
    let seen = spec.rank(q, p) + spec.rank(r, p);
    let heard = spec.rank(p, q) + spec.rank(p, r);
    if seen >= mp || heard >= mp {
        return Err(Error::ConditionFails(format!(
            "user {} needs D_{2}{1} + D_{3}{1} = {seen} and D_{1}{2} + D_{1}{3} = {heard} below M_{1} = {mp}",
            p + 1,
            p + 1,
            q + 1,
            r + 1
        )));
    }
    let tol = DEFAULT_TOLERANCE;
    let mut rng = scheme_rng(ext);
    let tx_stack = vstack(&[&block(ext, q, p)?, &block(ext, r, p)?]);
    let vz = pick(&null_space_basis(&tx_stack, tol), 1, &mut rng, "zero-forcing beamformer")?;
    let rx_stack = hstack(&[&block(ext, p, q)?, &block(ext, p, r)?]);
    let uz = pick(&left_null_space(&rx_stack, tol).transpose(), 1, &mut rng, "zero-forcing filter")?.transpose();
    let users = (0..3)
        .map(|k| {
            let m = spec.tx(k);
            if k == p {
                let ve = random_gaussian(m, m - 1, &mut rng);
                let ue = random_gaussian(m - 1, m, &mut rng);
                mixed_user(Some(&vz), &ve, Some(&uz), &ue)
            } else {
                let ve = random_gaussian(m, m, &mut rng);
                let ue = random_gaussian(m, m, &mut rng);
                mixed_user(None, &ve, None, &ue)
            }
        })
        .collect();
    Ok(LinearScheme { n: 2, users })
}

/// The aligned-pair scheme for users 1 and 2.
pub fn scheme_cd7(ext: &ExtendedRealization) -> Result<LinearScheme> {
    aligned_pair_scheme(ext, 0, 1, 2)
}

/// The zero-forcing scheme at user 1.
pub fn scheme_cd1(ext: &ExtendedRealization) -> Result<LinearScheme> {
    zero_forcing_scheme(ext, 0)
}

pub fn scheme_for_family(ext: &ExtendedRealization, family: SchemeFamily) -> Result<LinearScheme> {
    match family {
        SchemeFamily::AlignedPair { p, q, r } => aligned_pair_scheme(ext, p, q, r),
        SchemeFamily::ZeroForcing { p } => zero_forcing_scheme(ext, p),
    }
}

/// 25 streams over two slots on the `(10, 8, 6)` network with
/// `D_12 = 6`, `D_21 = 5`: stream counts `(11, 9, 5)`.
pub fn counterexample_scheme(ext: &ExtendedRealization) -> Result<LinearScheme> {
    let spec = ext.spec();
    if spec.tx_antennas() != [10, 8, 6] || !spec.is_square() {
        return Err(Error::ConditionFails("needs the (10, 8, 6) square network".into()));
    }
    scheme_cd7(ext)
}

/// Single-slot `(7, 3, 2)` scheme on the asymmetric example network, with
/// the dimension counts used to build it.
#[derive(Clone, Debug)]
pub struct Example2Scheme {
    pub scheme: LinearScheme,
    /// Width of the solution space of `H_12 a = H_13 b`.
    pub intersection_width: usize,
    /// Dimension of the interference space at each receiver.
    pub interference_dims: [usize; 3],
}

/// `v_21, v_31` from the stacked null space, `v_22` from `null(H_32)`,
/// `(v_23, v_32)` from the overlap of `col(H_12)` and `col(H_13)`,
/// `[v_11 v_12] = H_21^-1 H_23 [v_31 v_32]`, five generic columns for the
/// rest of user 1. Each receiver zero-forces its interference space.
pub fn example2_scheme(real: &ChannelRealization) -> Result<Example2Scheme> {
    let spec = real.spec();
    spec.require_k(3)?;
    if spec.tx_antennas() != [10, 8, 6] || spec.rx_antennas() != [10, 10, 3] || spec.rank(2, 0) != 0 {
        return Err(Error::ConditionFails("needs M = (10, 8, 6), N = (10, 10, 3), D_31 = 0".into()));
    }
    let tol = DEFAULT_TOLERANCE;
    let mut rng = trial_rng(real.seed().unwrap_or(0), 0x6e2);
    let h = |j: usize, i: usize| real.complex_block(j, i).cloned();
    let (h12, h13, h21, h23, h32) = (h(0, 1)?, h(0, 2)?, h(1, 0)?, h(1, 2)?, h(2, 1)?);

    let a = vstack(&[
        &hstack(&[&h32, &CMatrix::zeros(3, 6)]),
        &hstack(&[&h12, &-&h13]),
    ]);
    let v = pick(&null_space_basis(&a, tol), 1, &mut rng, "v_21, v_31")?;
    let (v21, v31) = (v.rows(0, 8).into_owned(), v.rows(8, 6).into_owned());
    let v22 = pick(&null_space_basis(&h32, tol), 1, &mut rng, "v_22")?;
    let overlap = null_space_basis(&hstack(&[&h12, &-&h13]), tol);
    let w = pick(&overlap, 1, &mut rng, "v_23, v_32")?;
    let (v23, v32) = (w.rows(0, 8).into_owned(), w.rows(8, 6).into_owned());

    let v3 = hstack(&[&v31, &v32]);
    let rhs = &h23 * &v3;
    let v11_12 = h21
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NullSpaceEmpty("H_21 is singular".into()))?;
    let v1 = hstack(&[&v11_12, &random_gaussian(10, 5, &mut rng)]);
    let v2 = hstack(&[&v21, &v22, &v23]);

    let interference = [
        hstack(&[&(&h12 * &v2), &(&h13 * &v3)]),
        hstack(&[&(&h21 * &v1), &(&h23 * &v3)]),
        hstack(&[&(h(2, 0)? * &v1), &(&h32 * &v2)]),
    ];
    let dims = interference.clone().map(|m| numerical_rank(&m, tol));
    let vs = [v1, v2, v3];
    let users = (0..3)
        .map(|k| {
            let u = left_null_space(&interference[k], tol);
            let m = vs[k].ncols();
            if u.nrows() < m {
                return Err(Error::NullSpaceEmpty(format!(
                    "receiver {} has {} interference-free dimensions for {m} streams",
                    k + 1,
                    u.nrows()
                )));
            }
            let u = pick(&u.transpose(), m, &mut rng, "receive filter")?.transpose();
            Ok(UserStreams { m, v: vs[k].clone(), u })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Example2Scheme {
        scheme: LinearScheme { n: 1, users },
        intersection_width: overlap.ncols(),
        interference_dims: dims,
    })
}

/// Runs `build` on the ergodic pair for `seed`, `seed + 1`, ... while it
/// reports a degenerate realization, up to `attempts` draws.
pub fn with_resampling<T>(
    spec: &NetworkSpec,
    seed: u64,
    attempts: usize,
    mut build: impl FnMut(&ExtendedRealization) -> Result<T>,
) -> Result<(ExtendedRealization, T)> {
    let mut last = None;
    for s in seed..seed.saturating_add(attempts.max(1) as u64) {
        let ext = extend_ergodic_pair(spec, s);
        match build(&ext) {
            Ok(t) => return Ok((ext, t)),
            Err(e @ (Error::DegenerateDesiredDifference { .. } | Error::NullSpaceEmpty(_))) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}
