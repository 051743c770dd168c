//! Half-the-cake conditions: reduced-rank certificates, the explicit
//! three-user inequalities, prior allocation rules, boundary cases and the
//! combined verdict.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::channel::NetworkSpec;
use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::linalg::{generic_rank, BlockPattern, RankShape, StructuredMatrix, DEFAULT_TRIALS};
use crate::rational::Dof;
use crate::replication::{self, Assignment, RankMode, ReplicaId, ReplicationPlan};

/// Reduced ranks `Dbar[j][i] <= D[j][i]` whose row and column sums equal the
/// antenna counts. The diagonal is unused and kept at zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedRankCertificate {
    dbar: Vec<Vec<usize>>,
}

impl ReducedRankCertificate {
    /// Diagonal entries are ignored.
    pub fn from_entries(mut dbar: Vec<Vec<usize>>) -> Self {
        for (k, row) in dbar.iter_mut().enumerate() {
            if let Some(d) = row.get_mut(k) {
                *d = 0;
            }
        }
        Self { dbar }
    }

    pub fn entries(&self) -> &[Vec<usize>] {
        &self.dbar
    }

    pub fn get(&self, j: usize, i: usize) -> usize {
        self.dbar[j][i]
    }

    /// Checks `Dbar <= D` entrywise and both families of sum conditions.
    pub fn check(&self, spec: &NetworkSpec) -> Result<()> {
        let k = spec.k();
        let bad = |msg: String| Err(Error::CertificateInfeasible(msg));
        if self.dbar.len() != k || self.dbar.iter().any(|r| r.len() != k) {
            return bad(format!("certificate must be {k}x{k}"));
        }
        for j in 0..k {
            for i in 0..k {
                if i != j && self.dbar[j][i] > spec.rank(j, i) {
                    return bad(format!(
                        "Dbar_{}{} = {} exceeds D_{}{} = {}",
                        j + 1,
                        i + 1,
                        self.dbar[j][i],
                        j + 1,
                        i + 1,
                        spec.rank(j, i)
                    ));
                }
            }
        }
        for u in 0..k {
            let col: usize = (0..k).filter(|&j| j != u).map(|j| self.dbar[j][u]).sum();
            let row: usize = (0..k).filter(|&i| i != u).map(|i| self.dbar[u][i]).sum();
            if col != spec.tx(u) || row != spec.rx(u) {
                return bad(format!(
                    "user {}: ranks leaving sum to {col}, arriving sum to {row}, need {}",
                    u + 1,
                    spec.tx(u)
                ));
            }
        }
        Ok(())
    }
}

impl Serialize for ReducedRankCertificate {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Option<usize>>> = self
            .dbar
            .iter()
            .enumerate()
            .map(|(j, row)| {
                row.iter()
                    .enumerate()
                    .map(|(i, &v)| (i != j).then_some(v))
                    .collect()
            })
            .collect();
        rows.serialize(s)
    }
}

/// Minimum-cut evidence that no certificate exists. User indices are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FlowCut {
    pub max_flow: usize,
    pub required: usize,
    /// Transmitters on the source side of the cut.
    pub source_side_tx: Vec<usize>,
    /// Receivers on the source side of the cut.
    pub source_side_rx: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Feasibility {
    Feasible(ReducedRankCertificate),
    Infeasible(FlowCut),
}

impl Feasibility {
    pub fn certificate(&self) -> Option<&ReducedRankCertificate> {
        match self {
            Feasibility::Feasible(c) => Some(c),
            Feasibility::Infeasible(_) => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

/// Decides whether reduced ranks exist by a transportation max-flow:
/// source to transmitter `i` (capacity `M_i`), transmitter `i` to receiver
/// `j != i` (capacity `D_ji`), receiver `j` to sink (capacity `M_j`). A
/// saturating flow is the certificate.
pub fn reduced_rank_feasible(spec: &NetworkSpec) -> Result<Feasibility> {
    spec.require_square()?;
    let k = spec.k();
    let (source, sink) = (0, 2 * k + 1);
    let tx = |i: usize| 1 + i;
    let rx = |j: usize| 1 + k + j;
    let mut g = FlowNetwork::new(2 * k + 2);
    for u in 0..k {
        g.add_edge(source, tx(u), spec.tx(u));
        g.add_edge(rx(u), sink, spec.rx(u));
    }
    let mut arcs = Vec::new();
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            arcs.push((j, i, g.add_edge(tx(i), rx(j), spec.rank(j, i))));
        }
    }
    let flow = g.max_flow(source, sink);
    let required = spec.m_sum();
    if flow == required {
        let mut dbar = vec![vec![0; k]; k];
        for (j, i, e) in arcs {
            dbar[j][i] = g.flow_on(e);
        }
        let cert = ReducedRankCertificate::from_entries(dbar);
        cert.check(spec)?;
        return Ok(Feasibility::Feasible(cert));
    }
    let side = g.residual_reachable(source);
    Ok(Feasibility::Infeasible(FlowCut {
        max_flow: flow,
        required,
        source_side_tx: (0..k).filter(|&i| side[tx(i)]).map(|i| i + 1).collect(),
        source_side_rx: (0..k).filter(|&j| side[rx(j)]).map(|j| j + 1).collect(),
    }))
}

fn require_three_user_square(spec: &NetworkSpec) -> Result<()> {
    spec.require_k(3)?;
    spec.require_square()
}

/// The two-minimum form of the three-user condition:
/// `min{M1+D32, M2+D13, M3+D21} + min{M3+D12, M1+D23, M2+D31} >= M_sum`.
pub fn check_condition_eq5(spec: &NetworkSpec) -> Result<bool> {
    require_three_user_square(spec)?;
    let (m, d) = (|k: usize| spec.tx(k), |j: usize, i: usize| spec.rank(j, i));
    let first = (m(0) + d(2, 1)).min(m(1) + d(0, 2)).min(m(2) + d(1, 0));
    let second = (m(2) + d(0, 1)).min(m(0) + d(1, 2)).min(m(1) + d(2, 0));
    Ok(first + second >= spec.m_sum())
}

/// The nine linear inequalities equivalent to the three-user condition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CdInequality {
    Cd1,
    Cd2,
    Cd3,
    Cd4,
    Cd5,
    Cd6,
    Cd7,
    Cd8,
    Cd9,
}

/// Scheme families that beat half the cake when an inequality fails.
/// Users are 0-based in memory and 1-based in JSON.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeFamily {
    /// One aligned zero-forced stream for each of users `p` and `q`, paid
    /// for by one stream of user `r`.
    AlignedPair { p: usize, q: usize, r: usize },
    /// One extra stream at user `p`, zero-forced at both ends.
    ZeroForcing { p: usize },
}

impl Serialize for SchemeFamily {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            SchemeFamily::AlignedPair { p, q, r } => {
                let mut st = s.serialize_struct("SchemeFamily", 4)?;
                st.serialize_field("kind", "aligned-pair")?;
                st.serialize_field("p", &(p + 1))?;
                st.serialize_field("q", &(q + 1))?;
                st.serialize_field("r", &(r + 1))?;
                st.end()
            }
            SchemeFamily::ZeroForcing { p } => {
                let mut st = s.serialize_struct("SchemeFamily", 2)?;
                st.serialize_field("kind", "zero-forcing")?;
                st.serialize_field("p", &(p + 1))?;
                st.end()
            }
        }
    }
}

impl CdInequality {
    pub const ALL: [CdInequality; 9] = [
        CdInequality::Cd1,
        CdInequality::Cd2,
        CdInequality::Cd3,
        CdInequality::Cd4,
        CdInequality::Cd5,
        CdInequality::Cd6,
        CdInequality::Cd7,
        CdInequality::Cd8,
        CdInequality::Cd9,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CdInequality::Cd1 => "cd1",
            CdInequality::Cd2 => "cd2",
            CdInequality::Cd3 => "cd3",
            CdInequality::Cd4 => "cd4",
            CdInequality::Cd5 => "cd5",
            CdInequality::Cd6 => "cd6",
            CdInequality::Cd7 => "cd7",
            CdInequality::Cd8 => "cd8",
            CdInequality::Cd9 => "cd9",
        }
    }

    pub fn family(self) -> SchemeFamily {
        use CdInequality::*;
        match self {
            Cd1 | Cd4 => SchemeFamily::ZeroForcing { p: 0 },
            Cd2 | Cd5 => SchemeFamily::ZeroForcing { p: 1 },
            Cd3 | Cd6 => SchemeFamily::ZeroForcing { p: 2 },
            Cd7 => SchemeFamily::AlignedPair { p: 0, q: 1, r: 2 },
            Cd8 => SchemeFamily::AlignedPair { p: 1, q: 2, r: 0 },
            Cd9 => SchemeFamily::AlignedPair { p: 0, q: 2, r: 1 },
        }
    }

    /// `(lhs, rhs)` of the inequality `lhs >= rhs` on a three-user spec.
    pub fn sides(self, spec: &NetworkSpec) -> (i64, i64) {
        use CdInequality::*;
        let m = |k: usize| spec.tx(k) as i64;
        let d = |j: usize, i: usize| spec.rank(j, i) as i64;
        match self {
            Cd1 => (d(0, 1) + d(0, 2), m(0)),
            Cd2 => (d(1, 0) + d(1, 2), m(1)),
            Cd3 => (d(2, 0) + d(2, 1), m(2)),
            Cd4 => (d(1, 0) + d(2, 0), m(0)),
            Cd5 => (d(0, 1) + d(2, 1), m(1)),
            Cd6 => (d(0, 2) + d(1, 2), m(2)),
            Cd7 => (d(0, 1) + d(1, 0), m(0) + m(1) - m(2)),
            Cd8 => (d(1, 2) + d(2, 1), m(1) + m(2) - m(0)),
            Cd9 => (d(0, 2) + d(2, 0), m(0) + m(2) - m(1)),
        }
    }

    pub fn holds(self, spec: &NetworkSpec) -> bool {
        let (lhs, rhs) = self.sides(spec);
        lhs >= rhs
    }
}

/// First violated inequality in the order cd1..cd9.
pub fn first_violated(spec: &NetworkSpec) -> Result<Option<CdInequality>> {
    require_three_user_square(spec)?;
    Ok(CdInequality::ALL.into_iter().find(|c| !c.holds(spec)))
}

/// Whether the construction of `family` applies to `spec` (strict
/// inequalities; symmetry not required).
pub fn family_applies(spec: &NetworkSpec, family: SchemeFamily) -> bool {
    let m = |k: usize| spec.tx(k) as i64;
    let d = |j: usize, i: usize| spec.rank(j, i) as i64;
    match family {
        SchemeFamily::AlignedPair { p, q, r } => d(p, q) + d(q, p) < m(p) + m(q) - m(r),
        SchemeFamily::ZeroForcing { p } => {
            let (q, r) = ((p + 1) % 3, (p + 2) % 3);
            d(q, p) + d(r, p) < m(p) && d(p, q) + d(p, r) < m(p)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SymmetricClass {
    HalfCakeOptimal,
    ExceedsHalfCake {
        violated: CdInequality,
        family: SchemeFamily,
    },
}

/// Classification of a three-user spec with symmetric cross ranks: half the
/// cake is optimal iff all nine inequalities hold.
pub fn classify_symmetric_3user(spec: &NetworkSpec) -> Result<SymmetricClass> {
    require_three_user_square(spec)?;
    for j in 0..3 {
        for i in (j + 1)..3 {
            if spec.rank(j, i) != spec.rank(i, j) {
                return Err(Error::NotSymmetric { j: j + 1, i: i + 1 });
            }
        }
    }
    Ok(match first_violated(spec)? {
        None => SymmetricClass::HalfCakeOptimal,
        Some(violated) => SymmetricClass::ExceedsHalfCake {
            violated,
            family: violated.family(),
        },
    })
}

/// Closed-form certificate for a three-user spec satisfying the condition.
///
/// When `M1 + D23` attains `min{M3+D12, M1+D23, M2+D31}` the reduced ranks are
/// `Dbar12 = M1+D23-M3`, `Dbar13 = M3-D23`, `Dbar21 = M2-D23`, `Dbar23 = D23`,
/// `Dbar31 = M1+D23-M2`, `Dbar32 = M2+M3-M1-D23`. The other two cases are
/// cyclic relabelings of this one.
pub fn assign_reduced_ranks_3user(spec: &NetworkSpec) -> Result<ReducedRankCertificate> {
    if !check_condition_eq5(spec)? {
        return Err(Error::ConditionFails(
            "three-user rank condition does not hold".into(),
        ));
    }
    let m = |k: usize| spec.tx(k);
    let d = |j: usize, i: usize| spec.rank(j, i);
    let terms = [m(0) + d(1, 2), m(1) + d(2, 0), m(2) + d(0, 1)];
    let smallest = terms.iter().copied().min().expect("three terms");
    // new user a is old user perm[a]; each rotation moves the minimum into M1 + D23
    let perm: [usize; 3] = match terms.iter().position(|&t| t == smallest) {
        Some(0) => [0, 1, 2],
        Some(1) => [1, 2, 0],
        _ => [2, 0, 1],
    };
    let s = spec.relabeled(&perm);
    let (m1, m2, m3) = (s.tx(0) as i64, s.tx(1) as i64, s.tx(2) as i64);
    let d23 = s.rank(1, 2) as i64;
    let local = [
        [0, m1 + d23 - m3, m3 - d23],
        [m2 - d23, 0, d23],
        [m1 + d23 - m2, m2 + m3 - m1 - d23, 0],
    ];
    let mut dbar = vec![vec![0usize; 3]; 3];
    for j in 0..3 {
        for i in 0..3 {
            let v = local[j][i];
            if v < 0 {
                return Err(Error::CertificateInfeasible(format!(
                    "closed form produced negative rank {v}"
                )));
            }
            dbar[perm[j]][perm[i]] = v as usize;
        }
    }
    let cert = ReducedRankCertificate::from_entries(dbar);
    cert.check(spec)?;
    Ok(cert)
}

/// Chip-and-bin allocation for full-rank square specs without a dominant
/// user. Users are taken in descending antenna order; the transmitter in
/// sorted position `s` drops its `M` chips into the receiver bins starting
/// at position `s + 1` and wrapping, filling each bin as far as its
/// remaining capacity allows.
pub fn greedy_chip_allocation(spec: &NetworkSpec) -> Result<ReducedRankCertificate> {
    spec.require_square()?;
    let k = spec.k();
    let total = spec.m_sum();
    if let Some(user) = (0..k).find(|&u| 2 * spec.tx(u) > total) {
        return Err(Error::DominantUser { user: user + 1 });
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| spec.tx(b).cmp(&spec.tx(a)));
    let mut room: Vec<usize> = order.iter().map(|&u| spec.rx(u)).collect();
    let mut dbar = vec![vec![0usize; k]; k];
    for s in 0..k {
        let tx = order[s];
        let mut chips = spec.tx(tx);
        for step in 1..k {
            if chips == 0 {
                break;
            }
            let b = (s + step) % k;
            let rx = order[b];
            let drop = chips.min(room[b]).min(spec.rank(rx, tx));
            dbar[rx][tx] = drop;
            room[b] -= drop;
            chips -= drop;
        }
        if chips > 0 {
            return Err(Error::ConditionFails(format!(
                "transmitter {} has {chips} chips left over",
                tx + 1
            )));
        }
    }
    let cert = ReducedRankCertificate::from_entries(dbar);
    cert.check(spec)?;
    Ok(cert)
}

/// Allocation for `K` users with `M` antennas and cross ranks `D`:
/// `Dbar_ji = q + 1` for the `Delta` cyclic successors `j` of `i`, else `q`,
/// where `q = floor(M / (K-1))` and `Delta = M - q (K-1)`.
pub fn symmetric_allocation(k: usize, m: usize, d: usize) -> Result<ReducedRankCertificate> {
    if k < 2 {
        return Err(Error::BadShape(format!("K = {k}, need at least 2 users")));
    }
    if (k - 1) * d < m {
        return Err(Error::ConditionFails(format!(
            "(K-1) D = {} < M = {m}",
            (k - 1) * d
        )));
    }
    let q = m / (k - 1);
    let delta = m - q * (k - 1);
    let mut dbar = vec![vec![0usize; k]; k];
    for i in 0..k {
        for step in 1..k {
            let j = (i + step) % k;
            dbar[j][i] = if step <= delta { q + 1 } else { q };
        }
    }
    Ok(ReducedRankCertificate::from_entries(dbar))
}

/// Reduces ranks by zeroing rank-one coefficients of the stripped matrix
/// while its determinant stays a nonzero polynomial.
///
/// Coefficients are visited in lexicographic `(j, i, m)` order; the number
/// of survivors in each block is the reduced rank. Returns `None` when the
/// stripped matrix is not generically full rank. Different visiting orders
/// may yield different, equally valid certificates.
pub fn necessity_reduction(
    spec: &NetworkSpec,
    trials: usize,
    seed: u64,
) -> Result<Option<ReducedRankCertificate>> {
    spec.require_square()?;
    if generic_rank(spec, &RankShape::Stripped, trials, seed) < spec.m_sum() {
        return Ok(None);
    }
    let structured = StructuredMatrix::new(BlockPattern::from_spec(spec, &RankShape::Stripped), seed);
    let mut zeroed = Vec::new();
    for var in structured.variables() {
        zeroed.push(var);
        if !structured.det_nonzero_with_zeroed(&zeroed, trials, seed)? {
            zeroed.pop();
        }
    }
    let k = spec.k();
    let mut dbar = vec![vec![0usize; k]; k];
    for (idx, link) in structured.pattern().links.iter().enumerate() {
        let removed = zeroed.iter().filter(|v| v.link == idx).count();
        dbar[link.origin.0][link.origin.1] = link.rank - removed;
    }
    let cert = ReducedRankCertificate::from_entries(dbar);
    cert.check(spec)?;
    Ok(Some(cert))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VerdictStatus {
    OptimalCertified,
    MoreThanHalfPossible,
    Undecided,
}

/// Evidence behind a verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Witness {
    /// A reduced-rank certificate from the max-flow.
    #[serde(rename = "Lemma1-flow")]
    ReducedRankFlow,
    /// `M_p = M_q + M_r` with one side fully connected at full rank.
    #[serde(rename = "Theorem5")]
    CooperationBoundary,
    /// `M_p = M_q` with the auxiliary-user replication bound.
    #[serde(rename = "Theorem6")]
    ReplicationBoundary,
    /// Symmetric three-user necessity.
    #[serde(rename = "Theorem4")]
    SymmetricNecessity,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HalfCakeVerdict {
    pub status: VerdictStatus,
    pub half_cake: Dof,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<ReducedRankCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<Dof>,
    pub witnesses: Vec<Witness>,
    /// Relabeling `(p, q, r)` under which a boundary case matched, 1-based.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roles: Option<[usize; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violated: Option<CdInequality>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme_family: Option<SchemeFamily>,
    /// DoF reachable by the named scheme family, when one applies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub achievable: Option<Dof>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cut: Option<FlowCut>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl HalfCakeVerdict {
    fn undecided(spec: &NetworkSpec) -> Self {
        Self {
            status: VerdictStatus::Undecided,
            half_cake: Dof::half(spec.m_sum()),
            certificate: None,
            bound: None,
            witnesses: Vec::new(),
            roles: None,
            violated: None,
            scheme_family: None,
            achievable: None,
            cut: None,
            notes: Vec::new(),
        }
    }
}

const PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Two-user cooperation bound after merging users `q` and `r`:
/// `M_sum - max(D_qp + D_rp, D_pq + D_pr)`.
pub fn merged_pair_bound(spec: &NetworkSpec, p: usize, q: usize, r: usize) -> Dof {
    let d = |j: usize, i: usize| spec.rank(j, i);
    let worst = (d(q, p) + d(r, p)).max(d(p, q) + d(p, r));
    Dof::integer((spec.m_sum() - worst) as i64)
}

/// Mirrored two-replica plan grouping `{p, r, p'}` against `{q, r', q'}`.
pub fn auxiliary_user_plan(p: usize, q: usize, r: usize) -> ReplicationPlan {
    let id = |user, copy| ReplicaId { user, copy };
    ReplicationPlan::new(
        vec![2, 2, 2],
        Assignment::Mirror,
        [
            vec![id(p, 0), id(r, 0), id(p, 1)],
            vec![id(q, 0), id(r, 1), id(q, 1)],
        ],
    )
    .expect("auxiliary-user plan is valid")
}

fn theorem5_matches(spec: &NetworkSpec, p: usize, q: usize, r: usize) -> bool {
    let (m, d) = (|k: usize| spec.tx(k), |j: usize, i: usize| spec.rank(j, i));
    m(p) == m(q) + m(r)
        && ((d(p, q) == m(q) && d(p, r) == m(r)) || (d(q, p) == m(q) && d(r, p) == m(r)))
}

fn theorem6_matches(spec: &NetworkSpec, p: usize, q: usize, r: usize) -> bool {
    let (m, d) = (|k: usize| spec.tx(k), |j: usize, i: usize| spec.rank(j, i));
    m(p) == m(q) && d(q, p) == m(p) && d(r, p) == m(r) && d(q, r) == m(r)
}

/// Boundary-case check for three users, trying every relabeling. The
/// merged-pair case records the two-user cooperation bound; the equal-pair
/// case computes the replication bound of the auxiliary-user plan. Either
/// is certified only when the computed bound equals half the cake.
pub fn boundary_case_verdict(spec: &NetworkSpec) -> Result<HalfCakeVerdict> {
    require_three_user_square(spec)?;
    let half = Dof::half(spec.m_sum());
    let mut verdict = HalfCakeVerdict::undecided(spec);
    for [p, q, r] in PERMUTATIONS {
        if theorem5_matches(spec, p, q, r) {
            let bound = merged_pair_bound(spec, p, q, r);
            if bound == half {
                verdict.status = VerdictStatus::OptimalCertified;
                verdict.bound = Some(bound);
                verdict.witnesses.push(Witness::CooperationBoundary);
                verdict.roles = Some([p + 1, q + 1, r + 1]);
                return Ok(verdict);
            }
        }
    }
    for [p, q, r] in PERMUTATIONS {
        if theorem6_matches(spec, p, q, r) {
            let plan = auxiliary_user_plan(p, q, r);
            let mode = RankMode::Generic {
                trials: DEFAULT_TRIALS,
                seed: 0,
            };
            let bound = replication::outer_bound(spec, &plan, &mode)?;
            if bound.value == half {
                verdict.status = VerdictStatus::OptimalCertified;
                verdict.bound = Some(bound.value);
                verdict.witnesses.push(Witness::ReplicationBoundary);
                verdict.roles = Some([p + 1, q + 1, r + 1]);
                return Ok(verdict);
            }
        }
    }
    Ok(verdict)
}

/// Combined verdict. Strongest evidence first: a reduced-rank certificate,
/// then the three-user boundary cases, then the symmetric classification.
/// Otherwise undecided, with a note when a scheme family beating half the
/// cake applies anyway.
pub fn half_cake_verdict(spec: &NetworkSpec) -> Result<HalfCakeVerdict> {
    let mut verdict = HalfCakeVerdict::undecided(spec);
    let cut = match reduced_rank_feasible(spec)? {
        Feasibility::Feasible(cert) => {
            verdict.status = VerdictStatus::OptimalCertified;
            verdict.certificate = Some(cert);
            verdict.bound = Some(verdict.half_cake);
            verdict.witnesses.push(Witness::ReducedRankFlow);
            return Ok(verdict);
        }
        Feasibility::Infeasible(cut) => cut,
    };
    if spec.k() != 3 {
        verdict.cut = Some(cut);
        verdict.notes.push("no reduced-rank certificate; no boundary test for K != 3".into());
        return Ok(verdict);
    }
    let boundary = boundary_case_verdict(spec)?;
    if boundary.status == VerdictStatus::OptimalCertified {
        return Ok(HalfCakeVerdict {
            cut: Some(cut),
            ..boundary
        });
    }
    verdict.cut = Some(cut);
    let above = Dof::new(spec.m_sum() as i64 + 1, 2);
    if let Ok(SymmetricClass::ExceedsHalfCake { violated, family }) = classify_symmetric_3user(spec) {
        verdict.status = VerdictStatus::MoreThanHalfPossible;
        verdict.witnesses.push(Witness::SymmetricNecessity);
        verdict.violated = Some(violated);
        verdict.scheme_family = Some(family);
        verdict.achievable = Some(above);
        return Ok(verdict);
    }
    let applicable = CdInequality::ALL
        .into_iter()
        .filter(|c| !c.holds(spec))
        .find(|c| family_applies(spec, c.family()));
    if let Some(c) = applicable {
        verdict.violated = Some(c);
        verdict.scheme_family = Some(c.family());
        let (lhs, rhs) = c.sides(spec);
        verdict.notes.push(format!(
            "ranks are not symmetric, but {} fails ({lhs} < {rhs}) and its scheme family applies: {} DoF reachable",
            c.name(),
            above
        ));
    } else {
        verdict.violated = first_violated(spec)?;
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use proptest::prelude::*;

    fn spec3(m: [usize; 3], d12: usize, d13: usize, d21: usize, d23: usize, d31: usize, d32: usize) -> NetworkSpec {
        NetworkSpec::square(
            m.to_vec(),
            vec![vec![0, d12, d13], vec![d21, 0, d23], vec![d31, d32, 0]],
        )
        .unwrap()
    }

    /// Brute-force oracle: any integer matrix with the right sums under `D`.
    fn exists_certificate(spec: &NetworkSpec) -> bool {
        let k = spec.k();
        let cells: Vec<(usize, usize)> = (0..k)
            .flat_map(|j| (0..k).filter(move |&i| i != j).map(move |i| (j, i)))
            .collect();
        fn go(spec: &NetworkSpec, cells: &[(usize, usize)], at: usize, dbar: &mut Vec<Vec<usize>>) -> bool {
            if at == cells.len() {
                return ReducedRankCertificate::from_entries(dbar.clone()).check(spec).is_ok();
            }
            let (j, i) = cells[at];
            for v in 0..=spec.rank(j, i) {
                dbar[j][i] = v;
                if go(spec, cells, at + 1, dbar) {
                    return true;
                }
            }
            dbar[j][i] = 0;
            false
        }
        go(spec, &cells, 0, &mut vec![vec![0; k]; k])
    }

    #[test]
    fn counterexample_has_no_certificate() {
        let f = reduced_rank_feasible(&presets::counterexample()).unwrap();
        let Feasibility::Infeasible(cut) = f else { panic!("expected infeasible") };
        assert_eq!((cut.max_flow, cut.required), (23, 24));
    }

    #[test]
    fn counterexample_cut_capacity_matches_flow() {
        let spec = presets::counterexample();
        let Feasibility::Infeasible(cut) = reduced_rank_feasible(&spec).unwrap() else { panic!() };
        let in_tx = |i: usize| cut.source_side_tx.contains(&(i + 1));
        let in_rx = |j: usize| cut.source_side_rx.contains(&(j + 1));
        let mut cap = 0;
        for u in 0..3 {
            if !in_tx(u) {
                cap += spec.tx(u);
            }
            if in_rx(u) {
                cap += spec.rx(u);
            }
        }
        for i in 0..3 {
            for j in (0..3).filter(|&j| j != i) {
                if in_tx(i) && !in_rx(j) {
                    cap += spec.rank(j, i);
                }
            }
        }
        assert_eq!(cap, cut.max_flow);
    }

    #[test]
    fn reducible_example_has_a_certificate() {
        let spec = presets::reducible_example();
        let cert = reduced_rank_feasible(&spec).unwrap().certificate().cloned().unwrap();
        cert.check(&spec).unwrap();
        let listed = ReducedRankCertificate::from_entries(vec![vec![0, 8, 2], vec![4, 0, 4], vec![6, 0, 0]]);
        listed.check(&spec).unwrap();
    }

    #[test]
    fn two_user_certificate_is_forced() {
        let spec = NetworkSpec::symmetric(2, 4, 4).unwrap();
        let cert = reduced_rank_feasible(&spec).unwrap().certificate().cloned().unwrap();
        assert_eq!(cert.entries(), &[vec![0, 4], vec![4, 0]]);
    }

    #[test]
    fn flow_needs_square_case() {
        assert!(matches!(
            reduced_rank_feasible(&presets::example_asym()),
            Err(Error::NotSquareCase)
        ));
    }

    #[test]
    fn certificate_json_has_null_diagonal() {
        let cert = ReducedRankCertificate::from_entries(vec![vec![0, 8, 2], vec![4, 0, 4], vec![6, 0, 0]]);
        assert_eq!(
            serde_json::to_string(&cert).unwrap(),
            "[[null,8,2],[4,null,4],[6,0,null]]"
        );
    }

    #[test]
    fn eq5_examples() {
        assert!(!check_condition_eq5(&presets::counterexample()).unwrap());
        assert!(check_condition_eq5(&NetworkSpec::symmetric(3, 2, 2).unwrap()).unwrap());
        assert!(matches!(
            check_condition_eq5(&NetworkSpec::symmetric(4, 2, 2).unwrap()),
            Err(Error::WrongK { expected: 3, got: 4 })
        ));
    }

    #[test]
    fn symmetric_classification_examples() {
        let s = spec3([4, 4, 4], 1, 4, 1, 4, 4, 4);
        assert_eq!(
            classify_symmetric_3user(&s).unwrap(),
            SymmetricClass::ExceedsHalfCake {
                violated: CdInequality::Cd7,
                family: SchemeFamily::AlignedPair { p: 0, q: 1, r: 2 }
            }
        );
        assert_eq!(
            classify_symmetric_3user(&NetworkSpec::symmetric(3, 2, 2).unwrap()).unwrap(),
            SymmetricClass::HalfCakeOptimal
        );
        let s = spec3([4, 2, 2], 1, 1, 1, 2, 1, 2);
        assert_eq!(
            classify_symmetric_3user(&s).unwrap(),
            SymmetricClass::ExceedsHalfCake {
                violated: CdInequality::Cd1,
                family: SchemeFamily::ZeroForcing { p: 0 }
            }
        );
        assert!(matches!(
            classify_symmetric_3user(&presets::counterexample()),
            Err(Error::NotSymmetric { j: 1, i: 2 })
        ));
    }

    #[test]
    fn closed_form_examples() {
        let s = NetworkSpec::symmetric(3, 2, 2).unwrap();
        assert_eq!(assign_reduced_ranks_3user(&s).unwrap().check(&s).ok(), Some(()));
        let s = presets::reducible_example();
        assign_reduced_ranks_3user(&s).unwrap().check(&s).unwrap();
        let s = spec3([1, 1, 2], 0, 1, 0, 1, 1, 1);
        let cert = assign_reduced_ranks_3user(&s).unwrap();
        assert_eq!(cert.entries(), &[vec![0, 0, 1], vec![0, 0, 1], vec![1, 1, 0]]);
        assert!(matches!(
            assign_reduced_ranks_3user(&presets::counterexample()),
            Err(Error::ConditionFails(_))
        ));
    }

    #[test]
    fn chip_allocation_examples() {
        let s = NetworkSpec::full_rank(vec![5, 3, 2], vec![5, 3, 2]).unwrap();
        let cert = greedy_chip_allocation(&s).unwrap();
        assert_eq!(cert.entries(), &[vec![0, 3, 2], vec![3, 0, 0], vec![2, 0, 0]]);
        let s = NetworkSpec::full_rank(vec![3, 3], vec![3, 3]).unwrap();
        assert_eq!(greedy_chip_allocation(&s).unwrap().entries(), &[vec![0, 3], vec![3, 0]]);
        let s = NetworkSpec::full_rank(vec![3, 3, 3], vec![3, 3, 3]).unwrap();
        greedy_chip_allocation(&s).unwrap().check(&s).unwrap();
        let s = NetworkSpec::full_rank(vec![6, 3, 2], vec![6, 3, 2]).unwrap();
        assert!(matches!(greedy_chip_allocation(&s), Err(Error::DominantUser { user: 1 })));
    }

    #[test]
    fn chip_allocation_handles_unsorted_input() {
        let s = NetworkSpec::full_rank(vec![2, 5, 3], vec![2, 5, 3]).unwrap();
        greedy_chip_allocation(&s).unwrap().check(&s).unwrap();
    }

    #[test]
    fn symmetric_allocation_examples() {
        let cert = symmetric_allocation(4, 5, 2).unwrap();
        for i in 0..4 {
            let mut out: Vec<usize> = (1..4).map(|s| cert.get((i + s) % 4, i)).collect();
            assert_eq!(out.iter().sum::<usize>(), 5);
            out.sort_unstable();
            assert_eq!(out, vec![1, 2, 2]);
        }
        cert.check(&NetworkSpec::symmetric(4, 5, 2).unwrap()).unwrap();
        let cert = symmetric_allocation(3, 4, 2).unwrap();
        assert!((0..3).all(|j| (0..3).all(|i| i == j || cert.get(j, i) == 2)));
        assert!(matches!(symmetric_allocation(3, 4, 1), Err(Error::ConditionFails(_))));
    }

    #[test]
    fn necessity_reduction_examples() {
        let s = presets::reducible_example();
        let cert = necessity_reduction(&s, DEFAULT_TRIALS, 3).unwrap().unwrap();
        cert.check(&s).unwrap();
        let s = NetworkSpec::symmetric(2, 3, 3).unwrap();
        let cert = necessity_reduction(&s, DEFAULT_TRIALS, 0).unwrap().unwrap();
        assert_eq!(cert.entries(), &[vec![0, 3], vec![3, 0]]);
        assert_eq!(necessity_reduction(&presets::counterexample(), DEFAULT_TRIALS, 0).unwrap(), None);
    }

    #[test]
    fn boundary_examples() {
        let v = boundary_case_verdict(&presets::theorem5_instance()).unwrap();
        assert_eq!(v.status, VerdictStatus::OptimalCertified);
        assert_eq!(v.witnesses, vec![Witness::CooperationBoundary]);
        assert_eq!(v.bound, Some(Dof::integer(5)));
        let v = boundary_case_verdict(&presets::theorem6_instance()).unwrap();
        assert_eq!(v.status, VerdictStatus::OptimalCertified);
        assert_eq!(v.witnesses, vec![Witness::ReplicationBoundary]);
        assert_eq!(v.bound, Some(Dof::new(13, 2)));
        let v = boundary_case_verdict(&spec3([3, 2, 2], 1, 1, 1, 1, 1, 1)).unwrap();
        assert_eq!(v.status, VerdictStatus::Undecided);
    }

    #[test]
    fn boundary_relabeled_instances_still_match() {
        for perm in PERMUTATIONS {
            for spec in [presets::theorem5_instance(), presets::theorem6_instance()] {
                let s = spec.relabeled(&perm);
                assert_eq!(
                    boundary_case_verdict(&s).unwrap().status,
                    VerdictStatus::OptimalCertified,
                    "{perm:?}"
                );
            }
        }
    }

    #[test]
    fn verdict_examples() {
        let v = half_cake_verdict(&presets::counterexample()).unwrap();
        assert_eq!(v.status, VerdictStatus::Undecided);
        assert_eq!(v.scheme_family, Some(SchemeFamily::AlignedPair { p: 0, q: 1, r: 2 }));
        assert!(v.certificate.is_none());
        assert!(!v.notes.is_empty());

        let v = half_cake_verdict(&presets::reducible_example()).unwrap();
        assert_eq!(v.status, VerdictStatus::OptimalCertified);
        assert_eq!(v.half_cake, Dof::integer(12));
        assert_eq!(v.witnesses, vec![Witness::ReducedRankFlow]);

        let v = half_cake_verdict(&NetworkSpec::symmetric(2, 2, 2).unwrap()).unwrap();
        assert_eq!(v.status, VerdictStatus::OptimalCertified);
        assert_eq!(v.half_cake, Dof::integer(2));

        let v = half_cake_verdict(&spec3([4, 4, 4], 1, 4, 1, 4, 4, 4)).unwrap();
        assert_eq!(v.status, VerdictStatus::MoreThanHalfPossible);
        assert_eq!(v.achievable, Some(Dof::new(13, 2)));
    }

    #[test]
    fn verdict_json_shape() {
        let spec = presets::reducible_example();
        let mut v = half_cake_verdict(&spec).unwrap();
        v.certificate = Some(ReducedRankCertificate::from_entries(vec![
            vec![0, 8, 2],
            vec![4, 0, 4],
            vec![6, 0, 0],
        ]));
        v.bound = None;
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            r#"{"status":"OPTIMAL_CERTIFIED","half_cake":{"num":12,"den":1},"certificate":[[null,8,2],[4,null,4],[6,0,null]],"witnesses":["Lemma1-flow"]}"#
        );
    }

    #[test]
    fn flow_agrees_with_brute_force_on_small_instances() {
        // every three-user spec with M_sum <= 9 and M_k <= 3 on a coarse rank grid
        let mut checked = 0;
        for m in [[1, 1, 1], [2, 1, 1], [2, 2, 1], [3, 2, 2], [3, 3, 3], [3, 1, 1]] {
            let caps: Vec<usize> = (0..6)
                .map(|c| {
                    let (j, i) = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)][c];
                    m[i].min(m[j])
                })
                .collect();
            let mut idx = [0usize; 6];
            loop {
                let s = spec3(m, idx[0], idx[1], idx[2], idx[3], idx[4], idx[5]);
                assert_eq!(reduced_rank_feasible(&s).unwrap().is_feasible(), exists_certificate(&s), "{s:?}");
                checked += 1;
                let mut c = 0;
                while c < 6 {
                    idx[c] += 1;
                    if idx[c] <= caps[c] {
                        break;
                    }
                    idx[c] = 0;
                    c += 1;
                }
                if c == 6 {
                    break;
                }
            }
        }
        assert!(checked > 1000);
    }

    fn arb_square_spec() -> impl Strategy<Value = NetworkSpec> {
        (2usize..=4)
            .prop_flat_map(|k| (Just(k), prop::collection::vec(1usize..=4, k)))
            .prop_flat_map(|(k, m)| {
                let m2 = m.clone();
                (Just(m), prop::collection::vec(prop::collection::vec(0usize..=4, k), k)).prop_map(move |(m, raw)| {
                    let d = (0..k)
                        .map(|j| (0..k).map(|i| raw[j][i].min(m2[i]).min(m2[j])).collect())
                        .collect();
                    NetworkSpec::square(m, d).unwrap()
                })
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn returned_certificates_are_valid(spec in arb_square_spec()) {
            if let Feasibility::Feasible(c) = reduced_rank_feasible(&spec).unwrap() {
                prop_assert!(c.check(&spec).is_ok());
            }
            if spec.k() == 3 {
                let eq5 = check_condition_eq5(&spec).unwrap();
                prop_assert_eq!(eq5, reduced_rank_feasible(&spec).unwrap().is_feasible());
                prop_assert_eq!(eq5, first_violated(&spec).unwrap().is_none());
                if eq5 {
                    prop_assert!(assign_reduced_ranks_3user(&spec).unwrap().check(&spec).is_ok());
                }
            }
        }

        #[test]
        fn symmetric_allocation_always_valid(k in 2usize..=6, m in 1usize..=8, d in 0usize..=8) {
            let d = d.min(m);
            match symmetric_allocation(k, m, d) {
                Ok(c) => prop_assert!(c.check(&NetworkSpec::symmetric(k, m, d).unwrap()).is_ok()),
                Err(_) => prop_assert!((k - 1) * d < m),
            }
        }

        #[test]
        fn merged_pair_bound_is_half_exactly_on_the_boundary(spec in arb_square_spec()) {
            if spec.k() == 3 {
                for [p, q, r] in PERMUTATIONS {
                    if theorem5_matches(&spec, p, q, r) {
                        prop_assert_eq!(merged_pair_bound(&spec, p, q, r), Dof::half(spec.m_sum()));
                    }
                }
            }
        }
    }
}
