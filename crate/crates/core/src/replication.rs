//! Replicated and created networks, cooperation, and the outer bounds they
//! yield.
//!
//! Replica `gamma` of user `k` is [`ReplicaId`] `{ user: k, copy: gamma }`,
//! 0-based in memory and 1-based `[k, gamma]` pairs in JSON.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::channel::{ChannelRealization, ExtendedRealization, NetworkSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, generic_rank_of, BlockPattern, LinkShape, Matrix};
use crate::rational::Dof;
use crate::schemes::{LinearScheme, UserStreams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReplicaId {
    pub user: usize,
    pub copy: usize,
}

impl ReplicaId {
    pub fn new(user: usize, copy: usize) -> Self {
        Self { user, copy }
    }
}

/// Which replica of transmitter `i` reaches receiver replica `j^[beta]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Assignment {
    /// Two replicas per user; each receiver replica hears the other copy.
    Mirror,
    /// `alpha = beta + s[j][i] mod mu_i`; the diagonal is ignored.
    Shifts(Vec<Vec<usize>>),
    /// `alpha = min(beta, mu_i - 1)`, for unequal replica counts.
    Clamped,
    /// Explicit `(j, beta, i, alpha)` entries, 0-based.
    Table(Vec<[usize; 4]>),
}

/// One replication outer-bound instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplicationPlan {
    mu: Vec<usize>,
    assign: Assignment,
    partition: [Vec<ReplicaId>; 2],
}

impl ReplicationPlan {
    /// Checks replica counts, the assignment and the partition.
    pub fn new(mu: Vec<usize>, assign: Assignment, partition: [Vec<ReplicaId>; 2]) -> Result<Self> {
        if mu.len() < 2 || mu.contains(&0) {
            return Err(Error::PlanViolatesDefinition1(format!(
                "replica counts {mu:?} must be positive for at least two users"
            )));
        }
        let plan = Self {
            mu,
            assign,
            partition,
        };
        for j in 0..plan.k() {
            for beta in 0..plan.mu[j] {
                for i in (0..plan.k()).filter(|&i| i != j) {
                    plan.source_copy(j, beta, i)?;
                }
            }
        }
        if let Assignment::Table(entries) = &plan.assign {
            let expected: usize = (0..plan.k()).map(|j| plan.mu[j] * (plan.k() - 1)).sum();
            if entries.len() != expected {
                return Err(Error::PlanViolatesDefinition1(format!(
                    "table has {} entries, expected one per (receiver replica, interferer) = {expected}",
                    entries.len()
                )));
            }
        }
        plan.check_partition()?;
        Ok(plan)
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[usize] {
        &self.mu
    }

    pub fn assign(&self) -> &Assignment {
        &self.assign
    }

    pub fn partition(&self) -> &[Vec<ReplicaId>; 2] {
        &self.partition
    }

    /// The common replica count, if uniform.
    pub fn uniform_mu(&self) -> Option<usize> {
        let first = self.mu[0];
        self.mu.iter().all(|&m| m == first).then_some(first)
    }

    /// All replicas in user-major order.
    pub fn replicas(&self) -> Vec<ReplicaId> {
        (0..self.k())
            .flat_map(|user| (0..self.mu[user]).map(move |copy| ReplicaId { user, copy }))
            .collect()
    }

    fn check_partition(&self) -> Result<()> {
        let mut seen = vec![vec![false; 0]; self.k()];
        for (u, s) in seen.iter_mut().enumerate() {
            *s = vec![false; self.mu[u]];
        }
        for r in self.partition.iter().flatten() {
            if r.user >= self.k() || r.copy >= self.mu[r.user] {
                return Err(Error::BadPartition(format!(
                    "replica [{}, {}] does not exist",
                    r.user + 1,
                    r.copy + 1
                )));
            }
            if std::mem::replace(&mut seen[r.user][r.copy], true) {
                return Err(Error::BadPartition(format!(
                    "replica [{}, {}] appears twice",
                    r.user + 1,
                    r.copy + 1
                )));
            }
        }
        if let Some((u, c)) = seen
            .iter()
            .enumerate()
            .find_map(|(u, s)| s.iter().position(|&x| !x).map(|c| (u, c)))
        {
            return Err(Error::BadPartition(format!(
                "replica [{}, {}] is in neither group",
                u + 1,
                c + 1
            )));
        }
        Ok(())
    }

    /// The copy `alpha` of transmitter `i` heard by receiver replica `j^[beta]`.
    pub fn source_copy(&self, j: usize, beta: usize, i: usize) -> Result<usize> {
        let violates = |msg: String| Error::PlanViolatesDefinition1(msg);
        let mu_i = self.mu[i];
        let alpha = match &self.assign {
            Assignment::Mirror => {
                if self.mu[i] != 2 || self.mu[j] != 2 {
                    return Err(violates("the mirror assignment needs two replicas per user".into()));
                }
                1 - beta
            }
            Assignment::Shifts(s) => {
                let shift = s
                    .get(j)
                    .and_then(|row| row.get(i))
                    .ok_or_else(|| violates(format!("shift table must be {0}x{0}", self.k())))?;
                (beta + shift) % mu_i
            }
            Assignment::Clamped => beta.min(mu_i - 1),
            Assignment::Table(entries) => {
                let mut hits = entries.iter().filter(|e| e[0] == j && e[1] == beta && e[2] == i);
                let hit = hits.next().ok_or_else(|| {
                    violates(format!(
                        "receiver [{}, {}] hears no replica of transmitter {}",
                        j + 1,
                        beta + 1,
                        i + 1
                    ))
                })?;
                if hits.next().is_some() {
                    return Err(violates(format!(
                        "receiver [{}, {}] hears transmitter {} more than once",
                        j + 1,
                        beta + 1,
                        i + 1
                    )));
                }
                hit[3]
            }
        };
        if alpha >= mu_i {
            return Err(violates(format!(
                "receiver [{}, {}] is assigned replica {} of transmitter {}, which has {mu_i}",
                j + 1,
                beta + 1,
                alpha + 1,
                i + 1
            )));
        }
        Ok(alpha)
    }
}

/// Uniform `mu` replicas with circulant shifts: receiver `j` hears
/// transmitter `j + o` through shift `offsets[o - 1]`. Group 1 holds the
/// copies below `split`, group 2 the rest.
pub fn circulant_plan(k: usize, mu: usize, offsets: &[usize], split: usize) -> Result<ReplicationPlan> {
    if offsets.len() + 1 != k {
        return Err(Error::PlanViolatesDefinition1(format!(
            "need {} circulant offsets, got {}",
            k.saturating_sub(1),
            offsets.len()
        )));
    }
    let shifts = (0..k)
        .map(|j| (0..k).map(|i| if i == j { 0 } else { offsets[(i + k - j) % k - 1] }).collect())
        .collect();
    let layer = |copies: std::ops::Range<usize>| -> Vec<ReplicaId> {
        copies.flat_map(|c| (0..k).map(move |u| ReplicaId::new(u, c))).collect()
    };
    ReplicationPlan::new(vec![mu; k], Assignment::Shifts(shifts), [layer(0..split), layer(split..mu)])
}

/// Two replicas per user, each receiver hearing the other copy; group 1
/// holds the first copies.
pub fn mirror_plan(k: usize) -> Result<ReplicationPlan> {
    let layer = |c: usize| -> Vec<ReplicaId> { (0..k).map(|u| ReplicaId::new(u, c)).collect() };
    ReplicationPlan::new(vec![2; k], Assignment::Mirror, [layer(0), layer(1)])
}

/// The five-replica plan whose cooperative bound on the full-rank
/// `(2 x 3)` three-user network is 18/5.
pub fn example_2x3_plan() -> ReplicationPlan {
    circulant_plan(3, 5, &[2, 3], 3).expect("plan is valid")
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AssignWire {
    Named(String),
    Shifts { shifts: Vec<Vec<Option<usize>>> },
    Table { table: Vec<[usize; 4]> },
}

#[derive(Serialize, Deserialize)]
struct PlanWire {
    mu: Vec<usize>,
    assign: AssignWire,
    partition: [Vec<[usize; 2]>; 2],
}

impl Serialize for ReplicationPlan {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let assign = match &self.assign {
            Assignment::Mirror => AssignWire::Named("mirror".into()),
            Assignment::Clamped => AssignWire::Named("clamped".into()),
            Assignment::Shifts(sh) => AssignWire::Shifts {
                shifts: sh
                    .iter()
                    .enumerate()
                    .map(|(j, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(i, &v)| (i != j).then_some(v))
                            .collect()
                    })
                    .collect(),
            },
            Assignment::Table(t) => AssignWire::Table {
                table: t.iter().map(|e| e.map(|x| x + 1)).collect(),
            },
        };
        let group = |g: &Vec<ReplicaId>| g.iter().map(|r| [r.user + 1, r.copy + 1]).collect();
        PlanWire {
            mu: self.mu.clone(),
            assign,
            partition: [group(&self.partition[0]), group(&self.partition[1])],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ReplicationPlan {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = PlanWire::deserialize(d)?;
        let assign = match w.assign {
            AssignWire::Named(n) if n == "mirror" => Assignment::Mirror,
            AssignWire::Named(n) if n == "clamped" => Assignment::Clamped,
            AssignWire::Named(n) => return Err(D::Error::custom(format!("unknown assignment {n:?}"))),
            AssignWire::Shifts { shifts } => {
                Assignment::Shifts(shifts.into_iter().map(|r| r.into_iter().map(|v| v.unwrap_or(0)).collect()).collect())
            }
            AssignWire::Table { table } => {
                if table.iter().flatten().any(|&x| x == 0) {
                    return Err(D::Error::custom("table entries are 1-based"));
                }
                Assignment::Table(table.into_iter().map(|e| e.map(|x| x - 1)).collect())
            }
        };
        let group = |g: Vec<[usize; 2]>| -> std::result::Result<Vec<ReplicaId>, D::Error> {
            g.into_iter()
                .map(|[u, c]| {
                    if u == 0 || c == 0 {
                        Err(D::Error::custom("replica ids are 1-based"))
                    } else {
                        Ok(ReplicaId::new(u - 1, c - 1))
                    }
                })
                .collect()
        };
        let [g1, g2] = w.partition;
        ReplicationPlan::new(w.mu, assign, [group(g1)?, group(g2)?]).map_err(D::Error::custom)
    }
}

/// The `(sum mu_k)`-user network of a plan.
#[derive(Clone, Debug)]
pub struct ReplicatedNetwork {
    /// Rank bounds: the original rank where a copy is wired, zero elsewhere.
    pub spec: NetworkSpec,
    /// Replica behind each user index of `spec`, user-major.
    pub replicas: Vec<ReplicaId>,
    /// `source[a][b]`: the original link copied into block `(a, b)`, if any.
    pub source: Vec<Vec<Option<(usize, usize)>>>,
}

impl ReplicatedNetwork {
    pub fn index_of(&self, r: ReplicaId) -> Option<usize> {
        self.replicas.iter().position(|&x| x == r)
    }

    /// Interfering transmitters wired to receiver replica `a`.
    pub fn interferers(&self, a: usize) -> Vec<usize> {
        (0..self.replicas.len())
            .filter(|&b| b != a && self.source[a][b].is_some())
            .collect()
    }
}

/// Builds the replicated network: desired replica links copy `H_kk`, cross
/// links follow the assignment, everything else is zero.
pub fn build_replicated(spec: &NetworkSpec, plan: &ReplicationPlan) -> Result<ReplicatedNetwork> {
    if plan.k() != spec.k() {
        return Err(Error::PlanViolatesDefinition1(format!(
            "plan has {} users, network has {}",
            plan.k(),
            spec.k()
        )));
    }
    let replicas = plan.replicas();
    let n = replicas.len();
    let mut source = vec![vec![None; n]; n];
    let mut d = vec![vec![0usize; n]; n];
    for (a, rx) in replicas.iter().enumerate() {
        for (b, tx) in replicas.iter().enumerate() {
            let wired = if rx.user == tx.user {
                rx.copy == tx.copy
            } else {
                plan.source_copy(rx.user, rx.copy, tx.user)? == tx.copy
            };
            if wired {
                source[a][b] = Some((rx.user, tx.user));
                d[a][b] = spec.rank(rx.user, tx.user);
            }
        }
    }
    let m = replicas.iter().map(|r| spec.tx(r.user)).collect();
    let nn = replicas.iter().map(|r| spec.rx(r.user)).collect();
    let rep_spec = NetworkSpec::new(m, nn, d)?;
    let net = ReplicatedNetwork {
        spec: rep_spec,
        replicas,
        source,
    };
    for a in 0..n {
        let heard = net.interferers(a).len();
        if heard != spec.k() - 1 {
            return Err(Error::PlanViolatesDefinition1(format!(
                "receiver replica {a} hears {heard} interferers"
            )));
        }
    }
    Ok(net)
}

/// The two-user channel left after full cooperation within each group.
#[derive(Clone, Debug, Serialize)]
pub struct CooperativeChannel {
    #[serde(rename = "Mbar1")]
    pub mbar1: usize,
    #[serde(rename = "Nbar1")]
    pub nbar1: usize,
    #[serde(rename = "Mbar2")]
    pub mbar2: usize,
    #[serde(rename = "Nbar2")]
    pub nbar2: usize,
    /// Group-1 transmitters to group-2 receivers. Placements copying the
    /// same original link share one link, hence one realization.
    #[serde(skip)]
    pub hcoop: BlockPattern,
}

pub fn cooperate(net: &ReplicatedNetwork, partition: &[Vec<ReplicaId>; 2]) -> Result<CooperativeChannel> {
    let lookup = |g: &Vec<ReplicaId>| -> Result<Vec<usize>> {
        g.iter()
            .map(|&r| {
                net.index_of(r).ok_or_else(|| {
                    Error::BadPartition(format!("replica [{}, {}] does not exist", r.user + 1, r.copy + 1))
                })
            })
            .collect()
    };
    let (g1, g2) = (lookup(&partition[0])?, lookup(&partition[1])?);
    let mut all: Vec<usize> = g1.iter().chain(&g2).copied().collect();
    all.sort_unstable();
    all.dedup();
    if all.len() != net.replicas.len() || g1.len() + g2.len() != all.len() {
        return Err(Error::BadPartition("groups must cover every replica exactly once".into()));
    }
    let spec = &net.spec;
    let total = |g: &[usize], f: &dyn Fn(usize) -> usize| g.iter().map(|&a| f(a)).sum::<usize>();
    let mut hcoop = BlockPattern::new(
        g2.iter().map(|&a| spec.rx(a)).collect(),
        g1.iter().map(|&b| spec.tx(b)).collect(),
    );
    for (row, &a) in g2.iter().enumerate() {
        for (col, &b) in g1.iter().enumerate() {
            if let Some((j, i)) = net.source[a][b] {
                let link = hcoop.link_for(LinkShape {
                    rows: spec.rx(a),
                    cols: spec.tx(b),
                    rank: spec.rank(a, b),
                    origin: (j, i),
                });
                hcoop.place(row, col, link)?;
            }
        }
    }
    Ok(CooperativeChannel {
        mbar1: total(&g1, &|a| spec.tx(a)),
        nbar1: total(&g1, &|a| spec.rx(a)),
        mbar2: total(&g2, &|a| spec.tx(a)),
        nbar2: total(&g2, &|a| spec.rx(a)),
        hcoop,
    })
}

/// How the rank of the cooperative cross matrix is obtained.
#[derive(Clone, Debug)]
pub enum RankMode {
    /// Structure-level rank: maximum over random prime-field trials.
    Generic { trials: usize, seed: u64 },
    /// Rank of the matrix assembled from one concrete realization.
    Realized(ChannelRealization),
}

impl Default for RankMode {
    fn default() -> Self {
        RankMode::Generic {
            trials: linalg::DEFAULT_TRIALS,
            seed: 0,
        }
    }
}

impl CooperativeChannel {
    pub fn rank(&self, mode: &RankMode) -> Result<usize> {
        match mode {
            RankMode::Generic { trials, seed } => Ok(generic_rank_of(&self.hcoop, *trials, *seed)),
            RankMode::Realized(real) => {
                let values: Vec<Matrix> = self
                    .hcoop
                    .links
                    .iter()
                    .map(|l| real.block(l.origin.0, l.origin.1).clone())
                    .collect();
                let domain = real.domain();
                Ok(linalg::rank(&self.hcoop.assemble(&values, &domain), &domain))
            }
        }
    }
}

/// `d_sum <= (Mbar1 + Nbar2 - rank) / mu` with its provenance.
#[derive(Clone, Debug, Serialize)]
pub struct DofBound {
    #[serde(rename = "bound")]
    pub value: Dof,
    pub mu: usize,
    pub rank: usize,
    #[serde(rename = "Mbar1")]
    pub mbar1: usize,
    #[serde(rename = "Nbar2")]
    pub nbar2: usize,
    #[serde(rename = "Nbar1")]
    pub nbar1: usize,
    #[serde(rename = "Mbar2")]
    pub mbar2: usize,
    pub plan: ReplicationPlan,
}

fn check_realization(spec: &NetworkSpec, mode: &RankMode) -> Result<()> {
    if let RankMode::Realized(real) = mode {
        if real.spec() != spec {
            return Err(Error::DimensionMismatch("realization belongs to another network".into()));
        }
    }
    Ok(())
}

/// Sum-DoF outer bound of a uniform-replica plan.
pub fn outer_bound(spec: &NetworkSpec, plan: &ReplicationPlan, mode: &RankMode) -> Result<DofBound> {
    let mu = plan
        .uniform_mu()
        .ok_or_else(|| Error::NonUniformMu(plan.mu().to_vec()))?;
    check_realization(spec, mode)?;
    let net = build_replicated(spec, plan)?;
    let coop = cooperate(&net, plan.partition())?;
    let rank = coop.rank(mode)?;
    Ok(DofBound {
        value: Dof::new((coop.mbar1 + coop.nbar2 - rank) as i64, mu as i64),
        mu,
        rank,
        mbar1: coop.mbar1,
        nbar2: coop.nbar2,
        nbar1: coop.nbar1,
        mbar2: coop.mbar2,
        plan: plan.clone(),
    })
}

/// `sum_k mu_k d_k <= rhs`, the DoF form of the weighted-rate statement.
#[derive(Clone, Debug, Serialize)]
pub struct WeightedBound {
    pub weights: Vec<usize>,
    pub rhs: usize,
    pub rank: usize,
    #[serde(rename = "Mbar1")]
    pub mbar1: usize,
    #[serde(rename = "Nbar2")]
    pub nbar2: usize,
    pub statement: String,
    pub plan: ReplicationPlan,
}

impl WeightedBound {
    pub fn admits(&self, dof: &[Dof]) -> bool {
        let lhs: Dof = dof
            .iter()
            .zip(&self.weights)
            .map(|(d, &w)| *d * w as i64)
            .sum();
        lhs <= Dof::integer(self.rhs as i64)
    }
}

pub fn weighted_dof_bound(spec: &NetworkSpec, plan: &ReplicationPlan, mode: &RankMode) -> Result<WeightedBound> {
    check_realization(spec, mode)?;
    let net = build_replicated(spec, plan)?;
    let coop = cooperate(&net, plan.partition())?;
    let rank = coop.rank(mode)?;
    let rhs = coop.mbar1 + coop.nbar2 - rank;
    let lhs: Vec<String> = plan
        .mu()
        .iter()
        .enumerate()
        .map(|(k, w)| format!("{w}*d{}", k + 1))
        .collect();
    Ok(WeightedBound {
        weights: plan.mu().to_vec(),
        rhs,
        rank,
        mbar1: coop.mbar1,
        nbar2: coop.nbar2,
        statement: format!("{} <= {rhs}", lhs.join(" + ")),
        plan: plan.clone(),
    })
}

/// Counters from a bound search.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SearchOutcome {
    pub best: Option<DofBound>,
    pub evaluated: usize,
    pub pruned: usize,
}

fn layer_major(k: usize, mu: usize) -> Vec<ReplicaId> {
    (0..mu)
        .flat_map(|copy| (0..k).map(move |user| ReplicaId { user, copy }))
        .collect()
}

/// Contiguous cuts of the layer-major replica order, whole layers first,
/// each in both orientations.
fn contiguous_partitions(k: usize, mu: usize) -> Vec<[Vec<ReplicaId>; 2]> {
    let order = layer_major(k, mu);
    let n = order.len();
    let cuts: Vec<usize> = (1..mu)
        .map(|c| c * k)
        .chain((1..n).filter(|c| c % k != 0))
        .collect();
    let mut out = Vec::new();
    for c in cuts {
        let (a, b) = order.split_at(c);
        out.push([a.to_vec(), b.to_vec()]);
        out.push([b.to_vec(), a.to_vec()]);
    }
    out
}

/// Odometer over `len` digits in `0..base`.
fn odometer(len: usize, base: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = base.checked_pow(len as u32).unwrap_or(usize::MAX);
    (0..total).map(move |mut x| {
        let mut digits = vec![0; len];
        for d in digits.iter_mut() {
            *d = x % base;
            x /= base;
        }
        digits
    })
}

fn shift_tables(k: usize, mu: usize, offset_invariant: bool) -> Box<dyn Iterator<Item = Vec<Vec<usize>>>> {
    if offset_invariant {
        Box::new(odometer(k - 1, mu).map(move |s| {
            (0..k)
                .map(|j| (0..k).map(|i| if i == j { 0 } else { s[(i + k - j) % k - 1] }).collect())
                .collect()
        }))
    } else {
        let cells: Vec<(usize, usize)> = (0..k)
            .flat_map(|j| (0..k).filter(move |&i| i != j).map(move |i| (j, i)))
            .collect();
        Box::new(odometer(cells.len(), mu).filter_map(move |s| {
            let mut t = vec![vec![0; k]; k];
            for (&(j, i), &v) in cells.iter().zip(&s) {
                t[j][i] = v;
            }
            // offset-invariant tables were already tried
            let invariant = cells
                .iter()
                .all(|&(j, i)| t[j][i] == t[0][(i + k - j) % k]);
            (!invariant).then_some(t)
        }))
    }
}

/// Bounded search over uniform replica counts `1..=mu_max`, circulant shift
/// assignments (offset-invariant family first) and contiguous partitions.
/// Candidates that cannot beat the current best are skipped without a rank
/// evaluation; `budget` caps the number of evaluations. Deterministic.
pub fn search_bounds(spec: &NetworkSpec, mu_max: usize, budget: usize, seed: u64) -> Result<SearchOutcome> {
    search_bounds_with(spec, mu_max, budget, linalg::DEFAULT_TRIALS, seed, |_| {})
}

/// [`search_bounds`] with an explicit trial count, calling `visit` on every
/// evaluated bound.
pub fn search_bounds_with(
    spec: &NetworkSpec,
    mu_max: usize,
    budget: usize,
    trials: usize,
    seed: u64,
    mut visit: impl FnMut(&DofBound),
) -> Result<SearchOutcome> {
    let k = spec.k();
    let mode = RankMode::Generic { trials, seed };
    let mut out = SearchOutcome::default();
    for mu in 1..=mu_max.max(1) {
        let partitions = contiguous_partitions(k, mu);
        for offset_invariant in [true, false] {
            if !offset_invariant && (mu == 1 || k == 2) {
                // every table is offset-invariant here
                continue;
            }
            for part in &partitions {
                let size = |g: &Vec<ReplicaId>, f: &dyn Fn(usize) -> usize| g.iter().map(|r| f(r.user)).sum::<usize>();
                let m1 = size(&part[0], &|u| spec.tx(u));
                let n2 = size(&part[1], &|u| spec.rx(u));
                let floor = Dof::new(m1.max(n2) as i64, mu as i64);
                for shifts in shift_tables(k, mu, offset_invariant) {
                    if out.best.as_ref().is_some_and(|b| floor >= b.value) {
                        out.pruned += 1;
                        break;
                    }
                    if out.evaluated >= budget {
                        return Ok(out);
                    }
                    let plan = ReplicationPlan::new(vec![mu; k], Assignment::Shifts(shifts), part.clone())?;
                    let bound = outer_bound(spec, &plan, &mode)?;
                    out.evaluated += 1;
                    visit(&bound);
                    if out.best.as_ref().map_or(true, |b| bound.value < b.value) {
                        out.best = Some(bound);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// The all-connected replica network with random real link scalars.
#[derive(Clone, Debug)]
pub struct CreatedNetwork {
    spec: NetworkSpec,
    mu: Vec<usize>,
    replicas: Vec<ReplicaId>,
    /// `scalars[a][b]` multiplies `H_ji` on the block from replica `b` of
    /// user `i` to replica `a` of user `j` (`i != j`); zero elsewhere.
    scalars: Vec<Vec<f64>>,
}

/// Draws every cross scalar uniformly from `[0, 1)`, receiver-replica-major.
pub fn build_created_network(spec: &NetworkSpec, mu: &[usize], seed: u64) -> Result<CreatedNetwork> {
    if mu.len() != spec.k() || mu.contains(&0) {
        return Err(Error::BadShape(format!(
            "need {} positive replica counts, got {mu:?}",
            spec.k()
        )));
    }
    let replicas: Vec<ReplicaId> = (0..spec.k())
        .flat_map(|user| (0..mu[user]).map(move |copy| ReplicaId { user, copy }))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scalars = replicas
        .iter()
        .map(|rx| {
            replicas
                .iter()
                .map(|tx| if rx.user == tx.user { 0.0 } else { rng.random::<f64>() })
                .collect()
        })
        .collect();
    Ok(CreatedNetwork {
        spec: spec.clone(),
        mu: mu.to_vec(),
        replicas,
        scalars,
    })
}

impl CreatedNetwork {
    pub fn mu(&self) -> &[usize] {
        &self.mu
    }

    pub fn replicas(&self) -> &[ReplicaId] {
        &self.replicas
    }

    pub fn scalar(&self, rx: ReplicaId, tx: ReplicaId) -> f64 {
        let a = self.replicas.iter().position(|&r| r == rx).expect("replica exists");
        let b = self.replicas.iter().position(|&r| r == tx).expect("replica exists");
        self.scalars[a][b]
    }

    /// Rank bounds of the created network, one user per replica.
    pub fn replica_spec(&self) -> Result<NetworkSpec> {
        let n = self.replicas.len();
        let d = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let (rx, tx) = (self.replicas[a], self.replicas[b]);
                        if rx.user == tx.user {
                            0
                        } else {
                            self.spec.rank(rx.user, tx.user)
                        }
                    })
                    .collect()
            })
            .collect();
        NetworkSpec::new(
            self.replicas.iter().map(|r| self.spec.tx(r.user)).collect(),
            self.replicas.iter().map(|r| self.spec.rx(r.user)).collect(),
            d,
        )
    }

    /// Applies the created-network wiring to every slot of `ext`.
    pub fn realize(&self, ext: &ExtendedRealization) -> Result<ExtendedRealization> {
        if ext.spec() != &self.spec {
            return Err(Error::DimensionMismatch("extension belongs to another network".into()));
        }
        let rep_spec = self.replica_spec()?;
        let n = self.replicas.len();
        let slots = ext
            .slots()
            .iter()
            .map(|slot| {
                let blocks = (0..n)
                    .map(|a| {
                        (0..n)
                            .map(|b| {
                                let (rx, tx) = (self.replicas[a], self.replicas[b]);
                                let h = slot.complex_block(rx.user, tx.user)?;
                                Ok(Matrix::Complex(if rx.user != tx.user {
                                    h * linalg::C64::new(self.scalars[a][b], 0.0)
                                } else if rx.copy == tx.copy {
                                    h.clone()
                                } else {
                                    linalg::CMatrix::zeros(h.nrows(), h.ncols())
                                }))
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                ChannelRealization::from_blocks(&rep_spec, slot.domain(), slot.seed(), blocks)
            })
            .collect::<Result<Vec<_>>>()?;
        ExtendedRealization::new(slots)
    }

    /// Every replica reuses its user's beamformer and filter.
    pub fn lift_scheme(&self, scheme: &LinearScheme) -> Result<LinearScheme> {
        if scheme.users.len() != self.spec.k() {
            return Err(Error::DimensionMismatch(format!(
                "scheme has {} users, network has {}",
                scheme.users.len(),
                self.spec.k()
            )));
        }
        let users: Vec<UserStreams> = self
            .replicas
            .iter()
            .map(|r| scheme.users[r.user].clone())
            .collect();
        Ok(LinearScheme { n: scheme.n, users })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::auxiliary_user_plan;
    use crate::linalg::{generic_rank, FpMatrix, RankShape};
    use crate::presets;
    use proptest::prelude::*;

    fn layers(k: usize, copies: std::ops::Range<usize>) -> Vec<ReplicaId> {
        copies.flat_map(|c| (0..k).map(move |u| ReplicaId::new(u, c))).collect()
    }

    fn plan_2x3() -> ReplicationPlan {
        example_2x3_plan()
    }

    fn mirror_layers(k: usize) -> ReplicationPlan {
        mirror_plan(k).unwrap()
    }

    #[test]
    fn identity_plan_reproduces_the_network() {
        let spec = presets::counterexample();
        let plan = ReplicationPlan::new(
            vec![1; 3],
            Assignment::Shifts(vec![vec![0; 3]; 3]),
            [vec![ReplicaId::new(0, 0)], vec![ReplicaId::new(1, 0), ReplicaId::new(2, 0)]],
        )
        .unwrap();
        let net = build_replicated(&spec, &plan).unwrap();
        assert_eq!(net.spec, spec);
    }

    #[test]
    fn mirror_plan_builds_six_users() {
        let spec = presets::counterexample();
        let net = build_replicated(&spec, &mirror_layers(3)).unwrap();
        assert_eq!(net.spec.k(), 6);
        for a in 0..6 {
            assert_eq!(net.interferers(a).len(), 2);
            for b in net.interferers(a) {
                assert_ne!(net.replicas[a].copy, net.replicas[b].copy);
            }
        }
    }

    #[test]
    fn circulant_plan_matches_explicit_shifts() {
        let mut s = vec![vec![0; 3]; 3];
        for j in 0..3 {
            s[j][(j + 1) % 3] = 2;
            s[j][(j + 2) % 3] = 3;
        }
        let explicit =
            ReplicationPlan::new(vec![5; 3], Assignment::Shifts(s), [layers(3, 0..3), layers(3, 3..5)]).unwrap();
        assert_eq!(explicit, plan_2x3());
        assert!(circulant_plan(3, 5, &[1], 2).is_err());
    }

    #[test]
    fn shift_plan_is_valid() {
        let net = build_replicated(&presets::example_2x3(), &plan_2x3()).unwrap();
        assert_eq!(net.spec.k(), 15);
        // receiver 1 copy 4 hears transmitter 2 copy 1 and transmitter 3 copy 2 (1-based)
        let a = net.index_of(ReplicaId::new(0, 3)).unwrap();
        let heard: Vec<ReplicaId> = net.interferers(a).into_iter().map(|b| net.replicas[b]).collect();
        assert_eq!(heard, vec![ReplicaId::new(1, 0), ReplicaId::new(2, 1)]);
    }

    #[test]
    fn clamped_plan_for_unequal_counts() {
        let spec = presets::counterexample();
        let all: Vec<ReplicaId> = [(0, 3), (1, 2), (2, 1)]
            .iter()
            .flat_map(|&(u, m)| (0..m).map(move |c| ReplicaId::new(u, c)))
            .collect();
        let (g1, g2) = all.split_at(3);
        let plan = ReplicationPlan::new(vec![3, 2, 1], Assignment::Clamped, [g1.to_vec(), g2.to_vec()]).unwrap();
        let net = build_replicated(&spec, &plan).unwrap();
        // receiver 2 copy 2 hears transmitter 1 copy 2 and transmitter 3 copy 1
        let a = net.index_of(ReplicaId::new(1, 1)).unwrap();
        let heard: Vec<ReplicaId> = net.interferers(a).into_iter().map(|b| net.replicas[b]).collect();
        assert_eq!(heard, vec![ReplicaId::new(0, 1), ReplicaId::new(2, 0)]);
        let w = weighted_dof_bound(&spec, &plan, &RankMode::default()).unwrap();
        assert_eq!(w.weights, vec![3, 2, 1]);
        assert!(w.statement.starts_with("3*d1 + 2*d2 + 1*d3 <= "));
    }

    #[test]
    fn bad_plans_are_rejected() {
        let g = [layers(3, 0..1), layers(3, 1..2)];
        assert!(matches!(
            ReplicationPlan::new(vec![2, 2, 3], Assignment::Mirror, g.clone()),
            Err(Error::PlanViolatesDefinition1(_))
        ));
        let table = vec![[0, 0, 1, 1]];
        assert!(matches!(
            ReplicationPlan::new(vec![2; 3], Assignment::Table(table), g.clone()),
            Err(Error::PlanViolatesDefinition1(_))
        ));
        let mut short = g.clone();
        short[1].pop();
        assert!(matches!(
            ReplicationPlan::new(vec![2; 3], Assignment::Mirror, short),
            Err(Error::BadPartition(_))
        ));
        let mut dup = g;
        dup[1][0] = ReplicaId::new(0, 0);
        assert!(matches!(
            ReplicationPlan::new(vec![2; 3], Assignment::Mirror, dup),
            Err(Error::BadPartition(_))
        ));
    }

    #[test]
    fn plan_json_roundtrip() {
        for plan in [plan_2x3(), mirror_layers(3)] {
            let json = serde_json::to_string(&plan).unwrap();
            let back: ReplicationPlan = serde_json::from_str(&json).unwrap();
            assert_eq!(back, plan);
        }
        let json = r#"{"mu":[2,2],"assign":"mirror","partition":[[[1,1],[2,1]],[[1,2],[2,2]]]}"#;
        let plan: ReplicationPlan = serde_json::from_str(json).unwrap();
        assert_eq!(serde_json::to_string(&plan).unwrap(), json);
    }

    #[test]
    fn table_plan_equals_mirror() {
        let mut table = Vec::new();
        for j in 0..3 {
            for beta in 0..2 {
                for i in (0..3).filter(|&i| i != j) {
                    table.push([j, beta, i, 1 - beta]);
                }
            }
        }
        let spec = presets::reducible_example();
        let p1 = ReplicationPlan::new(vec![2; 3], Assignment::Table(table), mirror_layers(3).partition().clone()).unwrap();
        let a = outer_bound(&spec, &p1, &RankMode::default()).unwrap();
        let b = outer_bound(&spec, &mirror_layers(3), &RankMode::default()).unwrap();
        assert_eq!((a.value, a.rank), (b.value, b.rank));
    }

    #[test]
    fn mirror_cooperation_gives_stripped_matrix() {
        let spec = presets::counterexample();
        let net = build_replicated(&spec, &mirror_layers(3)).unwrap();
        let coop = cooperate(&net, mirror_layers(3).partition()).unwrap();
        assert_eq!((coop.mbar1, coop.nbar2), (24, 24));
        assert_eq!(coop.rank(&RankMode::default()).unwrap(), 23);
        let b = outer_bound(&spec, &mirror_layers(3), &RankMode::default()).unwrap();
        assert_eq!(b.value, Dof::new(25, 2));
    }

    #[test]
    fn example_2x3_bound() {
        let spec = presets::example_2x3();
        let b = outer_bound(&spec, &plan_2x3(), &RankMode::default()).unwrap();
        assert_eq!((b.mbar1, b.nbar1, b.mbar2, b.nbar2), (18, 27, 12, 18));
        assert_eq!(b.rank, 18);
        assert_eq!(b.value, Dof::new(18, 5));
        let json = serde_json::to_value(&b).unwrap();
        assert_eq!(json["bound"], serde_json::json!({"num": 18, "den": 5}));
        assert_eq!(json["Mbar1"], 18);
    }

    #[test]
    fn example_2x3_witness_rank() {
        let real = presets::example_2x3_witness();
        let b = outer_bound(&presets::example_2x3(), &plan_2x3(), &RankMode::Realized(real)).unwrap();
        assert_eq!(b.rank, 18);
    }

    #[test]
    fn example_asym_bound_and_witness() {
        let spec = presets::example_asym();
        let b = outer_bound(&spec, &mirror_layers(3), &RankMode::default()).unwrap();
        assert_eq!((b.mbar1, b.nbar2, b.rank), (24, 23, 23));
        assert_eq!(b.value, Dof::integer(12));
        let w = outer_bound(&spec, &mirror_layers(3), &RankMode::Realized(presets::example_asym_witness())).unwrap();
        assert_eq!(w.rank, 23);
    }

    #[test]
    fn full_rank_stripped_gives_half_cake() {
        let spec = presets::reducible_example();
        let b = outer_bound(&spec, &mirror_layers(3), &RankMode::default()).unwrap();
        assert_eq!(b.value, Dof::integer(12));
        assert_eq!(b.value * b.mu as i64 + Dof::integer(b.rank as i64), Dof::integer((b.mbar1 + b.nbar2) as i64));
    }

    #[test]
    fn non_uniform_needs_weighted_form() {
        let spec = presets::counterexample();
        let all: Vec<ReplicaId> = [(0, 3), (1, 2), (2, 1)]
            .iter()
            .flat_map(|&(u, m)| (0..m).map(move |c| ReplicaId::new(u, c)))
            .collect();
        let plan = ReplicationPlan::new(vec![3, 2, 1], Assignment::Clamped, [all[..2].to_vec(), all[2..].to_vec()]).unwrap();
        assert!(matches!(outer_bound(&spec, &plan, &RankMode::default()), Err(Error::NonUniformMu(_))));
    }

    #[test]
    fn weighted_bound_single_group() {
        let spec = presets::counterexample();
        let plan = ReplicationPlan::new(
            vec![1; 3],
            Assignment::Shifts(vec![vec![0; 3]; 3]),
            [vec![ReplicaId::new(0, 0)], vec![ReplicaId::new(1, 0), ReplicaId::new(2, 0)]],
        )
        .unwrap();
        let w = weighted_dof_bound(&spec, &plan, &RankMode::default()).unwrap();
        // rank of [H21; H31] = min(10, 5 + 6)
        assert_eq!(w.rank, 10);
        assert_eq!(w.rhs, 10 + 14 - 10);
        assert!(w.admits(&[Dof::new(11, 2), Dof::new(9, 2), Dof::new(5, 2)]));
    }

    #[test]
    fn two_user_search_finds_m() {
        let spec = NetworkSpec::symmetric(2, 3, 3).unwrap();
        let out = search_bounds(&spec, 2, 1000, 0).unwrap();
        assert_eq!(out.best.unwrap().value, Dof::integer(3));
    }

    #[test]
    fn search_finds_18_over_5() {
        let out = search_bounds(&presets::example_2x3(), 5, 10_000, 0).unwrap();
        assert!(out.best.unwrap().value <= Dof::new(18, 5));
    }

    #[test]
    fn search_respects_budget() {
        let out = search_bounds(&presets::example_2x3(), 5, 3, 0).unwrap();
        assert_eq!(out.evaluated, 3);
        let again = search_bounds(&presets::example_2x3(), 5, 3, 0).unwrap();
        assert_eq!(out.best.unwrap().value, again.best.unwrap().value);
    }

    #[test]
    fn counterexample_bounds_never_beat_achievable() {
        let mut seen = 0;
        search_bounds_with(&presets::counterexample(), 2, 10_000, 8, 0, |b| {
            seen += 1;
            assert!(b.value >= Dof::new(25, 2), "{}", b.value);
        })
        .unwrap();
        assert!(seen > 0);
    }

    #[test]
    fn created_network_is_deterministic_and_all_connected() {
        let spec = presets::counterexample();
        let a = build_created_network(&spec, &[2, 2, 2], 4).unwrap();
        let b = build_created_network(&spec, &[2, 2, 2], 4).unwrap();
        assert_eq!(a.scalars, b.scalars);
        for rx in a.replicas() {
            for tx in a.replicas() {
                let s = a.scalar(*rx, *tx);
                if rx.user == tx.user {
                    assert_eq!(s, 0.0);
                } else {
                    assert!((0.0..1.0).contains(&s));
                }
            }
        }
    }

    #[test]
    fn trivial_created_network_scales_cross_links() {
        let spec = presets::counterexample();
        let c = build_created_network(&spec, &[1, 1, 1], 2).unwrap();
        let ext = ExtendedRealization::single(crate::channel::sample_generic(&spec, 1, linalg::ScalarDomain::complex()));
        let created = c.realize(&ext).unwrap();
        let a = c.scalar(ReplicaId::new(1, 0), ReplicaId::new(0, 0));
        let expected = ext.slot(0).complex_block(1, 0).unwrap() * linalg::C64::new(a, 0.0);
        assert_eq!(created.slot(0).complex_block(1, 0).unwrap(), &expected);
        assert_eq!(created.slot(0).block(0, 0), ext.slot(0).block(0, 0));
    }

    fn realized_hcoop(spec: &NetworkSpec, plan: &ReplicationPlan, real: &ChannelRealization) -> FpMatrix {
        let net = build_replicated(spec, plan).unwrap();
        let coop = cooperate(&net, plan.partition()).unwrap();
        let values: Vec<Matrix> = coop
            .hcoop
            .links
            .iter()
            .map(|l| real.block(l.origin.0, l.origin.1).clone())
            .collect();
        let domain = real.domain();
        coop.hcoop.assemble(&values, &domain).as_prime().unwrap().clone()
    }

    #[test]
    fn square_witnesses_have_nonzero_determinant() {
        let m = realized_hcoop(&presets::example_2x3(), &plan_2x3(), &presets::example_2x3_witness());
        assert_eq!((m.rows(), m.cols()), (18, 18));
        assert_ne!(m.determinant().unwrap(), 0);

        let spec = presets::theorem6_instance();
        let plan = auxiliary_user_plan(0, 1, 2);
        let m = realized_hcoop(&spec, &plan, &presets::theorem6_witness());
        assert_eq!((m.rows(), m.cols()), (13, 13));
        assert_ne!(m.determinant().unwrap(), 0);
        let b = outer_bound(&spec, &plan, &RankMode::Realized(presets::theorem6_witness())).unwrap();
        assert_eq!(b.value, Dof::new(13, 2));
    }

    #[test]
    fn example_asym_witness_has_full_row_rank() {
        let m = realized_hcoop(&presets::example_asym(), &mirror_layers(3), &presets::example_asym_witness());
        assert_eq!((m.rows(), m.cols()), (23, 24));
        assert_eq!(m.rank(), 23);
    }

    fn small_square() -> impl Strategy<Value = NetworkSpec> {
        (1usize..=3, 1usize..=3, 1usize..=3, prop::array::uniform6(0usize..=3)).prop_map(|(a, b, c, r)| {
            let m = [a, b, c];
            let cells = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)];
            let mut d = vec![vec![0; 3]; 3];
            for (&(j, i), &x) in cells.iter().zip(&r) {
                d[j][i] = x.min(m[i].min(m[j]));
            }
            NetworkSpec::square(m.to_vec(), d).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        // every emitted bound is at least what ergodic alignment achieves
        #[test]
        fn search_bounds_are_sound(spec in small_square()) {
            let half = Dof::half(spec.m_sum());
            let mut violations = Vec::new();
            search_bounds_with(&spec, 3, 400, 8, 0, |b| {
                if b.value < half {
                    violations.push(b.value);
                }
            })
            .unwrap();
            prop_assert!(violations.is_empty(), "{:?}", violations);
        }

        #[test]
        fn mirror_bound_is_half_iff_stripped_full_rank(spec in small_square()) {
            let b = outer_bound(&spec, &mirror_layers(3), &RankMode::default()).unwrap();
            let full = generic_rank(&spec, &RankShape::Stripped, 8, 0) == spec.m_sum();
            prop_assert_eq!(b.value == Dof::half(spec.m_sum()), full);
        }

        #[test]
        fn shift_plans_wire_one_copy_per_interferer(
            spec in small_square(),
            mu in 1usize..=4,
            raw in prop::collection::vec(0usize..4, 9),
            split in 1usize..12,
        ) {
            let shifts: Vec<Vec<usize>> = raw.chunks(3).map(|r| r.iter().map(|x| x % mu).collect()).collect();
            let order = layer_major(3, mu);
            let cut = split.min(order.len());
            let plan = ReplicationPlan::new(
                vec![mu; 3],
                Assignment::Shifts(shifts),
                [order[..cut].to_vec(), order[cut..].to_vec()],
            ).unwrap();
            let net = build_replicated(&spec, &plan).unwrap();
            for a in 0..net.replicas.len() {
                let users: Vec<usize> = net.interferers(a).iter().map(|&b| net.replicas[b].user).collect();
                let mut expect: Vec<usize> = (0..3).filter(|&u| u != net.replicas[a].user).collect();
                expect.sort_unstable();
                prop_assert_eq!(users, expect);
            }
            let b = outer_bound(&spec, &plan, &RankMode::default()).unwrap();
            prop_assert_eq!(
                b.value * b.mu as i64 + Dof::integer(b.rank as i64),
                Dof::integer((b.mbar1 + b.nbar2) as i64)
            );
        }
    }
}
