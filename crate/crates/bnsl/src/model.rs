//! Domain types shared by every other module: datasets, parent sets,
//! sufficient statistics, the two CPD representations, local scores and
//! networks.
//!
//! Everything here is immutable after construction and safe to share across
//! threads. Scores are natural-log based throughout and lower is better.

use crate::error::{Error, Result};
use std::fmt;

/// Slack applied to every score comparison in pruning and search, always in
/// the direction that keeps a candidate or a network. Floating-point noise
/// can therefore never cause unsafe pruning or drop a boundary tie.
pub const SCORE_SLACK: f64 = 1e-9;

/// Converts a Bayes factor into the score window `epsilon = ln(bf)`.
///
/// ```
/// let eps = bnsl::epsilon_from_bayes_factor(20.0).unwrap();
/// assert!((eps - 2.99573).abs() < 1e-5);
/// ```
pub fn epsilon_from_bayes_factor(bf: f64) -> Result<f64> {
    if !(bf > 1.0) {
        return Err(Error::invalid(format!(
            "Bayes factor must be > 1, got {bf}"
        )));
    }
    Ok(bf.ln())
}

/// A complete binary dataset: `n` named variables observed over `num_rows`
/// instances. Rows are stored as bitmasks (bit `v` holds the value of
/// variable `v`), which keeps sufficient-statistics extraction to a handful
/// of shifts per row.
#[derive(Debug, Clone)]
pub struct Dataset {
    names: Vec<String>,
    rows: Vec<u64>,
}

impl Dataset {
    /// Builds a dataset from explicit 0/1 cells, one inner slice per row.
    pub fn from_rows(names: Vec<String>, rows: &[Vec<u8>]) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::invalid("dataset needs at least one variable"));
        }
        if n > 64 {
            return Err(Error::invalid(format!(
                "at most 64 variables supported, got {n}"
            )));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::invalid(format!("duplicate variable name {a:?}")));
            }
        }
        if rows.is_empty() {
            return Err(Error::invalid("dataset needs at least one instance"));
        }
        let mut packed = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!(
                    "row {} has {} cells, expected {}",
                    r + 1,
                    row.len(),
                    n
                )));
            }
            let mut bits = 0u64;
            for (v, &cell) in row.iter().enumerate() {
                match cell {
                    0 => {}
                    1 => bits |= 1 << v,
                    other => {
                        return Err(Error::invalid(format!(
                            "cell ({}, {}) is {other}, expected 0 or 1",
                            r + 1,
                            names[v]
                        )))
                    }
                }
            }
            packed.push(bits);
        }
        Ok(Dataset {
            names,
            rows: packed,
        })
    }

    pub(crate) fn from_packed(names: Vec<String>, rows: Vec<u64>) -> Self {
        Dataset { names, rows }
    }

    /// Number of variables `n`.
    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    /// Number of instances `N`.
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, var: usize) -> &str {
        &self.names[var]
    }

    /// Index of a variable by name.
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|a| a == name)
    }

    /// Value of `var` in instance `row`.
    pub fn value(&self, row: usize, var: usize) -> u8 {
        ((self.rows[row] >> var) & 1) as u8
    }

    pub(crate) fn packed_rows(&self) -> &[u64] {
        &self.rows
    }
}

/// A candidate parent set: a subset of variable indices held as a bitmask.
/// The child it is paired with is never a member.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParentSet(u64);

impl ParentSet {
    pub const EMPTY: ParentSet = ParentSet(0);

    pub fn from_mask(mask: u64) -> Self {
        ParentSet(mask)
    }

    /// Builds a set from member indices (duplicates collapse).
    pub fn from_members(members: &[usize]) -> Self {
        let mut mask = 0u64;
        for &v in members {
            debug_assert!(v < 64);
            mask |= 1 << v;
        }
        ParentSet(mask)
    }

    pub fn mask(&self) -> u64 {
        self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    /// Cardinality `|Pi|`.
    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(&self, var: usize) -> bool {
        (self.0 >> var) & 1 == 1
    }

    pub fn with(&self, var: usize) -> Self {
        ParentSet(self.0 | (1 << var))
    }

    pub fn without(&self, var: usize) -> Self {
        ParentSet(self.0 & !(1 << var))
    }

    /// True iff `self` is a subset of `other` (not necessarily proper).
    pub fn is_subset_of(&self, other: &ParentSet) -> bool {
        self.0 & other.0 == self.0
    }

    /// True iff `self` is a proper subset of `other`.
    pub fn is_proper_subset_of(&self, other: &ParentSet) -> bool {
        self.0 != other.0 && self.is_subset_of(other)
    }

    /// Member indices in ascending order.
    pub fn members(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut m = self.0;
        while m != 0 {
            out.push(m.trailing_zeros() as usize);
            m &= m - 1;
        }
        out
    }

    /// Number of parent-set instantiations `2^|Pi|`.
    pub fn num_configs(&self) -> usize {
        1 << self.len()
    }

    /// Projects a packed data row onto this set, yielding the configuration
    /// index: bit `p` of the result holds the value of the `p`-th member
    /// (lowest variable index = lowest bit). The all-zero instantiation is
    /// configuration 0.
    pub fn config_of_row(&self, row_bits: u64) -> usize {
        let mut config = 0usize;
        let mut m = self.0;
        let mut p = 0;
        while m != 0 {
            let v = m.trailing_zeros();
            config |= (((row_bits >> v) & 1) as usize) << p;
            p += 1;
            m &= m - 1;
        }
        config
    }

    /// Inverse of [`config_of_row`](Self::config_of_row) restricted to the
    /// member bits: expands a configuration index back into variable values.
    pub fn row_of_config(&self, config: usize) -> u64 {
        let mut bits = 0u64;
        for (p, v) in self.members().into_iter().enumerate() {
            if (config >> p) & 1 == 1 {
                bits |= 1 << v;
            }
        }
        bits
    }

    /// Members of the configuration's active-parent set `T_j`.
    pub fn active_members(&self, config: usize) -> Vec<usize> {
        self.members()
            .into_iter()
            .enumerate()
            .filter(|(p, _)| (config >> p) & 1 == 1)
            .map(|(_, v)| v)
            .collect()
    }
}

impl fmt::Display for ParentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.members().into_iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

/// Sufficient statistics for one (child, parent set) pair: `n_jk` counts
/// every row where the parents realize configuration `j` and the child
/// equals `k`.
#[derive(Debug, Clone)]
pub struct CountVector {
    pub child: usize,
    pub parents: ParentSet,
    counts: Vec<[u64; 2]>,
}

impl CountVector {
    pub(crate) fn new(child: usize, parents: ParentSet, counts: Vec<[u64; 2]>) -> Self {
        debug_assert_eq!(counts.len(), parents.num_configs());
        CountVector {
            child,
            parents,
            counts,
        }
    }

    pub fn num_configs(&self) -> usize {
        self.counts.len()
    }

    /// `n_jk`.
    pub fn count(&self, config: usize, value: usize) -> u64 {
        self.counts[config][value]
    }

    /// `n_j = n_j0 + n_j1`.
    pub fn config_total(&self, config: usize) -> u64 {
        self.counts[config][0] + self.counts[config][1]
    }

    /// Total instance count `N`.
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|c| c[0] + c[1]).sum()
    }
}

/// A full conditional probability table: one `(theta_j0, theta_j1)` row per
/// parent configuration. Rows always sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    rows: Vec<[f64; 2]>,
}

impl Cpt {
    pub fn new(rows: Vec<[f64; 2]>) -> Result<Self> {
        for (j, r) in rows.iter().enumerate() {
            let ok = r.iter().all(|p| (0.0..=1.0).contains(p)) && (r[0] + r[1] - 1.0).abs() < 1e-9;
            if !ok {
                return Err(Error::invalid(format!(
                    "CPT row {j} is not a distribution: ({}, {})",
                    r[0], r[1]
                )));
            }
        }
        Ok(Cpt { rows })
    }

    pub fn num_configs(&self) -> usize {
        self.rows.len()
    }

    /// `theta_jk`.
    pub fn prob(&self, config: usize, value: usize) -> f64 {
        self.rows[config][value]
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }
}

/// Noisy-OR parameters: `q_l` is the probability that the effect fails to
/// occur when only cause `l` is active. One entry per parent, each strictly
/// inside (0,1).
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyOrParams {
    q: Vec<f64>,
}

impl NoisyOrParams {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        for (l, &v) in q.iter().enumerate() {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!(
                    "noisy-OR parameter q[{l}] = {v} must lie strictly in (0,1)"
                )));
            }
        }
        Ok(NoisyOrParams { q })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }
}

/// Which CPD family a local score was fitted under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RepKind {
    Table,
    NoisyOr,
}

impl RepKind {
    /// Single-letter tag used by the score-file format.
    pub fn tag(&self) -> char {
        match self {
            RepKind::Table => 'T',
            RepKind::NoisyOr => 'N',
        }
    }
}

/// A fitted CPD. Table parameters are optional because score files carry
/// noisy-OR parameters but not full CPTs; networks loaded from a score file
/// keep their structure and scores, with table entries unparameterized.
#[derive(Debug, Clone)]
pub enum Representation {
    Table(Option<Cpt>),
    NoisyOr(NoisyOrParams),
}

impl Representation {
    pub fn kind(&self) -> RepKind {
        match self {
            Representation::Table(_) => RepKind::Table,
            Representation::NoisyOr(_) => RepKind::NoisyOr,
        }
    }
}

/// BIC score of one (child, parent set, representation) triple, together
/// with the fitted parameters. Lower is better; scores are always finite
/// (infeasible candidates are never stored).
#[derive(Debug, Clone)]
pub struct LocalScore {
    pub child: usize,
    pub parents: ParentSet,
    pub representation: Representation,
    pub score: f64,
}

impl LocalScore {
    pub fn rep_kind(&self) -> RepKind {
        self.representation.kind()
    }
}

/// Per-node lists of retained local scores, each sorted ascending by score.
/// This is the search input produced by scoring and pruning.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    entries: Vec<Vec<LocalScore>>,
}

impl ScoreTable {
    /// Wraps per-node entry lists, sorting each ascending by score with a
    /// deterministic tie-break on (parent mask, representation tag).
    pub fn new(mut entries: Vec<Vec<LocalScore>>) -> Result<Self> {
        for (node, list) in entries.iter_mut().enumerate() {
            if list.is_empty() {
                return Err(Error::invalid(format!("node {node} has no score entries")));
            }
            if list.iter().any(|e| e.child != node) {
                return Err(Error::invalid(format!(
                    "score entry filed under node {node} names a different child"
                )));
            }
            sort_entries(list);
        }
        Ok(ScoreTable { entries })
    }

    pub fn num_vars(&self) -> usize {
        self.entries.len()
    }

    pub fn node(&self, node: usize) -> &[LocalScore] {
        &self.entries[node]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[LocalScore]> {
        self.entries.iter().map(|v| v.as_slice())
    }
}

pub(crate) fn sort_entries(list: &mut [LocalScore]) {
    list.sort_by(|a, b| {
        a.score
            .partial_cmp(&b.score)
            .unwrap()
            .then(a.parents.mask().cmp(&b.parents.mask()))
            .then(rep_order(a.rep_kind()).cmp(&rep_order(b.rep_kind())))
    });
}

fn rep_order(kind: RepKind) -> u8 {
    match kind {
        RepKind::Table => 0,
        RepKind::NoisyOr => 1,
    }
}

/// One Bayesian network: a local score chosen for every node, forming a DAG.
/// The total score is the exact sum of the chosen entries.
#[derive(Debug, Clone)]
pub struct Network {
    nodes: Vec<LocalScore>,
    score: f64,
}

impl Network {
    /// Assembles a network from per-node choices. `nodes[i]` must belong to
    /// child `i` and the parent relation must be acyclic.
    pub fn new(nodes: Vec<LocalScore>) -> Result<Self> {
        for (i, e) in nodes.iter().enumerate() {
            if e.child != i {
                return Err(Error::invalid(format!(
                    "entry at position {i} belongs to child {}",
                    e.child
                )));
            }
            if e.parents.contains(i) {
                return Err(Error::invalid(format!("node {i} lists itself as parent")));
            }
        }
        let parents: Vec<ParentSet> = nodes.iter().map(|e| e.parents).collect();
        if !crate::search::is_acyclic(&parents) {
            return Err(Error::invalid("parent relation contains a directed cycle"));
        }
        let score = nodes.iter().map(|e| e.score).sum();
        Ok(Network { nodes, score })
    }

    pub fn num_vars(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, i: usize) -> &LocalScore {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[LocalScore] {
        &self.nodes
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn parent_sets(&self) -> Vec<ParentSet> {
        self.nodes.iter().map(|e| e.parents).collect()
    }

    /// Canonical key: equal exactly when two networks assign the same parent
    /// sets and representation tags node by node. The same DAG under a
    /// different CPD family is a different network.
    pub fn canonical_key(&self) -> String {
        let mut key = String::new();
        for e in &self.nodes {
            key.push(e.rep_kind().tag());
            for v in e.parents.members() {
                key.push_str(&format!(",{v}"));
            }
            key.push(';');
        }
        key
    }
}

/// All networks whose score lies within `epsilon` of the optimum.
#[derive(Debug, Clone)]
pub struct CredibleSet {
    pub epsilon: f64,
    pub opt: f64,
    pub networks: Vec<Network>,
    /// Set when enumeration stopped at the configured network cap.
    pub truncated: bool,
}

impl CredibleSet {
    pub fn len(&self) -> usize {
        self.networks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.networks.is_empty()
    }

    /// Best-scoring member (the optimum when not truncated).
    pub fn best(&self) -> &Network {
        &self.networks[0]
    }
}
