//! The L^λ-style learner for pomset recognizers.
//!
//! The learner keeps a set `S` of representatives, its frontier `S⁺`
//! (letters and pairwise compositions of representatives), a pack of
//! components partitioning `S ∪ S⁺`, and a discrimination tree whose
//! leaves are those components. Counter-examples are analysed with
//! [`CeStrategy::FindEbp`] (one branch of the term) or, for comparison,
//! [`CeStrategy::Linear`] (all splits of the term).

pub mod audit;
pub mod tree;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use indexmap::IndexSet;
use thiserror::Error;

use crate::context::{Context, Side};
use crate::pomset::{Alphabet, Op, Pomset};
use crate::recognizer::{Equivalence, PomsetRecognizer, RecognizerError, StateId};
use crate::teacher::{QueryStats, Teacher, TeacherError};
use crate::term::{canonical_term, Decomposition, Term};

pub use audit::{Auditor, Diagnostics, EbpRecord, Violation, ViolationKind};
pub use tree::{ComponentId, DiscriminationTree, NodeId, NodeKind};

pub type MemberId = usize;

/// Counter-example analysis used by [`Learner::handle_ce`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CeStrategy {
    #[default]
    FindEbp,
    Linear,
}

impl fmt::Display for CeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CeStrategy::FindEbp => "findebp",
            CeStrategy::Linear => "linear",
        })
    }
}

impl FromStr for CeStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "findebp" => Ok(CeStrategy::FindEbp),
            "linear" => Ok(CeStrategy::Linear),
            other => Err(format!("unknown counter-example strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LearnerConfig {
    pub ce_strategy: CeStrategy,
    /// Abort after this many equivalence queries.
    pub max_rounds: Option<usize>,
    /// Keep a trace of learner events.
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LearnError {
    #[error(transparent)]
    Teacher(#[from] TeacherError),
    #[error("learner invariant broken: {0}")]
    Internal(String),
    #[error("no equivalence after {0} equivalence queries")]
    TooManyRounds(usize),
}

impl From<RecognizerError> for LearnError {
    fn from(e: RecognizerError) -> Self {
        LearnError::Teacher(TeacherError::Recognizer(e))
    }
}

fn internal<T>(msg: impl Into<String>) -> Result<T, LearnError> {
    Err(LearnError::Internal(msg.into()))
}

/// One line of the optional learner trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Expand(Pomset),
    Refine(ComponentId, Context),
    Ce(Pomset),
    Ebp(Context, Pomset),
    Hyp(usize),
    Eq(bool),
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceEvent::Expand(w) => write!(f, "EXPAND {w}"),
            TraceEvent::Refine(b, c) => write!(f, "REFINE B{b} {c}"),
            TraceEvent::Ce(w) => write!(f, "CE {w}"),
            TraceEvent::Ebp(c, p) => write!(f, "EBP {c} {p}"),
            TraceEvent::Hyp(n) => write!(f, "HYP {n}"),
            TraceEvent::Eq(true) => write!(f, "EQ equivalent"),
            TraceEvent::Eq(false) => write!(f, "EQ counterexample"),
        }
    }
}

/// How a member of `S ∪ S⁺` was first produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Origin {
    Epsilon,
    Letter,
    Compose(Op, MemberId, MemberId),
}

#[derive(Debug, Clone)]
pub(crate) struct Member {
    pub(crate) pomset: Pomset,
    pub(crate) comp: ComponentId,
    pub(crate) s_index: Option<usize>,
    pub(crate) origin: Origin,
}

#[derive(Debug, Clone)]
pub(crate) struct Component {
    pub(crate) members: Vec<MemberId>,
    /// Members that are representatives, in `S` order.
    pub(crate) access: Vec<MemberId>,
    pub(crate) leaf: NodeId,
}

/// Where an installed context came from: `parent[_ ∘ s]` or `parent[s ∘ _]`.
#[derive(Debug, Clone)]
pub(crate) struct Installed {
    pub(crate) context: Context,
    pub(crate) parent: Context,
    pub(crate) op: Op,
    pub(crate) side: Side,
    pub(crate) s: Pomset,
}

/// A hypothesis recognizer whose state `i` is component `i`, with the
/// access sequences of every component at build time.
#[derive(Debug, Clone)]
pub struct Hypothesis {
    recognizer: PomsetRecognizer,
    access: Vec<Vec<Pomset>>,
}

impl Hypothesis {
    pub fn recognizer(&self) -> &PomsetRecognizer {
        &self.recognizer
    }

    pub fn access_sequences(&self, state: StateId) -> &[Pomset] {
        &self.access[state.index()]
    }

    pub fn eval(&self, w: &Pomset) -> Result<StateId, RecognizerError> {
        self.recognizer.eval(w)
    }

    pub fn accepts(&self, w: &Pomset) -> Result<bool, RecognizerError> {
        self.recognizer.accepts(w)
    }
}

/// Result of a complete learning run.
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub hypothesis: PomsetRecognizer,
    pub stats: QueryStats,
    pub diagnostics: Diagnostics,
    pub trace: Vec<TraceEvent>,
}

/// Where a pomset lands in the discrimination tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiftResult {
    Component(ComponentId),
    Unlabelled(NodeId),
}

pub struct Learner<'t> {
    teacher: &'t mut Teacher,
    config: LearnerConfig,
    alphabet: Alphabet,
    pub(crate) members: Vec<Member>,
    pub(crate) index: HashMap<Pomset, MemberId>,
    pub(crate) reps: Vec<MemberId>,
    pub(crate) comps: Vec<Component>,
    pub(crate) tree: DiscriminationTree,
    pub(crate) installed: Vec<Installed>,
    compose_cache: HashMap<(Op, MemberId, MemberId), MemberId>,
    hyp: Option<Arc<Hypothesis>>,
    pub(crate) auditor: Option<Auditor>,
    pub(crate) diag: Diagnostics,
    trace: Vec<TraceEvent>,
}

impl<'t> Learner<'t> {
    pub fn new(teacher: &'t mut Teacher, config: LearnerConfig) -> Self {
        let alphabet = teacher.alphabet().clone();
        Learner {
            teacher,
            config,
            alphabet,
            members: Vec::new(),
            index: HashMap::new(),
            reps: Vec::new(),
            comps: Vec::new(),
            tree: DiscriminationTree::new(),
            installed: Vec::new(),
            compose_cache: HashMap::new(),
            hyp: None,
            auditor: None,
            diag: Diagnostics::default(),
            trace: Vec::new(),
        }
    }

    /// Checks invariants against a harness-side oracle as the run goes.
    pub fn with_auditor(mut self, auditor: Auditor) -> Self {
        self.auditor = Some(auditor);
        self
    }

    pub fn stats(&self) -> QueryStats {
        self.teacher.stats()
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diag
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn tree(&self) -> &DiscriminationTree {
        &self.tree
    }

    pub fn hypothesis(&self) -> Option<&Hypothesis> {
        self.hyp.as_deref()
    }

    /// `S` in insertion order.
    pub fn representatives(&self) -> Vec<&Pomset> {
        self.reps.iter().map(|&m| &self.members[m].pomset).collect()
    }

    /// `S⁺`, in order of first appearance.
    pub fn frontier(&self) -> Vec<&Pomset> {
        self.members
            .iter()
            .filter(|m| m.s_index.is_none())
            .map(|m| &m.pomset)
            .collect()
    }

    pub fn pack_size(&self) -> usize {
        self.comps.len()
    }

    /// Component of a member of `S ∪ S⁺`.
    pub fn component_of(&self, w: &Pomset) -> Option<ComponentId> {
        self.index.get(w).map(|&m| self.members[m].comp)
    }

    pub fn access_sequences(&self, b: ComponentId) -> Vec<&Pomset> {
        self.comps[b]
            .access
            .iter()
            .map(|&m| &self.members[m].pomset)
            .collect()
    }

    pub fn component_members(&self, b: ComponentId) -> Vec<&Pomset> {
        self.comps[b]
            .members
            .iter()
            .map(|&m| &self.members[m].pomset)
            .collect()
    }

    /// Every component has exactly one representative.
    pub fn is_sharp(&self) -> bool {
        self.comps.iter().all(|c| c.access.len() == 1)
    }

    fn emit(&mut self, event: impl FnOnce() -> TraceEvent) {
        if self.config.trace {
            self.trace.push(event());
        }
    }

    fn query(&mut self, w: &Pomset) -> Result<bool, LearnError> {
        Ok(self.teacher.membership(w)?)
    }

    fn sift_leaf(&mut self, w: &Pomset) -> Result<NodeId, LearnError> {
        let teacher = &mut *self.teacher;
        Ok(self.tree.sift(w, |x| teacher.membership(x))?)
    }

    /// Sifts `w` through the tree with membership queries.
    pub fn sift(&mut self, w: &Pomset) -> Result<SiftResult, LearnError> {
        let leaf = self.sift_leaf(w)?;
        Ok(match self.tree.label(leaf) {
            Some(b) => SiftResult::Component(b),
            None => SiftResult::Unlabelled(leaf),
        })
    }

    fn add_member(&mut self, w: Pomset, comp: ComponentId, origin: Origin) -> MemberId {
        let id = self.members.len();
        self.members.push(Member {
            pomset: w.clone(),
            comp,
            s_index: None,
            origin,
        });
        self.index.insert(w, id);
        self.comps[comp].members.push(id);
        id
    }

    fn new_component(&mut self, leaf: NodeId) -> ComponentId {
        let id = self.comps.len();
        self.comps.push(Component {
            members: Vec::new(),
            access: Vec::new(),
            leaf,
        });
        self.tree.set_label(leaf, id);
        id
    }

    /// Member for `a ∘ b`; both must be representatives.
    fn compose(&mut self, op: Op, a: MemberId, b: MemberId) -> Result<MemberId, LearnError> {
        let key = if op == Op::Par && b < a {
            (op, b, a)
        } else {
            (op, a, b)
        };
        if let Some(&m) = self.compose_cache.get(&key) {
            return Ok(m);
        }
        let w = op.apply(&self.members[a].pomset, &self.members[b].pomset);
        match self.index.get(&w) {
            Some(&m) => {
                self.compose_cache.insert(key, m);
                Ok(m)
            }
            None => internal(format!("{w} should be in S ∪ S⁺")),
        }
    }

    // -----------------------------------------------------------------
    // Expand / Refine

    /// Moves `w` (in `S⁺`, or `eps` on an empty pack) into `S` and sorts its
    /// successors into the pack.
    pub fn expand(&mut self, w: &Pomset) -> Result<(), LearnError> {
        let wid = match self.index.get(w) {
            Some(&id) => id,
            None => {
                if !(w.is_empty() && self.comps.is_empty()) {
                    return internal(format!("expand({w}): not in the frontier"));
                }
                let leaf = self.sift_leaf(w)?;
                let comp = match self.tree.label(leaf) {
                    Some(b) => b,
                    None => self.new_component(leaf),
                };
                self.add_member(w.clone(), comp, Origin::Epsilon)
            }
        };
        if self.members[wid].s_index.is_some() {
            return internal(format!("expand({w}): already a representative"));
        }
        self.emit(|| TraceEvent::Expand(w.clone()));
        self.members[wid].s_index = Some(self.reps.len());
        self.reps.push(wid);
        let comp = self.members[wid].comp;
        self.comps[comp].access.push(wid);

        let snapshot = self.reps.clone();
        let mut candidates: Vec<(Pomset, Origin)> = Vec::with_capacity(4 * snapshot.len() + 4);
        for &p in &snapshot {
            for op in Op::ALL {
                let pw = &self.members[p].pomset;
                candidates.push((op.apply(pw, w), Origin::Compose(op, p, wid)));
                candidates.push((op.apply(w, pw), Origin::Compose(op, wid, p)));
            }
        }
        for l in self.alphabet.letters() {
            candidates.push((Pomset::letter(l.clone()), Origin::Letter));
        }
        for (p, origin) in candidates {
            if self.index.contains_key(&p) {
                continue;
            }
            let leaf = self.sift_leaf(&p)?;
            match self.tree.label(leaf) {
                Some(b) => {
                    self.add_member(p, b, origin);
                }
                None => {
                    let b = self.new_component(leaf);
                    self.add_member(p.clone(), b, origin);
                    self.expand(&p)?;
                }
            }
        }
        Ok(())
    }

    /// Splits component `b` by `context`. Returns `false`, leaving everything
    /// untouched apart from the membership cache, if `context` does not
    /// separate two members of `b`.
    fn refine(&mut self, b: ComponentId, installed: Installed) -> Result<bool, LearnError> {
        let members = self.comps[b].members.clone();
        let mut verdicts = Vec::with_capacity(members.len());
        for &m in &members {
            let w = installed.context.fill(&self.members[m].pomset);
            verdicts.push(self.query(&w)?);
        }
        if verdicts.iter().all(|&v| v) || verdicts.iter().all(|&v| !v) {
            return Ok(false);
        }
        let context = installed.context.clone();
        self.emit(|| TraceEvent::Refine(b, context.clone()));
        let b1 = self.comps.len();
        let old = std::mem::replace(
            &mut self.comps[b],
            Component {
                members: Vec::new(),
                access: Vec::new(),
                leaf: 0,
            },
        );
        let (l, r) = self.tree.split(old.leaf, context, b, b1);
        let mut c0 = Component {
            members: Vec::new(),
            access: Vec::new(),
            leaf: l,
        };
        let mut c1 = Component {
            members: Vec::new(),
            access: Vec::new(),
            leaf: r,
        };
        for (&m, &v) in members.iter().zip(&verdicts) {
            if v {
                c1.members.push(m);
                self.members[m].comp = b1;
            } else {
                c0.members.push(m);
            }
        }
        for &m in &old.access {
            if self.members[m].comp == b1 {
                c1.access.push(m);
            } else {
                c0.access.push(m);
            }
        }
        self.comps[b] = c0;
        self.comps.push(c1);
        self.installed.push(installed);
        self.audit_refine();

        for side in [b, b1] {
            if self.comps[side].access.is_empty() {
                let first = self.comps[side].members[0];
                let p = self.members[first].pomset.clone();
                self.expand(&p)?;
            }
        }
        Ok(true)
    }

    fn installed_at(&self, node: NodeId, op: Op, side: Side, s: &Pomset) -> Installed {
        let parent = self
            .tree
            .context(node)
            .expect("common ancestors are inner nodes")
            .clone();
        Installed {
            context: parent.wrap(op, side, s),
            parent,
            op,
            side,
            s: s.clone(),
        }
    }

    // -----------------------------------------------------------------
    // Consistency and associativity

    /// Repairs consistency defects; `true` if there were none.
    pub fn make_consistent(&mut self) -> Result<bool, LearnError> {
        let mut clean = true;
        while let Some((b, inst)) = self.find_consistency_defect()? {
            if !self.refine(b, inst)? {
                return internal("consistency context does not split its component");
            }
            clean = false;
        }
        Ok(clean)
    }

    fn find_consistency_defect(&mut self) -> Result<Option<(ComponentId, Installed)>, LearnError> {
        for op in Op::ALL {
            for b in 0..self.comps.len() {
                let access = self.comps[b].access.clone();
                if access.len() < 2 {
                    continue;
                }
                for i in 0..access.len() {
                    for j in i + 1..access.len() {
                        let (p1, p2) = (access[i], access[j]);
                        for k in 0..self.reps.len() {
                            let p = self.reps[k];
                            let sides: &[Side] = if op == Op::Seq {
                                &[Side::Left, Side::Right]
                            } else {
                                &[Side::Left]
                            };
                            for &side in sides {
                                let (m1, m2) = match side {
                                    Side::Left => {
                                        (self.compose(op, p1, p)?, self.compose(op, p2, p)?)
                                    }
                                    Side::Right => {
                                        (self.compose(op, p, p1)?, self.compose(op, p, p2)?)
                                    }
                                };
                                let (b1, b2) = (self.members[m1].comp, self.members[m2].comp);
                                if b1 != b2 {
                                    let dca = self.tree.deepest_common_ancestor(
                                        self.comps[b1].leaf,
                                        self.comps[b2].leaf,
                                    );
                                    let s = self.members[p].pomset.clone();
                                    return Ok(Some((b, self.installed_at(dca, op, side, &s))));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(None)
    }

    /// Dense composition table over `S`: entry `(i, j)` is the component of
    /// `S_i ∘ S_j`.
    fn rep_table(&mut self, op: Op) -> Result<Vec<ComponentId>, LearnError> {
        let k = self.reps.len();
        let mut t = vec![0; k * k];
        for i in 0..k {
            for j in 0..k {
                if op == Op::Par && j < i {
                    t[i * k + j] = t[j * k + i];
                    continue;
                }
                let m = self.compose(op, self.reps[i], self.reps[j])?;
                t[i * k + j] = self.members[m].comp;
            }
        }
        Ok(t)
    }

    /// Repairs associativity defects; `true` if there were none.
    pub fn make_assoc(&mut self) -> Result<bool, LearnError> {
        let mut clean = true;
        while let Some(defect) = self.find_assoc_defect()? {
            self.repair_assoc(defect)?;
            clean = false;
        }
        Ok(clean)
    }

    fn find_assoc_defect(&mut self) -> Result<Option<AssocDefect>, LearnError> {
        let k = self.reps.len();
        for op in Op::ALL {
            let t = self.rep_table(op)?;
            let access: Vec<Vec<usize>> = self
                .comps
                .iter()
                .map(|c| {
                    c.access
                        .iter()
                        .map(|&m| self.members[m].s_index.expect("access sequences are in S"))
                        .collect()
                })
                .collect();
            let nonempty: Vec<usize> = (0..k)
                .filter(|&i| !self.members[self.reps[i]].pomset.is_empty())
                .collect();
            for &i1 in &nonempty {
                for &i2 in &nonempty {
                    let b12 = t[i1 * k + i2];
                    for &i3 in &nonempty {
                        let b23 = t[i2 * k + i3];
                        for &sl in &access[b12] {
                            for &sr in &access[b23] {
                                let x = t[i1 * k + sr];
                                let y = t[sl * k + i3];
                                if x != y {
                                    return Ok(Some(AssocDefect {
                                        op,
                                        s: [i1, i2, i3],
                                        sl,
                                        comps: (x, y),
                                        b12,
                                        b23,
                                    }));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(None)
    }

    fn repair_assoc(&mut self, d: AssocDefect) -> Result<(), LearnError> {
        let rep = |l: &Self, i: usize| l.members[l.reps[i]].pomset.clone();
        let (s1, s2, s3) = (rep(self, d.s[0]), rep(self, d.s[1]), rep(self, d.s[2]));
        let sl = rep(self, d.sl);
        let dca = self
            .tree
            .deepest_common_ancestor(self.comps[d.comps.0].leaf, self.comps[d.comps.1].leaf);
        let c = self.tree.context(dca).expect("inner node").clone();
        // The triple product need not lie in S ∪ S⁺; we sift it and use the
        // first access sequence of the component it lands in, or the triple
        // itself when it reaches an unlabelled leaf.
        let s123 = d.op.apply(&d.op.apply(&s1, &s2), &s3);
        let p = match self.sift(&s123)? {
            SiftResult::Component(b) => self.members[self.comps[b].access[0]].pomset.clone(),
            SiftResult::Unlabelled(_) => s123,
        };
        let query = self.query(&c.fill(&p))?;
        let left = self.query(&c.fill(&d.op.apply(&sl, &s3)))?;
        let first = self.installed_at(dca, d.op, Side::Left, &s3);
        let second = self.installed_at(dca, d.op, Side::Right, &s1);
        let (a, b) = if left != query {
            ((d.b12, first), (d.b23, second))
        } else {
            ((d.b23, second), (d.b12, first))
        };
        if self.refine(a.0, a.1)? {
            return Ok(());
        }
        // The preferred side did not split; the defect guarantees the other
        // one does.
        self.diag.assoc_fallbacks += 1;
        if self.refine(b.0, b.1)? {
            return Ok(());
        }
        internal("associativity defect could not be refined")
    }

    // -----------------------------------------------------------------
    // Hypothesis

    /// Builds the hypothesis from a consistent, associative pack.
    pub fn build_hypothesis(&mut self) -> Result<Arc<Hypothesis>, LearnError> {
        let n = self.comps.len();
        let mut first = Vec::with_capacity(n);
        for (b, c) in self.comps.iter().enumerate() {
            match c.access.first() {
                Some(&m) => first.push(m),
                None => return internal(format!("component B{b} has no access sequence")),
            }
        }
        let mut tables = Vec::new();
        for op in Op::ALL {
            let mut t = vec![0; n * n];
            for i in 0..n {
                for j in 0..n {
                    let m = self.compose(op, first[i], first[j])?;
                    t[i * n + j] = self.members[m].comp;
                }
            }
            tables.push(t);
        }
        let par = tables.pop().unwrap();
        let seq = tables.pop().unwrap();
        let unit = match self.index.get(&Pomset::Empty) {
            Some(&m) => self.members[m].comp,
            None => return internal("eps is not a member"),
        };
        let mut letters = Vec::with_capacity(self.alphabet.len());
        for l in self.alphabet.letters() {
            match self.index.get(&Pomset::letter(l.clone())) {
                Some(&m) => letters.push(self.members[m].comp),
                None => return internal(format!("letter {l} is not a member")),
            }
        }
        let mut accepting = Vec::with_capacity(n);
        for &m in &first {
            let w = self.members[m].pomset.clone();
            accepting.push(self.query(&w)?);
        }
        let names = (0..n).map(|i| format!("q{i}")).collect();
        let raw = PomsetRecognizer::from_raw(
            self.alphabet.clone(),
            names,
            unit,
            seq,
            par,
            letters,
            accepting,
        )?;
        if let Err(v) = raw.validate() {
            self.violation(ViolationKind::Validate, v.to_string());
            return internal(format!("hypothesis breaks a bimonoid law: {v}"));
        }
        let access = self
            .comps
            .iter()
            .map(|c| {
                c.access
                    .iter()
                    .map(|&m| self.members[m].pomset.clone())
                    .collect()
            })
            .collect();
        let hyp = Arc::new(Hypothesis {
            recognizer: raw,
            access,
        });
        self.hyp = Some(hyp.clone());
        self.diag.hypotheses_built += 1;
        self.emit(|| TraceEvent::Hyp(n));
        self.audit_hypothesis(&hyp);
        Ok(hyp)
    }

    fn current_hypothesis(&self) -> Result<Arc<Hypothesis>, LearnError> {
        match &self.hyp {
            Some(h) => Ok(h.clone()),
            None => internal("no hypothesis built yet"),
        }
    }

    // -----------------------------------------------------------------
    // Counter-example analysis

    /// `agree(c, z)`: the hypothesis and the target agree on `c[p]` for
    /// every access sequence `p` of the state `z` evaluates to.
    pub fn agree(&mut self, hyp: &Hypothesis, c: &Context, z: &Pomset) -> Result<bool, LearnError> {
        self.diag.agree_evals += 1;
        let st = hyp.eval(z)?;
        for p in hyp.access_sequences(st) {
            let w = c.fill(p);
            if hyp.accepts(&w)? != self.query(&w)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// First access sequence `p` of `state` with `hyp(c[p]) ≠ M(c[p])`.
    fn first_disagreeing(
        &mut self,
        hyp: &Hypothesis,
        c: &Context,
        state: StateId,
    ) -> Result<Pomset, LearnError> {
        for p in hyp.access_sequences(state) {
            let w = c.fill(p);
            if hyp.accepts(&w)? != self.query(&w)? {
                return Ok(p.clone());
            }
        }
        internal(format!("no access sequence of {state} disagrees under {c}"))
    }

    /// Resolves a breaking point `(c, z1 ∘ z2)`: either a pair `(c, p1 ∘ p2)`
    /// or the context `c[p1 ∘ _]` under which `z2` still agrees.
    fn resolve_breaking_point(
        &mut self,
        hyp: &Hypothesis,
        c: &Context,
        op: Op,
        z1: &Pomset,
        z2: &Pomset,
    ) -> Result<Result<(Context, Pomset), Context>, LearnError> {
        let cl = c.wrap(op, Side::Left, z2);
        let p1 = self.first_disagreeing(hyp, &cl, hyp.eval(z1)?)?;
        let cr = c.wrap(op, Side::Right, &p1);
        if self.agree(hyp, &cr, z2)? {
            return Ok(Err(cr));
        }
        let p2 = self.first_disagreeing(hyp, &cr, hyp.eval(z2)?)?;
        Ok(Ok((c.clone(), op.apply(&p1, &p2))))
    }

    /// Descends the leftmost branch of `term` looking for an effective
    /// breaking point. `term` must be free of `eps` leaves and denote a
    /// counter-example.
    pub fn find_ebp(
        &mut self,
        hyp: &Hypothesis,
        term: &Term,
    ) -> Result<(Context, Pomset), LearnError> {
        let sharp = self.is_sharp();
        let agree_before = self.diag.agree_evals;
        let mut record = EbpRecord {
            strategy: CeStrategy::FindEbp,
            term_depth: term.depth(),
            term_leaves: term.leaf_count(),
            sharp,
            ..EbpRecord::default()
        };
        let mut c = Context::hole();
        let mut t = term;
        let result = loop {
            let unique_before = self.teacher.stats().membership_unique;
            let step = match t.root_decomposition() {
                Decomposition::Atom => Err((c.clone(), t.canonicalize())),
                Decomposition::Split(op, t1, t2) => {
                    let z1 = t1.canonicalize();
                    let z2 = t2.canonicalize();
                    let cl = c.wrap(op, Side::Left, &z2);
                    if self.agree(hyp, &cl, &z1)? {
                        Ok((cl, t1))
                    } else {
                        match self.resolve_breaking_point(hyp, &c, op, &z1, &z2)? {
                            Err(cr) => Ok((cr, t2)),
                            Ok(found) => Err(found),
                        }
                    }
                }
            };
            let uncached = self.teacher.stats().membership_unique - unique_before;
            record.max_uncached_per_level = record.max_uncached_per_level.max(uncached);
            match step {
                Ok((next_c, next_t)) => {
                    record.recursions += 1;
                    c = next_c;
                    t = next_t;
                }
                Err(found) => break found,
            }
        };
        record.agree_evals = self.diag.agree_evals - agree_before;
        self.diag.ebp.push(record);
        Ok(result)
    }

    /// Evaluates `agree` on the split induced by every node of `term`
    /// (prefix order) under the outer context `c`.
    fn scan_splits(
        &mut self,
        hyp: &Hypothesis,
        c: &Context,
        term: &Term,
    ) -> Result<Vec<bool>, LearnError> {
        let mut out = Vec::new();
        let mut stack: Vec<(Context, &Term)> = vec![(c.clone(), term)];
        while let Some((ctx, t)) = stack.pop() {
            let z = t.canonicalize();
            out.push(self.agree(hyp, &ctx, &z)?);
            if let Term::Inner(op, l, r) = t {
                let zl = l.canonicalize();
                let zr = r.canonicalize();
                stack.push((ctx.wrap(*op, Side::Right, &zl), r));
                stack.push((ctx.wrap(*op, Side::Left, &zr), l));
            }
        }
        Ok(out)
    }

    /// Linear analysis: computes agreement on every split of the current
    /// term, then takes the first breaking point on the leftmost branch.
    pub fn find_ebp_linear(
        &mut self,
        hyp: &Hypothesis,
        term: &Term,
    ) -> Result<(Context, Pomset), LearnError> {
        let agree_before = self.diag.agree_evals;
        let mut record = EbpRecord {
            strategy: CeStrategy::Linear,
            term_depth: term.depth(),
            term_leaves: term.leaf_count(),
            sharp: self.is_sharp(),
            ..EbpRecord::default()
        };
        let mut c = Context::hole();
        let mut t = term;
        let result = 'outer: loop {
            let unique_before = self.teacher.stats().membership_unique;
            let agree = self.scan_splits(hyp, &c, t)?;
            // In prefix order the leftmost branch occupies indices 0, 1, 2, ...
            let mut node = t;
            let mut ctx = c.clone();
            let mut i = 0;
            loop {
                match node {
                    Term::Epsilon | Term::Leaf(_) => break 'outer (ctx, node.canonicalize()),
                    Term::Inner(op, l, r) => {
                        let zl = l.canonicalize();
                        let zr = r.canonicalize();
                        if agree[i + 1] {
                            ctx = ctx.wrap(*op, Side::Left, &zr);
                            node = l;
                            i += 1;
                            continue;
                        }
                        let step = self.resolve_breaking_point(hyp, &ctx, *op, &zl, &zr)?;
                        let uncached = self.teacher.stats().membership_unique - unique_before;
                        record.max_uncached_per_level = record.max_uncached_per_level.max(uncached);
                        match step {
                            Ok(found) => break 'outer found,
                            Err(cr) => {
                                record.recursions += 1;
                                c = cr;
                                t = r;
                                continue 'outer;
                            }
                        }
                    }
                }
            }
        };
        record.agree_evals = self.diag.agree_evals - agree_before;
        self.diag.ebp.push(record);
        Ok(result)
    }

    /// Handles a counter-example `w` (hypothesis and target disagree on it).
    pub fn handle_ce(&mut self, w: &Pomset) -> Result<(), LearnError> {
        self.handle_ce_inner(w.clone(), None)
    }

    /// As [`Learner::handle_ce`], analysing the given term for the first
    /// round instead of the canonical term.
    pub fn handle_ce_with_term(&mut self, term: &Term) -> Result<(), LearnError> {
        if term.contains_epsilon() {
            return internal("counter-example terms must not contain eps leaves");
        }
        self.handle_ce_inner(term.canonicalize(), Some(term.clone()))
    }

    fn handle_ce_inner(
        &mut self,
        w: Pomset,
        mut first_term: Option<Term>,
    ) -> Result<(), LearnError> {
        self.emit(|| TraceEvent::Ce(w.clone()));
        self.diag.handle_ce_calls += 1;
        let pack_before = self.comps.len();
        let mut hyp = self.current_hypothesis()?;
        if hyp.accepts(&w)? == self.query(&w)? {
            return internal(format!("{w} is not a counter-example"));
        }
        let mut pool: IndexSet<Pomset> = IndexSet::new();
        pool.insert(w.clone());
        let mut rounds = 0usize;
        loop {
            let mut found = None;
            for i in 0..pool.len() {
                let u = pool[i].clone();
                if hyp.accepts(&u)? != self.query(&u)? {
                    found = Some(u);
                    break;
                }
            }
            let Some(u) = found else { break };
            rounds += 1;
            if rounds > 100_000 {
                return internal("counter-example pool does not drain");
            }
            let term = match first_term.take() {
                Some(t) if t.canonicalize() == u => t,
                _ => canonical_term(&u),
            };
            let (c, p) = match self.config.ce_strategy {
                CeStrategy::FindEbp => self.find_ebp(&hyp, &term)?,
                CeStrategy::Linear => self.find_ebp_linear(&hyp, &term)?,
            };
            self.emit(|| TraceEvent::Ebp(c.clone(), p.clone()));
            self.audit_ebp(&c, &p);
            match self.index.get(&p) {
                Some(&m) if self.members[m].s_index.is_none() => {}
                _ => return internal(format!("breaking point {p} is not in the frontier")),
            }
            pool.insert(c.fill(&p));
            let st = hyp.eval(&p)?;
            for q in hyp.access_sequences(st) {
                pool.insert(c.fill(q));
            }
            self.expand(&p)?;
            while !(self.make_consistent()? && self.make_assoc()?) {}
            hyp = self.build_hypothesis()?;
        }
        self.audit_after_ce(pack_before);
        Ok(())
    }

    /// A compatibility defect `c[p]`, found from cached verdicts only.
    ///
    /// Checking access sequences suffices: every member `s` of a component
    /// evaluates to the same hypothesis state as its access sequence and
    /// agrees with it on all branch contexts.
    fn compatibility_defect(&self, hyp: &Hypothesis) -> Result<Option<Pomset>, LearnError> {
        for comp in &self.comps {
            let contexts = self.tree.branch_contexts(comp.leaf);
            for &m in &comp.access {
                let s = &self.members[m].pomset;
                for c in &contexts {
                    let w = c.fill(s);
                    if let Some(v) = self.teacher.cached(&w) {
                        if hyp.accepts(&w)? != v {
                            return Ok(Some(w));
                        }
                    }
                }
            }
        }
        Ok(None)
    }

    /// Expands `eps` and builds the first hypothesis.
    pub fn initialize(&mut self) -> Result<Arc<Hypothesis>, LearnError> {
        if self.hyp.is_some() {
            return self.current_hypothesis();
        }
        self.expand(&Pomset::Empty)?;
        self.build_hypothesis()
    }

    /// Runs the main loop until an equivalence query succeeds.
    pub fn run(mut self) -> Result<LearnOutcome, LearnError> {
        let mut hyp = self.initialize()?;
        let mut rounds = 0;
        loop {
            if let Some(max) = self.config.max_rounds {
                if rounds >= max {
                    return Err(LearnError::TooManyRounds(rounds));
                }
            }
            rounds += 1;
            match self.teacher.equivalence(hyp.recognizer())? {
                Equivalence::Equivalent => {
                    self.emit(|| TraceEvent::Eq(true));
                    break;
                }
                Equivalence::CounterExample(w) => {
                    self.emit(|| TraceEvent::Eq(false));
                    self.handle_ce(&w)?;
                    hyp = self.current_hypothesis()?;
                    while let Some(w) = self.compatibility_defect(&hyp)? {
                        self.diag.compatibility_defects += 1;
                        self.handle_ce(&w)?;
                        hyp = self.current_hypothesis()?;
                    }
                }
            }
        }
        self.audit_final(hyp.recognizer());
        Ok(LearnOutcome {
            hypothesis: hyp.recognizer().clone(),
            stats: self.teacher.stats(),
            diagnostics: self.diag,
            trace: self.trace,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct AssocDefect {
    op: Op,
    /// Positions of `s1, s2, s3` in `S`.
    s: [usize; 3],
    sl: usize,
    comps: (ComponentId, ComponentId),
    b12: ComponentId,
    b23: ComponentId,
}

/// Learns the teacher's target language.
pub fn learn(teacher: &mut Teacher, config: LearnerConfig) -> Result<LearnOutcome, LearnError> {
    Learner::new(teacher, config).run()
}
