//! Harness-side invariant checks.
//!
//! An [`Auditor`] sees the target recognizer, so it can check properties
//! that the learner itself cannot observe without extra queries. It never
//! touches the teacher or its statistics.

use std::collections::HashMap;
use std::fmt;

use super::{CeStrategy, Learner, Origin};
use crate::context::Context;
use crate::pomset::Pomset;
use crate::recognizer::{PomsetRecognizer, StateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// A member does not sift to its own component.
    SiftMismatch,
    /// Two members of a component disagree on a branch context.
    BranchDisagreement,
    /// The deepest common ancestor fails to separate two components.
    Separation,
    /// More components than target classes.
    PackTooLarge,
    /// A representative is not generated from other representatives.
    SubpomsetClosure,
    /// An installed context does not extend an earlier one by a representative.
    ContextShape,
    /// `eval_H(s)` differs from the component of `s`.
    EvalMismatch,
    /// The hypothesis and the target disagree on a member.
    Compatibility,
    /// A returned breaking point does not separate `p` from its component.
    BreakingPoint,
    /// `find_ebp` took more recursions than the term depth.
    RecursionBound,
    /// A level of `find_ebp` on a sharp pack asked more than two new queries.
    QueryBound,
    /// The pack is not sharp after a counter-example was handled.
    NotSharp,
    /// Handling a counter-example did not add a component.
    NoProgress,
    /// A hypothesis broke a bimonoid law.
    Validate,
    /// The final hypothesis is not minimal.
    NotMinimal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.detail)
    }
}

/// Counters for one breaking-point search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EbpRecord {
    pub strategy: CeStrategy,
    pub agree_evals: u64,
    pub recursions: usize,
    pub term_depth: usize,
    pub term_leaves: usize,
    /// Largest number of fresh membership queries asked at one level.
    pub max_uncached_per_level: u64,
    /// Whether the pack was sharp when the search started.
    pub sharp: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub violations: Vec<Violation>,
    pub ebp: Vec<EbpRecord>,
    pub agree_evals: u64,
    pub hypotheses_built: usize,
    pub handle_ce_calls: usize,
    pub compatibility_defects: usize,
    pub assoc_fallbacks: usize,
}

impl Diagnostics {
    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Target-aware checker; see the module docs.
pub struct Auditor {
    target: PomsetRecognizer,
    /// One witness per reachable target state.
    witnesses: Vec<Option<Pomset>>,
    /// Verdict of `c[w]` for each reachable target state of `w`.
    verdicts: HashMap<Context, Vec<bool>>,
    /// Target state of every learner member, indexed by member id.
    member_states: Vec<StateId>,
    max_classes: usize,
    thorough: bool,
}

impl Auditor {
    /// Checks everything, including full pack scans at every hypothesis.
    pub fn new(target: PomsetRecognizer) -> Self {
        let mut witnesses = vec![None; target.num_states()];
        for (s, w) in target.reachable() {
            witnesses[s.index()] = Some(w);
        }
        let max_classes = target.minimize().num_states();
        Auditor {
            target,
            witnesses,
            verdicts: HashMap::new(),
            member_states: Vec::new(),
            max_classes,
            thorough: true,
        }
    }

    /// Only the per-event checks (breaking points, sharpness, bounds).
    pub fn light(target: PomsetRecognizer) -> Self {
        Auditor {
            thorough: false,
            ..Auditor::new(target)
        }
    }

    pub fn max_classes(&self) -> usize {
        self.max_classes
    }

    fn accepts(&self, w: &Pomset) -> bool {
        self.target
            .accepts(w)
            .expect("learner pomsets are over the target alphabet")
    }

    fn verdicts(&mut self, c: &Context) -> &[bool] {
        if !self.verdicts.contains_key(c) {
            let v = self
                .witnesses
                .iter()
                .map(|w| w.as_ref().is_some_and(|w| self.accepts(&c.fill(w))))
                .collect();
            self.verdicts.insert(c.clone(), v);
        }
        &self.verdicts[c]
    }

    fn verdict(&mut self, c: &Context, state: StateId) -> bool {
        self.verdicts(c)[state.index()]
    }

    fn sync_members(&mut self, members: &[super::Member]) {
        for m in &members[self.member_states.len()..] {
            let s = self
                .target
                .eval(&m.pomset)
                .expect("learner pomsets are over the target alphabet");
            self.member_states.push(s);
        }
    }
}

impl fmt::Debug for Auditor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Auditor")
            .field("max_classes", &self.max_classes)
            .field("thorough", &self.thorough)
            .finish()
    }
}

impl Learner<'_> {
    pub(crate) fn violation(&mut self, kind: ViolationKind, detail: String) {
        self.diag.violations.push(Violation { kind, detail });
    }

    /// Context shape of the latest refinement and the pack bound.
    pub(super) fn audit_refine(&mut self) {
        let Some(aud) = self.auditor.as_ref() else {
            return;
        };
        let max = aud.max_classes;
        if self.comps.len() > max {
            self.violation(
                ViolationKind::PackTooLarge,
                format!("{} components, target has {max} classes", self.comps.len()),
            );
        }
        let inst = self
            .installed
            .last()
            .expect("called after a refinement")
            .clone();
        let parent_known = self.tree.contexts().any(|c| *c == inst.parent);
        let s_ok = !inst.s.is_empty()
            && self
                .index
                .get(&inst.s)
                .is_some_and(|&m| self.members[m].s_index.is_some());
        if !parent_known || !s_ok || inst.parent.wrap(inst.op, inst.side, &inst.s) != inst.context {
            self.violation(
                ViolationKind::ContextShape,
                format!(
                    "{} is not {}[{:?} {} {}]",
                    inst.context, inst.parent, inst.side, inst.op, inst.s
                ),
            );
        }
    }

    /// Whole-pack checks after a hypothesis is built.
    pub(super) fn audit_hypothesis(&mut self, hyp: &super::Hypothesis) {
        let Some(mut aud) = self.auditor.take() else {
            return;
        };
        if aud.thorough {
            aud.sync_members(&self.members);
            self.audit_pack(&mut aud, hyp);
        }
        self.auditor = Some(aud);
    }

    fn audit_pack(&mut self, aud: &mut Auditor, hyp: &super::Hypothesis) {
        let mut found = Vec::new();
        // Every member follows the branch of its component.
        for (b, comp) in self.comps.iter().enumerate() {
            let branch = self.tree.branch(comp.leaf);
            for &m in &comp.members {
                let st = aud.member_states[m];
                for &(node, dir) in &branch {
                    let c = self.tree.context(node).expect("inner node");
                    if aud.verdict(c, st) != dir {
                        found.push((
                            ViolationKind::SiftMismatch,
                            format!("{} leaves B{b} at {c}", self.members[m].pomset),
                        ));
                        break;
                    }
                }
            }
        }
        // Distinct components are separated at their deepest common ancestor.
        for b1 in 0..self.comps.len() {
            for b2 in b1 + 1..self.comps.len() {
                let (l1, l2) = (self.comps[b1].leaf, self.comps[b2].leaf);
                let dca = self.tree.deepest_common_ancestor(l1, l2);
                let c = self.tree.context(dca).expect("inner node");
                let s1 = aud.member_states[self.comps[b1].access[0]];
                let s2 = aud.member_states[self.comps[b2].access[0]];
                if aud.verdict(c, s1) == aud.verdict(c, s2) {
                    found.push((
                        ViolationKind::Separation,
                        format!("B{b1} and B{b2} under {c}"),
                    ));
                }
            }
        }
        // Representatives are closed under the compositions that generated them.
        for &r in &self.reps {
            let ok = match self.members[r].origin {
                Origin::Epsilon | Origin::Letter => true,
                Origin::Compose(_, x, y) => {
                    self.members[x].s_index.is_some() && self.members[y].s_index.is_some()
                }
            };
            if !ok {
                found.push((
                    ViolationKind::SubpomsetClosure,
                    format!("{} has a factor outside S", self.members[r].pomset),
                ));
            }
        }
        // Members evaluate to their own component, with the right verdict.
        for (m, member) in self.members.iter().enumerate() {
            match hyp.eval(&member.pomset) {
                Ok(s) if s.index() == member.comp => {}
                Ok(s) => found.push((
                    ViolationKind::EvalMismatch,
                    format!(
                        "{} evaluates to q{} in B{}",
                        member.pomset,
                        s.index(),
                        member.comp
                    ),
                )),
                Err(e) => found.push((ViolationKind::EvalMismatch, e.to_string())),
            }
            let st = aud.member_states[m];
            let truth = aud.target.is_accepting(st);
            if hyp.recognizer().is_accepting(StateId(member.comp)) != truth {
                found.push((
                    ViolationKind::Compatibility,
                    format!("hypothesis and target disagree on {}", member.pomset),
                ));
            }
        }
        for (kind, detail) in found {
            self.violation(kind, detail);
        }
    }

    /// Postcondition of a breaking-point search, plus its recursion and
    /// query bounds.
    pub(super) fn audit_ebp(&mut self, c: &Context, p: &Pomset) {
        let Some(aud) = self.auditor.take() else {
            return;
        };
        let mut found = Vec::new();
        let record = *self.diag.ebp.last().expect("called after a search");
        if record.recursions > record.term_depth {
            found.push((
                ViolationKind::RecursionBound,
                format!(
                    "{} recursions on a term of depth {}",
                    record.recursions, record.term_depth
                ),
            ));
        }
        if record.sharp && record.max_uncached_per_level > 2 {
            found.push((
                ViolationKind::QueryBound,
                format!(
                    "{} fresh queries at one level",
                    record.max_uncached_per_level
                ),
            ));
        }
        match self.index.get(p) {
            Some(&m) => {
                let v = aud.accepts(&c.fill(p));
                let comp = &self.comps[self.members[m].comp];
                for &a in &comp.access {
                    let q = &self.members[a].pomset;
                    if aud.accepts(&c.fill(q)) == v {
                        found.push((
                            ViolationKind::BreakingPoint,
                            format!("{c} does not separate {p} from {q}"),
                        ));
                    }
                }
            }
            None => found.push((ViolationKind::BreakingPoint, format!("{p} is not a member"))),
        }
        self.auditor = Some(aud);
        for (kind, detail) in found {
            self.violation(kind, detail);
        }
    }

    /// Sharpness and progress after a counter-example.
    pub(super) fn audit_after_ce(&mut self, pack_before: usize) {
        if self.auditor.is_none() {
            return;
        }
        for (b, comp) in self.comps.iter().enumerate() {
            if comp.access.len() != 1 {
                let detail = format!("B{b} has {} representatives", comp.access.len());
                self.diag.violations.push(Violation {
                    kind: ViolationKind::NotSharp,
                    detail,
                });
            }
        }
        if self.comps.len() <= pack_before {
            self.violation(
                ViolationKind::NoProgress,
                format!("pack stayed at {} components", self.comps.len()),
            );
        }
    }

    pub(super) fn audit_final(&mut self, hyp: &PomsetRecognizer) {
        if self.auditor.is_some() && !hyp.is_minimal() {
            self.violation(
                ViolationKind::NotMinimal,
                format!("{} states", hyp.num_states()),
            );
        }
    }
}
