//! Resolution-based simplification with model reconstruction.
//!
//! [`preprocess`] alternates unit propagation, pure-literal elimination and
//! bounded variable elimination until nothing changes. A variable is
//! eliminated only when its non-tautological resolvents number no more than
//! the clauses they replace plus `growth_bound`. Candidates are tried in
//! ascending order of live occurrence count; counts are refreshed lazily
//! when a candidate is popped.
//!
//! Variable numbering is never changed, so a model of the reduced formula is
//! directly a (partial) model of the original one and [`reconstruct`] only
//! has to assign the removed variables.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::cnf::{Assignment, Clause, Cnf, Literal};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReconstructionStep {
    UnitFixed { var: u32, value: bool },
    PureFixed { var: u32, value: bool },
    Eliminated { var: u32, removed_clauses: Vec<Clause> },
}

impl ReconstructionStep {
    pub fn var(&self) -> u32 {
        match *self {
            ReconstructionStep::UnitFixed { var, .. }
            | ReconstructionStep::PureFixed { var, .. }
            | ReconstructionStep::Eliminated { var, .. } => var,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReconstructionStack {
    pub steps: Vec<ReconstructionStep>,
}

impl ReconstructionStack {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RuleCounts {
    pub unit: usize,
    pub pure: usize,
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessReport {
    /// Counts of variables that occur in at least one clause.
    pub vars_before: usize,
    pub vars_after: usize,
    pub clauses_before: usize,
    pub clauses_after: usize,
    pub eliminated_by_rule: RuleCounts,
}

impl PreprocessReport {
    pub fn clause_reduction_factor(&self) -> f64 {
        self.clauses_before as f64 / self.clauses_after.max(1) as f64
    }
}

/// Mutable clause database with per-literal occurrence lists. Lists may hold
/// stale ids; [`Db::live_occ`] filters them.
struct Db {
    num_vars: usize,
    clauses: Vec<Option<Vec<Literal>>>,
    occ: Vec<Vec<usize>>,
    removed: Vec<bool>,
    stack: ReconstructionStack,
    counts: RuleCounts,
    units: VecDeque<usize>,
}

impl Db {
    fn new(cnf: &Cnf) -> Self {
        let mut db = Db {
            num_vars: cnf.num_vars(),
            clauses: Vec::with_capacity(cnf.num_clauses()),
            occ: vec![Vec::new(); 2 * cnf.num_vars()],
            removed: vec![false; cnf.num_vars()],
            stack: ReconstructionStack::default(),
            counts: RuleCounts::default(),
            units: VecDeque::new(),
        };
        for clause in cnf.clauses() {
            db.add(clause.literals().to_vec());
        }
        db
    }

    fn add(&mut self, lits: Vec<Literal>) -> usize {
        let id = self.clauses.len();
        for lit in &lits {
            self.occ[lit.code()].push(id);
        }
        if lits.len() == 1 {
            self.units.push_back(id);
        }
        self.clauses.push(Some(lits));
        id
    }

    fn live_occ(&self, lit: Literal) -> Vec<usize> {
        let mut ids: Vec<usize> = self.occ[lit.code()]
            .iter()
            .copied()
            .filter(|&id| matches!(&self.clauses[id], Some(c) if c.contains(&lit)))
            .collect();
        ids.dedup();
        ids
    }

    fn compact_occ(&mut self, lit: Literal) {
        let live = self.live_occ(lit);
        self.occ[lit.code()] = live;
    }

    fn occurrence_count(&mut self, var: u32) -> usize {
        let p = Literal::pos(var);
        self.compact_occ(p);
        self.compact_occ(p.negated());
        self.occ[p.code()].len() + self.occ[p.negated().code()].len()
    }

    fn has_empty_clause(&self) -> bool {
        self.clauses.iter().flatten().any(|c| c.is_empty())
    }

    /// Makes `lit` true: satisfied clauses go, the complement is struck out.
    fn assign(&mut self, lit: Literal) -> Result<()> {
        for id in self.live_occ(lit) {
            self.clauses[id] = None;
        }
        let complement = lit.negated();
        for id in self.live_occ(complement) {
            let clause = self.clauses[id].as_mut().unwrap();
            clause.retain(|&l| l != complement);
            match clause.len() {
                0 => return Err(Error::Conflict),
                1 => self.units.push_back(id),
                _ => {}
            }
        }
        self.removed[lit.index()] = true;
        Ok(())
    }

    fn propagate_units(&mut self) -> Result<bool> {
        let mut changed = false;
        while let Some(id) = self.units.pop_front() {
            let lit = match &self.clauses[id] {
                Some(c) if c.len() == 1 => c[0],
                _ => continue,
            };
            self.assign(lit)?;
            self.stack.steps.push(ReconstructionStep::UnitFixed {
                var: lit.var(),
                value: lit.is_positive(),
            });
            self.counts.unit += 1;
            changed = true;
        }
        Ok(changed)
    }

    fn eliminate_pure(&mut self) -> Result<bool> {
        let mut changed = false;
        for var in 1..=self.num_vars as u32 {
            if self.removed[var as usize - 1] {
                continue;
            }
            let pos = self.live_occ(Literal::pos(var)).len();
            let neg = self.live_occ(Literal::neg(var)).len();
            if (pos == 0) == (neg == 0) {
                continue;
            }
            let lit = Literal::new(var, pos > 0);
            self.assign(lit)?;
            self.stack.steps.push(ReconstructionStep::PureFixed {
                var,
                value: lit.is_positive(),
            });
            self.counts.pure += 1;
            changed = true;
        }
        Ok(changed)
    }

    /// Non-tautological resolvents on `var`, or `None` once more than
    /// `limit` have been produced.
    fn resolvents(&self, var: u32, pos: &[usize], neg: &[usize], limit: usize) -> Option<Vec<Vec<Literal>>> {
        let mut out = Vec::new();
        for &p in pos {
            let pc = self.clauses[p].as_ref().unwrap();
            for &n in neg {
                let nc = self.clauses[n].as_ref().unwrap();
                if let Some(r) = resolve(pc, nc, var) {
                    out.push(r);
                    if out.len() > limit {
                        return None;
                    }
                }
            }
        }
        Some(out)
    }

    /// Eliminates `var` if within the growth bound; returns whether it did.
    fn try_eliminate(&mut self, var: u32, growth_bound: usize) -> Result<Option<Vec<u32>>> {
        let pos = self.live_occ(Literal::pos(var));
        let neg = self.live_occ(Literal::neg(var));
        if pos.is_empty() && neg.is_empty() {
            return Ok(None);
        }
        let limit = pos.len() + neg.len() + growth_bound;
        let Some(resolvents) = self.resolvents(var, &pos, &neg, limit) else {
            return Ok(None);
        };
        let mut touched = Vec::new();
        let mut removed_clauses = Vec::with_capacity(pos.len() + neg.len());
        for id in pos.iter().chain(neg.iter()) {
            if let Some(lits) = self.clauses[*id].take() {
                touched.extend(lits.iter().map(|l| l.var()).filter(|&v| v != var));
                removed_clauses.push(Clause::new(lits));
            }
        }
        for r in resolvents {
            if r.is_empty() {
                return Err(Error::Conflict);
            }
            self.add(r);
        }
        self.removed[var as usize - 1] = true;
        self.stack
            .steps
            .push(ReconstructionStep::Eliminated { var, removed_clauses });
        self.counts.resolution += 1;
        touched.sort_unstable();
        touched.dedup();
        Ok(Some(touched))
    }

    fn eliminate_bounded(&mut self, growth_bound: usize) -> Result<bool> {
        let mut heap = BinaryHeap::new();
        for var in 1..=self.num_vars as u32 {
            if !self.removed[var as usize - 1] {
                let count = self.occurrence_count(var);
                if count > 0 {
                    heap.push(Reverse((count, var)));
                }
            }
        }
        let mut changed = false;
        while let Some(Reverse((count, var))) = heap.pop() {
            if self.removed[var as usize - 1] {
                continue;
            }
            let current = self.occurrence_count(var);
            if current == 0 {
                continue;
            }
            if current != count {
                heap.push(Reverse((current, var)));
                continue;
            }
            if let Some(touched) = self.try_eliminate(var, growth_bound)? {
                changed = true;
                if !self.units.is_empty() {
                    self.propagate_units()?;
                }
                for v in touched {
                    if !self.removed[v as usize - 1] {
                        let c = self.occurrence_count(v);
                        if c > 0 {
                            heap.push(Reverse((c, v)));
                        }
                    }
                }
            }
        }
        Ok(changed)
    }

    fn to_cnf(&self) -> Cnf {
        let clauses = self
            .clauses
            .iter()
            .flatten()
            .map(|c| Clause::new(c.iter().copied()))
            .collect();
        Cnf::new(self.num_vars, clauses).expect("variables stay in range")
    }
}

/// Resolvent of `p` (containing `var`) and `n` (containing `-var`), or
/// `None` when it is a tautology.
fn resolve(p: &[Literal], n: &[Literal], var: u32) -> Option<Vec<Literal>> {
    // an input clause holding both signs of `var` yields a tautology
    if p.contains(&Literal::neg(var)) || n.contains(&Literal::pos(var)) {
        return None;
    }
    let mut out: Vec<Literal> = p.iter().copied().filter(|l| l.var() != var).collect();
    for &lit in n {
        if lit.var() == var || out.contains(&lit) {
            continue;
        }
        if out.contains(&lit.negated()) {
            return None;
        }
        out.push(lit);
    }
    Some(out)
}

/// Closes the formula under unit propagation.
pub fn unit_propagate(cnf: &Cnf) -> Result<(Cnf, ReconstructionStack)> {
    let mut db = Db::new(cnf);
    if db.has_empty_clause() {
        return Err(Error::Conflict);
    }
    db.propagate_units()?;
    Ok((db.to_cnf(), db.stack))
}

/// Replaces every clause on `var` by the non-tautological resolvents on it.
/// Remaining clauses keep their order; resolvents follow.
pub fn eliminate_variable(cnf: &Cnf, var: u32) -> Result<Cnf> {
    if var == 0 || var as usize > cnf.num_vars() {
        return Err(Error::VariableOutOfRange {
            var: var as usize,
            num_vars: cnf.num_vars(),
        });
    }
    let (with, without): (Vec<&Clause>, Vec<&Clause>) =
        cnf.clauses().iter().partition(|c| c.contains_var(var));
    if with.is_empty() {
        return Err(Error::InvalidArgument(format!("variable {var} does not occur")));
    }
    let pos: Vec<&Clause> = with.iter().copied().filter(|c| c.contains(Literal::pos(var))).collect();
    let neg: Vec<&Clause> = with.iter().copied().filter(|c| c.contains(Literal::neg(var))).collect();
    let mut clauses: Vec<Clause> = without.into_iter().cloned().collect();
    for p in &pos {
        for n in &neg {
            if let Some(r) = resolve(p.literals(), n.literals(), var) {
                clauses.push(Clause::new(r));
            }
        }
    }
    Cnf::new(cnf.num_vars(), clauses)
}

/// Units, pure literals and bounded variable elimination to fixpoint.
pub fn preprocess(cnf: &Cnf, growth_bound: usize) -> Result<(Cnf, ReconstructionStack, PreprocessReport)> {
    let mut db = Db::new(cnf);
    if db.has_empty_clause() {
        return Err(Error::Conflict);
    }
    loop {
        let mut changed = db.propagate_units()?;
        changed |= db.eliminate_pure()?;
        changed |= db.eliminate_bounded(growth_bound)?;
        if !changed {
            break;
        }
    }
    let reduced = db.to_cnf();
    let report = PreprocessReport {
        vars_before: cnf.occurring_vars(),
        vars_after: reduced.occurring_vars(),
        clauses_before: cnf.num_clauses(),
        clauses_after: reduced.num_clauses(),
        eliminated_by_rule: db.counts,
    };
    Ok((reduced, db.stack, report))
}

/// Extends a model of the reduced formula to a model of `original`.
///
/// Steps are replayed newest first. Fixed variables take their recorded
/// value; an eliminated variable takes the first of `false`, `true` that
/// satisfies all of its removed clauses.
pub fn reconstruct(reduced_model: &Assignment, stack: &ReconstructionStack, original: &Cnf) -> Result<Assignment> {
    original.check_assignment(reduced_model)?;
    let mut model = reduced_model.clone();
    for step in stack.steps.iter().rev() {
        match step {
            ReconstructionStep::UnitFixed { var, value }
            | ReconstructionStep::PureFixed { var, value } => model.set(*var, *value),
            ReconstructionStep::Eliminated { var, removed_clauses } => {
                let satisfied = |m: &Assignment| removed_clauses.iter().all(|c| c.is_satisfied_by(m.bits()));
                model.set(*var, false);
                if !satisfied(&model) {
                    model.set(*var, true);
                    if !satisfied(&model) {
                        return Err(Error::Internal(format!(
                            "no value of eliminated variable {var} satisfies its removed clauses"
                        )));
                    }
                }
            }
        }
    }
    Ok(model)
}
