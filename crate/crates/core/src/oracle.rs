//! Complete reference decision procedure.
//!
//! Plain DPLL: unit propagation over occurrence lists, pure-literal
//! elimination, and branching on the lowest-index unassigned variable with the
//! `true` branch first. No heuristics, no learning. Slow and easy to audit;
//! it is the ground truth for the relaxation solver, never a competitor.

use serde::{Deserialize, Serialize};

use crate::cnf::{Assignment, Cnf, Literal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OracleStatus {
    Sat,
    Unsat,
    BudgetExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub status: OracleStatus,
    pub model: Option<Assignment>,
    pub nodes: u64,
}

impl OracleResult {
    pub fn is_sat(&self) -> bool {
        self.status == OracleStatus::Sat
    }
}

struct Search {
    num_vars: usize,
    clauses: Vec<Vec<Literal>>,
    occurs: Vec<Vec<usize>>,
    /// 0 unassigned, 1 true, -1 false
    values: Vec<i8>,
    trail: Vec<Literal>,
    nodes: u64,
}

enum Outcome {
    Found,
    Exhausted,
    OutOfBudget,
}

impl Search {
    fn new(cnf: &Cnf) -> Self {
        let clauses: Vec<Vec<Literal>> = cnf
            .clauses()
            .iter()
            .map(|c| c.literals().to_vec())
            .collect();
        let mut occurs = vec![Vec::new(); 2 * cnf.num_vars()];
        for (ci, clause) in clauses.iter().enumerate() {
            for lit in clause {
                occurs[lit.code()].push(ci);
            }
        }
        Search {
            num_vars: cnf.num_vars(),
            clauses,
            occurs,
            values: vec![0; cnf.num_vars()],
            trail: Vec::new(),
            nodes: 0,
        }
    }

    fn value(&self, lit: Literal) -> Option<bool> {
        match self.values[lit.index()] {
            0 => None,
            v => Some((v > 0) == lit.is_positive()),
        }
    }

    fn assign(&mut self, lit: Literal) {
        self.values[lit.index()] = if lit.is_positive() { 1 } else { -1 };
        self.trail.push(lit);
    }

    fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            let lit = self.trail.pop().unwrap();
            self.values[lit.index()] = 0;
        }
    }

    /// Examines one clause; assigns its literal if it became unit.
    /// Returns false on conflict.
    fn visit(&mut self, ci: usize) -> bool {
        let mut unassigned = None;
        let mut count = 0;
        for &lit in &self.clauses[ci] {
            match self.value(lit) {
                Some(true) => return true,
                Some(false) => {}
                None => {
                    count += 1;
                    unassigned = Some(lit);
                }
            }
        }
        match count {
            0 => false,
            1 => {
                self.assign(unassigned.unwrap());
                true
            }
            _ => true,
        }
    }

    /// Propagates every trail entry from `head` onward.
    fn propagate(&mut self, mut head: usize) -> bool {
        while head < self.trail.len() {
            let falsified = self.trail[head].negated();
            head += 1;
            for k in 0..self.occurs[falsified.code()].len() {
                let ci = self.occurs[falsified.code()][k];
                if !self.visit(ci) {
                    return false;
                }
            }
        }
        true
    }

    /// Assigns initial units and propagates. False when the formula is
    /// refuted at the root.
    fn initialize(&mut self) -> bool {
        for ci in 0..self.clauses.len() {
            if !self.visit(ci) {
                return false;
            }
        }
        self.propagate(0)
    }

    /// Assigns pure literals of the not-yet-satisfied clauses until none
    /// remain. Returns true when every clause is satisfied.
    fn pure_literals(&mut self) -> bool {
        loop {
            let mut seen_pos = vec![false; self.num_vars];
            let mut seen_neg = vec![false; self.num_vars];
            let mut all_satisfied = true;
            for clause in &self.clauses {
                if clause.iter().any(|&l| self.value(l) == Some(true)) {
                    continue;
                }
                all_satisfied = false;
                for &lit in clause {
                    if self.value(lit).is_none() {
                        if lit.is_positive() {
                            seen_pos[lit.index()] = true;
                        } else {
                            seen_neg[lit.index()] = true;
                        }
                    }
                }
            }
            if all_satisfied {
                return true;
            }
            let start = self.trail.len();
            for i in 0..self.num_vars {
                if self.values[i] == 0 && seen_pos[i] != seen_neg[i] {
                    self.assign(Literal::new(i as u32 + 1, seen_pos[i]));
                }
            }
            if self.trail.len() == start {
                return false;
            }
            let ok = self.propagate(start);
            debug_assert!(ok, "pure literals cannot conflict");
        }
    }

    fn first_unassigned(&self) -> Option<usize> {
        self.values.iter().position(|&v| v == 0)
    }

    fn current_model(&self) -> Assignment {
        Assignment::new(self.values.iter().map(|&v| v > 0).collect())
    }

    fn solve(&mut self, budget: u64) -> Outcome {
        self.nodes += 1;
        if self.nodes > budget {
            return Outcome::OutOfBudget;
        }
        if self.pure_literals() {
            return Outcome::Found;
        }
        let Some(var) = self.first_unassigned() else {
            return Outcome::Found;
        };
        for value in [true, false] {
            let mark = self.trail.len();
            self.assign(Literal::new(var as u32 + 1, value));
            if self.propagate(mark) {
                match self.solve(budget) {
                    Outcome::Exhausted => {}
                    other => return other,
                }
            }
            self.undo_to(mark);
        }
        Outcome::Exhausted
    }

    fn enumerate(&mut self, cap: usize, out: &mut Vec<Assignment>) {
        if out.len() >= cap {
            return;
        }
        let Some(var) = self.first_unassigned() else {
            out.push(self.current_model());
            return;
        };
        for value in [false, true] {
            let mark = self.trail.len();
            self.assign(Literal::new(var as u32 + 1, value));
            if self.propagate(mark) {
                self.enumerate(cap, out);
            }
            self.undo_to(mark);
            if out.len() >= cap {
                return;
            }
        }
    }
}

/// Decides `cnf`, visiting at most `node_budget` search nodes.
pub fn dpll_solve(cnf: &Cnf, node_budget: u64) -> OracleResult {
    assert!(node_budget > 0, "node budget must be positive");
    let mut search = Search::new(cnf);
    if !search.initialize() {
        return OracleResult {
            status: OracleStatus::Unsat,
            model: None,
            nodes: 0,
        };
    }
    let status = match search.solve(node_budget) {
        Outcome::Found => OracleStatus::Sat,
        Outcome::Exhausted => OracleStatus::Unsat,
        Outcome::OutOfBudget => OracleStatus::BudgetExceeded,
    };
    let model = (status == OracleStatus::Sat).then(|| {
        // unassigned variables are unconstrained; false is as good as any
        let model = search.current_model();
        assert!(
            cnf.is_satisfied_by(&model),
            "oracle produced a non-model; this is a bug"
        );
        model
    });
    OracleResult {
        status,
        model,
        nodes: search.nodes,
    }
}

/// All models of `cnf` (at most `cap` of them), sorted lexicographically with
/// variable 1 most significant. Intended for small formulas or formulas whose
/// models are pinned down by a few branching variables.
pub fn enumerate_models(cnf: &Cnf, cap: usize) -> Vec<Assignment> {
    assert!(cap > 0, "cap must be positive");
    let mut search = Search::new(cnf);
    if !search.initialize() {
        return Vec::new();
    }
    let mut models = Vec::new();
    search.enumerate(cap, &mut models);
    for model in &models {
        assert!(cnf.is_satisfied_by(model), "enumerated a non-model");
    }
    models.sort_by(|a, b| a.bits().cmp(b.bits()));
    models
}
