//! Evaluation of formulas on a model.
//!
//! `extension` computes the set of states where a formula holds, bottom-up
//! over the formula tree: atoms read the valuation, negation complements,
//! conjunction intersects, and `Kj g` holds exactly at the states whose
//! agent-`j` block lies entirely inside the extension of `g`.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::formula::{random_formula, Formula};
use crate::model::{KripkeModel, StateSet};
use crate::{Error, Result};

/// Evaluator with a per-subformula cache, useful when many formulas share
/// subtrees (axiom instances repeat their operands).
pub struct Evaluator<'m> {
    model: &'m KripkeModel,
    cache: HashMap<Formula, StateSet>,
}

impl<'m> Evaluator<'m> {
    pub fn new(model: &'m KripkeModel) -> Self {
        Evaluator {
            model,
            cache: HashMap::new(),
        }
    }

    pub fn model(&self) -> &'m KripkeModel {
        self.model
    }

    pub fn extension(&mut self, f: &Formula) -> Result<StateSet> {
        if let Some(hit) = self.cache.get(f) {
            return Ok(hit.clone());
        }
        let set = match f {
            Formula::Atom(name) => {
                let atom = self.model.atom_index(name)?;
                StateSet::from_indices(
                    self.model.num_states(),
                    (0..self.model.num_states()).filter(|&s| self.model.holds(s, atom)),
                )
            }
            Formula::Not(g) => self.extension(g)?.complement(),
            Formula::And(l, r) => self.extension(l)?.intersect(&self.extension(r)?),
            Formula::Know(agent, g) => {
                let j = self.model.agent_index(agent)?;
                let inner = self.extension(g)?;
                let mut out = StateSet::empty(self.model.num_states());
                for block in self.model.blocks(j) {
                    if block.iter().all(|&s| inner.contains(s)) {
                        for &s in block {
                            out.insert(s);
                        }
                    }
                }
                out
            }
        };
        self.cache.insert(f.clone(), set.clone());
        Ok(set)
    }

    pub fn satisfies(&mut self, state: usize, f: &Formula) -> Result<bool> {
        if state >= self.model.num_states() {
            return Err(Error::StateIndex(state));
        }
        Ok(self.extension(f)?.contains(state))
    }

    pub fn valid(&mut self, f: &Formula) -> Result<bool> {
        Ok(self.extension(f)? == StateSet::full(self.model.num_states()))
    }
}

/// The set of states where `f` holds.
pub fn extension(model: &KripkeModel, f: &Formula) -> Result<StateSet> {
    Evaluator::new(model).extension(f)
}

/// Whether `f` holds at `state`.
pub fn satisfies(model: &KripkeModel, state: usize, f: &Formula) -> Result<bool> {
    Evaluator::new(model).satisfies(state, f)
}

/// Whether `f` holds at every state.
pub fn valid_in(model: &KripkeModel, f: &Formula) -> Result<bool> {
    Evaluator::new(model).valid(f)
}

/// Outcome of an S5 soundness sweep over sampled formulas. Any entry in
/// `violations` indicates a bug in the evaluator or the model construction,
/// never a property of a valid model.
#[derive(Debug, Clone)]
pub struct S5Report {
    pub seed: u64,
    pub samples: usize,
    pub checks: usize,
    pub violations: Vec<String>,
}

impl S5Report {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the S5 axiom schemas and necessitation on `samples` random formula
/// pairs (knowledge depth at most 3, drawn from the model's vocabulary).
///
/// For each sampled pair `(f, g)` and each agent `j`, the schemas
///
/// - distribution: `(Kj f & Kj (f -> g)) -> Kj g`
/// - truth: `Kj f -> f`
/// - positive introspection: `Kj f -> Kj Kj f`
/// - negative introspection: `~Kj f -> Kj ~Kj f`
///
/// must be valid, and whenever a formula is valid in the model, so must be
/// `Kj` of it (checked on `f` itself and on the truth-schema instance, which
/// is always valid).
pub fn s5_suite(model: &KripkeModel, seed: u64, samples: usize) -> S5Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = S5Report {
        seed,
        samples,
        checks: 0,
        violations: Vec::new(),
    };
    let atoms = model.atoms().to_vec();
    let agents = model.agents().to_vec();
    if atoms.is_empty() || model.num_states() == 0 {
        return report;
    }
    let mut eval = Evaluator::new(model);
    let expect_valid =
        |eval: &mut Evaluator, report: &mut S5Report, label: &str, formula: &Formula| {
            report.checks += 1;
            match eval.valid(formula) {
                Ok(true) => {}
                Ok(false) => report
                    .violations
                    .push(format!("{label} is not valid: {formula}")),
                Err(e) => report
                    .violations
                    .push(format!("{label} failed to evaluate: {e}")),
            }
        };
    for _ in 0..samples {
        let f = random_formula(&mut rng, &atoms, &agents, 3);
        let g = random_formula(&mut rng, &atoms, &agents, 3);
        for agent in &agents {
            let know = |h: Formula| Formula::know(agent.clone(), h);
            let distribution = Formula::implies(
                Formula::and(
                    know(f.clone()),
                    know(Formula::implies(f.clone(), g.clone())),
                ),
                know(g.clone()),
            );
            expect_valid(&mut eval, &mut report, "distribution schema", &distribution);
            let truth = Formula::implies(know(f.clone()), f.clone());
            expect_valid(&mut eval, &mut report, "truth schema", &truth);
            let positive = Formula::implies(know(f.clone()), know(know(f.clone())));
            expect_valid(&mut eval, &mut report, "positive introspection", &positive);
            let negative = Formula::implies(
                Formula::not(know(f.clone())),
                know(Formula::not(know(f.clone()))),
            );
            expect_valid(&mut eval, &mut report, "negative introspection", &negative);
            // Necessitation: every valid formula stays valid under Kj. The
            // truth-schema instance is valid by the check above; the raw
            // sample usually is not, so it exercises the vacuous side.
            expect_valid(
                &mut eval,
                &mut report,
                "necessitation on schema",
                &know(truth),
            );
            report.checks += 1;
            match (eval.valid(&f), eval.valid(&know(f.clone()))) {
                (Ok(true), Ok(false)) => report
                    .violations
                    .push(format!("necessitation broken for valid sample: {f}")),
                (Err(e), _) | (_, Err(e)) => report
                    .violations
                    .push(format!("necessitation failed to evaluate: {e}")),
                _ => {}
            }
        }
    }
    report
}
