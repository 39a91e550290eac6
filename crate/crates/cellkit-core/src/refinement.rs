//! Iterated partition refinement and what it buys: quotient models,
//! depth-bounded signatures, distinguishing formulas, and cross-model
//! equivalence checks.
//!
//! Round 0 groups states by valuation. Each later round keeps two states
//! together exactly when the previous round did and, for every agent, their
//! blocks meet the same classes of the previous round. On a finite model the
//! sequence reaches a fixpoint after at most `|S| - 1` refining rounds, and
//! the final partition equates two states exactly when no formula tells them
//! apart.
//!
//! Three engines compute the same final partition:
//!
//! - [`refine_fixpoint_naive`] recomputes the met-class sets of every block
//!   each round, straight from the definition. It is the oracle the other
//!   engines are tested against.
//! - [`refine_fixpoint`] runs the same round structure but interns block and
//!   state signatures, so classes are compared by interned id rather than by
//!   set comparison. Interning resolves collisions by full key equality, so
//!   classes never merge on a hash alone.
//! - [`refine_final_worklist`] processes splitter classes from a queue
//!   instead of sweeping rounds, and only reports the final partition.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::formula::Formula;
use crate::model::KripkeModel;
use crate::{Error, Result};

/// A partition of a model's states. Classes are numbered by the position of
/// their smallest member and list their members in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    class_of: Vec<usize>,
    classes: Vec<Vec<usize>>,
}

impl Partition {
    /// Canonicalize an arbitrary class labeling: classes are renumbered in
    /// order of first appearance along the state list.
    pub fn from_assignment(labels: &[usize]) -> Partition {
        let mut renumber: HashMap<usize, usize> = HashMap::new();
        let mut class_of = Vec::with_capacity(labels.len());
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for (state, &label) in labels.iter().enumerate() {
            let next = classes.len();
            let id = *renumber.entry(label).or_insert(next);
            if id == classes.len() {
                classes.push(Vec::new());
            }
            classes[id].push(state);
            class_of.push(id);
        }
        Partition { class_of, classes }
    }

    pub fn num_states(&self) -> usize {
        self.class_of.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_of(&self, state: usize) -> usize {
        self.class_of[state]
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn members(&self, class: usize) -> &[usize] {
        &self.classes[class]
    }

    pub fn same_class(&self, a: usize, b: usize) -> bool {
        self.class_of[a] == self.class_of[b]
    }

    pub fn is_discrete(&self) -> bool {
        self.classes.len() == self.class_of.len()
    }

    /// Whether every class of `self` lies inside a single class of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.classes.iter().all(|members| {
            let first = coarser.class_of(members[0]);
            members.iter().all(|&s| coarser.class_of(s) == first)
        })
    }
}

/// The rounds of one refinement run, from the valuation partition to the
/// first fixpoint. One more round would reproduce the last entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinementTrace {
    pub rounds: Vec<Partition>,
    pub stabilized_at: usize,
}

impl RefinementTrace {
    pub fn final_partition(&self) -> &Partition {
        self.rounds.last().expect("trace holds at least round 0")
    }

    /// Index of the earliest round separating two states, if any round does.
    pub fn first_separating_round(&self, s: usize, t: usize) -> Option<usize> {
        self.rounds.iter().position(|round| !round.same_class(s, t))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.rounds.iter().map(|r| r.num_classes()).collect()
    }
}

/// Round 0: states grouped by their valuation.
pub fn initial_partition(model: &KripkeModel) -> Partition {
    let mut ids: HashMap<&BTreeSet<usize>, usize> = HashMap::new();
    let labels: Vec<usize> = (0..model.num_states())
        .map(|s| {
            let next = ids.len();
            *ids.entry(model.valuation(s)).or_insert(next)
        })
        .collect();
    Partition::from_assignment(&labels)
}

/// One refinement round, straight from the definition: two states stay
/// together iff they share a class and, for every agent, their blocks meet
/// exactly the same classes.
pub fn refine_step(model: &KripkeModel, current: &Partition) -> Partition {
    // Met-class sets, one per block per agent.
    let met: Vec<Vec<BTreeSet<usize>>> = (0..model.num_agents())
        .map(|j| {
            model
                .blocks(j)
                .iter()
                .map(|block| block.iter().map(|&s| current.class_of(s)).collect())
                .collect()
        })
        .collect();
    let mut ids: HashMap<(usize, Vec<&BTreeSet<usize>>), usize> = HashMap::new();
    let labels: Vec<usize> = (0..model.num_states())
        .map(|s| {
            let key = (
                current.class_of(s),
                (0..model.num_agents())
                    .map(|j| &met[j][model.block_index_of(j, s)])
                    .collect::<Vec<_>>(),
            );
            let next = ids.len();
            *ids.entry(key).or_insert(next)
        })
        .collect();
    Partition::from_assignment(&labels)
}

/// Definition-following engine; kept as the oracle for the others.
pub fn refine_fixpoint_naive(model: &KripkeModel) -> RefinementTrace {
    let mut rounds = vec![initial_partition(model)];
    loop {
        let next = refine_step(model, rounds.last().expect("non-empty"));
        if next == *rounds.last().expect("non-empty") {
            break;
        }
        rounds.push(next);
    }
    RefinementTrace {
        stabilized_at: rounds.len() - 1,
        rounds,
    }
}

/// Signature-interning engine. Produces the same trace as
/// [`refine_fixpoint_naive`], round for round.
pub fn refine_fixpoint(model: &KripkeModel) -> RefinementTrace {
    let n = model.num_states();
    let initial = initial_partition(model);
    let mut class_of: Vec<u32> = initial.class_of.iter().map(|&c| c as u32).collect();
    let mut num_classes = initial.num_classes();
    let mut rounds = vec![initial];

    let agents = model.num_agents();
    loop {
        // Interned met-class list per block. A block's signature is its
        // members' classes, sorted and deduplicated; equal lists intern to
        // equal ids by full comparison, so hash collisions cannot merge.
        let mut block_sig_ids: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut block_sig: Vec<Vec<u32>> = Vec::with_capacity(agents);
        let mut scratch: Vec<u32> = Vec::new();
        for j in 0..agents {
            let blocks = model.blocks(j);
            let mut per_block = Vec::with_capacity(blocks.len());
            for block in blocks {
                scratch.clear();
                scratch.extend(block.iter().map(|&s| class_of[s]));
                scratch.sort_unstable();
                scratch.dedup();
                let next = block_sig_ids.len() as u32;
                let id = *block_sig_ids.entry(scratch.clone()).or_insert(next);
                per_block.push(id);
            }
            block_sig.push(per_block);
        }

        // State keys: previous class plus the per-agent block signature ids.
        let mut state_ids: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut next_class_of = Vec::with_capacity(n);
        let mut key = Vec::with_capacity(agents + 1);
        for s in 0..n {
            key.clear();
            key.push(class_of[s]);
            for (j, sig) in block_sig.iter().enumerate() {
                key.push(sig[model.block_index_of(j, s)]);
            }
            let next = state_ids.len() as u32;
            let id = *state_ids.entry(key.clone()).or_insert(next);
            next_class_of.push(id);
        }

        let next_count = state_ids.len();
        if next_count == num_classes {
            break;
        }
        class_of = next_class_of;
        num_classes = next_count;
        let labels: Vec<usize> = class_of.iter().map(|&c| c as usize).collect();
        rounds.push(Partition::from_assignment(&labels));
    }
    RefinementTrace {
        stabilized_at: rounds.len() - 1,
        rounds,
    }
}

/// Worklist engine: splits classes against queued splitter classes until no
/// splitter changes anything. Skips the round structure entirely, so only
/// the final partition is available.
pub fn refine_final_worklist(model: &KripkeModel) -> Partition {
    let n = model.num_states();
    let initial = initial_partition(model);
    let mut class_of: Vec<usize> = initial.class_of.clone();
    let mut members: Vec<Vec<usize>> = initial.classes.clone();
    let mut retired: Vec<bool> = vec![false; members.len()];
    let mut queue: VecDeque<usize> = (0..members.len()).collect();

    // Generation-stamped scratch marks, reset by bumping the generation.
    let mut mark: Vec<u32> = vec![0; n];
    let mut generation = 0u32;

    while let Some(c) = queue.pop_front() {
        if retired[c] {
            continue;
        }
        let splitter = members[c].clone();
        for j in 0..model.num_agents() {
            // States whose agent-j block meets the splitter.
            generation += 1;
            let mut pre: Vec<usize> = Vec::new();
            let mut seen_blocks: BTreeSet<usize> = BTreeSet::new();
            for &s in &splitter {
                let b = model.block_index_of(j, s);
                if seen_blocks.insert(b) {
                    for &t in &model.blocks(j)[b] {
                        if mark[t] != generation {
                            mark[t] = generation;
                            pre.push(t);
                        }
                    }
                }
            }
            // Group the predecessor states by their current class.
            let mut touched: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &t in &pre {
                touched.entry(class_of[t]).or_default().push(t);
            }
            for (cls, inside) in touched {
                if inside.len() == members[cls].len() {
                    continue; // wholly inside the preimage, no split
                }
                generation += 1;
                for &t in &inside {
                    mark[t] = generation;
                }
                let (part_in, part_out): (Vec<usize>, Vec<usize>) = members[cls]
                    .iter()
                    .copied()
                    .partition(|&t| mark[t] == generation);
                retired[cls] = true;
                for new_members in [part_in, part_out] {
                    let id = members.len();
                    for &t in &new_members {
                        class_of[t] = id;
                    }
                    members.push(new_members);
                    retired.push(false);
                    queue.push_back(id);
                }
            }
        }
    }
    Partition::from_assignment(&class_of)
}

/// Depth-bounded description of how a state sits in the model: its valuation
/// at depth 0; at depth `d`, its depth-`d-1` signature together with, per
/// agent, the set of depth-`d-1` signatures present in the state's block.
/// Two states get equal depth-`d` signatures exactly when round `d` of the
/// refinement keeps them together.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Signature {
    Atoms(BTreeSet<String>),
    Nested {
        base: Box<Signature>,
        seen: BTreeMap<String, BTreeSet<Signature>>,
    },
}

/// Signatures of every state at the given depth.
pub fn signatures(model: &KripkeModel, depth: usize) -> Vec<Signature> {
    let mut current: Vec<Signature> = (0..model.num_states())
        .map(|s| {
            Signature::Atoms(
                model
                    .valuation(s)
                    .iter()
                    .map(|&a| model.atoms()[a].clone())
                    .collect(),
            )
        })
        .collect();
    for _ in 0..depth {
        current = (0..model.num_states())
            .map(|s| Signature::Nested {
                base: Box::new(current[s].clone()),
                seen: (0..model.num_agents())
                    .map(|j| {
                        let sigs = model.blocks(j)[model.block_index_of(j, s)]
                            .iter()
                            .map(|&t| current[t].clone())
                            .collect();
                        (model.agents()[j].clone(), sigs)
                    })
                    .collect(),
            })
            .collect();
    }
    current
}

/// Depth-`depth` signature of one state.
pub fn signature(model: &KripkeModel, state: usize, depth: usize) -> Result<Signature> {
    if state >= model.num_states() {
        return Err(Error::StateIndex(state));
    }
    Ok(signatures(model, depth).swap_remove(state))
}

/// A model quotiented by the final refinement partition, together with the
/// class assignment that maps original states onto quotient states.
#[derive(Debug, Clone)]
pub struct QuotientModel {
    pub model: KripkeModel,
    pub map: Vec<usize>,
}

impl QuotientModel {
    /// Quotient state index for an original state index.
    pub fn class_of(&self, state: usize) -> usize {
        self.map[state]
    }
}

/// Collapse each final-refinement class to a single state `c<i>`. The
/// valuation is constant on classes; each block maps onto the set of classes
/// it meets, and at the fixpoint two blocks of one agent either map onto the
/// same class set or onto disjoint ones, so the images form a partition.
/// `limit_infinite` flags are not carried over.
pub fn quotient(model: &KripkeModel) -> QuotientModel {
    let partition = refine_fixpoint(model);
    let final_p = partition.final_partition();
    let k = final_p.num_classes();
    let states: Vec<String> = (0..k).map(|c| format!("c{c}")).collect();
    let valuation = (0..k)
        .map(|c| model.valuation(final_p.members(c)[0]).clone())
        .collect();
    let partitions = (0..model.num_agents())
        .map(|j| {
            let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
            let mut blocks = Vec::new();
            for block in model.blocks(j) {
                let mut image: Vec<usize> = block.iter().map(|&s| final_p.class_of(s)).collect();
                image.sort_unstable();
                image.dedup();
                if seen.insert(image.clone()) {
                    blocks.push(image);
                }
            }
            blocks
        })
        .collect();
    let model = KripkeModel::new(
        states,
        model.atoms().to_vec(),
        model.agents().to_vec(),
        valuation,
        partitions,
    )
    .expect("quotient construction yields a valid model");
    QuotientModel {
        model,
        map: final_p.class_of.clone(),
    }
}

/// A formula holding at `s` but not at `t`, or `None` when no formula
/// separates them. The synthesized witness nests knowledge operators no
/// deeper than the first refinement round that separates the two states.
pub fn distinguishing_formula(model: &KripkeModel, s: usize, t: usize) -> Result<Option<Formula>> {
    if s >= model.num_states() {
        return Err(Error::StateIndex(s));
    }
    if t >= model.num_states() {
        return Err(Error::StateIndex(t));
    }
    let trace = refine_fixpoint(model);
    let Some(round) = trace.first_separating_round(s, t) else {
        return Ok(None);
    };
    let mut builder = WitnessBuilder {
        model,
        trace: &trace,
        pairwise: HashMap::new(),
        characteristic: HashMap::new(),
    };
    let here = trace.rounds[round].class_of(s);
    let there = trace.rounds[round].class_of(t);
    Ok(Some(builder.distinguish(round, here, there)))
}

/// Whether two states of two models over the same vocabulary satisfy the
/// same formulas. Decided by refining the disjoint union.
pub fn bisimilar_across(
    left: &KripkeModel,
    right: &KripkeModel,
    left_state: usize,
    right_state: usize,
) -> Result<bool> {
    if left_state >= left.num_states() {
        return Err(Error::StateIndex(left_state));
    }
    if right_state >= right.num_states() {
        return Err(Error::StateIndex(right_state));
    }
    let union = left.disjoint_union(right)?;
    let trace = refine_fixpoint(&union);
    Ok(trace
        .final_partition()
        .same_class(left_state, left.num_states() + right_state))
}

struct WitnessBuilder<'a> {
    model: &'a KripkeModel,
    trace: &'a RefinementTrace,
    /// (round, class, other) -> formula true on `class`, false on `other`.
    pairwise: HashMap<(usize, usize, usize), Formula>,
    /// (round, class) -> formula true exactly on `class` among the round's classes.
    characteristic: HashMap<(usize, usize), Formula>,
}

impl WitnessBuilder<'_> {
    /// Formula of modal depth at most `round`, true throughout class `c` of
    /// that round and false throughout class `other`. Depth-bounded formulas
    /// are constant on the round's classes, so checking representatives is
    /// enough.
    fn distinguish(&mut self, round: usize, c: usize, other: usize) -> Formula {
        debug_assert_ne!(c, other);
        if let Some(hit) = self.pairwise.get(&(round, c, other)) {
            return hit.clone();
        }
        let result = if round == 0 {
            self.atomic_witness(
                self.trace.rounds[0].members(c)[0],
                self.trace.rounds[0].members(other)[0],
            )
        } else {
            let prev = &self.trace.rounds[round - 1];
            let x = self.trace.rounds[round].members(c)[0];
            let y = self.trace.rounds[round].members(other)[0];
            let prev_c = prev.class_of(x);
            let prev_other = prev.class_of(y);
            if prev_c != prev_other {
                // Already separated a round earlier; reuse that witness.
                self.distinguish(round - 1, prev_c, prev_other)
            } else {
                self.split_witness(round, x, y)
            }
        };
        self.pairwise.insert((round, c, other), result.clone());
        result
    }

    /// The two states differ in valuation; emit the first differing atom,
    /// positively if it holds at `s`.
    fn atomic_witness(&self, s: usize, t: usize) -> Formula {
        for (a, atom) in self.model.atoms().iter().enumerate() {
            let at_s = self.model.holds(s, a);
            if at_s != self.model.holds(t, a) {
                let f = Formula::atom(atom.clone());
                return if at_s { f } else { Formula::not(f) };
            }
        }
        unreachable!("states in different round-0 classes differ on an atom")
    }

    /// `x` and `y` share the previous round's class but some agent's blocks
    /// meet different previous-round classes. Pick the lowest such agent and
    /// the lowest class in the difference; whichever side meets it considers
    /// that class possible, the other side knows its complement.
    fn split_witness(&mut self, round: usize, x: usize, y: usize) -> Formula {
        let prev = &self.trace.rounds[round - 1];
        for j in 0..self.model.num_agents() {
            let met_x = self.met_classes(prev, j, x);
            let met_y = self.met_classes(prev, j, y);
            let Some(&class) = met_x.symmetric_difference(&met_y).next() else {
                continue;
            };
            let agent = self.model.agents()[j].clone();
            let possible = Formula::not(Formula::know(
                agent.clone(),
                Formula::not(self.characteristic(round - 1, class)),
            ));
            return if met_x.contains(&class) {
                possible
            } else {
                Formula::not(possible)
            };
        }
        unreachable!("states separated at this round differ for some agent")
    }

    fn met_classes(&self, prev: &Partition, agent: usize, state: usize) -> BTreeSet<usize> {
        self.model.blocks(agent)[self.model.block_index_of(agent, state)]
            .iter()
            .map(|&t| prev.class_of(t))
            .collect()
    }

    /// Conjunction of pairwise witnesses against every other class of the
    /// round; true exactly on `class`.
    fn characteristic(&mut self, round: usize, class: usize) -> Formula {
        if let Some(hit) = self.characteristic.get(&(round, class)) {
            return hit.clone();
        }
        let others: Vec<usize> = (0..self.trace.rounds[round].num_classes())
            .filter(|&c| c != class)
            .collect();
        let mut parts = others
            .into_iter()
            .map(|other| self.distinguish(round, class, other));
        let first = parts
            .next()
            .expect("a split requires at least two classes in the previous round");
        let result = parts.fold(first, Formula::and);
        self.characteristic.insert((round, class), result.clone());
        result
    }
}
