//! Finite multi-agent S5 Kripke structures and their file format.
//!
//! A [`KripkeModel`] owns ordered lists of states, atoms, and agents; the
//! order in which they appear in the source file is the canonical order used
//! by every report and listing. Internally everything is index-based; names
//! appear only at the API edges.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const NO_BLOCK: usize = usize::MAX;

/// A set of states of one model, stored as a bitset over state indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSet {
    nbits: usize,
    words: Vec<u64>,
}

impl StateSet {
    pub fn empty(universe: usize) -> Self {
        StateSet {
            nbits: universe,
            words: vec![0; universe.div_ceil(64)],
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut set = Self::empty(universe);
        for i in 0..universe {
            set.insert(i);
        }
        set
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(universe: usize, indices: I) -> Self {
        let mut set = Self::empty(universe);
        for i in indices {
            set.insert(i);
        }
        set
    }

    pub fn universe(&self) -> usize {
        self.nbits
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.nbits, "state index out of range");
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        assert!(i < self.nbits, "state index out of range");
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.nbits && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    /// Complement within the universe.
    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        for w in &mut out.words {
            *w = !*w;
        }
        out.mask_tail();
        out
    }

    pub fn intersect(&self, other: &Self) -> Self {
        assert_eq!(self.nbits, other.nbits, "state sets from different models");
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(&other.words) {
            *w &= o;
        }
        out
    }

    pub fn union(&self, other: &Self) -> Self {
        assert_eq!(self.nbits, other.nbits, "state sets from different models");
        let mut out = self.clone();
        for (w, o) in out.words.iter_mut().zip(&other.words) {
            *w |= o;
        }
        out
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        assert_eq!(self.nbits, other.nbits, "state sets from different models");
        self.words
            .iter()
            .zip(&other.words)
            .all(|(w, o)| w & !o == 0)
    }

    /// Indices in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(move |i| self.contains(*i))
    }

    fn mask_tail(&mut self) {
        let extra = self.words.len() * 64 - self.nbits;
        if extra > 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= u64::MAX >> extra;
            }
        }
    }
}

/// A breach of the partition invariants, reported as data by [`KripkeModel::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// An agent has an empty block.
    EmptyBlock { agent: String, block_index: usize },
    /// A state occurs in more than one block of the same agent.
    Overlap { agent: String, state: String },
    /// A state occurs in no block of an agent.
    Coverage { agent: String, state: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyBlock { agent, block_index } => {
                write!(
                    f,
                    "empty block: agent `{agent}` block {block_index} has no states"
                )
            }
            Violation::Overlap { agent, state } => {
                write!(
                    f,
                    "overlap: state `{state}` is in two blocks of agent `{agent}`"
                )
            }
            Violation::Coverage { agent, state } => {
                write!(
                    f,
                    "coverage: state `{state}` is in no block of agent `{agent}`"
                )
            }
        }
    }
}

/// A finite multi-agent S5 Kripke structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KripkeModel {
    states: Vec<String>,
    atoms: Vec<String>,
    agents: Vec<String>,
    state_lookup: HashMap<String, usize>,
    atom_lookup: HashMap<String, usize>,
    agent_lookup: HashMap<String, usize>,
    /// Per state: the set of atom indices that hold there.
    valuation: Vec<BTreeSet<usize>>,
    /// Per agent: the list of blocks, each a list of state indices.
    partitions: Vec<Vec<Vec<usize>>>,
    /// Per agent, per state: index of the containing block (`NO_BLOCK` while invalid).
    block_index: Vec<Vec<usize>>,
    /// Per agent, per block: marks blocks that stand for truncated infinite blocks.
    limit_infinite: Vec<Vec<bool>>,
}

impl KripkeModel {
    /// Build a model and reject it if the partition invariants fail.
    pub fn new(
        states: Vec<String>,
        atoms: Vec<String>,
        agents: Vec<String>,
        valuation: Vec<BTreeSet<usize>>,
        partitions: Vec<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let flags = partitions
            .iter()
            .map(|blocks| vec![false; blocks.len()])
            .collect();
        Self::new_flagged(states, atoms, agents, valuation, partitions, flags)
    }

    /// As [`KripkeModel::new`], with per-block `limit_infinite` flags.
    pub fn new_flagged(
        states: Vec<String>,
        atoms: Vec<String>,
        agents: Vec<String>,
        valuation: Vec<BTreeSet<usize>>,
        partitions: Vec<Vec<Vec<usize>>>,
        limit_infinite: Vec<Vec<bool>>,
    ) -> Result<Self> {
        let model =
            Self::new_unchecked(states, atoms, agents, valuation, partitions, limit_infinite)?;
        let violations = model.validate();
        if violations.is_empty() {
            Ok(model)
        } else {
            Err(Error::InvalidModel(violations))
        }
    }

    /// Build a model checking only structural sanity (name uniqueness and
    /// index ranges), so that partition violations can be inspected with
    /// [`KripkeModel::validate`].
    pub fn new_unchecked(
        states: Vec<String>,
        atoms: Vec<String>,
        agents: Vec<String>,
        valuation: Vec<BTreeSet<usize>>,
        partitions: Vec<Vec<Vec<usize>>>,
        limit_infinite: Vec<Vec<bool>>,
    ) -> Result<Self> {
        let state_lookup = unique_index(&states, "state")?;
        let atom_lookup = unique_index(&atoms, "atom")?;
        let agent_lookup = unique_index(&agents, "agent")?;
        if valuation.len() != states.len() {
            return Err(Error::MissingValuation(
                states
                    .get(valuation.len())
                    .cloned()
                    .unwrap_or_else(|| "?".into()),
            ));
        }
        for set in &valuation {
            for &a in set {
                if a >= atoms.len() {
                    return Err(Error::UnknownAtom(format!("#{a}")));
                }
            }
        }
        if partitions.len() != agents.len() || limit_infinite.len() != agents.len() {
            return Err(Error::InvalidParameter(
                "one block list and one flag list per agent required".into(),
            ));
        }
        for (blocks, flags) in partitions.iter().zip(&limit_infinite) {
            if flags.len() != blocks.len() {
                return Err(Error::InvalidParameter(
                    "one limit_infinite flag per block required".into(),
                ));
            }
            for block in blocks {
                for &s in block {
                    if s >= states.len() {
                        return Err(Error::StateIndex(s));
                    }
                }
            }
        }
        let block_index = partitions
            .iter()
            .map(|blocks| {
                let mut index = vec![NO_BLOCK; states.len()];
                for (b, block) in blocks.iter().enumerate() {
                    for &s in block {
                        if index[s] == NO_BLOCK {
                            index[s] = b;
                        }
                    }
                }
                index
            })
            .collect();
        Ok(KripkeModel {
            states,
            atoms,
            agents,
            state_lookup,
            atom_lookup,
            agent_lookup,
            valuation,
            partitions,
            block_index,
            limit_infinite,
        })
    }

    /// Check the partition invariants: per agent, blocks are non-empty,
    /// pairwise disjoint, and cover the state set. Returns an empty list
    /// exactly when the model is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        for (j, blocks) in self.partitions.iter().enumerate() {
            let agent = self.agents[j].clone();
            let mut seen = vec![false; self.states.len()];
            for (b, block) in blocks.iter().enumerate() {
                if block.is_empty() {
                    violations.push(Violation::EmptyBlock {
                        agent: agent.clone(),
                        block_index: b,
                    });
                }
                for &s in block {
                    if seen[s] {
                        violations.push(Violation::Overlap {
                            agent: agent.clone(),
                            state: self.states[s].clone(),
                        });
                    }
                    seen[s] = true;
                }
            }
            for (s, covered) in seen.iter().enumerate() {
                if !covered {
                    violations.push(Violation::Coverage {
                        agent: agent.clone(),
                        state: self.states[s].clone(),
                    });
                }
            }
        }
        violations
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn state_index(&self, name: &str) -> Result<usize> {
        self.state_lookup
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownState(name.to_string()))
    }

    pub fn atom_index(&self, name: &str) -> Result<usize> {
        self.atom_lookup
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownAtom(name.to_string()))
    }

    pub fn agent_index(&self, name: &str) -> Result<usize> {
        self.agent_lookup
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownAgent(name.to_string()))
    }

    pub fn state_name(&self, i: usize) -> &str {
        &self.states[i]
    }

    /// Atom indices true at a state.
    pub fn valuation(&self, state: usize) -> &BTreeSet<usize> {
        &self.valuation[state]
    }

    pub fn holds(&self, state: usize, atom: usize) -> bool {
        self.valuation[state].contains(&atom)
    }

    /// Blocks of one agent, in file order.
    pub fn blocks(&self, agent: usize) -> &[Vec<usize>] {
        &self.partitions[agent]
    }

    /// Index (within [`KripkeModel::blocks`]) of the block containing `state`.
    /// Meaningful only on models whose [`KripkeModel::validate`] is clean.
    pub fn block_index_of(&self, agent: usize, state: usize) -> usize {
        self.block_index[agent][state]
    }

    /// The unique block of `agent` containing `state`.
    pub fn block_of(&self, agent: usize, state: usize) -> Result<&[usize]> {
        if agent >= self.agents.len() {
            return Err(Error::AgentIndex(agent));
        }
        if state >= self.states.len() {
            return Err(Error::StateIndex(state));
        }
        let b = self.block_index[agent][state];
        if b == NO_BLOCK {
            return Err(Error::InvalidModel(vec![Violation::Coverage {
                agent: self.agents[agent].clone(),
                state: self.states[state].clone(),
            }]));
        }
        Ok(&self.partitions[agent][b])
    }

    pub fn block_flagged_limit_infinite(&self, agent: usize, block: usize) -> bool {
        self.limit_infinite[agent][block]
    }

    /// Resolve a list of state names to a [`StateSet`].
    pub fn state_set(&self, names: &[impl AsRef<str>]) -> Result<StateSet> {
        let mut set = StateSet::empty(self.num_states());
        for name in names {
            set.insert(self.state_index(name.as_ref())?);
        }
        Ok(set)
    }

    /// Names of the members of a state set, in canonical order.
    pub fn names(&self, set: &StateSet) -> Vec<&str> {
        set.iter().map(|i| self.state_name(i)).collect()
    }

    /// The substructure induced by a non-empty subset of states: same atoms
    /// and agents, valuation restricted, and each block replaced by its
    /// non-empty intersection with the subset. `limit_infinite` flags are
    /// dropped, since a truncated block loses its meaning once cut again.
    pub fn restrict(&self, keep: &StateSet) -> Result<KripkeModel> {
        if keep.universe() != self.num_states() {
            return Err(Error::VocabularyMismatch("state universe"));
        }
        if keep.is_empty() {
            return Err(Error::EmptySubset);
        }
        let kept: Vec<usize> = keep.iter().collect();
        let mut new_index = vec![usize::MAX; self.num_states()];
        for (new, &old) in kept.iter().enumerate() {
            new_index[old] = new;
        }
        let states = kept.iter().map(|&i| self.states[i].clone()).collect();
        let valuation = kept.iter().map(|&i| self.valuation[i].clone()).collect();
        let partitions = self
            .partitions
            .iter()
            .map(|blocks| {
                blocks
                    .iter()
                    .filter_map(|block| {
                        let cut: Vec<usize> = block
                            .iter()
                            .filter(|s| keep.contains(**s))
                            .map(|&s| new_index[s])
                            .collect();
                        (!cut.is_empty()).then_some(cut)
                    })
                    .collect()
            })
            .collect();
        KripkeModel::new(
            states,
            self.atoms.clone(),
            self.agents.clone(),
            valuation,
            partitions,
        )
    }

    /// Place two models with the same atoms and agents side by side. States
    /// are relabeled `l.<name>` and `r.<name>`; no block spans the two sides.
    pub fn disjoint_union(&self, other: &KripkeModel) -> Result<KripkeModel> {
        if self.atoms != other.atoms {
            return Err(Error::VocabularyMismatch("atom sets"));
        }
        if self.agents != other.agents {
            return Err(Error::VocabularyMismatch("agent sets"));
        }
        let offset = self.num_states();
        let states = self
            .states
            .iter()
            .map(|s| format!("l.{s}"))
            .chain(other.states.iter().map(|s| format!("r.{s}")))
            .collect();
        let valuation = self
            .valuation
            .iter()
            .cloned()
            .chain(other.valuation.iter().cloned())
            .collect();
        let partitions = self
            .partitions
            .iter()
            .zip(&other.partitions)
            .map(|(left, right)| {
                left.iter()
                    .cloned()
                    .chain(
                        right
                            .iter()
                            .map(|block| block.iter().map(|&s| s + offset).collect()),
                    )
                    .collect()
            })
            .collect();
        let flags = self
            .limit_infinite
            .iter()
            .zip(&other.limit_infinite)
            .map(|(l, r)| l.iter().chain(r).copied().collect())
            .collect();
        KripkeModel::new_flagged(
            states,
            self.atoms.clone(),
            self.agents.clone(),
            valuation,
            partitions,
            flags,
        )
    }

    /// Parse and validate a model file.
    pub fn from_json(text: &str) -> Result<KripkeModel> {
        let raw: RawModel = serde_json::from_str(text)?;
        raw.into_model(true)
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<KripkeModel> {
        let raw: RawModel = serde_json::from_value(value)?;
        raw.into_model(true)
    }

    /// Parse a structurally sound model file without enforcing the partition
    /// invariants, so that [`KripkeModel::validate`] can report them.
    pub fn from_json_unvalidated(text: &str) -> Result<KripkeModel> {
        let raw: RawModel = serde_json::from_str(text)?;
        raw.into_model(false)
    }

    /// Serialize in the model file format. `from_json(to_json(m))` rebuilds
    /// an equal model.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&RawModel::from_model(self))
            .expect("model serialization cannot fail");
        text.push('\n');
        text
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(RawModel::from_model(self)).expect("model serialization cannot fail")
    }
}

fn unique_index(names: &[String], kind: &'static str) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        if map.insert(name.clone(), i).is_some() {
            return Err(Error::DuplicateId {
                kind,
                name: name.clone(),
            });
        }
    }
    Ok(map)
}

/// The model file as written: JSON object with `atoms`, `agents`, `states`,
/// `valuation`, `partitions`, and optional `block_meta`. Arrays define the
/// canonical order; unknown keys are rejected.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    atoms: Vec<String>,
    agents: Vec<String>,
    states: Vec<String>,
    valuation: BTreeMap<String, Vec<String>>,
    partitions: BTreeMap<String, Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    block_meta: BTreeMap<String, Vec<RawBlockMeta>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBlockMeta {
    block_index: usize,
    limit_infinite: bool,
}

impl RawModel {
    fn into_model(mut self, enforce_partitions: bool) -> Result<KripkeModel> {
        let state_lookup = unique_index(&self.states, "state")?;
        let atom_lookup = unique_index(&self.atoms, "atom")?;
        let agent_lookup = unique_index(&self.agents, "agent")?;

        for name in self.valuation.keys() {
            if !state_lookup.contains_key(name) {
                return Err(Error::UnknownState(name.clone()));
            }
        }
        let valuation = self
            .states
            .iter()
            .map(|state| {
                let atoms = self
                    .valuation
                    .get(state)
                    .ok_or_else(|| Error::MissingValuation(state.clone()))?;
                atoms
                    .iter()
                    .map(|a| {
                        atom_lookup
                            .get(a)
                            .copied()
                            .ok_or_else(|| Error::UnknownAtom(a.clone()))
                    })
                    .collect()
            })
            .collect::<Result<Vec<BTreeSet<usize>>>>()?;

        for name in self.partitions.keys() {
            if !agent_lookup.contains_key(name) {
                return Err(Error::UnknownAgent(name.clone()));
            }
        }
        let partitions = self
            .agents
            .iter()
            .map(|agent| {
                self.partitions
                    .remove(agent)
                    .unwrap_or_default()
                    .into_iter()
                    .map(|block| {
                        block
                            .into_iter()
                            .map(|s| {
                                state_lookup
                                    .get(&s)
                                    .copied()
                                    .ok_or_else(|| Error::UnknownState(s.clone()))
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect::<Result<Vec<Vec<Vec<usize>>>>>()?;

        let mut flags: Vec<Vec<bool>> = partitions
            .iter()
            .map(|blocks| vec![false; blocks.len()])
            .collect();
        for (agent, entries) in &self.block_meta {
            let j = *agent_lookup
                .get(agent)
                .ok_or_else(|| Error::UnknownAgent(agent.clone()))?;
            for entry in entries {
                if entry.block_index >= flags[j].len() {
                    return Err(Error::BlockMetaIndex {
                        agent: agent.clone(),
                        index: entry.block_index,
                    });
                }
                flags[j][entry.block_index] = entry.limit_infinite;
            }
        }

        if enforce_partitions {
            KripkeModel::new_flagged(
                self.states,
                self.atoms,
                self.agents,
                valuation,
                partitions,
                flags,
            )
        } else {
            KripkeModel::new_unchecked(
                self.states,
                self.atoms,
                self.agents,
                valuation,
                partitions,
                flags,
            )
        }
    }

    fn from_model(model: &KripkeModel) -> RawModel {
        let valuation = model
            .states
            .iter()
            .enumerate()
            .map(|(i, state)| {
                let atoms = model.valuation[i]
                    .iter()
                    .map(|&a| model.atoms[a].clone())
                    .collect();
                (state.clone(), atoms)
            })
            .collect();
        let partitions = model
            .agents
            .iter()
            .enumerate()
            .map(|(j, agent)| {
                let blocks = model.partitions[j]
                    .iter()
                    .map(|block| block.iter().map(|&s| model.states[s].clone()).collect())
                    .collect();
                (agent.clone(), blocks)
            })
            .collect();
        let mut block_meta: BTreeMap<String, Vec<RawBlockMeta>> = BTreeMap::new();
        for (j, flags) in model.limit_infinite.iter().enumerate() {
            let entries: Vec<RawBlockMeta> = flags
                .iter()
                .enumerate()
                .filter(|(_, flagged)| **flagged)
                .map(|(block_index, _)| RawBlockMeta {
                    block_index,
                    limit_infinite: true,
                })
                .collect();
            if !entries.is_empty() {
                block_meta.insert(model.agents[j].clone(), entries);
            }
        }
        RawModel {
            atoms: model.atoms.clone(),
            agents: model.agents.clone(),
            states: model.states.clone(),
            valuation,
            partitions,
            block_meta,
        }
    }
}
