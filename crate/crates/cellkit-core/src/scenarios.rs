//! Generators for example and benchmark models.
//!
//! The generators cover three families: a compactified grid with a point at
//! infinity on each axis (`nbar`), chain-of-knowledge models in the style of
//! the electronic-mail game (`email_chain`), and a chain extended with a
//! third agent whose blocks grow linearly (`growing_blocks`). `random_model`
//! produces seed-deterministic models for property tests and benchmarks.
//!
//! Blocks that stand for truncations of infinite blocks carry the
//! `limit_infinite` flag; the refinement and cell algorithms ignore it, the
//! fanout report surfaces it.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::KripkeModel;
use crate::{Error, Result};

/// One state `s`, one agent, `x` true. The smallest valid model.
pub fn singleton() -> KripkeModel {
    KripkeModel::new(
        vec!["s".into()],
        vec!["x".into()],
        vec!["1".into()],
        vec![BTreeSet::from([0])],
        vec![vec![vec![0]]],
    )
    .expect("fixture is valid")
}

/// Two states with different valuations: agent 2 observes the difference,
/// agent 1 cannot tell them apart.
pub fn coin_pair() -> KripkeModel {
    KripkeModel::new(
        vec!["a".into(), "b".into()],
        vec!["x".into()],
        vec!["1".into(), "2".into()],
        vec![BTreeSet::from([0]), BTreeSet::new()],
        vec![vec![vec![0, 1]], vec![vec![0], vec![1]]],
    )
    .expect("fixture is valid")
}

/// Two states with the same valuation: agent 2 separates them, agent 1 does
/// not, and no formula distinguishes them.
pub fn twin_pair() -> KripkeModel {
    KripkeModel::new(
        vec!["a".into(), "b".into()],
        vec!["x".into()],
        vec!["1".into(), "2".into()],
        vec![BTreeSet::from([0]), BTreeSet::from([0])],
        vec![vec![vec![0, 1]], vec![vec![0], vec![1]]],
    )
    .expect("fixture is valid")
}

/// The `{1..n, inf}²` grid, three agents, one atom.
///
/// Agent 1 cannot distinguish within a row, agent 2 within a column, agent 3
/// within an anti-diagonal `k + l = i`; all states with an `inf` coordinate
/// form agent 3's border block. The atom `x` holds exactly at `(1,1)` and
/// `(2,1)`. Rows, columns, and the border are truncations of infinite blocks
/// and carry the `limit_infinite` flag. State names are `<k>_<l>` with `inf`
/// for the limit coordinate.
pub fn nbar(n: usize) -> Result<KripkeModel> {
    if n < 2 {
        return Err(Error::InvalidParameter("nbar requires n >= 2".into()));
    }
    let side = n + 1; // coordinates 1..=n plus inf
    let coord_name = |c: usize| {
        if c == n {
            "inf".to_string()
        } else {
            (c + 1).to_string()
        }
    };
    let index = |k: usize, l: usize| k * side + l;
    let mut states = Vec::with_capacity(side * side);
    for k in 0..side {
        for l in 0..side {
            states.push(format!("{}_{}", coord_name(k), coord_name(l)));
        }
    }
    let mut valuation = vec![BTreeSet::new(); side * side];
    valuation[index(0, 0)] = BTreeSet::from([0]); // (1,1)
    valuation[index(1, 0)] = BTreeSet::from([0]); // (2,1)

    let rows: Vec<Vec<usize>> = (0..side)
        .map(|k| (0..side).map(|l| index(k, l)).collect())
        .collect();
    let columns: Vec<Vec<usize>> = (0..side)
        .map(|l| (0..side).map(|k| index(k, l)).collect())
        .collect();
    // Finite anti-diagonals k + l = i over 1-based finite coordinates,
    // then the border of states with an infinite coordinate.
    let mut diagonals: Vec<Vec<usize>> = Vec::new();
    for i in 2..=2 * n {
        let members: Vec<usize> = (0..n)
            .filter_map(|k| {
                let sum = i as i64 - (k as i64 + 1);
                (1..=n as i64)
                    .contains(&sum)
                    .then(|| index(k, (sum - 1) as usize))
            })
            .collect();
        diagonals.push(members);
    }
    let border: Vec<usize> = (0..side * side)
        .filter(|&s| s / side == n || s % side == n)
        .collect();
    let mut agent3 = diagonals;
    agent3.push(border);

    let flags = vec![
        vec![true; side],
        vec![true; side],
        (0..agent3.len()).map(|b| b == agent3.len() - 1).collect(),
    ];
    KripkeModel::new_flagged(
        states,
        vec!["x".into()],
        vec!["1".into(), "2".into(), "3".into()],
        valuation,
        vec![rows, columns, agent3],
        flags,
    )
}

/// Chain of states `s0..sn` where only `s0` satisfies `x`, agent 1 groups
/// `{s1,s2}, {s3,s4}, ...` and agent 2 groups `{s0,s1}, {s2,s3}, ...`:
/// knowledge of `x` degrades one level per step along the chain.
pub fn email_chain(n: usize) -> Result<KripkeModel> {
    if n < 1 {
        return Err(Error::InvalidParameter(
            "email_chain requires n >= 1".into(),
        ));
    }
    let states: Vec<String> = (0..=n).map(|i| format!("s{i}")).collect();
    let mut valuation = vec![BTreeSet::new(); n + 1];
    valuation[0] = BTreeSet::from([0]);
    let mut agent1 = vec![vec![0]];
    let mut i = 1;
    while i <= n {
        let block: Vec<usize> = (i..=(i + 1).min(n)).collect();
        i += 2;
        agent1.push(block);
    }
    let mut agent2 = Vec::new();
    let mut i = 0;
    while i <= n {
        let block: Vec<usize> = (i..=(i + 1).min(n)).collect();
        i += 2;
        agent2.push(block);
    }
    KripkeModel::new(
        states,
        vec!["x".into()],
        vec!["1".into(), "2".into()],
        valuation,
        vec![agent1, agent2],
    )
}

/// The chain base extended with a third agent partitioning the states into
/// consecutive segments of sizes `1, 2, ..., m` plus one final segment of
/// size `m + 1` flagged `limit_infinite` (the stand-in for an infinite
/// block). Total states: `m(m+1)/2 + m + 1`.
pub fn growing_blocks(m: usize) -> Result<KripkeModel> {
    if m < 1 {
        return Err(Error::InvalidParameter(
            "growing_blocks requires m >= 1".into(),
        ));
    }
    let total = m * (m + 1) / 2 + m + 1;
    let base = email_chain(total - 1)?;
    let mut agent3 = Vec::new();
    let mut start = 0;
    for size in (1..=m).chain([m + 1]) {
        agent3.push((start..start + size).collect::<Vec<usize>>());
        start += size;
    }
    debug_assert_eq!(start, total);
    let mut flags3 = vec![false; agent3.len()];
    *flags3.last_mut().expect("at least one block") = true;

    let mut partitions: Vec<Vec<Vec<usize>>> = (0..2).map(|j| base.blocks(j).to_vec()).collect();
    partitions.push(agent3);
    let flags = vec![
        vec![false; partitions[0].len()],
        vec![false; partitions[1].len()],
        flags3,
    ];
    KripkeModel::new_flagged(
        base.states().to_vec(),
        vec!["x".into()],
        vec!["1".into(), "2".into(), "3".into()],
        (0..total).map(|s| base.valuation(s).clone()).collect(),
        partitions,
        flags,
    )
}

/// Seed-deterministic random model: each agent's partition is built by
/// shuffling the states and cutting the shuffle into blocks of at most
/// `max_block` states; each atom holds at each state with probability 1/2.
pub fn random_model(
    seed: u64,
    n_states: usize,
    n_agents: usize,
    n_atoms: usize,
    max_block: usize,
) -> Result<KripkeModel> {
    if n_states < 1 || n_agents < 1 || n_atoms < 1 || max_block < 1 {
        return Err(Error::InvalidParameter(
            "random_model requires all parameters >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states: Vec<String> = (0..n_states).map(|i| format!("s{i}")).collect();
    let atoms: Vec<String> = (0..n_atoms).map(|i| format!("x{i}")).collect();
    let agents: Vec<String> = (1..=n_agents).map(|j| j.to_string()).collect();
    let valuation = (0..n_states)
        .map(|_| {
            (0..n_atoms)
                .filter(|_| rng.gen_bool(0.5))
                .collect::<BTreeSet<usize>>()
        })
        .collect();
    let partitions = (0..n_agents)
        .map(|_| {
            let mut order: Vec<usize> = (0..n_states).collect();
            order.shuffle(&mut rng);
            let mut blocks = Vec::new();
            let mut start = 0;
            while start < n_states {
                let size = rng.gen_range(1..=max_block).min(n_states - start);
                let mut block: Vec<usize> = order[start..start + size].to_vec();
                block.sort_unstable();
                blocks.push(block);
                start += size;
            }
            blocks.sort_unstable_by_key(|block| block[0]);
            blocks
        })
        .collect();
    KripkeModel::new(states, atoms, agents, valuation, partitions)
}
