//! Cells, common knowledge, fanout reporting, and good subsets.
//!
//! A cell is a minimal set of states closed under every agent's blocks: the
//! connected component of the graph where two states are adjacent when some
//! agent cannot tell them apart. An event is common knowledge at a state
//! when the state's whole cell lies inside the event.
//!
//! A subset of states is *good* when restricting the model to it changes no
//! surviving state's theory: every member still satisfies exactly the same
//! formulas. A cell is *exclusion-free* when no proper non-empty subset of
//! it is good, so nothing can be cut away without someone's knowledge
//! noticing; this is checked on the quotient, where equivalent states have
//! already been merged.

use std::collections::VecDeque;

use crate::model::{KripkeModel, StateSet};
use crate::refinement::{quotient, refine_fixpoint, Partition};
use crate::{Error, Result};

/// Largest cell size accepted by the exhaustive subset searches.
pub const SUBSET_SEARCH_LIMIT: usize = 20;

/// The cells of a model, in order of their smallest state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellReport {
    pub cells: Vec<Vec<usize>>,
    pub cell_of: Vec<usize>,
}

impl CellReport {
    pub fn cell_containing(&self, state: usize) -> &[usize] {
        &self.cells[self.cell_of[state]]
    }
}

/// Connected components under block adjacency, by breadth-first search.
pub fn cells(model: &KripkeModel) -> CellReport {
    let n = model.num_states();
    let mut cell_of = vec![usize::MAX; n];
    let mut cells = Vec::new();
    let mut block_done: Vec<Vec<bool>> = (0..model.num_agents())
        .map(|j| vec![false; model.blocks(j).len()])
        .collect();
    for start in 0..n {
        if cell_of[start] != usize::MAX {
            continue;
        }
        let id = cells.len();
        let mut members = Vec::new();
        let mut queue = VecDeque::from([start]);
        cell_of[start] = id;
        while let Some(s) = queue.pop_front() {
            members.push(s);
            for (j, done) in block_done.iter_mut().enumerate() {
                let b = model.block_index_of(j, s);
                if done[b] {
                    continue;
                }
                done[b] = true;
                for &t in &model.blocks(j)[b] {
                    if cell_of[t] == usize::MAX {
                        cell_of[t] = id;
                        queue.push_back(t);
                    }
                }
            }
        }
        members.sort_unstable();
        cells.push(members);
    }
    CellReport { cells, cell_of }
}

/// Same components, computed by union-find. Exists as an independent route
/// for cross-checking [`cells`].
pub fn cells_union_find(model: &KripkeModel) -> CellReport {
    let n = model.num_states();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut s: usize) -> usize {
        while parent[s] != s {
            parent[s] = parent[parent[s]];
            s = parent[s];
        }
        s
    }
    for j in 0..model.num_agents() {
        for block in model.blocks(j) {
            for pair in block.windows(2) {
                let a = find(&mut parent, pair[0]);
                let b = find(&mut parent, pair[1]);
                if a != b {
                    let (low, high) = if a < b { (a, b) } else { (b, a) };
                    parent[high] = low;
                }
            }
        }
    }
    let labels: Vec<usize> = (0..n).map(|s| find(&mut parent, s)).collect();
    let partition = Partition::from_assignment(&labels);
    CellReport {
        cell_of: (0..n).map(|s| partition.class_of(s)).collect(),
        cells: partition.classes().to_vec(),
    }
}

/// Whether `event` is common knowledge at `state`: the cell containing the
/// state lies inside the event. The state must belong to the event.
pub fn common_knowledge(model: &KripkeModel, event: &StateSet, state: usize) -> Result<bool> {
    if state >= model.num_states() {
        return Err(Error::StateIndex(state));
    }
    if !event.contains(state) {
        return Err(Error::StateOutsideEvent(
            model.state_name(state).to_string(),
        ));
    }
    let report = cells(model);
    Ok(report
        .cell_containing(state)
        .iter()
        .all(|&s| event.contains(s)))
}

/// Block sizes within one cell, with the blocks that stand for truncated
/// infinite blocks called out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FanoutReport {
    /// Per agent: the largest block size occurring inside the cell.
    pub max_block_size: Vec<usize>,
    /// `(agent, block index)` of blocks in the cell flagged `limit_infinite`.
    pub flagged: Vec<(usize, usize)>,
}

/// Fanout of one cell (a member list as produced by [`cells`]). Blocks
/// meeting the cell lie inside it, so sizes are measured on whole blocks.
pub fn fanout_report(model: &KripkeModel, cell: &[usize]) -> FanoutReport {
    let mut flagged = Vec::new();
    let max_block_size = (0..model.num_agents())
        .map(|j| {
            let mut seen: Vec<usize> = cell.iter().map(|&s| model.block_index_of(j, s)).collect();
            seen.sort_unstable();
            seen.dedup();
            let mut largest = 0;
            for b in seen {
                largest = largest.max(model.blocks(j)[b].len());
                if model.block_flagged_limit_infinite(j, b) {
                    flagged.push((j, b));
                }
            }
            largest
        })
        .collect();
    FanoutReport {
        max_block_size,
        flagged,
    }
}

/// Whether restricting the model to `subset` preserves the theory of every
/// surviving state: each member satisfies the same formulas in the
/// restriction as in the full model. Decided by one refinement of the
/// disjoint union of the restriction and the model.
pub fn is_good_subset(model: &KripkeModel, subset: &StateSet) -> Result<bool> {
    let restricted = model.restrict(subset)?;
    let union = restricted.disjoint_union(model)?;
    let trace = refine_fixpoint(&union);
    let final_p = trace.final_partition();
    let offset = restricted.num_states();
    Ok(subset
        .iter()
        .enumerate()
        .all(|(new, old)| final_p.same_class(new, offset + old)))
}

/// All proper non-empty good subsets of a cell, by exhaustive search with a
/// necessary-condition filter: if cutting down to `A` preserves theories,
/// then every removed state must be equivalent to a surviving state in each
/// of its blocks that `A` still meets. Candidates passing the filter are
/// always re-verified with the full check.
pub fn proper_good_subsets(model: &KripkeModel, cell: &[usize]) -> Result<Vec<Vec<usize>>> {
    search_good_subsets(model, cell, true)
}

/// As [`proper_good_subsets`], without the candidate filter.
pub fn proper_good_subsets_unpruned(
    model: &KripkeModel,
    cell: &[usize],
) -> Result<Vec<Vec<usize>>> {
    search_good_subsets(model, cell, false)
}

fn search_good_subsets(
    model: &KripkeModel,
    cell: &[usize],
    prune: bool,
) -> Result<Vec<Vec<usize>>> {
    let size = cell.len();
    if size > SUBSET_SEARCH_LIMIT {
        return Err(Error::CellTooLarge {
            size,
            limit: SUBSET_SEARCH_LIMIT,
        });
    }
    let cell_set = StateSet::from_indices(model.num_states(), cell.iter().copied());
    let cell_model = model.restrict(&cell_set)?;
    let classes = refine_fixpoint(&cell_model);
    let final_p = classes.final_partition();

    let mut found = Vec::new();
    // Subsets ordered by size, then lexicographically by member positions.
    for k in 1..size {
        let mut combo: Vec<usize> = (0..k).collect();
        loop {
            let keep = StateSet::from_indices(size, combo.iter().copied());
            if (!prune || survives_filter(&cell_model, final_p, &keep))
                && is_good_subset(&cell_model, &keep)?
            {
                found.push(combo.iter().map(|&i| cell[i]).collect());
            }
            if !next_combination(&mut combo, size) {
                break;
            }
        }
    }
    Ok(found)
}

/// Advance to the next k-combination of `0..n` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] != i + n - k {
            combo[i] += 1;
            for p in i + 1..k {
                combo[p] = combo[p - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Necessary condition for `keep` to be good in `cell_model`: every removed
/// state must share a final refinement class with some kept state in each of
/// its blocks that still meets `keep`.
fn survives_filter(cell_model: &KripkeModel, final_p: &Partition, keep: &StateSet) -> bool {
    for removed in 0..cell_model.num_states() {
        if keep.contains(removed) {
            continue;
        }
        for j in 0..cell_model.num_agents() {
            let block = &cell_model.blocks(j)[cell_model.block_index_of(j, removed)];
            let survivors = block.iter().filter(|&&s| keep.contains(s));
            let mut meets = false;
            let mut twin = false;
            for &s in survivors {
                meets = true;
                if final_p.same_class(s, removed) {
                    twin = true;
                    break;
                }
            }
            if meets && !twin {
                return false;
            }
        }
    }
    true
}

/// Verdict for one quotient cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellVerdict {
    /// Quotient state indices forming the cell.
    pub cell: Vec<usize>,
    /// True when the cell has no proper non-empty good subset.
    pub exclusion_free: bool,
}

/// For every cell of the quotient, whether it is exclusion-free: no model
/// can map onto part of the cell while its states keep their theories.
/// Checked on the quotient because the property concerns the merged,
/// formula-separated image, not any particular presentation of it.
pub fn exclusion_free(model: &KripkeModel) -> Result<Vec<CellVerdict>> {
    let q = quotient(model);
    let report = cells(&q.model);
    report
        .cells
        .iter()
        .map(|cell| {
            let good = proper_good_subsets(&q.model, cell)?;
            Ok(CellVerdict {
                cell: cell.clone(),
                exclusion_free: good.is_empty(),
            })
        })
        .collect()
}
