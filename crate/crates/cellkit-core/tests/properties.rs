//! Cross-module properties on seeded random models.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cellkit_core::epistemic::{cells, cells_union_find, is_good_subset, proper_good_subsets};
use cellkit_core::formula::{random_formula, Formula};
use cellkit_core::refinement::{
    bisimilar_across, distinguishing_formula, quotient, refine_final_worklist, refine_fixpoint,
    refine_fixpoint_naive, refine_step,
};
use cellkit_core::semantics::{extension, valid_in};
use cellkit_core::{KripkeModel, StateSet};

fn arb_model() -> impl Strategy<Value = KripkeModel> {
    (any::<u64>(), 1usize..14, 1usize..4, 1usize..4, 1usize..5).prop_map(
        |(seed, states, agents, atoms, max_block)| {
            cellkit_core::scenarios::random_model(seed, states, agents, atoms, max_block)
                .expect("parameters in range")
        },
    )
}

fn sample_formulas(model: &KripkeModel, seed: u64, count: usize, depth: usize) -> Vec<Formula> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_formula(&mut rng, model.atoms(), model.agents(), depth))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn file_round_trip_preserves_models(m in arb_model()) {
        let back = KripkeModel::from_json(&m.to_json()).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert!(back.validate().is_empty());
    }

    #[test]
    fn restricting_to_all_states_changes_nothing(m in arb_model()) {
        let all = StateSet::full(m.num_states());
        prop_assert_eq!(m.restrict(&all).unwrap(), m);
    }

    #[test]
    fn disjoint_union_adds_sizes(m in arb_model()) {
        let u = m.disjoint_union(&m).unwrap();
        prop_assert_eq!(u.num_states(), 2 * m.num_states());
        for j in 0..m.num_agents() {
            prop_assert_eq!(u.blocks(j).len(), 2 * m.blocks(j).len());
        }
        prop_assert!(u.validate().is_empty());
    }

    #[test]
    fn refinement_is_monotone_and_engines_agree(m in arb_model()) {
        let naive = refine_fixpoint_naive(&m);
        prop_assert!(naive.stabilized_at <= m.num_states().saturating_sub(1));
        for pair in naive.rounds.windows(2) {
            prop_assert!(pair[1].refines(&pair[0]));
            prop_assert!(pair[1].num_classes() > pair[0].num_classes());
        }
        let last = naive.final_partition();
        prop_assert_eq!(&refine_step(&m, last), last);

        let fast = refine_fixpoint(&m);
        prop_assert_eq!(&fast, &naive);
        prop_assert_eq!(&refine_final_worklist(&m), naive.final_partition());
    }

    #[test]
    fn quotient_preserves_every_formula(m in arb_model()) {
        let q = quotient(&m);
        prop_assert!(refine_fixpoint(&q.model).final_partition().is_discrete());
        for f in sample_formulas(&m, 23, 5, 3) {
            let in_model = extension(&m, &f).unwrap();
            let in_quotient = extension(&q.model, &f).unwrap();
            for s in 0..m.num_states() {
                prop_assert_eq!(in_model.contains(s), in_quotient.contains(q.map[s]));
            }
        }
    }

    #[test]
    fn witnesses_exist_exactly_across_classes(m in arb_model()) {
        let trace = refine_fixpoint(&m);
        let final_p = trace.final_partition();
        for s in 0..m.num_states().min(8) {
            for t in 0..m.num_states().min(8) {
                if s == t { continue; }
                match distinguishing_formula(&m, s, t).unwrap() {
                    Some(f) => {
                        prop_assert!(!final_p.same_class(s, t));
                        let ext = extension(&m, &f).unwrap();
                        prop_assert!(ext.contains(s) && !ext.contains(t));
                        prop_assert!(f.modal_depth() <= trace.first_separating_round(s, t).unwrap());
                    }
                    None => prop_assert!(final_p.same_class(s, t)),
                }
            }
        }
    }

    #[test]
    fn cell_constructions_agree(m in arb_model()) {
        prop_assert_eq!(cells(&m), cells_union_find(&m));
    }

    #[test]
    fn negation_duality_and_introspection(m in arb_model()) {
        for f in sample_formulas(&m, 91, 4, 2) {
            let pos = extension(&m, &f).unwrap();
            let neg = extension(&m, &Formula::not(f.clone())).unwrap();
            prop_assert_eq!(neg, pos.complement());
            for agent in m.agents() {
                let once = Formula::know(agent.clone(), f.clone());
                let twice = Formula::know(agent.clone(), once.clone());
                prop_assert_eq!(extension(&m, &once).unwrap(), extension(&m, &twice).unwrap());
            }
        }
    }

    #[test]
    fn valid_formulas_survive_necessitation(m in arb_model()) {
        for f in sample_formulas(&m, 37, 3, 2) {
            for agent in m.agents() {
                let schema = Formula::implies(
                    Formula::know(agent.clone(), f.clone()),
                    f.clone(),
                );
                prop_assert!(valid_in(&m, &schema).unwrap());
                prop_assert!(valid_in(&m, &Formula::know(agent.clone(), schema)).unwrap());
            }
        }
    }
}

#[test]
fn unions_of_cells_are_good_subsets() {
    for seed in 0..30u64 {
        let m = cellkit_core::scenarios::random_model(
            seed,
            2 + (seed as usize * 3) % 18,
            1 + (seed as usize) % 3,
            1,
            1 + (seed as usize) % 4,
        )
        .unwrap();
        let report = cells(&m);
        // Every single cell, and the union of everything.
        for cell in &report.cells {
            let set = StateSet::from_indices(m.num_states(), cell.iter().copied());
            assert!(is_good_subset(&m, &set).unwrap(), "seed {seed}");
        }
        assert!(is_good_subset(&m, &StateSet::full(m.num_states())).unwrap());
        // All unions when there are few cells.
        let k = report.cells.len();
        if (2..=4).contains(&k) {
            for mask in 1..(1usize << k) {
                let mut set = StateSet::empty(m.num_states());
                for (i, cell) in report.cells.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        for &s in cell {
                            set.insert(s);
                        }
                    }
                }
                assert!(is_good_subset(&m, &set).unwrap(), "seed {seed} mask {mask}");
            }
        }
    }
}

#[test]
fn good_subsets_compose() {
    // If A is good in K and B is good in the restriction to A, then B is
    // good in K.
    let mut composed = 0;
    for seed in 0..40u64 {
        let m =
            cellkit_core::scenarios::random_model(seed, 3 + (seed as usize) % 6, 2, 1, 3).unwrap();
        let report = cells(&m);
        for cell in &report.cells {
            if cell.len() > 8 {
                continue;
            }
            for good_a in proper_good_subsets(&m, cell).unwrap() {
                let a = StateSet::from_indices(m.num_states(), good_a.iter().copied());
                let restricted = m.restrict(&a).unwrap();
                let inner_cells = cells(&restricted);
                for inner in &inner_cells.cells {
                    if inner.len() > 8 {
                        continue;
                    }
                    for good_b in proper_good_subsets(&restricted, inner).unwrap() {
                        // Map back to states of the original model.
                        let names: Vec<&str> =
                            good_b.iter().map(|&s| restricted.state_name(s)).collect();
                        let b = m.state_set(&names).unwrap();
                        assert!(
                            is_good_subset(&m, &b).unwrap(),
                            "seed {seed}: {names:?} good in restriction but not in model"
                        );
                        composed += 1;
                    }
                }
            }
        }
    }
    assert!(composed > 0, "the search never exercised composition");
}

#[test]
fn good_subset_agrees_with_pairwise_bisimilarity() {
    for seed in 0..20u64 {
        let m =
            cellkit_core::scenarios::random_model(seed, 2 + (seed as usize) % 8, 2, 1, 3).unwrap();
        let report = cells(&m);
        let cell = &report.cells[0];
        if cell.len() < 2 {
            continue;
        }
        // Drop the last state of the first cell and compare the two routes.
        let mut kept: Vec<usize> = cell.clone();
        kept.pop();
        if kept.is_empty() {
            continue;
        }
        let mut subset = StateSet::from_indices(m.num_states(), kept.iter().copied());
        for &other in report.cells.iter().skip(1).flatten() {
            subset.insert(other);
        }
        let batch = is_good_subset(&m, &subset).unwrap();
        let restricted = m.restrict(&subset).unwrap();
        let pairwise = subset
            .iter()
            .enumerate()
            .all(|(new, old)| bisimilar_across(&restricted, &m, new, old).unwrap());
        assert_eq!(batch, pairwise, "seed {seed}");
    }
}
