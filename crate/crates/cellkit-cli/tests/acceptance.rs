//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured details (run with `--nocapture` to see them on success).
//!
//! The shared random suite holds 500 seeded models with at most 40 states,
//! 3 agents, 3 atoms, and blocks of at most 6 states. Several criteria also
//! sweep the generator families: grids `nbar(2..=8)`, chains
//! `email_chain(1..=50)`, and `growing_blocks(1..=8)`.

use std::io::Cursor;
use std::sync::OnceLock;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cellkit_core::epistemic::{
    cells, is_good_subset, proper_good_subsets, proper_good_subsets_unpruned,
};
use cellkit_core::formula::{parse, random_formula};
use cellkit_core::refinement::{
    bisimilar_across, distinguishing_formula, quotient, refine_final_worklist, refine_fixpoint,
    refine_fixpoint_naive,
};
use cellkit_core::scenarios::{
    coin_pair, email_chain, growing_blocks, nbar, random_model, singleton, twin_pair,
};
use cellkit_core::semantics::{extension, s5_suite, satisfies};
use cellkit_core::{KripkeModel, StateSet};

fn random_suite() -> &'static [KripkeModel] {
    static SUITE: OnceLock<Vec<KripkeModel>> = OnceLock::new();
    SUITE.get_or_init(|| {
        (0..500u64)
            .map(|seed| {
                let states = 1 + (seed as usize * 7 + 3) % 40;
                let agents = 1 + seed as usize % 3;
                let atoms = 1 + (seed as usize / 3) % 3;
                let max_block = 1 + (seed as usize * 5 + 1) % 6;
                random_model(seed, states, agents, atoms, max_block)
                    .expect("suite parameters are valid")
            })
            .collect()
    })
}

fn generator_suite() -> Vec<KripkeModel> {
    let mut models = Vec::new();
    for n in 2..=8 {
        models.push(nbar(n).expect("n >= 2"));
    }
    for n in 1..=50 {
        models.push(email_chain(n).expect("n >= 1"));
    }
    for m in 1..=8 {
        models.push(growing_blocks(m).expect("m >= 1"));
    }
    models
}

fn sampled_formulas(model: &KripkeModel, seed: u64, count: usize) -> Vec<cellkit_core::Formula> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| random_formula(&mut rng, model.atoms(), model.agents(), 3))
        .collect()
}

/// Criterion 1: zero S5 violations over 500 random models, 20 sampled
/// formulas each, within 60 seconds.
#[test]
fn c01_s5_soundness() {
    let started = Instant::now();
    let mut checks = 0usize;
    for (i, model) in random_suite().iter().enumerate() {
        // 10 sampled pairs = 20 sampled formulas per model.
        let report = s5_suite(model, 1000 + i as u64, 10);
        assert!(
            report.violations.is_empty(),
            "model {i}: {:?}",
            report.violations
        );
        checks += report.checks;
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs() < 60,
        "S5 sweep took {elapsed:?}, budget is 60 s"
    );
    println!("criterion 1 (S5 soundness): PASS — {checks} checks over 500 models in {elapsed:?}");
}

/// Criterion 2: the naive and fast engines produce identical final
/// partitions on the full suite (traces are compared whole, and the
/// worklist engine must agree on the final partition as well).
#[test]
fn c02_refinement_oracle_equivalence() {
    let mut compared = 0usize;
    for model in random_suite().iter().chain(&generator_suite()) {
        let naive = refine_fixpoint_naive(model);
        let fast = refine_fixpoint(model);
        assert_eq!(
            naive,
            fast,
            "engine disagreement on a {} state model",
            model.num_states()
        );
        assert_eq!(
            refine_final_worklist(model),
            *naive.final_partition(),
            "worklist disagreement on a {} state model",
            model.num_states()
        );
        compared += 1;
    }
    println!("criterion 2 (refinement oracle equivalence): PASS — {compared} models");
}

/// Criterion 3: on every suite model with at most 12 states, distinguishing
/// formulas exist exactly across final classes, verify by evaluation, and
/// respect the separating-round depth bound; equivalent pairs agree on
/// sampled formulas.
#[test]
fn c03_hennessy_milner_witnesses() {
    let mut pairs = 0usize;
    let mut witnesses = 0usize;
    let mut models = 0usize;
    for (i, model) in random_suite()
        .iter()
        .chain(&generator_suite())
        .enumerate()
        .filter(|(_, m)| m.num_states() <= 12)
    {
        models += 1;
        let trace = refine_fixpoint(model);
        let final_p = trace.final_partition();
        let samples = sampled_formulas(model, 40_000 + i as u64, 20);
        for s in 0..model.num_states() {
            for t in 0..model.num_states() {
                if s == t {
                    continue;
                }
                pairs += 1;
                match distinguishing_formula(model, s, t).expect("states in range") {
                    Some(f) => {
                        assert!(!final_p.same_class(s, t));
                        assert!(satisfies(model, s, &f).unwrap(), "witness fails at source");
                        assert!(!satisfies(model, t, &f).unwrap(), "witness holds at target");
                        let bound = trace.first_separating_round(s, t).unwrap();
                        assert!(
                            f.modal_depth() <= bound,
                            "depth {} exceeds separating round {bound}",
                            f.modal_depth()
                        );
                        witnesses += 1;
                    }
                    None => {
                        assert!(final_p.same_class(s, t));
                        for f in &samples {
                            assert_eq!(
                                satisfies(model, s, f).unwrap(),
                                satisfies(model, t, f).unwrap(),
                                "equivalent states disagree on {f}"
                            );
                        }
                    }
                }
            }
        }
    }
    println!(
        "criterion 3 (distinguishing witnesses): PASS — {witnesses} witnesses over {pairs} pairs in {models} models"
    );
}

/// Criterion 4: refinement separates every state of the truncated grids.
#[test]
fn c04_grid_separation() {
    let mut rounds = Vec::new();
    for n in 2..=8 {
        let model = nbar(n).unwrap();
        let trace = refine_fixpoint(&model);
        assert!(
            trace.final_partition().is_discrete(),
            "nbar({n}) did not separate all states"
        );
        rounds.push(format!("n={n}: {} rounds", trace.stabilized_at));
    }
    println!(
        "criterion 4 (grid separation): PASS — discrete for n=2..8 ({})",
        rounds.join(", ")
    );
}

/// Criterion 5: on chains, every round splits off exactly one new class
/// until the partition is discrete.
#[test]
fn c05_chain_ladder() {
    for n in 1..=50 {
        let model = email_chain(n).unwrap();
        let trace = refine_fixpoint(&model);
        assert!(
            trace.final_partition().is_discrete(),
            "chain {n} not discrete"
        );
        let counts = trace.class_counts();
        for pair in counts.windows(2) {
            assert_eq!(
                pair[1],
                pair[0] + 1,
                "chain {n}: a round added {} classes",
                pair[1] - pair[0]
            );
        }
        assert_eq!(*counts.last().unwrap(), n + 1);
    }
    println!("criterion 5 (chain ladder): PASS — one class per round for n=1..50");
}

/// Criterion 6: quotient idempotence, discreteness, the block-image
/// property, and formula agreement between each state and its class.
#[test]
fn c06_quotient_properties() {
    let mut models = 0usize;
    for (i, model) in random_suite().iter().chain(&generator_suite()).enumerate() {
        let q = quotient(model);
        // Discreteness: no two quotient states are equivalent.
        assert!(
            refine_fixpoint(&q.model).final_partition().is_discrete(),
            "quotient not discrete"
        );
        // Idempotence: quotienting again changes nothing.
        assert_eq!(quotient(&q.model).model, q.model, "quotient not idempotent");
        // Block images: every block maps onto exactly one quotient block.
        let final_p = refine_fixpoint(model);
        let final_p = final_p.final_partition();
        for j in 0..model.num_agents() {
            for block in model.blocks(j) {
                let mut image: Vec<usize> = block.iter().map(|&s| final_p.class_of(s)).collect();
                image.sort_unstable();
                image.dedup();
                assert!(
                    q.model.blocks(j).contains(&image),
                    "block image is not a quotient block"
                );
            }
        }
        // Formula agreement through the quotient map.
        for f in sampled_formulas(model, 60_000 + i as u64, 20) {
            let here = extension(model, &f).unwrap();
            let there = extension(&q.model, &f).unwrap();
            for s in 0..model.num_states() {
                assert_eq!(
                    here.contains(s),
                    there.contains(q.map[s]),
                    "state and its class disagree on {f}"
                );
            }
        }
        models += 1;
    }
    println!("criterion 6 (quotient properties): PASS — {models} models");
}

/// Criterion 7: unions of cells are good; the twin fixture keeps one twin
/// good; truncating the chain is not good, witnessed by an explicit formula.
#[test]
fn c07_good_subset_fixtures() {
    // Unions of cells over the random suite. All unions when there are at
    // most four cells, otherwise each single cell and the full union.
    let mut unions = 0usize;
    for model in random_suite() {
        let report = cells(model);
        let k = report.cells.len();
        let mut candidates: Vec<StateSet> = Vec::new();
        if k <= 4 {
            for mask in 1..(1usize << k) {
                let mut set = StateSet::empty(model.num_states());
                for (i, cell) in report.cells.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        for &s in cell {
                            set.insert(s);
                        }
                    }
                }
                candidates.push(set);
            }
        } else {
            for cell in &report.cells {
                candidates.push(StateSet::from_indices(
                    model.num_states(),
                    cell.iter().copied(),
                ));
            }
            candidates.push(StateSet::full(model.num_states()));
        }
        for set in candidates {
            assert!(
                is_good_subset(model, &set).unwrap(),
                "a union of cells failed the goodness check"
            );
            unions += 1;
            // Cross-check against the pairwise route on small models.
            if model.num_states() <= 12 {
                let restricted = model.restrict(&set).unwrap();
                for (new, old) in set.iter().enumerate() {
                    assert!(bisimilar_across(&restricted, model, new, old).unwrap());
                }
            }
        }
    }

    // Twin fixture: removing one of two equivalent states is good.
    let twins = twin_pair();
    let keep_a = twins.state_set(&["a"]).unwrap();
    assert!(is_good_subset(&twins, &keep_a).unwrap());
    let restricted = twins.restrict(&keep_a).unwrap();
    assert!(bisimilar_across(&restricted, &twins, 0, 0).unwrap());

    // Chain fixture: cutting the chain after s1 changes s1's theory.
    let chain = email_chain(2).unwrap();
    let prefix = chain.state_set(&["s0", "s1"]).unwrap();
    assert!(!is_good_subset(&chain, &prefix).unwrap());
    let restricted = chain.restrict(&prefix).unwrap();
    let s1 = chain.state_index("s1").unwrap();
    let s1_cut = restricted.state_index("s1").unwrap();
    assert!(!bisimilar_across(&restricted, &chain, s1_cut, s1).unwrap());
    let witness = parse("K1 (~K2 ~x)").unwrap();
    assert!(satisfies(&restricted, s1_cut, &witness).unwrap());
    assert!(!satisfies(&chain, s1, &witness).unwrap());

    println!("criterion 7 (good subsets): PASS — {unions} cell unions plus both fixtures");
}

/// Criterion 8: pruned and unpruned subset searches agree on every quotient
/// cell of at most 12 states, and the two-state fixtures enumerate exactly
/// as expected.
#[test]
fn c08_exclusion_free_consistency() {
    let twins = twin_pair();
    let twin_cells = cells(&twins);
    assert_eq!(
        proper_good_subsets(&twins, &twin_cells.cells[0]).unwrap(),
        vec![vec![0], vec![1]]
    );
    let coin = coin_pair();
    let coin_cells = cells(&coin);
    assert!(proper_good_subsets(&coin, &coin_cells.cells[0])
        .unwrap()
        .is_empty());

    let mut checked = 0usize;
    for model in random_suite().iter().chain(&generator_suite()) {
        let q = quotient(model);
        for cell in &cells(&q.model).cells {
            if cell.len() > 12 {
                continue;
            }
            let pruned = proper_good_subsets(&q.model, cell).unwrap();
            let unpruned = proper_good_subsets_unpruned(&q.model, cell).unwrap();
            assert_eq!(pruned, unpruned, "prune changed the result");
            checked += 1;
        }
    }
    println!("criterion 8 (exclusion-free self-consistency): PASS — {checked} quotient cells");
}

/// Criterion 9: the fast engine refines a 100000-state random model to its
/// fixpoint within 10 seconds.
#[test]
fn c09_large_model_performance() {
    let model = random_model(7, 100_000, 3, 1, 8).unwrap();
    let started = Instant::now();
    let trace = refine_fixpoint(&model);
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "refinement took {elapsed:?}, budget is 10 s"
    );
    println!(
        "criterion 9 (performance): PASS — 100000 states to fixpoint in {elapsed:?} ({} rounds, {} classes)",
        trace.stabilized_at,
        trace.final_partition().num_classes()
    );
}

/// Criterion 10: file round-trips are the identity, repeated CLI runs are
/// byte-identical, and the DOT output parses.
#[test]
fn c10_cli_determinism_and_round_trip() {
    // Round trip on all fixtures and a spread of generated models.
    let mut fixtures = vec![
        singleton(),
        coin_pair(),
        twin_pair(),
        nbar(2).unwrap(),
        nbar(4).unwrap(),
        email_chain(1).unwrap(),
        email_chain(7).unwrap(),
        growing_blocks(3).unwrap(),
    ];
    for seed in 0..10 {
        fixtures.push(random_model(seed, 17, 3, 2, 4).unwrap());
    }
    for model in &fixtures {
        let reloaded = KripkeModel::from_json(&model.to_json()).unwrap();
        assert_eq!(&reloaded, model, "save/load is not the identity");
    }

    // Byte-identical repeated runs across a spread of commands.
    let (_, grid, _) = invoke(&["gen", "nbar", "--n", "3"], "");
    let commands: Vec<(Vec<&str>, &str)> = vec![
        (vec!["gen", "chain", "--n", "12"], ""),
        (vec!["gen", "growing", "--m", "4"], ""),
        (
            vec![
                "gen",
                "random",
                "--seed",
                "3",
                "--states",
                "60",
                "--agents",
                "2",
                "--atoms",
                "2",
                "--max-block",
                "4",
            ],
            "",
        ),
        (vec!["eval", "-", "-f", "K1 (x | ~K2 x)"], grid.as_str()),
        (vec!["refine", "-", "--trace"], grid.as_str()),
        (vec!["quotient", "-", "--json"], grid.as_str()),
        (vec!["cells", "-", "--json"], grid.as_str()),
        (vec!["fanout", "-"], grid.as_str()),
        (vec!["dot", "-", "--trace"], grid.as_str()),
        (vec!["exclusion-free", "-"], grid.as_str()),
        (vec!["validate", "-"], grid.as_str()),
    ];
    for (args, stdin) in &commands {
        let (code_a, out_a, err_a) = invoke(args, stdin);
        let (code_b, out_b, err_b) = invoke(args, stdin);
        assert_eq!(code_a, code_b, "exit codes differ for {args:?}");
        assert_eq!(out_a, out_b, "stdout differs for {args:?}");
        assert_eq!(err_a, err_b, "stderr differs for {args:?}");
    }

    // DOT well-formedness, with and without class coloring.
    for model in &fixtures {
        let plain = cellkit_cli::dot_export(model, None);
        check_dot(&plain).unwrap_or_else(|e| panic!("plain DOT rejected: {e}\n{plain}"));
        let trace = refine_fixpoint(model);
        let colored = cellkit_cli::dot_export(model, Some(&trace));
        check_dot(&colored).unwrap_or_else(|e| panic!("colored DOT rejected: {e}\n{colored}"));
    }

    println!(
        "criterion 10 (CLI determinism and round-trip): PASS — {} fixtures, {} commands",
        fixtures.len(),
        commands.len()
    );
}

fn invoke(args: &[&str], stdin: &str) -> (i32, String, String) {
    let argv: Vec<String> = std::iter::once("cellkit")
        .chain(args.iter().copied())
        .map(String::from)
        .collect();
    let mut input = Cursor::new(stdin.as_bytes().to_vec());
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cellkit_cli::run(&argv, &mut input, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).expect("stdout is UTF-8"),
        String::from_utf8(err).expect("stderr is UTF-8"),
    )
}

// A checker for the undirected-graph DOT subset: tokenizes comments,
// quoted strings, identifiers, and punctuation, then parses
// `graph ID { (node | edge | defaults)* }` with `key=value` attribute lists.
fn check_dot(text: &str) -> Result<(), String> {
    #[derive(Debug, PartialEq)]
    enum Tok {
        Id(String),
        LBrace,
        RBrace,
        LBracket,
        RBracket,
        Equals,
        Comma,
        Semi,
        EdgeOp,
    }
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'{' => {
                toks.push(Tok::LBrace);
                i += 1;
            }
            b'}' => {
                toks.push(Tok::RBrace);
                i += 1;
            }
            b'[' => {
                toks.push(Tok::LBracket);
                i += 1;
            }
            b']' => {
                toks.push(Tok::RBracket);
                i += 1;
            }
            b'=' => {
                toks.push(Tok::Equals);
                i += 1;
            }
            b',' => {
                toks.push(Tok::Comma);
                i += 1;
            }
            b';' => {
                toks.push(Tok::Semi);
                i += 1;
            }
            b'-' if bytes.get(i + 1) == Some(&b'-') => {
                toks.push(Tok::EdgeOp);
                i += 2;
            }
            b'"' => {
                i += 1;
                let mut value = String::new();
                loop {
                    match bytes.get(i) {
                        Some(&b'"') => {
                            i += 1;
                            break;
                        }
                        Some(&b'\\') => {
                            let escaped = *bytes.get(i + 1).ok_or("dangling escape in string")?;
                            value.push(escaped as char);
                            i += 2;
                        }
                        Some(&b) => {
                            value.push(b as char);
                            i += 1;
                        }
                        None => return Err("unterminated string".into()),
                    }
                }
                toks.push(Tok::Id(value));
            }
            b if b.is_ascii_alphanumeric() || b == b'_' || b == b'.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'.')
                {
                    i += 1;
                }
                toks.push(Tok::Id(text[start..i].to_string()));
            }
            b => return Err(format!("unexpected byte `{}`", b as char)),
        }
    }

    let mut pos = 0;
    let expect_id = |toks: &[Tok], pos: &mut usize| -> Result<(), String> {
        match toks.get(*pos) {
            Some(Tok::Id(_)) => {
                *pos += 1;
                Ok(())
            }
            other => Err(format!("expected identifier, found {other:?}")),
        }
    };
    match toks.get(pos) {
        Some(Tok::Id(kw)) if kw == "graph" => pos += 1,
        other => return Err(format!("expected `graph`, found {other:?}")),
    }
    expect_id(&toks, &mut pos)?; // graph name
    if toks.get(pos) != Some(&Tok::LBrace) {
        return Err("expected `{`".into());
    }
    pos += 1;
    loop {
        match toks.get(pos) {
            Some(Tok::RBrace) => {
                pos += 1;
                break;
            }
            Some(Tok::Id(_)) => {
                pos += 1;
                if toks.get(pos) == Some(&Tok::EdgeOp) {
                    pos += 1;
                    expect_id(&toks, &mut pos)?;
                }
                if toks.get(pos) == Some(&Tok::LBracket) {
                    pos += 1;
                    if toks.get(pos) != Some(&Tok::RBracket) {
                        loop {
                            expect_id(&toks, &mut pos)?;
                            if toks.get(pos) != Some(&Tok::Equals) {
                                return Err("expected `=` in attribute".into());
                            }
                            pos += 1;
                            expect_id(&toks, &mut pos)?;
                            match toks.get(pos) {
                                Some(Tok::Comma) => pos += 1,
                                _ => break,
                            }
                        }
                    }
                    if toks.get(pos) != Some(&Tok::RBracket) {
                        return Err("expected `]`".into());
                    }
                    pos += 1;
                }
                if toks.get(pos) == Some(&Tok::Semi) {
                    pos += 1;
                }
            }
            other => return Err(format!("unexpected token in body: {other:?}")),
        }
    }
    if pos != toks.len() {
        return Err("trailing tokens after closing brace".into());
    }
    Ok(())
}
