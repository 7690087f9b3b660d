use leadopt::buffer::{BufferHandle, StepOutcome, ToolAction, TrajectoryRecord};
use leadopt::evaluate::{evaluate, improvement, improves, Direction, PropertySpec, BUILTIN_PROPERTIES};
use leadopt::fingerprint::{morgan_fp, morgan_fp_with, tanimoto, FingerprintParams};
use leadopt::hashing::{hash_str, hash_values};
use leadopt::molgraph::{canonical_form, parse_smiles, validate, write_smiles, MolGraph};
use leadopt::testbed::{random_molecule, CURATED};
use leadopt::tools::{build_instruction, default_tools, simulated_tool_step, ToolKind};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn molecule(seed: u64, max_atoms: usize) -> MolGraph {
    random_molecule(&mut ChaCha8Rng::seed_from_u64(seed), max_atoms)
}

fn shuffled(mol: &MolGraph, seed: u64) -> MolGraph {
    let mut perm: Vec<usize> = (0..mol.len()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    mol.permuted(&perm)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn write_parse_round_trip(seed in any::<u64>(), size in 1usize..40) {
        let mol = molecule(seed, size);
        let canon = canonical_form(&mol);
        let reparsed = parse_smiles(&write_smiles(&mol)).unwrap();
        prop_assert_eq!(canonical_form(&reparsed), canon.clone());
        let again = parse_smiles(&canon).unwrap();
        prop_assert_eq!(canonical_form(&again), canon);
        prop_assert!(validate(&again).valid);
    }

    #[test]
    fn canonical_form_ignores_atom_order(seed in any::<u64>(), perm_seed in any::<u64>(), size in 1usize..40) {
        let mol = molecule(seed, size);
        let perm = shuffled(&mol, perm_seed);
        prop_assert_eq!(canonical_form(&perm), canonical_form(&mol));
        prop_assert_eq!(morgan_fp(&perm, 2, 2048).unwrap(), morgan_fp(&mol, 2, 2048).unwrap());
    }

    #[test]
    fn tanimoto_is_a_similarity(a in any::<u64>(), b in any::<u64>(), radius in 0u32..4, nbits in prop::sample::select(vec![256usize, 1024, 2048])) {
        let (ma, mb) = (molecule(a, 30), molecule(b, 30));
        let fa = morgan_fp(&ma, radius, nbits).unwrap();
        let fb = morgan_fp(&mb, radius, nbits).unwrap();
        let ab = tanimoto(&fa, &fb).unwrap().value();
        prop_assert_eq!(ab, tanimoto(&fb, &fa).unwrap().value());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(tanimoto(&fa, &fa).unwrap().value(), 1.0);
    }

    #[test]
    fn evaluation_is_order_independent(seed in any::<u64>(), perm_seed in any::<u64>()) {
        let mol = molecule(seed, 30);
        let perm = shuffled(&mol, perm_seed);
        for id in BUILTIN_PROPERTIES {
            let spec = PropertySpec::builtin(id).unwrap();
            let v = evaluate(&spec, &mol).unwrap();
            prop_assert!(v.value.is_finite());
            prop_assert_eq!(v, evaluate(&spec, &perm).unwrap());
        }
    }

    #[test]
    fn improvement_agrees_with_direction(a in -10.0f64..10.0, b in -10.0f64..10.0) {
        for d in [Direction::Maximize, Direction::Minimize] {
            let imp = improvement(d, a, b);
            prop_assert_eq!(imp.improved, improves(d, b, a));
            prop_assert_eq!(imp.improved, imp.absolute > 0.0);
            if let Some(r) = imp.relative {
                prop_assert_eq!(r > 0.0, imp.improved);
            }
        }
    }

    #[test]
    fn simulated_tools_are_deterministic(seed in any::<u64>(), template in 0usize..6) {
        let mol = molecule(seed, 25);
        let prop = PropertySpec::builtin("qed").unwrap();
        for spec in default_tools() {
            let ToolKind::Builtin(profile) = spec.kind else { unreachable!() };
            let instr = build_instruction(&spec, template, &prop, &[]).unwrap();
            let a = simulated_tool_step(profile, &mol, &instr, seed ^ 7);
            let b = simulated_tool_step(profile, &mol, &instr, seed ^ 7);
            prop_assert_eq!(a.smiles(), b.smiles());
        }
    }

    #[test]
    fn retrieval_matches_brute_force(leads in prop::collection::vec(0usize..CURATED.len(), 1..12), query in 0usize..CURATED.len(), ris in prop::collection::vec(0.0f64..2.0, 12)) {
        let params = FingerprintParams::default();
        let mut buffer = BufferHandle::new(params);
        let mut records = Vec::new();
        for (i, &l) in leads.iter().enumerate() {
            let mol = parse_smiles(CURATED[l]).unwrap();
            let prop = if i % 3 == 2 { "bbbp" } else { "qed" };
            let outcome = StepOutcome { smiles: canonical_form(&mol), value: 0.1, sim: 1.0 };
            let rec = TrajectoryRecord::new(&mol, params, prop, vec![ToolAction::new("ToolA", i % 6)], vec![outcome], ris[i], &format!("r{i}")).unwrap();
            buffer.insert(rec.clone()).unwrap();
            records.push(rec);
        }
        let q = parse_smiles(CURATED[query]).unwrap();
        let qfp = morgan_fp_with(&q, params).unwrap();
        let expected = records
            .iter()
            .filter(|r| r.property_id == "qed")
            .map(|r| (tanimoto(&qfp, &r.lead_fp).unwrap().value(), r))
            .max_by(|(sa, a), (sb, b)| {
                sa.partial_cmp(sb).unwrap()
                    .then(a.final_ri.partial_cmp(&b.final_ri).unwrap())
                    .then(b.lead.cmp(&a.lead))
            });
        let got = buffer.top1_similar(&q, "qed");
        match (expected, got) {
            (None, None) => {}
            (Some((s, r)), Some((g, gs))) => {
                prop_assert_eq!(s, gs.value());
                prop_assert_eq!(&r.lead, &g.lead);
                prop_assert_eq!(r.final_ri, g.final_ri);
            }
            (e, g) => prop_assert!(false, "expected {:?}, got {:?}", e.map(|x| x.0), g.map(|x| x.1)),
        }
    }

    #[test]
    fn seeds_depend_on_every_component(a in any::<u64>(), b in any::<u64>()) {
        prop_assume!(a != b);
        prop_assert_ne!(hash_values(&[a, 1]), hash_values(&[b, 1]));
        prop_assert_ne!(hash_values(&[1, a]), hash_values(&[1, b]));
        prop_assert_eq!(hash_str("CCO"), hash_str("CCO"));
    }
}

#[test]
fn curated_corpus_round_trips() {
    for smi in CURATED {
        let mol = parse_smiles(smi).unwrap();
        let canon = canonical_form(&mol);
        assert_eq!(canonical_form(&parse_smiles(&write_smiles(&mol)).unwrap()), canon, "{smi}");
        for p in 0..5 {
            assert_eq!(canonical_form(&shuffled(&mol, p)), canon, "{smi} perm {p}");
        }
    }
}

#[test]
fn kekule_input_is_not_aromatized() {
    let a = parse_smiles("c1ccccc1").unwrap();
    let b = parse_smiles("C1=CC=CC=C1").unwrap();
    assert_ne!(canonical_form(&a), canonical_form(&b));
    assert_eq!(canonical_form(&parse_smiles(&canonical_form(&b)).unwrap()), canonical_form(&b));
}
