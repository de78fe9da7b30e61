mod common;

use flashgan_core::flashgan::{
    attach_full, drop_edges, AugmentedSubgraph, EdgeMask, FlashGan, FlashGanConfig, LossMode, DISCRIMINATOR_GROUP,
    GENERATOR_GROUP,
};
use flashgan_core::hetgraph::induced_subgraph;
use flashgan_core::neural::{grad_check, GradCheckConfig, Tape, Tensor};
use flashgan_core::HeteroGraph;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn toy_config(mode: LossMode, k: usize) -> FlashGanConfig {
    FlashGanConfig {
        noise_dim: 4,
        generator_hidden: 8,
        generator_layers: 3,
        mixer_dims: vec![6, 4],
        dropper_hidden: 8,
        discriminator_hidden: 8,
        synthetic_per_subgraph: k,
        loss_mode: mode,
    }
}

fn random_selection(rng: &mut ChaCha8Rng, g: &HeteroGraph) -> Vec<Vec<usize>> {
    let mut sel: Vec<Vec<usize>> =
        (0..2).map(|t| (0..g.num_nodes(t)).filter(|_| rng.random_bool(0.7)).collect()).collect();
    if sel[0].is_empty() {
        sel[0].push(0);
    }
    sel
}

fn keep_mask(net: &FlashGan, aug: &AugmentedSubgraph<'_>, noise: &Tensor, eta: f64) -> EdgeMask {
    let mut tape = Tape::new(&net.params);
    let pass = net.generator_pass(&mut tape, aug, noise).unwrap();
    let keep = pass.keep_values(&tape);
    let m = drop_edges(aug, &keep, &[eta, eta]).unwrap();
    if m.is_success() { m } else { drop_edges(aug, &keep, &[0.0, 0.0]).unwrap() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn candidate_count_and_conservation(seed in any::<u64>(), nu in 1usize..=12, np in 0usize..=5, k in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = common::random_graph(&mut rng, nu, np.max(1), 0.3);
        let sel = random_selection(&mut rng, &g);
        let compatible = sel[0].len() + sel[1].len();
        let aug = attach_full(induced_subgraph(&g, &sel).unwrap(), k).unwrap();
        prop_assert_eq!(aug.candidate_count(), 2 * k * compatible);

        let net = FlashGan::new(g.schema(), toy_config(LossMode::Surrogate, k), seed).unwrap();
        let noise = net.sample_noise(&mut rng, k);
        let mut tape = Tape::new(&net.params);
        let pass = net.generator_pass(&mut tape, &aug, &noise).unwrap();
        let keep = pass.keep_values(&tape);
        let eta: f64 = rng.random_range(0.0..1.0);
        let mask = drop_edges(&aug, &keep, &[eta, eta]).unwrap();
        let kept = aug.edge_lists(Some(&mask));
        for et in 0..g.num_edge_types() {
            for e in aug.base.edges(et) {
                prop_assert!(kept[et].binary_search(e).is_ok(), "real edge {:?} lost", e);
            }
        }
        prop_assert!(mask.retained_count() <= aug.candidate_count() / 2);

        let none = drop_edges(&aug, &keep, &[1.0, 1.0]).unwrap();
        prop_assert!(none.survivors.is_empty());
        prop_assert_eq!(none.retained_count(), 0);
        let all = drop_edges(&aug, &keep, &[0.0, 0.0]).unwrap();
        prop_assert_eq!(&all.survivors, &(0..k).collect::<Vec<_>>());
        prop_assert_eq!(all.retained_count(), aug.candidate_count() / 2);
    }
}

/// Finite-difference checks of both losses on 20 random toy subgraphs
/// (≤ 10 users, ≤ 4 products, k ≤ 3).
#[test]
fn losses_match_central_differences() {
    let cfg = GradCheckConfig { eps: 1e-5, coords_per_tensor: 4, seed: 0 };
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut seed = 0u64;
    while checked < 20 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nu = rng.random_range(2..=10);
        let np = rng.random_range(1..=4);
        let k = rng.random_range(1..=3);
        let g = common::random_graph(&mut rng, nu, np, 0.4);
        let sub = induced_subgraph(&g, &random_selection(&mut rng, &g)).unwrap();
        let aug = attach_full(sub, k).unwrap();
        let gamma = aug.real_minority_edges();
        if gamma.iter().all(Vec::is_empty) {
            continue;
        }
        checked += 1;
        for mode in [LossMode::Surrogate, LossMode::Literal] {
            let net = FlashGan::new(g.schema(), toy_config(mode, k), seed).unwrap();
            let noise = net.sample_noise(&mut rng, k);
            let mask = keep_mask(&net, &aug, &noise, rng.random_range(0.3..0.7));
            let ids = net.params.group_ids(GENERATOR_GROUP);
            let r = grad_check(
                &net.params,
                &ids,
                |tape| {
                    let pass = net.generator_pass(tape, &aug, &noise)?;
                    Ok(net.generator_loss(tape, &pass, &mask)?.expect("retained edges"))
                },
                cfg,
            )
            .unwrap();
            assert!(r.max_rel_error <= 1e-4, "L_G {mode:?} seed {seed}: {r:?}");
            worst = worst.max(r.max_rel_error);

            if mode == LossMode::Literal {
                continue;
            }
            let (real, fake) = {
                let mut tape = Tape::new(&net.params);
                let pass = net.generator_pass(&mut tape, &aug, &noise).unwrap();
                let real: Vec<Tensor> = aug
                    .candidates
                    .iter()
                    .zip(&gamma)
                    .map(|(set, edges)| aug.embed_real_values(&tape, &pass.hidden, set, edges))
                    .collect();
                let fake: Vec<Tensor> = pass
                    .edge_embed
                    .iter()
                    .zip(&mask.retained)
                    .map(|(&h, kept)| {
                        let v = tape.value(h);
                        let mut data = Vec::new();
                        for &i in kept {
                            data.extend_from_slice(v.row(i));
                        }
                        Tensor::from_vec(kept.len(), v.cols, data)
                    })
                    .collect();
                (real, fake)
            };
            let ids = net.params.group_ids(DISCRIMINATOR_GROUP);
            let r = grad_check(
                &net.params,
                &ids,
                |tape| Ok(net.discriminator_loss(tape, &real, &fake)?.expect("both sides present")),
                cfg,
            )
            .unwrap();
            assert!(r.max_rel_error <= 1e-4, "L_D seed {seed}: {r:?}");
            worst = worst.max(r.max_rel_error);
        }
    }
    eprintln!("worst relative error over {checked} subgraphs: {worst:.3e}");
}
