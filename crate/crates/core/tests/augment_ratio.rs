use flashgan_core::augment::{flashgan_augment, oversample, plan_for, smote, Augmented, DEFAULT_IDLE_ATTEMPTS};
use flashgan_core::dataio::{generate, SynthConfig};
use flashgan_core::flashgan::{FlashGan, FlashGanConfig};
use flashgan_core::{HeteroGraph, Split};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn planted() -> HeteroGraph {
    generate(&SynthConfig { n_users: 400, n_products: 60, seed: 4, ..Default::default() }).unwrap()
}

fn train_counts(g: &HeteroGraph) -> (usize, usize) {
    let c = g.class_counts(Some(Split::Train));
    (c[1], c[0])
}

fn check(name: &str, g: &HeteroGraph, out: &Augmented, alpha: f64) {
    let (m, big) = train_counts(&out.graph);
    let (m0, big0) = train_counts(g);
    assert_eq!(big, big0, "{name}: majority changed");
    let want = alpha * big as f64;
    assert!((m as f64 - want).abs() <= 1.0, "{name} α={alpha}: minority {m}, wanted {want}");
    assert_eq!(m - m0, out.provenance.len());
    assert_eq!(out.graph.num_nodes(1), g.num_nodes(1));
}

#[test]
fn every_method_hits_the_alpha_grid() {
    let g = planted();
    let cfg = FlashGanConfig {
        generator_hidden: 32,
        generator_layers: 3,
        dropper_hidden: 16,
        discriminator_hidden: 16,
        ..Default::default()
    };
    // untrained droppers keep every candidate at p = 0.5 > 0.49
    let net = FlashGan::new(g.schema(), cfg, 1).unwrap();
    for step in 1u32..=10 {
        let alpha = f64::from(step) * 0.2;
        let budget = plan_for(&g, alpha).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from(step));
        let out = oversample(&g, alpha, &mut rng).unwrap();
        assert_eq!(out.provenance.len(), budget);
        check("oversample", &g, &out, alpha);
        check("smote", &g, &smote(&g, alpha, 5, &mut rng).unwrap(), alpha);
        let fg = flashgan_augment(&g, &net, &[0.49, 0.49], alpha, &mut rng, DEFAULT_IDLE_ATTEMPTS).unwrap();
        check("flashgan", &g, &fg, alpha);
    }
}

#[test]
fn ratio_below_current_is_rejected() {
    let g = planted();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(oversample(&g, 0.05, &mut rng), Err(flashgan_core::Error::NothingToAdd { .. })));
}
