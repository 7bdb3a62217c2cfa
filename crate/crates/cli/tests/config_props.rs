use deepres::diagnostics::WindowRule;
use deepres::limits::{LimitMode, SmoothActivation};
use deepres::resnet::{Activation, DeltaMode};
use deepres_cli::config::{DataKind, Depths, ExperimentConfig};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        Just(0.0),
        Just(0.5),
        any::<f64>().prop_filter("finite", |v| v.is_finite())
    ]
}

fn depths() -> impl Strategy<Value = Depths> {
    prop_oneof![
        prop::collection::vec(1usize..100_000, 0..6).prop_map(Depths::List),
        (1usize..1000, 1usize..100_000).prop_map(|(min, max)| Depths::PowersOfTwo { min, max }),
    ]
}

prop_compose! {
    fn configs()(
        mnist in any::<bool>(),
        seeds in any::<[u64; 3]>(),
        sizes in any::<[u16; 6]>(),
        relu in any::<bool>(),
        sweep in depths(),
        limit_depths in depths(),
        floats in prop::collection::vec(finite(), 16),
        sde in any::<bool>(),
        curved in prop::option::of(finite()),
        window in prop::option::of(0usize..500),
        flags in any::<[bool; 3]>(),
        dir in "[a-z][a-z0-9_/-]{0,12}",
    ) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.dataset.kind = if mnist { DataKind::Mnist } else { DataKind::Synthetic };
        c.dataset.seed = seeds[0];
        c.dataset.n = sizes[0] as usize;
        c.dataset.d = sizes[1] as usize;
        c.dataset.k_steps = sizes[2] as usize;
        if mnist {
            c.dataset.images = Some("data/images.idx".into());
        }
        c.model.activation = if relu { Activation::Relu } else { Activation::Tanh };
        c.model.delta_mode = if relu { DeltaMode::PerLayer } else { DeltaMode::Shared };
        c.model.width = sizes[1] as usize;
        c.sweep.depths = sweep;
        c.sweep.seeds = sizes[3] as usize;
        c.sweep.seed = seeds[1];
        c.train.batch_size = sizes[4] as usize;
        c.train.learning_rate = floats[0];
        c.train.early_stop = floats[1];
        c.train.max_updates = sizes[5] as usize;
        c.diagnostics.window = match window {
            None => WindowRule::Sqrt,
            Some(w) => WindowRule::Fixed(2 * w + 1),
        };
        let th = &mut c.diagnostics.thresholds;
        th.h1_max_increment_slope = floats[2];
        th.h1_max_noise_fraction = floats[3];
        th.h2_min_beta = floats[4];
        th.max_rss_slope = floats[5];
        th.sparse_min_max_norm_slope = floats[6];
        let li = &mut c.limits;
        li.enabled = flags[0];
        li.mode = if sde { LimitMode::Sde } else { LimitMode::Ode };
        li.spec.a_bar = floats[7];
        li.spec.b_bar = floats[8];
        li.spec.q_a = floats[9];
        li.spec.q_b = floats[10];
        li.spec.alpha = floats[11];
        li.spec.beta = floats[12];
        li.spec.activation = match curved {
            None => SmoothActivation::Tanh,
            Some(c) => SmoothActivation::Curved { c },
        };
        li.x = floats[13];
        li.depths = limit_depths;
        li.rate_min = floats[14];
        li.rate_max = floats[15];
        li.require_decreasing = flags[1];
        li.ito_check = flags[2];
        li.seed = seeds[2];
        c.output_dir = dir.into();
        c
    }
}

proptest! {
    #[test]
    fn canonical_text_round_trips(c in configs()) {
        let text = c.to_canonical();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_canonical(), text);
    }

    #[test]
    fn parse_never_panics(text in "[a-z._ =#0-9,\n-]{0,200}") {
        let _ = ExperimentConfig::parse(&text);
    }
}
