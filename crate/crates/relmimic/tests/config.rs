use proptest::prelude::*;
use relmimic::config::parse_seeds;
use relmimic::{TrainConfig, Variant};

#[test]
fn default_text_round_trips() {
    let cfg = TrainConfig::default();
    let back = TrainConfig::parse_text(&cfg.to_text()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
}

#[test]
fn comments_blank_lines_and_overrides() {
    let text = "# desk run\n\niterations = 5  # short\nvariant = rm-nl-nl\nseeds = 3\nmax_grad_norm = none\n";
    let cfg = TrainConfig::parse_text(text).unwrap();
    assert_eq!(cfg.iterations, 5);
    assert_eq!(cfg.variant, Variant::All);
    assert_eq!(cfg.seeds, [0, 1, 2]);
    assert_eq!(cfg.max_grad_norm, None);
    assert_eq!(TrainConfig::parse_text(&cfg.to_text()).unwrap(), cfg);
}

#[test]
fn seeds_parse_as_count_or_list() {
    assert_eq!(parse_seeds("2").unwrap(), [0, 1]);
    assert_eq!(parse_seeds("5,").unwrap(), [5]);
    assert_eq!(parse_seeds("4, 9,1").unwrap(), [4, 9, 1]);
    assert!(parse_seeds("x").is_err());
}

#[test]
fn invalid_settings_are_rejected_with_context() {
    let err = TrainConfig::parse_text("iterations = ten").unwrap_err().to_string();
    assert!(err.contains("line 1") && err.contains("iterations"), "{err}");
    assert!(TrainConfig::parse_text("no_such_key = 1").is_err());
    assert!(TrainConfig::parse_text("just text").is_err());
    assert!(TrainConfig::parse_text("resolution = 16").is_err());
    assert!(TrainConfig::parse_text("learners = 0").is_err());
    assert!(TrainConfig::parse_text("gamma = 1.5").is_err());
    assert!(TrainConfig::parse_text("variant = nonsense").is_err());
}

#[test]
fn variant_names_and_networks() {
    for v in Variant::ALL {
        assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        assert_eq!(v.label().parse::<Variant>().unwrap(), v);
    }
    assert!(!Variant::Baseline.relational_reward());
    assert!(Variant::RewardOnly.relational_reward());
    assert_eq!(Variant::RewardValue.policy_stack(), relmimic::core::nn::Variant::Local);
    assert_eq!(Variant::RewardValue.value_stack(), relmimic::core::nn::Variant::NonLocal);
    assert_eq!(Variant::All.policy_stack(), relmimic::core::nn::Variant::NonLocal);
}

proptest! {
    #[test]
    fn numeric_settings_round_trip(
        iterations in 1usize..10_000,
        nu in 0.0f64..100.0,
        lr in 1e-6f64..1e-1,
        gamma in 0.0f64..=1.0,
        seeds in prop::collection::vec(0u64..1_000_000, 1..6),
    ) {
        let cfg = TrainConfig { iterations, nu, disc_lr: lr, gamma, seeds, ..TrainConfig::default() };
        let back = TrainConfig::parse_text(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
