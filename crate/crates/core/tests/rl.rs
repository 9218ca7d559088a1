mod common;

use std::sync::Arc;

use lifecycle::config::{Scale, ScenarioConfig};
use lifecycle::model::{Action, ActionSet, AgentState, Employment};
use lifecycle::policy::{Policy, PolicyHandle};
use lifecycle::rl::{train, ActMode, Encoder, Mlp, RlPolicy, TrainConfig, TrainedPolicy, N_ACTIONS, N_FEATURES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn backprop_matches_central_differences() {
    for seed in 0..4 {
        let (e_pi, e_v) = common::gradient_check(seed, 150);
        assert!(e_pi < 1e-4, "policy relative error {e_pi}");
        assert!(e_v < 1e-4, "value relative error {e_v}");
    }
}

/// Policy whose logits ignore the state: zero weights, output bias `ln p`.
fn fixed_policy(cfg: &ScenarioConfig, probs: [f64; N_ACTIONS]) -> TrainedPolicy {
    let env = cfg.env();
    let mut policy = Mlp::zeros(&[N_FEATURES, 4, N_ACTIONS], 0.01);
    for (b, p) in policy.layers[1].b.iter_mut().zip(probs) {
        *b = p.ln();
    }
    TrainedPolicy {
        model_hash: cfg.model_hash(),
        encoder: Encoder::new(&env, &cfg.train),
        policy,
        value: Mlp::zeros(&[N_FEATURES, 4, 1], 0.01),
        telemetry: Vec::new(),
    }
}

fn state(age: u32, employment: Employment) -> AgentState {
    AgentState {
        employment,
        age,
        pension_accrued: 4_000.0,
        prev_wage: 30_000.0,
        time_in_state: 2,
        wage: 31_000.0,
    }
}

#[test]
fn sampled_actions_follow_the_policy_distribution() {
    let cfg = ScenarioConfig::preset(Scale::Desk);
    let env = cfg.env();
    let probs = [0.2, 0.5, 0.3];
    let handle: PolicyHandle = Arc::new(RlPolicy::new(Arc::new(fixed_policy(&cfg, probs)), ActMode::Sample));
    let s = state(66, Employment::Employed);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 60_000;
    let mut counts = [0usize; N_ACTIONS];
    for _ in 0..n {
        counts[handle.act(&env, &s, &mut rng).unwrap().code() as usize] += 1;
    }
    let chi2: f64 = (0..N_ACTIONS)
        .map(|j| {
            let e = probs[j] * n as f64;
            (counts[j] as f64 - e).powi(2) / e
        })
        .sum();
    let critical = ChiSquared::new(2.0).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi2 {chi2} counts {counts:?}");
}

#[test]
fn infeasible_actions_are_never_chosen() {
    let cfg = ScenarioConfig::preset(Scale::Desk);
    let env = cfg.env();
    let trained = Arc::new(fixed_policy(&cfg, [0.01, 0.01, 0.98]));
    let young = state(40, Employment::Unemployed);
    let retired = state(66, Employment::Retired);
    let p = trained.probabilities(&env, &young);
    assert_eq!(p[2], 0.0);
    assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    for mode in [ActMode::Sample, ActMode::Greedy] {
        let handle = RlPolicy::new(trained.clone(), mode);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            assert_ne!(handle.act(&env, &young, &mut rng).unwrap(), Action::Retire);
            assert_eq!(handle.act(&env, &retired, &mut rng).unwrap(), Action::Stay);
        }
    }
    let greedy = RlPolicy::new(trained, ActMode::Greedy);
    let s = state(66, Employment::Employed);
    assert_eq!(greedy.greedy(&env, &s).unwrap().unwrap(), Action::Retire);
}

/// One decision at age 69 for an unemployed entrant: with no disutility of
/// work, switching to employment pays far more than any alternative.
fn one_decision() -> ScenarioConfig {
    let mut cfg = ScenarioConfig::preset(Scale::Desk);
    cfg.model.first_age = 69;
    cfg.model.last_age = 69;
    cfg.model.reward.kappa = 0.0;
    cfg.simulation.panels.clear();
    cfg.train = TrainConfig {
        total_env_steps: 20_000,
        ..TrainConfig::default()
    };
    cfg
}

#[test]
fn learns_dominant_action() {
    let cfg = one_decision();
    let trained = train(&cfg, &cfg.train).unwrap();
    let env = cfg.env();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mass = 0.0;
    for _ in 0..50 {
        let s = env.initial_state(&mut rng);
        mass += trained.probabilities(&env, &s)[Action::Switch.code() as usize];
    }
    assert!(mass / 50.0 > 0.95, "P(Switch) = {}", mass / 50.0);
}

#[test]
fn heavy_entropy_bonus_keeps_policy_uniform() {
    let mut cfg = one_decision();
    cfg.train.entropy_coefficient = 100.0;
    cfg.train.entropy_coefficient_final = None;
    let trained = train(&cfg, &cfg.train).unwrap();
    let env = cfg.env();
    let s = env.initial_state(&mut ChaCha8Rng::seed_from_u64(2));
    let p = trained.probabilities(&env, &s);
    assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 0.05), "{p:?}");
}

#[test]
fn training_is_reproducible() {
    let mut cfg = one_decision();
    cfg.model.first_age = 66;
    cfg.train.total_env_steps = 4_000;
    let bytes = |t: &TrainedPolicy| {
        let mut out = Vec::new();
        t.write_to(&mut out).unwrap();
        out
    };
    let a = train(&cfg, &cfg.train).unwrap();
    let b = train(&cfg, &cfg.train).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    cfg.train.seed += 1;
    let c = train(&cfg, &cfg.train).unwrap();
    assert_ne!(bytes(&a), bytes(&c));

    let back = TrainedPolicy::read_from(&mut bytes(&a).as_slice()).unwrap();
    assert_eq!(back, a);
    let mut cut = bytes(&a);
    cut.truncate(cut.len() / 2);
    assert!(TrainedPolicy::read_from(&mut cut.as_slice()).is_err());
}

#[test]
fn critic_fits_constant_reward_returns() {
    // every year pays the binding net floor and there is no work
    // disutility, so the return from an age depends on the age alone
    let mut cfg = ScenarioConfig::preset(Scale::Desk);
    cfg.model.first_age = 60;
    cfg.model.reward.kappa = 0.0;
    cfg.model.reward.gamma = 0.9;
    cfg.fiscal.net_floor = 200_000.0;
    cfg.simulation.panels.clear();
    cfg.train = TrainConfig {
        total_env_steps: 150_000,
        ..TrainConfig::default()
    };
    let env = cfg.env();
    let r = 200_000f64.ln() / cfg.model.reward.reward_scale;
    let terminal = env.terminal_value_for_pension(0.0).unwrap();
    let trained = train(&cfg, &cfg.train).unwrap();
    let g = cfg.model.reward.gamma;
    for age in [60, 63, 66, 70] {
        let n = (cfg.model.last_age - age + 1) as i32;
        let expected = r * (1.0 - g.powi(n)) / (1.0 - g) + g.powi(n) * terminal;
        let s = AgentState {
            age,
            ..state(age, Employment::Employed)
        };
        let v = trained.value(&s);
        assert!((v - expected).abs() < 0.05 * expected.abs(), "age {age}: {v} vs {expected}");
    }
}

#[test]
fn masked_softmax_handles_extreme_logits() {
    let set = ActionSet::of(&[Action::Stay, Action::Switch]);
    let p = lifecycle::rl::masked_softmax(&[1e4, -1e4, 5e4], set);
    assert_eq!(p, [1.0, 0.0, 0.0]);
}
