#![allow(dead_code)]

use lifecycle::config::ScenarioConfig;
use lifecycle::dp::{backward_induct, GridSpec, ValueGrid};
use lifecycle::model::{Action, AgentState, Employment, Env};
use lifecycle::simulate::{Trajectory, YearRecord};
use rand::Rng;

/// Randomized instance small enough for exhaustive enumeration: at most four
/// decision ages, two or three wage knots, constant wages and fixed pensions,
/// so every reachable state lies on a grid knot.
pub fn tiny_instance<R: Rng>(rng: &mut R) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    let n_ages = rng.random_range(1..=4u32);
    let last = rng.random_range(64..=70u32);
    let m = &mut cfg.model;
    m.last_age = last;
    m.first_age = last + 1 - n_ages;
    m.min_retirement_age = rng.random_range(m.first_age as f64 - 1.0..last as f64 + 1.5);
    m.reward.kappa = rng.random_range(0.0..0.8);
    m.reward.gamma = rng.random_range(0.0..0.98);
    m.reward.reward_scale = rng.random_range(0.5..3.0);
    m.wage.rho = 1.0;
    m.wage.sigma = 0.0;
    m.wage.unemployment_penalty = 1.0;

    // integer monthly steps keep wage knots exactly on prev_wage knots
    let step = rng.random_range(300..2500u32) as f64;
    let offset = rng.random_range(1..=2usize);
    let n_wage = rng.random_range(2..=3usize);
    cfg.grid = GridSpec {
        n_pension: rng.random_range(2..=3),
        n_prev_wage: offset + n_wage,
        n_wage,
        n_tis: 2,
        pension_origin: rng.random_range(0..800u32) as f64,
        pension_step: rng.random_range(100..1200u32) as f64,
        prev_wage_origin: 0.0,
        prev_wage_step: step,
        wage_origin: step * offset as f64,
        wage_step: step,
        quadrature_nodes: 5,
    };
    cfg.model.wage.wage_floor = cfg.grid.wage_knots()[0];
    cfg.model.wage.wage_cap = 1e7;
    cfg.fiscal.accrual_employed = 0.0;
    cfg.fiscal.accrual_unemployed = 0.0;
    cfg.fiscal.ubi_enabled = rng.random_bool(0.3);
    cfg.simulation.panels.clear();
    cfg.simulation.reference_prev_wage_knot = 0;
    cfg.simulation.reference_tis_knot = 0;
    cfg.validate().expect("tiny instance validates");
    cfg
}

/// Discounted return of a fixed action sequence from `s`, or `None` when an
/// action is infeasible along the way. Wages are deterministic.
pub fn sequence_return(env: &Env, s: &AgentState, actions: &[Action]) -> Option<f64> {
    let mut s = *s;
    let mut total = 0.0;
    let mut discount = 1.0;
    for &a in actions {
        if !env.feasible_actions(&s).contains(a) {
            return None;
        }
        let t = env.transition(&s, a).expect("transition");
        total += discount * t.reward;
        discount *= env.gamma();
        let w = env.next_wage_distribution(&t.year).at_shock(0.0);
        s = t.next_state(w);
    }
    Some(total + discount * env.terminal_value(&s).expect("terminal value"))
}

/// Best return over all action sequences starting with each first action.
/// Entries for infeasible first actions are `None`.
pub fn enumerate_first_actions(env: &Env, s: &AgentState) -> [Option<f64>; 3] {
    let n = (env.last_age() - s.age + 1) as usize;
    let mut best = [None; 3];
    let mut seq = vec![Action::Stay; n];
    for code in 0..3usize.pow(n as u32) {
        let mut c = code;
        for slot in seq.iter_mut() {
            *slot = Action::from_code((c % 3) as u8).unwrap();
            c /= 3;
        }
        if let Some(v) = sequence_return(env, s, &seq) {
            let k = seq[0].code() as usize;
            best[k] = Some(best[k].map_or(v, |b: f64| b.max(v)));
        }
    }
    best
}

#[derive(Debug, Default, Clone, Copy)]
pub struct OracleReport {
    pub knots: usize,
    pub max_value_error: f64,
    pub action_failures: usize,
}

/// Compares every first-age knot of the solved grid with exhaustive
/// enumeration.
pub fn compare_with_enumeration(cfg: &ScenarioConfig) -> (ValueGrid, OracleReport) {
    let vg = backward_induct(cfg, &cfg.grid).expect("solve");
    let env = cfg.env();
    let g = &cfg.grid;
    let age = cfg.model.first_age;
    let mut rep = OracleReport::default();
    for e in Employment::ALL {
        for t in 0..g.n_tis {
            for p in 0..g.n_pension {
                for q in 0..g.n_prev_wage {
                    for w in 0..g.n_wage {
                        let s = vg.knot_state(age, e, t, p, q, w);
                        let q_vals = enumerate_first_actions(&env, &s);
                        let best = q_vals.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let v = vg.knot_value(age, e, t, p, q, w).unwrap();
                        rep.max_value_error = rep.max_value_error.max((v - best).abs());
                        let a = vg.knot_action(age, e, t, p, q, w).unwrap();
                        let greedy = vg.greedy_action(&s).unwrap();
                        if !action_is_optimal(&q_vals, a) || greedy != a {
                            rep.action_failures += 1;
                        }
                        rep.knots += 1;
                    }
                }
            }
        }
    }
    (vg, rep)
}

/// True when `a` attains the maximum within 1e-9. When the runner-up is more
/// than 1e-9 behind, this forces `a` to be the argmax.
pub fn action_is_optimal(q_vals: &[Option<f64>; 3], a: Action) -> bool {
    let Some(qa) = q_vals[a.code() as usize] else {
        return false;
    };
    let best = q_vals.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    qa >= best - 1e-9
}

/// Trajectory carrying only the given unscaled utilities (rewards equal to
/// utilities, terminal value zero).
pub fn utility_trajectory(agent: usize, utilities: &[f64]) -> Trajectory {
    let state = AgentState {
        employment: Employment::Employed,
        age: 18,
        pension_accrued: 0.0,
        prev_wage: 0.0,
        time_in_state: 0,
        wage: 20_000.0,
    };
    let years = utilities
        .iter()
        .enumerate()
        .map(|(k, &u)| YearRecord {
            state: AgentState { age: 18 + k as u32, ..state },
            action: Action::Stay,
            year_employment: Employment::Employed,
            net_income: u.exp(),
            utility: u,
            reward: u,
        })
        .collect();
    Trajectory {
        agent,
        years,
        final_state: state,
        terminal_value: 0.0,
    }
}

/// Relative error with a floor on the magnitude.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Largest relative error between backpropagated and central-difference
/// gradients, over `n_params` randomly chosen parameters of each network, for
/// the actor loss and the critic's squared error.
pub fn gradient_check(seed: u64, n_params: usize) -> (f64, f64) {
    use lifecycle::model::ActionSet;
    use lifecycle::rl::{policy_logit_gradient, Mlp, N_ACTIONS, N_FEATURES};
    use ndarray::Array2;

    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let rows = 6;
    let x = Array2::from_shape_simple_fn((rows, N_FEATURES), || rng.random_range(-1.0..1.5));
    let masks: Vec<ActionSet> = (0..rows)
        .map(|r| {
            if r % 2 == 0 {
                ActionSet::of(&[Action::Stay, Action::Switch])
            } else {
                ActionSet::of(&Action::ALL)
            }
        })
        .collect();
    let actions: Vec<Action> = (0..rows).map(|r| if r % 3 == 0 { Action::Switch } else { Action::Stay }).collect();
    let adv: Vec<f64> = (0..rows).map(|_| rng.random_range(-2.0..2.0)).collect();
    let targets: Vec<f64> = (0..rows).map(|_| rng.random_range(-3.0..3.0)).collect();
    let beta = 0.05;

    let policy = Mlp::new(&[N_FEATURES, 32, 32, 32, N_ACTIONS], 0.01, &mut rng);
    let value = Mlp::new(&[N_FEATURES, 128, 128, 128, 1], 0.01, &mut rng);

    let policy_loss = |m: &Mlp| policy_logit_gradient(&m.forward(&x), &actions, &masks, &adv, beta).1;
    let value_loss = |m: &Mlp| {
        let v = m.forward(&x);
        (0..rows).map(|r| 0.5 * (v[[r, 0]] - targets[r]).powi(2)).sum::<f64>() / rows as f64
    };

    let (logits, cache) = policy.forward_cached(&x);
    let (dlogits, _, _) = policy_logit_gradient(&logits, &actions, &masks, &adv, beta);
    let g_pi = policy.backward(&cache, &dlogits);
    let (v, cache) = value.forward_cached(&x);
    let dv = Array2::from_shape_fn((rows, 1), |(r, _)| (v[[r, 0]] - targets[r]) / rows as f64);
    let g_v = value.backward(&cache, &dv);

    let mut worst = |net: &Mlp, grads: &[f64], loss: &dyn Fn(&Mlp) -> f64| {
        let theta = net.to_flat();
        let mut probe = net.clone();
        let h = 1e-5;
        let mut max_err: f64 = 0.0;
        for _ in 0..n_params {
            let i = rng.random_range(0..theta.len());
            let mut t = theta.clone();
            t[i] = theta[i] + h;
            probe.set_flat(&t);
            let up = loss(&probe);
            t[i] = theta[i] - h;
            probe.set_flat(&t);
            let down = loss(&probe);
            let fd = (up - down) / (2.0 * h);
            max_err = max_err.max(rel_err(fd, grads[i]));
        }
        max_err
    };
    let e_pi = worst(&policy, &g_pi, &policy_loss);
    let e_v = worst(&value, &g_v, &value_loss);
    (e_pi, e_v)
}
