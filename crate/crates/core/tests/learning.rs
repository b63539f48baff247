use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use replaylab::agents::{
    epsilon_greedy, Agent, AgentSpec, EperEstimator, LearnerKind, ReplayVariant, RepresentationKind,
};
use replaylab::approx::{adam, Approximator, AdamState, Optimizer, OptimizerKind, TabularValues};
use replaylab::env::chain::{self, Chain};
use replaylab::env::oracle::{chain_true_values, chain_visitation};
use replaylab::env::{ChainEncoding, EnvKind, EnvSpec, Features};
use replaylab::harness::config::{AgentSection, BufferSection, OutputSection, SelectSection};
use replaylab::harness::{run, ExperimentConfig};
use replaylab::metrics::MetricId;
use replaylab::replay::{DmPerParams, Transition};
use replaylab::rng;

fn spec(kind: LearnerKind, variant: ReplayVariant, optimizer: OptimizerKind, lr: f64, batch: usize) -> AgentSpec {
    AgentSpec {
        kind,
        variant,
        representation: RepresentationKind::Tabular,
        hidden: 32,
        learning_rate: lr,
        eper_learning_rate: None,
        batch_size: batch,
        capacity: 1000,
        replacement: true,
        recompute_every: None,
        target_refresh: None,
        recompute_with_online: false,
        epsilon: 0.1,
        optimizer,
        adam_eps: adam::DEFAULT_EPS,
        dm_per: DmPerParams::default(),
    }
}

fn agent(spec: AgentSpec) -> Agent {
    let env = Chain::new(ChainEncoding::OneHot);
    let mut init = rng::stream(0, rng::INIT);
    let mut eper = rng::stream(0, rng::EPER_INIT);
    Agent::new(spec, &env, 1000, &mut init, &mut eper).unwrap()
}

fn chain_transition(s: usize, a: usize) -> Transition {
    let out = chain::step(s, a);
    Transition {
        s: Features::Index(s),
        a,
        r: out.reward,
        s_next: Features::Index(out.next_state.index().unwrap()),
        discount: out.discount,
    }
}

fn tabular_values(a: &Agent) -> Vec<f64> {
    match a.net() {
        Approximator::Tabular(t) => t.table.clone(),
        Approximator::Mlp(_) => unreachable!(),
    }
}

/// Walk that visits both ends of the chain and the terminal transition.
fn scripted_walk(len: usize) -> Vec<Transition> {
    let mut r = SmallRng::seed_from_u64(11);
    let mut s = 45;
    (0..len)
        .map(|_| {
            let a = usize::from(r.gen_bool(0.7));
            let t = chain_transition(s, a);
            s = if t.discount == 0.0 { 45 } else { t.s_next.index().unwrap() };
            t
        })
        .collect()
}

/// Straight-line TD(0) with uniform replay: same draws, same summation order.
fn reference_trace(steps: &[Transition], lr: f64, use_adam: bool) -> Vec<Vec<f64>> {
    let mut v = vec![0.0f64; chain::NUM_STATES];
    let mut buffer: Vec<Transition> = Vec::new();
    let mut r = rng::stream(3, rng::BUFFER);
    let mut adam = AdamState::new(chain::NUM_STATES);
    let mut trace = Vec::new();
    for t in steps {
        buffer.push(t.clone());
        let picks: Vec<usize> = (0..4).map(|_| r.gen_range(0..buffer.len())).collect();
        let mut per_sample = vec![vec![0.0f64; chain::NUM_STATES]; 4];
        for (j, &i) in picks.iter().enumerate() {
            let tr = &buffer[i];
            let s = tr.s.index().unwrap();
            let boot = if tr.discount != 0.0 { tr.discount * v[tr.s_next.index().unwrap()] } else { 0.0 };
            let delta = tr.r + boot - v[s];
            per_sample[j][s] += -delta;
        }
        let grad: Vec<f64> = (0..chain::NUM_STATES)
            .map(|i| ((per_sample[0][i] + per_sample[1][i]) + (per_sample[2][i] + per_sample[3][i])) / 4.0)
            .collect();
        if use_adam {
            adam.step(&mut v, &grad, lr).unwrap();
        } else {
            for (p, g) in v.iter_mut().zip(&grad) {
                *p -= lr * g;
            }
        }
        trace.push(v.clone());
    }
    trace
}

#[test]
fn tabular_trace_matches_straight_line_reference() {
    let steps = scripted_walk(300);
    for (optimizer, lr) in [(OptimizerKind::Sgd, 0.25), (OptimizerKind::Adam, 0.01)] {
        let expected = reference_trace(&steps, lr, optimizer == OptimizerKind::Adam);
        let mut a = agent(spec(LearnerKind::PredictionTd0, ReplayVariant::Uniform, optimizer, lr, 4));
        let mut r = rng::stream(3, rng::BUFFER);
        for (t, want) in steps.iter().zip(&expected) {
            a.observe(t.clone(), &mut r).unwrap();
            assert_eq!(&tabular_values(&a), want, "{optimizer:?}");
        }
        assert!(expected.last().unwrap()[49] > 0.0);
    }
}

#[test]
fn identical_transitions_in_a_batch_equal_one_update() {
    let t = chain_transition(20, chain::RIGHT);
    let mut nets = Vec::new();
    for b in [1, 2, 8, 64] {
        for kind in [RepresentationKind::Tabular, RepresentationKind::Mlp] {
            let mut s = spec(LearnerKind::PredictionTd0, ReplayVariant::Uniform, OptimizerKind::Adam, 0.01, b);
            s.representation = kind;
            let mut a = agent(s);
            let mut r = SmallRng::seed_from_u64(0);
            for _ in 0..5 {
                // Keep the buffer holding a single distinct transition.
                a.buffer_mut().insert(t.clone(), 1.0).unwrap();
                a.train_step(&mut r).unwrap();
            }
            nets.push((b, kind, a.net().params().to_vec()));
        }
    }
    for (b, kind, params) in &nets {
        let base = &nets.iter().find(|(b1, k1, _)| *b1 == 1 && k1 == kind).unwrap().2;
        assert_eq!(params, base, "batch {b} {kind:?}");
    }
}

#[test]
fn terminal_only_buffer_moves_last_state_by_alpha() {
    let alpha = 0.125;
    let mut a = agent(spec(LearnerKind::PredictionTd0, ReplayVariant::Uniform, OptimizerKind::Sgd, alpha, 8));
    a.buffer_mut().insert(chain_transition(49, chain::RIGHT), 1.0).unwrap();
    a.train_step(&mut SmallRng::seed_from_u64(0)).unwrap();
    let v = tabular_values(&a);
    assert_eq!(v[49], alpha);
    assert!(v[..49].iter().all(|&x| x == 0.0));
}

#[test]
fn refresh_every_step_equals_no_target() {
    let steps = scripted_walk(200);
    let mut without = spec(LearnerKind::PredictionTd0, ReplayVariant::NaivePer, OptimizerKind::Adam, 0.01, 8);
    without.representation = RepresentationKind::Mlp;
    let mut with = without.clone();
    with.target_refresh = Some(1);
    let (mut a, mut b) = (agent(with), agent(without));
    let (mut ra, mut rb) = (SmallRng::seed_from_u64(5), SmallRng::seed_from_u64(5));
    for t in &steps {
        a.observe(t.clone(), &mut ra).unwrap();
        b.observe(t.clone(), &mut rb).unwrap();
    }
    assert_eq!(a.net(), b.net());
    assert_eq!(a.buffer().priorities(), b.buffer().priorities());
}

#[test]
fn naive_insertion_priority_is_recomputed_td_error() {
    let mut s = spec(LearnerKind::Dqn, ReplayVariant::NaivePer, OptimizerKind::Adam, 0.01, 4);
    s.representation = RepresentationKind::Mlp;
    let a = agent(s);
    for t in scripted_walk(50) {
        let q = a.net().forward(&t.s).unwrap();
        let next = if t.discount == 0.0 {
            0.0
        } else {
            a.net().forward(&t.s_next).unwrap().into_iter().fold(f64::NEG_INFINITY, f64::max)
        };
        let delta = t.r + t.discount * next - q[t.a];
        assert_eq!(a.insertion_priority(&t).unwrap(), delta.abs());
    }
}

#[test]
fn zero_initialised_learner_gives_floor_priority_downstream() {
    let mut a = agent(spec(LearnerKind::PredictionTd0, ReplayVariant::NaivePer, OptimizerKind::Adam, 0.01, 4));
    let t = chain_transition(10, chain::RIGHT);
    assert_eq!(a.insertion_priority(&t).unwrap(), 0.0);
    let slot = a.buffer_mut().insert(t.clone(), 0.0).unwrap();
    assert_eq!(a.buffer().priority(slot), Some(1e-9));
}

#[test]
fn fresh_eper_priorities_are_positive() {
    let a = agent(spec(LearnerKind::PredictionTd0, ReplayVariant::Eper, OptimizerKind::Adam, 0.01, 4));
    for s in 0..chain::NUM_STATES {
        assert!(a.insertion_priority(&chain_transition(s, chain::LEFT)).unwrap() > 0.0);
    }
}

fn sgd_estimator(lr: f64) -> EperEstimator {
    EperEstimator::new(
        Approximator::Tabular(TabularValues::zeros(3, 1)),
        Optimizer::new(OptimizerKind::Sgd, 3, adam::DEFAULT_EPS),
        lr,
    )
}

#[test]
fn eper_single_update_interpolates() {
    let mut e = sgd_estimator(1.0);
    let x = Features::Index(1);
    e.update(&[(&x, 0, -0.75)]).unwrap();
    assert_eq!(e.h.value(&x, 0).unwrap(), -0.75);
    assert_eq!(e.priority(&x, 0).unwrap(), 0.75);
}

#[test]
fn eper_tracks_constant_target() {
    let mut e = sgd_estimator(0.1);
    let x = Features::Index(2);
    for _ in 0..500 {
        e.update(&[(&x, 0, 0.3)]).unwrap();
    }
    assert!((e.h.value(&x, 0).unwrap() - 0.3).abs() < 1e-12);
}

#[test]
fn eper_converges_to_mean_of_noisy_target() {
    // The last iterate keeps a stationary spread of about sqrt(α/2)·σ ≈ 0.034,
    // so the law-of-large-numbers check is on the average of the iterates.
    let lr = 1e-3;
    let mut e = sgd_estimator(lr);
    let x = Features::Index(0);
    let base = 0.2;
    let mut r = SmallRng::seed_from_u64(9);
    let (mut sum, mut count) = (0.0, 0);
    for i in 0..100_000 {
        let noise = if r.gen_bool(0.1) { 4.5 } else { -0.5 };
        e.update(&[(&x, 0, base + noise)]).unwrap();
        if i >= 10_000 {
            sum += e.h.value(&x, 0).unwrap();
            count += 1;
        }
    }
    let average = sum / count as f64;
    let last = e.h.value(&x, 0).unwrap();
    let spread = (lr / 2.0).sqrt() * 1.5;
    assert!((average - base).abs() < 1e-2, "average {average}");
    assert!((last - base).abs() < 4.0 * spread, "last {last}");
}

fn frequency_z(count: usize, n: usize, p: f64) -> f64 {
    (count as f64 / n as f64 - p) / (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn epsilon_greedy_frequencies() {
    let n = 1_000_000;
    let mut r = SmallRng::seed_from_u64(1);
    let ones = (0..n).filter(|_| epsilon_greedy(&[0.0, 1.0], 0.1, &mut r).unwrap() == 1).count();
    assert!(frequency_z(ones, n, 0.95).abs() < 4.0);

    let mut counts = [0usize; 3];
    for _ in 0..n {
        counts[epsilon_greedy(&[5.0, -1.0, 2.0], 1.0, &mut r).unwrap()] += 1;
    }
    for c in counts {
        assert!(frequency_z(c, n, 1.0 / 3.0).abs() < 4.0);
    }
    assert!((0..1000).all(|_| epsilon_greedy(&[1.0, 3.0, 2.0], 0.0, &mut r).unwrap() == 1));
}

fn chain_prediction_config(variant: ReplayVariant, horizon: u64) -> ExperimentConfig {
    ExperimentConfig {
        name: "test".into(),
        horizon,
        seeds: vec![0],
        cadence: 100,
        metrics: vec![],
        smoothing_window: None,
        heatmaps: vec![],
        heatmap_every: 1000,
        env: EnvSpec::new(EnvKind::Chain),
        agent: AgentSection {
            kind: LearnerKind::PredictionTd0,
            variant,
            representation: RepresentationKind::Tabular,
            hidden: 32,
            learning_rate: 8f64.powi(-4),
            eper_learning_rate: None,
            batch_size: 8,
            target_refresh: None,
            recompute_with_online: false,
            epsilon: 0.1,
            optimizer: OptimizerKind::Adam,
            adam_eps: adam::DEFAULT_EPS,
        },
        buffer: BufferSection {
            capacity: 8000,
            replacement: true,
            recompute_every: None,
            dm_per: DmPerParams::default(),
        },
        output: OutputSection::default(),
        sweep: Default::default(),
        select: SelectSection::default(),
    }
}

#[test]
fn initial_msve_is_visitation_weighted_square_of_true_values() {
    let v = chain_true_values().unwrap().values;
    let d = chain_visitation().unwrap().values;
    let expected: f64 = v.iter().zip(&d).map(|(v, d)| d * v * v).sum();
    let r = run(&chain_prediction_config(ReplayVariant::Uniform, 500), 4).unwrap();
    let first = r.series(MetricId::Msve).unwrap().values[0];
    assert!((first - expected).abs() <= 1e-15 * expected, "{first} vs {expected}");
}

#[test]
fn zero_horizon_gives_empty_series() {
    let r = run(&chain_prediction_config(ReplayVariant::DmPer, 0), 0).unwrap();
    assert!(r.series.iter().all(|s| s.values.is_empty()));
    assert_eq!(r.episodes, 0);
}

#[test]
fn uniform_prediction_msve_trends_down() {
    let cfg = chain_prediction_config(ReplayVariant::Uniform, 80_000);
    let runs: Vec<_> = (0..30).map(|s| run(&cfg, s).unwrap()).collect();
    let len = runs[0].series(MetricId::Msve).unwrap().values.len();
    let mean: Vec<f64> = (0..len)
        .map(|k| runs.iter().map(|r| r.series(MetricId::Msve).unwrap().values[k]).sum::<f64>() / 30.0)
        .collect();
    // Ten equal windows, each with a lower average than the previous one.
    let windows: Vec<f64> = mean.chunks(len / 10).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    for w in windows.windows(2) {
        assert!(w[1] < w[0], "{windows:?}");
    }
}
