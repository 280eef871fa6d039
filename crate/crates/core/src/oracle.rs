//! Analytic and brute-force checks runnable from the command line.
//!
//! Each check compares the engine against a closed form or a naive loop and
//! reports one line; the same quantities are asserted by the test suite.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::comms::{hebbian_update, total_input, transmit, Activation, ConnectionMatrix};
use crate::curriculum::CurriculumSchedule;
use crate::field::{step_field, ConcentrationField, FieldParams};
use crate::learning::{
    discounted_returns, policy_gradient, surrogate_objective, Critic, EntropyConfig, PolicyParams, ScoredSample,
};
use crate::reward::{chem_term, combine, robust_term, sync_term, RewardCoefficients, SignConvention};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn quiet(diffusion: f64, decay: f64, dt: f64) -> FieldParams {
    FieldParams {
        diffusion,
        decay,
        noise_sigma: 0.0,
        dt,
        ..FieldParams::default()
    }
}

fn run_field(field: &ConcentrationField, params: &FieldParams, steps: usize) -> ConcentrationField {
    let zero = vec![0.0; params.num_cells];
    let mut rng = stream(0, Stream::FieldNoise);
    let mut f = field.clone();
    for _ in 0..steps {
        f = step_field(&f, params, &zero, &mut rng).expect("finite field").field;
    }
    f
}

/// Pure diffusion of a Gaussian against the heat kernel at t = 1.
pub fn heat_kernel() -> Check {
    let p = quiet(0.1, 0.0, 0.01);
    let (centre, s0) = (5.0, 0.5);
    let start = Instant::now();
    let init = ConcentrationField::from_fn(&p, |x| (-(x - centre) * (x - centre) / (2.0 * s0 * s0)).exp());
    let f = run_field(&init, &p, 100);
    let elapsed = start.elapsed().as_secs_f64();
    let var = s0 * s0 + 2.0 * p.diffusion * 1.0;
    let exact: Vec<f64> = p
        .positions()
        .iter()
        .map(|x| s0 / var.sqrt() * (-(x - centre) * (x - centre) / (2.0 * var)).exp())
        .collect();
    let err = rel_l2(&f.values, &exact);
    Check::new(
        "heat kernel",
        err < 0.01 && elapsed < 1.0,
        format!("relative L2 error {err:.3e}, {elapsed:.3} s"),
    )
}

fn decay_error(dt: f64) -> f64 {
    let lambda = 0.1;
    let p = quiet(0.1, lambda, dt);
    let steps = (10.0 / dt).round() as usize;
    let f = run_field(&ConcentrationField::from_fn(&p, |_| 1.0), &p, steps);
    let exact = (-lambda * 10.0_f64).exp();
    f.values.iter().map(|v| (v - exact).abs()).fold(0.0, f64::max)
}

/// First-order convergence of pure decay at t = 10.
pub fn decay_convergence() -> Check {
    let ratio = decay_error(0.1) / decay_error(0.05);
    Check::new(
        "decay convergence",
        (1.8..=2.2).contains(&ratio),
        format!("error ratio {ratio:.4}"),
    )
}

/// Total mass over 10^4 source-free, decay-free steps.
pub fn mass_conservation() -> Check {
    let p = quiet(0.1, 0.0, 0.01);
    let init = ConcentrationField::from_fn(&p, |x| 1.0 + (-(x - 3.0) * (x - 3.0)).exp());
    let m0 = init.total_mass(&p);
    let f = run_field(&init, &p, 10_000);
    let drift = ((f.total_mass(&p) - m0) / m0).abs();
    Check::new("mass conservation", drift < 1e-10, format!("relative drift {drift:.3e}"))
}

pub fn curriculum_exactness() -> Check {
    let s = CurriculumSchedule {
        initial: 0.25,
        final_target: 1.75,
        ramp_steps: 1000,
    };
    let expected = [(0, 0.25), (500, 1.0), (1000, 1.75), (2000, 1.75)];
    let worst = expected
        .iter()
        .map(|&(t, v)| (s.target(t) - v).abs())
        .fold(0.0, f64::max);
    Check::new("curriculum exactness", worst <= f64::EPSILON, format!("max deviation {worst:.3e}"))
}

/// Constant co-activation drives `w` to `c / gamma` with contraction `1 - alpha * gamma`.
pub fn hebbian_fixed_point() -> Check {
    let (alpha, gamma) = (0.1, 0.5);
    let a = [0.6, 0.5];
    let c = a[0] * a[1];
    let target = c / gamma;
    let mut w = ConnectionMatrix::zeros(2, alpha, gamma);
    let mut prev_err = target;
    let mut worst_factor: f64 = 0.0;
    let mut converged_at = None;
    for it in 1..=500 {
        hebbian_update(&mut w, &a).expect("matching dimensions");
        let err = (w.get(0, 1) - target).abs();
        if prev_err > 1e-9 {
            worst_factor = worst_factor.max((err / prev_err - (1.0 - alpha * gamma)).abs());
        }
        prev_err = err;
        if converged_at.is_none() && err < 1e-8 {
            converged_at = Some(it);
        }
    }
    Check::new(
        "hebbian fixed point",
        converged_at.is_some() && worst_factor < 1e-6,
        format!("converged at {converged_at:?}, contraction deviation {worst_factor:.3e}"),
    )
}

pub fn reward_arithmetic() -> Check {
    let pen = RewardCoefficients::default();
    let lit = RewardCoefficients {
        convention: SignConvention::Literal,
        ..pen
    };
    let p = combine(0.0, 0.09, 2.0, -1.0, &pen);
    let l = combine(0.0, 0.09, 2.0, -1.0, &lit);
    Check::new(
        "reward arithmetic",
        (p - -0.845).abs() < 1e-12 && (l - 0.445).abs() < 1e-12,
        format!("penalty {p}, literal {l}"),
    )
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn central_difference(theta: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let orig = t[i];
            t[i] = orig + h;
            let up = f(&t);
            t[i] = orig - h;
            let down = f(&t);
            t[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = a.iter().chain(b).map(|x| x * x).sum::<f64>().sqrt();
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Worst relative error of policy and critic gradients over `batches` random batches.
pub fn gradient_errors(batches: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream(seed, Stream::Init);
    let entropy = EntropyConfig { weight: 0.01 };
    let (mut worst_pi, mut worst_v): (f64, f64) = (0.0, 0.0);
    for _ in 0..batches {
        let policy = PolicyParams::random(0.5, rng.random_range(-1.0..0.5), &mut rng);
        let samples: Vec<ScoredSample> = (0..rng.random_range(2..12))
            .map(|_| ScoredSample {
                observation: [0.0; 7].map(|_: f64| normal(&mut rng)),
                sample: [0.0; 3].map(|_: f64| normal(&mut rng)),
                advantage: normal(&mut rng),
            })
            .collect();
        let analytic = policy_gradient(&policy, &samples, &entropy).expect("finite");
        let numeric = central_difference(&policy.to_vec(), 1e-5, |t| {
            surrogate_objective(&PolicyParams::from_slice(t).expect("length"), &samples, &entropy)
        });
        worst_pi = worst_pi.max(rel_err(&analytic, &numeric));

        let dim = rng.random_range(2..8);
        let critic = Critic::new(dim, rng.random_range(2..6), &mut rng);
        let inputs: Vec<Vec<f64>> = (0..rng.random_range(2..10))
            .map(|_| (0..dim).map(|_| normal(&mut rng)).collect())
            .collect();
        let targets: Vec<f64> = inputs.iter().map(|_| normal(&mut rng)).collect();
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let (_, analytic) = critic.loss_gradient(&refs, &targets).expect("dimensions");
        let numeric = central_difference(&critic.to_vec(), 1e-5, |t| {
            critic.with_params(t).expect("length").loss(&refs, &targets)
        });
        worst_v = worst_v.max(rel_err(&analytic, &numeric));
    }
    (worst_pi, worst_v)
}

pub fn gradient_checks() -> Check {
    let (pi, v) = gradient_errors(20, 7);
    Check::new(
        "gradient checks",
        pi < 1e-4 && v < 1e-4,
        format!("policy {pi:.3e}, critic {v:.3e}"),
    )
}

/// Naive-loop agreement on random instances; returns the number of mismatches.
pub fn brute_force_mismatches(instances: usize, seed: u64) -> usize {
    let mut rng = stream(seed, Stream::Init);
    let mut bad = 0;
    for _ in 0..instances {
        let n = rng.random_range(1..=10);
        let w = ConnectionMatrix::random(n, 0.1, 0.5, &mut rng);
        let a: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let signals = transmit(&w, Activation::Tanh, &a, &g).expect("dimensions");
        for p in 0..n {
            for q in 0..n {
                let naive = if p == q { 0.0 } else { w.get(p, q) * a[p].tanh() * g[p] };
                bad += usize::from(signals[p * n + q] != naive);
            }
        }

        let incoming: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let sensed = normal(&mut rng);
        let mut acc = 0.0;
        for v in &incoming {
            acc += v;
        }
        bad += usize::from(total_input(&incoming, sensed) != acc + sensed);

        let mut naive_sync = 0.0;
        for v in &a[1..] {
            naive_sync += (a[0] - v) * (a[0] - v);
        }
        bad += usize::from(sync_term(a[0], &a[1..]) != naive_sync);

        let p = FieldParams::default();
        let field = ConcentrationField {
            values: (0..p.num_cells).map(|_| rng.random_range(0.0..2.0)).collect(),
            time: 0.0,
        };
        let (x, y) = (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
        let d = field.value_at(&p, x) - field.value_at(&p, y);
        bad += usize::from(chem_term(&field, &p, x, y) != d * d);

        let len = rng.random_range(1..=20);
        let window: Vec<f64> = (0..len).map(|_| normal(&mut rng)).collect();
        let naive_robust = if len < 2 {
            0.0
        } else {
            let mut m = 0.0;
            for v in &window {
                m += v;
            }
            m /= len as f64;
            let mut s = 0.0;
            for v in &window {
                s += (v - m) * (v - m);
            }
            -(s / len as f64)
        };
        bad += usize::from(robust_term(&window) != naive_robust);

        let gamma = rng.random_range(0.0..1.0);
        let rewards: Vec<f64> = (0..len).map(|_| normal(&mut rng)).collect();
        let got = discounted_returns(&rewards, gamma);
        for t in 0..len {
            let mut acc = 0.0;
            for j in (t..len).rev() {
                acc = rewards[j] + gamma * acc;
            }
            bad += usize::from(got[t] != acc);
        }
    }
    bad
}

pub fn brute_force() -> Check {
    let bad = brute_force_mismatches(100, 11);
    Check::new("brute-force equivalence", bad == 0, format!("{bad} mismatches over 100 instances"))
}

pub fn run_all() -> Vec<Check> {
    vec![
        heat_kernel(),
        decay_convergence(),
        mass_conservation(),
        curriculum_exactness(),
        hebbian_fixed_point(),
        reward_arithmetic(),
        gradient_checks(),
        brute_force(),
    ]
}
