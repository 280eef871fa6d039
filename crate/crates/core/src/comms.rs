//! Neural-like signaling between agents.
//!
//! Agent `p` sends `I_pq = w_pq * A(a_p) * gain_p` to agent `q`; agent `q` sums its
//! incoming signals plus a sensed local concentration and squashes the total
//! back into its membrane potential. Weights follow a rate-based Hebbian rule
//! with linear decay:
//!
//! ```text
//! w_pq <- w_pq + alpha * (a_p * a_q - gamma * w_pq)
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
}

impl Activation {
    pub fn apply(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => h.tanh(),
        }
    }
}

/// How an agent turns the local concentration into neural input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensing {
    #[default]
    Identity,
    /// `ln(1 + max(C, 0))`
    Logarithmic,
}

impl Sensing {
    pub fn apply(self, concentration: f64) -> f64 {
        match self {
            Sensing::Identity => concentration,
            Sensing::Logarithmic => concentration.max(0.0).ln_1p(),
        }
    }
}

/// Square matrix of inter-agent weights, row = sender, column = receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionMatrix {
    n: usize,
    weights: Vec<f64>,
    pub learning_rate: f64,
    pub decay: f64,
}

impl ConnectionMatrix {
    pub fn zeros(n: usize, learning_rate: f64, decay: f64) -> Self {
        Self {
            n,
            weights: vec![0.0; n * n],
            learning_rate,
            decay,
        }
    }

    /// Standard-normal weights with the diagonal zeroed.
    pub fn random<R: Rng + ?Sized>(n: usize, learning_rate: f64, decay: f64, rng: &mut R) -> Self {
        let mut m = Self::zeros(n, learning_rate, decay);
        for p in 0..n {
            for q in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                if p != q {
                    m.weights[p * n + q] = z;
                }
            }
        }
        m
    }

    /// Builds from a dense row-major matrix; the diagonal is forced to zero.
    pub fn from_rows(rows: &[Vec<f64>], learning_rate: f64, decay: f64) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n, learning_rate, decay);
        for (p, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension {
                    context: "connection matrix row",
                    expected: n,
                    actual: row.len(),
                });
            }
            for (q, &w) in row.iter().enumerate() {
                if !w.is_finite() {
                    return Err(Error::NonFinite("connection weight".into()));
                }
                if p != q {
                    m.weights[p * n + q] = w;
                }
            }
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.weights[p * self.n + q]
    }

    /// Off-diagonal weights in row-major order.
    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.n;
        self.weights
            .iter()
            .enumerate()
            .filter(move |(i, _)| i / n != i % n)
            .map(|(_, &w)| w)
    }

    pub fn stats(&self) -> WeightStats {
        WeightStats::from_values(self.off_diagonal())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl WeightStats {
    fn from_values(values: impl Iterator<Item = f64>) -> Self {
        let mut count = 0usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            count += 1;
            sum += v;
            sum_sq += v * v;
            min = min.min(v);
            max = max.max(v);
        }
        if count == 0 {
            return Self {
                mean: 0.0,
                std: 0.0,
                min: 0.0,
                max: 0.0,
            };
        }
        let mean = sum / count as f64;
        let var = (sum_sq / count as f64 - mean * mean).max(0.0);
        Self {
            mean,
            std: var.sqrt(),
            min,
            max,
        }
    }
}

/// Signal matrix `I[p][q] = w_pq * A(a_p) * gain_p`, returned row-major.
pub fn transmit(
    w: &ConnectionMatrix,
    activation: Activation,
    potentials: &[f64],
    gains: &[f64],
) -> Result<Vec<f64>> {
    let n = w.len();
    for (context, len) in [("potentials", potentials.len()), ("gains", gains.len())] {
        if len != n {
            return Err(Error::Dimension {
                context,
                expected: n,
                actual: len,
            });
        }
    }
    let mut signals = vec![0.0; n * n];
    for p in 0..n {
        let out = activation.apply(potentials[p]);
        for q in 0..n {
            signals[p * n + q] = w.get(p, q) * out * gains[p];
        }
    }
    Ok(signals)
}

/// `h_q = sum_p I_pq + sensing(C(x_q))` for a single receiver.
pub fn total_input(incoming: &[f64], sensed: f64) -> f64 {
    incoming.iter().sum::<f64>() + sensed
}

/// Total input for every receiver of a row-major signal matrix.
pub fn total_inputs(signals: &[f64], n: usize, sensed: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|q| {
            let column: Vec<f64> = (0..n).map(|p| signals[p * n + q]).collect();
            total_input(&column, sensed[q])
        })
        .collect()
}

pub fn compute_activation(activation: Activation, h: f64) -> f64 {
    activation.apply(h)
}

pub fn hebbian_update(w: &mut ConnectionMatrix, activations: &[f64]) -> Result<()> {
    let n = w.len();
    if activations.len() != n {
        return Err(Error::Dimension {
            context: "hebbian activations",
            expected: n,
            actual: activations.len(),
        });
    }
    let (alpha, gamma) = (w.learning_rate, w.decay);
    for p in 0..n {
        for q in 0..n {
            if p == q {
                continue;
            }
            let idx = p * n + q;
            let wpq = w.weights[idx];
            w.weights[idx] = wpq + alpha * (activations[p] * activations[q] - gamma * wpq);
        }
    }
    Ok(())
}
