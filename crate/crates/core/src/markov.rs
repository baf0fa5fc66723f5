//! Platoon-composition chain.
//!
//! The state is the number of consecutive CAVs ending at the current vehicle,
//! capped at the communication capacity `n`. A CAV follower (probability `p`)
//! moves the chain up one state (state `n` loops on itself); an HDV follower
//! resets it to 0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure, ModelError, Result};

/// Chain size and CAV market penetration rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovSpec {
    n: usize,
    p: f64,
}

impl MarkovSpec {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        ensure(n >= 1, "n", n as f64, "communication capacity must be at least 1")?;
        ensure((0.0..=1.0).contains(&p), "p", p, "penetration rate must lie in [0, 1]")?;
        Ok(Self { n, p })
    }

    /// Maximum consecutive-CAV state.
    pub fn n(&self) -> usize {
        self.n
    }

    /// CAV market penetration rate.
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn states(&self) -> usize {
        self.n + 1
    }
}

/// Row-stochastic `(n+1) x (n+1)` matrix, row = current state.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl TransitionMatrix {
    /// Wraps arbitrary entries after checking they form a row-stochastic matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        ensure(dim >= 1, "dim", 0.0, "matrix must have at least one row")?;
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            ensure(row.len() == dim, "row_len", row.len() as f64, "matrix must be square")?;
            for &x in row {
                ensure((0.0..=1.0).contains(&x), "entry", x, "probabilities must lie in [0, 1]")?;
            }
            let sum: f64 = row.iter().sum();
            ensure((sum - 1.0).abs() <= 1e-12, "row_sum", sum, "rows must sum to 1")?;
            entries.extend_from_slice(row);
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.dim)
    }

    /// Row vector times matrix.
    pub fn left_multiply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, row) in self.rows().enumerate() {
            let w = v[i];
            if w == 0.0 {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(row) {
                *o += w * x;
            }
        }
        out
    }
}

/// Stationary distribution `pi_0..pi_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pi: Vec<f64>,
}

impl SteadyState {
    pub fn probabilities(&self) -> &[f64] {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.pi[i]
    }

    /// Max-norm of `pi P - pi`.
    pub fn residual(&self, matrix: &TransitionMatrix) -> f64 {
        matrix
            .left_multiply(&self.pi)
            .iter()
            .zip(&self.pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Realized chain states for a stream of vehicles.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleTypeSequence {
    pub states: Vec<usize>,
    pub seed: u64,
}

impl VehicleTypeSequence {
    /// Fraction of vehicles observed in each state `0..=n`.
    pub fn frequencies(&self, n: usize) -> Vec<f64> {
        let mut counts = vec![0usize; n + 1];
        for &s in &self.states {
            counts[s] += 1;
        }
        let total = self.states.len() as f64;
        counts.into_iter().map(|c| c as f64 / total).collect()
    }
}

pub fn build_transition_matrix(spec: &MarkovSpec) -> TransitionMatrix {
    let dim = spec.states();
    let p = spec.p;
    let mut entries = vec![0.0; dim * dim];
    for i in 0..dim {
        entries[i * dim] = 1.0 - p;
        let next = (i + 1).min(spec.n);
        entries[i * dim + next] += p;
    }
    TransitionMatrix { dim, entries }
}

/// Closed-form stationary distribution.
///
/// States below `n` follow `p^i / D` with
/// `D = p^n/(1-p) + sum_{m<n} p^m`; the self-looping top state carries the
/// remaining geometric tail `p^n / ((1-p) D)`, which is what the balance
/// equation at state `n` requires. `p = 1` returns the absorbing limit.
pub fn steady_state_closed_form(spec: &MarkovSpec) -> SteadyState {
    let n = spec.n;
    let p = spec.p;
    if p >= 1.0 {
        let mut pi = vec![0.0; n + 1];
        pi[n] = 1.0;
        return SteadyState { pi };
    }
    let q = 1.0 - p;
    let head: f64 = (0..n).map(|m| p.powi(m as i32)).sum();
    let denom = p.powi(n as i32) / q + head;
    let mut pi: Vec<f64> = (0..n).map(|i| p.powi(i as i32) / denom).collect();
    pi.push(p.powi(n as i32) / (q * denom));
    SteadyState { pi }
}

/// Power iteration from the uniform distribution until `max|pi P - pi| <= tol`.
pub fn steady_state_power_iteration(matrix: &TransitionMatrix, tol: f64, max_iter: usize) -> Result<SteadyState> {
    ensure(tol > 0.0, "tol", tol, "tolerance must be positive")?;
    let dim = matrix.dim();
    let mut pi = vec![1.0 / dim as f64; dim];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let mut next = matrix.left_multiply(&pi);
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        residual = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = next;
        if residual <= tol {
            let state = SteadyState { pi };
            // the step residual bounds the fixed-point residual only up to rounding
            if state.residual(matrix) <= tol {
                return Ok(state);
            }
            pi = state.pi;
        }
    }
    Err(ModelError::NotConverged {
        iterations: max_iter,
        residual,
    })
}

/// Samples `count` consecutive chain states. The first state is drawn from the
/// stationary distribution, so every prefix is already stationary.
pub fn sample_sequence(spec: &MarkovSpec, count: usize, seed: u64) -> Result<VehicleTypeSequence> {
    ensure(count >= 1, "count", count as f64, "need at least one vehicle")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = steady_state_closed_form(spec);

    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut state = spec.n;
    for (i, &w) in pi.probabilities().iter().enumerate() {
        acc += w;
        if u < acc {
            state = i;
            break;
        }
    }

    let mut states = Vec::with_capacity(count);
    states.push(state);
    for _ in 1..count {
        state = if rng.gen::<f64>() < spec.p {
            (state + 1).min(spec.n)
        } else {
            0
        };
        states.push(state);
    }
    Ok(VehicleTypeSequence { states, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, p: f64) -> MarkovSpec {
        MarkovSpec::new(n, p).unwrap()
    }

    fn rows(m: &TransitionMatrix) -> Vec<Vec<f64>> {
        m.rows().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(MarkovSpec::new(0, 0.5).is_err());
        assert!(MarkovSpec::new(3, -0.1).is_err());
        assert!(MarkovSpec::new(3, 1.1).is_err());
        assert!(MarkovSpec::new(3, f64::NAN).is_err());
    }

    #[test]
    fn matrix_hand_cases() {
        assert_eq!(
            rows(&build_transition_matrix(&spec(1, 0.5))),
            vec![vec![0.5, 0.5], vec![0.5, 0.5]]
        );
        let m = build_transition_matrix(&spec(2, 0.3));
        let expected = [[0.7, 0.3, 0.0], [0.7, 0.0, 0.3], [0.7, 0.0, 0.3]];
        for (i, row) in expected.iter().enumerate() {
            for (j, want) in row.iter().enumerate() {
                assert!((m.get(i, j) - want).abs() < 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn matrix_all_hdv() {
        let m = build_transition_matrix(&spec(4, 0.0));
        for row in m.rows() {
            assert_eq!(row[0], 1.0);
            assert!(row[1..].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn closed_form_hand_cases() {
        assert_eq!(
            steady_state_closed_form(&spec(3, 0.0)).probabilities(),
            &[1.0, 0.0, 0.0, 0.0]
        );
        let pi = steady_state_closed_form(&spec(1, 0.5));
        assert!((pi.get(0) - 0.5).abs() < 1e-15 && (pi.get(1) - 0.5).abs() < 1e-15);
        let pi = steady_state_closed_form(&spec(2, 0.5));
        for (a, b) in pi.probabilities().iter().zip([0.5, 0.25, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_full_penetration_limit() {
        assert_eq!(
            steady_state_closed_form(&spec(5, 1.0)).probabilities(),
            &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn power_iteration_hand_cases() {
        let pi = steady_state_power_iteration(&build_transition_matrix(&spec(1, 0.5)), 1e-12, 1000).unwrap();
        assert!((pi.get(0) - 0.5).abs() < 1e-12);
        let pi = steady_state_power_iteration(&build_transition_matrix(&spec(3, 0.0)), 1e-12, 1000).unwrap();
        assert!((pi.get(0) - 1.0).abs() < 1e-12);
        let s = spec(5, 0.5);
        let it = steady_state_power_iteration(&build_transition_matrix(&s), 1e-12, 10_000).unwrap();
        let cf = steady_state_closed_form(&s);
        for (a, b) in it.probabilities().iter().zip(cf.probabilities()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn power_iteration_reports_non_convergence() {
        let m = build_transition_matrix(&spec(2, 0.5));
        let err = steady_state_power_iteration(&m, 1e-12, 1).unwrap_err();
        match err {
            ModelError::NotConverged { iterations, residual } => {
                assert_eq!(iterations, 1);
                assert!(residual > 0.1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(steady_state_power_iteration(&m, 0.0, 10).is_err());

        // period-2 chain oscillates from any non-uniform start; uniform is its fixed point
        let flip = TransitionMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(steady_state_power_iteration(&flip, 1e-12, 5).is_ok());
        assert!(TransitionMatrix::from_rows(&[vec![0.5, 0.6], vec![1.0, 0.0]]).is_err());
    }

    #[test]
    fn sampler_degenerate_cases() {
        let seq = sample_sequence(&spec(5, 1.0), 100, 7).unwrap();
        assert!(seq.states[5..].iter().all(|&s| s == 5));
        let seq = sample_sequence(&spec(5, 0.0), 100, 7).unwrap();
        assert!(seq.states.iter().all(|&s| s == 0));
        assert!(sample_sequence(&spec(5, 0.5), 0, 7).is_err());
    }

    #[test]
    fn sampler_transitions_are_admissible_and_deterministic() {
        let s = spec(3, 0.6);
        let a = sample_sequence(&s, 5000, 11).unwrap();
        let b = sample_sequence(&s, 5000, 11).unwrap();
        assert_eq!(a, b);
        let m = build_transition_matrix(&s);
        for w in a.states.windows(2) {
            assert!(m.get(w[0], w[1]) > 0.0, "{:?}", w);
        }
    }

    #[test]
    fn sampler_frequencies_converge() {
        let seq = sample_sequence(&spec(2, 0.5), 1_000_000, 2024).unwrap();
        for (f, pi) in seq.frequencies(2).iter().zip([0.5, 0.25, 0.25]) {
            assert!((f - pi).abs() < 0.005, "{f} vs {pi}");
        }
    }
}
