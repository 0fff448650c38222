//! Generalized Bell numbers, fractional Poisson/Binomial moments, and
//! verifiers for the probabilistic inequalities the rounding analysis rests on.
//!
//! The generalized Bell number `B~(alpha)` is the alpha-th fractional moment of
//! a Poisson(1) random variable, `sum_k k^alpha e^-1 / k!` (Dobinski's formula
//! for integer alpha). It is the approximation-ratio constant reported by every
//! solver in this crate.

use crate::rng::StreamRng;
use crate::{Error, Result};

/// Hard truncation cap for the moment series. Factorial decay makes the cap
/// unreachable for any alpha <= 10 at sane tolerances; hitting it is an error
/// rather than a silent bad value.
const SERIES_CAP: usize = 200;

/// alpha-th moment of Poisson(lambda), `sum_k k^alpha lambda^k e^-lambda / k!`,
/// truncated once the tail is provably below `tol`.
pub fn poisson_moment(lambda: f64, alpha: f64, tol: f64) -> Result<f64> {
    if alpha < 1.0 {
        return Err(Error::Domain(format!("alpha must be >= 1, got {alpha}")));
    }
    if lambda < 0.0 {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tol must be > 0, got {tol}")));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    // weight_k = lambda^k e^-lambda / k!, maintained multiplicatively.
    let mut weight = (-lambda).exp();
    let mut sum = 0.0;
    for k in 1..=SERIES_CAP {
        weight *= lambda / k as f64;
        let term = (k as f64).powf(alpha) * weight;
        sum += term;
        // Beyond k >= max(alpha, lambda) the term ratio
        //   t_{k+1}/t_k = ((k+1)/k)^alpha * lambda/(k+1)
        // decreases monotonically; once it is <= 1/2 the tail is < term.
        let kf = k as f64;
        if kf > alpha && kf > lambda {
            let ratio = ((kf + 1.0) / kf).powf(alpha) * lambda / (kf + 1.0);
            if ratio <= 0.5 && term < tol * 0.5 {
                return Ok(sum);
            }
        }
    }
    Err(Error::SeriesCap)
}

/// Generalized Bell number `B~(alpha)`: the alpha-th moment of Poisson(1).
pub fn generalized_bell(alpha: f64, tol: f64) -> Result<f64> {
    poisson_moment(1.0, alpha, tol)
}

/// Monte-Carlo moment estimate; bit-reproducible for a fixed seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Monte-Carlo estimate of `E[(sum_i X_i)^alpha]` for independent Bernoulli
/// `X_i ~ trial_probs[i]`.
pub fn binomial_moment_mc(
    trial_probs: &[f64],
    alpha: f64,
    samples: u64,
    seed: u64,
) -> MomentEstimate {
    assert!(samples >= 1);
    let mut rng = StreamRng::new(seed, 0);
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for _ in 0..samples {
        let mut count = 0u64;
        for &p in trial_probs {
            if rng.next_f64() < p {
                count += 1;
            }
        }
        let v = (count as f64).powf(alpha);
        sum += v;
        sumsq += v * v;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sumsq / n - mean * mean).max(0.0)) / n.max(2.0);
    MomentEstimate {
        mean,
        stderr: var.sqrt(),
        samples,
        seed,
    }
}

/// Exact `E[(sum_i X_i)^alpha]` by enumerating all 2^n Bernoulli outcomes.
pub fn binomial_moment_exact(trial_probs: &[f64], alpha: f64) -> f64 {
    let n = trial_probs.len();
    assert!(n <= 24, "exact enumeration limited to small n");
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        let mut prob = 1.0;
        let mut count = 0u64;
        for (i, &p) in trial_probs.iter().enumerate() {
            if mask >> i & 1 == 1 {
                prob *= p;
                count += 1;
            } else {
                prob *= 1.0 - p;
            }
        }
        total += prob * (count as f64).powf(alpha);
    }
    total
}

/// `E[f(S)]` for `f(A) = (sum_{j in A} e_j^{1/alpha})^alpha` with element `j`
/// included independently with probability `probs[j]`. Exact enumeration.
fn random_set_moment(values: &[f64], probs: &[f64], alpha: f64) -> f64 {
    let n = values.len();
    assert!(n <= 24);
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        let mut prob = 1.0;
        let mut root_sum = 0.0;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                prob *= probs[i];
                root_sum += values[i].powf(1.0 / alpha);
            } else {
                prob *= 1.0 - probs[i];
            }
        }
        total += prob * root_sum.powf(alpha);
    }
    total
}

#[derive(Debug, Clone)]
pub struct InequalityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Monte-Carlo noise margin added to the right side (0 for exact checks).
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct InequalityReport {
    pub checks: Vec<InequalityCheck>,
}

impl InequalityReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn push(&mut self, name: String, lhs: f64, rhs: f64, margin: f64) {
        self.checks.push(InequalityCheck {
            name,
            lhs,
            rhs,
            margin,
            pass: lhs <= rhs + margin,
        });
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("check,lhs,rhs,margin,pass\n");
        for c in &self.checks {
            out.push_str(&format!(
                "{},{:.9},{:.9},{:.9},{}\n",
                c.name, c.lhs, c.rhs, c.margin, c.pass
            ));
        }
        out
    }
}

const EXACT_TOL: f64 = 1e-9;

/// Runs the five proposition checks on the given parameter grids.
///
/// Sampled inequalities pass at LHS <= RHS + 3 stderr; exact ones at
/// LHS <= RHS + 1e-9. Failures land in the report, never abort.
pub fn check_inequalities(
    alpha_list: &[f64],
    lambda_list: &[f64],
    samples: u64,
    seed: u64,
) -> InequalityReport {
    let mut report = InequalityReport::default();
    let mut rng = StreamRng::new(seed, 1);

    // Minkowski-style bound: E[(sum X_i^{1/a})^a] <= (sum E[X_i]^{1/a})^a,
    // sampled with X_i uniform on [0, b_i] so E[X_i] = b_i/2 is exact.
    for &alpha in alpha_list {
        if alpha <= 1.0 {
            continue;
        }
        let bounds = [0.8, 1.6, 2.4];
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..samples {
            let mut root_sum = 0.0;
            for &b in &bounds {
                let x = rng.next_f64() * b;
                root_sum += x.powf(1.0 / alpha);
            }
            let v = root_sum.powf(alpha);
            sum += v;
            sumsq += v * v;
        }
        let n = samples as f64;
        let mean = sum / n;
        let stderr = (((sumsq / n - mean * mean).max(0.0)) / n).sqrt();
        let rhs = bounds
            .iter()
            .map(|b| (b / 2.0).powf(1.0 / alpha))
            .sum::<f64>()
            .powf(alpha);
        report.push(format!("prop1_minkowski_alpha={alpha}"), mean, rhs, 3.0 * stderr);
    }

    // Splitting a sampling probability never decreases E[f(S)]; enumerated
    // exactly in the stated setting e_n = e_{n+1}.
    for &alpha in alpha_list {
        if alpha <= 1.0 {
            continue;
        }
        let values = [0.5, 2.0, 1.0, 1.0]; // e_3 = e_4 (split copy of e_3)
        let probs = [0.3, 0.6, 0.8, 0.0];
        let split_pairs = [(0.4, 0.4), (0.1, 0.7), (0.8, 0.0)];
        for (k, &(ya, yb)) in split_pairs.iter().enumerate() {
            let lhs = random_set_moment(&values[..3], &probs[..3], alpha);
            let split_probs = [probs[0], probs[1], ya, yb];
            let rhs = random_set_moment(&values, &split_probs, alpha);
            report.push(
                format!("prop2_split_alpha={alpha}_case={k}"),
                lhs,
                rhs,
                EXACT_TOL,
            );
        }
    }

    // Generalized means: (sum e^{1/a})^a <= |S|^{a-1} sum e, on sets <= 6.
    for &alpha in alpha_list {
        if alpha <= 1.0 {
            continue;
        }
        let sets: [&[f64]; 4] = [
            &[1.0, 1.0],
            &[0.5, 2.0, 4.0],
            &[3.0, 0.1, 0.1, 5.0, 2.0],
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        ];
        for (k, set) in sets.iter().enumerate() {
            let lhs = set
                .iter()
                .map(|e| e.powf(1.0 / alpha))
                .sum::<f64>()
                .powf(alpha);
            let rhs = (set.len() as f64).powf(alpha - 1.0) * set.iter().sum::<f64>();
            report.push(
                format!("prop3_means_alpha={alpha}_case={k}"),
                lhs,
                rhs,
                EXACT_TOL,
            );
        }
    }

    // Bernoulli-sum moments are dominated by Poisson moments of equal mean:
    // exact enumeration vs truncated series.
    for &alpha in alpha_list {
        let prob_sets: [&[f64]; 3] = [&[0.25, 0.25], &[0.1, 0.2, 0.3], &[0.5, 0.3]];
        for (k, probs) in prob_sets.iter().enumerate() {
            let a: f64 = probs.iter().sum();
            let lhs = binomial_moment_exact(probs, alpha);
            let rhs = poisson_moment(a, alpha, EXACT_TOL).expect("series converges");
            report.push(
                format!("prop4_binom_vs_poisson_alpha={alpha}_case={k}"),
                lhs,
                rhs,
                EXACT_TOL,
            );
        }
    }

    // Poisson moment scaling: E[P_l^a] <= l E[P_1^a] for l <= 1 and
    // E[P_l^a] <= l^a E[P_1^a] for l > 1. Series vs series.
    for &alpha in alpha_list {
        let bell = generalized_bell(alpha, EXACT_TOL).expect("series converges");
        for &lambda in lambda_list {
            let lhs = poisson_moment(lambda, alpha, EXACT_TOL).expect("series converges");
            if lambda <= 1.0 {
                report.push(
                    format!("prop5a_lambda={lambda}_alpha={alpha}"),
                    lhs,
                    lambda * bell,
                    EXACT_TOL,
                );
            } else {
                report.push(
                    format!("prop5b_lambda={lambda}_alpha={alpha}"),
                    lhs,
                    lambda.powf(alpha) * bell,
                    EXACT_TOL,
                );
            }
        }
    }

    report
}
