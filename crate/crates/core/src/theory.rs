//! Budget and pull-count bounds for Successive Halving with deepening.
//!
//! Quantities with integer inputs are evaluated in exact rational
//! arithmetic. Everything involving logarithms or real-valued limits uses
//! `f64`, compared with [`TOLERANCE`] where rounding could matter.

use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::arm::{envelope_inverse, Envelope, EnvelopeError};

/// Slack for floating comparisons of real-valued bounds.
pub const TOLERANCE: f64 = 1e-9;

pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("need at least two arms, got {0}")]
    TooFewArms(usize),
    #[error("limits must be sorted ascending and finite")]
    UnsortedLimits,
    #[error("old pool size {n_old} exceeds pool size {n}")]
    OldExceedsPool { n_old: u64, n: u64 },
    #[error("eta must be at least 2, got {0}")]
    InvalidEta(u64),
    #[error("eps must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error("bound denominator vanishes for these parameters")]
    DegenerateDenominator,
    #[error("parameters too large for exact arithmetic")]
    Overflow,
    #[error("{0}")]
    Domain(String),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
}

/// A set of arms with known limits and a convergence envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    /// `nu_1 <= ... <= nu_n`.
    pub limits: Vec<f64>,
    pub envelope: Envelope,
    pub eta: u64,
    /// Maximum level `R`, caps every inverse-envelope term.
    pub max_size: u64,
    /// Index of the last halving round.
    pub rounds: u32,
    /// Number of previously promoted arms `ñ`.
    pub n_old: u64,
    pub eps: f64,
}

impl InstanceSpec {
    fn validate(&self) -> Result<(), TheoryError> {
        if self.limits.len() < 2 {
            return Err(TheoryError::TooFewArms(self.limits.len()));
        }
        if self.limits.iter().any(|v| !v.is_finite()) || self.limits.windows(2).any(|w| w[1] < w[0])
        {
            return Err(TheoryError::UnsortedLimits);
        }
        if self.eta < 2 {
            return Err(TheoryError::InvalidEta(self.eta));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(TheoryError::NonPositiveEps(self.eps));
        }
        let n = self.limits.len() as u64;
        if self.n_old > n {
            return Err(TheoryError::OldExceedsPool {
                n_old: self.n_old,
                n,
            });
        }
        Ok(())
    }
}

/// Smallest `k` with `eta^k >= n`.
pub fn ceil_log(n: u64, eta: u64) -> u32 {
    let mut k = 0;
    let mut p: u128 = 1;
    while p < n as u128 {
        p *= eta as u128;
        k += 1;
    }
    k
}

/// `max_{i=2..n} i * (1 + min{R, gamma^-1(max{eps/4, (nu_i - nu_1)/2})})`.
fn inner_max(limits: &[f64], env: &Envelope, eps: f64, cap: u64) -> Result<u64, TheoryError> {
    let nu1 = limits[0];
    let mut best = 0u64;
    for (idx, &nu) in limits.iter().enumerate().skip(1) {
        let i = idx as u64 + 1;
        let y = (eps / 4.0).max((nu - nu1) / 2.0);
        let j = envelope_inverse(env, y, cap)?;
        best = best.max(i * (1 + j));
    }
    Ok(best)
}

/// Sufficient budget for a deepened halving run to return an arm within
/// `eps / 2` of the best limit:
/// `eta * ceil(log_eta n) * max_{i>=2} i * (1 + min{R, gamma^-1(...)})`.
pub fn z_id_sh(spec: &InstanceSpec) -> Result<u64, TheoryError> {
    spec.validate()?;
    let n = spec.limits.len() as u64;
    let inner = inner_max(&spec.limits, &spec.envelope, spec.eps, spec.max_size)?;
    Ok(spec.eta * ceil_log(n, spec.eta) as u64 * inner)
}

/// [`z_id_sh`] with the round count `ceil(log_eta n)` replaced by the
/// bracket form `ceil(log_eta ceil((floor(log_eta R) + 1) eta^s / (s + 1)))`
/// for `s = spec.rounds`.
pub fn z_id_sh_bracket_form(spec: &InstanceSpec) -> Result<u64, TheoryError> {
    spec.validate()?;
    let m = floor_log(spec.max_size, spec.eta) as u64;
    let pow = spec
        .eta
        .checked_pow(spec.rounds)
        .ok_or(TheoryError::Overflow)?;
    let n_s = ((m + 1) * pow).div_ceil(spec.rounds as u64 + 1);
    let inner = inner_max(&spec.limits, &spec.envelope, spec.eps, spec.max_size)?;
    Ok(spec.eta * ceil_log(n_s, spec.eta) as u64 * inner)
}

/// `floor(log_eta x)` for `x >= 1`.
pub fn floor_log(x: u64, eta: u64) -> u32 {
    let mut k = 0;
    let mut p: u128 = eta as u128;
    while p <= x as u128 {
        p *= eta as u128;
        k += 1;
    }
    k
}

/// Raw ratio and its clamp to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PullBound {
    pub raw: Rational,
    pub clamped: Rational,
}

impl PullBound {
    fn new(raw: Rational) -> Self {
        let clamped = raw.max(Rational::zero()).min(Rational::one());
        Self { raw, clamped }
    }

    pub fn raw_f64(&self) -> f64 {
        self.raw.to_f64().unwrap_or(f64::NAN)
    }

    pub fn clamped_f64(&self) -> f64 {
        self.clamped.to_f64().unwrap_or(f64::NAN)
    }
}

struct Terms {
    n: i128,
    n_old: i128,
    s1: i128,
    r: i128,
    eta: i128,
    eta_s: i128,
    eta_s1: i128,
}

fn terms(n: u64, n_old: u64, s: u32, max_size: u64, eta: u64) -> Result<Terms, TheoryError> {
    if eta < 2 {
        return Err(TheoryError::InvalidEta(eta));
    }
    if n_old > n {
        return Err(TheoryError::OldExceedsPool { n_old, n });
    }
    let eta_s = (eta as i128).checked_pow(s).ok_or(TheoryError::Overflow)?;
    let eta_s1 = eta_s
        .checked_mul(eta as i128)
        .ok_or(TheoryError::Overflow)?;
    if n > 1 << 40 || max_size > 1 << 40 || s > 60 {
        return Err(TheoryError::Overflow);
    }
    Ok(Terms {
        n: n as i128,
        n_old: n_old as i128,
        s1: s as i128 + 1,
        r: max_size as i128,
        eta: eta as i128,
        eta_s,
        eta_s1,
    })
}

/// `(s+1)(nR + eta^s)(eta-1) - (eta^(s+1) - 1)(R + n)`.
fn sh_denominator(t: &Terms) -> i128 {
    t.s1 * (t.n * t.r + t.eta_s) * (t.eta - 1) - (t.eta_s1 - 1) * (t.r + t.n)
}

/// Guaranteed fraction of fresh-run pulls spent by efficient deepening with
/// `n_old` of `n` arms inherited.
pub fn eid_pull_bound(
    n: u64,
    n_old: u64,
    s: u32,
    max_size: u64,
    eta: u64,
) -> Result<PullBound, TheoryError> {
    let t = terms(n, n_old, s, max_size, eta)?;
    let den = sh_denominator(&t);
    if den == 0 {
        return Err(TheoryError::DegenerateDenominator);
    }
    let num = t.s1 * (t.n_old * t.r + t.eta_s) * (t.eta - 1) - (t.eta_s1 - 1) * (2 * t.r + t.n);
    Ok(PullBound::new(Rational::one() - Rational::new(num, den)))
}

/// Guaranteed fraction of fresh-run pulls spent by preserving or discarding
/// deepening with `n_old` of `n` arms inherited.
pub fn pdid_pull_bound(
    n: u64,
    n_old: u64,
    s: u32,
    max_size: u64,
    eta: u64,
) -> Result<PullBound, TheoryError> {
    let t = terms(n, n_old, s, max_size, eta)?;
    let den = sh_denominator(&t);
    if den == 0 {
        return Err(TheoryError::DegenerateDenominator);
    }
    let num = (t.eta - 1) * (t.s1 * t.eta_s + t.r * t.n_old) - (t.eta_s1 - 1) * (t.r + t.n);
    Ok(PullBound::new(Rational::one() - Rational::new(num, den)))
}

/// Lower bound on the pulls of a fresh halving run on `n` arms with
/// maximum level `R` and `s + 1` rounds.
pub fn sh_pull_lower_bound(
    n: u64,
    s: u32,
    max_size: u64,
    eta: u64,
) -> Result<Rational, TheoryError> {
    let t = terms(n, 0, s, max_size, eta)?;
    Ok(Rational::new(sh_denominator(&t), t.eta_s * (t.eta - 1)))
}

/// Upper bound on the pulls of efficient deepening at base level `r`:
/// `(s+1)(n - ñ) r + r (eta^(s+1) - 1) / (eta - 1)`.
pub fn eid_pull_upper(
    n: u64,
    n_old: u64,
    s: u32,
    r: u64,
    eta: u64,
) -> Result<Rational, TheoryError> {
    let t = terms(n, n_old, s, r, eta)?;
    Ok(Rational::from_integer(t.s1 * (t.n - t.n_old) * t.r)
        + Rational::new(t.r * (t.eta_s1 - 1), t.eta - 1))
}

/// Upper bound on the pulls of preserving or discarding deepening at base
/// level `r`: `r ((s+1) n - ñ)`.
pub fn pdid_pull_upper(
    n: u64,
    n_old: u64,
    s: u32,
    r: u64,
    eta: u64,
) -> Result<Rational, TheoryError> {
    let t = terms(n, n_old, s, r, eta)?;
    Ok(Rational::from_integer(t.r * (t.s1 * t.n - t.n_old)))
}

/// Number of uniform draws needed so that at least one lands in a region
/// of probability `alpha` with probability `1 - delta`:
/// `ceil(log_(1-alpha) delta)`.
pub fn sample_size_for_confidence(alpha: f64, delta: f64) -> Result<u64, TheoryError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(TheoryError::Domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(TheoryError::Domain(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let x = delta.ln() / (1.0 - alpha).ln();
    let k = if (x - x.round()).abs() < TOLERANCE {
        x.round()
    } else {
        x.ceil()
    };
    Ok((k as u64).max(1))
}

/// Inputs of the whole-run guarantee.
#[derive(Debug, Clone, PartialEq)]
pub struct Thm3Inputs {
    pub eta: u64,
    pub max_size: u64,
    pub alpha: f64,
    pub delta: f64,
    pub eps: f64,
    /// Sorted limits of the configurations of every bracket.
    pub bracket_limits: Vec<Vec<f64>>,
    pub envelope: Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thm3Report {
    /// `ceil(log_(1-alpha) delta) (eta - 1) + 1`.
    pub sampling_branch: f64,
    pub budget_branch: f64,
    /// `log_eta log_eta R + 4 + m/2 - log_eta((m+1)!)/(m+1)` with `m = floor(log_eta R)`.
    pub log_factor: f64,
    pub gamma_bar_inv: f64,
    pub holds: bool,
}

/// `log_eta((m+1)!)` summed in log space.
fn log_factorial(m: u32, eta: f64) -> f64 {
    (2..=m as u64 + 1).map(|k| (k as f64).ln()).sum::<f64>() / eta.ln()
}

/// Evaluates both lower bounds on `R` of the whole-run guarantee and
/// whether `R` dominates them.
pub fn thm3_condition(inp: &Thm3Inputs) -> Result<Thm3Report, TheoryError> {
    if inp.eta < 2 {
        return Err(TheoryError::InvalidEta(inp.eta));
    }
    if inp.max_size < inp.eta {
        return Err(TheoryError::Domain(format!(
            "R = {} is below eta = {}: log_eta log_eta R is not defined or negative",
            inp.max_size, inp.eta
        )));
    }
    if inp.eps.is_nan() || inp.eps <= 0.0 {
        return Err(TheoryError::NonPositiveEps(inp.eps));
    }
    let k = sample_size_for_confidence(inp.alpha, inp.delta)?;
    let sampling = (k * (inp.eta - 1) + 1) as f64;

    let eta = inp.eta as f64;
    let m = floor_log(inp.max_size, inp.eta);
    let log_eta_r = (inp.max_size as f64).ln() / eta.ln();
    let log_factor =
        log_eta_r.ln() / eta.ln() + 4.0 + m as f64 / 2.0 - log_factorial(m, eta) / (m as f64 + 1.0);

    let mut gbar = 0u64;
    for limits in &inp.bracket_limits {
        if limits.windows(2).any(|w| w[1] < w[0]) || limits.iter().any(|v| !v.is_finite()) {
            return Err(TheoryError::UnsortedLimits);
        }
        if limits.len() >= 2 {
            gbar = gbar.max(inner_max(limits, &inp.envelope, inp.eps, inp.max_size)?);
        }
    }
    let gamma_bar_inv = gbar as f64;
    let budget = eta * log_factor * gamma_bar_inv;
    let r = inp.max_size as f64;
    Ok(Thm3Report {
        sampling_branch: sampling,
        budget_branch: budget,
        log_factor,
        gamma_bar_inv,
        holds: r + TOLERANCE >= sampling && r + TOLERANCE >= budget,
    })
}

/// Evaluated bounds for one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub z_id_sh: f64,
    pub z_id_sh_bracket_form: f64,
    pub eid_fraction_raw: f64,
    pub eid_fraction_clamped: f64,
    pub pdid_fraction_raw: f64,
    pub pdid_fraction_clamped: f64,
    /// `(sampling branch, budget branch)`.
    pub thm3_min_r_terms: (f64, f64),
    pub gamma_bar_inv: f64,
}

impl BoundReport {
    /// Pull fractions are `NaN` when their denominator vanishes.
    pub fn evaluate(spec: &InstanceSpec, thm3: &Thm3Report) -> Result<Self, TheoryError> {
        let n = spec.limits.len() as u64;
        let frac = |b: Result<PullBound, TheoryError>| match b {
            Ok(b) => Ok((b.raw_f64(), b.clamped_f64())),
            Err(TheoryError::DegenerateDenominator) => Ok((f64::NAN, f64::NAN)),
            Err(e) => Err(e),
        };
        let (er, ec) = frac(eid_pull_bound(
            n,
            spec.n_old,
            spec.rounds,
            spec.max_size,
            spec.eta,
        ))?;
        let (pr, pc) = frac(pdid_pull_bound(
            n,
            spec.n_old,
            spec.rounds,
            spec.max_size,
            spec.eta,
        ))?;
        Ok(Self {
            z_id_sh: z_id_sh(spec)? as f64,
            z_id_sh_bracket_form: z_id_sh_bracket_form(spec)? as f64,
            eid_fraction_raw: er,
            eid_fraction_clamped: ec,
            pdid_fraction_raw: pr,
            pdid_fraction_clamped: pc,
            thm3_min_r_terms: (thm3.sampling_branch, thm3.budget_branch),
            gamma_bar_inv: thm3.gamma_bar_inv,
        })
    }
}
