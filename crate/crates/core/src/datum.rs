//! Initial data as finite Fourier sine expansions `f = Σ f̂_k sin(kx)` on `[0, π]`.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finitely supported initial datum with smoothness index `r`.
///
/// `coeffs[i]` is `f̂_{i+1}`. The coefficients are the exact binary values of
/// the stored doubles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDatum {
    pub r: f64,
    pub coeffs: Vec<f64>,
    /// Set when membership in the unit ball `F_r` has been checked.
    #[serde(skip)]
    declared_ball: bool,
}

impl InitialDatum {
    pub fn new(r: f64, coeffs: Vec<f64>) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidArgument(format!("smoothness r must be positive, got {r}")));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("coefficient {} is not finite", i + 1)));
        }
        Ok(InitialDatum { r, coeffs, declared_ball: false })
    }

    /// Like [`InitialDatum::new`], additionally asserting `f ∈ F_r`.
    pub fn in_ball(r: f64, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(r, coeffs)?.declare_ball()
    }

    pub fn declare_ball(mut self) -> Result<Self> {
        let norm = self.ball_norm();
        if norm > 1.0 {
            return Err(Error::InvalidArgument(format!("datum is outside the unit ball F_r (norm {norm})")));
        }
        self.declared_ball = true;
        Ok(self)
    }

    pub fn zero(r: f64, len: usize) -> Self {
        InitialDatum { r, coeffs: vec![0.0; len], declared_ball: true }
    }

    pub fn is_declared_ball(&self) -> bool {
        self.declared_ball
    }

    pub fn support_len(&self) -> usize {
        self.coeffs.len()
    }

    /// `f̂_k`, zero outside the stored support.
    pub fn coefficient(&self, k: usize) -> f64 {
        assert!(k >= 1);
        self.coeffs.get(k - 1).copied().unwrap_or(0.0)
    }

    /// `(Σ k^{2r} f̂_k²)^{1/2}`; the datum is in `F_r` iff this is at most 1.
    pub fn ball_norm(&self) -> f64 {
        self.coeffs.iter().enumerate().map(|(i, c)| ((i + 1) as f64).powf(2.0 * self.r) * c * c).sum::<f64>().sqrt()
    }

    /// `‖f - g‖_{L²} = ((π/2) Σ (f̂_k - ĝ_k)²)^{1/2}`.
    pub fn l2_distance(&self, other: &InitialDatum) -> f64 {
        l2_distance(self, other)
    }

    /// `‖f‖_{L²}` restricted to modes `k > n`.
    pub fn tail_l2(&self, n: usize) -> f64 {
        let s: f64 = self.coeffs.iter().skip(n).map(|c| c * c).sum();
        (PI / 2.0 * s).sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: InitialDatum = serde_json::from_str(text)?;
        InitialDatum::new(raw.r, raw.coeffs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("datum serializes")
    }
}

pub fn l2_distance(f: &InitialDatum, g: &InitialDatum) -> f64 {
    let len = f.coeffs.len().max(g.coeffs.len());
    let s: f64 = (1..=len)
        .map(|k| {
            let d = f.coefficient(k) - g.coefficient(k);
            d * d
        })
        .sum();
    (PI / 2.0 * s).sqrt()
}

/// Seeded member of `F_r` supported on `k ≤ k_max` with `ball_norm = margin`.
///
/// Coefficients follow `±u_k k^{-(r+1)}` with uniform `u_k ∈ [1/2, 1]` and
/// random signs, then are rescaled onto the sphere of radius `margin`.
pub fn random_ball_member(r: f64, k_max: usize, margin: f64, seed: u64) -> Result<InitialDatum> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("support size K must be at least 1".into()));
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::InvalidArgument(format!("margin must lie in (0, 1), got {margin}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs: Vec<f64> = (1..=k_max)
        .map(|k| {
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let mag: f64 = rng.gen_range(0.5..=1.0);
            sign * mag * (k as f64).powf(-(r + 1.0))
        })
        .collect();
    let probe = InitialDatum::new(r, coeffs.clone())?;
    let scale = margin / probe.ball_norm();
    for c in &mut coeffs {
        *c *= scale;
    }
    InitialDatum::in_ball(r, coeffs)
}

/// Guaranteed `L²` tail bound `n^{-r}` for `f ∈ F_r` truncated after mode `n`.
pub fn truncation_tail_bound(r: f64, n: usize) -> f64 {
    (n as f64).powf(-r)
}
