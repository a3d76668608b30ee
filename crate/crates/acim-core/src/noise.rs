//! Convolution noise on the circle: the C¹ bump q, its periodization
//! q_δ^per(x, y) = Σ_m δ^{-1} q((x − y + m)/δ), the smoothing operator Q_δ
//! as a circulant transfer matrix, inverse-CDF noise sampling, and the
//! joint expansion–kernel condition check.
//!
//! The default (and currently only) profile is the biweight bump
//! q(z) = (15/16)(1 − z²)² on [−1, 1]: the simplest polynomial bump that is
//! C¹ with q′ ∈ L^∞, with closed forms for the derivative bound
//! ‖q′‖_∞ = 5/(2√3) and the CDF.

use crate::error::{Error, Result};
use crate::maps::PiecewiseMap;
use crate::transfer::{MatrixKind, TransferMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelProfile {
    Biweight,
}

impl KernelProfile {
    pub fn as_str(&self) -> &'static str {
        match self {
            KernelProfile::Biweight => "biweight",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "biweight" => Ok(KernelProfile::Biweight),
            other => Err(Error::Parameter(format!("unknown kernel profile '{other}'"))),
        }
    }
}

const CDF_POINTS: usize = 4097;

/// A compactly supported C¹ probability bump together with the noise
/// intensity δ ∈ (0, 1/4). The periodization argument (at most two nonzero
/// wrap terms) requires δ < 1/4, so larger values are rejected outright.
#[derive(Debug, Clone)]
pub struct NoiseKernel {
    pub profile: KernelProfile,
    pub delta: f64,
    /// ‖q′‖_∞ (5/(2√3) for the biweight, attained at z = 1/√3).
    pub deriv_bound: f64,
    cdf: Vec<f64>,
}

impl NoiseKernel {
    pub fn new(profile: KernelProfile, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.25) {
            return Err(Error::Parameter(format!(
                "noise intensity delta = {delta} outside the open interval (0, 1/4)"
            )));
        }
        let deriv_bound = match profile {
            KernelProfile::Biweight => 2.5 / 3.0f64.sqrt(),
        };
        let kernel = Self { profile, delta, deriv_bound, cdf: Vec::new() };
        // Construction-time sanity: unit mass by quadrature, C¹ at the
        // support boundary.
        let mass = gauss8(-1.0, 0.0, |z| kernel.value(z)) + gauss8(0.0, 1.0, |z| kernel.value(z));
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::Internal(format!("kernel mass {mass} is not 1")));
        }
        if kernel.value(1.0) != 0.0 || kernel.value(-1.0) != 0.0 {
            return Err(Error::Internal("kernel does not vanish at the support boundary".into()));
        }
        if kernel.deriv(1.0) != 0.0 || kernel.deriv(-1.0) != 0.0 {
            return Err(Error::Internal("kernel derivative does not vanish at the boundary".into()));
        }
        let mut cdf: Vec<f64> = (0..CDF_POINTS)
            .map(|i| kernel.cdf_closed(-1.0 + 2.0 * i as f64 / (CDF_POINTS - 1) as f64))
            .collect();
        // The closed form evaluates to 0 and 1 at the support boundary only
        // up to roundoff; pin the table ends so inversion is exact there.
        cdf[0] = 0.0;
        cdf[CDF_POINTS - 1] = 1.0;
        Ok(Self { cdf, ..kernel })
    }

    /// q(z), zero for |z| ≥ 1.
    pub fn value(&self, z: f64) -> f64 {
        if z.abs() >= 1.0 {
            return 0.0;
        }
        match self.profile {
            KernelProfile::Biweight => {
                let u = 1.0 - z * z;
                15.0 / 16.0 * u * u
            }
        }
    }

    /// q′(z).
    pub fn deriv(&self, z: f64) -> f64 {
        if z.abs() >= 1.0 {
            return 0.0;
        }
        match self.profile {
            KernelProfile::Biweight => -15.0 / 4.0 * z * (1.0 - z * z),
        }
    }

    /// ‖q′‖₁ (diagnostic only; the joint condition uses 4‖q′‖_∞).
    pub fn deriv_l1(&self) -> f64 {
        match self.profile {
            KernelProfile::Biweight => 2.0 * self.value(0.0),
        }
    }

    /// K(t) = ∫_{−1}^t q.
    fn cdf_closed(&self, t: f64) -> f64 {
        let t = t.clamp(-1.0, 1.0);
        match self.profile {
            KernelProfile::Biweight => {
                0.5 + 15.0 / 16.0 * (t - 2.0 * t.powi(3) / 3.0 + t.powi(5) / 5.0)
            }
        }
    }

    /// Standard deviation of the scaled noise δ·ξ (δ/√7 for the biweight).
    pub fn noise_std(&self) -> f64 {
        match self.profile {
            KernelProfile::Biweight => self.delta / 7.0f64.sqrt(),
        }
    }

    /// q_δ^per(x, y) = Σ_m δ^{-1} q((x − y + m)/δ); with δ < 1/4 at most
    /// two of the wrap terms are nonzero.
    pub fn periodized(&self, x: f64, y: f64) -> f64 {
        let d = self.delta;
        [-1.0, 0.0, 1.0]
            .iter()
            .map(|m| self.value((x - y + m) / d) / d)
            .sum()
    }

    /// δ·K^{-1}(u) by monotone linear interpolation of the tabulated CDF;
    /// maps [0, 1) onto [−δ, δ).
    pub fn sample(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let idx = self.cdf.partition_point(|&k| k <= u);
        if idx == 0 {
            return -self.delta;
        }
        if idx >= CDF_POINTS {
            return self.delta;
        }
        let (k0, k1) = (self.cdf[idx - 1], self.cdf[idx]);
        let dz = 2.0 / (CDF_POINTS - 1) as f64;
        let z0 = -1.0 + dz * (idx - 1) as f64;
        let frac = if k1 > k0 { (u - k0) / (k1 - k0) } else { 0.0 };
        self.delta * (z0 + frac * dz).clamp(-1.0, 1.0)
    }
}

/// 8-node Gauss–Legendre on [a, b]; exact for polynomials of degree ≤ 15,
/// which covers every smooth piece of the (kernel × tent) integrands here.
fn gauss8(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    const NODES: [f64; 4] = [
        0.1834346424956498,
        0.5255324099163290,
        0.7966664774136267,
        0.9602898564975363,
    ];
    const WEIGHTS: [f64; 4] = [
        0.3626837833783620,
        0.3137066458778873,
        0.2223810344533745,
        0.1012285362903763,
    ];
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for (x, w) in NODES.iter().zip(WEIGHTS) {
        sum += w * (f(mid + half * x) + f(mid - half * x));
    }
    sum * half
}

/// Integrates f over [a, b] split at the interior points of `kinks`,
/// Gauss–Legendre per piece, with `levels` extra halvings of every piece.
fn piecewise_gauss(a: f64, b: f64, kinks: &[f64], levels: u32, f: &impl Fn(f64) -> f64) -> f64 {
    let mut pts: Vec<f64> = std::iter::once(a)
        .chain(kinks.iter().copied().filter(|&k| k > a && k < b))
        .chain(std::iter::once(b))
        .collect();
    pts.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
    let splits = 1usize << levels;
    let mut total = 0.0;
    for seg in pts.windows(2) {
        let h = (seg[1] - seg[0]) / splits as f64;
        for s in 0..splits {
            let lo = seg[0] + s as f64 * h;
            total += gauss8(lo, lo + h, f);
        }
    }
    total
}

/// Circulant Ulam matrix of the smoothing operator Q_δ on n uniform cells:
/// Q_{ij} = n ∫_{A_i} ∫_{A_j} q_δ^per(x, y) dy dx depends only on
/// (i − j) mod n, and the double integral collapses to the tent identity
/// ∫_{A_i}∫_{A_j} g(x−y) dy dx = ∫_{−w}^{w} (w − |t|) g((i−j)w + t) dt.
pub fn noise_matrix(kernel: &NoiseKernel, n: usize) -> Result<TransferMatrix> {
    if n == 0 {
        return Err(Error::Parameter("noise matrix needs n >= 1".into()));
    }
    let w = 1.0 / n as f64;
    let d = kernel.delta;
    let mut c = vec![0.0; n];
    for (o, slot) in c.iter_mut().enumerate() {
        let shift = o as f64 * w;
        // Distance from the shift to the nearest integer decides whether
        // this offset can be nonzero at all.
        if shift.min(1.0 - shift) > d + w {
            continue;
        }
        let integrand = |t: f64| (w - t.abs()) * kernel.periodized(shift + t, 0.0);
        // Kinks: the tent corner at 0 and the support edges of each wrap
        // term of the periodized kernel.
        let mut kinks = vec![0.0];
        for m in [-1.0, 0.0, 1.0] {
            for s in [-d, d] {
                kinks.push(s - m - shift);
            }
        }
        let coarse = piecewise_gauss(-w, w, &kinks, 0, &integrand);
        let mut prev = coarse;
        let mut value = None;
        for level in 1..=6u32 {
            let refined = piecewise_gauss(-w, w, &kinks, level, &integrand);
            if (refined - prev).abs() < 1e-12 {
                value = Some(refined);
                break;
            }
            prev = refined;
        }
        let Some(v) = value else {
            return Err(Error::Quadrature(format!(
                "offset {o} integral did not stabilize below 1e-12"
            )));
        };
        *slot = v * n as f64;
    }

    // The continuum kernel is doubly stochastic, so every row and column
    // sum equals Σ c up to quadrature roundoff.
    let total: f64 = c.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::Internal(format!(
            "noise matrix sums deviate from 1 by {:.3e} before renormalization",
            (total - 1.0).abs()
        )));
    }
    // Symmetrize the generator (c_o = c_{n−o} holds analytically) and
    // rescale it; dividing the generator keeps the matrix exactly doubly
    // stochastic and circulant.
    for o in 1..=(n - 1) / 2 {
        let avg = 0.5 * (c[o] + c[n - o]);
        c[o] = avg;
        c[n - o] = avg;
    }
    let total: f64 = c.iter().sum();
    for v in &mut c {
        *v /= total;
    }
    Ok(TransferMatrix::from_circulant(MatrixKind::Noise, c))
}

/// The joint expansion–kernel condition: C̃₁ = (1 + 2^{1+1/p}) · 2^{1/p} ·
/// max{1, 4‖q′‖_∞}, the contraction bound α₀ ≤ s^{−1/p}, and the expansion
/// s > C̃₁^p it would take to satisfy α₀ < 1/C̃₁. Reported, never enforced:
/// the condition is sufficient, not necessary, and the numerics are
/// expected to converge far outside it.
#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub c_tilde_1: f64,
    pub alpha0_bound: f64,
    pub satisfied: bool,
    pub required_s: f64,
}

impl AssumptionReport {
    pub fn from_constants(expansion_s: f64, p: f64, deriv_bound: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::Parameter(format!("seminorm exponent p must be >= 1, got {p}")));
        }
        let c_tilde_1 =
            (1.0 + 2.0f64.powf(1.0 + 1.0 / p)) * 2.0f64.powf(1.0 / p) * 1.0f64.max(4.0 * deriv_bound);
        let alpha0_bound = expansion_s.powf(-1.0 / p);
        Ok(Self {
            c_tilde_1,
            alpha0_bound,
            satisfied: alpha0_bound < 1.0 / c_tilde_1,
            required_s: c_tilde_1.powf(p),
        })
    }
}

pub fn check_assumption(map: &PiecewiseMap, kernel: &NoiseKernel, p: f64) -> Result<AssumptionReport> {
    AssumptionReport::from_constants(map.expansion_s, p, kernel.deriv_bound)
}
