//! Piecewise expanding interval maps.
//!
//! A map τ : [0,1] → [0,1] is described by a strictly increasing partition
//! 0 = a_0 < a_1 < … < a_q = 1 and one monotone C^{1+ε} branch per
//! partition interval, with |τ′| ≥ s > 1 on every branch. Branch inverses
//! are recovered numerically (bracketed bisection with Newton
//! acceleration), which is all the transfer-operator machinery needs.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One monotone branch of a piecewise map.
#[derive(Clone)]
pub struct Branch {
    /// Domain [a, b] inside the partition.
    pub domain: (f64, f64),
    /// Image interval [min, max] ⊆ [0, 1].
    pub image: (f64, f64),
    pub increasing: bool,
    f: Evaluator,
    df: Evaluator,
}

impl Branch {
    pub fn new(
        domain: (f64, f64),
        image: (f64, f64),
        increasing: bool,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { domain, image, increasing, f: Arc::new(f), df: Arc::new(df) }
    }

    pub fn linear(domain: (f64, f64), slope: f64, intercept: f64) -> Self {
        let lo = slope * domain.0 + intercept;
        let hi = slope * domain.1 + intercept;
        let image = if slope >= 0.0 { (lo, hi) } else { (hi, lo) };
        Self::new(domain, image, slope >= 0.0, move |x| slope * x + intercept, move |_| slope)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        (self.df)(x)
    }

    pub fn contains_in_image(&self, y: f64) -> bool {
        y >= self.image.0 && y <= self.image.1
    }
}

impl fmt::Debug for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Branch")
            .field("domain", &self.domain)
            .field("image", &self.image)
            .field("increasing", &self.increasing)
            .finish()
    }
}

/// Piecewise expanding map with claimed expansion s and Hölder exponent ε
/// for τ′ (the exponent is metadata; only the expansion is sample-checked).
#[derive(Clone, Debug)]
pub struct PiecewiseMap {
    pub partition: Vec<f64>,
    pub branches: Vec<Branch>,
    pub expansion_s: f64,
    pub holder_eps: f64,
    /// Short provenance string for reports ("doubling", "sine(eta=0.05)", …).
    pub id: String,
}

/// Outcome of the sampled validation of a map.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub min_abs_derivative: f64,
    pub monotone_ok: Vec<bool>,
    pub image_ok: Vec<bool>,
    /// max |τ′(x) − τ′(y)| / |x − y|^ε over sampled pairs within a branch.
    pub sampled_holder_constant: f64,
    pub passed: bool,
}

const IMAGE_TOL: f64 = 1e-12;

impl PiecewiseMap {
    pub fn new(
        partition: Vec<f64>,
        branches: Vec<Branch>,
        expansion_s: f64,
        holder_eps: f64,
        id: impl Into<String>,
    ) -> Result<Self> {
        if partition.len() < 2 {
            return Err(Error::Structural("partition needs at least two points".into()));
        }
        if partition[0] != 0.0 || *partition.last().unwrap() != 1.0 {
            return Err(Error::Structural(format!(
                "partition endpoints must be exactly 0 and 1, got [{}, {}]",
                partition[0],
                partition.last().unwrap()
            )));
        }
        if partition.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Structural("partition is not strictly increasing".into()));
        }
        if branches.len() != partition.len() - 1 {
            return Err(Error::Structural(format!(
                "{} branches for {} partition intervals",
                branches.len(),
                partition.len() - 1
            )));
        }
        for (i, br) in branches.iter().enumerate() {
            if br.domain != (partition[i], partition[i + 1]) {
                return Err(Error::Structural(format!(
                    "branch {i} domain {:?} does not match partition interval [{}, {}]",
                    br.domain,
                    partition[i],
                    partition[i + 1]
                )));
            }
            if br.image.0 > br.image.1 {
                return Err(Error::Structural(format!("branch {i} image is reversed")));
            }
        }
        if !(holder_eps > 0.0) {
            return Err(Error::Parameter(format!("holder_eps must be > 0, got {holder_eps}")));
        }
        Ok(Self { partition, branches, expansion_s, holder_eps, id: id.into() })
    }

    /// Convenience constructor for piecewise-linear maps given per-branch
    /// slopes and intercepts; the claimed expansion is min |slope|.
    pub fn piecewise_linear(breakpoints: Vec<f64>, slopes: Vec<f64>, intercepts: Vec<f64>) -> Result<Self> {
        if slopes.len() != intercepts.len() || slopes.len() + 1 != breakpoints.len() {
            return Err(Error::Structural(format!(
                "piecewise_linear needs q slopes, q intercepts, q+1 breakpoints; got {}, {}, {}",
                slopes.len(),
                intercepts.len(),
                breakpoints.len()
            )));
        }
        let branches: Vec<Branch> = slopes
            .iter()
            .zip(&intercepts)
            .enumerate()
            .map(|(i, (&s, &c))| Branch::linear((breakpoints[i], breakpoints[i + 1]), s, c))
            .collect();
        let s_min = slopes.iter().fold(f64::INFINITY, |m, s| m.min(s.abs()));
        Self::new(breakpoints, branches, s_min, 1.0, "piecewise_linear")
    }

    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    /// Branch owning x: right-continuous at interior breakpoints, x = 1
    /// belongs to the last branch.
    pub fn branch_index_of(&self, x: f64) -> usize {
        let q = self.branches.len();
        match self.partition.binary_search_by(|a| a.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(q - 1),
            Err(i) => i.saturating_sub(1).min(q - 1),
        }
    }

    /// τ(x), clamped into [0, 1] against roundoff at branch ends.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Parameter(format!("x = {x} outside the domain [0, 1]")));
        }
        Ok(self.eval_clamped(x))
    }

    pub(crate) fn eval_clamped(&self, x: f64) -> f64 {
        let br = &self.branches[self.branch_index_of(x)];
        br.eval(x).clamp(0.0, 1.0)
    }

    /// Unique x in the branch domain with τ(x) = y, or None when y is
    /// outside the branch image. Bracketed bisection with Newton steps,
    /// absolute tolerance 1e-14, iteration cap 200.
    pub fn inverse_branch(&self, branch_index: usize, y: f64) -> Result<Option<f64>> {
        let q = self.branches.len();
        if branch_index >= q {
            return Err(Error::Parameter(format!("branch index {branch_index} out of range (q = {q})")));
        }
        let br = &self.branches[branch_index];
        if y < br.image.0 - IMAGE_TOL || y > br.image.1 + IMAGE_TOL {
            return Ok(None);
        }
        let y = y.clamp(br.image.0, br.image.1);
        let (a, b) = br.domain;
        // Endpoint images resolve the boundary cases without any search.
        if y == br.image.0 {
            return Ok(Some(if br.increasing { a } else { b }));
        }
        if y == br.image.1 {
            return Ok(Some(if br.increasing { b } else { a }));
        }
        let (mut lo, mut hi) = (a, b);
        // Orient the bracket so f(lo) <= y <= f(hi).
        if !br.increasing {
            std::mem::swap(&mut lo, &mut hi);
        }
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let fx = br.eval(x) - y;
            if fx == 0.0 {
                return Ok(Some(x));
            }
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            if (hi - lo).abs() <= 1e-14 {
                return Ok(Some(0.5 * (lo + hi)));
            }
            let dfx = br.deriv(x);
            let newton = x - fx / dfx;
            // Use the Newton iterate only while it stays strictly inside
            // the current bracket; otherwise bisect.
            x = if dfx != 0.0 && (newton - lo) * (newton - hi) < 0.0 {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        Err(Error::RootFind(format!(
            "branch {branch_index} inverse at y = {y} did not reach 1e-14 in 200 iterations"
        )))
    }

    /// Sampled validation: expansion, monotonicity, image containment and a
    /// Hölder-constant estimate for τ′ on a uniform interior grid of each
    /// branch.
    pub fn validate(&self, samples_per_branch: usize) -> Result<ValidationReport> {
        if samples_per_branch < 2 {
            return Err(Error::Parameter(format!(
                "samples_per_branch must be >= 2, got {samples_per_branch}"
            )));
        }
        let m = samples_per_branch;
        let mut min_abs = f64::INFINITY;
        let mut monotone_ok = Vec::with_capacity(self.branches.len());
        let mut image_ok = Vec::with_capacity(self.branches.len());
        let mut holder = 0.0f64;
        for br in &self.branches {
            let (a, b) = br.domain;
            let xs: Vec<f64> = (0..m).map(|k| a + (b - a) * (k as f64 + 1.0) / (m as f64 + 1.0)).collect();
            let ds: Vec<f64> = xs.iter().map(|&x| br.deriv(x)).collect();
            min_abs = ds.iter().fold(min_abs, |acc, d| acc.min(d.abs()));
            let sign = if br.increasing { 1.0 } else { -1.0 };
            monotone_ok.push(ds.iter().all(|&d| d * sign > 0.0));
            let ya = br.eval(a);
            let yb = br.eval(b);
            image_ok.push(
                (-IMAGE_TOL..=1.0 + IMAGE_TOL).contains(&ya) && (-IMAGE_TOL..=1.0 + IMAGE_TOL).contains(&yb),
            );
            for i in 0..m {
                for j in (i + 1)..m {
                    let gap = (xs[j] - xs[i]).abs().powf(self.holder_eps);
                    if gap > 0.0 {
                        holder = holder.max((ds[j] - ds[i]).abs() / gap);
                    }
                }
            }
        }
        let passed = min_abs > 1.0
            && min_abs + 1e-12 >= self.expansion_s
            && monotone_ok.iter().all(|&b| b)
            && image_ok.iter().all(|&b| b);
        Ok(ValidationReport {
            min_abs_derivative: min_abs,
            monotone_ok,
            image_ok,
            sampled_holder_constant: holder,
            passed,
        })
    }
}

/// Builtin test maps.
///
/// * `doubling`: 2x mod 1 (two linear branches, s = 2).
/// * `sine`: x ↦ 2x + η sin(2πx) mod 1 with 0 < η < 1/(2π); the mod-1
///   breakpoint is exactly 1/2 by symmetry and s = 2 − 2πη.
/// * `markov3`: {2x, 2x − 1, 2x − 3/2} on [0, 1/2], [1/2, 3/4], [3/4, 1];
///   the branch images align with the partition so the invariant density
///   is the exact step function (4/3, 2/3).
pub fn builtin(name: &str, params: &[f64]) -> Result<PiecewiseMap> {
    match name {
        "doubling" => PiecewiseMap::new(
            vec![0.0, 0.5, 1.0],
            vec![
                Branch::linear((0.0, 0.5), 2.0, 0.0),
                Branch::linear((0.5, 1.0), 2.0, -1.0),
            ],
            2.0,
            1.0,
            "doubling",
        ),
        "markov3" => PiecewiseMap::new(
            vec![0.0, 0.5, 0.75, 1.0],
            vec![
                Branch::linear((0.0, 0.5), 2.0, 0.0),
                Branch::linear((0.5, 0.75), 2.0, -1.0),
                Branch::linear((0.75, 1.0), 2.0, -1.5),
            ],
            2.0,
            1.0,
            "markov3",
        ),
        "sine" => {
            let eta = *params.first().ok_or_else(|| {
                Error::Parameter("sine map needs a parameter eta in (0, 1/(2*pi))".into())
            })?;
            let max_eta = 1.0 / (2.0 * std::f64::consts::PI);
            if !(eta > 0.0 && eta < max_eta) {
                return Err(Error::Parameter(format!(
                    "eta = {eta} outside (0, {max_eta:.6}): the map would not be expanding"
                )));
            }
            let tau = move |x: f64| 2.0 * x + eta * (2.0 * std::f64::consts::PI * x).sin();
            let dtau = move |x: f64| 2.0 + 2.0 * std::f64::consts::PI * eta * (2.0 * std::f64::consts::PI * x).cos();
            let s = 2.0 - 2.0 * std::f64::consts::PI * eta;
            PiecewiseMap::new(
                vec![0.0, 0.5, 1.0],
                vec![
                    Branch::new((0.0, 0.5), (0.0, 1.0), true, tau, dtau),
                    Branch::new((0.5, 1.0), (0.0, 1.0), true, move |x| tau(x) - 1.0, dtau),
                ],
                s,
                1.0,
                format!("sine(eta={eta})"),
            )
        }
        other => Err(Error::Parameter(format!(
            "unknown builtin map '{other}' (expected doubling, sine, markov3)"
        ))),
    }
}
