//! Comparison estimators: local linear kernel regression of squared scaled
//! increments, realized volatility and the Riemann sum of integrated volatility.

use crate::error::{Error, Result};
use crate::sde::Path;

/// `K(u) = 3/4 (1 - u^2)` on `|u| <= 1`.
#[inline]
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Local linear smoother with an Epanechnikov kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub bandwidth: f64,
}

impl KernelConfig {
    pub fn new(bandwidth: f64) -> Result<Self> {
        let c = Self { bandwidth };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        Ok(())
    }

    /// `K_h(d) = K(d / h) / h`
    #[inline]
    pub fn weight(&self, d: f64) -> f64 {
        epanechnikov(d / self.bandwidth) / self.bandwidth
    }
}

/// Regression pairs `(X_{k-1}, Z*_k)` with `Z*_k = (X_k - X_{k-1})^2 / dt`.
pub fn regression_pairs(path: &Path) -> Vec<(f64, f64)> {
    path.values.windows(2).map(|w| (w[0], (w[1] - w[0]).powi(2) / path.dt)).collect()
}

/// Relative determinant below which the weighted design counts as singular.
const SINGULAR_REL: f64 = 1e-12;

fn solve_normal(x0: f64, count: usize, s: [f64; 3], t: [f64; 2]) -> Result<(f64, f64)> {
    let det = s[0] * s[2] - s[1] * s[1];
    if count < 2 || !(det > SINGULAR_REL * s[0] * s[2]) {
        return Err(Error::BandwidthTooSmall { x0 });
    }
    Ok(((s[2] * t[0] - s[1] * t[1]) / det, (s[0] * t[1] - s[1] * t[0]) / det))
}

/// Minimizes `sum_k (Z*_k - b0 - b1 (X_{k-1} - x0))^2 K_h(X_{k-1} - x0)`; `b0` estimates `g(x0)`.
pub fn local_linear_fit(path: &Path, x0: f64, config: &KernelConfig) -> Result<(f64, f64)> {
    config.validate()?;
    fit_pairs(&regression_pairs(path), x0, config)
}

/// [`local_linear_fit`] on precomputed pairs, by direct weighted sums.
pub fn fit_pairs(pairs: &[(f64, f64)], x0: f64, config: &KernelConfig) -> Result<(f64, f64)> {
    let (mut s, mut t, mut count) = ([0.0; 3], [0.0; 2], 0usize);
    for &(x, z) in pairs {
        let d = x - x0;
        let w = config.weight(d);
        if w > 0.0 {
            count += 1;
            s[0] += w;
            s[1] += w * d;
            s[2] += w * d * d;
            t[0] += w * z;
            t[1] += w * z * d;
        }
    }
    solve_normal(x0, count, s, t)
}

/// Supports with at most this many pairs are summed directly; prefix-sum
/// differences lose too much precision on small windows.
const DIRECT_MAX: usize = 256;

/// Local linear fits at many points. Pairs are sorted by state and carry
/// prefix sums of `x^j` (`j <= 4`) and `z x^j` (`j <= 3`), so a fit with a
/// wide support costs a binary search: inside the support the kernel is a
/// quadratic in `x`.
#[derive(Debug, Clone)]
pub struct LocalLinear {
    config: KernelConfig,
    sorted: Vec<(f64, f64)>,
    /// Origin of the stored powers, to keep the prefix sums well conditioned.
    centre: f64,
    xs: Vec<f64>,
    /// `prefix[i][j]`: sum over the first `i` pairs of `u^j` (`j < 5`) and `z u^{j-5}` (`j >= 5`), `u = x - centre`.
    prefix: Vec<[f64; 9]>,
}

impl LocalLinear {
    pub fn new(pairs: &[(f64, f64)], config: KernelConfig) -> Result<Self> {
        config.validate()?;
        let mut sorted: Vec<(f64, f64)> = pairs.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let centre =
            if sorted.is_empty() { 0.0 } else { sorted.iter().map(|p| p.0).sum::<f64>() / sorted.len() as f64 };
        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        let mut acc = [0.0; 9];
        prefix.push(acc);
        for &(x, z) in &sorted {
            let u = x - centre;
            let mut p = 1.0;
            for j in 0..5 {
                acc[j] += p;
                if j < 4 {
                    acc[5 + j] += z * p;
                }
                p *= u;
            }
            prefix.push(acc);
        }
        let xs = sorted.iter().map(|p| p.0).collect();
        Ok(Self { config, sorted, centre, xs, prefix })
    }

    pub fn from_path(path: &Path, config: KernelConfig) -> Result<Self> {
        Self::new(&regression_pairs(path), config)
    }

    /// `(b0, b1)` at `x0`.
    pub fn fit(&self, x0: f64) -> Result<(f64, f64)> {
        let h = self.config.bandwidth;
        // pairs with |x - x0| < h carry positive weight
        let lo = self.xs.partition_point(|&x| x <= x0 - h);
        let hi = self.xs.partition_point(|&x| x < x0 + h);
        let lo = lo.min(hi);
        if hi - lo <= DIRECT_MAX {
            return fit_pairs(&self.sorted[lo..hi], x0, &self.config);
        }
        let (a, b) = (&self.prefix[lo], &self.prefix[hi]);
        let m: [f64; 9] = std::array::from_fn(|j| b[j] - a[j]);
        // sums of d^j = (u - e)^j, e = x0 - centre, by the binomial expansion
        let e = x0 - self.centre;
        let pd = |j: usize, off: usize| -> f64 {
            let mut sum = 0.0;
            let mut binom = 1.0;
            for i in 0..=j {
                sum += binom * m[off + i] * (-e).powi((j - i) as i32);
                binom = binom * (j - i) as f64 / (i + 1) as f64;
            }
            sum
        };
        let d: [f64; 5] = std::array::from_fn(|j| pd(j, 0));
        let dz: [f64; 4] = std::array::from_fn(|j| pd(j, 5));
        // K_h(d) = c (1 - d^2 / h^2), c = 3 / (4 h)
        let c = 0.75 / h;
        let inv_h2 = 1.0 / (h * h);
        let s = [c * (d[0] - d[2] * inv_h2), c * (d[1] - d[3] * inv_h2), c * (d[2] - d[4] * inv_h2)];
        let t = [c * (dz[0] - dz[2] * inv_h2), c * (dz[1] - dz[3] * inv_h2)];
        solve_normal(x0, hi - lo, s, t)
    }
}

/// `b0` at each evaluation point; `None` where the fit fails.
pub fn local_linear_series(path: &Path, eval_points: &[f64], config: &KernelConfig) -> Result<Vec<Option<f64>>> {
    let ll = LocalLinear::from_path(path, *config)?;
    Ok(eval_points.iter().map(|&x| ll.fit(x).ok().map(|f| f.0)).collect())
}

/// `sum_k (X_k - X_{k-1})^2`
pub fn realized_vol(path: &Path) -> f64 {
    path.increments().map(|d| d * d).sum()
}

/// Left-endpoint Riemann sum `sum_{k < n-1} spot_k dt`.
pub fn integrated_vol(spot: &[f64], dt: f64) -> f64 {
    match spot.split_last() {
        Some((_, left)) => left.iter().sum::<f64>() * dt,
        None => 0.0,
    }
}

/// Root mean squared error over the pairs whose estimate is present.
pub fn rmse(estimates: &[Option<f64>], truth: &[f64]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::InvalidArgument(format!(
            "rmse needs equal lengths, got {} and {}",
            estimates.len(),
            truth.len()
        )));
    }
    let (mut ss, mut n) = (0.0, 0usize);
    for (e, t) in estimates.iter().zip(truth) {
        if let Some(e) = e {
            ss += (e - t) * (e - t);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoValidPairs);
    }
    Ok((ss / n as f64).sqrt())
}
