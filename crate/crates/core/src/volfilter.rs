//! Recursive spot-volatility filter.
//!
//! Between observations `s < t` the pair `(X~, Y~)` follows the bilinear system
//!
//! ```text
//! dX~ = (alpha_s + a X~) dt + sqrt(Y~) dB
//! dY~ = Y1_s dX~ + (theta / 2) d<X~>
//! ```
//!
//! with `a = mu'(X_s)`, `b = a Y1_s`, `c = theta / 2`. In matrix form
//! `dx = (A x + beta) dt + S(x) dB` with `A = [[a, 0], [b, c]]` and
//! `beta = (alpha_s, alpha_s Y1_s)`, so the one-step conditional mean and
//! covariance are available in closed form. The filter predicts with those
//! moments, corrects `Y~` with the gain `V_12 / V_11` applied to the
//! observation innovation, and advances `Y1` by `theta (X_t - X_s)`.
//!
//! Exponential ratios `(e^{d dt} - 1) / d` always go through [`expint`]. The
//! `b / (c - a)` factors of the closed form lose about
//! `(max(|a|, |c|) / |c - a|)^2` relative precision, so close to `a = c` the
//! moments are evaluated through divided differences of `exp` instead
//! (see [`exp_divdiff`]); both forms are the same function of the inputs.

use crate::error::{Error, Result};
use crate::sde::Path;

/// Smallest admissible `|theta|`.
pub const THETA_MIN_ABS: f64 = 1e-6;
/// Default positivity floor for the filtered state.
pub const DEFAULT_Y_FLOOR: f64 = 1e-12;
/// Below this `|d dt|` [`expint`] switches to its Taylor series.
pub const EXPINT_SWITCH: f64 = 1e-4;
/// `|c - a| <= DEGENERATE_REL * max(|a|, |c|)` selects the divided-difference form.
pub const DEGENERATE_REL: f64 = 5e-2;
/// Updates with a predicted variance at or below this are skipped.
pub const V1_SKIP: f64 = 1e-30;

/// `(e^{d dt} - 1) / d`, continuous through `d = 0`.
#[inline]
pub fn expint(d: f64, dt: f64) -> f64 {
    let x = d * dt;
    if x.abs() < EXPINT_SWITCH {
        dt * (1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0)
    } else {
        x.exp_m1() / d
    }
}

const MAX_NODES: usize = 6;
const SERIES_TERMS: usize = 30;

fn inv_factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc / k as f64)
}

/// Divided difference `exp[z_0, ..., z_n]` by its power series
/// `sum_m h_m(z) / (m + n)!`, `h_m` the complete homogeneous polynomials.
/// Accurate for `max |z| <= 1/2`.
fn exp_divdiff_series(z: &[f64]) -> f64 {
    let n = z.len() - 1;
    let mut h = [0.0; SERIES_TERMS];
    h[0] = 1.0;
    for &zi in z {
        for m in 1..SERIES_TERMS {
            h[m] += zi * h[m - 1];
        }
    }
    let mut fact = inv_factorial(n);
    let mut sum = 0.0;
    for (m, hm) in h.iter().enumerate() {
        if m > 0 {
            fact /= (m + n) as f64;
        }
        sum += hm * fact;
    }
    sum
}

/// Divided difference of `exp` over `nodes` (repeated nodes allowed).
///
/// By Hermite–Genocchi this is `∫_{simplex} exp(sum s_i z_i)`, so every
/// integral of a product of exponentials over nested time intervals reduces
/// to one of these. Evaluated as the corner entry of `exp(Z)` for the
/// bidiagonal matrix with the nodes on the diagonal and ones above it, by
/// scaling and squaring; no ratio of node differences is ever formed.
pub fn exp_divdiff(nodes: &[f64]) -> f64 {
    let n = nodes.len();
    assert!((1..=MAX_NODES).contains(&n), "exp_divdiff supports 1..={MAX_NODES} nodes");
    let zmax = nodes.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let squarings = if zmax > 0.5 { (zmax / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(squarings);
    let mut scaled = [0.0; MAX_NODES];
    for (s, z) in scaled.iter_mut().zip(nodes) {
        *s = z * scale;
    }
    // exp(Z / 2^k)[i][j] = scale^{j-i} exp[z_i .. z_j] (scaled nodes)
    let mut e = [[0.0; MAX_NODES]; MAX_NODES];
    for i in 0..n {
        let mut w = 1.0;
        for j in i..n {
            e[i][j] = w * exp_divdiff_series(&scaled[i..=j]);
            w *= scale;
        }
    }
    for _ in 0..squarings {
        let mut sq = [[0.0; MAX_NODES]; MAX_NODES];
        for i in 0..n {
            for j in i..n {
                sq[i][j] = (i..=j).map(|k| e[i][k] * e[k][j]).sum();
            }
        }
        e = sq;
    }
    e[0][n - 1]
}

/// Drift parameters, nuisance curvature and initial conditions of the filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    pub theta: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    /// Initial slope state `Y1_0`.
    pub y1_init: f64,
    /// Positivity floor for the filtered state.
    pub y_floor: f64,
}

impl FilterParams {
    pub fn new(theta: f64, alpha_hat: f64, beta_hat: f64) -> Result<Self> {
        let p = Self { theta, alpha_hat, beta_hat, y1_init: 0.0, y_floor: DEFAULT_Y_FLOOR };
        p.validate()?;
        Ok(p)
    }

    pub fn with_y1_init(mut self, y1_init: f64) -> Result<Self> {
        self.y1_init = y1_init;
        self.validate()?;
        Ok(self)
    }

    pub fn with_y_floor(mut self, y_floor: f64) -> Result<Self> {
        self.y_floor = y_floor;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta.abs() >= THETA_MIN_ABS) {
            return Err(Error::InvalidArgument(format!(
                "|theta| must be at least {THETA_MIN_ABS:e}, got {}",
                self.theta
            )));
        }
        if !(self.alpha_hat.is_finite() && self.beta_hat.is_finite() && self.y1_init.is_finite()) {
            return Err(Error::InvalidArgument("filter parameters must be finite".into()));
        }
        if !(self.y_floor > 0.0 && self.y_floor.is_finite()) {
            return Err(Error::InvalidArgument(format!("y_floor must be positive, got {}", self.y_floor)));
        }
        Ok(())
    }

    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        self.alpha_hat + self.beta_hat * x
    }
}

/// State carried from one observation to the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    /// Last observation (the filtered `X~` is reset to it).
    pub x_s: f64,
    /// Filtered volatility `Y~_{s|s}`.
    pub y_filt: f64,
    /// Slope state `Y1_s`.
    pub y1_s: f64,
    pub k: usize,
}

/// Local coefficients of the bilinear system on `[s, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCoeffs {
    /// `mu'(X_s)`
    pub a: f64,
    /// `mu(X_s) - mu'(X_s) X_s`
    pub alpha_s: f64,
    /// `a * Y1_s`
    pub b: f64,
    /// `theta / 2`
    pub c: f64,
    /// `-b / (c - a)`; `None` when `c` and `a` are too close (degenerate mode).
    pub p: Option<f64>,
    /// `b / (c - a)`; `None` in degenerate mode.
    pub q: Option<f64>,
    pub degenerate: bool,
}

#[inline]
fn is_degenerate(a: f64, c: f64) -> bool {
    (c - a).abs() <= DEGENERATE_REL * a.abs().max(c.abs())
}

pub fn local_coeffs(state: &FilterState, params: &FilterParams) -> LocalCoeffs {
    let a = params.beta_hat;
    // mu(X_s) - mu'(X_s) X_s, which is exactly alpha for linear drift
    let alpha_s = params.alpha_hat;
    let b = a * state.y1_s;
    let c = params.theta / 2.0;
    let degenerate = is_degenerate(a, c);
    let (p, q) = if degenerate {
        (None, None)
    } else {
        let q = b / (c - a);
        (Some(-q), Some(q))
    };
    LocalCoeffs { a, alpha_s, b, c, p, q, degenerate }
}

/// `exp(A dt)` for `A = [[a, 0], [b, c]]`, as `[[row0], [row1]]`.
pub fn mat_exp(coeffs: &LocalCoeffs, dt: f64) -> [[f64; 2]; 2] {
    let ea = (coeffs.a * dt).exp();
    let ec = (coeffs.c * dt).exp();
    let lower = match (coeffs.p, coeffs.q) {
        (Some(p), Some(q)) => q * ec + p * ea,
        // (e^{c dt} - e^{a dt}) / (c - a) -> dt e^{a dt}
        _ => coeffs.b * ea * expint(coeffs.c - coeffs.a, dt),
    };
    [[ea, 0.0], [lower, ec]]
}

/// `Phi(dt) = ∫_0^dt exp(A u) du`, which replaces `A^{-1}(exp(A dt) - I)`.
pub fn phi(coeffs: &LocalCoeffs, dt: f64) -> [[f64; 2]; 2] {
    let e_a = expint(coeffs.a, dt);
    let e_c = expint(coeffs.c, dt);
    let lower = match (coeffs.p, coeffs.q) {
        (Some(p), Some(q)) => q * e_c + p * e_a,
        _ => coeffs.b * dt * dt * exp_divdiff(&[0.0, coeffs.a * dt, coeffs.c * dt]),
    };
    [[e_a, 0.0], [lower, e_c]]
}

/// One-step conditional mean and covariance of `(X~_t, Y~_t)` given `F_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPair {
    pub mean_x: f64,
    pub mean_y: f64,
    /// `V_11`
    pub v1: f64,
    /// `V_12`
    pub v2: f64,
    /// `V_22`
    pub v3: f64,
}

impl MomentPair {
    /// Positive semidefinite up to `tol` (relative to the diagonal scale).
    pub fn is_psd(&self, tol: f64) -> bool {
        let scale = (self.v1 * self.v3).abs().max(f64::MIN_POSITIVE);
        self.v1 >= -tol * self.v1.abs() && self.v1 * self.v3 - self.v2 * self.v2 >= -tol * scale
    }
}

#[derive(Debug, Clone, Copy)]
enum Route {
    /// Closed form through `p`, `q` and the integrals `I_1, I_2, I_3`; entry `j`
    /// of `i_a` / `i_c` is the coefficient of `I_{j+1}` on the `e^{a u}` / `e^{c u}`
    /// component of `E_s[Y~_u]`.
    ClosedForm { i_a: [f64; 3], i_c: [f64; 3] },
    /// Divided-difference form. Each pair splits an entry into its `Y~_s` part
    /// and its `Y1_s mu(X_s)` part; `v2` and `v3` still carry `Y1_s`, `Y1_s^2`.
    DividedDiff { phi21: f64, v1: [f64; 2], v2: [f64; 2], v3: [f64; 2] },
}

/// The part of the one-step moments that depends only on `(a, c, dt)`.
///
/// With linear drift `a` and `c` are fixed for a whole filter run, so
/// [`run_filter`] builds the kernel once and evaluates it per observation.
#[derive(Debug, Clone, Copy)]
pub struct MomentKernel {
    a: f64,
    c: f64,
    ea: f64,
    ec: f64,
    e_a: f64,
    e_c: f64,
    e_delta: f64,
    route: Route,
}

impl MomentKernel {
    pub fn new(a: f64, c: f64, dt: f64) -> Self {
        let ea = (a * dt).exp();
        let ec = (c * dt).exp();
        let e_a = expint(a, dt);
        let e_c = expint(c, dt);
        let e_delta = expint(c - a, dt);
        let route = if is_degenerate(a, c) {
            let (ad, cd) = (a * dt, c * dt);
            let dd = exp_divdiff;
            let dt2 = dt * dt;
            let dt3 = dt2 * dt;
            let dt4 = dt3 * dt;
            // E_s[Y~_u] = Y~_s e^{c r} + Y1_s mu(X_s) r exp[a r, c r] with r = u - s; the
            // noise loading on Y~ is Y1_s (e^{c r} + a r e^{a r} exp[a r, c r]).
            Route::DividedDiff {
                phi21: dt2 * dd(&[0.0, ad, cd]),
                v1: [dt * dd(&[2.0 * ad, cd]), dt2 * dd(&[2.0 * ad, ad, cd])],
                v2: [
                    dt * dd(&[cd, ad + cd]) + a * dt2 * dd(&[cd, 2.0 * ad, ad + cd]),
                    dt2 * dd(&[ad, cd, ad + cd]) + a * dt3 * dd(&[ad, cd, 2.0 * ad, ad + cd]),
                ],
                v3: [
                    dt * dd(&[cd, 2.0 * cd])
                        + 2.0 * a * dt2 * dd(&[cd, ad + cd, 2.0 * cd])
                        + 2.0 * a * a * dt3 * dd(&[cd, 2.0 * cd, ad + cd, 2.0 * ad]),
                    dt2 * dd(&[ad, cd, 2.0 * cd])
                        + 2.0 * a * dt3 * dd(&[ad, cd, ad + cd, 2.0 * cd])
                        + 2.0 * a * a * dt4 * dd(&[ad, cd, 2.0 * cd, ad + cd, 2.0 * ad]),
                ],
            }
        } else {
            Route::ClosedForm {
                i_a: [ea * e_a, ea * e_c, ea * expint(2.0 * c - a, dt)],
                i_c: [ec * expint(2.0 * a - c, dt), ec * e_a, ec * e_c],
            }
        };
        Self { a, c, ea, ec, e_a, e_c, e_delta, route }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self.route, Route::DividedDiff { .. })
    }

    /// Moments started from `(X_s, Y~_s, Y1_s)` with local intercept `alpha_s`.
    #[inline]
    pub fn moments(&self, x_s: f64, y_s: f64, y1_s: f64, alpha_s: f64) -> MomentPair {
        let a = self.a;
        let b = a * y1_s;
        let mean_x = self.ea * x_s + alpha_s * self.e_a;
        match self.route {
            Route::ClosedForm { i_a, i_c } => {
                let delta = self.c - a;
                let q = b / delta;
                let p = -q;
                let mean_y = (q * self.ec + p * self.ea) * x_s
                    + self.ec * y_s
                    + alpha_s * (q * self.e_c + p * self.e_a)
                    + alpha_s * y1_s * self.e_c;
                // E_s[Y~_u] = Y_1 e^{a(u-s)} + Y_2 e^{c(u-s)} + Y_3. Because b = a Y1_s the
                // constant Y_3 = b alpha_s / (a c) - alpha_s Y1_s / c is identically zero,
                // and the Y1_s alpha_s parts of Y_1, Y_2 are -/+ alpha_s Y1_s / (c - a).
                let y_1 = p * x_s - alpha_s * y1_s / delta;
                let y_2 = q * x_s + y_s + alpha_s * y1_s / delta;
                let i1 = y_1 * i_a[0] + y_2 * i_c[0];
                let i2 = y_1 * i_a[1] + y_2 * i_c[1];
                let i3 = y_1 * i_a[2] + y_2 * i_c[2];
                let r = q + y1_s;
                MomentPair {
                    mean_x,
                    mean_y,
                    v1: i1,
                    v2: p * i1 + r * i2,
                    v3: p * p * i1 + 2.0 * p * r * i2 + r * r * i3,
                }
            }
            Route::DividedDiff { phi21, v1, v2, v3 } => {
                let y1mu = y1_s * (alpha_s + a * x_s);
                MomentPair {
                    mean_x,
                    mean_y: b * self.ea * self.e_delta * x_s
                        + self.ec * y_s
                        + alpha_s * b * phi21
                        + alpha_s * y1_s * self.e_c,
                    v1: y_s * v1[0] + y1mu * v1[1],
                    v2: y1_s * (y_s * v2[0] + y1mu * v2[1]),
                    v3: y1_s * y1_s * (y_s * v3[0] + y1mu * v3[1]),
                }
            }
        }
    }
}

/// Conditional mean and covariance of the bilinear system over `dt`, started
/// at `(state.x_s, state.y_filt)`.
pub fn cond_moments(state: &FilterState, coeffs: &LocalCoeffs, dt: f64) -> MomentPair {
    MomentKernel::new(coeffs.a, coeffs.c, dt).moments(state.x_s, state.y_filt, state.y1_s, coeffs.alpha_s)
}

/// One-step prediction from the filtered state; the covariance is `V_{t|s}(Y~_{s|s})`.
pub fn predict(state: &FilterState, params: &FilterParams, dt: f64) -> MomentPair {
    cond_moments(state, &local_coeffs(state, params), dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Updated {
    pub y_filt: f64,
    /// The predicted variance was too small for a finite gain.
    pub skipped: bool,
    /// The positivity floor was applied.
    pub floored: bool,
}

/// `Y~_{t|t} = Y~_{t|s} + kappa (X_t - X~_{t|s})`, `kappa = V_12 / V_11`, floored at `y_floor`.
pub fn update(pred: &MomentPair, x_obs: f64, params: &FilterParams) -> Updated {
    let skipped = !(pred.v1 > V1_SKIP);
    let raw = if skipped {
        pred.mean_y
    } else {
        let kappa = pred.v2 / pred.v1;
        pred.mean_y + kappa * (x_obs - pred.mean_x)
    };
    if raw >= params.y_floor {
        Updated { y_filt: raw, skipped, floored: false }
    } else {
        Updated { y_filt: params.y_floor, skipped, floored: true }
    }
}

#[inline]
pub fn advance_y1(y1_s: f64, theta: f64, x_new: f64, x_old: f64) -> f64 {
    y1_s + theta * (x_new - x_old)
}

/// Initial volatility: sum of squared increments over the window divided by
/// the window length `m dt`, floored at `y_floor`.
pub fn init_state(window: &Path, y_floor: f64) -> Result<f64> {
    if window.len() < 2 {
        return Err(Error::InvalidArgument("init window needs at least 2 values".into()));
    }
    let m = (window.len() - 1) as f64;
    let qv: f64 = window.increments().map(|d| d * d).sum();
    Ok((qv / (m * window.dt)).max(y_floor))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRow {
    pub x: f64,
    pub y_filtered: f64,
}

/// Filtered volatility at every observation after the init window.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSeries {
    pub dt: f64,
    /// Index in the input path of the first row.
    pub start_index: usize,
    /// Time of the first row.
    pub t0: f64,
    pub rows: Vec<EstimateRow>,
}

impl EstimateSeries {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn y_values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.y_filtered).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Diagnostics {
    pub steps: usize,
    pub skipped_updates: usize,
    pub floor_activations: usize,
    /// The moments used the divided-difference form (`theta / 2` close to `beta_hat`).
    pub degenerate_kernel: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub series: EstimateSeries,
    pub diagnostics: Diagnostics,
}

/// What the recursion saw at one observation.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    /// Index of the observation in the path.
    pub index: usize,
    pub x_obs: f64,
    pub pred: MomentPair,
    pub updated: Updated,
}

fn check_window(path: &Path, init_window_len: usize) -> Result<()> {
    if init_window_len < 2 || path.len() <= init_window_len {
        return Err(Error::InitWindow { window: init_window_len, path_len: path.len() });
    }
    Ok(())
}

/// Drives the recursion and hands every step to `visit`. Shared by
/// [`run_filter`] and the likelihood so both see the same numbers.
pub fn filter_steps<F: FnMut(&StepRecord)>(
    path: &Path,
    params: &FilterParams,
    init_window_len: usize,
    mut visit: F,
) -> Result<Diagnostics> {
    params.validate()?;
    check_window(path, init_window_len)?;
    let window = Path::new(path.dt, path.values[..init_window_len].to_vec())?;
    let y0 = init_state(&window, params.y_floor)?;
    let kernel = MomentKernel::new(params.beta_hat, params.theta / 2.0, path.dt);
    let mut state =
        FilterState { x_s: path.values[init_window_len - 1], y_filt: y0, y1_s: params.y1_init, k: init_window_len - 1 };
    let mut diag = Diagnostics { degenerate_kernel: kernel.is_degenerate(), ..Default::default() };
    for (index, &x_obs) in path.values.iter().enumerate().skip(init_window_len) {
        let pred = kernel.moments(state.x_s, state.y_filt, state.y1_s, params.alpha_hat);
        let updated = update(&pred, x_obs, params);
        diag.steps += 1;
        diag.skipped_updates += updated.skipped as usize;
        diag.floor_activations += updated.floored as usize;
        visit(&StepRecord { index, x_obs, pred, updated });
        state = FilterState {
            x_s: x_obs,
            y_filt: updated.y_filt,
            y1_s: advance_y1(state.y1_s, params.theta, x_obs, state.x_s),
            k: index,
        };
    }
    Ok(diag)
}

/// Runs the filter over `path`. The first `init_window_len` values estimate
/// `Y~_{0|0}`; one row is produced for every later observation.
pub fn run_filter(path: &Path, params: &FilterParams, init_window_len: usize) -> Result<FilterOutput> {
    let mut rows = Vec::with_capacity(path.len().saturating_sub(init_window_len));
    let diagnostics = filter_steps(path, params, init_window_len, |s| {
        rows.push(EstimateRow { x: s.x_obs, y_filtered: s.updated.y_filt });
    })?;
    let series = EstimateSeries { dt: path.dt, start_index: init_window_len, t0: path.time(init_window_len), rows };
    Ok(FilterOutput { series, diagnostics })
}
