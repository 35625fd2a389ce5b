//! Euler simulation of `dX = (alpha + beta X) dt + sigma(X) dB` on a fine grid,
//! with burn-in and subsampling to the observation grid.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diffusion coefficient family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diffusion {
    /// `sigma(x) = s0 * x^rho`
    Power { s0: f64, rho: f64 },
    /// `sigma(x) = sqrt(x * exp(-x^2))`
    GaussDamped,
}

impl Diffusion {
    /// Diffusion coefficient, evaluated at `max(x, 0)` (full truncation).
    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match *self {
            Diffusion::Power { s0, rho } => {
                let p = if rho == 0.0 {
                    1.0
                } else if rho == 0.5 {
                    x.sqrt()
                } else if rho == 1.0 {
                    x
                } else if rho == 1.5 {
                    x * x.sqrt()
                } else {
                    x.powf(rho)
                };
                s0 * p
            }
            Diffusion::GaussDamped => (x * (-x * x).exp()).sqrt(),
        }
    }
}

/// Linear-drift diffusion with a known diffusion family; ground truth for
/// simulation and error measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub drift_alpha: f64,
    pub drift_beta: f64,
    pub diffusion: Diffusion,
    /// Starting value of the simulated path.
    pub x0: f64,
}

impl ModelSpec {
    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        self.drift_alpha + self.drift_beta * x
    }

    /// `mu'(x)`; exact for the linear family.
    #[inline]
    pub fn drift_slope(&self) -> f64 {
        self.drift_beta
    }

    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        self.diffusion.sigma(x)
    }

    /// True spot volatility `g(x) = sigma(x)^2`.
    #[inline]
    pub fn spot_variance(&self, x: f64) -> f64 {
        let s = self.sigma(x);
        s * s
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.drift_alpha.is_finite() && self.drift_beta.is_finite() && self.x0.is_finite();
        if !finite {
            return Err(Error::InvalidArgument("model parameters must be finite".into()));
        }
        if self.x0 <= 0.0 {
            return Err(Error::InvalidArgument(format!("x0 must be positive, got {}", self.x0)));
        }
        if let Diffusion::Power { s0, rho } = self.diffusion {
            if !(s0.is_finite() && s0 >= 0.0 && rho.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "power diffusion needs finite s0 >= 0 and finite rho, got s0={s0}, rho={rho}"
                )));
            }
        }
        Ok(())
    }
}

/// Equidistant observations `X_{t_0}, ..., X_{t_N}` with `t_k = t0 + k dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub dt: f64,
    pub t0: f64,
    pub values: Vec<f64>,
}

impl Path {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        Self::with_start(0.0, dt, values)
    }

    pub fn with_start(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if values.len() < 2 {
            return Err(Error::InvalidArgument(format!("a path needs at least 2 values, got {}", values.len())));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at index {k}")));
        }
        Ok(Self { dt, t0, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Sub-path of the values in `range`, keeping the time origin consistent.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Path> {
        if range.end > self.values.len() || range.start >= range.end {
            return Err(Error::InvalidArgument(format!(
                "slice {range:?} out of bounds for path of length {}",
                self.values.len()
            )));
        }
        let t0 = self.time(range.start);
        Path::with_start(t0, self.dt, self.values[range].to_vec())
    }

    /// Consecutive increments `X_{t_k} - X_{t_{k-1}}`.
    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }
}

/// Simulation grid and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub gen_dt: f64,
    pub sample_dt: f64,
    pub burn_in_span: f64,
    pub total_span: f64,
    pub seed: u64,
}

/// Integer step counts implied by a valid [`SimConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimLayout {
    pub stride: usize,
    pub burn_in_steps: usize,
    pub n_obs: usize,
}

impl SimLayout {
    pub fn total_steps(&self) -> usize {
        self.burn_in_steps + self.n_obs * self.stride
    }
}

fn integer_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    let r = num / den;
    let k = r.round();
    if !(k.is_finite() && k >= 0.0) || (r - k).abs() > 1e-6 * k.max(1.0) {
        return Err(Error::InvalidArgument(format!("{what} must be an integer, got {r}")));
    }
    Ok(k as usize)
}

impl SimConfig {
    pub fn layout(&self) -> Result<SimLayout> {
        if !(self.gen_dt > 0.0 && self.sample_dt > 0.0 && self.total_span > 0.0) {
            return Err(Error::InvalidArgument("gen_dt, sample_dt and total_span must be positive".into()));
        }
        if !(self.burn_in_span >= 0.0) {
            return Err(Error::InvalidArgument("burn_in_span must be non-negative".into()));
        }
        let stride = integer_ratio(self.sample_dt, self.gen_dt, "sample_dt / gen_dt")?;
        let n_obs = integer_ratio(self.total_span, self.sample_dt, "total_span / sample_dt")?;
        let burn_in_steps = integer_ratio(self.burn_in_span, self.gen_dt, "burn_in_span / gen_dt")?;
        if stride == 0 || n_obs == 0 {
            return Err(Error::InvalidArgument(
                "sample_dt / gen_dt and total_span / sample_dt must be positive".into(),
            ));
        }
        Ok(SimLayout { stride, burn_in_steps, n_obs })
    }
}

/// Random stream for Monte Carlo path `path_index`: ChaCha8 keyed by the seed,
/// with the path index selecting the stream, so paths are reproducible in any order.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

#[inline]
fn euler_step<R: Rng + ?Sized>(model: &ModelSpec, x: f64, dt: f64, sqrt_dt: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    x + model.drift(x) * dt + model.sigma(x) * sqrt_dt * z
}

/// `n_steps` Euler steps from `model.x0`; returns `n_steps + 1` values.
pub fn euler_simulate<R: Rng + ?Sized>(model: &ModelSpec, gen_dt: f64, n_steps: usize, rng: &mut R) -> Result<Path> {
    if !(gen_dt > 0.0) || n_steps == 0 {
        return Err(Error::InvalidArgument("need gen_dt > 0 and n_steps >= 1".into()));
    }
    model.validate()?;
    let sqrt_dt = gen_dt.sqrt();
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut x = model.x0;
    values.push(x);
    for step in 1..=n_steps {
        x = euler_step(model, x, gen_dt, sqrt_dt, rng);
        if !x.is_finite() {
            return Err(Error::PathDiverged { step });
        }
        values.push(x);
    }
    Path::new(gen_dt, values)
}

/// Keeps indices `0, stride, 2 stride, ...`.
pub fn subsample(path: &Path, stride: usize) -> Result<Path> {
    if stride < 1 {
        return Err(Error::InvalidArgument("stride must be >= 1".into()));
    }
    let values: Vec<f64> = path.values.iter().step_by(stride).copied().collect();
    Path::with_start(path.t0, path.dt * stride as f64, values)
}

/// Simulates burn-in plus the retained span at `gen_dt`, drops the burn-in and
/// returns the retained part on the observation grid (time origin at the end of burn-in).
///
/// Streams the fine grid, so memory is proportional to the number of observations.
pub fn generate_scenario(model: &ModelSpec, config: &SimConfig) -> Result<Path> {
    generate_scenario_indexed(model, config, 0)
}

/// [`generate_scenario`] for Monte Carlo path `path_index` of the experiment seeded by `config.seed`.
pub fn generate_scenario_indexed(model: &ModelSpec, config: &SimConfig, path_index: u64) -> Result<Path> {
    let layout = config.layout()?;
    model.validate()?;
    let mut rng = path_rng(config.seed, path_index);
    let dt = config.gen_dt;
    let sqrt_dt = dt.sqrt();
    let mut x = model.x0;
    let mut step = 0usize;
    for _ in 0..layout.burn_in_steps {
        x = euler_step(model, x, dt, sqrt_dt, &mut rng);
        step += 1;
        if !x.is_finite() {
            return Err(Error::PathDiverged { step });
        }
    }
    let mut values = Vec::with_capacity(layout.n_obs + 1);
    values.push(x);
    for _ in 0..layout.n_obs {
        for _ in 0..layout.stride {
            x = euler_step(model, x, dt, sqrt_dt, &mut rng);
            step += 1;
            if !x.is_finite() {
                return Err(Error::PathDiverged { step });
            }
        }
        values.push(x);
    }
    Path::with_start(config.burn_in_span, config.sample_dt, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ode_model(alpha: f64, beta: f64, x0: f64) -> ModelSpec {
        ModelSpec { drift_alpha: alpha, drift_beta: beta, diffusion: Diffusion::Power { s0: 0.0, rho: 0.5 }, x0 }
    }

    fn lin_model() -> ModelSpec {
        ModelSpec {
            drift_alpha: 0.184,
            drift_beta: -0.2146,
            diffusion: Diffusion::Power { s0: 0.0783, rho: 0.5 },
            x0: 0.1,
        }
    }

    #[test]
    fn zero_noise_at_fixed_point_stays_put() {
        let mut rng = path_rng(1, 0);
        let p = euler_simulate(&ode_model(1.0, -1.0, 1.0), 1e-3, 100, &mut rng).unwrap();
        assert_eq!(p.len(), 101);
        assert!(p.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn zero_noise_zero_drift_is_constant() {
        let mut rng = path_rng(1, 0);
        let p = euler_simulate(&ode_model(0.0, 0.0, 0.1), 1e-3, 50, &mut rng).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.1));
    }

    #[test]
    fn first_euler_moment_matches_drift() {
        let model = lin_model();
        let dt = 1.0 / 3.2e5;
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for i in 0..n {
            let mut rng = path_rng(7, i);
            let p = euler_simulate(&model, dt, 1, &mut rng).unwrap();
            let d = p.values[1] - p.values[0];
            sum += d;
            sum2 += d * d;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = (sum2 - nf * mean * mean) / (nf - 1.0);
        let se = (var / nf).sqrt();
        let expected = model.drift(model.x0) * dt;
        assert!((mean - expected).abs() < 4.0 * se, "mean {mean}, expected {expected}, se {se}");
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let model = ode_model(0.0, f64::MAX, 2.0);
        let mut rng = path_rng(0, 0);
        let err = euler_simulate(&model, 1.0, 10, &mut rng).unwrap_err();
        assert!(matches!(err, Error::PathDiverged { step: 1 }), "{err:?}");
        assert_eq!(err.to_string(), "path diverged at step 1");
    }

    #[test]
    fn subsample_basics() {
        let p = Path::new(0.5, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(subsample(&p, 1).unwrap(), p);
        let s = subsample(&p, 2).unwrap();
        assert_eq!(s.values, vec![0.0, 2.0, 4.0]);
        assert_eq!(s.dt, 1.0);
        assert!(subsample(&p, 0).is_err());
    }

    #[test]
    fn subsample_long_path_keeps_last_value() {
        let mut rng = path_rng(3, 0);
        let p = euler_simulate(&lin_model(), 1e-4, 1000, &mut rng).unwrap();
        let s = subsample(&p, 10).unwrap();
        // indices 0, 10, ..., 1000
        assert_eq!(s.len(), (1000 / 10) + 1);
        assert_eq!(*s.values.last().unwrap(), *p.values.last().unwrap());
    }

    #[test]
    fn scenario_counts() {
        let gen_dt = 1e-3;
        let cfg = SimConfig { gen_dt, sample_dt: gen_dt, burn_in_span: 0.0, total_span: 4.0 * gen_dt, seed: 1 };
        assert_eq!(generate_scenario(&lin_model(), &cfg).unwrap().len(), 5);

        let cfg =
            SimConfig { gen_dt: 1.0 / 1.28e6, sample_dt: 1.0 / 4000.0, burn_in_span: 0.5, total_span: 1.0, seed: 11 };
        let layout = cfg.layout().unwrap();
        assert_eq!(layout.stride, 320);
        assert_eq!(layout.burn_in_steps, 640_000);
        assert_eq!(layout.n_obs + 1, 4001);
    }

    #[test]
    fn scenario_is_deterministic() {
        let cfg = SimConfig { gen_dt: 1e-4, sample_dt: 1e-3, burn_in_span: 0.05, total_span: 0.2, seed: 99 };
        let a = generate_scenario(&lin_model(), &cfg).unwrap();
        let b = generate_scenario(&lin_model(), &cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_scenario_indexed(&lin_model(), &cfg, 1).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn scenario_matches_simulate_then_subsample() {
        let cfg = SimConfig { gen_dt: 1e-4, sample_dt: 5e-4, burn_in_span: 0.01, total_span: 0.05, seed: 5 };
        let layout = cfg.layout().unwrap();
        let model = lin_model();
        let mut rng = path_rng(cfg.seed, 0);
        let fine = euler_simulate(&model, cfg.gen_dt, layout.total_steps(), &mut rng).unwrap();
        let retained = Path::new(cfg.gen_dt, fine.values[layout.burn_in_steps..].to_vec()).unwrap();
        let expected = subsample(&retained, layout.stride).unwrap();
        let got = generate_scenario(&model, &cfg).unwrap();
        assert_eq!(got.values, expected.values);
        assert!((got.dt - expected.dt).abs() < 1e-18);
    }

    #[test]
    fn layout_rejects_non_integer_ratios() {
        let cfg = SimConfig { gen_dt: 1e-3, sample_dt: 2.5e-3, burn_in_span: 0.0, total_span: 1.0, seed: 0 };
        assert!(cfg.layout().is_err());
        let cfg = SimConfig { gen_dt: 1e-3, sample_dt: 2e-3, burn_in_span: 0.0, total_span: 0.0031, seed: 0 };
        assert!(cfg.layout().is_err());
    }

    #[test]
    fn euler_converges_to_ode_at_first_order() {
        // dx = (1 - x) dt, x0 = 0.1: x(1) = 1 - 0.9 e^{-1}
        let exact = 1.0 - 0.9 * (-1.0f64).exp();
        let model = ode_model(1.0, -1.0, 0.1);
        let errs: Vec<f64> = [100usize, 200, 400]
            .iter()
            .map(|&n| {
                let mut rng = path_rng(0, 0);
                let p = euler_simulate(&model, 1.0 / n as f64, n, &mut rng).unwrap();
                (p.values[n] - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 2.0).abs() < 0.05, "error ratio {ratio}");
        }
    }

    #[test]
    fn truncation_keeps_sqrt_diffusion_defined() {
        let d = Diffusion::Power { s0: 1.0, rho: 0.5 };
        assert_eq!(d.sigma(-0.3), 0.0);
        assert_eq!(Diffusion::Power { s0: 0.2, rho: 0.0 }.sigma(5.0), 0.2);
        assert!((Diffusion::GaussDamped.sigma(1.0) - (-1.0f64).exp().sqrt()).abs() < 1e-15);
        assert!((Diffusion::Power { s0: 1.0, rho: 1.5 }.sigma(4.0) - 8.0).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn subsample_composes(len in 2usize..400, a in 1usize..6, b in 1usize..6) {
            // compatible strides keep at least two values
            prop_assume!(len > a * b);
            let values: Vec<f64> = (0..len).map(|i| (i as f64).sin()).collect();
            let p = Path::new(0.01, values).unwrap();
            let once = subsample(&p, a * b).unwrap();
            let twice = subsample(&subsample(&p, a).unwrap(), b).unwrap();
            prop_assert_eq!(&once.values, &twice.values);
            prop_assert!((once.dt - twice.dt).abs() < 1e-15);
        }
    }
}
