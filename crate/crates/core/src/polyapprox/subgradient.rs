//! Sampling from the kink distribution Q of a 1-Lipschitz convex function on
//! `[-1, 1]`, and the reconstruction
//! `f(θ) = A E|θ - s| + B θ + c` with `A = (f'(1) - f'(-1))/2`,
//! `B = (f'(1) + f'(-1))/2` and `s ~ Q`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{LdpError, Result};

/// Bisection tolerance on `s`.
pub const BISECTION_TOL: f64 = 1e-10;

/// A monotone derivative `f'` on `[-1, 1]` together with its endpoint values.
#[derive(Clone)]
pub struct SubgradientSampler {
    f_prime: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    left: f64,
    right: f64,
}

impl fmt::Debug for SubgradientSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubgradientSampler")
            .field("left", &self.left)
            .field("right", &self.right)
            .finish_non_exhaustive()
    }
}

impl SubgradientSampler {
    /// The endpoints are read off as `f'(-1)` and `f'(1)`.
    pub fn new<F>(f_prime: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let left = f_prime(-1.0);
        let right = f_prime(1.0);
        Self::with_endpoints(f_prime, left, right)
    }

    /// Explicit endpoint values, useful when `f'` is one-sided at a boundary kink.
    pub fn with_endpoints<F>(f_prime: F, left: f64, right: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !left.is_finite() || !right.is_finite() {
            return Err(LdpError::param("derivative endpoints must be finite"));
        }
        if left > right {
            return Err(LdpError::param(format!(
                "derivative must be non-decreasing: f'(-1) = {left} > f'(1) = {right}"
            )));
        }
        if left.abs() > 1.0 + 1e-12 || right.abs() > 1.0 + 1e-12 {
            return Err(LdpError::param("loss must be 1-Lipschitz on [-1, 1]"));
        }
        Ok(Self {
            f_prime: Arc::new(f_prime),
            left,
            right,
        })
    }

    pub fn deriv(&self, x: f64) -> f64 {
        (self.f_prime)(x)
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn is_degenerate(&self) -> bool {
        self.left == self.right
    }

    /// `A = (f'(1) - f'(-1)) / 2`.
    pub fn kink_weight(&self) -> f64 {
        (self.right - self.left) / 2.0
    }

    /// `B = (f'(1) + f'(-1)) / 2`.
    pub fn linear_slope(&self) -> f64 {
        (self.right + self.left) / 2.0
    }

    /// Largest `s` in `[-1, 1]` with `f'(s) <= u`, by bisection.
    pub fn inverse(&self, u: f64) -> f64 {
        if self.deriv(1.0) <= u {
            return 1.0;
        }
        let (mut lo, mut hi) = (-1.0, 1.0);
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if self.deriv(mid) <= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// One draw from Q.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        if self.is_degenerate() {
            return Err(LdpError::Degenerate(
                "f'(-1) = f'(1): the loss is affine and Q is undefined".into(),
            ));
        }
        let u = self.left + (self.right - self.left) * rng.random::<f64>();
        Ok(self.inverse(u))
    }
}

/// Draws one value from Q (free-function form).
pub fn sample_q<R: Rng + ?Sized>(sampler: &SubgradientSampler, rng: &mut R) -> Result<f64> {
    sampler.sample(rng)
}

/// How the additive constant of the reconstruction is fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Anchor {
    /// The constant is known in closed form.
    Constant(f64),
    /// `f(0)` is known; the constant is fitted from the same draws.
    ValueAtZero(f64),
}

/// Monte-Carlo reconstruction of `f` at each `θ`, from `m` common draws of Q.
pub fn kink_mixture_reconstruct<R: Rng + ?Sized>(
    sampler: &SubgradientSampler,
    anchor: Anchor,
    thetas: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(LdpError::param("need at least one draw"));
    }
    let b = sampler.linear_slope();
    if sampler.is_degenerate() {
        let c = match anchor {
            Anchor::Constant(c) | Anchor::ValueAtZero(c) => c,
        };
        return Ok(thetas.iter().map(|t| b * t + c).collect());
    }
    let a = sampler.kink_weight();
    let draws: Vec<f64> = (0..m).map(|_| sampler.sample(rng)).collect::<Result<_>>()?;
    let mean_abs = |theta: f64| draws.iter().map(|s| (theta - s).abs()).sum::<f64>() / m as f64;
    let c = match anchor {
        Anchor::Constant(c) => c,
        Anchor::ValueAtZero(f0) => f0 - a * mean_abs(0.0),
    };
    Ok(thetas
        .iter()
        .map(|&t| a * mean_abs(t) + b * t + c)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hinge() -> SubgradientSampler {
        SubgradientSampler::new(|x| if x < 0.5 { -1.0 } else { 0.0 }).unwrap()
    }

    fn abs() -> SubgradientSampler {
        SubgradientSampler::new(|x: f64| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    fn half_square() -> SubgradientSampler {
        SubgradientSampler::new(|x| x).unwrap()
    }

    fn thetas() -> Vec<f64> {
        (0..=10).map(|i| -1.0 + 0.2 * i as f64).collect()
    }

    #[test]
    fn point_masses() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            assert!(abs().sample(&mut rng).unwrap().abs() < 1e-9);
            assert!((hinge().sample(&mut rng).unwrap() - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn half_square_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut xs: Vec<f64> = (0..100_000)
            .map(|_| half_square().sample(&mut rng).unwrap())
            .collect();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = (x + 1.0) / 2.0;
                (cdf - i as f64 / n)
                    .abs()
                    .max((cdf - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks <= 0.01, "KS {ks}");
    }

    #[test]
    fn piecewise_linear_pushforward() {
        // f' = -1 on [-1,-0.5), -0.2 on [-0.5, 0.4), 0.6 on [0.4, 1]:
        // Q puts mass 0.8/1.6 at -0.5 and 0.8/1.6 at 0.4.
        let s = SubgradientSampler::new(|x| {
            if x < -0.5 {
                -1.0
            } else if x < 0.4 {
                -0.2
            } else {
                0.6
            }
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut hist = [0usize; 20];
        let n = 100_000;
        for _ in 0..n {
            let v = s.sample(&mut rng).unwrap();
            let bin = (((v + 1.0) / 2.0 * 20.0) as usize).min(19);
            hist[bin] += 1;
        }
        let mut expected = [0.0; 20];
        expected[((-0.5f64 + 1.0) / 2.0 * 20.0 - 1e-9) as usize] += 0.5;
        expected[((0.4f64 + 1.0) / 2.0 * 20.0 - 1e-9) as usize] += 0.5;
        let tv: f64 = hist
            .iter()
            .zip(&expected)
            .map(|(&h, e)| (h as f64 / n as f64 - e).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.02, "TV {tv}");
    }

    #[test]
    fn degenerate_signals() {
        let s = SubgradientSampler::new(|_| 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(s.sample(&mut rng), Err(LdpError::Degenerate(_))));
        let r = kink_mixture_reconstruct(&s, Anchor::ValueAtZero(0.1), &[-1.0, 0.5], 1, &mut rng)
            .unwrap();
        assert!((r[0] - (-0.2)).abs() < 1e-15 && (r[1] - 0.25).abs() < 1e-15);
        assert!(SubgradientSampler::new(|x| -x).is_err());
    }

    type Case = (SubgradientSampler, Anchor, fn(f64) -> f64);

    #[test]
    fn reconstructions() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = thetas();
        let cases: [Case; 3] = [
            (hinge(), Anchor::Constant(0.25), |x| (0.5 - x).max(0.0)),
            (abs(), Anchor::ValueAtZero(0.0), f64::abs),
            (half_square(), Anchor::Constant(-0.5), |x| x * x / 2.0),
        ];
        for (s, anchor, f) in cases {
            let r = kink_mixture_reconstruct(&s, anchor, &t, 100_000, &mut rng).unwrap();
            for (theta, v) in t.iter().zip(r) {
                assert!(
                    (v - f(*theta)).abs() <= 0.01,
                    "θ={theta}: {v} vs {}",
                    f(*theta)
                );
            }
        }
    }
}
