//! Synthetic dataset families and CSV loading.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{DatasetSpec, Family};
use crate::data::{BallDataset, BinaryDataset, Records};
use crate::error::{LdpError, Result};
use crate::rng::{tag, SeedStream};

/// Records in the shape a mechanism consumes.
#[derive(Debug, Clone)]
pub enum Dataset {
    /// Unlabelled rows (unit cube or `[-1, 1]^p`).
    Cube(Records),
    /// Labelled rows in the unit ball.
    Ball(BallDataset),
    Bits(BinaryDataset),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Cube(r) => r.len(),
            Dataset::Ball(b) => b.len(),
            Dataset::Bits(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn p(&self) -> usize {
        match self {
            Dataset::Cube(r) => r.dim(),
            Dataset::Ball(b) => b.dim(),
            Dataset::Bits(b) => b.p(),
        }
    }
}

/// What shape a CSV file should be read into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Cube,
    Ball,
    Bits,
}

fn unit_vector<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return g.into_iter().map(|v| v / norm).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Deterministic given `seed`.
pub fn generate_dataset(
    spec: &DatasetSpec,
    family: Family,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    let p = spec.p;
    if p == 0 || n == 0 {
        return Err(LdpError::config("dataset needs p >= 1 and n >= 1"));
    }
    let mut rng = SeedStream::new(seed).rng(tag::DATASET, 0);
    match family {
        Family::UniformCube => {
            let data = (0..n * p).map(|_| rng.random::<f64>()).collect();
            Ok(Dataset::Cube(Records::new(p, data)?))
        }
        Family::BernoulliBits => {
            if !(0.0..=1.0).contains(&spec.q) {
                return Err(LdpError::config("dataset.q must lie in [0, 1]"));
            }
            let bits = (0..n * p)
                .map(|_| u8::from(rng.random_bool(spec.q)))
                .collect();
            Ok(Dataset::Bits(BinaryDataset::new(p, bits)?))
        }
        Family::GaussianBallClipped => {
            if !(spec.sigma > 0.0) || !(0.0..=0.5).contains(&spec.flip) {
                return Err(LdpError::config(
                    "dataset.sigma must be positive and dataset.flip in [0, 0.5]",
                ));
            }
            let u = unit_vector(p, &mut rng);
            let mut data = Vec::with_capacity(n * p);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let mut x: Vec<f64> = (0..p)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        spec.sigma * z
                    })
                    .collect();
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1.0 {
                    x.iter_mut().for_each(|v| *v /= norm);
                }
                let mut y = if dot(&u, &x) >= 0.0 { 1.0 } else { -1.0 };
                if rng.random_bool(spec.flip) {
                    y = -y;
                }
                data.extend(x);
                labels.push(y);
            }
            Ok(Dataset::Ball(BallDataset::new(
                Records::new(p, data)?,
                labels,
            )?))
        }
        Family::SeparableTwoClass => {
            if !(spec.margin >= 0.0 && spec.margin < 1.0) {
                return Err(LdpError::config("dataset.margin must lie in [0, 1)"));
            }
            let u = unit_vector(p, &mut rng);
            let mut data = Vec::with_capacity(n * p);
            let mut labels = Vec::with_capacity(n);
            while labels.len() < n {
                // Uniform in the unit ball, kept when outside the slab.
                let dir = unit_vector(p, &mut rng);
                let r = rng.random::<f64>().powf(1.0 / p as f64);
                let x: Vec<f64> = dir.iter().map(|v| v * r).collect();
                let s = dot(&u, &x);
                if s.abs() < spec.margin {
                    continue;
                }
                labels.push(s.signum());
                data.extend(x);
            }
            Ok(Dataset::Ball(BallDataset::new(
                Records::new(p, data)?,
                labels,
            )?))
        }
    }
}

/// Reads a CSV with a header line. For [`DatasetKind::Ball`] the last
/// column is the label.
pub fn load_dataset_csv(path: &Path, kind: DatasetKind) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| {
                LdpError::config(format!("{}: non-numeric field ({e})", path.display()))
            })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(LdpError::config(format!("{} has no rows", path.display())));
    }
    match kind {
        DatasetKind::Cube => Ok(Dataset::Cube(Records::from_rows(&rows)?)),
        DatasetKind::Bits => {
            let bits: Vec<Vec<u8>> = rows
                .iter()
                .map(|r| r.iter().map(|&v| if v == 1.0 { 1 } else { 0 }).collect())
                .collect();
            if rows.iter().flatten().any(|&v| v != 0.0 && v != 1.0) {
                return Err(LdpError::config("bit dataset must contain only 0 and 1"));
            }
            Ok(Dataset::Bits(BinaryDataset::from_rows(&bits)?))
        }
        DatasetKind::Ball => {
            if rows[0].len() < 2 {
                return Err(LdpError::config(
                    "labelled dataset needs at least one feature and a label",
                ));
            }
            let labels: Vec<f64> = rows
                .iter()
                .map(|r| *r.last().expect("non-empty row"))
                .collect();
            let features: Vec<Vec<f64>> = rows.iter().map(|r| r[..r.len() - 1].to_vec()).collect();
            Ok(Dataset::Ball(BallDataset::new(
                Records::from_rows(&features)?,
                labels,
            )?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p: usize) -> DatasetSpec {
        DatasetSpec {
            p,
            ..DatasetSpec::default()
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = generate_dataset(&spec(3), Family::UniformCube, 50, 4).unwrap();
        let b = generate_dataset(&spec(3), Family::UniformCube, 50, 4).unwrap();
        match (a, b) {
            (Dataset::Cube(a), Dataset::Cube(b)) => assert_eq!(a, b),
            _ => unreachable!(),
        }
    }

    #[test]
    fn uniform_cube_mean() {
        let Dataset::Cube(r) = generate_dataset(&spec(1), Family::UniformCube, 10_000, 1).unwrap()
        else {
            unreachable!()
        };
        let sd = (1.0f64 / 12.0 / 10_000.0).sqrt();
        assert!((r.mean()[0] - 0.5).abs() <= 3.0 * sd);
    }

    #[test]
    fn bernoulli_frequencies() {
        let Dataset::Bits(b) =
            generate_dataset(&spec(8), Family::BernoulliBits, 10_000, 2).unwrap()
        else {
            unreachable!()
        };
        let sd = (0.3f64 * 0.7 / 10_000.0).sqrt();
        for j in 0..8 {
            let f = b.rows().filter(|r| r[j] == 1).count() as f64 / 10_000.0;
            assert!((f - 0.3).abs() <= 3.0 * sd, "bit {j}: {f}");
        }
    }

    #[test]
    fn separable_data_admits_a_perfect_linear_classifier() {
        let s = DatasetSpec {
            p: 5,
            margin: 0.2,
            ..DatasetSpec::default()
        };
        let Dataset::Ball(d) = generate_dataset(&s, Family::SeparableTwoClass, 1000, 3).unwrap()
        else {
            unreachable!()
        };
        // Perceptron: at most 1/margin^2 = 25 mistakes on margin-separable data in the unit ball.
        let mut w = vec![0.0; 5];
        let mut mistakes = 0;
        loop {
            let mut clean = true;
            for i in 0..d.len() {
                if d.y(i) * dot(&w, d.x(i)) <= 0.0 {
                    w.iter_mut().zip(d.x(i)).for_each(|(a, b)| *a += d.y(i) * b);
                    mistakes += 1;
                    clean = false;
                }
            }
            if clean {
                break;
            }
            assert!(mistakes <= 25, "too many perceptron updates");
        }
        assert!((0..d.len()).all(|i| d.y(i) * dot(&w, d.x(i)) > 0.0));
    }

    #[test]
    fn gaussian_ball_rows_are_in_the_ball() {
        let Dataset::Ball(d) =
            generate_dataset(&spec(4), Family::GaussianBallClipped, 500, 5).unwrap()
        else {
            unreachable!()
        };
        assert!((0..d.len()).all(|i| dot(d.x(i), d.x(i)) <= 1.0 + 1e-12 && d.y(i).abs() == 1.0));
    }

    #[test]
    fn csv_loading() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "x1,x2,y\n0.1,0.2,1\n-0.3,0.4,-1\n").unwrap();
        let Dataset::Ball(b) = load_dataset_csv(&path, DatasetKind::Ball).unwrap() else {
            unreachable!()
        };
        assert_eq!(b.len(), 2);
        assert_eq!(b.y(1), -1.0);
        assert_eq!(b.x(0), &[0.1, 0.2]);
        std::fs::write(&path, "a,b\n1,0\n2,1\n").unwrap();
        assert!(load_dataset_csv(&path, DatasetKind::Bits).is_err());
    }
}
