use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::{Environment, Trial};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// One logistic feature trajectory `a + r / (1 + exp(-d (t - c)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmoidFeatureParams {
    pub offset: f64,
    pub range: f64,
    pub rate: f64,
    pub midpoint: f64,
}

impl SigmoidFeatureParams {
    pub fn eval(&self, t: f64) -> f64 {
        self.offset + self.range / (1.0 + (-self.rate * (t - self.midpoint)).exp())
    }
}

pub fn gen_sigmoid_params(p: usize, seed: u64) -> Vec<SigmoidFeatureParams> {
    let mut rng = stream(seed, Stream::SigmoidParams);
    (0..p)
        .map(|_| SigmoidFeatureParams {
            offset: rng.sample(StandardNormal),
            range: rng.sample(StandardNormal),
            rate: rng.sample(StandardNormal),
            midpoint: rng.sample(StandardNormal),
        })
        .collect()
}

/// Maps trial `t ∈ 1..=horizon` onto `[0, 1]`.
pub fn normalized_time(t: usize, horizon: usize) -> f64 {
    if horizon <= 1 {
        0.0
    } else {
        (t.saturating_sub(1)) as f64 / (horizon - 1) as f64
    }
}

/// Feature generator shared by every unit: the deterministic sigmoid mean plus
/// independent per-unit, per-coordinate Gaussian perturbations.
#[derive(Debug, Clone)]
pub struct SigmoidFeatureModel {
    pub params: Vec<SigmoidFeatureParams>,
    pub noise_sd: f64,
    pub n_units: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl SigmoidFeatureModel {
    pub fn new(p: usize, n_units: usize, horizon: usize, noise_sd: f64, seed: u64) -> Self {
        Self {
            params: gen_sigmoid_params(p, seed),
            noise_sd,
            n_units,
            horizon,
            seed,
        }
    }

    pub fn mean_at(&self, t: usize) -> DVector<f64> {
        let s = normalized_time(t, self.horizon);
        DVector::from_iterator(self.params.len(), self.params.iter().map(|prm| prm.eval(s)))
    }

    pub fn features_at(&self, t: usize) -> Vec<DVector<f64>> {
        let mean = self.mean_at(t);
        let mut rng = stream(self.seed, Stream::Features(t as u64));
        (0..self.n_units)
            .map(|_| {
                let mut x = mean.clone();
                for v in x.iter_mut() {
                    let e: f64 = rng.sample(StandardNormal);
                    *v += self.noise_sd * e;
                }
                x
            })
            .collect()
    }
}

/// Dense `unit x trial x dimension` feature array.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub n_units: usize,
    pub horizon: usize,
    pub dim: usize,
    data: Vec<f64>,
}

impl FeatureTensor {
    /// `t` is 1-based like everywhere else.
    pub fn get(&self, unit: usize, t: usize, j: usize) -> f64 {
        self.data[(unit * self.horizon + (t - 1)) * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub fn gen_sigmoid_features(p: usize, n: usize, horizon: usize, seed: u64) -> Result<FeatureTensor> {
    if p == 0 || n == 0 || horizon == 0 {
        return Err(Error::config("feature tensor needs p, N, T >= 1"));
    }
    let model = SigmoidFeatureModel::new(p, n, horizon, 1.0, seed);
    let mut data = vec![0.0; n * horizon * p];
    for t in 1..=horizon {
        for (i, x) in model.features_at(t).into_iter().enumerate() {
            let at = (i * horizon + (t - 1)) * p;
            data[at..at + p].copy_from_slice(x.as_slice());
        }
    }
    Ok(FeatureTensor {
        n_units: n,
        horizon,
        dim: p,
        data,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthSpec {
    pub dim: usize,
    pub rank: usize,
    pub n_units: usize,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    /// Mixture component probabilities; uniform when absent.
    #[serde(default)]
    pub priors: Option<Vec<f64>>,
}

fn default_sigma2() -> f64 {
    100.0
}

fn default_noise_sd() -> f64 {
    1.0
}

/// Hidden low-rank reward structure: `beta_i = Q c_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `p x K` representative models.
    pub q: DMatrix<f64>,
    /// `K x N` memberships, one column per unit.
    pub c: DMatrix<f64>,
    /// `p x N` coefficients.
    pub beta: DMatrix<f64>,
    pub noise_sd: f64,
    pub sigma2: f64,
    /// Mixture component each membership was drawn from.
    pub components: Vec<usize>,
}

pub fn gen_ground_truth(spec: &GroundTruthSpec, seed: u64) -> Result<GroundTruth> {
    let GroundTruthSpec {
        dim: p,
        rank: k,
        n_units: n,
        sigma2,
        noise_sd,
        ..
    } = *spec;
    if k == 0 || k > p {
        return Err(Error::config(format!("rank K={k} must satisfy 1 <= K <= p={p}")));
    }
    if n == 0 {
        return Err(Error::config("population must contain at least one unit"));
    }
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::config(format!("sigma2 must be positive, got {sigma2}")));
    }
    if !(noise_sd >= 0.0) {
        return Err(Error::config(format!("noise_sd must be nonnegative, got {noise_sd}")));
    }
    let priors = match &spec.priors {
        Some(w) => {
            if w.len() != k || w.iter().any(|v| !(*v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                return Err(Error::config("priors must be K nonnegative weights with positive sum"));
            }
            let total: f64 = w.iter().sum();
            w.iter().map(|v| v / total).collect::<Vec<_>>()
        }
        None => vec![1.0 / k as f64; k],
    };

    let mut rng = stream(seed, Stream::GroundTruth);
    let q = DMatrix::from_fn(p, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let unif = Uniform::new(0.0, 1.0).expect("valid range");
    let dominant_sd = sigma2.sqrt();
    let mut c = DMatrix::zeros(k, n);
    let mut components = Vec::with_capacity(n);
    for i in 0..n {
        let u: f64 = unif.sample(&mut rng);
        let mut acc = 0.0;
        let mut comp = k - 1;
        for (j, w) in priors.iter().enumerate() {
            acc += w;
            if u < acc {
                comp = j;
                break;
            }
        }
        components.push(comp);
        for j in 0..k {
            let z: f64 = rng.sample(StandardNormal);
            c[(j, i)] = if j == comp { dominant_sd * z } else { z };
        }
    }
    let beta = &q * &c;
    Ok(GroundTruth {
        q,
        c,
        beta,
        noise_sd,
        sigma2,
        components,
    })
}

impl GroundTruth {
    pub fn n_units(&self) -> usize {
        self.c.ncols()
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn rank(&self) -> usize {
        self.q.ncols()
    }

    pub fn to_fixture(&self) -> GroundTruthFixture {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        GroundTruthFixture {
            q: rows(&self.q),
            c: rows(&self.c),
            beta: rows(&self.beta),
            noise_sd: self.noise_sd,
            sigma2: self.sigma2,
            components: self.components.clone(),
        }
    }

    pub fn from_fixture(f: &GroundTruthFixture) -> Result<Self> {
        let mat = |rows: &[Vec<f64>], name: &str| -> Result<DMatrix<f64>> {
            let nr = rows.len();
            let nc = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != nc) {
                return Err(Error::Shape {
                    expected: format!("rectangular {name}"),
                    actual: "ragged rows".into(),
                });
            }
            Ok(DMatrix::from_row_iterator(nr, nc, rows.iter().flatten().copied()))
        };
        let q = mat(&f.q, "Q")?;
        let c = mat(&f.c, "C")?;
        if q.ncols() != c.nrows() {
            return Err(Error::Shape {
                expected: format!("C with {} rows", q.ncols()),
                actual: format!("{} rows", c.nrows()),
            });
        }
        let beta = &q * &c;
        Ok(GroundTruth {
            q,
            c,
            beta,
            noise_sd: f.noise_sd,
            sigma2: f.sigma2,
            components: f.components.clone(),
        })
    }
}

/// JSON form of [`GroundTruth`]; matrices are nested row-major arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFixture {
    pub q: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub noise_sd: f64,
    pub sigma2: f64,
    pub components: Vec<usize>,
}

pub fn expected_reward(gt: &GroundTruth, x: &DVector<f64>, unit: usize) -> Result<f64> {
    if unit >= gt.n_units() {
        return Err(Error::UnitOutOfRange {
            index: unit,
            len: gt.n_units(),
        });
    }
    if x.len() != gt.dim() {
        return Err(Error::Shape {
            expected: format!("feature of length {}", gt.dim()),
            actual: x.len().to_string(),
        });
    }
    Ok(gt.beta.column(unit).dot(x))
}

pub fn sample_reward<R: Rng + ?Sized>(
    gt: &GroundTruth,
    x: &DVector<f64>,
    unit: usize,
    noise: &mut R,
) -> Result<f64> {
    let mean = expected_reward(gt, x, unit)?;
    if gt.noise_sd == 0.0 {
        return Ok(mean);
    }
    let e: f64 = noise.sample(StandardNormal);
    Ok(mean + gt.noise_sd * e)
}

/// Sigmoid-feature population with a low-rank linear reward.
#[derive(Debug, Clone)]
pub struct SyntheticEnvironment {
    pub truth: GroundTruth,
    pub features: SigmoidFeatureModel,
    seed: u64,
}

impl SyntheticEnvironment {
    pub fn new(spec: &GroundTruthSpec, horizon: usize, feature_noise_sd: f64, seed: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        let truth = gen_ground_truth(spec, seed)?;
        let features =
            SigmoidFeatureModel::new(spec.dim, spec.n_units, horizon, feature_noise_sd, seed);
        Ok(Self {
            truth,
            features,
            seed,
        })
    }

    pub fn with_truth(truth: GroundTruth, features: SigmoidFeatureModel, seed: u64) -> Self {
        Self {
            truth,
            features,
            seed,
        }
    }
}

impl Environment for SyntheticEnvironment {
    fn n_units(&self) -> usize {
        self.truth.n_units()
    }

    fn dim(&self) -> usize {
        self.truth.dim()
    }

    fn horizon(&self) -> usize {
        self.features.horizon
    }

    fn trial(&self, t: usize) -> Result<Trial> {
        let features = self.features.features_at(t);
        let mut noise = stream(self.seed, Stream::RewardNoise(t as u64));
        let mut expected = Vec::with_capacity(features.len());
        let mut realized = Vec::with_capacity(features.len());
        for (i, x) in features.iter().enumerate() {
            expected.push(expected_reward(&self.truth, x, i)?);
            realized.push(sample_reward(&self.truth, x, i, &mut noise)?);
        }
        Ok(Trial {
            t,
            features,
            expected,
            realized,
        })
    }
}
