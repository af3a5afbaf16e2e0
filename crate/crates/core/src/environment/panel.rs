use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{normalized_time, Environment, Trial};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    /// `(time in months, outcome)` with strictly increasing times.
    pub observations: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LongitudinalPanel {
    pub subjects: Vec<Subject>,
    /// Valid outcome range of the instrument, if known.
    pub value_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvColumns {
    #[serde(default = "default_id")]
    pub id: String,
    #[serde(default = "default_time")]
    pub time: String,
    #[serde(default = "default_value")]
    pub value: String,
}

fn default_id() -> String {
    "subject_id".into()
}

fn default_time() -> String {
    "month".into()
}

fn default_value() -> String {
    "mmse".into()
}

impl Default for CsvColumns {
    fn default() -> Self {
        Self {
            id: default_id(),
            time: default_time(),
            value: default_value(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoadSummary {
    pub rows: usize,
    pub subjects_kept: usize,
    /// Subjects with fewer than two observations.
    pub subjects_dropped: usize,
}

pub fn load_longitudinal_csv(
    path: &Path,
    columns: &CsvColumns,
) -> Result<(LongitudinalPanel, LoadSummary)> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let (id_at, time_at, value_at) = (find(&columns.id)?, find(&columns.time)?, find(&columns.value)?);

    let mut by_subject: BTreeMap<String, Vec<(f64, f64, u64)>> = BTreeMap::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |at: usize, name: &str| -> Result<f64> {
            let raw = record.get(at).unwrap_or("").trim();
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("column `{name}`: cannot parse `{raw}` as a number"),
                })
        };
        let time = field(time_at, &columns.time)?;
        let value = field(value_at, &columns.value)?;
        let id = record.get(id_at).unwrap_or("").trim().to_string();
        by_subject.entry(id).or_default().push((time, value, line));
        rows += 1;
    }

    let mut summary = LoadSummary {
        rows,
        ..LoadSummary::default()
    };
    let mut subjects = Vec::new();
    for (id, mut obs) in by_subject {
        if obs.len() < 2 {
            summary.subjects_dropped += 1;
            continue;
        }
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = obs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: w[1].2,
                message: format!("subject `{id}` has two observations at time {}", w[1].0),
            });
        }
        subjects.push(Subject {
            id,
            observations: obs.into_iter().map(|(t, v, _)| (t, v)).collect(),
        });
    }
    summary.subjects_kept = subjects.len();
    if summary.subjects_dropped > 0 {
        log::warn!(
            "{}: dropped {} subject(s) with fewer than two observations",
            path.display(),
            summary.subjects_dropped
        );
    }
    Ok((
        LongitudinalPanel {
            subjects,
            value_range: None,
        },
        summary,
    ))
}

impl LongitudinalPanel {
    /// Earliest and latest observation time over all subjects.
    pub fn span(&self) -> Option<(f64, f64)> {
        let mut it = self.subjects.iter().filter_map(|s| {
            Some((s.observations.first()?.0, s.observations.last()?.0))
        });
        let first = it.next()?;
        Some(it.fold(first, |(lo, hi), (a, b)| (lo.min(a), hi.max(b))))
    }

    /// Draws `n` subjects without replacement, keeping their original order.
    pub fn sample_subjects(&self, n: usize, seed: u64) -> Result<Self> {
        if n > self.subjects.len() {
            return Err(Error::config(format!(
                "cannot sample {n} subjects from a panel of {}",
                self.subjects.len()
            )));
        }
        let mut rng = stream(seed, Stream::Subsample);
        let mut picked = sample(&mut rng, self.subjects.len(), n).into_vec();
        picked.sort_unstable();
        Ok(Self {
            subjects: picked.into_iter().map(|i| self.subjects[i].clone()).collect(),
            value_range: self.value_range,
        })
    }

    pub fn write_csv(&self, path: &Path, columns: &CsvColumns) -> Result<()> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record([&columns.id, &columns.time, &columns.value])
            .map_err(csv_err)?;
        for s in &self.subjects {
            for (t, v) in &s.observations {
                w.write_record([s.id.clone(), t.to_string(), v.to_string()])
                    .map_err(csv_err)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Piecewise-linear interpolation through sorted `(time, value)` points,
/// holding the end values outside the observed range.
pub fn interpolate(points: &[(f64, f64)], t: f64) -> f64 {
    match points {
        [] => f64::NAN,
        [(_, v)] => *v,
        _ => {
            let (t0, v0) = points[0];
            let (tn, vn) = points[points.len() - 1];
            if t <= t0 {
                return v0;
            }
            if t >= tn {
                return vn;
            }
            let hi = points.partition_point(|(pt, _)| *pt <= t);
            let (ta, va) = points[hi - 1];
            if ta == t {
                return va;
            }
            let (tb, vb) = points[hi];
            va + (vb - va) * (t - ta) / (tb - ta)
        }
    }
}

/// `(1, s, s², …, s^degree)`.
pub fn polynomial_features(s: f64, degree: usize) -> DVector<f64> {
    let mut x = DVector::zeros(degree + 1);
    let mut v = 1.0;
    for j in 0..=degree {
        x[j] = v;
        v *= s;
    }
    x
}

/// Affine map from outcome to monitoring reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardTransform {
    pub scale: f64,
    pub offset: f64,
}

impl Default for RewardTransform {
    /// Severity-oriented MMSE reward `30 - MMSE`.
    fn default() -> Self {
        Self {
            scale: -1.0,
            offset: 30.0,
        }
    }
}

impl RewardTransform {
    pub fn apply(&self, v: f64) -> f64 {
        self.offset + self.scale * v
    }
}

/// Replays interpolated longitudinal outcomes on a uniform trial grid with a
/// polynomial time basis as the feature vector.
#[derive(Debug, Clone)]
pub struct PanelEnvironment {
    pub panel: LongitudinalPanel,
    pub horizon: usize,
    pub degree: usize,
    pub transform: RewardTransform,
    start: f64,
    end: f64,
}

pub fn panel_to_environment(
    panel: LongitudinalPanel,
    horizon: usize,
    degree: usize,
    transform: RewardTransform,
) -> Result<PanelEnvironment> {
    if horizon < 2 {
        return Err(Error::config(format!("panel horizon must be at least 2, got {horizon}")));
    }
    if panel.subjects.is_empty() {
        return Err(Error::config("panel has no subjects"));
    }
    if let Some(s) = panel.subjects.iter().find(|s| s.observations.len() < 2) {
        return Err(Error::config(format!("subject `{}` has fewer than two observations", s.id)));
    }
    let (start, end) = panel.span().expect("non-empty panel");
    Ok(PanelEnvironment {
        panel,
        horizon,
        degree,
        transform,
        start,
        end,
    })
}

impl PanelEnvironment {
    /// Calendar time (months) of trial `t`.
    pub fn grid_time(&self, t: usize) -> f64 {
        self.start + normalized_time(t, self.horizon) * (self.end - self.start)
    }

    pub fn outcome(&self, unit: usize, t: usize) -> f64 {
        interpolate(&self.panel.subjects[unit].observations, self.grid_time(t))
    }
}

impl Environment for PanelEnvironment {
    fn n_units(&self) -> usize {
        self.panel.subjects.len()
    }

    fn dim(&self) -> usize {
        self.degree + 1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn trial(&self, t: usize) -> Result<Trial> {
        let x = polynomial_features(normalized_time(t, self.horizon), self.degree);
        let expected: Vec<f64> = (0..self.n_units())
            .map(|i| self.transform.apply(self.outcome(i, t)))
            .collect();
        Ok(Trial {
            t,
            features: vec![x; self.n_units()],
            realized: expected.clone(),
            expected,
        })
    }
}

/// Generates an MMSE-like cohort: three latent progression profiles (stable,
/// slowly declining, rapidly declining), annual visits over five years with
/// random missed follow-ups, integer scores clipped to 0..=30.
pub fn synthetic_mmse_panel(n_subjects: usize, seed: u64) -> LongitudinalPanel {
    // (weight, baseline mean, baseline sd, annual slope mean, slope sd, curvature)
    const PROFILES: [(f64, f64, f64, f64, f64, f64); 3] = [
        (0.45, 28.8, 0.9, -0.15, 0.15, 0.0),
        (0.35, 26.5, 1.2, -1.0, 0.4, -0.10),
        (0.20, 23.0, 2.0, -2.4, 0.8, -0.25),
    ];
    let mut rng = stream(seed, Stream::Fixture);
    let visit_noise = Normal::new(0.0, 0.7).expect("valid sd");
    let mut subjects = Vec::with_capacity(n_subjects);
    for i in 0..n_subjects {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut profile = PROFILES[PROFILES.len() - 1];
        for p in PROFILES {
            acc += p.0;
            if u < acc {
                profile = p;
                break;
            }
        }
        let (_, b_mean, b_sd, s_mean, s_sd, curv) = profile;
        let z: [f64; 2] = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let baseline = b_mean + b_sd * z[0];
        let slope = (s_mean + s_sd * z[1]).min(0.2);
        let mut observations = Vec::new();
        for visit in 0..=5u32 {
            if visit > 0 && rng.random::<f64>() < 0.15 {
                continue;
            }
            let years = visit as f64;
            let score = baseline + slope * years + curv * years * years + visit_noise.sample(&mut rng);
            observations.push((12.0 * years, score.round().clamp(0.0, 30.0)));
        }
        if observations.len() < 2 {
            let score = (baseline + slope * 5.0 + curv * 25.0).round().clamp(0.0, 30.0);
            observations.push((60.0, score));
        }
        subjects.push(Subject {
            id: format!("S{i:04}"),
            observations,
        });
    }
    LongitudinalPanel {
        subjects,
        value_range: Some((0.0, 30.0)),
    }
}
