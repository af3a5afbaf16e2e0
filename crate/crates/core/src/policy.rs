//! The interface every monitoring policy implements, plus the shared top-M
//! selection rule.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// What a selected unit hands back to its policy after being monitored.
#[derive(Debug, Clone)]
pub struct Feedback<'a> {
    pub unit: usize,
    pub x: &'a DVector<f64>,
    pub y: f64,
}

/// Communication and numerical events produced by one update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateReport {
    pub uploads: u64,
    pub downloads: u64,
    pub scalars: u64,
    pub als_nonconverged: u64,
}

impl std::ops::AddAssign for UpdateReport {
    fn add_assign(&mut self, o: Self) {
        self.uploads += o.uploads;
        self.downloads += o.downloads;
        self.scalars += o.scalars;
        self.als_nonconverged += o.als_nonconverged;
    }
}

/// Score every unit, let the server pick, then learn from the monitored units.
pub trait Policy: Send {
    fn name(&self) -> &'static str;

    /// UCB score per unit for trial `t`. Takes `&mut self` so policies may
    /// refresh cached estimates lazily.
    fn scores(&mut self, t: usize, features: &[DVector<f64>]) -> Result<Vec<f64>>;

    /// Feedback arrives in ascending unit order.
    fn update(&mut self, t: usize, feedback: &[Feedback<'_>]) -> Result<UpdateReport>;

    /// Lifetime totals, for reconciliation against per-trial records.
    fn totals(&self) -> UpdateReport;
}

/// Indices of the `m` highest scores, ties broken by ascending unit index.
/// Returned in ascending index order.
pub fn select_top_m(scores: &[f64], m: usize) -> Result<Vec<usize>> {
    if m > scores.len() {
        return Err(Error::config(format!(
            "budget M={m} exceeds population N={}",
            scores.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Numerical(format!("non-finite score for unit {i}")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let by_rank = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    if m < order.len() && m > 0 {
        order.select_nth_unstable_by(m - 1, by_rank);
    }
    let mut chosen = order[..m].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}
