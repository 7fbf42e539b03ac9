//! Per-channel population responses.
//!
//! A [`PopulationResponse`] is a channels × samples matrix of firing rates
//! (or scaled voltages) with a shared sample rate and one characteristic
//! frequency per channel. Channel 1 is the most basal (highest CF); CFs are
//! strictly decreasing down the rows.

use crate::error::{Error, Result};
use crate::sample::Sample;

/// Channels × samples response matrix with its CF axis.
#[derive(Clone, Debug, PartialEq)]
pub struct PopulationResponse<S> {
    n_channels: usize,
    n_samples: usize,
    fs: S,
    cf_hz: Vec<S>,
    /// Row-major storage: `data[ch * n_samples + t]`, channel 1 first.
    data: Vec<S>,
}

impl<S: Sample> PopulationResponse<S> {
    /// Build a response from row-major data.
    ///
    /// # Errors
    ///
    /// * [`Error::InvalidParameter`] for a non-positive sample rate.
    /// * [`Error::DimensionMismatch`] if shapes disagree or an axis is empty.
    /// * [`Error::Data`] if the CF axis is not strictly decreasing or data
    ///   contains non-finite values.
    pub fn new(fs: S, cf_hz: Vec<S>, data: Vec<S>) -> Result<Self> {
        if !(fs.is_finite() && fs > S::zero()) {
            return Err(Error::InvalidParameter(format!(
                "sample rate must be positive and finite, got {fs:?}"
            )));
        }
        let n_channels = cf_hz.len();
        if n_channels == 0 {
            return Err(Error::DimensionMismatch("zero channels".into()));
        }
        if data.is_empty() || data.len() % n_channels != 0 {
            return Err(Error::DimensionMismatch(format!(
                "data length {} is not a positive multiple of {} channels",
                data.len(),
                n_channels
            )));
        }
        for w in cf_hz.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Data(format!(
                    "CF axis must be strictly decreasing, got {:?} then {:?}",
                    w[0], w[1]
                )));
            }
        }
        if cf_hz.iter().any(|v| !(v.is_finite() && *v > S::zero())) {
            return Err(Error::Data("CF axis must be positive and finite".into()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite response sample at flat index {pos}"
            )));
        }
        let n_samples = data.len() / n_channels;
        Ok(PopulationResponse {
            n_channels,
            n_samples,
            fs,
            cf_hz,
            data,
        })
    }

    /// Build a response from per-channel rows.
    pub fn from_rows(fs: S, cf_hz: Vec<S>, rows: Vec<Vec<S>>) -> Result<Self> {
        if rows.len() != cf_hz.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows vs {} CFs",
                rows.len(),
                cf_hz.len()
            )));
        }
        if let Some(first) = rows.first() {
            let len = first.len();
            if rows.iter().any(|r| r.len() != len) {
                return Err(Error::DimensionMismatch(
                    "rows have differing lengths".into(),
                ));
            }
        }
        let data: Vec<S> = rows.into_iter().flatten().collect();
        Self::new(fs, cf_hz, data)
    }

    /// Number of channels (rows).
    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    /// Number of samples per channel (columns).
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Shared sample rate in Hz.
    pub fn fs(&self) -> S {
        self.fs
    }

    /// Characteristic frequencies, channel 1 first (strictly decreasing).
    pub fn cf_hz(&self) -> &[S] {
        &self.cf_hz
    }

    /// Row for 1-based `channel`.
    ///
    /// # Panics
    ///
    /// Panics if `channel` is 0 or beyond the channel count.
    pub fn channel(&self, channel: usize) -> &[S] {
        assert!(
            (1..=self.n_channels).contains(&channel),
            "channel {channel} outside 1..={}",
            self.n_channels
        );
        let i = channel - 1;
        &self.data[i * self.n_samples..(i + 1) * self.n_samples]
    }

    /// All rows in channel order.
    pub fn rows(&self) -> impl Iterator<Item = &[S]> {
        self.data.chunks_exact(self.n_samples)
    }

    /// Flat row-major view of the data.
    pub fn flat(&self) -> &[S] {
        &self.data
    }

    /// True when `other` has the same channel count, sample count and
    /// sample rate (bitwise fs comparison).
    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_channels == other.n_channels
            && self.n_samples == other.n_samples
            && self.fs == other.fs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfs(n: usize) -> Vec<f64> {
        (0..n).map(|i| 1000.0 - 10.0 * i as f64).collect()
    }

    #[test]
    fn construction_and_accessors() {
        let pop = PopulationResponse::new(20e3, cfs(3), vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(pop.n_channels(), 3);
        assert_eq!(pop.n_samples(), 2);
        assert_eq!(pop.channel(1), &[1., 2.]);
        assert_eq!(pop.channel(3), &[5., 6.]);
        assert_eq!(pop.rows().count(), 3);
    }

    #[test]
    fn from_rows_matches_flat_construction() {
        let a =
            PopulationResponse::from_rows(20e3, cfs(2), vec![vec![1., 2., 3.], vec![4., 5., 6.]])
                .unwrap();
        let b = PopulationResponse::new(20e3, cfs(2), vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cf_axis_must_strictly_decrease() {
        let err = PopulationResponse::new(20e3, vec![100.0, 100.0], vec![0.0; 4]);
        assert!(matches!(err, Err(Error::Data(_))));
        let err = PopulationResponse::new(20e3, vec![100.0, 200.0], vec![0.0; 4]);
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn shape_errors_are_dimension_mismatches() {
        assert!(matches!(
            PopulationResponse::new(20e3, cfs(3), vec![0.0; 4]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            PopulationResponse::new(20e3, vec![], vec![0.0; 4]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            PopulationResponse::from_rows(20e3, cfs(2), vec![vec![1.0], vec![1.0, 2.0]]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn non_finite_data_rejected() {
        assert!(matches!(
            PopulationResponse::new(20e3, cfs(1), vec![f64::NAN]),
            Err(Error::Data(_))
        ));
    }

    #[test]
    #[should_panic(expected = "channel 0 outside")]
    fn channel_is_one_based() {
        let pop = PopulationResponse::new(20e3, cfs(1), vec![0.0]).unwrap();
        let _ = pop.channel(0);
    }
}
