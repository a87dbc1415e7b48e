//! Cumulative-process construction: covariate ordering, partial sums, and the
//! ring (circular-shift) form used by the excursion tests.
//!
//! Ordering patients by a covariate and accumulating their modified outcomes
//! yields a path that behaves as a random walk when outcome and covariate are
//! independent; centered outcomes pin the endpoint near zero and the path
//! becomes a bridge. All test statistics are functionals of these paths.

use std::io::Write;

use crate::error::{Error, Result};
use crate::preprocess::sample_variance;

/// Relative budget for the endpoint of a path built from centered outcomes.
const ENDPOINT_TOL: f64 = 1e-9;

/// Stable ascending ordering of patients by one covariate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortPermutation {
    order: Vec<usize>,
    tie_groups: usize,
}

impl SortPermutation {
    /// 0-based patient indices in ascending covariate order.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Number of distinct covariate values shared by two or more patients.
    /// Surfaced in reports so users can judge how arbitrary the ordering is.
    pub fn tie_groups(&self) -> usize {
        self.tie_groups
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// Sort a covariate column ascending, breaking ties by original row index.
pub fn sort_permutation(column: &[f64]) -> Result<SortPermutation> {
    if let Some(i) = column.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: i + 1,
            column: "covariate".into(),
        });
    }
    let mut order: Vec<usize> = (0..column.len()).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]));
    let mut tie_groups = 0usize;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && column[order[j]] == column[order[i]] {
            j += 1;
        }
        if j - i > 1 {
            tie_groups += 1;
        }
        i = j;
    }
    Ok(SortPermutation { order, tie_groups })
}

/// A realized cumulative path with the increment variance used to normalize it.
///
/// `sigma2` is the unbiased sample variance of the increments (the outcome
/// values themselves), not of the path values; it is therefore identical
/// across reorderings of the same outcomes, which keeps Monte-Carlo p-values
/// independent of the normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeProcess {
    c: Vec<f64>,
    sigma2: f64,
    n: usize,
    abs_increment_sum: f64,
}

impl CumulativeProcess {
    /// Partial sums c_i = sum of the first i ordered outcomes, i = 1..N.
    pub fn path(&self) -> &[f64] {
        &self.c
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Normalization factor sqrt(N * sigma^2); 0 for degenerate inputs.
    pub fn scale(&self) -> f64 {
        (self.n as f64 * self.sigma2).sqrt()
    }

    /// Endpoint of the path (the total outcome sum).
    pub fn endpoint(&self) -> f64 {
        *self.c.last().unwrap_or(&0.0)
    }

    /// Absolute endpoint budget below which the path counts as a bridge.
    pub fn endpoint_budget(&self) -> f64 {
        ENDPOINT_TOL * self.abs_increment_sum
    }

    /// Whether the path qualifies as a bridge (centered outcomes).
    pub fn is_bridge(&self) -> bool {
        self.endpoint().abs() <= self.endpoint_budget()
    }

    /// Re-anchor the path on a ring so it starts just after its minimum.
    ///
    /// The result starts from the element following the argmin, has minimum
    /// exactly 0 at its final index, and maximum exactly max(c) - min(c); it
    /// realizes the double maximization over all circular shifts. Requires a
    /// bridge (centered input), otherwise the ring construction is ill-defined.
    pub fn circular_shift_to_min(&self) -> Result<CumulativeProcess> {
        if !self.is_bridge() {
            return Err(Error::UncenteredPath {
                endpoint: self.endpoint(),
                budget: self.endpoint_budget(),
            });
        }
        let n = self.n;
        let c = &self.c;
        let k = argmin(c);
        let c_min = c[k];
        let mut shifted = Vec::with_capacity(n);
        for i in 0..n {
            let j = (k + 1 + i) % n;
            shifted.push(c[j] - c_min);
        }
        Ok(CumulativeProcess {
            c: shifted,
            sigma2: self.sigma2,
            n,
            abs_increment_sum: self.abs_increment_sum,
        })
    }

    /// Dump `(i/N, c_i / sqrt(N sigma^2))` pairs as CSV for plotting.
    pub fn write_curve_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        let scale = self.scale();
        writeln!(writer, "t,normalized")?;
        for (i, v) in self.c.iter().enumerate() {
            let norm = if scale > 0.0 { v / scale } else { 0.0 };
            writeln!(writer, "{},{}", (i + 1) as f64 / self.n as f64, norm)?;
        }
        Ok(())
    }
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in xs.iter().enumerate() {
        if *v < xs[best] {
            best = i;
        }
    }
    best
}

/// Accumulate outcomes in the order given by a sort permutation.
pub fn cumulative(y: &[f64], s: &SortPermutation) -> Result<CumulativeProcess> {
    if y.len() != s.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: s.len(),
        });
    }
    let mut c = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    for &i in s.order() {
        acc += y[i];
        c.push(acc);
    }
    Ok(CumulativeProcess {
        c,
        sigma2: sample_variance(y),
        n: y.len(),
        abs_increment_sum: y.iter().map(|v| v.abs()).sum(),
    })
}

/// Accumulate outcomes already arranged in path order (Monte-Carlo hot path).
pub fn cumulative_ordered(y_ordered: &[f64]) -> CumulativeProcess {
    let mut c = Vec::with_capacity(y_ordered.len());
    let mut acc = 0.0;
    for &v in y_ordered {
        acc += v;
        c.push(acc);
    }
    CumulativeProcess {
        c,
        sigma2: sample_variance(y_ordered),
        n: y_ordered.len(),
        abs_increment_sum: y_ordered.iter().map(|v| v.abs()).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> SortPermutation {
        SortPermutation {
            order: (0..n).collect(),
            tie_groups: 0,
        }
    }

    #[test]
    fn sort_permutation_examples() {
        // 1-based spec examples map to 0-based indices here
        let s = sort_permutation(&[0.3, 0.1, 0.2]).unwrap();
        assert_eq!(s.order(), &[1, 2, 0]);
        assert_eq!(s.tie_groups(), 0);

        let s = sort_permutation(&[0.7, 0.7, 0.7]).unwrap();
        assert_eq!(s.order(), &[0, 1, 2]);
        assert_eq!(s.tie_groups(), 1);

        let s = sort_permutation(&[0.5, 0.5, 0.1]).unwrap();
        assert_eq!(s.order(), &[2, 0, 1]);
        assert_eq!(s.tie_groups(), 1);
    }

    #[test]
    fn cumulative_examples() {
        let p = cumulative(&[1.0, -1.0, 1.0, -1.0], &identity(4)).unwrap();
        assert_eq!(p.path(), &[1.0, 0.0, 1.0, 0.0]);

        // s = (3,4,1,2) in 1-based spec terms
        let s = SortPermutation {
            order: vec![2, 3, 0, 1],
            tie_groups: 0,
        };
        let p = cumulative(&[2.0, 4.0, -10.0, -14.0], &s).unwrap();
        assert_eq!(p.path(), &[-10.0, -24.0, -22.0, -18.0]);
    }

    #[test]
    fn centered_outcomes_produce_a_bridge() {
        let y = [1.5, -0.5, -2.0, 1.0]; // sums to zero
        let p = cumulative(&y, &identity(4)).unwrap();
        assert!(p.is_bridge());
        assert_eq!(p.endpoint(), 0.0);
    }

    #[test]
    fn sigma2_is_permutation_invariant() {
        let y = [0.3, -1.2, 2.2, -0.7, -0.6];
        let a = cumulative(&y, &identity(5)).unwrap();
        let s = SortPermutation {
            order: vec![4, 2, 0, 3, 1],
            tie_groups: 0,
        };
        let b = cumulative(&y, &s).unwrap();
        assert_eq!(a.sigma2(), b.sigma2());
    }

    #[test]
    fn shift_to_min_range_identity() {
        let y = [1.0, 1.0, -3.0, 1.0, 2.0, -2.0]; // exactly centered
        let p = cumulative(&y, &identity(6)).unwrap();
        let shifted = p.circular_shift_to_min().unwrap();
        let max = p.path().iter().cloned().fold(f64::MIN, f64::max);
        let min = p.path().iter().cloned().fold(f64::MAX, f64::min);
        let smax = shifted.path().iter().cloned().fold(f64::MIN, f64::max);
        let smin = shifted.path().iter().cloned().fold(f64::MAX, f64::min);
        assert_eq!(smax, max - min); // exact, same subtraction both sides
        assert_eq!(smin, 0.0);
        assert_eq!(*shifted.path().last().unwrap(), 0.0);
    }

    #[test]
    fn shift_matches_exhaustive_shift_oracle() {
        // 12-step centered walk; brute-force every circular shift of the
        // increments and re-sum, then compare the double maximization with
        // the range of the unshifted path.
        let y = [1.0, -1.0, 2.0, -2.0, 1.0, 1.0, -1.0, -1.0, 3.0, -3.0, 2.0, -2.0];
        let n = y.len();
        let p = cumulative(&y, &identity(n)).unwrap();
        let mut best = f64::MIN;
        for l in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += y[(i + l) % n];
                best = best.max(acc.abs());
            }
        }
        let shifted = p.circular_shift_to_min().unwrap();
        let smax = shifted.path().iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(smax, best);
        let max = p.path().iter().cloned().fold(f64::MIN, f64::max);
        let min = p.path().iter().cloned().fold(f64::MAX, f64::min);
        assert_eq!(smax, max - min);
    }

    #[test]
    fn shift_rejects_uncentered_path() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let p = cumulative(&y, &identity(4)).unwrap();
        assert!(matches!(
            p.circular_shift_to_min(),
            Err(Error::UncenteredPath { .. })
        ));
    }

    #[test]
    fn min_at_final_index_shifts_by_zero() {
        // path achieves its minimum only at the final index: rotation by 0
        // modulo the endpoint convention, so the path is unchanged
        let y = [2.0, -1.0, 1.0, -1.0, -1.0]; // path 2,1,2,1,0
        let p = cumulative(&y, &identity(5)).unwrap();
        let shifted = p.circular_shift_to_min().unwrap();
        assert_eq!(shifted.path(), &[2.0, 1.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn curve_csv_has_normalized_rows() {
        let y = [1.0, -1.0, 1.0, -1.0];
        let p = cumulative(&y, &identity(4)).unwrap();
        let mut buf = Vec::new();
        p.write_curve_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,normalized");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0.25,"));
    }
}
