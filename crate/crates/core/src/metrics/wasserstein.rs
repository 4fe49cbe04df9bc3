//! Wasserstein-1 distance between empirical laws on the real line.

use crate::error::{Error, Result};
use crate::stats::sorted;

/// `∫₀¹ |F⁻¹(u) − G⁻¹(u)| du` for the empirical quantile functions.
///
/// Equal sizes reduce to the mean absolute difference of the sorted samples;
/// otherwise the integral runs over the merged grid of jump points `i/nₐ`
/// and `j/n_b`.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyPanel("wasserstein1 needs nonempty samples"));
    }
    let sa = sorted(a);
    let sb = sorted(b);
    if sa.len() != a.len() || sb.len() != b.len() {
        return Err(Error::Degenerate("NaN in wasserstein1 input".into()));
    }
    let (na, nb) = (sa.len(), sb.len());
    if na == nb {
        let s: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum();
        return Ok(s / na as f64);
    }
    // Walk the merged breakpoints with exact integer arithmetic: position
    // u = p/(na·nb), next jump of a at (i+1)·nb, of b at (j+1)·na.
    let total = (na * nb) as f64;
    let (mut i, mut j) = (0usize, 0usize);
    let mut pos = 0usize;
    let mut acc = 0.0;
    while i < na && j < nb {
        let next_a = (i + 1) * nb;
        let next_b = (j + 1) * na;
        let next = next_a.min(next_b);
        acc += (next - pos) as f64 * (sa[i] - sb[j]).abs();
        pos = next;
        if next == next_a {
            i += 1;
        }
        if next == next_b {
            j += 1;
        }
    }
    Ok(acc / total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_values() {
        assert_eq!(wasserstein1(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), 0.0);
        assert!((wasserstein1(&[0.0, 1.0, 5.0], &[0.5, 1.5, 5.5]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(wasserstein1(&[0.0, 0.0, 0.0], &[0.0, 0.0, 3.0]).unwrap(), 1.0);
        assert!(wasserstein1(&[], &[1.0]).is_err());
    }

    #[test]
    fn unequal_sizes() {
        // a uniform on {0,1}, b = {0}: half the mass moves by 1.
        assert_eq!(wasserstein1(&[0.0, 1.0], &[0.0]).unwrap(), 0.5);
        // {0,3} vs {0,1,2}: quantiles on (0,1/3],(1/3,1/2],(1/2,2/3],(2/3,1]
        // are (0,0),(0,1),(3,1),(3,2) → (0 + 1/6 + 2/6 + 1/3) = 5/6.
        assert!((wasserstein1(&[0.0, 3.0], &[0.0, 1.0, 2.0]).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    }
}
