//! Two-objective hypervolume and Spearman rank correlation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Area dominated by `points` and bounded by `reference`, both objectives
/// minimized. Dominated and duplicate points contribute nothing.
pub fn hypervolume_2d(points: &[(f64, f64)], reference: (f64, f64)) -> Result<f64> {
    let (r1, r2) = reference;
    if !r1.is_finite() || !r2.is_finite() {
        return Err(Error::NonFinite("reference point"));
    }
    for &(a, b) in points {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFinite("hypervolume point"));
        }
        if a > r1 || b > r2 {
            return Err(Error::OutsideReference(a, b));
        }
    }
    let mut sorted: Vec<(f64, f64)> = points.to_vec();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    // Sweep in ascending f1; a point survives only if it lowers the best f2 so far.
    let mut front: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for p in sorted {
        if front.last().is_none_or(|q| p.1 < q.1) {
            front.push(p);
        }
    }
    let mut volume = 0.0;
    for (i, &(a, b)) in front.iter().enumerate() {
        let next = front.get(i + 1).map_or(r1, |q| q.0);
        volume += (next - a) * (r2 - b);
    }
    Ok(volume)
}

/// Spearman coefficient; `defined` is false when either side has no rank
/// variance, in which case `rho` is 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    pub defined: bool,
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = mean;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<Spearman> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 3 {
        return Err(Error::Metric(format!(
            "spearman needs at least 3 pairs, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spearman input"));
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Spearman {
            rho: 0.0,
            defined: false,
        });
    }
    Ok(Spearman {
        rho: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        defined: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_area(points: &[(f64, f64)], r: (f64, f64), cells: usize) -> f64 {
        // Midpoint-rule union area on a regular grid.
        let (lo1, lo2) = points
            .iter()
            .fold((r.0, r.1), |(a, b), p| (a.min(p.0), b.min(p.1)));
        let (w, h) = ((r.0 - lo1) / cells as f64, (r.1 - lo2) / cells as f64);
        let mut hit = 0usize;
        for i in 0..cells {
            for j in 0..cells {
                let x = lo1 + (i as f64 + 0.5) * w;
                let y = lo2 + (j as f64 + 0.5) * h;
                if points.iter().any(|p| p.0 <= x && p.1 <= y) {
                    hit += 1;
                }
            }
        }
        hit as f64 * w * h
    }

    #[test]
    fn single_rectangle() {
        assert_eq!(hypervolume_2d(&[(1.0, 1.0)], (2.0, 2.0)).unwrap(), 1.0);
    }

    #[test]
    fn staircase_of_two() {
        let v = hypervolume_2d(&[(1.0, 2.0), (2.0, 1.0)], (3.0, 3.0)).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
        // Integer corners: the grid oracle is exact for a grid aligned on them.
        assert!((grid_area(&[(1.0, 2.0), (2.0, 1.0)], (3.0, 3.0), 200) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn empty_set_has_zero_volume() {
        assert_eq!(hypervolume_2d(&[], (1.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn point_beyond_reference_is_an_error() {
        let err = hypervolume_2d(&[(1.0, 4.0)], (3.0, 3.0)).unwrap_err();
        assert_eq!(err.kind(), "outside_reference");
    }

    #[test]
    fn spearman_examples() {
        let s = spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap();
        assert_eq!((s.rho, s.defined), (1.0, true));
        let s = spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!(s.rho, -1.0);
        let s = spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.rho, s.defined), (0.0, false));
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn tied_ranks_against_permutation_oracle() {
        let xs = [1.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(average_ranks(&xs), vec![1.5, 1.5, 3.0, 4.0]);
        // Oracle: average the rank vectors over every tie-breaking order.
        let perms = [[1.0, 2.0, 3.0, 4.0], [2.0, 1.0, 3.0, 4.0]];
        let mean: Vec<f64> = (0..4).map(|i| (perms[0][i] + perms[1][i]) / 2.0).collect();
        let pearson = |a: &[f64], b: &[f64]| {
            let n = a.len() as f64;
            let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
            let c: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
            let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
            let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
            c / (va * vb).sqrt()
        };
        let expected = pearson(&mean, &ys);
        let got = spearman(&xs, &ys).unwrap().rho;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!((got - 0.9486832980505138).abs() < 1e-12);
    }

    fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 0..25)
    }

    proptest! {
        #[test]
        fn order_and_dominated_points_do_not_matter(mut ps in points(), seed in any::<u64>()) {
            let r = (11.0, 11.0);
            let v = hypervolume_2d(&ps, r).unwrap();
            let mut shuffled = ps.clone();
            let k = shuffled.len().max(1);
            shuffled.rotate_left((seed as usize) % k);
            shuffled.reverse();
            prop_assert!((hypervolume_2d(&shuffled, r).unwrap() - v).abs() < 1e-9);
            if let Some(&(a, b)) = ps.first() {
                ps.push((a + 0.5, b + 0.25));
                prop_assert!((hypervolume_2d(&ps, r).unwrap() - v).abs() < 1e-9);
            }
        }

        #[test]
        fn adding_a_point_never_shrinks(ps in points(), extra in (0.0f64..10.0, 0.0f64..10.0)) {
            let r = (11.0, 11.0);
            let before = hypervolume_2d(&ps, r).unwrap();
            let mut more = ps.clone();
            more.push(extra);
            prop_assert!(hypervolume_2d(&more, r).unwrap() >= before - 1e-12);
        }

        #[test]
        fn sweep_matches_grid_on_integer_corners(raw in prop::collection::vec((0u8..8, 0u8..8), 1..10)) {
            let ps: Vec<(f64, f64)> = raw.iter().map(|&(a, b)| (a as f64, b as f64)).collect();
            let r = (8.0, 8.0);
            let exact = hypervolume_2d(&ps, r).unwrap();
            // Cells of width 1/16 never straddle an integer corner.
            let mut hit = 0usize;
            for i in 0..128 {
                for j in 0..128 {
                    let (x, y) = ((i as f64 + 0.5) / 16.0, (j as f64 + 0.5) / 16.0);
                    if ps.iter().any(|p| p.0 <= x && p.1 <= y) {
                        hit += 1;
                    }
                }
            }
            prop_assert!((exact - hit as f64 / 256.0).abs() < 1e-9);
        }

        #[test]
        fn spearman_ignores_monotone_transforms(xs in prop::collection::vec(-5.0f64..5.0, 3..30), ys in prop::collection::vec(-5.0f64..5.0, 30)) {
            let ys = &ys[..xs.len()];
            let base = spearman(&xs, ys).unwrap();
            let tx: Vec<f64> = xs.iter().map(|x| x.exp() * 3.0 + 1.0).collect();
            let t = spearman(&tx, ys).unwrap();
            prop_assert_eq!(base.defined, t.defined);
            prop_assert!((base.rho - t.rho).abs() < 1e-9);
        }

        #[test]
        fn spearman_with_itself_is_one(xs in prop::collection::vec(-5.0f64..5.0, 3..30)) {
            let distinct = xs.iter().any(|&x| x != xs[0]);
            let s = spearman(&xs, &xs).unwrap();
            if distinct {
                prop_assert!((s.rho - 1.0).abs() < 1e-12);
            } else {
                prop_assert!(!s.defined);
            }
        }
    }
}
