//! Reduction of the training set to the `M` examples that define the QUBO.

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMethod {
    Random,
    KMeans,
}

impl std::str::FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "kmeans" | "k-means" => Ok(Self::KMeans),
            other => Err(Error::Config(format!("unknown selection method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionConfig {
    pub method: SelectionMethod,
    /// Subset size `M`.
    pub size: usize,
    pub seed: u64,
    pub kmeans_max_iter: usize,
    pub kmeans_tol: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { method: SelectionMethod::Random, size: 60, seed: 0, kmeans_max_iter: 100, kmeans_tol: 1e-6 }
    }
}

impl SelectionConfig {
    /// Checks that only need the class count, so bad settings fail before any data is read.
    pub fn validate(&self, classes: usize) -> Result<()> {
        if self.size == 0 {
            return Err(Error::Config("subset size M must be positive".into()));
        }
        if self.method == SelectionMethod::KMeans {
            if !self.size.is_multiple_of(classes) {
                return Err(Error::Config(format!("M not divisible by C (M={}, C={classes})", self.size)));
            }
            if self.kmeans_max_iter == 0 || self.kmeans_tol.is_nan() || self.kmeans_tol < 0.0 {
                return Err(Error::Config("k-means needs max_iter > 0 and tol >= 0".into()));
            }
        }
        Ok(())
    }
}

pub fn select(d: &Dataset, cfg: &SelectionConfig) -> Result<Dataset> {
    match cfg.method {
        SelectionMethod::Random => select_random(d, cfg),
        SelectionMethod::KMeans => select_kmeans(d, cfg),
    }
}

/// `M` rows drawn uniformly without replacement, returned in original order.
pub fn select_random(d: &Dataset, cfg: &SelectionConfig) -> Result<Dataset> {
    if cfg.size == 0 || cfg.size > d.len() {
        return Err(Error::Config(format!("cannot select M={} examples from N={}", cfg.size, d.len())));
    }
    let mut rng = stream_rng(cfg.seed, 0);
    let mut idx = rand::seq::index::sample(&mut rng, d.len(), cfg.size).into_vec();
    idx.sort_unstable();
    Ok(d.subset(&idx))
}

/// `M/C` k-means centroids per class, labelled with that class. Output is
/// grouped by class in ascending class order.
pub fn select_kmeans(d: &Dataset, cfg: &SelectionConfig) -> Result<Dataset> {
    cfg.validate(d.classes())?;
    let k = cfg.size / d.classes();
    let counts = d.class_counts();
    if let Some((c, &n)) = counts.iter().enumerate().find(|(_, &n)| n < k) {
        return Err(Error::Config(format!("class {c} has {n} examples, fewer than M/C = {k}")));
    }
    let mut rows = Vec::with_capacity(cfg.size * d.n_features());
    let mut labels = Vec::with_capacity(cfg.size);
    for c in 0..d.classes() {
        let points = d.features().select_rows(&d.class_indices(c));
        let mut rng = stream_rng(cfg.seed, c as u64);
        let fit = kmeans(&points, k, cfg.kmeans_max_iter, cfg.kmeans_tol, &mut rng)?;
        rows.extend_from_slice(fit.centroids.as_slice());
        labels.extend(std::iter::repeat_n(c, k));
    }
    let features = Matrix::new(cfg.size, d.n_features(), rows)?;
    let out = Dataset::new(features, labels, d.classes())?;
    match d.names() {
        Some(n) => out.with_names(n.to_vec()),
        None => Ok(out),
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centroids: Matrix,
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss: Vec<f64>,
    pub iterations: usize,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp_init<R: Rng>(points: &Matrix, k: usize, rng: &mut R) -> Matrix {
    let n = points.rows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|i| dist2(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            // every remaining point coincides with a chosen centroid
            rng.random_range(0..n)
        };
        chosen.push(next);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dist2(points.row(i), points.row(next)));
        }
    }
    points.select_rows(&chosen)
}

/// Nearest centroid per point (ties to the lower index) and the squared distance to it.
fn assign(points: &Matrix, centroids: &Matrix) -> (Vec<usize>, Vec<f64>) {
    points
        .iter_rows()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (j, c) in centroids.iter_rows().enumerate() {
                let d = dist2(p, c);
                if d < best.1 {
                    best = (j, d);
                }
            }
            best
        })
        .unzip()
}

/// Lloyd's algorithm with k-means++ seeding. Stops once no centroid moves
/// more than `tol` or after `max_iter` updates. An empty cluster is reseeded
/// at the point farthest from its current centroid.
pub fn kmeans<R: Rng>(points: &Matrix, k: usize, max_iter: usize, tol: f64, rng: &mut R) -> Result<KMeansFit> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(Error::Config(format!("k-means with k={k} on {n} points")));
    }
    let f = points.cols();
    let mut centroids = kmeans_pp_init(points, k, rng);
    let mut wcss = Vec::new();
    let mut iterations = 0;
    let (mut assignment, mut d2) = assign(points, &centroids);
    wcss.push(d2.iter().sum());

    while iterations < max_iter {
        iterations += 1;
        let mut sums = Matrix::zeros(k, f);
        let mut counts = vec![0usize; k];
        for (i, &a) in assignment.iter().enumerate() {
            counts[a] += 1;
            for (s, v) in sums.row_mut(a).iter_mut().zip(points.row(i)) {
                *s += v;
            }
        }
        let mut taken = vec![false; n];
        let mut next = Matrix::zeros(k, f);
        for j in 0..k {
            if counts[j] > 0 {
                let inv = 1.0 / counts[j] as f64;
                for (dst, s) in next.row_mut(j).iter_mut().zip(sums.row(j)) {
                    *dst = s * inv;
                }
            } else {
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| d2[a].total_cmp(&d2[b]).then(b.cmp(&a)))
                    .expect("k <= n leaves a point available");
                taken[far] = true;
                next.row_mut(j).copy_from_slice(points.row(far));
            }
        }
        let shift = (0..k).map(|j| dist2(centroids.row(j), next.row(j)).sqrt()).fold(0.0, f64::max);
        centroids = next;
        (assignment, d2) = assign(points, &centroids);
        wcss.push(d2.iter().sum());
        if shift < tol {
            break;
        }
    }
    Ok(KMeansFit { centroids, assignment, wcss, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn cfg(method: SelectionMethod, size: usize) -> SelectionConfig {
        SelectionConfig { method, size, seed: 11, ..Default::default() }
    }

    fn grid(n: usize, classes: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        Dataset::new(Matrix::from_rows(&rows).unwrap(), (0..n).map(|i| i % classes).collect(), classes).unwrap()
    }

    #[test]
    fn random_full_draw_keeps_every_row() {
        let d = grid(12, 3);
        let s = select_random(&d, &cfg(SelectionMethod::Random, 12)).unwrap();
        assert_eq!(s, d);
    }

    #[test]
    fn random_single_row() {
        let d = grid(1, 1);
        let s = select_random(&d, &cfg(SelectionMethod::Random, 1)).unwrap();
        assert_eq!(s, d);
    }

    #[test]
    fn random_is_deterministic_subset() {
        let d = grid(50, 3);
        let c = cfg(SelectionMethod::Random, 9);
        let a = select_random(&d, &c).unwrap();
        assert_eq!(a, select_random(&d, &c).unwrap());
        assert_eq!(a.len(), 9);
        for (row, &l) in a.features().iter_rows().zip(a.labels()) {
            let i = row[0] as usize;
            assert_eq!(d.features().row(i), row);
            assert_eq!(d.labels()[i], l);
        }
        assert!(select_random(&d, &cfg(SelectionMethod::Random, 51)).is_err());
    }

    #[test]
    fn kmeans_indivisible() {
        let d = grid(30, 2);
        let e = select_kmeans(&d, &cfg(SelectionMethod::KMeans, 3)).unwrap_err();
        assert!(e.to_string().contains("M not divisible by C"), "{e}");
    }

    #[test]
    fn kmeans_small_class() {
        let d = grid(6, 3);
        assert!(matches!(select_kmeans(&d, &cfg(SelectionMethod::KMeans, 9)), Err(Error::Config(_))));
    }

    #[test]
    fn identical_points_collapse() {
        let rows = vec![vec![2.5, -1.0]; 4];
        let d = Dataset::new(Matrix::from_rows(&rows).unwrap(), vec![0; 4], 1).unwrap();
        let s = select_kmeans(&d, &cfg(SelectionMethod::KMeans, 4)).unwrap();
        for r in s.features().iter_rows() {
            assert_eq!(r, &[2.5, -1.0]);
        }
    }

    #[test]
    fn two_blobs_recover_means() {
        let mut rng = stream_rng(5, 0);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let per_class = 200;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, centre) in [[0.0, 0.0], [10.0, 10.0]].iter().enumerate() {
            for _ in 0..per_class {
                rows.push(vec![centre[0] + noise.sample(&mut rng), centre[1] + noise.sample(&mut rng)]);
                labels.push(c);
            }
        }
        let d = Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, 2).unwrap();
        let s = select_kmeans(&d, &cfg(SelectionMethod::KMeans, 2)).unwrap();
        assert_eq!(s.labels(), &[0, 1]);
        for c in 0..2 {
            // oracle: the sample mean of the class
            let idx = d.class_indices(c);
            let mean: Vec<f64> =
                (0..2).map(|j| idx.iter().map(|&i| d.features().get(i, j)).sum::<f64>() / idx.len() as f64).collect();
            let got = s.features().row(c);
            for j in 0..2 {
                assert!((got[j] - mean[j]).abs() < 1e-9, "{got:?} vs {mean:?}");
                let centre = if c == 0 { 0.0 } else { 10.0 };
                assert!((got[j] - centre).abs() < 3.0 * 0.5 / (per_class as f64).sqrt());
            }
        }
    }

    proptest! {
        #[test]
        fn wcss_nonincreasing_and_centroids_in_box(
            rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 8..40),
            k in 1usize..6,
            seed in 0u64..1000,
        ) {
            let pts = Matrix::from_rows(&rows).unwrap();
            let fit = kmeans(&pts, k, 50, 1e-9, &mut stream_rng(seed, 0)).unwrap();
            for w in fit.wcss.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0), "{:?}", fit.wcss);
            }
            for c in fit.centroids.iter_rows() {
                for j in 0..2 {
                    let lo = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
                    let hi = rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(c[j] >= lo - 1e-9 && c[j] <= hi + 1e-9);
                }
            }
        }

        #[test]
        fn kmeans_selection_sizes(per_class in 3usize..10, k in 1usize..4, seed in 0u64..50) {
            let d = grid(per_class * 3, 3);
            let c = SelectionConfig { method: SelectionMethod::KMeans, size: 3 * k.min(per_class), seed, ..Default::default() };
            let s = select_kmeans(&d, &c).unwrap();
            prop_assert_eq!(s.len(), c.size);
            prop_assert!(s.class_counts().iter().all(|&n| n == c.size / 3));
        }
    }
}
