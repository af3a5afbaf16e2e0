use nalgebra::DVector;

/// Spherical k-means on unit-norm (or zero) vectors; returns `k` unit
/// centroids. Deterministic: seeded by farthest-point selection starting from
/// the first nonzero point, ties broken by index. Sign-insensitive, so `v`
/// and `-v` belong to the same cluster.
pub(crate) fn spherical_kmeans(points: &[DVector<f64>], k: usize, max_iter: usize) -> Vec<DVector<f64>> {
    let dim = points.first().map_or(0, |p| p.len());
    let nonzero: Vec<&DVector<f64>> = points.iter().filter(|p| p.norm() > 0.0).collect();
    let mut centroids: Vec<DVector<f64>> = Vec::with_capacity(k);
    if let Some(first) = nonzero.first() {
        centroids.push((*first).clone());
    }
    while centroids.len() < k {
        let far = nonzero
            .iter()
            .map(|p| {
                let sim = centroids.iter().map(|c| c.dot(p).abs()).fold(0.0, f64::max);
                (p, sim)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match far {
            Some((p, sim)) if sim < 1.0 - 1e-12 => centroids.push((*p).clone()),
            _ => {
                // Not enough distinct directions: pad with unused axes.
                let mut e = DVector::zeros(dim);
                e[centroids.len() % dim.max(1)] = 1.0;
                centroids.push(e);
            }
        }
    }
    for _ in 0..max_iter {
        let mut sums = vec![DVector::<f64>::zeros(dim); k];
        for p in &nonzero {
            let (j, s) = nearest(&centroids, p);
            sums[j] += *p * s.signum();
        }
        let mut moved = false;
        for (c, s) in centroids.iter_mut().zip(sums) {
            let n = s.norm();
            if n > 0.0 {
                let next = s / n;
                if (&next - &*c).amax() > 1e-12 {
                    moved = true;
                }
                *c = next;
            }
        }
        if !moved {
            break;
        }
    }
    centroids
}

fn nearest(centroids: &[DVector<f64>], p: &DVector<f64>) -> (usize, f64) {
    let mut best = (0, centroids[0].dot(p));
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let s = c.dot(p);
        if s.abs() > best.1.abs() {
            best = (j, s);
        }
    }
    best
}
