//! Wolfe's minimum-norm-point method for the distance from a target to a
//! convex set known only through a linear-maximization oracle.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::Result;

#[derive(Clone, Debug)]
pub(crate) struct Vertex<T> {
    pub point: Vec<f64>,
    pub payload: T,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct MnpOptions {
    /// Stop once the residual norm is below this.
    pub eps_zero: f64,
    /// Stop once upper and lower distance bounds are this close.
    pub eps_gap: f64,
    pub max_iter: usize,
    /// Stop as soon as the lower bound exceeds this.
    pub stop_above: Option<f64>,
    /// Stop as soon as the upper bound is at most this.
    pub stop_below: Option<f64>,
}

impl MnpOptions {
    pub fn new(eps_zero: f64, eps_gap: f64) -> Self {
        MnpOptions { eps_zero, eps_gap, max_iter: 400, stop_above: None, stop_below: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum MnpStop {
    Zero,
    Gap,
    Repeat,
    Above,
    Below,
    IterationCap,
}

#[derive(Clone, Debug)]
pub(crate) struct MnpResult<T> {
    /// Convex combination of the corral closest to the target.
    pub nearest: Vec<f64>,
    /// `|nearest - target|`, an upper bound on the distance.
    pub upper: f64,
    /// Certified lower bound on the distance.
    pub lower: f64,
    /// Unit outward normal `(target - nearest) / |target - nearest|`.
    pub normal: Option<Vec<f64>>,
    pub corral: Vec<(f64, Vertex<T>)>,
    pub stop: MnpStop,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Affine combination of `zs` of minimum norm.
fn affine_minimizer(zs: &[Vec<f64>]) -> Vec<f64> {
    let k = zs.len();
    if k == 1 {
        return vec![1.0];
    }
    let n = zs[0].len();
    let d = DMatrix::from_fn(n, k - 1, |r, c| zs[c + 1][r] - zs[0][r]);
    let rhs = DVector::from_iterator(n, zs[0].iter().map(|x| -x));
    let svd = d.svd(true, true);
    let smax = svd.singular_values.max();
    let beta = svd.solve(&rhs, 1e-13 * smax.max(f64::MIN_POSITIVE)).unwrap_or_else(|_| DVector::zeros(k - 1));
    let mut alpha = Vec::with_capacity(k);
    alpha.push(1.0 - beta.sum());
    alpha.extend(beta.iter());
    alpha
}

fn combine(zs: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; zs[0].len()];
    for (z, &wi) in zs.iter().zip(w) {
        for (xi, zi) in x.iter_mut().zip(z) {
            *xi += wi * zi;
        }
    }
    x
}

/// Wolfe's minor cycle: moves `w` towards the affine minimizer, dropping
/// points whose weight reaches zero.
fn minor_cycle<T>(zs: &mut Vec<Vec<f64>>, verts: &mut Vec<Vertex<T>>, w: &mut Vec<f64>) {
    loop {
        let alpha = affine_minimizer(zs);
        if alpha.iter().all(|&a| a > 1e-15) {
            *w = alpha;
            return;
        }
        let mut theta = 1.0f64;
        for (a, l) in alpha.iter().zip(w.iter()) {
            if *a <= 1e-15 {
                let d = l - a;
                if d > 0.0 {
                    theta = theta.min(l / d);
                }
            }
        }
        for (l, a) in w.iter_mut().zip(&alpha) {
            *l = (1.0 - theta) * *l + theta * a;
        }
        // always drop at least the smallest weight
        let imin = (0..w.len()).min_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap()).unwrap();
        let mut keep: Vec<bool> = w.iter().map(|&l| l > 1e-15).collect();
        keep[imin] = false;
        if keep.iter().all(|k| !k) {
            let imax = (0..w.len()).max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap()).unwrap();
            keep[imax] = true;
        }
        let mut idx = 0;
        zs.retain(|_| {
            idx += 1;
            keep[idx - 1]
        });
        idx = 0;
        verts.retain(|_| {
            idx += 1;
            keep[idx - 1]
        });
        idx = 0;
        w.retain(|_| {
            idx += 1;
            keep[idx - 1]
        });
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|l| *l /= s);
        if zs.len() == 1 {
            w[0] = 1.0;
            return;
        }
    }
}

/// Removes the component of `u` lying in the span of the corral differences.
fn clean_normal(u: &[f64], zs: &[Vec<f64>]) -> Vec<f64> {
    if zs.len() < 2 {
        return u.to_vec();
    }
    let n = u.len();
    let d = DMatrix::from_fn(n, zs.len() - 1, |r, c| zs[c + 1][r] - zs[0][r]);
    let svd = d.svd(true, false);
    let uu = svd.u.unwrap();
    let smax = svd.singular_values.max();
    let mut out = DVector::from_column_slice(u);
    for (j, s) in svd.singular_values.iter().enumerate() {
        if *s > 1e-10 * smax {
            let col = uu.column(j);
            let c = col.dot(&out);
            out -= col * c;
        }
    }
    let nn = out.norm();
    if nn < 0.5 || !nn.is_finite() {
        return u.to_vec();
    }
    out.iter().map(|x| x / nn).collect()
}

/// Nearest point to `target` in the convex hull of the oracle's vertices.
///
/// `oracle(d)` returns a vertex maximizing `<d, y>` together with a bound on
/// its suboptimality.
pub(crate) fn min_norm_point<T: Clone>(
    target: &[f64],
    seeds: Vec<Vertex<T>>,
    mut oracle: impl FnMut(&[f64]) -> Result<(Vertex<T>, f64)>,
    opts: MnpOptions,
) -> Result<MnpResult<T>> {
    let dim = target.len();
    let mut verts: Vec<Vertex<T>> = Vec::new();
    for s in seeds {
        if !verts.iter().any(|v| v.point == s.point) {
            verts.push(s);
        }
    }
    if verts.is_empty() {
        let mut d = vec![0.0; dim];
        d[0] = 1.0;
        verts.push(oracle(&d)?.0);
    }
    let shift = |p: &[f64]| -> Vec<f64> { p.iter().zip(target).map(|(a, b)| a - b).collect() };
    let mut zs: Vec<Vec<f64>> = verts.iter().map(|v| shift(&v.point)).collect();
    let scale = zs.iter().map(|z| norm(z)).fold(1e-300f64, f64::max);
    let mut w = vec![1.0 / zs.len() as f64; zs.len()];
    minor_cycle(&mut zs, &mut verts, &mut w);
    let mut x = combine(&zs, &w);
    let mut lower = 0.0f64;
    let mut stop = MnpStop::IterationCap;
    for _ in 0..opts.max_iter {
        let upper = norm(&x);
        if upper <= opts.eps_zero {
            stop = MnpStop::Zero;
            break;
        }
        if opts.stop_below.is_some_and(|t| upper <= t) {
            stop = MnpStop::Below;
            break;
        }
        let u: Vec<f64> = x.iter().map(|v| v / upper).collect();
        let d: Vec<f64> = u.iter().map(|v| -v).collect();
        let (v, err) = oracle(&d)?;
        let z = shift(&v.point);
        let uz = dot(&u, &z);
        lower = lower.max(uz - err);
        if opts.stop_above.is_some_and(|t| lower > t) {
            stop = MnpStop::Above;
            break;
        }
        if upper - uz <= opts.eps_gap {
            stop = MnpStop::Gap;
            break;
        }
        if zs.iter().any(|c| c.iter().zip(&z).all(|(a, b)| (a - b).abs() <= 1e-14 * scale)) {
            stop = MnpStop::Repeat;
            break;
        }
        zs.push(z);
        verts.push(v);
        w.push(0.0);
        minor_cycle(&mut zs, &mut verts, &mut w);
        x = combine(&zs, &w);
    }
    let upper = norm(&x);
    let lower = lower.min(upper);
    let normal = (upper > 0.0).then(|| {
        let u: Vec<f64> = x.iter().map(|v| -v / upper).collect();
        clean_normal(&u, &zs)
    });
    let nearest = x.iter().zip(target).map(|(a, b)| a + b).collect();
    Ok(MnpResult { nearest, upper, lower, normal, corral: w.into_iter().zip(verts).collect(), stop })
}

/// Reduces a convex combination to at most `dim + 1` affinely independent
/// points with the same weighted sum; returns the new weights.
pub(crate) fn caratheodory_prune(points: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut w = weights.to_vec();
    let dim = points.first().map_or(0, |p| p.len());
    let scale = points.iter().map(|p| norm(p)).fold(1.0f64, f64::max);
    loop {
        let act: Vec<usize> = (0..w.len()).filter(|&i| w[i] > 0.0).collect();
        let k = act.len();
        if k <= 1 {
            return w;
        }
        let m = DMatrix::from_fn(dim + 1, k, |r, c| if r < dim { points[act[c]][r] / scale } else { 1.0 });
        let eig = SymmetricEigen::new(m.transpose() * &m);
        let (imin, &emin) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        if k <= dim + 1 && emin > 1e-20 * k as f64 {
            return w;
        }
        let mut c: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
        if !c.iter().any(|&x| x > 0.0) {
            c.iter_mut().for_each(|x| *x = -*x);
        }
        let (mut theta, mut jmin) = (f64::INFINITY, 0);
        for (j, &cj) in c.iter().enumerate() {
            if cj > 0.0 && w[act[j]] / cj < theta {
                theta = w[act[j]] / cj;
                jmin = j;
            }
        }
        for (j, &cj) in c.iter().enumerate() {
            w[act[j]] = (w[act[j]] - theta * cj).max(0.0);
        }
        w[act[jmin]] = 0.0;
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_oracle(d: &[f64]) -> Result<(Vertex<usize>, f64)> {
        let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let (i, c) = corners
            .iter()
            .enumerate()
            .max_by(|a, b| dot(a.1, d).partial_cmp(&dot(b.1, d)).unwrap().then(b.0.cmp(&a.0)))
            .unwrap();
        Ok((Vertex { point: c.to_vec(), payload: i }, 0.0))
    }

    #[test]
    fn distance_to_square() {
        let r = min_norm_point(&[2.0, 0.5], vec![], square_oracle, MnpOptions::new(1e-12, 1e-12)).unwrap();
        assert!((r.upper - 1.0).abs() < 1e-12);
        assert!((r.lower - 1.0).abs() < 1e-12);
        let n = r.normal.unwrap();
        assert!((n[0] - 1.0).abs() < 1e-12 && n[1].abs() < 1e-12);
        let inside = min_norm_point(&[0.3, 0.6], vec![], square_oracle, MnpOptions::new(1e-12, 1e-14)).unwrap();
        assert!(inside.upper <= 1e-12);
        let w: Vec<f64> = inside.corral.iter().map(|c| c.0).collect();
        let pts: Vec<Vec<f64>> = inside.corral.iter().map(|c| c.1.point.clone()).collect();
        let pw = caratheodory_prune(&pts, &w);
        assert!(pw.iter().filter(|x| **x > 0.0).count() <= 3);
        let p = combine(&pts, &pw);
        assert!((p[0] - 0.3).abs() < 1e-12 && (p[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn early_exits() {
        let mut o = MnpOptions::new(1e-12, 1e-12);
        o.stop_above = Some(0.5);
        let r = min_norm_point(&[3.0, 3.0], vec![], square_oracle, o).unwrap();
        assert_eq!(r.stop, MnpStop::Above);
        let mut o = MnpOptions::new(1e-12, 1e-12);
        o.stop_below = Some(0.5);
        let r = min_norm_point(&[1.2, 0.5], vec![], square_oracle, o).unwrap();
        assert!(r.upper <= 0.5);
    }

    #[test]
    fn prune_square_combination() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![0.5, 0.5]];
        let w = vec![0.2; 5];
        let pw = caratheodory_prune(&pts, &w);
        assert!(pw.iter().filter(|x| **x > 0.0).count() <= 3);
        let p = combine(&pts, &pw);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        assert!((pw.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
