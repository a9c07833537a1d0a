//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use gp_pto::{Objective, Point, Trajectory};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn se(a: &Point, b: &Point, ell: f64, sf2: f64) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    sf2 * (-(dx * dx + dy * dy) / (2.0 * ell * ell)).exp()
}

pub fn gram(a: &[Point], b: &[Point], ell: f64, sf2: f64) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| se(&a[i], &b[j], ell, sf2))
}

/// Textbook conditioning with an explicit LU inverse of the noisy Gram matrix.
pub struct DenseGp {
    pub ell: f64,
    pub sf2: f64,
    pub mean: f64,
    pub jitter: f64,
}

impl DenseGp {
    pub fn posterior(
        &self,
        query: &[Point],
        locs: &[Point],
        values: &[f64],
        noise: &[f64],
    ) -> (DVector<f64>, DMatrix<f64>) {
        let kss = gram(query, query, self.ell, self.sf2);
        let nq = query.len();
        if locs.is_empty() {
            return (DVector::from_element(nq, self.mean), kss);
        }
        let mut a = gram(locs, locs, self.ell, self.sf2);
        for i in 0..locs.len() {
            a[(i, i)] += noise[i] + self.jitter;
        }
        let inv = a.lu().try_inverse().expect("invertible gram");
        let ksx = gram(query, locs, self.ell, self.sf2);
        let resid = DVector::from_iterator(values.len(), values.iter().map(|v| v - self.mean));
        let mean = DVector::from_element(nq, self.mean) + &ksx * &inv * resid;
        let cov = kss - &ksx * &inv * ksx.transpose();
        (mean, cov)
    }

    pub fn trace(&self, query: &[Point], locs: &[Point], noise: &[f64]) -> f64 {
        let vals = vec![self.mean; locs.len()];
        self.posterior(query, locs, &vals, noise).1.trace()
    }
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += (a[i] - b[i]).powi(2);
    }
    (acc / a.len() as f64).sqrt()
}

/// Central differences of `objective.evaluate` in every state and control
/// coordinate. States are moved directly; the trajectory need not stay
/// dynamically consistent because J is a function of the knots.
pub fn central_differences(objective: &Objective<'_>, traj: &Trajectory, h: f64) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let j = |t: &Trajectory| objective.evaluate(t).unwrap().total;
    let mut ga = Vec::new();
    let mut gb = Vec::new();
    for k in 0..traj.states.len() {
        let n = traj.states[k].len();
        let mut g = DVector::zeros(n);
        for i in 0..n {
            let mut p = traj.clone();
            p.states[k][i] += h;
            let mut m = traj.clone();
            m.states[k][i] -= h;
            g[i] = (j(&p) - j(&m)) / (2.0 * h);
        }
        ga.push(g);
        let mdim = traj.controls[k].len();
        let mut g = DVector::zeros(mdim);
        for i in 0..mdim {
            let mut p = traj.clone();
            p.controls[k][i] += h;
            let mut m = traj.clone();
            m.controls[k][i] -= h;
            g[i] = (j(&p) - j(&m)) / (2.0 * h);
        }
        gb.push(g);
    }
    (ga, gb)
}

/// Largest componentwise gap relative to the largest reference component.
pub fn max_relative_error(got: &[DVector<f64>], reference: &[DVector<f64>]) -> f64 {
    let scale = reference.iter().map(|g| g.amax()).fold(0.0, f64::max).max(1e-12);
    got.iter()
        .zip(reference)
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max)
        / scale
}

/// The descent subproblem solved as one equality-constrained QP:
/// minimize Σ aᵀz + bᵀv + ½zᵀQz + ½vᵀRv subject to z₀ = 0 and
/// z_{t+1} = A_t z_t + B_t v_t.
pub fn kkt_descent(
    a_mats: &[DMatrix<f64>],
    b_mats: &[DMatrix<f64>],
    ga: &[DVector<f64>],
    gb: &[DVector<f64>],
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let len = a_mats.len();
    let n = q.nrows();
    let m = r.nrows();
    let nz = len * n;
    let nv = len * m;
    let nw = nz + nv;
    let nc = len * n; // z0 = 0 plus T transitions
    let mut kkt = DMatrix::zeros(nw + nc, nw + nc);
    let mut rhs = DVector::zeros(nw + nc);
    for t in 0..len {
        kkt.view_mut((t * n, t * n), (n, n)).copy_from(q);
        kkt.view_mut((nz + t * m, nz + t * m), (m, m)).copy_from(r);
        rhs.rows_mut(t * n, n).copy_from(&(-&ga[t]));
        rhs.rows_mut(nz + t * m, m).copy_from(&(-&gb[t]));
    }
    let mut c = DMatrix::zeros(nc, nw);
    c.view_mut((0, 0), (n, n)).fill_with_identity();
    for t in 0..len - 1 {
        let row = (t + 1) * n;
        c.view_mut((row, (t + 1) * n), (n, n)).fill_with_identity();
        c.view_mut((row, t * n), (n, n)).copy_from(&(-&a_mats[t]));
        c.view_mut((row, nz + t * m), (n, m)).copy_from(&(-&b_mats[t]));
    }
    kkt.view_mut((nw, 0), (nc, nw)).copy_from(&c);
    kkt.view_mut((0, nw), (nw, nc)).copy_from(&c.transpose());
    let sol = kkt.lu().solve(&rhs).expect("nonsingular KKT system");
    let z = (0..len).map(|t| sol.rows(t * n, n).into_owned()).collect();
    let v = (0..len).map(|t| sol.rows(nz + t * m, m).into_owned()).collect();
    (z, v)
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

pub fn random_vector<R: Rng>(len: usize, scale: f64, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-scale..scale))
}

/// Positive semi-definite; singular when `rank < n`.
pub fn random_psd<R: Rng>(n: usize, rank: usize, rng: &mut R) -> DMatrix<f64> {
    let l = random_matrix(n, rank, 1.0, rng);
    &l * l.transpose()
}

pub fn random_pd<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    random_psd(n, n, rng) + DMatrix::identity(n, n) * 0.1
}

pub fn random_point<R: Rng>(lo: f64, hi: f64, rng: &mut R) -> Point {
    Point::new(rng.random_range(lo..hi), rng.random_range(lo..hi))
}
