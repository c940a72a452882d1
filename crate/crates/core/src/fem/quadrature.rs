use crate::linalg::Vec3;

/// Tensor-product Gauss-Legendre rule on the reference cell `[-1, 1]^dim`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// ascending. Exact for polynomials up to degree `2n - 1`.
pub fn gauss_legendre_1d(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Legendre polynomial `P_n(z)` and its derivative.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

impl QuadratureRule {
    /// `n` points per axis in `dim` dimensions (`n^dim` points in total).
    pub fn gauss(n: usize, dim: usize) -> Self {
        let (x, w) = gauss_legendre_1d(n);
        let mut points = Vec::with_capacity(n.pow(dim as u32));
        let mut weights = Vec::with_capacity(points.capacity());
        match dim {
            1 => {
                for i in 0..n {
                    points.push([x[i], 0.0, 0.0]);
                    weights.push(w[i]);
                }
            }
            2 => {
                for j in 0..n {
                    for i in 0..n {
                        points.push([x[i], x[j], 0.0]);
                        weights.push(w[i] * w[j]);
                    }
                }
            }
            3 => {
                for k in 0..n {
                    for j in 0..n {
                        for i in 0..n {
                            points.push([x[i], x[j], x[k]]);
                            weights.push(w[i] * w[j] * w[k]);
                        }
                    }
                }
            }
            _ => panic!("unsupported dimension {dim}"),
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
