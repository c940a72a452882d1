use crate::linalg::{Mat3, Vec3, ZERO3, ZERO33};

/// One-dimensional Lagrange polynomials on equispaced nodes of `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Lagrange1d {
    pub nodes: Vec<f64>,
}

impl Lagrange1d {
    pub fn new(degree: usize) -> Self {
        assert!(degree >= 1);
        let nodes = (0..=degree).map(|i| -1.0 + 2.0 * i as f64 / degree as f64).collect();
        Self { nodes }
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Values, first and second derivatives of every basis polynomial at `x`.
    pub fn eval(&self, x: f64, val: &mut [f64], d1: &mut [f64], d2: &mut [f64]) {
        let n = self.nodes.len();
        for i in 0..n {
            let xi = self.nodes[i];
            let mut denom = 1.0;
            for j in 0..n {
                if j != i {
                    denom *= xi - self.nodes[j];
                }
            }
            // Product rule over the factors (x - x_j), j != i.
            let mut v = 1.0;
            let mut a = 0.0;
            let mut b = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let f = x - self.nodes[j];
                b = b * f + 2.0 * a;
                a = a * f + v;
                v *= f;
            }
            val[i] = v / denom;
            d1[i] = a / denom;
            d2[i] = b / denom;
        }
    }
}

/// Tensor-product Lagrange element `Q^k` on `[-1, 1]^dim`. Local node
/// `i + (k+1) j + (k+1)^2 l` sits at reference lattice point `(i, j, l)`.
#[derive(Debug, Clone)]
pub struct LagrangeElement {
    pub dim: usize,
    pub degree: usize,
    basis_1d: Lagrange1d,
}

/// Reference-cell values of all shape functions at one point.
#[derive(Debug, Clone)]
pub struct ReferenceShape {
    pub values: Vec<f64>,
    pub grads: Vec<Vec3>,
    pub hessians: Vec<Mat3>,
}

impl LagrangeElement {
    pub fn new(dim: usize, degree: usize) -> Self {
        assert!((1..=3).contains(&dim), "dimension must be 1..=3");
        Self { dim, degree, basis_1d: Lagrange1d::new(degree) }
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.degree + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    /// Lattice index of a local node.
    pub fn lattice(&self, local: usize) -> [usize; 3] {
        let m = self.nodes_per_axis();
        [local % m, (local / m) % m, local / (m * m)]
    }

    pub fn reference_node(&self, local: usize) -> Vec3 {
        let l = self.lattice(local);
        let mut x = ZERO3;
        for a in 0..self.dim {
            x[a] = self.basis_1d.nodes[l[a]];
        }
        x
    }

    pub fn shape(&self, xi: Vec3) -> ReferenceShape {
        let m = self.nodes_per_axis();
        let mut v = [[0.0; 8]; 3];
        let mut d1 = [[0.0; 8]; 3];
        let mut d2 = [[0.0; 8]; 3];
        assert!(m <= 8, "degree too high");
        for a in 0..self.dim {
            self.basis_1d.eval(xi[a], &mut v[a][..m], &mut d1[a][..m], &mut d2[a][..m]);
        }
        let n = self.n_nodes();
        let mut out = ReferenceShape { values: vec![0.0; n], grads: vec![ZERO3; n], hessians: vec![ZERO33; n] };
        for local in 0..n {
            let l = self.lattice(local);
            // f[a][order] = derivative of given order of the 1D factor along axis a
            let mut f = [[1.0; 3]; 3];
            for a in 0..self.dim {
                f[a] = [v[a][l[a]], d1[a][l[a]], d2[a][l[a]]];
            }
            let dim = self.dim;
            let prod = |orders: [usize; 3]| -> f64 {
                let mut p = 1.0;
                for a in 0..dim {
                    p *= f[a][orders[a]];
                }
                p
            };
            out.values[local] = prod([0, 0, 0]);
            for a in 0..dim {
                let mut o = [0; 3];
                o[a] = 1;
                out.grads[local][a] = prod(o);
                for b in 0..dim {
                    let mut o = [0; 3];
                    o[a] += 1;
                    o[b] += 1;
                    out.hessians[local][a][b] = prod(o);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_is_kronecker_at_nodes() {
        for k in 1..=4 {
            let b = Lagrange1d::new(k);
            let n = k + 1;
            let (mut v, mut d1, mut d2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            for (i, &x) in b.nodes.iter().enumerate() {
                b.eval(x, &mut v, &mut d1, &mut d2);
                for j in 0..n {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((v[j] - e).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = Lagrange1d::new(3);
        let n = 4;
        let h = 1e-5;
        let x = 0.123;
        let mut v = vec![0.0; n];
        let mut vp = vec![0.0; n];
        let mut vm = vec![0.0; n];
        let (mut d1, mut d2, mut t1, mut t2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        b.eval(x, &mut v, &mut d1, &mut d2);
        b.eval(x + h, &mut vp, &mut t1, &mut t2);
        b.eval(x - h, &mut vm, &mut t1, &mut t2);
        for i in 0..n {
            let fd1 = (vp[i] - vm[i]) / (2.0 * h);
            let fd2 = (vp[i] - 2.0 * v[i] + vm[i]) / (h * h);
            assert!((fd1 - d1[i]).abs() < 1e-8);
            assert!((fd2 - d2[i]).abs() < 1e-4);
        }
    }

    #[test]
    fn tensor_partition_of_unity() {
        for dim in 1..=3 {
            for k in 1..=3 {
                let e = LagrangeElement::new(dim, k);
                for xi in [[-0.3, 0.7, 0.1], [0.9, -0.95, 0.5], [0.0, 0.0, 0.0]] {
                    let s = e.shape(xi);
                    let sum: f64 = s.values.iter().sum();
                    assert!((sum - 1.0).abs() < 1e-12);
                    for a in 0..dim {
                        let g: f64 = s.grads.iter().map(|g| g[a]).sum();
                        assert!(g.abs() < 1e-12);
                    }
                }
            }
        }
    }
}
