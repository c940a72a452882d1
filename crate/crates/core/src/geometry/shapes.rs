//! Simple analytic surfaces used as oracles and test fixtures.

use std::collections::HashMap;

use super::surface::ImmersedSurface;
use crate::error::Result;
use crate::linalg::{self, Vec3};

/// Counter-clockwise polygon approximating a circle in the `z = center_z`
/// plane; normals point outward. Every vertex gets the opening vector `g`.
pub fn circle(center: Vec3, radius: f64, segments: usize, g: Vec3) -> Result<ImmersedSurface> {
    let v: Vec<Vec3> = (0..segments)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / segments as f64;
            [center[0] + radius * a.cos(), center[1] + radius * a.sin(), center[2]]
        })
        .collect();
    let e = (0..segments).map(|i| [i, (i + 1) % segments, 0]).collect();
    ImmersedSurface::new(2, v, e, vec![g; segments])
}

/// Straight polyline from `a` to `b` in 2D; normal is the tangent rotated
/// clockwise.
pub fn segment(a: Vec3, b: Vec3, segments: usize, g: Vec3) -> Result<ImmersedSurface> {
    let v: Vec<Vec3> = (0..=segments)
        .map(|i| {
            let t = i as f64 / segments as f64;
            linalg::add(linalg::scale(a, 1.0 - t), linalg::scale(b, t))
        })
        .collect();
    let e = (0..segments).map(|i| [i, i + 1, 0]).collect();
    ImmersedSurface::new(2, v, e, vec![g; segments + 1])
}

/// Square of side `size` in the plane `z = center_z`, normal `+z`.
pub fn square_patch(center: Vec3, size: f64, n: usize, g: Vec3) -> Result<ImmersedSurface> {
    rectangle_patch(center, [size, size], [n, n], g)
}

pub fn rectangle_patch(center: Vec3, size: [f64; 2], n: [usize; 2], g: Vec3) -> Result<ImmersedSurface> {
    let mut v = Vec::new();
    for j in 0..=n[1] {
        for i in 0..=n[0] {
            v.push([
                center[0] + size[0] * (i as f64 / n[0] as f64 - 0.5),
                center[1] + size[1] * (j as f64 / n[1] as f64 - 0.5),
                center[2],
            ]);
        }
    }
    let id = |i: usize, j: usize| i + (n[0] + 1) * j;
    let mut e = Vec::new();
    for j in 0..n[1] {
        for i in 0..n[0] {
            e.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            e.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let nv = v.len();
    ImmersedSurface::new(3, v, e, vec![g; nv])
}

/// Subdivided icosahedron projected onto a sphere, outward normals.
pub fn icosphere(center: Vec3, radius: f64, subdivisions: usize) -> Result<ImmersedSurface> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vec3> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let mut f: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for x in v.iter_mut() {
        *x = linalg::scale(*x, 1.0 / linalg::norm(*x));
    }
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut nf = Vec::with_capacity(f.len() * 4);
        let mut midpoint = |a: usize, b: usize, v: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                let m = linalg::scale(linalg::add(v[a], v[b]), 0.5);
                v.push(linalg::scale(m, 1.0 / linalg::norm(m)));
                v.len() - 1
            })
        };
        for tri in &f {
            let a = midpoint(tri[0], tri[1], &mut v);
            let b = midpoint(tri[1], tri[2], &mut v);
            let c = midpoint(tri[2], tri[0], &mut v);
            nf.push([tri[0], a, c]);
            nf.push([tri[1], b, a]);
            nf.push([tri[2], c, b]);
            nf.push([a, b, c]);
        }
        f = nf;
    }
    let v: Vec<Vec3> = v.iter().map(|x| linalg::axpy(center, radius, *x)).collect();
    let n = v.len();
    ImmersedSurface::new(3, v, f, vec![[0.0; 3]; n])
}

/// Randomly perturbed height-field sheet over `[-1, 1]^2`, for exhaustive
/// closest-point comparisons.
pub fn bumpy_sheet(seed: u64, n: usize) -> Result<ImmersedSurface> {
    // small deterministic LCG keeps this free of a runtime RNG dependency
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    let mut s = rectangle_patch([0.0; 3], [2.0, 2.0], [n, n], [0.0; 3])?;
    let v: Vec<Vec3> =
        s.reference_vertices().iter().map(|x| [x[0] + 0.05 * next(), x[1] + 0.05 * next(), 0.4 * next()]).collect();
    let e = s.elements().to_vec();
    let nv = v.len();
    s = ImmersedSurface::new(3, v, e, vec![[0.0; 3]; nv])?;
    Ok(s)
}

/// Patch of the sphere around the `+x` pole, on a gnomonic grid of
/// `n x n` cells spanning `[-half_angle, half_angle]` in both directions.
/// Outward normals.
pub fn sphere_cap(center: Vec3, radius: f64, half_angle: f64, n: usize) -> Result<ImmersedSurface> {
    let mut v = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let u = half_angle * (2.0 * i as f64 / n as f64 - 1.0);
            let w = half_angle * (2.0 * j as f64 / n as f64 - 1.0);
            let d = [1.0, u.tan(), w.tan()];
            v.push(linalg::axpy(center, radius / linalg::norm(d), d));
        }
    }
    let id = |i: usize, j: usize| i + (n + 1) * j;
    let mut e = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            e.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            e.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let nv = v.len();
    ImmersedSurface::new(3, v, e, vec![[0.0; 3]; nv])
}
