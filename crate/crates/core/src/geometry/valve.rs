//! Idealised valve geometries with closed-form opening kinematics.
//!
//! Both generators move each leaflet by the linearised hinge rotation
//! `x(c) = hinge + ((1 - c) I + c R) (x_ref - hinge)`, so the opening field
//! is `g = (R - I)(x_ref - hinge)` and the surface is affine in `c`.

use serde::{Deserialize, Serialize};

use super::surface::ImmersedSurface;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, Vec3};

/// Two-leaflet valve in the channel `[0, length] x [0, height]`.
///
/// The closed valve is a circular arc of radius `height` through the hinges
/// `(valve_x, 0)` and `(valve_x, height)`, bulging downstream and split at
/// mid-height. Each half rotates about its hinge towards its wall by
/// `opening_angle` at `c = 1`. Normals point downstream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelValve {
    pub length: f64,
    pub height: f64,
    pub valve_x: f64,
    /// Rotation at full opening [rad].
    pub opening_angle: f64,
    pub segments_per_leaflet: usize,
    /// Orifice area at `c = 1` [m^2]; sets the out-of-plane depth.
    pub max_orifice_area: f64,
}

impl Default for ChannelValve {
    fn default() -> Self {
        Self {
            length: 0.03,
            height: 0.01,
            valve_x: 0.01,
            opening_angle: 40f64.to_radians(),
            segments_per_leaflet: 40,
            max_orifice_area: 3e-4,
        }
    }
}

/// Half-angle subtended by each leaflet at the arc centre.
const LEAFLET_ARC: f64 = std::f64::consts::PI / 6.0;

impl ChannelValve {
    fn arc_center(&self) -> Vec3 {
        let r = self.height;
        [self.valve_x - r * LEAFLET_ARC.cos(), 0.5 * self.height, 0.0]
    }

    /// Downstream bulge of the arc at mid-height.
    pub fn sag(&self) -> f64 {
        self.height * (1.0 - LEAFLET_ARC.cos())
    }

    /// Vertical gap between the leaflet tips at `c = 1`.
    pub fn full_gap(&self) -> f64 {
        let t = self.opening_angle;
        (1.0 - t.cos()) * self.height + 2.0 * self.sag() * t.sin()
    }

    /// Out-of-plane depth converting gap to orifice area.
    pub fn depth(&self) -> f64 {
        self.max_orifice_area / self.full_gap()
    }

    /// Gap is linear in `c` for the linearised rotation.
    pub fn orifice_area(&self, c: f64) -> f64 {
        self.max_orifice_area * c
    }

    /// Exact arc length of one reference leaflet.
    pub fn reference_leaflet_length(&self) -> f64 {
        self.height * LEAFLET_ARC
    }

    /// Length scale of the blended rotation: `|((1-c) I + c R) v| = s(c) |v|`.
    pub fn length_scale(&self, c: f64) -> f64 {
        (1.0 - 2.0 * (1.0 - self.opening_angle.cos()) * c * (1.0 - c)).sqrt()
    }

    fn validate(&self) -> Result<()> {
        let ok = self.length > 0.0
            && self.height > 0.0
            && self.valve_x > self.sag()
            && self.valve_x + self.sag() < self.length
            && self.opening_angle > 0.0
            && self.opening_angle < std::f64::consts::FRAC_PI_2
            && self.segments_per_leaflet >= 2
            && self.max_orifice_area > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid channel valve geometry {self:?}")))
        }
    }

    pub fn surface(&self) -> Result<ImmersedSurface> {
        self.validate()?;
        let n = self.segments_per_leaflet;
        let center = self.arc_center();
        let r = self.height;
        let on_arc = |a: f64| [center[0] + r * a.cos(), center[1] + r * a.sin(), 0.0];
        let mut vertices = Vec::with_capacity(2 * (n + 1));
        let mut opening = Vec::with_capacity(2 * (n + 1));
        let mut elements = Vec::with_capacity(2 * n);
        // (arc angle range, hinge, rotation sign): bottom turns clockwise
        let leaflets = [
            (-LEAFLET_ARC, 0.0, [self.valve_x, 0.0, 0.0], -1.0),
            (0.0, LEAFLET_ARC, [self.valve_x, self.height, 0.0], 1.0),
        ];
        for (a0, a1, hinge, sign) in leaflets {
            let rot = rotation_z(sign * self.opening_angle);
            let base = vertices.len();
            for i in 0..=n {
                let a = a0 + (a1 - a0) * i as f64 / n as f64;
                // hinges exactly on the walls
                let x = if (i == 0 && sign < 0.0) || (i == n && sign > 0.0) { hinge } else { on_arc(a) };
                let rel = linalg::sub(x, hinge);
                opening.push(linalg::sub(linalg::mat_vec(&rot, rel), rel));
                vertices.push(x);
            }
            for i in 0..n {
                elements.push([base + i, base + i + 1, 0]);
            }
        }
        ImmersedSurface::new(2, vertices, elements, opening)
    }

    /// Orifice area measured on a (moved) polyline: vertical clearance
    /// between the two leaflets times the depth.
    pub fn measured_orifice_area(&self, surface: &ImmersedSurface) -> f64 {
        let n = self.segments_per_leaflet + 1;
        let x = surface.current_vertices();
        let bottom = x[..n].iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        let top = x[n..].iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        (top - bottom).max(0.0) * self.depth()
    }
}

fn rotation_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Rotation by `a` about unit axis `k` (Rodrigues).
fn rotation_axis(k: Vec3, a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    let mut m = [[0.0; 3]; 3];
    let kx = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = if i == j { c } else { 0.0 } + s * kx[i][j] + (1.0 - c) * k[i] * k[j];
        }
    }
    m
}

/// Three-leaflet valve in the duct `[0, length] x [-width/2, width/2]^2`
/// with flow along `x`.
///
/// Leaflets are the three triangles between the annulus centre and the
/// vertices of the equilateral triangle inscribed in the annulus, domed
/// downstream by a bubble that vanishes on their edges. Each hinges on its
/// chord. A fixed plate (`g = 0`) closes the rest of the cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RootValve {
    pub length: f64,
    pub width: f64,
    pub valve_x: f64,
    pub annulus_radius: f64,
    /// Downstream dome height at the leaflet centroid [m].
    pub dome_height: f64,
    pub subdivisions: usize,
    pub max_orifice_area: f64,
}

impl Default for RootValve {
    fn default() -> Self {
        Self {
            length: 0.06,
            width: 0.036,
            valve_x: 0.02,
            annulus_radius: 0.016,
            dome_height: 0.0005,
            subdivisions: 8,
            max_orifice_area: 3e-4,
        }
    }
}

impl RootValve {
    fn corner(&self, k: usize) -> Vec3 {
        let a = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * k as f64 / 3.0;
        [self.valve_x, self.annulus_radius * a.cos(), self.annulus_radius * a.sin()]
    }

    pub fn triangle_area(&self) -> f64 {
        0.75 * 3f64.sqrt() * self.annulus_radius * self.annulus_radius
    }

    /// Hinge rotation at full opening, from `OA(1) = A (1 - cos theta)`.
    pub fn opening_angle(&self) -> Result<f64> {
        let cos = 1.0 - self.max_orifice_area / self.triangle_area();
        if !(-1.0..1.0).contains(&cos) {
            return Err(Error::Config(format!(
                "orifice area {} m^2 not reachable with annulus radius {} m",
                self.max_orifice_area, self.annulus_radius
            )));
        }
        Ok(cos.acos())
    }

    /// Projected opening; the dome integrates out because it vanishes on the
    /// leaflet edges.
    pub fn orifice_area(&self, c: f64) -> f64 {
        self.max_orifice_area * c
    }

    pub fn surface(&self) -> Result<ImmersedSurface> {
        if self.annulus_radius <= 0.0
            || self.width <= 2.0 * self.annulus_radius
            || self.subdivisions == 0
            || self.valve_x <= self.dome_height
            || self.valve_x + self.dome_height >= self.length
        {
            return Err(Error::Config(format!("invalid root valve geometry {self:?}")));
        }
        let theta = self.opening_angle()?;
        let n = self.subdivisions;
        let ex = [1.0, 0.0, 0.0];
        let center = [self.valve_x, 0.0, 0.0];
        let mut vertices = Vec::new();
        let mut opening = Vec::new();
        let mut elements = Vec::new();
        for k in 0..3 {
            let (p, q) = (self.corner(k), self.corner((k + 1) % 3));
            let chord = linalg::scale(linalg::add(p, q), 0.5);
            let m = linalg::normalized(linalg::sub(center, chord), 1e-300).unwrap();
            let rot = rotation_axis(linalg::cross(m, ex), theta);
            let base = vertices.len();
            // barycentric lattice over (centre, p, q)
            let mut index = std::collections::HashMap::new();
            for i in 0..=n {
                for j in 0..=n - i {
                    let l1 = i as f64 / n as f64;
                    let l2 = j as f64 / n as f64;
                    let l0 = 1.0 - l1 - l2;
                    let flat =
                        linalg::add(linalg::add(linalg::scale(center, l0), linalg::scale(p, l1)), linalg::scale(q, l2));
                    let x = linalg::axpy(flat, self.dome_height * 27.0 * l0 * l1 * l2, ex);
                    let rel = linalg::sub(x, p);
                    opening.push(linalg::sub(linalg::mat_vec(&rot, rel), rel));
                    index.insert((i, j), vertices.len());
                    vertices.push(x);
                }
            }
            let id = |i: usize, j: usize| index[&(i, j)];
            for i in 0..n {
                for j in 0..n - i {
                    elements.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                    if i + j + 1 < n {
                        elements.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
                    }
                }
            }
            orient(&vertices, &mut elements[..], base, ex);
        }
        // plate: radial strips between the inscribed triangle and the square
        let rays = 12 * n;
        let layers = n.max(2);
        let tri_point = |a: f64| -> Vec3 { star_boundary(a, |d| self.triangle_exit(d)) };
        let sq_point = |a: f64| -> Vec3 { star_boundary(a, |d| self.square_exit(d)) };
        let base = vertices.len();
        let start_elements = elements.len();
        for r in 0..rays {
            let a = 2.0 * std::f64::consts::PI * r as f64 / rays as f64;
            let (t, s) = (tri_point(a), sq_point(a));
            for l in 0..=layers {
                let w = l as f64 / layers as f64;
                let yz = linalg::add(linalg::scale(t, 1.0 - w), linalg::scale(s, w));
                vertices.push([self.valve_x, yz[1], yz[2]]);
                opening.push([0.0; 3]);
            }
        }
        let pid = |r: usize, l: usize| base + (r % rays) * (layers + 1) + l;
        for r in 0..rays {
            for l in 0..layers {
                elements.push([pid(r, l), pid(r + 1, l), pid(r + 1, l + 1)]);
                elements.push([pid(r, l), pid(r + 1, l + 1), pid(r, l + 1)]);
            }
        }
        orient(&vertices, &mut elements[start_elements..], base, ex);
        ImmersedSurface::new(3, vertices, elements, opening)
    }

    /// Distance along in-plane direction `d` from the axis to the triangle.
    fn triangle_exit(&self, d: [f64; 2]) -> f64 {
        let mut best = f64::INFINITY;
        for k in 0..3 {
            let (p, q) = (self.corner(k), self.corner((k + 1) % 3));
            let (p, q) = ([p[1], p[2]], [q[1], q[2]]);
            // solve t d = p + s (q - p)
            let e = [q[0] - p[0], q[1] - p[1]];
            let det = d[0] * (-e[1]) - d[1] * (-e[0]);
            if det.abs() < 1e-300 {
                continue;
            }
            let t = (p[0] * (-e[1]) - p[1] * (-e[0])) / det;
            let s = (d[0] * p[1] - d[1] * p[0]) / det;
            if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) {
                best = best.min(t);
            }
        }
        best
    }

    fn square_exit(&self, d: [f64; 2]) -> f64 {
        let h = 0.5 * self.width;
        let tx = if d[0].abs() > 1e-300 { h / d[0].abs() } else { f64::INFINITY };
        let ty = if d[1].abs() > 1e-300 { h / d[1].abs() } else { f64::INFINITY };
        tx.min(ty)
    }

    /// Projected area of the open region inside the annulus triangle,
    /// measured on the triangulated leaflets. Areas are signed by the
    /// downstream normal so folded projections cancel.
    pub fn measured_orifice_area(&self, surface: &ImmersedSurface) -> f64 {
        let x = surface.current_vertices();
        let covered: f64 = surface
            .elements()
            .iter()
            .filter(|el| el.iter().any(|&v| surface.opening()[v] != [0.0; 3]))
            .map(|el| {
                let (a, b, c) = (x[el[0]], x[el[1]], x[el[2]]);
                0.5 * ((b[1] - a[1]) * (c[2] - a[2]) - (c[1] - a[1]) * (b[2] - a[2]))
            })
            .sum();
        self.triangle_area() - covered
    }
}

fn star_boundary(a: f64, exit: impl Fn([f64; 2]) -> f64) -> Vec3 {
    let d = [a.cos(), a.sin()];
    let t = exit(d);
    [0.0, t * d[0], t * d[1]]
}

/// Flip triangles so that their normals have a positive `dir` component.
fn orient(vertices: &[Vec3], elements: &mut [[usize; 3]], _base: usize, dir: Vec3) {
    for el in elements.iter_mut() {
        let n =
            linalg::cross(linalg::sub(vertices[el[1]], vertices[el[0]]), linalg::sub(vertices[el[2]], vertices[el[0]]));
        if linalg::dot(n, dir) < 0.0 {
            el.swap(1, 2);
        }
    }
}
