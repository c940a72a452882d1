//! Semi-implicit BDF finite elements for incompressible Navier-Stokes with a
//! resistive penalty `(R / eps) delta (u - u_surface)` and SUPG-PSPG plus
//! grad-div stabilisation on equal-order velocity-pressure spaces.
//!
//! Monolithic unknowns: node-interleaved `[u_0 .. u_{d-1}, p]` per node.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::sparse::assemble_with;
use crate::fem::{
    solve, BoundaryTag, CsrMatrix, FeSpace, FeValues, Field, LocalContribution, Mesh, MetricTensors, QuadratureRule,
    SolveStats, SolverOptions, SparsityPattern,
};
use crate::geometry::{normal_and_curvature, side_sign, smeared_delta, ImmersedSurface, LevelSet};
use crate::linalg::{self, Vec3, ZERO3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FluidParams {
    /// [kg/m^3]
    pub density: f64,
    /// [kg/(m s)]
    pub viscosity: f64,
    /// Penalty resistance `R` [kg/(m s)].
    pub resistance: f64,
    /// Band half-thickness [m].
    pub epsilon: f64,
    /// Inverse-estimate constant; `30 r^2` when unset.
    pub inverse_estimate: Option<f64>,
    pub bdf_order: usize,
    /// Velocity-pressure polynomial degree.
    pub degree: usize,
    /// Zero tangential velocity on inflow/outflow boundaries.
    pub parallel_flow: bool,
}

impl Default for FluidParams {
    fn default() -> Self {
        Self {
            density: 1e3,
            viscosity: 3.5e-3,
            resistance: 1e4,
            epsilon: 1e-3,
            inverse_estimate: None,
            bdf_order: 1,
            degree: 1,
            parallel_flow: true,
        }
    }
}

impl FluidParams {
    pub fn inverse_estimate_constant(&self) -> f64 {
        self.inverse_estimate.unwrap_or(30.0 * (self.degree * self.degree) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("density", self.density),
            ("viscosity", self.viscosity),
            ("resistance", self.resistance),
            ("epsilon", self.epsilon),
            ("inverse_estimate", self.inverse_estimate_constant()),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("fluid.{name} = {v} must be positive")));
            }
        }
        bdf_coefficients(self.bdf_order)?;
        if !(1..=2).contains(&self.degree) {
            return Err(Error::Config(format!("fluid.degree = {} must be 1 or 2", self.degree)));
        }
        Ok(())
    }

    /// Band resolution rule: `eps >= 1.5 h` with `h` the largest cell edge.
    pub fn check_resolution(&self, mesh: &Mesh) -> Result<()> {
        let h = mesh.max_cell_size();
        if self.epsilon < 1.5 * h {
            return Err(Error::Config(format!(
                "band half-thickness eps = {:.6e} m is below 1.5 h = {:.6e} m (h = {:.6e} m); eps must be at least 1.5 times the mesh size",
                self.epsilon,
                1.5 * h,
                h
            )));
        }
        Ok(())
    }
}

/// `(alpha, history weights, extrapolation weights)`, newest level first.
#[derive(Debug, Clone, PartialEq)]
pub struct BdfCoefficients {
    pub alpha: f64,
    pub history: Vec<f64>,
    pub extrapolation: Vec<f64>,
}

pub fn bdf_coefficients(order: usize) -> Result<BdfCoefficients> {
    match order {
        1 => Ok(BdfCoefficients { alpha: 1.0, history: vec![1.0], extrapolation: vec![1.0] }),
        2 => Ok(BdfCoefficients { alpha: 1.5, history: vec![2.0, -0.5], extrapolation: vec![2.0, -1.0] }),
        _ => Err(Error::Config(format!("unsupported BDF order {order} (expected 1 or 2)"))),
    }
}

/// `(tau_M, tau_C)`.
pub fn stabilization_taus(
    u: Vec3,
    metric: &MetricTensors,
    delta: f64,
    params: &FluidParams,
    alpha: f64,
    dt: f64,
) -> (f64, f64) {
    let rho = params.density;
    let mu = params.viscosity;
    let penalty = params.resistance / params.epsilon * delta;
    let sum = rho * rho * alpha * alpha / (dt * dt)
        + rho * rho * metric.quadratic(u)
        + params.inverse_estimate_constant() * mu * mu * metric.g_contract()
        + penalty * penalty;
    let tau_m = 1.0 / sum.sqrt();
    (tau_m, 1.0 / (tau_m * metric.g_dot()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceVelocityMode {
    /// Rate of `c` times the normal component of the opening field.
    Model,
    /// Quasi-static: the surface moves but imposes no velocity.
    Zero,
    /// `-(phi^n - phi^{n-1}) / dt` along the normal.
    Phidiff,
}

impl std::str::FromStr for SurfaceVelocityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model" => Ok(Self::Model),
            "zero" => Ok(Self::Zero),
            "phidiff" => Ok(Self::Phidiff),
            other => {
                Err(Error::Config(format!("unknown surface velocity mode {other:?} (expected model, zero or phidiff)")))
            }
        }
    }
}

/// `((c^n - c^{n-1}) / dt) (g . n) n`.
pub fn compute_surface_velocity(c_new: f64, c_old: f64, dt: f64, normal: Vec3, opening: Vec3) -> Vec3 {
    let rate = (c_new - c_old) / dt;
    linalg::scale(normal, rate * linalg::dot(opening, normal))
}

/// Surface velocity source for one step.
#[derive(Clone, Copy)]
pub enum SurfaceVelocity<'a> {
    Zero,
    Model { c_new: f64, c_old: f64, dt: f64, surface: &'a ImmersedSurface },
    Phidiff { previous: &'a LevelSet, dt: f64 },
}

/// Data of one time step.
#[derive(Clone, Copy)]
pub struct StepInput<'a> {
    pub dt: f64,
    pub p_in: f64,
    pub p_out: f64,
    /// Current valve level set; `None` without a valve.
    pub level_set: Option<&'a LevelSet>,
    pub surface_velocity: SurfaceVelocity<'a>,
}

/// Current solution and the BDF history, newest first.
#[derive(Debug, Clone)]
pub struct FluidState {
    space: Arc<FeSpace>,
    history: Vec<Vec<f64>>,
    pub step: usize,
}

impl FluidState {
    /// Fluid at rest for all previous levels.
    pub fn at_rest(space: Arc<FeSpace>, order: usize) -> Self {
        let n = space.n_dofs();
        Self { space, history: vec![vec![0.0; n]; order], step: 0 }
    }

    pub fn from_history(space: Arc<FeSpace>, history: Vec<Vec<f64>>, step: usize) -> Result<Self> {
        if history.is_empty() || history.iter().any(|h| h.len() != space.n_dofs()) {
            return Err(Error::State("history vectors do not match the fluid space".into()));
        }
        Ok(Self { space, history, step })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    /// Newest solution coefficients.
    pub fn coefficients(&self) -> &[f64] {
        &self.history[0]
    }

    pub fn history(&self) -> &[Vec<f64>] {
        &self.history
    }

    pub fn field(&self) -> Field {
        Field::from_coeffs(self.space.clone(), self.history[0].clone()).expect("history matches the space")
    }

    fn push(&mut self, solution: Vec<f64>, depth: usize) {
        self.history.insert(0, solution);
        self.history.truncate(depth);
        self.step += 1;
    }
}

struct Scratch {
    plain: FeValues,
    band: FeValues,
    level: Option<FeValues>,
}

/// Assembles and solves fluid steps on a fixed mesh.
pub struct FluidSolver {
    params: FluidParams,
    space: Arc<FeSpace>,
    pattern: Arc<SparsityPattern>,
    constraints: Vec<(usize, f64)>,
    traction_facets: Vec<(usize, usize, BoundaryTag)>,
    pub solver: SolverOptions,
}

impl FluidSolver {
    pub fn new(mesh: Arc<Mesh>, params: FluidParams) -> Result<Self> {
        params.validate()?;
        let dim = mesh.dim();
        let space = Arc::new(FeSpace::new(mesh.clone(), params.degree, dim + 1)?);
        let pattern = Arc::new(SparsityPattern::for_space(&space));
        let nc = dim + 1;
        let mut fixed = vec![false; space.n_dofs()];
        for f in mesh.facets() {
            let comps: Vec<usize> = match f.tag {
                BoundaryTag::Wall => (0..dim).collect(),
                _ if params.parallel_flow => (0..dim).filter(|&c| c != f.axis()).collect(),
                _ => Vec::new(),
            };
            for node in space.facet_nodes(f) {
                for &c in &comps {
                    fixed[node * nc + c] = true;
                }
            }
        }
        let traction_facets: Vec<_> =
            mesh.facets().iter().filter(|f| f.tag != BoundaryTag::Wall).map(|f| (f.cell, f.face, f.tag)).collect();
        if traction_facets.is_empty() {
            fixed[dim] = true;
        }
        let constraints = fixed.iter().enumerate().filter(|(_, &f)| f).map(|(d, _)| (d, 0.0)).collect();
        Ok(Self { params, space, pattern, constraints, traction_facets, solver: SolverOptions::default() })
    }

    pub fn params(&self) -> &FluidParams {
        &self.params
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.space.mesh()
    }

    pub fn initial_state(&self) -> FluidState {
        FluidState::at_rest(self.space.clone(), self.params.bdf_order)
    }

    /// Constrained degrees of freedom (all with value zero).
    pub fn constraints(&self) -> &[(usize, f64)] {
        &self.constraints
    }

    /// Monolithic system of one step with constraints applied.
    pub fn assemble_step(&self, state: &FluidState, input: &StepInput) -> Result<(CsrMatrix, Vec<f64>)> {
        let bdf = bdf_coefficients(self.params.bdf_order)?;
        if state.history.len() < bdf.history.len() {
            return Err(Error::State(format!(
                "BDF{} needs {} previous levels, history holds {}",
                self.params.bdf_order,
                bdf.history.len(),
                state.history.len()
            )));
        }
        if !Arc::ptr_eq(&state.space, &self.space) {
            return Err(Error::State("fluid state belongs to a different space".into()));
        }
        if !(input.dt > 0.0 && input.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step {} must be positive", input.dt)));
        }
        if let (Some(ls), SurfaceVelocity::Phidiff { previous, .. }) = (input.level_set, input.surface_velocity) {
            if !Arc::ptr_eq(ls.space(), previous.space()) {
                return Err(Error::InvalidArgument("level sets of consecutive steps must share a space".into()));
            }
        }
        let mesh = self.mesh();
        let dim = mesh.dim();
        let band: Vec<bool> = match input.level_set {
            Some(ls) => {
                let mut b = vec![false; mesh.n_cells()];
                for c in ls.band_cells() {
                    b[c] = true;
                }
                b
            }
            None => vec![false; mesh.n_cells()],
        };
        let r = self.params.degree;
        let band_rule = QuadratureRule::gauss((r + 1).max(4), dim);
        let init = || Scratch {
            plain: FeValues::new(self.space.element(), QuadratureRule::gauss(r + 1, dim), r >= 2),
            band: FeValues::new(self.space.element(), band_rule.clone(), r >= 2),
            level: input.level_set.map(|ls| FeValues::new(ls.space().element(), band_rule.clone(), false)),
        };
        let (mut matrix, mut rhs) = assemble_with(&self.pattern, mesh.n_cells(), init, |scratch, cell| {
            self.local_step(scratch, cell, band[cell], state, input, &bdf)
        })?;
        self.add_traction(&mut rhs, input)?;
        matrix.apply_constraints(&mut rhs, &self.constraints);
        Ok((matrix, rhs))
    }

    fn local_step(
        &self,
        scratch: &mut Scratch,
        cell: usize,
        in_band: bool,
        state: &FluidState,
        input: &StepInput,
        bdf: &BdfCoefficients,
    ) -> Result<LocalContribution> {
        let mesh = self.mesh();
        let dim = mesh.dim();
        let nc = dim + 1;
        let p = &self.params;
        let rho = p.density;
        let mu = p.viscosity;
        let dt = input.dt;
        let nodes = self.space.cell_nodes(cell);
        let nn = nodes.len();
        let dofs: Vec<usize> = nodes.iter().flat_map(|&n| (0..nc).map(move |c| n * nc + c)).collect();
        let mut local = LocalContribution::new(dofs);
        let nd = nn * nc;
        // nodal history values
        let nodal = |level: usize, node: usize, comp: usize| state.history[level][node * nc + comp];
        let fv = if in_band { &mut scratch.band } else { &mut scratch.plain };
        fv.reinit(mesh, cell)?;
        let level_fv = match (in_band, scratch.level.as_mut()) {
            (true, Some(l)) => {
                l.reinit(mesh, cell)?;
                Some(&*l)
            }
            _ => None,
        };
        let mut lap = vec![0.0; nn];
        let mut conv = vec![0.0; nn];
        let mut lop = vec![0.0; nn];
        for q in 0..fv.n_points() {
            let s = fv.point(q);
            let jxw = fv.jxw(q);
            let mut w = ZERO3;
            let mut u_bdf = ZERO3;
            for (a, &node) in nodes.iter().enumerate() {
                for i in 0..dim {
                    for (k, (&ce, &ch)) in bdf.extrapolation.iter().zip(&bdf.history).enumerate() {
                        let v = nodal(k, node, i) * s.values[a];
                        w[i] += ce * v;
                        u_bdf[i] += ch * v;
                    }
                }
            }
            let (delta, u_surface) = match (level_fv, input.level_set) {
                (Some(lfv), Some(ls)) => self.band_point(cell, lfv, q, ls, input)?,
                _ => (0.0, ZERO3),
            };
            let metric = MetricTensors::from_inverse_jacobian(&s.inv_jac, dim);
            let (tau_m, tau_c) = stabilization_taus(w, &metric, delta, p, bdf.alpha, dt);
            let mass = rho * bdf.alpha / dt;
            let penalty = p.resistance / p.epsilon * delta;
            for a in 0..nn {
                lap[a] = if s.hessians.is_empty() { 0.0 } else { (0..dim).map(|i| s.hessians[a][i][i]).sum() };
                conv[a] = rho * linalg::dot(w, s.grads[a]);
                lop[a] = (mass + penalty) * s.values[a] - mu * lap[a] + conv[a];
            }
            // known part of the strong residual: rho u_bdf / dt + penalty u_surface
            let known = linalg::add(linalg::scale(u_bdf, rho / dt), linalg::scale(u_surface, penalty));
            let m = &mut local.matrix;
            for a in 0..nn {
                let (na, ga) = (s.values[a], s.grads[a]);
                let test_v = na + tau_m * conv[a];
                for i in 0..dim {
                    local.rhs[a * nc + i] += known[i] * test_v * jxw;
                }
                local.rhs[a * nc + dim] += tau_m * linalg::dot(known, ga) * jxw;
                for b in 0..nn {
                    let (nb, gb) = (s.values[b], s.grads[b]);
                    let gdot = linalg::dot(ga, gb);
                    let diag = (mass + penalty) * na * nb + conv[b] * na + mu * gdot + tau_m * lop[b] * conv[a];
                    for i in 0..dim {
                        let row = (a * nc + i) * nd;
                        for j in 0..dim {
                            let mut v = mu * gb[i] * ga[j] + tau_c * gb[j] * ga[i];
                            if i == j {
                                v += diag;
                            }
                            m[row + b * nc + j] += v * jxw;
                        }
                        // pressure column
                        m[row + b * nc + dim] += (-ga[i] * nb + tau_m * gb[i] * conv[a]) * jxw;
                    }
                    let prow = (a * nc + dim) * nd;
                    for j in 0..dim {
                        m[prow + b * nc + j] += (gb[j] * na + tau_m * lop[b] * ga[j]) * jxw;
                    }
                    m[prow + b * nc + dim] += tau_m * gdot * jxw;
                }
            }
        }
        if local.matrix.iter().chain(&local.rhs).any(|v| !v.is_finite()) {
            return Err(Error::Assembly { cell, message: "non-finite coefficient".into() });
        }
        Ok(local)
    }

    /// Delta and surface velocity at a band quadrature point.
    fn band_point(
        &self,
        cell: usize,
        lfv: &FeValues,
        q: usize,
        ls: &LevelSet,
        input: &StepInput,
    ) -> Result<(f64, Vec3)> {
        let s = lfv.point(q);
        let e = ls.field().combine(0, cell, s, false);
        let delta = smeared_delta(ls.delta_distance(cell, s, e.value), ls.epsilon());
        if delta == 0.0 {
            return Ok((0.0, ZERO3));
        }
        let normal = match normal_and_curvature(&e, self.mesh().dim()) {
            Ok((n, _)) => n,
            // the penalty still acts, towards a surface at rest
            Err(Error::DegenerateGradient { .. }) => return Ok((delta, ZERO3)),
            Err(err) => return Err(err),
        };
        let u = match input.surface_velocity {
            SurfaceVelocity::Zero => ZERO3,
            SurfaceVelocity::Model { c_new, c_old, dt, surface } => {
                if c_new == c_old {
                    ZERO3
                } else {
                    let x = self.mesh().map_point(cell, lfv.rule().points[q]);
                    let limit = ls.epsilon() + 2.0 * self.mesh().max_cell_size();
                    match surface.pullback(x, limit) {
                        Ok(pb) => compute_surface_velocity(c_new, c_old, dt, normal, pb.opening),
                        Err(Error::OutOfBand { .. }) => ZERO3,
                        Err(err) => return Err(err),
                    }
                }
            }
            SurfaceVelocity::Phidiff { previous, dt } => {
                let old = previous.field().combine(0, cell, s, false).value;
                linalg::scale(normal, -(e.value - old) / dt)
            }
        };
        Ok((delta, u))
    }

    /// `-int p_bc n . v` on inflow and outflow facets.
    fn add_traction(&self, rhs: &mut [f64], input: &StepInput) -> Result<()> {
        let mesh = self.mesh();
        let dim = mesh.dim();
        let nc = dim + 1;
        let n_face = self.params.degree + 1;
        for &(cell, face, tag) in &self.traction_facets {
            let p_bc = if tag == BoundaryTag::Inflow { input.p_in } else { input.p_out };
            if p_bc == 0.0 {
                continue;
            }
            let nodes = self.space.cell_nodes(cell);
            for fp in mesh.face_quadrature(cell, face, n_face) {
                let shape = self.space.element().shape(fp.xi);
                for (a, &node) in nodes.iter().enumerate() {
                    let na = shape.values[a];
                    if na == 0.0 {
                        continue;
                    }
                    for i in 0..dim {
                        rhs[node * nc + i] -= p_bc * fp.normal[i] * na * fp.weight;
                    }
                }
            }
        }
        Ok(())
    }

    /// Assemble, solve and rotate the history. The previous solution is the
    /// initial guess.
    pub fn advance(&self, state: &mut FluidState, input: &StepInput) -> Result<SolveStats> {
        let (a, b) = self.assemble_step(state, input)?;
        self.solve_assembled(state, &a, &b)
    }

    /// Second half of `advance`: solve a system from `assemble_step`.
    pub fn solve_assembled(&self, state: &mut FluidState, a: &CsrMatrix, b: &[f64]) -> Result<SolveStats> {
        let mut x = state.history[0].clone();
        for &(d, v) in &self.constraints {
            x[d] = v;
        }
        let stats = solve(a, b, &mut x, &self.solver)?;
        state.push(x, self.params.bdf_order);
        Ok(stats)
    }
}

/// Volume flux `int u . e_axis` through the plane `x[axis] = position` of a
/// structured mesh.
pub fn flux_through_plane(field: &Field, axis: usize, position: f64) -> Result<f64> {
    Ok(plane_integral(field, axis, axis, position)?.0)
}

/// Mean pressure over the plane `x[axis] = position` of a structured mesh.
pub fn mean_pressure_on_plane(field: &Field, axis: usize, position: f64) -> Result<f64> {
    let (integral, area) = plane_integral(field, field.space().dim(), axis, position)?;
    Ok(integral / area)
}

/// `int field[component]` over a mesh-spanning plane, and the plane area.
fn plane_integral(field: &Field, component: usize, axis: usize, position: f64) -> Result<(f64, f64)> {
    let space = field.space();
    let mesh = space.mesh();
    let dim = mesh.dim();
    let info = mesh.structured().ok_or_else(|| Error::Unsupported("plane integrals need a structured mesh".into()))?;
    let h = info.spacing[axis];
    let rel = (position - info.origin[axis]) / h;
    let n = info.counts[axis];
    if !(rel >= 0.0 && rel <= n as f64) {
        return Err(Error::InvalidArgument(format!("plane {position} outside the mesh along axis {axis}")));
    }
    let layer = (rel.floor() as usize).min(n - 1);
    let xi_axis = 2.0 * (rel - layer as f64) - 1.0;
    let rule = QuadratureRule::gauss(space.degree() + 1, dim - 1);
    let tangential: Vec<usize> = (0..dim).filter(|&a| a != axis).collect();
    let face_measure: f64 = tangential.iter().map(|&a| 0.5 * info.spacing[a]).product();
    let (mut total, mut area) = (0.0, 0.0);
    for cell in 0..mesh.n_cells() {
        let idx = structured_index(cell, &info.counts, dim);
        if idx[axis] != layer {
            continue;
        }
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let mut xi = ZERO3;
            xi[axis] = xi_axis;
            for (k, &a) in tangential.iter().enumerate() {
                xi[a] = p[k];
            }
            total += field.evaluate(component, cell, xi, false)?.value * w * face_measure;
            area += w * face_measure;
        }
    }
    Ok((total, area))
}

fn structured_index(cell: usize, counts: &[usize; 3], dim: usize) -> [usize; 3] {
    let mut idx = [0; 3];
    let mut rest = cell;
    for a in 0..dim {
        idx[a] = rest % counts[a];
        rest /= counts[a];
    }
    idx
}

/// Band-averaged pressure upstream (`phi < 0`) minus downstream.
pub fn pressure_jump(field: &Field, level_set: &LevelSet) -> Result<f64> {
    let space = field.space();
    let mesh = space.mesh();
    let dim = mesh.dim();
    let ls_space = level_set.space();
    let rule = QuadratureRule::gauss(ls_space.degree() + 2, dim);
    let mut fv = FeValues::new(ls_space.element(), rule, false);
    let (mut pm, mut wm, mut pp, mut wp) = (0.0, 0.0, 0.0, 0.0);
    for cell in level_set.band_cells() {
        fv.reinit(mesh, cell)?;
        for q in 0..fv.n_points() {
            let s = fv.point(q);
            let phi = level_set.field().combine(0, cell, s, false).value;
            let w = smeared_delta(level_set.delta_distance(cell, s, phi), level_set.epsilon()) * fv.jxw(q);
            if w == 0.0 {
                continue;
            }
            let p = field.evaluate(dim, cell, fv.rule().points[q], false)?.value;
            if side_sign(phi) > 0.0 {
                pp += p * w;
                wp += w;
            } else {
                pm += p * w;
                wm += w;
            }
        }
    }
    Ok(if wm > 0.0 && wp > 0.0 { pm / wm - pp / wp } else { 0.0 })
}

/// Delta-weighted mean of `|u - u_surface|` over the band, with a surface
/// at rest.
pub fn band_mean_speed(field: &Field, level_set: &LevelSet) -> Result<f64> {
    let space = field.space();
    let mesh = space.mesh();
    let dim = mesh.dim();
    let ls_space = level_set.space();
    let mut fv = FeValues::new(ls_space.element(), QuadratureRule::gauss(ls_space.degree() + 2, dim), false);
    let (mut num, mut den) = (0.0, 0.0);
    for cell in level_set.band_cells() {
        fv.reinit(mesh, cell)?;
        for q in 0..fv.n_points() {
            let s = fv.point(q);
            let phi = level_set.field().combine(0, cell, s, false).value;
            let w = smeared_delta(level_set.delta_distance(cell, s, phi), level_set.epsilon()) * fv.jxw(q);
            if w == 0.0 {
                continue;
            }
            let xi = fv.rule().points[q];
            let mut u = ZERO3;
            for (i, ui) in u.iter_mut().enumerate().take(dim) {
                *ui = field.evaluate(i, cell, xi, false)?.value;
            }
            num += linalg::norm(u) * w;
            den += w;
        }
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_structured_mesh, BoxTags};
    use proptest::prelude::*;

    #[test]
    fn bdf_tables() {
        assert_eq!(
            bdf_coefficients(1).unwrap(),
            BdfCoefficients { alpha: 1.0, history: vec![1.0], extrapolation: vec![1.0] }
        );
        let b2 = bdf_coefficients(2).unwrap();
        assert_eq!((b2.alpha, b2.history.clone(), b2.extrapolation.clone()), (1.5, vec![2.0, -0.5], vec![2.0, -1.0]));
        assert!(bdf_coefficients(3).is_err());
        // a constant history has zero discrete time derivative
        for order in [1, 2] {
            let b = bdf_coefficients(order).unwrap();
            assert_eq!(b.alpha - b.history.iter().sum::<f64>(), 0.0);
            assert_eq!(b.extrapolation.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn surface_velocity_examples() {
        let n = [0.0, 1.0, 0.0];
        assert_eq!(compute_surface_velocity(0.3, 0.3, 2e-4, n, n), ZERO3);
        let u = compute_surface_velocity(1e-3, 0.0, 2e-4, n, n);
        assert!((linalg::norm(u) - 5.0).abs() < 1e-12 && u[1] > 0.0);
    }

    fn metric_unit() -> MetricTensors {
        MetricTensors::from_inverse_jacobian(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], 2)
    }

    #[test]
    fn tau_examples() {
        let p = FluidParams { density: 1.0, viscosity: 1e-300, ..Default::default() };
        let (tm, _) = stabilization_taus(ZERO3, &metric_unit(), 0.0, &p, 1.0, 0.1);
        assert!((tm - 0.1).abs() < 1e-12);
        // penalty R/eps * delta = 1e6 dominates
        let p =
            FluidParams { density: 1e-300, viscosity: 1e-300, resistance: 1e3, epsilon: 1e-3, ..Default::default() };
        let (tm, _) = stabilization_taus(ZERO3, &metric_unit(), 1.0, &p, 1.0, 0.1);
        assert!((tm - 1e-6).abs() < 1e-18);
    }

    proptest! {
        #[test]
        fn tau_decreases_with_each_scale(
            u in 0.0f64..3.0, mu in 1e-4f64..1e-1, delta in 0.0f64..500.0, dt in 1e-5f64..1e-2,
            bump in 1.01f64..3.0,
        ) {
            let m = MetricTensors::from_inverse_jacobian(&[[2e3, 0.0, 0.0], [0.0, 1e3, 0.0], [0.0, 0.0, 1.0]], 2);
            let p = FluidParams { viscosity: mu, ..Default::default() };
            let base = stabilization_taus([u, 0.3 * u, 0.0], &m, delta, &p, 1.0, dt).0;
            let faster = stabilization_taus([u * bump + 0.1, 0.3 * u, 0.0], &m, delta, &p, 1.0, dt).0;
            let p2 = FluidParams { viscosity: mu * bump, ..Default::default() };
            let viscous = stabilization_taus([u, 0.3 * u, 0.0], &m, delta, &p2, 1.0, dt).0;
            let denser = stabilization_taus([u, 0.3 * u, 0.0], &m, delta * bump + 1.0, &p, 1.0, dt).0;
            let shorter = stabilization_taus([u, 0.3 * u, 0.0], &m, delta, &p, 1.0, dt / bump).0;
            prop_assert!(faster < base && viscous < base && denser < base && shorter < base);
        }
    }

    #[test]
    fn resolution_rule() {
        let mesh = build_structured_mesh(&[0.03, 0.01], &[60, 20], BoxTags::channel()).unwrap();
        assert!(FluidParams::default().check_resolution(&mesh).is_ok());
        let e = FluidParams { epsilon: 5e-4, ..Default::default() }.check_resolution(&mesh).unwrap_err();
        assert!(e.to_string().contains("1.5"), "{e}");
    }

    #[test]
    fn rest_stays_at_rest() {
        let mesh = Arc::new(build_structured_mesh(&[0.03, 0.01], &[12, 4], BoxTags::channel()).unwrap());
        let solver = FluidSolver::new(mesh, FluidParams { epsilon: 5e-3, ..Default::default() }).unwrap();
        let mut state = solver.initial_state();
        let input =
            StepInput { dt: 2e-4, p_in: 0.0, p_out: 0.0, level_set: None, surface_velocity: SurfaceVelocity::Zero };
        let (_, rhs) = solver.assemble_step(&state, &input).unwrap();
        assert!(rhs.iter().all(|&v| v == 0.0));
        solver.advance(&mut state, &input).unwrap();
        assert!(state.coefficients().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unfilled_history_is_a_state_error() {
        let mesh = Arc::new(build_structured_mesh(&[1.0, 1.0], &[2, 2], BoxTags::channel()).unwrap());
        let solver = FluidSolver::new(mesh, FluidParams { bdf_order: 2, epsilon: 1.0, ..Default::default() }).unwrap();
        let state = FluidState::at_rest(solver.space().clone(), 1);
        let input =
            StepInput { dt: 1e-3, p_in: 0.0, p_out: 0.0, level_set: None, surface_velocity: SurfaceVelocity::Zero };
        assert!(matches!(solver.assemble_step(&state, &input), Err(Error::State(_))));
    }
}
