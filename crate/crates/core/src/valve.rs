//! Lumped valve model: one opening coefficient `c` driven by volume
//! integrals over the smeared surface band.
//!
//! `c'' = rhs - beta c'` with `rhs = (F_fluid + F_elastic) / denom` frozen
//! over one step.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{FeSpace, FeValues, Field, QuadratureRule, ShapeEval};
use crate::geometry::{normal_and_curvature, side_sign, smeared_delta, ImmersedSurface, LevelSet};
use crate::linalg::{self, Mat3, Vec3, ZERO33};

/// Below this `|denom|` [kg] the opening field is treated as orthogonal to
/// the surface.
pub const DENOM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForceModel {
    /// `F = int sigma n.n (delta+ - delta-)`.
    FullStress,
    /// `F = int p (delta- - delta+)`; equals the full model for a fluid at
    /// rest.
    PressureOnly,
}

impl std::str::FromStr for ForceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" | "full-stress" => Ok(Self::FullStress),
            "pressure" | "pressure-only" => Ok(Self::PressureOnly),
            other => Err(Error::Config(format!("unknown force model {other:?} (expected full or pressure)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValveParams {
    /// Surface density [kg/m^2].
    pub surface_density: f64,
    /// Damping `beta` [1/s].
    pub damping: f64,
    /// Elasticity `gamma` [N/m].
    pub elasticity: f64,
    pub force_model: ForceModel,
    /// Dimensionless multiplier on `F_fluid`.
    pub force_scale: f64,
}

impl Default for ValveParams {
    fn default() -> Self {
        Self {
            surface_density: 2.0,
            damping: 2.0,
            elasticity: 0.2,
            force_model: ForceModel::FullStress,
            force_scale: 1.0,
        }
    }
}

impl ValveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.surface_density > 0.0 && self.surface_density.is_finite()) {
            return Err(Error::Config(format!("surface density {} must be positive", self.surface_density)));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return Err(Error::Config(format!("damping {} must be non-negative", self.damping)));
        }
        if !(self.elasticity >= 0.0 && self.elasticity.is_finite()) {
            return Err(Error::Config(format!("elasticity {} must be non-negative", self.elasticity)));
        }
        if !self.force_scale.is_finite() {
            return Err(Error::Config("force scale must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ValveState {
    pub c: f64,
    pub cdot: f64,
    pub step: usize,
}

/// The three band integrals and the resulting acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ValveRhsBreakdown {
    /// [N] (per unit depth in 2D).
    pub f_fluid: f64,
    pub f_elastic: f64,
    /// [kg] (per unit depth in 2D).
    pub denom: f64,
    /// [1/s^2]
    pub rhs: f64,
    /// Quadrature points with a nonzero delta that could not be used
    /// (degenerate gradient or pullback outside the band).
    pub skipped_points: usize,
}

/// Pressure and velocity gradient of a flow at a point.
pub trait FlowSampler: Sync {
    /// `grad_u[i][j] = d u_i / d x_j`.
    fn sample(&self, cell: usize, xi: Vec3, x: Vec3) -> Result<(f64, Mat3)>;
}

fn check_flow_space(space: &FeSpace) -> Result<()> {
    let dim = space.dim();
    if space.components() != dim + 1 {
        return Err(Error::InvalidArgument(format!(
            "flow field has {} components, expected {}",
            space.components(),
            dim + 1
        )));
    }
    Ok(())
}

fn sample_shapes(field: &Field, cell: usize, s: &ShapeEval) -> (f64, Mat3) {
    let dim = field.space().dim();
    let mut grad = ZERO33;
    for (i, row) in grad.iter_mut().enumerate().take(dim) {
        *row = field.combine(i, cell, s, false).gradient;
    }
    (field.combine(dim, cell, s, false).value, grad)
}

/// Monolithic velocity-pressure field, pressure as the last component.
impl FlowSampler for Field {
    fn sample(&self, cell: usize, xi: Vec3, _x: Vec3) -> Result<(f64, Mat3)> {
        check_flow_space(self.space())?;
        let s = self.space().shape_at(cell, xi, false)?;
        Ok(sample_shapes(self, cell, &s))
    }
}

/// Flow-independent data of one band quadrature point.
#[derive(Debug, Clone, Copy)]
struct BandPoint {
    cell: usize,
    xi: Vec3,
    x: Vec3,
    /// `delta * JxW`.
    weight: f64,
    side: f64,
    normal: Vec3,
}

#[derive(Default, Clone, Copy)]
struct FlowPartial {
    f_fluid: f64,
    /// `sum p w`, `sum w` and `sum side w` for the mean-pressure shift.
    pressure_moment: f64,
    weight: f64,
    side_weight: f64,
}

#[derive(Default)]
struct CellGeometry {
    points: Vec<BandPoint>,
    /// `sum (H - H_ref) w` over the points entering the elastic term.
    curvature_deficit: f64,
    /// `sum (g . n) w`.
    projection: f64,
    skipped: usize,
}

/// The geometric half of the band integrals for one surface position:
/// quadrature points with their delta weights and normals, the curvature
/// deficit and the projected opening field. Only the force integral needs
/// the flow, so one `BandQuadrature` serves every step the surface rests.
#[derive(Debug, Clone)]
pub struct BandQuadrature {
    points: Vec<BandPoint>,
    /// Per band cell, the end of its points in `points`.
    cell_ends: Vec<usize>,
    curvature_deficit: f64,
    projection: f64,
    skipped: usize,
    /// Flow-space shape data per point, filled by the first
    /// [`BandQuadrature::integrate_field`].
    flow_shapes: OnceLock<(Arc<FeSpace>, Vec<ShapeEval>)>,
}

impl BandQuadrature {
    /// With `reference` set, the reference curvature at a point is the
    /// extended curvature of the reference level set at the point carried
    /// back with its closest element, so the elastic term vanishes
    /// identically at `c = 0`. Otherwise it is the barycentric transfer of
    /// per-vertex values. Points projecting onto the free boundary, and
    /// cells where the delta uses the unsigned distance, are left out of the
    /// elastic integral.
    pub fn new(level_set: &LevelSet, surface: &ImmersedSurface, reference: Option<&LevelSet>) -> Result<Self> {
        if let Some(r) = reference {
            if !std::sync::Arc::ptr_eq(r.space(), level_set.space()) {
                return Err(Error::InvalidArgument("reference level set must share the level-set space".into()));
            }
        }
        let space = level_set.space();
        let mesh = space.mesh();
        let dim = mesh.dim();
        let epsilon = level_set.epsilon();
        let band_limit = epsilon + 2.0 * mesh.max_cell_size();
        let rule = QuadratureRule::gauss(space.degree() + 3, dim);
        let cells: Vec<CellGeometry> = level_set
            .band_cells()
            .par_iter()
            .map_init(
                || FeValues::new(space.element(), rule.clone(), true),
                |fv, &cell| -> Result<CellGeometry> {
                    fv.reinit(mesh, cell)?;
                    let mut acc = CellGeometry::default();
                    for q in 0..fv.n_points() {
                        let s = fv.point(q);
                        let e = level_set.field().combine(0, cell, s, true);
                        let delta = smeared_delta(level_set.delta_distance(cell, s, e.value), epsilon);
                        if delta == 0.0 {
                            continue;
                        }
                        let (normal, curvature) = match normal_and_curvature(&e, dim) {
                            Ok(nc) => nc,
                            Err(Error::DegenerateGradient { .. }) => {
                                acc.skipped += 1;
                                continue;
                            }
                            Err(err) => return Err(err),
                        };
                        let xi = fv.rule().points[q];
                        let x = mesh.map_point(cell, xi);
                        let pull = match surface.pullback(x, band_limit) {
                            Ok(p) => p,
                            Err(Error::OutOfBand { .. }) => {
                                acc.skipped += 1;
                                continue;
                            }
                            Err(err) => return Err(err),
                        };
                        let w = delta * fv.jxw(q);
                        // The extension beyond a free edge carries the curvature
                        // of the distance to the edge, not of the surface.
                        if !(pull.on_boundary || level_set.uses_unsigned_delta(cell)) {
                            let reference_curvature = match reference {
                                None => pull.curvature,
                                Some(r) if pull.reference_point == x => {
                                    match normal_and_curvature(&r.field().combine(0, cell, s, true), dim) {
                                        Ok((_, h)) => h,
                                        Err(_) => pull.curvature,
                                    }
                                }
                                Some(r) => match mesh.locate(pull.reference_point) {
                                    Some((rc, rxi)) => {
                                        r.extended_normal_curvature(rc, rxi).map_or(pull.curvature, |v| v.1)
                                    }
                                    None => pull.curvature,
                                },
                            };
                            acc.curvature_deficit += (curvature - reference_curvature) * w;
                        }
                        acc.projection += linalg::dot(pull.opening, normal) * w;
                        acc.points.push(BandPoint { cell, xi, x, weight: w, side: side_sign(e.value), normal });
                    }
                    Ok(acc)
                },
            )
            .collect::<Result<_>>()?;
        let mut band = Self {
            points: Vec::with_capacity(cells.iter().map(|c| c.points.len()).sum()),
            cell_ends: Vec::with_capacity(cells.len()),
            curvature_deficit: 0.0,
            projection: 0.0,
            skipped: 0,
            flow_shapes: OnceLock::new(),
        };
        for c in cells {
            band.points.extend(c.points);
            band.cell_ends.push(band.points.len());
            band.curvature_deficit += c.curvature_deficit;
            band.projection += c.projection;
            band.skipped += c.skipped;
        }
        Ok(band)
    }

    /// Number of quadrature points with a nonzero delta weight.
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Band integrals for `flow`. Pure: identical inputs give
    /// bitwise-identical output regardless of thread count.
    ///
    /// Pressure enters relative to its delta-weighted band mean, so a
    /// uniform pressure exerts no force.
    pub fn integrate(&self, flow: &dyn FlowSampler, viscosity: f64, params: &ValveParams) -> Result<ValveRhsBreakdown> {
        self.integrate_with(|_, pt| flow.sample(pt.cell, pt.xi, pt.x), viscosity, params)
    }

    /// Same result as [`BandQuadrature::integrate`] for a field, bit for
    /// bit; the shape data of the field's space is evaluated once and
    /// reused while the space stays the same.
    pub fn integrate_field(&self, flow: &Field, viscosity: f64, params: &ValveParams) -> Result<ValveRhsBreakdown> {
        self.prepare_flow(flow.space())?;
        match self.flow_shapes.get() {
            Some((cached, shapes)) if Arc::ptr_eq(cached, flow.space()) => {
                self.integrate_with(|i, pt| Ok(sample_shapes(flow, pt.cell, &shapes[i])), viscosity, params)
            }
            _ => self.integrate(flow, viscosity, params),
        }
    }

    /// Evaluate the shape data of a flow space at the points, once; a
    /// later call with another space leaves the first one cached.
    pub fn prepare_flow(&self, space: &Arc<FeSpace>) -> Result<()> {
        check_flow_space(space)?;
        if self.flow_shapes.get().is_none() {
            let shapes =
                self.points.par_iter().map(|pt| space.shape_at(pt.cell, pt.xi, false)).collect::<Result<Vec<_>>>()?;
            // a concurrent fill computed the same data
            let _ = self.flow_shapes.set((Arc::clone(space), shapes));
        }
        Ok(())
    }

    fn integrate_with(
        &self,
        sample: impl Fn(usize, &BandPoint) -> Result<(f64, Mat3)> + Sync,
        viscosity: f64,
        params: &ValveParams,
    ) -> Result<ValveRhsBreakdown> {
        let partials: Vec<FlowPartial> = (0..self.cell_ends.len())
            .into_par_iter()
            .map(|k| -> Result<FlowPartial> {
                let begin = if k == 0 { 0 } else { self.cell_ends[k - 1] };
                let mut acc = FlowPartial::default();
                for (i, pt) in self.points[begin..self.cell_ends[k]].iter().enumerate() {
                    let (p, grad_u) = sample(begin + i, pt)?;
                    let w = pt.weight;
                    acc.pressure_moment += p * w;
                    acc.weight += w;
                    acc.side_weight += pt.side * w;
                    acc.f_fluid += match params.force_model {
                        ForceModel::PressureOnly => -pt.side * p * w,
                        ForceModel::FullStress => {
                            let n = pt.normal;
                            let snn = 2.0 * viscosity * linalg::dot(n, linalg::mat_vec(&grad_u, n)) - p;
                            pt.side * snn * w
                        }
                    };
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let mut total = FlowPartial::default();
        for p in &partials {
            total.f_fluid += p.f_fluid;
            total.pressure_moment += p.pressure_moment;
            total.weight += p.weight;
            total.side_weight += p.side_weight;
        }
        // Measuring the pressure from its band mean: identical to the plain
        // integral when the two one-sided weights balance, and it removes the
        // spurious force of a uniform pressure where they do not (wall-clipped
        // band at the hinges, caps at free edges).
        if total.weight > 0.0 {
            total.f_fluid += total.pressure_moment / total.weight * total.side_weight;
        }
        let denom = params.surface_density * self.projection;
        if !(denom.abs() >= DENOM_TOLERANCE) {
            return Err(Error::DegenerateProjection { denom });
        }
        let f_fluid = params.force_scale * total.f_fluid;
        let f_elastic = -params.elasticity * self.curvature_deficit;
        let breakdown = ValveRhsBreakdown {
            f_fluid,
            f_elastic,
            denom,
            rhs: (f_fluid + f_elastic) / denom,
            skipped_points: self.skipped,
        };
        if ![breakdown.f_fluid, breakdown.f_elastic, breakdown.rhs].iter().all(|v| v.is_finite()) {
            return Err(Error::State(format!("non-finite valve integrals {breakdown:?}")));
        }
        Ok(breakdown)
    }
}

/// Band integrals from one (lagged) time level; see [`BandQuadrature`].
pub fn assemble_valve_rhs(
    flow: &dyn FlowSampler,
    viscosity: f64,
    level_set: &LevelSet,
    surface: &ImmersedSurface,
    reference: Option<&LevelSet>,
    params: &ValveParams,
) -> Result<ValveRhsBreakdown> {
    BandQuadrature::new(level_set, surface, reference)?.integrate(flow, viscosity, params)
}

/// One classical RK4 step of `c' = v, v' = rhs - beta v` with `rhs` held
/// fixed and the damping evaluated per stage.
pub fn rk4_advance(state: ValveState, rhs: f64, beta: f64, dt: f64) -> Result<ValveState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
    }
    let f = |v: f64| (v, rhs - beta * v);
    let (c0, v0) = (state.c, state.cdot);
    let k1 = f(v0);
    let k2 = f(v0 + 0.5 * dt * k1.1);
    let k3 = f(v0 + 0.5 * dt * k2.1);
    let k4 = f(v0 + dt * k3.1);
    Ok(ValveState {
        c: c0 + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        cdot: v0 + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        step: state.step + 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stop {
    Closed,
    Open,
}

impl Stop {
    pub fn describe(self) -> &'static str {
        match self {
            Self::Closed => "hit closed stop",
            Self::Open => "hit open stop",
        }
    }
}

/// Clamp to `[c_min, c_max]`; the velocity component pushing into a stop
/// is removed.
pub fn clamp_and_report(state: ValveState, c_min: f64, c_max: f64) -> (ValveState, Option<Stop>) {
    let mut s = state;
    if s.c < c_min {
        s.c = c_min;
        s.cdot = s.cdot.max(0.0);
        (s, Some(Stop::Closed))
    } else if s.c > c_max {
        s.c = c_max;
        s.cdot = s.cdot.min(0.0);
        (s, Some(Stop::Open))
    } else {
        (s, None)
    }
}
