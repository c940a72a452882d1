//! TOML run configuration. Every section and key is optional; an empty file
//! is the 2D channel scenario with the reference physical parameters.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::waveform::{builtin_waveforms, read_waveform_csv, Waveform};
use crate::error::{Error, Result};
use crate::fem::mesh_io::read_mesh;
use crate::fem::{build_structured_mesh, build_structured_mesh_at, BoxTags, Mesh, SolverOptions};
use crate::fluid::{FluidParams, SurfaceVelocityMode};
use crate::geometry::surface_io::read_surface;
use crate::geometry::{ChannelValve, ImmersedSurface, RootValve};
use crate::valve::{ForceModel, ValveParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryKind {
    /// 2D channel with a two-leaflet valve.
    #[default]
    Channel,
    /// 3D duct with a three-leaflet valve.
    Root,
    /// Fluid mesh and surface read from files.
    Imported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ImportedGeometry {
    /// Mesh in the `mesh_io` format.
    pub mesh: PathBuf,
    /// Surface in the `surface_io` format.
    pub surface: PathBuf,
    /// Orifice area at `c = 1`, taken as linear in `c` [m^2].
    pub max_orifice_area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    pub channel: ChannelValve,
    pub root: RootValve,
    pub imported: ImportedGeometry,
    /// Cells per axis of the structured mesh; `[60, 20]` for the channel,
    /// `[24, 14, 14]` for the root.
    pub cells: Option<Vec<usize>>,
}

/// Valve parameters; the surface density defaults to `2 eps rho`, the mass
/// of the fluid in the band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValveConfig {
    pub surface_density: Option<f64>,
    pub damping: f64,
    pub elasticity: f64,
    pub force_model: ForceModel,
    pub force_scale: f64,
}

impl Default for ValveConfig {
    fn default() -> Self {
        let p = ValveParams::default();
        Self {
            surface_density: None,
            damping: p.damping,
            elasticity: p.elasticity,
            force_model: p.force_model,
            force_scale: p.force_scale,
        }
    }
}

impl ValveConfig {
    pub fn params(&self, fluid: &FluidParams) -> ValveParams {
        ValveParams {
            surface_density: self.surface_density.unwrap_or(2.0 * fluid.epsilon * fluid.density),
            damping: self.damping,
            elasticity: self.elasticity,
            force_model: self.force_model,
            force_scale: self.force_scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeConfig {
    /// [s]
    pub dt: f64,
    /// Final time [s].
    pub end: f64,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { dt: 2e-4, end: 0.4 }
    }
}

impl TimeConfig {
    /// Steps needed to reach `end`, the last one possibly overshooting by
    /// rounding only.
    pub fn n_steps(&self) -> usize {
        (self.end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct WaveformConfig {
    /// `t,p_in,p_out` table in seconds and pascal; the builtin surrogate
    /// when unset. Relative paths resolve against the config file.
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceCurvature {
    /// Curvature of the reference level set carried with the closest
    /// element.
    #[default]
    Extended,
    /// Per-vertex values interpolated on the current surface.
    Vertex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingConfig {
    pub surface_velocity: SurfaceVelocityMode,
    pub reference_curvature: ReferenceCurvature,
    pub c_min: f64,
    pub c_max: f64,
    /// Initial opening coefficient.
    pub c: f64,
    /// Initial opening rate [1/s].
    pub cdot: f64,
    pub level_set_degree: usize,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            surface_velocity: SurfaceVelocityMode::Model,
            reference_curvature: ReferenceCurvature::Extended,
            c_min: 0.0,
            c_max: 1.0,
            c: 0.0,
            cdot: 0.0,
            level_set_degree: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Field snapshot every this many steps; 0 disables snapshots.
    pub snapshot_every: usize,
    /// Checkpoint every this many steps; 0 disables checkpoints.
    pub checkpoint_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: PathBuf::from("output"), snapshot_every: 0, checkpoint_every: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// Streamwise position of the flux plane [m]; the valve hinge plane
    /// when unset.
    pub flux_plane: Option<f64>,
    /// Upstream and downstream planes of the transvalvular pressure
    /// difference [m]; halfway between the valve and each end when unset.
    pub pressure_planes: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub geometry: GeometryConfig,
    pub fluid: FluidParams,
    pub valve: ValveConfig,
    pub time: TimeConfig,
    pub waveform: WaveformConfig,
    pub coupling: CouplingConfig,
    pub output: OutputConfig,
    pub probes: ProbeConfig,
    pub solver: SolverOptions,
}

/// Read, resolve input paths against the file's directory and validate.
/// The output directory stays relative to the working directory.
pub fn parse_config(path: &Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = parse_config_str(&text, path)?;
    config.resolve_paths(path.parent().unwrap_or(Path::new("")));
    config.validate()?;
    Ok(config)
}

/// Parse without path resolution or validation; `path` labels errors.
pub fn parse_config_str(text: &str, path: &Path) -> Result<SimulationConfig> {
    toml::from_str(text).map_err(|e: toml::de::Error| Error::Parse {
        path: path.to_path_buf(),
        line: e.span().map_or(0, |s| text[..s.start].matches('\n').count() + 1),
        message: e.message().to_string(),
    })
}

impl SimulationConfig {
    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        if let Some(csv) = self.waveform.csv.as_mut() {
            join(csv);
        }
        join(&mut self.geometry.imported.mesh);
        join(&mut self.geometry.imported.surface);
    }

    pub fn valve_params(&self) -> ValveParams {
        self.valve.params(&self.fluid)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.time;
        if !(t.dt > 0.0 && t.dt.is_finite()) {
            return Err(Error::Config(format!("time step dt = {} must be positive", t.dt)));
        }
        if !(t.end >= t.dt && t.end.is_finite()) {
            return Err(Error::Config(format!("final time {} must be at least dt = {}", t.end, t.dt)));
        }
        self.fluid.validate()?;
        self.valve_params().validate()?;
        let c = &self.coupling;
        if !(0.0 <= c.c_min && c.c_min <= c.c_max && c.c_max <= 1.0) {
            return Err(Error::Config(format!(
                "stops must satisfy 0 <= c_min <= c_max <= 1, got [{}, {}]",
                c.c_min, c.c_max
            )));
        }
        if !(c.c_min..=c.c_max).contains(&c.c) || !c.cdot.is_finite() {
            return Err(Error::Config(format!("initial state c = {}, cdot = {} outside the stops", c.c, c.cdot)));
        }
        if c.level_set_degree < 2 {
            return Err(Error::Config(format!(
                "level set degree {} must be at least 2 for curvature",
                c.level_set_degree
            )));
        }
        let s = &self.solver;
        if !(s.tolerance > 0.0) || s.max_iterations == 0 || s.restart == 0 {
            return Err(Error::Config(format!("invalid solver options {s:?}")));
        }
        if let Some(path) = &self.waveform.csv {
            require_file(path, "waveform")?;
        }
        if self.geometry.kind == GeometryKind::Imported {
            require_file(&self.geometry.imported.mesh, "mesh")?;
            require_file(&self.geometry.imported.surface, "surface")?;
            if !(self.geometry.imported.max_orifice_area > 0.0) {
                return Err(Error::Config("imported geometry needs a positive max_orifice_area".into()));
            }
        }
        let mesh = self.build_mesh()?;
        self.fluid.check_resolution(&mesh)?;
        self.build_surface()?;
        let (p_in, p_out) = self.waveforms()?;
        for (name, w) in [("p_in", &p_in), ("p_out", &p_out)] {
            if !w.covers(0.0, t.end) {
                return Err(Error::Config(format!(
                    "waveform {name} covers [{}, {}] s, not [0, {}] s",
                    w.times()[0],
                    w.times().last().unwrap(),
                    t.end
                )));
            }
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        let g = &self.geometry;
        let cells = |default: &[usize]| -> Result<Vec<usize>> {
            let cells = g.cells.clone().unwrap_or_else(|| default.to_vec());
            if cells.len() != default.len() || cells.contains(&0) {
                return Err(Error::Config(format!(
                    "geometry.cells needs {} positive counts, got {cells:?}",
                    default.len()
                )));
            }
            Ok(cells)
        };
        match g.kind {
            GeometryKind::Channel => {
                let v = &g.channel;
                build_structured_mesh(&[v.length, v.height], &cells(&[60, 20])?, BoxTags::channel())
            }
            GeometryKind::Root => {
                let v = &g.root;
                let half = 0.5 * v.width;
                build_structured_mesh_at(
                    [0.0, -half, -half],
                    &[v.length, v.width, v.width],
                    &cells(&[24, 14, 14])?,
                    BoxTags::channel(),
                )
            }
            GeometryKind::Imported => read_mesh(&g.imported.mesh),
        }
    }

    /// Reference (closed) surface.
    pub fn build_surface(&self) -> Result<ImmersedSurface> {
        let g = &self.geometry;
        match g.kind {
            GeometryKind::Channel => g.channel.surface(),
            GeometryKind::Root => g.root.surface(),
            GeometryKind::Imported => read_surface(&g.imported.surface),
        }
    }

    /// Analytic orifice area at opening `c` [m^2].
    pub fn orifice_area(&self, c: f64) -> f64 {
        let g = &self.geometry;
        match g.kind {
            GeometryKind::Channel => g.channel.orifice_area(c),
            GeometryKind::Root => g.root.orifice_area(c),
            GeometryKind::Imported => g.imported.max_orifice_area * c,
        }
    }

    /// Streamwise position of the flux probe.
    pub fn flux_plane(&self) -> f64 {
        self.probes.flux_plane.unwrap_or(match self.geometry.kind {
            GeometryKind::Channel => self.geometry.channel.valve_x,
            GeometryKind::Root => self.geometry.root.valve_x,
            GeometryKind::Imported => 0.0,
        })
    }

    /// Streamwise positions of the upstream and downstream pressure probes.
    pub fn pressure_planes(&self) -> Result<[f64; 2]> {
        let halfway = |valve_x: f64, length: f64| [0.5 * valve_x, 0.5 * (valve_x + length)];
        match (self.probes.pressure_planes, self.geometry.kind) {
            (Some(planes), _) => Ok(planes),
            (None, GeometryKind::Channel) => Ok(halfway(self.geometry.channel.valve_x, self.geometry.channel.length)),
            (None, GeometryKind::Root) => Ok(halfway(self.geometry.root.valve_x, self.geometry.root.length)),
            (None, GeometryKind::Imported) => {
                Err(Error::Config("probes.pressure_planes must be set for an imported geometry".into()))
            }
        }
    }

    pub fn waveforms(&self) -> Result<(Waveform, Waveform)> {
        match &self.waveform.csv {
            Some(path) => read_waveform_csv(path),
            None => Ok(builtin_waveforms()),
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} file {} does not exist", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SimulationConfig> {
        let c = parse_config_str(text, Path::new("run.toml"))?;
        c.validate()?;
        Ok(c)
    }

    #[test]
    fn empty_file_gives_reference_parameters() {
        let c = parse("").unwrap();
        assert_eq!(c, SimulationConfig::default());
        assert_eq!((c.time.dt, c.time.end), (2e-4, 0.4));
        assert_eq!(c.time.n_steps(), 2000);
        let f = c.fluid;
        assert_eq!((f.density, f.viscosity, f.resistance, f.epsilon), (1e3, 3.5e-3, 1e4, 1e-3));
        let v = c.valve_params();
        assert_eq!((v.damping, v.elasticity, v.surface_density), (2.0, 0.2, 2.0));
    }

    #[test]
    fn band_equal_to_mesh_size_is_rejected() {
        // 60 cells over 0.03 m: h = 5e-4
        let e = parse("[fluid]\nepsilon = 5e-4\n").unwrap_err();
        let msg = e.to_string();
        assert!(e.is_config_error());
        assert!(msg.contains("5.000000e-4") && msg.contains("7.500000e-4") && msg.contains("1.5"), "{msg}");
    }

    #[test]
    fn zero_time_step_is_rejected() {
        let e = parse("[time]\ndt = 0.0\n").unwrap_err();
        assert!(e.to_string().contains("dt"), "{e}");
    }

    #[test]
    fn unknown_keys_fail_with_their_line() {
        let e = parse("[fluid]\ndensity = 1000.0\nviscousity = 1.0\n").unwrap_err();
        match e {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("viscousity"), "{message}");
            }
            other => panic!("{other}"),
        }
        assert!(parse("[nonsense]\n").is_err());
    }

    #[test]
    fn missing_waveform_file_is_rejected() {
        let e = parse("[waveform]\ncsv = \"/nonexistent/w.csv\"\n").unwrap_err();
        assert!(e.to_string().contains("/nonexistent/w.csv"), "{e}");
    }

    #[test]
    fn flags_parse() {
        let c = parse(
            "[coupling]\nsurface_velocity = \"zero\"\nreference_curvature = \"vertex\"\n[valve]\nforce_model = \"pressure-only\"\nforce_scale = 0.5\n",
        )
        .unwrap();
        assert_eq!(c.coupling.surface_velocity, SurfaceVelocityMode::Zero);
        assert_eq!(c.coupling.reference_curvature, ReferenceCurvature::Vertex);
        assert_eq!(c.valve.force_model, ForceModel::PressureOnly);
        assert_eq!(c.valve.force_scale, 0.5);
    }

    #[test]
    fn stops_and_initial_state_are_checked() {
        assert!(parse("[coupling]\nc_max = 1.5\n").is_err());
        assert!(parse("[coupling]\nc = 0.5\nc_max = 0.2\n").is_err());
        assert!(parse("[coupling]\nlevel_set_degree = 1\n").is_err());
    }

    #[test]
    fn final_time_must_cover_one_step() {
        assert!(parse("[time]\ndt = 0.01\nend = 0.005\n").is_err());
        assert_eq!(parse("[time]\ndt = 0.01\nend = 0.01\n").unwrap().time.n_steps(), 1);
        assert_eq!(parse("[time]\ndt = 1e-4\nend = 0.03\n").unwrap().time.n_steps(), 300);
    }
}
