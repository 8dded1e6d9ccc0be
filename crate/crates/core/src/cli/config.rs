//! Experiment configuration: TOML or JSON, every field defaulted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qm::VOrdering;
use crate::warp::WarpConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    QmDeform,
    QftMoyal,
    OscVsSpectral,
    BoundFit,
    SymbolFit,
    FullDossier,
}

impl Study {
    pub const ALL: [Study; 6] =
        [Study::QmDeform, Study::QftMoyal, Study::OscVsSpectral, Study::BoundFit, Study::SymbolFit, Study::FullDossier];

    pub fn name(self) -> &'static str {
        match self {
            Study::QmDeform => "qm-deform",
            Study::QftMoyal => "qft-moyal",
            Study::OscVsSpectral => "osc-vs-spectral",
            Study::BoundFit => "bound-fit",
            Study::SymbolFit => "symbol-fit",
            Study::FullDossier => "full-dossier",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Study::QmDeform => {
                "closed-form deformed Hamiltonian: H_B = (1/2m) P_B.P_B, symmetry, spectrum and relative bound"
            }
            Study::QftMoyal => {
                "deformed Fock-space coordinates: commutator residuals, dense oracle, spectra and X-bound"
            }
            Study::OscVsSpectral => {
                "oscillatory quadrature against the exact fiberwise evaluator, plus Rieffel products"
            }
            Study::BoundFit => "relative bounds of V against H0 for each exponent, with a = 1 offsets",
            Study::SymbolFit => "phase-function check, symbol-order fits of conjugated operators, a = 1 inequalities",
            Study::FullDossier => "every study above, plus one evidence record per operator",
        }
    }

    pub fn parse(name: &str) -> Option<Study> {
        Study::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl std::fmt::Display for Study {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Position grid for the quantum-mechanical studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Spatial dimension. Default 3.
    pub dims: usize,
    /// Nodes per axis, even. Default 32.
    pub points_per_axis: usize,
    /// The grid covers [−L, L). Default 12.
    pub half_width: f64,
    /// Particle mass. Default 1/2, so H₀ = P².
    pub mass: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { dims: 3, points_per_axis: 32, half_width: 12.0, mass: 0.5 }
    }
}

/// Deformation of the quantum-mechanical studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeformationConfig {
    /// Axial vector of the skew matrix in three dimensions. Default (0, 0, 0.1).
    #[serde(alias = "B")]
    pub b: [f64; 3],
    /// Exponents of Q = X/|X|ⁿ. Default [−1, 0, 0.5, 1, 2].
    pub n: Vec<f64>,
    pub ordering: VOrdering,
    /// Size of the Hermite basis for the restricted spectrum. Default 60.
    pub spectrum_basis: usize,
}

impl Default for DeformationConfig {
    fn default() -> Self {
        Self {
            b: [0.0, 0.0, 0.1],
            n: vec![-1.0, 0.0, 0.5, 1.0, 2.0],
            ordering: VOrdering::Symmetric,
            spectrum_basis: 60,
        }
    }
}

/// Mode lattice, truncation and θ sampling of the Fock-space study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FockConfig {
    /// Spatial dimension of the mode lattice. Default 2.
    pub spatial_dims: usize,
    /// Modes per axis. Default 8.
    pub modes_per_axis: usize,
    /// Momentum extent covered by each axis. Default 4.
    pub span: f64,
    /// Centre of the lattice on every axis. Default 3.
    pub centre: f64,
    /// Particle-number truncation K. Default 2.
    pub max_particles: usize,
    /// Width of the test packets in momentum units. Default 0.35.
    pub packet_width: f64,
    /// Purely spatial θ^{12}; when set it is checked in addition to the random matrices.
    pub theta_spatial: Option<f64>,
    /// Number of random θ. Default 5.
    pub theta_samples: usize,
    /// Frobenius norm of the random θ. Default 0.1.
    pub theta_norm: f64,
    /// Frobenius norm of θ for the X-bound. Default 0.01.
    pub bound_theta_norm: f64,
    /// Speed of light. Default 1.
    pub c: f64,
    /// Modes per axis for the convergence series. Default [8, 16].
    pub refinement: Vec<usize>,
}

impl Default for FockConfig {
    fn default() -> Self {
        Self {
            spatial_dims: 2,
            modes_per_axis: 8,
            span: 4.0,
            centre: 3.0,
            max_particles: 2,
            packet_width: 0.35,
            theta_spatial: None,
            theta_samples: 5,
            theta_norm: 0.1,
            bound_theta_norm: 0.01,
            c: 1.0,
            refinement: vec![8, 16],
        }
    }
}

/// Test matrix of the oscillatory-vs-spectral study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillatoryConfig {
    /// Default [1, 2].
    pub dims: Vec<usize>,
    /// Nodes per axis in one dimension. Default 64.
    pub points_1d: usize,
    /// Nodes per axis in two dimensions. Default 32.
    pub points_2d: usize,
    /// Default 12.
    pub half_width: f64,
    /// Default [0, 1].
    pub n: Vec<f64>,
    /// Strength of the planar skew matrix. Default 0.1.
    pub b: f64,
    /// Refinement levels above warp.quad_points, each doubling it. Default 2.
    pub refinements: usize,
    /// Also compare the bump cutoff against the Gaussian. Default true.
    pub cutoff_check: bool,
    /// Nodes per axis of the two-dimensional Rieffel products, whose dense matrices are costly.
    /// Default 16.
    pub rieffel_points_2d: usize,
    /// Default 8.
    pub rieffel_half_width: f64,
}

impl Default for OscillatoryConfig {
    fn default() -> Self {
        Self {
            dims: vec![1, 2],
            points_1d: 64,
            points_2d: 32,
            half_width: 12.0,
            n: vec![0.0, 1.0],
            b: 0.1,
            refinements: 2,
            cutoff_check: true,
            rieffel_points_2d: 16,
            rieffel_half_width: 8.0,
        }
    }
}

/// Symbol-order sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymbolConfig {
    /// Default 2.
    pub dims: usize,
    /// Default 64.
    pub points_per_axis: usize,
    /// Default 12.
    pub half_width: f64,
    /// Strength of the planar θ. Default 0.1.
    pub theta: f64,
    /// Exponent of Q. Default 1.
    pub n: f64,
    /// Default 0.1.
    pub r_min: f64,
    /// Default 100.
    pub r_max: f64,
    /// Default 16.
    pub radii: usize,
    /// Highest derivative order. Default 2.
    pub gamma_max: usize,
    /// Sampling direction, normalized internally. Default (1, 0.3).
    pub direction: Vec<f64>,
    /// Multiplicative slack of the held-out check. Default 0.05.
    pub slack: f64,
}

impl Default for SymbolConfig {
    fn default() -> Self {
        Self {
            dims: 2,
            points_per_axis: 64,
            half_width: 12.0,
            theta: 0.1,
            n: 1.0,
            r_min: 0.1,
            r_max: 100.0,
            radii: 16,
            gamma_max: 2,
            direction: vec![1.0, 0.3],
            slack: 0.05,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Report directory; falls back to WARPCONV_OUT, then `warpconv-out`.
    pub dir: Option<PathBuf>,
    /// File stem of the report; defaults to the study name.
    pub stem: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Default full-dossier.
    pub study: Study,
    /// Seed of every random state and matrix. Default 20240611.
    pub seed: u64,
    /// Cap on the offset b of relative bounds. Default 1000.
    pub b_cap: f64,
    /// Run the studies of full-dossier in parallel. Default false.
    pub parallel: bool,
    pub grid: GridConfig,
    pub deformation: DeformationConfig,
    pub fock: FockConfig,
    pub oscillatory: OscillatoryConfig,
    pub symbol: SymbolConfig,
    pub warp: WarpConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            study: Study::FullDossier,
            seed: 20240611,
            b_cap: 1e3,
            parallel: false,
            grid: GridConfig::default(),
            deformation: DeformationConfig::default(),
            fock: FockConfig::default(),
            oscillatory: OscillatoryConfig::default(),
            symbol: SymbolConfig::default(),
            warp: WarpConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text)
                .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(toml_message(text, &e)))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, m: String| Err(Error::Config(format!("{field}: {m}")));
        if !(self.b_cap > 0.0) {
            return bad("b_cap", format!("must be positive, got {}", self.b_cap));
        }
        let g = &self.grid;
        crate::grid::GridSpace::centered(g.dims, g.points_per_axis, g.half_width).map_err(field("grid"))?;
        if !(g.mass > 0.0) {
            return bad("grid.mass", format!("must be positive, got {}", g.mass));
        }
        if g.dims != 3 {
            return bad("grid.dims", "the axial deformation needs three dimensions".into());
        }
        let d = &self.deformation;
        if d.n.is_empty() || d.n.iter().any(|v| !v.is_finite()) {
            return bad("deformation.n", "needs at least one finite exponent".into());
        }
        if d.b.iter().any(|v| !v.is_finite()) {
            return bad("deformation.b", "entries must be finite".into());
        }
        if d.spectrum_basis == 0 {
            return bad("deformation.spectrum_basis", "must be positive".into());
        }
        let f = &self.fock;
        if f.spatial_dims == 0 || f.modes_per_axis < 2 || f.max_particles == 0 {
            return bad("fock", "needs spatial_dims ≥ 1, modes_per_axis ≥ 2 and max_particles ≥ 1".into());
        }
        if !(f.span > 0.0) || !(f.packet_width > 0.0) || !(f.c > 0.0) || !f.centre.is_finite() {
            return bad("fock", "span, packet_width and c must be positive".into());
        }
        if !(f.theta_norm >= 0.0) || !(f.bound_theta_norm >= 0.0) {
            return bad("fock", "theta norms must be nonnegative".into());
        }
        if f.theta_spatial.is_some_and(|v| !v.is_finite()) {
            return bad("fock.theta_spatial", "must be finite".into());
        }
        if f.theta_spatial.is_some() && f.spatial_dims < 2 {
            return bad("fock.theta_spatial", "needs spatial_dims ≥ 2".into());
        }
        if f.refinement.iter().any(|&m| m < 2) {
            return bad("fock.refinement", "modes per axis must be at least 2".into());
        }
        let o = &self.oscillatory;
        if o.dims.iter().any(|&d| d != 1 && d != 2) {
            return bad("oscillatory.dims", "only 1 and 2 are supported".into());
        }
        for (name, m, l) in [
            ("points_1d", o.points_1d, o.half_width),
            ("points_2d", o.points_2d, o.half_width),
            ("rieffel_points_2d", o.rieffel_points_2d, o.rieffel_half_width),
        ] {
            crate::grid::GridSpace::centered(1, m, l).map_err(field(&format!("oscillatory.{name}")))?;
        }
        if o.refinements < 2 {
            return bad("oscillatory.refinements", "needs at least two levels".into());
        }
        let s = &self.symbol;
        crate::grid::GridSpace::centered(s.dims, s.points_per_axis, s.half_width).map_err(field("symbol"))?;
        if s.direction.len() != s.dims || s.direction.iter().all(|&v| v == 0.0) {
            return bad("symbol.direction", format!("needs {} entries, not all zero", s.dims));
        }
        if !(s.r_min > 0.0) || !(s.r_max > s.r_min) {
            return bad("symbol", "needs 0 < r_min < r_max".into());
        }
        if s.radii < crate::verify::MIN_RADII {
            return bad("symbol.radii", format!("needs at least {}", crate::verify::MIN_RADII));
        }
        if s.gamma_max == 0 || s.gamma_max > 2 {
            return bad("symbol.gamma_max", "must be 1 or 2".into());
        }
        if s.dims < 2 {
            return bad("symbol.dims", "a planar θ needs two dimensions".into());
        }
        self.warp.validate().map_err(field("warp"))?;
        if let Some(stem) = &self.output.stem {
            if stem.is_empty() || stem.contains(['/', '\\']) {
                return bad("output.stem", format!("{stem:?} is not a plain file stem"));
            }
        }
        Ok(())
    }
}

fn field(name: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Config(m) => Error::Config(format!("{name}: {m}")),
        other => Error::Config(format!("{name}: {other}")),
    }
}

fn toml_message(text: &str, e: &toml::de::Error) -> String {
    let msg = e.message().to_string();
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {msg}")
        }
        None => msg,
    }
}
