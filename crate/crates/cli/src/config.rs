//! Experiment configuration. Files are TOML (or the JSON config echo of a previous report);
//! unknown keys are rejected everywhere and every field is checked before anything runs.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use conelab::cone::parse_cone;
use conelab::parse_coefficient;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Spectrum,
    ConeEnergy,
    Solve,
    Campanato,
    HeatSmooth,
    KernelCheck,
    Cutoff,
    CheckVeryWeak,
    WeylDemo,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Spectrum => "spectrum",
            Kind::ConeEnergy => "cone-energy",
            Kind::Solve => "solve",
            Kind::Campanato => "campanato",
            Kind::HeatSmooth => "heat-smooth",
            Kind::KernelCheck => "kernel-check",
            Kind::Cutoff => "cutoff",
            Kind::CheckVeryWeak => "check-very-weak",
            Kind::WeylDemo => "weyl-demo",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A configuration problem, reported with the offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

type Check = Result<(), ConfigError>;

fn positive(field: &str, v: f64) -> Check {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("must be a positive number, got {v}")))
    }
}

fn times(field: &str, t: &[f64]) -> Check {
    if t.len() < 2 {
        return Err(ConfigError::new(field, "needs at least two times"));
    }
    t.iter().try_for_each(|v| positive(field, *v))
}

fn point(field: &str, x: &[f64]) -> Check {
    if !(1..=3).contains(&x.len()) || x.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError::new(field, "must be a finite point in dimension 1, 2 or 3"));
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Optional when the subcommand names the experiment; required in suite manifests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone_energy: Option<ConeEnergySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub campanato: Option<CampanatoSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heat_smooth: Option<HeatSmoothSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_check: Option<KernelCheckSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<CutoffSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_very_weak: Option<CertifySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weyl_demo: Option<WeylSection>,
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// File stem for the report; defaults to the experiment kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub cone: String,
    pub modes: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            cone: "cone:circle:theta=3.141592653589793".into(),
            modes: 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConeEnergySection {
    pub cone: String,
    pub modes: usize,
    /// Harmonic coefficients; drawn from the seed when neither these nor a CSV are given.
    pub coefficients: Option<Vec<f64>>,
    /// One coefficient per row, single column with a header.
    pub coefficients_csv: Option<PathBuf>,
    pub r_min: f64,
    pub r_max: f64,
    pub radii: usize,
    /// Finite-element cross-check on a ring disc of this spacing (circle sections only).
    pub fem_h: Option<f64>,
    pub fem_tol: f64,
}

impl Default for ConeEnergySection {
    fn default() -> Self {
        ConeEnergySection {
            cone: "cone:circle:theta=3.141592653589793".into(),
            modes: 16,
            coefficients: None,
            coefficients_csv: None,
            r_min: 0.01,
            r_max: 1.0,
            radii: 40,
            fem_h: None,
            fem_tol: 0.02,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshChoice {
    /// Ring disc of radius 1 (two dimensions); `h` sets the spacing.
    Disc,
    /// Lattice mapped onto the unit ball; `cells` per side.
    Ball,
    /// Kuhn-triangulated cube [−1, 1]ⁿ; `cells` per side.
    Cube,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSection {
    pub coefficient: String,
    pub dim: usize,
    pub mesh: MeshChoice,
    pub h: f64,
    pub cells: usize,
    /// `probe`, `linear`, `quadratic`, or `cone-mode:<k>` (planar cones only).
    pub boundary: String,
    /// Constant source f of div(A∇w) = f with zero boundary data; replaces `boundary`.
    pub source: Option<f64>,
    pub r_min: f64,
    pub r_max: f64,
    pub radii: usize,
    /// Relative tolerance for the spectral comparison of `cone-mode` runs.
    pub tol: f64,
}

impl Default for SolveSection {
    fn default() -> Self {
        SolveSection {
            coefficient: "identity".into(),
            dim: 2,
            mesh: MeshChoice::Disc,
            h: 1.0 / 32.0,
            cells: 32,
            boundary: "probe".into(),
            source: None,
            r_min: 0.2,
            r_max: 0.9,
            radii: 8,
            tol: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampanatoSection {
    pub dim: usize,
    pub coefficient: String,
    pub frozen: String,
    pub rho: Option<f64>,
    pub l0: Option<usize>,
    pub levels: usize,
    pub cells: usize,
}

impl Default for CampanatoSection {
    fn default() -> Self {
        CampanatoSection {
            dim: 3,
            coefficient: "perturbed:convex_graph:1,1,1,holder:0.2:0.5".into(),
            frozen: "convex_graph:1,1,1".into(),
            rho: Some(0.8),
            l0: None,
            levels: 6,
            cells: 96,
        }
    }
}

/// Where a sampled field comes from: `builtin:<name>` or `csv:<path>`.
///
/// Builtins: `linear` (x₀), `saddle` (x₀² − x₁²), `paraboloid` (|x|²), `neg-paraboloid`,
/// `jump` (indicator of x₀ > 0).
#[derive(Clone, Debug, PartialEq)]
pub enum FieldSource {
    Builtin(String),
    Csv(PathBuf),
}

pub const BUILTIN_FIELDS: [&str; 5] = ["linear", "saddle", "paraboloid", "neg-paraboloid", "jump"];

impl FieldSource {
    pub fn parse(field: &str, s: &str) -> Result<Self, ConfigError> {
        match s.split_once(':') {
            Some(("builtin", name)) if BUILTIN_FIELDS.contains(&name) => Ok(FieldSource::Builtin(name.into())),
            Some(("builtin", name)) => Err(ConfigError::new(
                field,
                format!("unknown builtin `{name}`; expected one of {}", BUILTIN_FIELDS.join(", ")),
            )),
            Some(("csv", path)) if !path.is_empty() => Ok(FieldSource::Csv(path.into())),
            _ => Err(ConfigError::new(field, "expected builtin:<name> or csv:<path>")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatSmoothSection {
    pub field: String,
    pub center: Vec<f64>,
    pub radius: f64,
    pub h: f64,
    pub t_grid: Option<Vec<f64>>,
    /// `lipschitz` or `blowup`; without it the run only reports.
    pub expect: Option<Expectation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    Lipschitz,
    Blowup,
}

impl Default for HeatSmoothSection {
    fn default() -> Self {
        HeatSmoothSection {
            field: "builtin:saddle".into(),
            center: vec![0.0, 0.0],
            radius: 1.0,
            h: 1.0 / 64.0,
            t_grid: None,
            expect: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelCheckSection {
    pub dims: Vec<usize>,
    pub pairs: usize,
    pub t_grid: Vec<f64>,
    pub mass_tol: f64,
}

impl Default for KernelCheckSection {
    fn default() -> Self {
        KernelCheckSection {
            dims: vec![2, 3],
            pairs: 1000,
            t_grid: vec![1e-3, 1e-2, 1e-1],
            mass_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CutoffSection {
    pub dim: usize,
    pub radii: Vec<f64>,
    pub h: f64,
    /// Smoothing time t = r0²/(32n).
    pub r0: f64,
    /// Allowed relative spread of R·sup(|∇η| + |Δη|) across radii.
    pub tol: f64,
}

impl Default for CutoffSection {
    fn default() -> Self {
        CutoffSection {
            dim: 2,
            radii: vec![1.0, 2.0, 4.0],
            h: 1.0 / 32.0,
            r0: 1.0,
            tol: 0.15,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignChoice {
    Harmonic,
    Sub,
    Super,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifySection {
    pub field: String,
    pub sign: SignChoice,
    pub center: Vec<f64>,
    pub radius: f64,
    pub tol: f64,
    pub family_size: usize,
}

impl Default for CertifySection {
    fn default() -> Self {
        CertifySection {
            field: "builtin:saddle".into(),
            sign: SignChoice::Harmonic,
            center: vec![0.0, 0.0],
            radius: 1.0,
            tol: 1e-6,
            family_size: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeylSection {
    pub field: String,
    pub center: Vec<f64>,
    pub radius: f64,
    pub h: f64,
    pub tol: f64,
    pub t_grid: Option<Vec<f64>>,
}

impl Default for WeylSection {
    fn default() -> Self {
        WeylSection {
            field: "builtin:saddle".into(),
            center: vec![0.0, 0.0],
            // the cutoff must stay out of B_{R/8} up to the largest default time
            radius: 6.0,
            h: 1.0 / 64.0,
            tol: 1e-4,
            t_grid: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.extension().and_then(|e| e.to_str()) == Some("json"))
    }

    pub fn parse(text: &str, json: bool) -> Result<Self, ConfigError> {
        if json {
            // a report's config echo sits under "config"; a bare config is accepted too
            let value: serde_json::Value =
                serde_json::from_str(text).map_err(|e| ConfigError::new("config", e.to_string()))?;
            let inner = value.get("config").cloned().unwrap_or(value);
            serde_json::from_value(inner).map_err(|e| ConfigError::new("config", e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| ConfigError::new(toml_field(&e), e.message().to_string()))
        }
    }

    /// Fixes the experiment kind and fills its section with defaults if absent.
    pub fn resolve(mut self, kind: Option<Kind>) -> Result<Self, ConfigError> {
        let kind = match (self.kind, kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(ConfigError::new("kind", format!("config is for `{a}` but the subcommand is `{b}`")))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(ConfigError::new("kind", "missing experiment kind")),
        };
        self.kind = Some(kind);
        match kind {
            Kind::Spectrum => {
                let _ = self.spectrum.get_or_insert_with(Default::default);
            }
            Kind::ConeEnergy => {
                let _ = self.cone_energy.get_or_insert_with(Default::default);
            }
            Kind::Solve => {
                let _ = self.solve.get_or_insert_with(Default::default);
            }
            Kind::Campanato => {
                let _ = self.campanato.get_or_insert_with(Default::default);
            }
            Kind::HeatSmooth => {
                let _ = self.heat_smooth.get_or_insert_with(Default::default);
            }
            Kind::KernelCheck => {
                let _ = self.kernel_check.get_or_insert_with(Default::default);
            }
            Kind::Cutoff => {
                let _ = self.cutoff.get_or_insert_with(Default::default);
            }
            Kind::CheckVeryWeak => {
                let _ = self.check_very_weak.get_or_insert_with(Default::default);
            }
            Kind::WeylDemo => {
                let _ = self.weyl_demo.get_or_insert_with(Default::default);
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn kind(&self) -> Kind {
        self.kind.expect("resolved config")
    }

    pub fn stem(&self) -> String {
        self.output.name.clone().unwrap_or_else(|| self.kind().name().to_string())
    }

    fn validate(&self) -> Check {
        let others = [
            (Kind::Spectrum, self.spectrum.is_some()),
            (Kind::ConeEnergy, self.cone_energy.is_some()),
            (Kind::Solve, self.solve.is_some()),
            (Kind::Campanato, self.campanato.is_some()),
            (Kind::HeatSmooth, self.heat_smooth.is_some()),
            (Kind::KernelCheck, self.kernel_check.is_some()),
            (Kind::Cutoff, self.cutoff.is_some()),
            (Kind::CheckVeryWeak, self.check_very_weak.is_some()),
            (Kind::WeylDemo, self.weyl_demo.is_some()),
        ];
        for (k, present) in others {
            if present && k != self.kind() {
                return Err(ConfigError::new(
                    k.name().replace('-', "_"),
                    format!("section does not belong to a `{}` run", self.kind()),
                ));
            }
        }
        if let Some(name) = &self.output.name {
            if name.is_empty() || name.contains(['/', '\\']) {
                return Err(ConfigError::new("output.name", "must be a plain file stem"));
            }
        }
        match self.kind() {
            Kind::Spectrum => {
                let s = self.spectrum.as_ref().unwrap();
                if s.modes == 0 {
                    return Err(ConfigError::new("spectrum.modes", "must be at least 1"));
                }
                parse_cone(&s.cone, 1).map_err(|e| ConfigError::new("spectrum.cone", e.to_string()))?;
            }
            Kind::ConeEnergy => {
                let s = self.cone_energy.as_ref().unwrap();
                let spec =
                    parse_cone(&s.cone, s.modes.max(1)).map_err(|e| ConfigError::new("cone_energy.cone", e.to_string()))?;
                if s.modes == 0 {
                    return Err(ConfigError::new("cone_energy.modes", "must be at least 1"));
                }
                if s.coefficients.is_some() && s.coefficients_csv.is_some() {
                    return Err(ConfigError::new("cone_energy.coefficients", "give either a list or a CSV, not both"));
                }
                if let Some(c) = &s.coefficients {
                    if c.is_empty() || c.len() > spec.len() || c.iter().any(|v| !v.is_finite()) {
                        return Err(ConfigError::new(
                            "cone_energy.coefficients",
                            format!("need 1..={} finite values", spec.len()),
                        ));
                    }
                }
                positive("cone_energy.r_min", s.r_min)?;
                if !(s.r_max > s.r_min) {
                    return Err(ConfigError::new("cone_energy.r_max", "must exceed r_min"));
                }
                if s.radii < 2 {
                    return Err(ConfigError::new("cone_energy.radii", "need at least two radii"));
                }
                if let Some(h) = s.fem_h {
                    positive("cone_energy.fem_h", h)?;
                    if !s.cone.contains("circle") {
                        return Err(ConfigError::new("cone_energy.fem_h", "the cross-check needs a circle section"));
                    }
                    if s.r_max > 1.0 {
                        return Err(ConfigError::new("cone_energy.r_max", "the cross-check mesh has radius 1"));
                    }
                }
                positive("cone_energy.fem_tol", s.fem_tol)?;
            }
            Kind::Solve => {
                let s = self.solve.as_ref().unwrap();
                if !(1..=3).contains(&s.dim) {
                    return Err(ConfigError::new("solve.dim", "must be 1, 2 or 3"));
                }
                if s.mesh == MeshChoice::Disc && s.dim != 2 {
                    return Err(ConfigError::new("solve.mesh", "the disc mesh is two-dimensional"));
                }
                positive("solve.h", s.h)?;
                if s.cells < 2 {
                    return Err(ConfigError::new("solve.cells", "need at least two cells per side"));
                }
                parse_coefficient(&s.coefficient, s.dim)
                    .map_err(|e| ConfigError::new("solve.coefficient", e.to_string()))?;
                let b = s.boundary.as_str();
                let mode_ok = b
                    .strip_prefix("cone-mode:")
                    .map(|k| k.parse::<usize>().is_ok() && s.coefficient.starts_with("cone2d:"));
                if !matches!(b, "probe" | "linear" | "quadratic") && mode_ok != Some(true) {
                    return Err(ConfigError::new(
                        "solve.boundary",
                        "expected probe, linear, quadratic or cone-mode:<k> with a cone2d coefficient",
                    ));
                }
                if let Some(f) = s.source {
                    if !f.is_finite() {
                        return Err(ConfigError::new("solve.source", "must be finite"));
                    }
                }
                positive("solve.r_min", s.r_min)?;
                if !(s.r_max > s.r_min && s.r_max <= 1.0) {
                    return Err(ConfigError::new("solve.r_max", "need r_min < r_max ≤ 1"));
                }
                if s.radii < 2 {
                    return Err(ConfigError::new("solve.radii", "need at least two radii"));
                }
                positive("solve.tol", s.tol)?;
            }
            Kind::Campanato => {
                let s = self.campanato.as_ref().unwrap();
                if !(3..=4).contains(&s.dim) {
                    return Err(ConfigError::new("campanato.dim", "the iteration runs in dimension 3 or 4"));
                }
                parse_coefficient(&s.coefficient, s.dim)
                    .map_err(|e| ConfigError::new("campanato.coefficient", e.to_string()))?;
                parse_coefficient(&s.frozen, s.dim).map_err(|e| ConfigError::new("campanato.frozen", e.to_string()))?;
                if let Some(r) = s.rho {
                    if !(r > 0.0 && r < 1.0) {
                        return Err(ConfigError::new("campanato.rho", "must lie in (0, 1)"));
                    }
                }
                if s.levels == 0 {
                    return Err(ConfigError::new("campanato.levels", "must be at least 1"));
                }
                if s.cells < 4 {
                    return Err(ConfigError::new("campanato.cells", "need at least four cells per side"));
                }
            }
            Kind::HeatSmooth => {
                let s = self.heat_smooth.as_ref().unwrap();
                FieldSource::parse("heat_smooth.field", &s.field)?;
                point("heat_smooth.center", &s.center)?;
                positive("heat_smooth.radius", s.radius)?;
                positive("heat_smooth.h", s.h)?;
                if let Some(t) = &s.t_grid {
                    times("heat_smooth.t_grid", t)?;
                }
            }
            Kind::KernelCheck => {
                let s = self.kernel_check.as_ref().unwrap();
                if s.dims.is_empty() || s.dims.iter().any(|d| !(1..=3).contains(d)) {
                    return Err(ConfigError::new("kernel_check.dims", "dimensions must lie in 1..=3"));
                }
                if s.pairs == 0 {
                    return Err(ConfigError::new("kernel_check.pairs", "must be at least 1"));
                }
                if s.t_grid.is_empty() {
                    return Err(ConfigError::new("kernel_check.t_grid", "needs at least one time"));
                }
                s.t_grid.iter().try_for_each(|t| positive("kernel_check.t_grid", *t))?;
                positive("kernel_check.mass_tol", s.mass_tol)?;
            }
            Kind::Cutoff => {
                let s = self.cutoff.as_ref().unwrap();
                if !(1..=3).contains(&s.dim) {
                    return Err(ConfigError::new("cutoff.dim", "must be 1, 2 or 3"));
                }
                if s.radii.is_empty() {
                    return Err(ConfigError::new("cutoff.radii", "needs at least one radius"));
                }
                s.radii.iter().try_for_each(|r| positive("cutoff.radii", *r))?;
                positive("cutoff.h", s.h)?;
                positive("cutoff.r0", s.r0)?;
                positive("cutoff.tol", s.tol)?;
            }
            Kind::CheckVeryWeak => {
                let s = self.check_very_weak.as_ref().unwrap();
                FieldSource::parse("check_very_weak.field", &s.field)?;
                point("check_very_weak.center", &s.center)?;
                positive("check_very_weak.radius", s.radius)?;
                positive("check_very_weak.tol", s.tol)?;
                if s.family_size == 0 {
                    return Err(ConfigError::new("check_very_weak.family_size", "must be at least 1"));
                }
            }
            Kind::WeylDemo => {
                let s = self.weyl_demo.as_ref().unwrap();
                FieldSource::parse("weyl_demo.field", &s.field)?;
                point("weyl_demo.center", &s.center)?;
                positive("weyl_demo.radius", s.radius)?;
                positive("weyl_demo.h", s.h)?;
                positive("weyl_demo.tol", s.tol)?;
                if let Some(t) = &s.t_grid {
                    times("weyl_demo.t_grid", t)?;
                }
            }
        }
        Ok(())
    }
}

/// Best-effort field name for a TOML error: the unknown key if there is one.
fn toml_field(e: &toml::de::Error) -> String {
    let msg = e.message();
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return rest[..end].to_string();
        }
    }
    "config".into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_name_the_key() {
        let e = ExperimentConfig::parse("kind = \"spectrum\"\n[spectrum]\nthetta = 3.0\n", false).unwrap_err();
        assert_eq!(e.field, "thetta");
        assert!(e.message.contains("thetta"));
    }

    #[test]
    fn defaults_fill_the_section() {
        let c = ExperimentConfig::parse("", false).unwrap().resolve(Some(Kind::Cutoff)).unwrap();
        assert_eq!(c.cutoff.as_ref().unwrap().radii, vec![1.0, 2.0, 4.0]);
        assert_eq!(c.stem(), "cutoff");
    }

    #[test]
    fn mismatched_kind_and_foreign_sections_are_rejected() {
        let c = ExperimentConfig::parse("kind = \"spectrum\"", false).unwrap();
        assert_eq!(c.resolve(Some(Kind::Cutoff)).unwrap_err().field, "kind");
        let c = ExperimentConfig::parse("[cutoff]\nh = 0.1\n", false).unwrap();
        assert_eq!(c.resolve(Some(Kind::Spectrum)).unwrap_err().field, "cutoff");
    }

    #[test]
    fn bad_values_are_caught_before_running() {
        let cases = [
            ("[spectrum]\ncone = \"cone:circle:thetta=3\"\n", Kind::Spectrum, "spectrum.cone"),
            ("[campanato]\nrho = 1.5\n", Kind::Campanato, "campanato.rho"),
            ("[heat_smooth]\nfield = \"builtin:nope\"\n", Kind::HeatSmooth, "heat_smooth.field"),
            ("[solve]\nboundary = \"cone-mode:1\"\n", Kind::Solve, "solve.boundary"),
            ("[kernel_check]\ndims = [4]\n", Kind::KernelCheck, "kernel_check.dims"),
        ];
        for (text, kind, field) in cases {
            let e = ExperimentConfig::parse(text, false).unwrap().resolve(Some(kind)).unwrap_err();
            assert_eq!(e.field, field, "{text}");
        }
    }

    #[test]
    fn json_echo_round_trips() {
        let c = ExperimentConfig::parse("seed = 9\n[cutoff]\nradii = [1.0, 2.0]\n", false)
            .unwrap()
            .resolve(Some(Kind::Cutoff))
            .unwrap();
        let report = serde_json::json!({ "schema_version": 1, "config": c });
        let back = ExperimentConfig::parse(&report.to_string(), true).unwrap();
        assert_eq!(back, c);
    }
}
