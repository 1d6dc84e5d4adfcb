//! Run configuration: a flat, sectioned key-value format (TOML) with serde
//! defaults, dotted-path overrides, and a stable content hash for caching.

use serde::{Deserialize, Serialize};

use super::ScenarioError;

/// Which mode families enter the quantum model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Boundary- and medium-assisted modes together (the full quantization).
    Bama,
    /// Medium-assisted modes only.
    Ma,
    /// Boundary-assisted modes only.
    Ba,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Self, ScenarioError> {
        match s {
            "bama" => Ok(Variant::Bama),
            "ma" => Ok(Variant::Ma),
            "ba" => Ok(Variant::Ba),
            other => Err(ScenarioError::Config(format!(
                "unknown variant `{other}` (expected bama, ma, or ba)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Bama => "bama",
            Variant::Ma => "ma",
            Variant::Ba => "ba",
        }
    }
}

/// Environment geometry selector. All lengths are in units of the atomic
/// transition wavelength so configs stay readable across presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryKind {
    /// Homogeneous vacuum terminated by absorbing layers.
    FreeSpace,
    /// Perfectly conducting mirror plane at x = 0, open on both far ends.
    PecMirror,
    /// Single conductive-wall cavity centered at x = 0.
    LossyCavity,
    /// Two identical conductive-wall cavities with separated centers.
    DoubleCavity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub kind: GeometryKind,
    /// Vacuum extent in wavelengths: half-width for free space and the
    /// mirror, padding outside the outermost wall for cavities.
    pub padding_lam: f64,
    /// Cavity interior length (wavelengths).
    pub cavity_len_lam: f64,
    /// Cavity wall thickness (wavelengths).
    pub wall_thickness_lam: f64,
    /// Wall conductivity entering eps_r = 1 + i sigma / omega. Zero means
    /// the walls are omitted entirely.
    pub sigma: f64,
    /// Absorbing-layer thickness (wavelengths).
    pub pml_lam: f64,
    /// Vacuum mesh density (nodes per wavelength at the transition frequency).
    pub points_per_wavelength: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            kind: GeometryKind::FreeSpace,
            padding_lam: 2.5,
            cavity_len_lam: 0.5,
            wall_thickness_lam: 1e-4,
            sigma: 0.0,
            pml_lam: 1.75,
            points_per_wavelength: 40.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomsSection {
    pub count: usize,
    /// Transition frequency omega_a.
    pub omega: f64,
    /// Transition dipole moment d_eg.
    pub dipole: f64,
    /// Mirror geometry: atom height above the mirror plane (wavelengths).
    pub offset_lam: f64,
    /// Separation between atom/cavity centers for two-site setups, or the
    /// array pitch for larger counts (wavelengths).
    pub spacing_lam: f64,
}

impl Default for AtomsSection {
    fn default() -> Self {
        AtomsSection {
            count: 1,
            omega: 50.0,
            dipole: 0.075,
            offset_lam: 1.25,
            spacing_lam: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandSection {
    pub center: f64,
    /// Full width as a fraction of the center frequency.
    pub fractional_width: f64,
}

impl Default for BandSection {
    fn default() -> Self {
        BandSection {
            center: 50.0,
            fractional_width: 0.2,
        }
    }
}

impl BandSection {
    pub fn bounds(&self) -> (f64, f64) {
        let half = 0.5 * self.fractional_width * self.center;
        (self.center - half, self.center + half)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementSection {
    /// Total frequency-sample budget for the adaptive grid.
    pub budget: usize,
    /// Relative amplitude-jump tolerance that stops refinement.
    pub tol: f64,
}

impl Default for RefinementSection {
    fn default() -> Self {
        RefinementSection {
            budget: 128,
            tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModesSection {
    /// Rotate each frequency's degenerate modes so only atom-coupled
    /// combinations remain; exact for photon-vacuum initial states.
    pub compress: bool,
    /// Keep the smallest mode set whose coupling weight reaches this
    /// fraction of the total.
    pub coverage: f64,
}

impl Default for ModesSection {
    fn default() -> Self {
        ModesSection {
            compress: true,
            coverage: 1.0 - 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSection {
    /// Total-quanta truncation (1 or 2).
    pub max_quanta: u32,
}

impl Default for BasisSection {
    fn default() -> Self {
        BasisSection { max_quanta: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Cn,
    Rk4,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationSection {
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    /// Observables are recorded every this many steps (step 0 included).
    pub record_stride: usize,
}

impl Default for PropagationSection {
    fn default() -> Self {
        PropagationSection {
            dt: 5e-4,
            t_final: 12.0,
            scheme: Scheme::Cn,
            record_stride: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    /// First atom excited, others ground, field vacuum.
    Excited,
    /// Symmetric single-excitation (W) state over all atoms.
    Dicke,
    /// Two-atom mixed entangled state: weight a/3 on |ee>, 2/3 on the
    /// symmetric Bell state, (1-a)/3 on |gg>.
    EsdMixture,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub kind: InitialKind,
    /// |ee> parameter of the mixed entangled state.
    pub a: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            kind: InitialKind::Excited,
            a: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputsSection {
    /// Times at which to dump the one-photon field profile.
    pub field_times: Vec<f64>,
    /// Emit a small plot script next to each CSV.
    pub emit_plots: bool,
}

impl Default for OutputsSection {
    fn default() -> Self {
        OutputsSection {
            field_times: Vec::new(),
            emit_plots: true,
        }
    }
}

/// Complete description of one simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub variant: Variant,
    pub geometry: GeometrySection,
    pub atoms: AtomsSection,
    pub band: BandSection,
    pub refinement: RefinementSection,
    pub modes: ModesSection,
    pub basis: BasisSection,
    pub propagation: PropagationSection,
    pub initial: InitialSection,
    pub outputs: OutputsSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "run".to_string(),
            variant: Variant::Bama,
            geometry: GeometrySection::default(),
            atoms: AtomsSection::default(),
            band: BandSection::default(),
            refinement: RefinementSection::default(),
            modes: ModesSection::default(),
            basis: BasisSection::default(),
            propagation: PropagationSection::default(),
            initial: InitialSection::default(),
            outputs: OutputsSection::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Applies `section.key = value` overrides parsed from strings, as used
    /// by CLI flags and parameter sweeps.
    pub fn apply_overrides(&mut self, overrides: &[(String, String)]) -> Result<(), ScenarioError> {
        if overrides.is_empty() {
            self.validate()?;
            return Ok(());
        }
        let mut table = toml::Table::try_from(self.clone())
            .map_err(|e| ScenarioError::Config(e.to_string()))?;
        for (path, raw) in overrides {
            set_path(&mut table, path, raw)?;
        }
        let merged: ScenarioConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| ScenarioError::Config(e.to_string()))?;
        *self = merged;
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::Config(msg));
        if self.atoms.count == 0 {
            return bad("atoms.count must be at least 1".into());
        }
        if !(self.atoms.omega > 0.0) || !(self.atoms.dipole > 0.0) {
            return bad("atoms.omega and atoms.dipole must be positive".into());
        }
        if !(self.band.center > 0.0)
            || !(self.band.fractional_width > 0.0)
            || self.band.fractional_width >= 2.0
        {
            return bad("band must have positive center and fractional width in (0, 2)".into());
        }
        if !(self.propagation.dt != 0.0) || !(self.propagation.t_final > 0.0) {
            return bad("propagation.dt must be nonzero and t_final positive".into());
        }
        if self.propagation.record_stride == 0 {
            return bad("propagation.record_stride must be at least 1".into());
        }
        if !(self.basis.max_quanta == 1 || self.basis.max_quanta == 2) {
            return bad("basis.max_quanta must be 1 or 2".into());
        }
        if !(self.modes.coverage > 0.0 && self.modes.coverage <= 1.0) {
            return bad("modes.coverage must lie in (0, 1]".into());
        }
        if self.geometry.sigma < 0.0 {
            return bad("geometry.sigma must be nonnegative".into());
        }
        if self.geometry.sigma == 0.0 && self.variant == Variant::Ma {
            return bad(
                "medium-assisted variant with sigma = 0 leaves no lossy nodes to quantize".into(),
            );
        }
        match self.geometry.kind {
            GeometryKind::PecMirror => {
                if self.atoms.count != 1 {
                    return bad("mirror geometry supports a single atom".into());
                }
                if !(self.atoms.offset_lam > 0.0) {
                    return bad("atoms.offset_lam must be positive for the mirror".into());
                }
            }
            GeometryKind::LossyCavity => {
                if self.atoms.count != 1 {
                    return bad("single-cavity geometry supports a single atom".into());
                }
            }
            GeometryKind::DoubleCavity => {
                if self.atoms.count != 2 {
                    return bad("double-cavity geometry requires exactly two atoms".into());
                }
                let outer = self.geometry.cavity_len_lam + 2.0 * self.geometry.wall_thickness_lam;
                if self.atoms.spacing_lam <= outer {
                    return bad(format!(
                        "atoms.spacing_lam = {} would overlap cavities of outer width {}",
                        self.atoms.spacing_lam, outer
                    ));
                }
                if self.geometry.sigma == 0.0 {
                    return bad("double-cavity geometry requires sigma > 0".into());
                }
            }
            GeometryKind::FreeSpace => {}
        }
        if matches!(self.geometry.kind, GeometryKind::LossyCavity | GeometryKind::DoubleCavity)
            && self.geometry.sigma > 0.0
            && !(self.geometry.wall_thickness_lam > 0.0)
        {
            return bad("wall thickness must be positive when sigma > 0".into());
        }
        if self.initial.kind == InitialKind::EsdMixture {
            if self.atoms.count != 2 {
                return bad("the mixed entangled initial state requires two atoms".into());
            }
            if self.basis.max_quanta != 2 {
                return bad("the mixed entangled initial state requires max_quanta = 2".into());
            }
            if !(self.initial.a >= 0.0 && self.initial.a <= 1.0) {
                return bad("initial.a must lie in [0, 1]".into());
            }
        }
        Ok(())
    }

    /// Stable hash over everything the extracted mode set depends on:
    /// geometry, band, refinement, variant, atom placement, and the
    /// compression/pruning settings.
    pub fn mode_cache_key(&self) -> u64 {
        #[derive(Serialize)]
        struct KeyView<'a> {
            variant: &'a Variant,
            geometry: &'a GeometrySection,
            atoms: &'a AtomsSection,
            band: &'a BandSection,
            refinement: &'a RefinementSection,
            modes: &'a ModesSection,
        }
        let view = KeyView {
            variant: &self.variant,
            geometry: &self.geometry,
            atoms: &self.atoms,
            band: &self.band,
            refinement: &self.refinement,
            modes: &self.modes,
        };
        let canonical = toml::to_string(&view).expect("config serializes");
        fnv1a(canonical.as_bytes())
    }

    /// Hash over the full configuration, reported in run summaries.
    pub fn config_hash(&self) -> u64 {
        let canonical = toml::to_string(self).expect("config serializes");
        fnv1a(canonical.as_bytes())
    }
}

/// FNV-1a, 64-bit. Stable across platforms and runs, unlike `DefaultHasher`.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Sets `table[a][b] = value` for a dotted path `a.b`, parsing the value as
/// TOML when possible and falling back to a plain string.
fn set_path(table: &mut toml::Table, path: &str, raw: &str) -> Result<(), ScenarioError> {
    let mut parts = path.split('.').collect::<Vec<_>>();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ScenarioError::Config(format!("bad override path `{path}`")));
    }
    let leaf = parts.pop().expect("nonempty path");
    let mut current = table;
    for part in parts {
        let entry = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry.as_table_mut().ok_or_else(|| {
            ScenarioError::Config(format!("override path `{path}` crosses a non-table value"))
        })?;
    }
    let value = parse_value(raw);
    current.insert(leaf.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    if let Ok(v) = raw.parse::<i64>() {
        return toml::Value::Integer(v);
    }
    if let Ok(v) = raw.parse::<f64>() {
        return toml::Value::Float(v);
    }
    if let Ok(v) = raw.parse::<bool>() {
        return toml::Value::Boolean(v);
    }
    toml::Value::String(raw.to_string())
}
