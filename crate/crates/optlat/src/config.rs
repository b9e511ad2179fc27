//! Scenario configuration files.
//!
//! One `key = value` pair per line, keys grouped by dotted section prefixes,
//! `#` starts a comment. Values are numbers, words, or lists of numbers
//! separated by commas; `a:b:step` inside a list expands to the inclusive
//! range `a, a+step, …, b`.
//!
//! ```text
//! scenario = fig2
//! lattice.wavelength_nm = 532
//! thermal.trap_hz = 75
//! sweep.depths = 0:18:1, 13.4
//! ```
//!
//! Parsing never stops at the first problem: every malformed line, unknown
//! key and out-of-range value is reported with its line number.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use optlat_core::units::{ATOMIC_MASS_UNIT, DEFAULT_WAVELENGTH, SODIUM_MASS};

/// Depths above this are accepted with a warning.
pub const MAX_DEPTH: f64 = 18.0;
const MAX_RANGE_ITEMS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioKind {
    Bands,
    Expand,
    Gpe,
    Fig1,
    Fig2,
    Fig3a,
    Fig3b,
    Regimes,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 8] = [
        ScenarioKind::Bands,
        ScenarioKind::Expand,
        ScenarioKind::Gpe,
        ScenarioKind::Fig1,
        ScenarioKind::Fig2,
        ScenarioKind::Fig3a,
        ScenarioKind::Fig3b,
        ScenarioKind::Regimes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Bands => "bands",
            ScenarioKind::Expand => "expand",
            ScenarioKind::Gpe => "gpe",
            ScenarioKind::Fig1 => "fig1",
            ScenarioKind::Fig2 => "fig2",
            ScenarioKind::Fig3a => "fig3a",
            ScenarioKind::Fig3b => "fig3b",
            ScenarioKind::Regimes => "regimes",
        }
    }

    fn physics(self) -> PhysicsKind {
        match self {
            ScenarioKind::Bands => PhysicsKind::None,
            ScenarioKind::Gpe | ScenarioKind::Fig3b => PhysicsKind::Gpe,
            _ => PhysicsKind::Thermal,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown scenario `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PhysicsKind {
    None,
    Thermal,
    Gpe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeBlock {
    /// [m]
    pub wavelength: f64,
    /// [kg]
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalBlock {
    /// `T/T_R`
    pub temperature: f64,
    pub atoms: f64,
    /// Axial trap frequency [Hz].
    pub trap_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosureChoice {
    Radial,
    /// Interaction energy per atom [kHz].
    EnergyBudget(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpeBlock {
    pub atoms: f64,
    /// [m]
    pub scattering_length: f64,
    pub radial_hz: f64,
    pub axial_hz: f64,
    pub closure: ClosureChoice,
    pub depth: f64,
    /// Box length [µm].
    pub box_um: f64,
    pub points: usize,
    /// Time step [µs]; `None` picks 0.9 of the stability bound.
    pub dt_us: Option<f64>,
    pub duration_ms: f64,
    /// Width samples per run.
    pub samples: usize,
    pub ramp_ms: Option<f64>,
    pub calibration_box_um: f64,
    pub calibration_duration_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Physics {
    None,
    Thermal(ThermalBlock),
    Gpe(GpeBlock),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sweep {
    pub depths: Vec<f64>,
    /// `T/T_R`; empty means the thermal block's temperature.
    pub temperatures: Vec<f64>,
    pub times_ms: Vec<f64>,
    pub profile_times_ms: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics {
    pub transport_cutoff: usize,
    pub q_points: Option<usize>,
    pub z_points: usize,
    pub band_cutoff: usize,
    pub band_q_points: usize,
    pub band_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoundBlock {
    /// [cm⁻³]
    pub peak_density_cm3: f64,
    /// [m]
    pub scattering_length: f64,
}

/// Experimental cloud that `fig3b` sets beside the mean-field run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceBlock {
    pub waist_um: f64,
    /// `T/T_R`
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub lattice: LatticeBlock,
    pub physics: Physics,
    pub sweep: Sweep,
    pub numerics: Numerics,
    pub sound: SoundBlock,
    pub reference: ReferenceBlock,
    pub warnings: Vec<String>,
}

impl Scenario {
    pub fn thermal(&self) -> Option<&ThermalBlock> {
        match &self.physics {
            Physics::Thermal(t) => Some(t),
            _ => None,
        }
    }

    pub fn gpe(&self) -> Option<&GpeBlock> {
        match &self.physics {
            Physics::Gpe(g) => Some(g),
            _ => None,
        }
    }

    /// Sweep temperatures, falling back to the thermal block's.
    pub fn temperatures(&self) -> Vec<f64> {
        match (&self.sweep.temperatures, self.thermal()) {
            (t, _) if !t.is_empty() => t.clone(),
            (_, Some(th)) => vec![th.temperature],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based; `None` for problems with the file as a whole.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Every problem found in one configuration file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

struct Entry {
    line: usize,
    value: String,
}

/// Typed access to the raw entries, collecting errors as it goes.
struct Reader {
    entries: BTreeMap<String, Entry>,
    errors: Vec<ConfigError>,
    warnings: Vec<String>,
}

impl Reader {
    fn error(&mut self, line: Option<usize>, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line,
            message: message.into(),
        });
    }

    fn has_section(&self, section: &str) -> bool {
        let prefix = format!("{section}.");
        self.entries.keys().any(|k| k.starts_with(&prefix))
    }

    fn raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.get(key).map(|e| (e.line, e.value.clone()))
    }

    fn parse<T: FromStr>(&mut self, key: &str, what: &str) -> Option<(usize, T)> {
        let (line, raw) = self.raw(key)?;
        match raw.parse::<T>() {
            Ok(v) => Some((line, v)),
            Err(_) => {
                self.error(Some(line), format!("`{key}`: expected {what}, got `{raw}`"));
                None
            }
        }
    }

    /// Optional number checked against `ok`; out-of-range values are errors
    /// naming the key.
    fn number(&mut self, key: &str, default: f64, ok: impl Fn(f64) -> bool, rule: &str) -> f64 {
        match self.parse::<f64>(key, "a number") {
            Some((line, v)) if !(v.is_finite() && ok(v)) => {
                self.error(Some(line), format!("`{key}` = {v} is out of range: {rule}"));
                default
            }
            Some((_, v)) => v,
            None => default,
        }
    }

    fn optional_number(&mut self, key: &str, ok: impl Fn(f64) -> bool, rule: &str) -> Option<f64> {
        let present = self.entries.contains_key(key);
        let v = self.number(key, f64::NAN, ok, rule);
        (present && v.is_finite()).then_some(v)
    }

    fn count(&mut self, key: &str, default: usize, ok: impl Fn(usize) -> bool, rule: &str) -> usize {
        match self.parse::<usize>(key, "a non-negative integer") {
            Some((line, v)) if !ok(v) => {
                self.error(Some(line), format!("`{key}` = {v} is out of range: {rule}"));
                default
            }
            Some((_, v)) => v,
            None => default,
        }
    }

    fn list(&mut self, key: &str, ok: impl Fn(f64) -> bool, rule: &str) -> Vec<f64> {
        let Some((line, raw)) = self.raw(key) else {
            return Vec::new();
        };
        match parse_list(&raw) {
            Ok(values) => {
                if let Some(bad) = values.iter().find(|v| !ok(**v)) {
                    self.error(Some(line), format!("`{key}` contains {bad}, out of range: {rule}"));
                }
                values
            }
            Err(msg) => {
                self.error(Some(line), format!("`{key}`: {msg}"));
                Vec::new()
            }
        }
    }

    fn word(&mut self, key: &str) -> Option<(usize, String)> {
        self.raw(key)
    }
}

fn parse_list(raw: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    if raw.trim().is_empty() {
        return Ok(out);
    }
    for item in raw.split(',') {
        let item = item.trim();
        let parts: Vec<&str> = item.split(':').map(str::trim).collect();
        let num = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{s}` is not a number"))
        };
        match parts.as_slice() {
            [v] => out.push(num(v)?),
            [a, b, step] => {
                let (a, b, step) = (num(a)?, num(b)?, num(step)?);
                if !(step > 0.0) || b < a {
                    return Err(format!("range `{item}` needs start ≤ stop and step > 0"));
                }
                let n = ((b - a) / step + 1e-9).floor() as usize;
                if n >= MAX_RANGE_ITEMS {
                    return Err(format!("range `{item}` has too many items"));
                }
                // i·step rather than repeated addition, and snapped so that
                // 0:1:0.1 ends on 1 exactly
                out.extend((0..=n).map(|i| {
                    let v = a + i as f64 * step;
                    (v * 1e9).round() / 1e9
                }));
            }
            _ => return Err(format!("`{item}` is neither a number nor a:b:step range")),
        }
    }
    Ok(out)
}

const KNOWN_KEYS: &[&str] = &[
    "scenario",
    "name",
    "lattice.wavelength_nm",
    "lattice.species",
    "lattice.mass_amu",
    "thermal.temperature_tr",
    "thermal.atoms",
    "thermal.trap_hz",
    "gpe.atoms",
    "gpe.scattering_length_nm",
    "gpe.radial_hz",
    "gpe.axial_hz",
    "gpe.closure",
    "gpe.budget_khz",
    "gpe.depth",
    "gpe.box_um",
    "gpe.points",
    "gpe.dt_us",
    "gpe.duration_ms",
    "gpe.samples",
    "gpe.ramp_ms",
    "gpe.calibration_box_um",
    "gpe.calibration_duration_ms",
    "sweep.depths",
    "sweep.temperatures_tr",
    "sweep.times_ms",
    "sweep.profile_times_ms",
    "transport.cutoff",
    "transport.q_points",
    "transport.z_points",
    "bands.cutoff",
    "bands.q_points",
    "bands.count",
    "sound.peak_density_cm3",
    "sound.scattering_length_nm",
    "reference.waist_um",
    "reference.temperature_tr",
];

/// Parse and validate a scenario file.
pub fn parse_config(text: &str) -> Result<Scenario, ConfigErrors> {
    let mut r = Reader {
        entries: BTreeMap::new(),
        errors: Vec::new(),
        warnings: Vec::new(),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            r.error(Some(line), format!("syntax error: expected `key = value`, got `{content}`"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let well_formed = !key.is_empty()
            && key
                .split('.')
                .all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
        if !well_formed {
            r.error(Some(line), format!("syntax error: malformed key `{key}`"));
            continue;
        }
        if !KNOWN_KEYS.contains(&key) {
            r.error(Some(line), format!("unknown key `{key}`"));
            continue;
        }
        if let Some(prev) = r.entries.get(key) {
            let first = prev.line;
            r.error(Some(line), format!("duplicate key `{key}` (first set on line {first})"));
            continue;
        }
        r.entries.insert(
            key.to_string(),
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }

    let kind = match r.word("scenario") {
        Some((line, w)) => match w.parse::<ScenarioKind>() {
            Ok(k) => Some(k),
            Err(msg) => {
                r.error(Some(line), msg);
                None
            }
        },
        None => {
            r.error(None, "missing `scenario`");
            None
        }
    };
    let name = r
        .word("name")
        .map(|(_, n)| n)
        .unwrap_or_else(|| kind.map(|k| k.name().to_string()).unwrap_or_default());

    let lattice = lattice_block(&mut r);
    let physics = physics_block(&mut r, kind);
    let sweep = sweep_block(&mut r);
    let numerics = numerics_block(&mut r);
    let sound = SoundBlock {
        peak_density_cm3: r.number("sound.peak_density_cm3", 8e13, |v| v > 0.0, "must be > 0"),
        scattering_length: 1e-9 * r.number("sound.scattering_length_nm", 2.75, |v| v > 0.0, "must be > 0"),
    };
    let reference = ReferenceBlock {
        waist_um: r.number("reference.waist_um", 90.0, |v| v > 0.0, "must be > 0"),
        temperature: r.number("reference.temperature_tr", 0.06, |v| v > 0.0, "must be > 0"),
    };

    if let (Some(k), Physics::Thermal(_) | Physics::None) = (kind, &physics) {
        if k.physics() == PhysicsKind::Thermal && sweep.times_ms.len() < 6 && !matches!(k, ScenarioKind::Fig3a) {
            let line = r.entries.get("sweep.times_ms").map(|e| e.line);
            r.error(line, "`sweep.times_ms` needs at least 6 increasing times for a rate fit");
        }
    }
    if sweep.times_ms.windows(2).any(|w| w[1] <= w[0]) {
        let line = r.entries.get("sweep.times_ms").map(|e| e.line);
        r.error(line, "`sweep.times_ms` must be strictly increasing");
    }

    if !r.errors.is_empty() {
        r.errors.sort_by_key(|e| e.line.unwrap_or(0));
        return Err(ConfigErrors(r.errors));
    }
    Ok(Scenario {
        name,
        kind: kind.expect("checked above"),
        lattice,
        physics,
        sweep,
        numerics,
        sound,
        reference,
        warnings: r.warnings,
    })
}

fn lattice_block(r: &mut Reader) -> LatticeBlock {
    let wavelength = 1e-9 * r.number("lattice.wavelength_nm", DEFAULT_WAVELENGTH * 1e9, |v| v > 0.0, "must be > 0");
    let species = r.word("lattice.species");
    let amu = r.optional_number("lattice.mass_amu", |v| v > 0.0, "must be > 0");
    let mass = match (species, amu) {
        (Some((line, _)), Some(_)) => {
            r.error(Some(line), "set either `lattice.species` or `lattice.mass_amu`, not both");
            SODIUM_MASS
        }
        (Some((_, s)), None) if s == "sodium" => SODIUM_MASS,
        (Some((line, s)), None) => {
            r.error(Some(line), format!("`lattice.species`: unknown species `{s}` (known: sodium)"));
            SODIUM_MASS
        }
        (None, Some(m)) => m * ATOMIC_MASS_UNIT,
        (None, None) => SODIUM_MASS,
    };
    LatticeBlock { wavelength, mass }
}

fn physics_block(r: &mut Reader, kind: Option<ScenarioKind>) -> Physics {
    let (thermal, gpe) = (r.has_section("thermal"), r.has_section("gpe"));
    if thermal && gpe {
        r.error(None, "both `thermal.*` and `gpe.*` physics blocks are present; a scenario takes exactly one");
        return Physics::None;
    }
    let want = kind.map(ScenarioKind::physics);
    match want {
        Some(PhysicsKind::None) if thermal || gpe => {
            let first = r.entries.iter().find(|(k, _)| k.starts_with("thermal.") || k.starts_with("gpe.")).map(|(_, e)| e.line);
            r.error(first, format!("scenario `{}` takes no physics block", kind.unwrap()));
            Physics::None
        }
        Some(PhysicsKind::Thermal) if gpe => {
            r.error(None, format!("scenario `{}` needs a `thermal.*` block, not `gpe.*`", kind.unwrap()));
            Physics::None
        }
        Some(PhysicsKind::Gpe) if thermal => {
            r.error(None, format!("scenario `{}` needs a `gpe.*` block, not `thermal.*`", kind.unwrap()));
            Physics::None
        }
        // with an unknown scenario the block present is still validated
        Some(PhysicsKind::Thermal) => Physics::Thermal(thermal_block(r)),
        None if thermal => Physics::Thermal(thermal_block(r)),
        Some(PhysicsKind::Gpe) | None => Physics::Gpe(gpe_block(r)),
        Some(PhysicsKind::None) => Physics::None,
    }
}

fn thermal_block(r: &mut Reader) -> ThermalBlock {
    ThermalBlock {
        temperature: r.number("thermal.temperature_tr", 0.16, |v| v > 0.0, "must be > 0"),
        atoms: r.number("thermal.atoms", 0.9e6, |v| v > 0.0, "must be > 0"),
        trap_hz: r.number("thermal.trap_hz", 75.0, |v| v > 0.0, "must be > 0"),
    }
}

fn gpe_block(r: &mut Reader) -> GpeBlock {
    let positive = |v: f64| v > 0.0;
    let closure = match r.word("gpe.closure") {
        Some((_, w)) if w == "radial" => {
            if let Some((line, _)) = r.raw("gpe.budget_khz") {
                r.error(Some(line), "`gpe.budget_khz` only applies to `gpe.closure = energy_budget`");
            }
            ClosureChoice::Radial
        }
        Some((line, w)) if w != "energy_budget" => {
            r.error(Some(line), format!("`gpe.closure`: expected `radial` or `energy_budget`, got `{w}`"));
            ClosureChoice::Radial
        }
        _ => ClosureChoice::EnergyBudget(r.number("gpe.budget_khz", 2.0, positive, "must be > 0")),
    };
    let depth = r.number("gpe.depth", 13.4, |v| v >= 0.0, "must be ≥ 0");
    if depth > MAX_DEPTH {
        r.warnings.push(format!("`gpe.depth` = {depth} is above {MAX_DEPTH}"));
    }
    GpeBlock {
        atoms: r.number("gpe.atoms", 1.7e6, positive, "must be > 0"),
        scattering_length: 1e-9 * r.number("gpe.scattering_length_nm", 2.75, positive, "must be > 0"),
        radial_hz: r.number("gpe.radial_hz", 317.0, positive, "must be > 0"),
        axial_hz: r.number("gpe.axial_hz", 1227.0, positive, "must be > 0"),
        closure,
        depth,
        box_um: r.number("gpe.box_um", 43.4, positive, "must be > 0"),
        points: r.count("gpe.points", 1024, |n| n >= 16 && n.is_power_of_two(), "must be a power of two ≥ 16"),
        dt_us: r.optional_number("gpe.dt_us", positive, "must be > 0"),
        duration_ms: r.number("gpe.duration_ms", 5.2, positive, "must be > 0"),
        samples: r.count("gpe.samples", 40, |n| n >= 8, "must be ≥ 8"),
        ramp_ms: r.optional_number("gpe.ramp_ms", |v| v >= 0.0, "must be ≥ 0"),
        calibration_box_um: r.number("gpe.calibration_box_um", 33.9, positive, "must be > 0"),
        calibration_duration_ms: r.number("gpe.calibration_duration_ms", 0.52, positive, "must be > 0"),
    }
}

fn sweep_block(r: &mut Reader) -> Sweep {
    let depths = r.list("sweep.depths", |v| v >= 0.0, "depths must be ≥ 0");
    if let Some(d) = depths.iter().find(|d| **d > MAX_DEPTH) {
        r.warnings.push(format!("`sweep.depths` includes {d}, above {MAX_DEPTH}"));
    }
    Sweep {
        depths,
        temperatures: r.list("sweep.temperatures_tr", |v| v > 0.0, "temperatures must be > 0"),
        times_ms: r.list("sweep.times_ms", |v| v >= 0.0, "times must be ≥ 0"),
        profile_times_ms: r.list("sweep.profile_times_ms", |v| v >= 0.0, "times must be ≥ 0"),
    }
}

fn numerics_block(r: &mut Reader) -> Numerics {
    Numerics {
        transport_cutoff: r.count("transport.cutoff", 16, |n| n >= 8, "must be ≥ 8"),
        q_points: r
            .entries
            .contains_key("transport.q_points")
            .then(|| r.count("transport.q_points", 0, |n| n >= 5 && n % 2 == 1, "must be odd and ≥ 5")),
        z_points: r.count("transport.z_points", 4096, |n| n >= 16, "must be ≥ 16"),
        band_cutoff: r.count("bands.cutoff", 32, |n| n >= 8, "must be ≥ 8"),
        band_q_points: r.count("bands.q_points", 201, |n| n >= 3, "must be ≥ 3"),
        band_count: r.count("bands.count", 3, |n| n >= 1, "must be ≥ 1"),
    }
}
