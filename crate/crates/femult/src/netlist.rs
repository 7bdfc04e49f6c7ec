//! Line-based circuit description dialect (`.fnet`) and its validated
//! in-memory form, [`CircuitSpec`].
//!
//! The eight multiplier structures are fixed presets, so the dialect needs
//! no node-level connectivity: one directive per line, `#` comments,
//! case-insensitive keywords, whitespace-separated tokens, `key=value`
//! fields. Numbers accept the engineering suffixes `k m u n p meg`.
//!
//! ```text
//! # 4n-serial multiplier
//! preset 4n-serial
//! vdd 1
//! load r=10k c=0
//! device name=M1 polarity=n kt=1e-4 vth_low=0.2 vth_high=0.8
//! device name=M2
//! device name=M3
//! device name=M4
//! gate M1 vin
//! gate M2 -vin
//! ```
//!
//! Device roles (topology position, default polarity, default gate drive)
//! are assigned by position in the name-sorted device list; `gate` lines
//! and parameter fields override the defaults. Canonical serialization
//! sorts devices, writes every parameter explicitly, and prints numbers in
//! shortest round-trip form, so `parse(serialize(spec)) == spec` and
//! serializing a reparsed file is idempotent.

use std::fmt;

use thiserror::Error;

use crate::device::{FeFetParams, Polarity};
use crate::scalar::Real;

/// The eight supported multiplier topologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// Two nFeFETs in parallel, complementary gates (upward parabola).
    P2nPar,
    /// Two pFeFETs in series, complementary gates (downward parabola).
    P2pSer,
    /// nFeFET and pFeFET in parallel, shared gate (upward parabola).
    NpPar,
    /// nFeFET and pFeFET in series, shared gate (downward parabola).
    NpSer,
    /// Two parallel nFeFET pairs in series (double valley).
    N4Serial,
    /// Two serial pFeFET stacks in parallel (double peak).
    P4Parallel,
    /// Two parallel n/p pairs in series (double valley).
    Np4Serial,
    /// Two serial n/p stacks in parallel (double peak).
    Np4Parallel,
}

/// One parallel rank of device roles between two series nodes.
pub type StageRoles = &'static [usize];

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::P2nPar,
        Preset::P2pSer,
        Preset::NpPar,
        Preset::NpSer,
        Preset::N4Serial,
        Preset::P4Parallel,
        Preset::Np4Serial,
        Preset::Np4Parallel,
    ];

    /// Canonical netlist keyword.
    pub fn canonical_name(&self) -> &'static str {
        match self {
            Preset::P2nPar => "2n-parallel",
            Preset::P2pSer => "2p-serial",
            Preset::NpPar => "np-parallel",
            Preset::NpSer => "np-serial",
            Preset::N4Serial => "4n-serial",
            Preset::P4Parallel => "4p-parallel",
            Preset::Np4Serial => "4np-serial",
            Preset::Np4Parallel => "4np-parallel",
        }
    }

    /// Parses a preset keyword (case-insensitive; `n/p-serial` and
    /// `n/p-parallel` are accepted aliases for the four-transistor designs).
    pub fn parse_name(s: &str) -> Option<Preset> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "2n-parallel" => Some(Preset::P2nPar),
            "2p-serial" => Some(Preset::P2pSer),
            "np-parallel" => Some(Preset::NpPar),
            "np-serial" => Some(Preset::NpSer),
            "4n-serial" => Some(Preset::N4Serial),
            "4p-parallel" => Some(Preset::P4Parallel),
            "4np-serial" | "n/p-serial" => Some(Preset::Np4Serial),
            "4np-parallel" | "n/p-parallel" => Some(Preset::Np4Parallel),
            _ => None,
        }
    }

    /// Number of devices the preset instantiates.
    pub fn arity(&self) -> usize {
        match self {
            Preset::P2nPar | Preset::P2pSer | Preset::NpPar | Preset::NpSer => 2,
            _ => 4,
        }
    }

    /// Whether this is one of the four-transistor multi-mode designs.
    pub fn is_four_transistor(&self) -> bool {
        self.arity() == 4
    }

    /// Expected polarity of each device role.
    pub fn role_polarities(&self) -> &'static [Polarity] {
        use Polarity::{N, P};
        match self {
            Preset::P2nPar => &[N, N],
            Preset::P2pSer => &[P, P],
            Preset::NpPar => &[N, P],
            Preset::NpSer => &[N, P], // role 0 at the bottom, role 1 on top
            Preset::N4Serial => &[N, N, N, N],
            Preset::P4Parallel => &[P, P, P, P],
            Preset::Np4Serial => &[N, P, N, P],
            Preset::Np4Parallel => &[P, P, N, N],
        }
    }

    /// Default gate drive of each device role.
    pub fn default_drives<T: Real>(&self) -> Vec<DriveExpr<T>> {
        use DriveExpr::{NegVin, Vin};
        match self {
            Preset::P2nPar | Preset::P2pSer => vec![Vin, NegVin],
            Preset::NpPar | Preset::NpSer => vec![Vin, Vin],
            Preset::N4Serial => vec![Vin, NegVin, Vin, NegVin],
            Preset::P4Parallel => vec![Vin, Vin, NegVin, NegVin],
            Preset::Np4Serial | Preset::Np4Parallel => vec![Vin, Vin, Vin, Vin],
        }
    }

    /// Role pairs whose gate drives must satisfy `drive(a) = -drive(b)`.
    pub fn complementary_pairs(&self) -> &'static [(usize, usize)] {
        match self {
            Preset::P2nPar | Preset::P2pSer => &[(0, 1)],
            Preset::N4Serial => &[(0, 1), (2, 3)],
            Preset::P4Parallel => &[(0, 2), (1, 3)],
            _ => &[],
        }
    }

    /// `(access_role, inner_role)` pairs for series write sequencing: the
    /// access device sits on the drain side and must be opened before the
    /// inner device can be programmed.
    pub fn access_pairs(&self) -> &'static [(usize, usize)] {
        match self {
            Preset::P2pSer => &[(0, 1)],
            Preset::NpSer => &[(1, 0)],
            Preset::N4Serial
            | Preset::P4Parallel
            | Preset::Np4Serial
            | Preset::Np4Parallel => &[(0, 2), (1, 3)],
            _ => &[],
        }
    }

    /// Parallel legs of the topology; each leg is a series chain of stages
    /// listed top (supply side) to bottom (ground side), and each stage is
    /// the parallel set of device roles between two nodes.
    pub fn legs(&self) -> &'static [&'static [StageRoles]] {
        match self {
            Preset::P2nPar | Preset::NpPar => &[&[&[0, 1]]],
            Preset::P2pSer => &[&[&[0], &[1]]],
            Preset::NpSer => &[&[&[1], &[0]]],
            Preset::N4Serial | Preset::Np4Serial => &[&[&[0, 1], &[2, 3]]],
            Preset::P4Parallel | Preset::Np4Parallel => &[&[&[0], &[2]], &[&[1], &[3]]],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

/// Gate drive expression of one device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveExpr<T> {
    Vin,
    NegVin,
    Const(T),
}

impl<T: Real> DriveExpr<T> {
    /// Gate voltage for a given input voltage.
    #[inline]
    pub fn eval(&self, vin: T) -> T {
        match self {
            DriveExpr::Vin => vin,
            DriveExpr::NegVin => -vin,
            DriveExpr::Const(c) => *c,
        }
    }

    /// True when `self` and `other` always carry opposite voltages.
    pub fn is_complement_of(&self, other: &Self) -> bool {
        match (self, other) {
            (DriveExpr::Vin, DriveExpr::NegVin) | (DriveExpr::NegVin, DriveExpr::Vin) => true,
            (DriveExpr::Const(a), DriveExpr::Const(b)) => *a == -*b,
            _ => false,
        }
    }

    fn canonical(&self) -> String {
        match self {
            DriveExpr::Vin => "vin".to_string(),
            DriveExpr::NegVin => "-vin".to_string(),
            DriveExpr::Const(c) => format_scalar(*c),
        }
    }
}

/// Output load: resistor from the supply to the output node with a shunt
/// capacitor at the node. At DC the devices see the full supply; the RC
/// product only shapes transient output dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Load<T> {
    /// Load resistance (ohm).
    pub resistance: T,
    /// Shunt capacitance (F).
    pub capacitance: T,
}

impl<T: Real> Default for Load<T> {
    fn default() -> Self {
        Load { resistance: crate::scalar::real(1e4), capacitance: T::zero() }
    }
}

/// A validated multiplier description: preset, named devices (sorted by
/// name; list position is the topology role), supply, load and gate wiring.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitSpec<T> {
    pub preset: Preset,
    pub devices: Vec<(String, FeFetParams<T>)>,
    pub supply_vdd: T,
    pub load: Load<T>,
    /// Gate drive per device, aligned with `devices`.
    pub gate_wiring: Vec<DriveExpr<T>>,
}

impl<T: Real> CircuitSpec<T> {
    /// A spec with default device parameters and wiring for a preset,
    /// devices named `M1..Mn`, 1 V supply.
    pub fn preset_default(preset: Preset) -> Self {
        let polarities = preset.role_polarities();
        let devices = (0..preset.arity())
            .map(|i| {
                let params = match polarities[i] {
                    Polarity::N => FeFetParams::default_n(),
                    Polarity::P => FeFetParams::default_p(),
                };
                (format!("M{}", i + 1), params)
            })
            .collect();
        CircuitSpec {
            preset,
            devices,
            supply_vdd: T::one(),
            load: Load::default(),
            gate_wiring: preset.default_drives(),
        }
    }

    /// Role index of a device name.
    pub fn role_of(&self, name: &str) -> Option<usize> {
        self.devices.iter().position(|(n, _)| n == name)
    }

    /// Checks every structural invariant of the spec.
    pub fn validate(&self) -> Result<(), Vec<ParseError>> {
        let mut errors = Vec::new();
        let mut push = |msg: String| errors.push(ParseError::global(msg));
        if self.devices.len() != self.preset.arity() {
            push(format!(
                "preset {} requires {} devices, got {}",
                self.preset,
                self.preset.arity(),
                self.devices.len()
            ));
        } else {
            for (i, w) in self.devices.windows(2).enumerate() {
                if w[0].0 == w[1].0 {
                    push(format!("duplicate device name {}", w[0].0));
                }
                if w[0].0 > w[1].0 {
                    push(format!("devices not in canonical (sorted) order at index {i}"));
                }
            }
            for (i, (name, params)) in self.devices.iter().enumerate() {
                let expected = self.preset.role_polarities()[i];
                if params.polarity != expected {
                    push(format!(
                        "device {name} fills a {}-polarity role of preset {}",
                        expected.as_str(),
                        self.preset
                    ));
                }
                if let Err(e) = params.validate() {
                    push(format!("device {name}: {e}"));
                }
            }
        }
        if self.gate_wiring.len() != self.devices.len() {
            push(format!(
                "gate wiring covers {} devices, expected {}",
                self.gate_wiring.len(),
                self.devices.len()
            ));
        } else if self.devices.len() == self.preset.arity() {
            for &(a, b) in self.preset.complementary_pairs() {
                if !self.gate_wiring[a].is_complement_of(&self.gate_wiring[b]) {
                    push(format!(
                        "devices {} and {} must have complementary gate drives in preset {}",
                        self.devices[a].0, self.devices[b].0, self.preset
                    ));
                }
            }
        }
        if !(self.supply_vdd > T::zero()) {
            push(format!("vdd must be > 0, got {}", self.supply_vdd));
        }
        if !(self.load.resistance > T::zero()) {
            push(format!("load resistance must be > 0, got {}", self.load.resistance));
        }
        if self.load.capacitance < T::zero() {
            push(format!("load capacitance must be >= 0, got {}", self.load.capacitance));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

/// A positioned netlist error; `line` and `column` are 1-based. Errors
/// raised against the file as a whole carry line 1.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError { line, column, message: message.into() }
    }

    fn global(message: impl Into<String>) -> Self {
        ParseError::new(1, 1, message)
    }
}

/// Formats a scalar in shortest round-trip form (`1`, `0.05`, `inf`).
pub fn format_scalar<T: Real>(v: T) -> String {
    if v.is_infinite() {
        return if v > T::zero() { "inf".into() } else { "-inf".into() };
    }
    format!("{v}")
}

/// Parses a number with optional engineering suffix (`k m u n p meg`,
/// case-insensitive); `inf` is accepted for unbounded values.
pub fn parse_scalar<T: Real>(token: &str) -> Result<T, String> {
    let lower = token.to_ascii_lowercase();
    if lower == "inf" || lower == "infinity" {
        return Ok(T::infinity());
    }
    if lower == "-inf" {
        return Ok(-T::infinity());
    }
    let (body, scale) = if let Some(b) = lower.strip_suffix("meg") {
        (b, 1e6)
    } else if let Some(b) = lower.strip_suffix('k') {
        (b, 1e3)
    } else if let Some(b) = lower.strip_suffix('m') {
        (b, 1e-3)
    } else if let Some(b) = lower.strip_suffix('u') {
        (b, 1e-6)
    } else if let Some(b) = lower.strip_suffix('n') {
        (b, 1e-9)
    } else if let Some(b) = lower.strip_suffix('p') {
        (b, 1e-12)
    } else {
        (lower.as_str(), 1.0)
    };
    let value: f64 = body
        .parse()
        .map_err(|_| format!("malformed number `{token}`"))?;
    T::from_f64(value * scale).ok_or_else(|| format!("number `{token}` out of range"))
}

#[derive(Debug)]
struct RawDevice {
    name: Option<String>,
    polarity: Option<Polarity>,
    fields: Vec<(String, f64)>,
    line: usize,
}

/// Parses netlist text into a validated [`CircuitSpec`] or a list of
/// positioned errors. The grammar is described in the module docs.
pub fn parse_netlist<T: Real>(text: &str) -> Result<CircuitSpec<T>, Vec<ParseError>> {
    let mut errors: Vec<ParseError> = Vec::new();
    let mut preset: Option<Preset> = None;
    let mut vdd: Option<T> = None;
    let mut load = Load::<T>::default();
    let mut raw_devices: Vec<RawDevice> = Vec::new();
    let mut gates: Vec<(String, DriveExpr<T>, usize)> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let mut tokens = tokenize(line);
        let (keyword, kw_col) = match tokens.next() {
            None => continue,
            Some(t) => t,
        };
        match keyword.to_ascii_lowercase().as_str() {
            "preset" => match tokens.next() {
                Some((name, col)) => match Preset::parse_name(name) {
                    Some(p) => {
                        if preset.replace(p).is_some() {
                            errors.push(ParseError::new(line_no, kw_col, "duplicate preset directive"));
                        }
                    }
                    None => errors.push(ParseError::new(line_no, col, format!("unknown preset `{name}`"))),
                },
                None => errors.push(ParseError::new(line_no, kw_col, "preset requires a name")),
            },
            "vdd" => match tokens.next() {
                Some((tok, col)) => match parse_scalar::<T>(tok) {
                    Ok(v) => vdd = Some(v),
                    Err(msg) => errors.push(ParseError::new(line_no, col, msg)),
                },
                None => errors.push(ParseError::new(line_no, kw_col, "vdd requires a value")),
            },
            "load" => {
                for (tok, col) in tokens.by_ref() {
                    match split_kv(tok) {
                        Some(("r", v)) => match parse_scalar::<T>(v) {
                            Ok(x) => load.resistance = x,
                            Err(msg) => errors.push(ParseError::new(line_no, col, msg)),
                        },
                        Some(("c", v)) => match parse_scalar::<T>(v) {
                            Ok(x) => load.capacitance = x,
                            Err(msg) => errors.push(ParseError::new(line_no, col, msg)),
                        },
                        _ => errors.push(ParseError::new(
                            line_no,
                            col,
                            format!("load field must be r=<ohms> or c=<farads>, got `{tok}`"),
                        )),
                    }
                }
            }
            "device" => {
                let mut dev = RawDevice { name: None, polarity: None, fields: Vec::new(), line: line_no };
                for (tok, col) in tokens.by_ref() {
                    match split_kv(tok) {
                        Some(("name", v)) => dev.name = Some(v.to_string()),
                        Some(("polarity", v)) => match v.to_ascii_lowercase().as_str() {
                            "n" => dev.polarity = Some(Polarity::N),
                            "p" => dev.polarity = Some(Polarity::P),
                            _ => errors.push(ParseError::new(
                                line_no,
                                col,
                                format!("polarity must be n or p, got `{v}`"),
                            )),
                        },
                        Some((key, v)) if DEVICE_KEYS.contains(&key) => {
                            match parse_scalar::<f64>(v) {
                                Ok(x) => dev.fields.push((key.to_string(), x)),
                                Err(msg) => errors.push(ParseError::new(line_no, col, msg)),
                            }
                        }
                        Some((key, _)) => errors.push(ParseError::new(
                            line_no,
                            col,
                            format!("unknown device field `{key}`"),
                        )),
                        None => errors.push(ParseError::new(
                            line_no,
                            col,
                            format!("device fields must be key=value, got `{tok}`"),
                        )),
                    }
                }
                if dev.name.is_none() {
                    errors.push(ParseError::new(line_no, kw_col, "device requires a name=<id> field"));
                } else {
                    raw_devices.push(dev);
                }
            }
            "gate" => {
                let name = tokens.next();
                let expr = tokens.next();
                match (name, expr) {
                    (Some((n, _)), Some((e, col))) => {
                        let parsed = match e.to_ascii_lowercase().as_str() {
                            "vin" => Ok(DriveExpr::Vin),
                            "-vin" => Ok(DriveExpr::NegVin),
                            other => parse_scalar::<T>(other).map(DriveExpr::Const),
                        };
                        match parsed {
                            Ok(d) => gates.push((n.to_string(), d, line_no)),
                            Err(msg) => errors.push(ParseError::new(line_no, col, msg)),
                        }
                    }
                    _ => errors.push(ParseError::new(
                        line_no,
                        kw_col,
                        "gate requires a device name and a drive (vin, -vin or a constant)",
                    )),
                }
            }
            other => {
                errors.push(ParseError::new(
                    line_no,
                    kw_col,
                    format!("unknown directive `{other}`"),
                ));
            }
        }
        // reject trailing garbage on single-value directives
        if let Some((tok, col)) = tokens.next() {
            errors.push(ParseError::new(line_no, col, format!("unexpected token `{tok}`")));
        }
    }

    let preset = match preset {
        Some(p) => p,
        None => {
            errors.push(ParseError::global("missing preset"));
            return Err(errors);
        }
    };

    if raw_devices.len() != preset.arity() {
        errors.push(ParseError::global(format!(
            "preset {} requires {} devices, got {}",
            preset,
            preset.arity(),
            raw_devices.len()
        )));
    }
    // duplicate names, reported at the second occurrence
    raw_devices.sort_by(|a, b| a.name.cmp(&b.name).then(a.line.cmp(&b.line)));
    for w in raw_devices.windows(2) {
        if w[0].name == w[1].name {
            errors.push(ParseError::new(
                w[1].line,
                1,
                format!("duplicate device name {}", w[1].name.as_deref().unwrap_or("?")),
            ));
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let polarities = preset.role_polarities();
    let mut devices = Vec::with_capacity(raw_devices.len());
    for (role, dev) in raw_devices.iter().enumerate() {
        let polarity = dev.polarity.unwrap_or(polarities[role]);
        let mut params: FeFetParams<T> = match polarity {
            Polarity::N => FeFetParams::default_n(),
            Polarity::P => FeFetParams::default_p(),
        };
        for (key, value) in &dev.fields {
            let v = crate::scalar::real::<T>(*value);
            match key.as_str() {
                "kt" => params.k_trans = v,
                "wr" => params.width_ratio = v,
                "vth_low" => params.vth_low = v,
                "vth_high" => params.vth_high = v,
                "v_coercive" => params.v_coercive = v,
                "v_pulse_sat" => params.v_saturation = v,
                "smoothing" => params.subthreshold_smoothing = v,
                "vds_sat" => params.vds_sat = v,
                "gate_pole" => params.gate_pole_hz = v,
                _ => unreachable!("filtered by DEVICE_KEYS"),
            }
        }
        devices.push((dev.name.clone().expect("checked above"), params));
    }

    let mut gate_wiring = preset.default_drives::<T>();
    for (name, drive, line) in gates {
        match devices.iter().position(|(n, _)| *n == name) {
            Some(role) => gate_wiring[role] = drive,
            None => errors.push(ParseError::new(line, 1, format!("gate names unknown device `{name}`"))),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let spec = CircuitSpec {
        preset,
        devices,
        supply_vdd: vdd.unwrap_or_else(T::one),
        load,
        gate_wiring,
    };
    spec.validate().map_err(|mut v| {
        v.iter_mut().for_each(|e| e.line = e.line.max(1));
        v
    })?;
    Ok(spec)
}

const DEVICE_KEYS: [&str; 9] = [
    "kt",
    "wr",
    "vth_low",
    "vth_high",
    "v_coercive",
    "v_pulse_sat",
    "smoothing",
    "vds_sat",
    "gate_pole",
];

/// Serializes a spec to canonical netlist text (LF line endings, sorted
/// devices, every field explicit, shortest round-trip numbers).
pub fn serialize_netlist<T: Real>(spec: &CircuitSpec<T>) -> String {
    let mut out = String::new();
    out.push_str(&format!("preset {}\n", spec.preset.canonical_name()));
    out.push_str(&format!("vdd {}\n", format_scalar(spec.supply_vdd)));
    out.push_str(&format!(
        "load r={} c={}\n",
        format_scalar(spec.load.resistance),
        format_scalar(spec.load.capacitance)
    ));
    for (name, p) in &spec.devices {
        out.push_str(&format!(
            "device name={} polarity={} kt={} wr={} vth_low={} vth_high={} v_coercive={} \
             v_pulse_sat={} smoothing={} vds_sat={} gate_pole={}\n",
            name,
            p.polarity.as_str(),
            format_scalar(p.k_trans),
            format_scalar(p.width_ratio),
            format_scalar(p.vth_low),
            format_scalar(p.vth_high),
            format_scalar(p.v_coercive),
            format_scalar(p.v_saturation),
            format_scalar(p.subthreshold_smoothing),
            format_scalar(p.vds_sat),
            format_scalar(p.gate_pole_hz),
        ));
    }
    for ((name, _), drive) in spec.devices.iter().zip(&spec.gate_wiring) {
        out.push_str(&format!("gate {} {}\n", name, drive.canonical()));
    }
    out
}

fn split_kv(token: &str) -> Option<(&str, &str)> {
    let (k, v) = token.split_once('=')?;
    if k.is_empty() || v.is_empty() {
        return None;
    }
    Some((k, v))
}

/// Whitespace tokenizer yielding `(token, 1-based byte column)`.
fn tokenize(line: &str) -> impl Iterator<Item = (&str, usize)> {
    line.split_whitespace().map(move |tok| {
        let col = tok.as_ptr() as usize - line.as_ptr() as usize + 1;
        (tok, col)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_spec_example() {
        let text = "preset 4n-serial\nvdd 1.0\ndevice name=M1\ndevice name=M2\ndevice name=M3\ndevice name=M4\n";
        let spec: CircuitSpec<f64> = parse_netlist(text).unwrap();
        assert_eq!(spec.preset, Preset::N4Serial);
        assert_eq!(spec.supply_vdd, 1.0);
        assert_eq!(spec.devices.len(), 4);
        assert_eq!(spec.gate_wiring[1], DriveExpr::NegVin);
    }

    #[test]
    fn empty_input_reports_missing_preset() {
        let err = parse_netlist::<f64>("").unwrap_err();
        assert!(err.iter().any(|e| e.message.contains("missing preset")), "{err:?}");
        assert!(err.iter().all(|e| e.line >= 1));
    }

    #[test]
    fn roundtrip_is_identity_on_default_specs() {
        for preset in Preset::ALL {
            let spec = CircuitSpec::<f64>::preset_default(preset);
            let text = serialize_netlist(&spec);
            let reparsed = parse_netlist::<f64>(&text).unwrap();
            assert_eq!(reparsed, spec, "preset {preset}");
            // canonicalization is idempotent
            assert_eq!(serialize_netlist(&reparsed), text);
        }
    }

    #[test]
    fn canonical_vdd_is_shortest_form() {
        let spec = CircuitSpec::<f64>::preset_default(Preset::P2nPar);
        let text = serialize_netlist(&spec);
        assert!(text.contains("vdd 1\n"), "{text}");
    }

    #[test]
    fn device_order_is_canonicalized() {
        let a = "preset 2n-parallel\nvdd 1\ndevice name=M2\ndevice name=M1\ngate M1 vin\ngate M2 -vin\n";
        let b = "preset 2n-parallel\nvdd 1\ndevice name=M1\ndevice name=M2\ngate M1 vin\ngate M2 -vin\n";
        let sa = parse_netlist::<f64>(a).unwrap();
        let sb = parse_netlist::<f64>(b).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(serialize_netlist(&sa), serialize_netlist(&sb));
    }

    #[test]
    fn engineering_suffixes() {
        for (text, expected) in [
            ("10k", 1e4),
            ("50m", 0.05),
            ("3u", 3e-6),
            ("100n", 1e-7),
            ("1p", 1e-12),
            ("2MEG", 2e6),
            ("1.5e-3", 0.0015),
        ] {
            let got = parse_scalar::<f64>(text).unwrap();
            assert!((got / expected - 1.0).abs() < 1e-15, "{text}: {got} vs {expected}");
        }
        assert!(parse_scalar::<f64>("abc").is_err());
    }

    #[test]
    fn unknown_directive_is_positioned() {
        let text = "preset 2n-parallel\nbogus 1\ndevice name=M1\ndevice name=M2\n";
        let err = parse_netlist::<f64>(text).unwrap_err();
        assert_eq!(err[0].line, 2);
        assert!(err[0].message.contains("unknown directive"));
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let text = "preset 4n-serial\ndevice name=M1\ndevice name=M2\n";
        let err = parse_netlist::<f64>(text).unwrap_err();
        assert!(err.iter().any(|e| e.message.contains("requires 4 devices")), "{err:?}");
    }

    #[test]
    fn duplicate_device_is_rejected_with_line() {
        let text = "preset 2n-parallel\ndevice name=M1\ndevice name=M1\n";
        let err = parse_netlist::<f64>(text).unwrap_err();
        let dup = err.iter().find(|e| e.message.contains("duplicate device")).unwrap();
        assert_eq!(dup.line, 3);
    }

    #[test]
    fn complementary_violation_is_rejected() {
        let text = "preset 2n-parallel\ndevice name=M1\ndevice name=M2\ngate M2 vin\n";
        let err = parse_netlist::<f64>(text).unwrap_err();
        assert!(err.iter().any(|e| e.message.contains("complementary")), "{err:?}");
    }

    #[test]
    fn malformed_number_is_positioned() {
        let text = "preset 2n-parallel\nvdd 1..0\ndevice name=M1\ndevice name=M2\n";
        let err = parse_netlist::<f64>(text).unwrap_err();
        assert_eq!(err[0].line, 2);
        assert_eq!(err[0].column, 5);
        assert!(err[0].message.contains("malformed number"));
    }

    #[test]
    fn crlf_is_accepted() {
        let text = "preset 2n-parallel\r\ndevice name=M1\r\ndevice name=M2\r\n";
        assert!(parse_netlist::<f64>(text).is_ok());
    }

    #[test]
    fn paper_alias_names() {
        assert_eq!(Preset::parse_name("n/p-serial"), Some(Preset::Np4Serial));
        assert_eq!(Preset::parse_name("N/P-PARALLEL"), Some(Preset::Np4Parallel));
    }

    #[test]
    fn gate_constant_drive_roundtrip() {
        let mut spec = CircuitSpec::<f64>::preset_default(Preset::P2nPar);
        spec.gate_wiring = vec![DriveExpr::Const(0.25), DriveExpr::Const(-0.25)];
        let text = serialize_netlist(&spec);
        let reparsed = parse_netlist::<f64>(&text).unwrap();
        assert_eq!(reparsed, spec);
    }
}
