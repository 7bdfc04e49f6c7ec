//! Behavioral FeFET model: a smooth drain-current law parameterized by a
//! programmable threshold voltage, with the threshold governed by a
//! Preisach-style return-point-memory hysteresis state.
//!
//! # Drain-current closed form
//!
//! This formula is the contract for everything downstream; tests re-derive
//! values from it independently. For an n-type device with threshold `vth`:
//!
//! ```text
//! u     = vgs - vth
//! s     = subthreshold_smoothing
//! v_eff = (s/2) * ln(1 + exp(2u/s))       (softplus overdrive smoothing)
//! id    = width_ratio * k_trans * v_eff^2 * tanh(vds / vds_sat)
//! ```
//!
//! `v_eff` approaches `u` a few `s` above threshold and decays like
//! `(s/2)*exp(2u/s)` below it, so subthreshold current falls off as
//! `exp(4u/s)`. A p-type device is defined by the mirror rule
//!
//! ```text
//! id_p(vgs, vds; vth) = width_ratio * id_n(-vgs, -vds; -vth)
//! ```
//!
//! evaluated with `width_ratio` applied once (the n-side formula above is
//! reused with `u = -vgs - (-vth) = vth - vgs` and `tanh(-vds/vds_sat)`).
//!
//! # Hysteresis
//!
//! Program pulses move a normalized polarization in `[-1, +1]` through a
//! scalar Preisach model: elementary hysterons populate the rectangle
//! `alpha in [v_coercive, v_saturation]`, `beta in [-v_saturation,
//! -v_coercive]` with uniform density. A pulse of effective amplitude `e`
//! (gate drive for n-type, negated for p-type) switches up every hysteron
//! with `alpha <= e` (for `e > 0`) or down every hysteron with `beta >= e`
//! (for `e < 0`); pulses with `|e| <= v_coercive` touch nothing and pulses
//! with `|e| >= v_saturation` saturate polarization to exactly +1 or -1.
//! The up/down boundary is a staircase fully described by the alternating
//! stack of past pulse extrema, which is what [`FeFetState`] stores; pulse
//! duration is ignored (amplitude-only model).

use thiserror::Error;

use crate::scalar::{real, softplus, Real};

/// Channel polarity of a FeFET.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    N,
    P,
}

impl Polarity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Polarity::N => "n",
            Polarity::P => "p",
        }
    }
}

/// Errors from device parameter construction and validation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("expected an n-polarity parameter set, got p")]
    NotNPolarity,
    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },
}

/// Device constants of a behavioral FeFET.
///
/// Voltages are in volts, `k_trans` in A/V^2, `gate_pole_hz` in Hz
/// (`inf` means quasi-static gate dynamics).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeFetParams<T> {
    pub polarity: Polarity,
    /// Transconductance factor (A/V^2).
    pub k_trans: T,
    /// Dimensionless width scaling; current is exactly linear in it.
    pub width_ratio: T,
    /// Lower end of the programmable threshold window (V).
    pub vth_low: T,
    /// Upper end of the programmable threshold window (V), `> vth_low`.
    pub vth_high: T,
    /// Pulses at or below this magnitude leave the state untouched (V).
    pub v_coercive: T,
    /// Pulses at or above this magnitude fully saturate polarization (V).
    pub v_saturation: T,
    /// Softplus smoothing scale of the overdrive (V).
    pub subthreshold_smoothing: T,
    /// Drain-saturation scale of the `tanh` vds dependence (V).
    pub vds_sat: T,
    /// Single-pole gate bandwidth (Hz); infinite = quasi-static.
    pub gate_pole_hz: T,
}

impl<T: Real> FeFetParams<T> {
    /// Plausible round-number defaults for an n-type device.
    ///
    /// These are declared defaults, not fitted values: threshold window
    /// 0.2-0.8 V, coercive voltage 1 V, saturation pulse 3 V, k = 1e-4
    /// A/V^2, 50 mV smoothing, 0.3 V drain saturation, quasi-static gate.
    pub fn default_n() -> Self {
        FeFetParams {
            polarity: Polarity::N,
            k_trans: real(1e-4),
            width_ratio: T::one(),
            vth_low: real(0.2),
            vth_high: real(0.8),
            v_coercive: T::one(),
            v_saturation: real(3.0),
            subthreshold_smoothing: real(0.05),
            vds_sat: real(0.3),
            gate_pole_hz: T::infinity(),
        }
    }

    /// Mirror-image p-type defaults (see [`FeFetParams::mirror_p_from_n`]).
    pub fn default_p() -> Self {
        Self::default_n()
            .mirror_p_from_n(T::one())
            .expect("defaults are n-polarity")
    }

    /// Builds the p-polarity parameter set whose current obeys
    /// `id_p(vgs, vds) = width_ratio * id_n(-vgs, -vds; -vth)` against this
    /// n-type set. Fails unless `self` is n-polarity.
    pub fn mirror_p_from_n(&self, width_ratio: T) -> Result<Self, DeviceError> {
        if self.polarity != Polarity::N {
            return Err(DeviceError::NotNPolarity);
        }
        Ok(FeFetParams {
            polarity: Polarity::P,
            width_ratio,
            vth_low: -self.vth_high,
            vth_high: -self.vth_low,
            ..*self
        })
    }

    /// Checks the structural invariants of the parameter set.
    pub fn validate(&self) -> Result<(), DeviceError> {
        let bad = |name: &'static str, reason: String| DeviceError::InvalidParam { name, reason };
        if !(self.vth_low < self.vth_high) {
            return Err(bad(
                "vth_low/vth_high",
                format!("requires vth_low < vth_high, got {} >= {}", self.vth_low, self.vth_high),
            ));
        }
        if !(self.width_ratio >= T::zero()) {
            return Err(bad("width_ratio", format!("must be >= 0, got {}", self.width_ratio)));
        }
        for (name, v) in [
            ("v_coercive", self.v_coercive),
            ("subthreshold_smoothing", self.subthreshold_smoothing),
            ("vds_sat", self.vds_sat),
        ] {
            if !(v > T::zero()) {
                return Err(bad(name, format!("must be > 0, got {v}")));
            }
        }
        if !(self.v_saturation > self.v_coercive) {
            return Err(bad(
                "v_saturation",
                format!(
                    "must exceed v_coercive, got {} <= {}",
                    self.v_saturation, self.v_coercive
                ),
            ));
        }
        if !(self.gate_pole_hz > T::zero()) {
            return Err(bad("gate_pole_hz", format!("must be > 0, got {}", self.gate_pole_hz)));
        }
        Ok(())
    }

    /// Threshold voltage for a given state: the affine map from polarization.
    ///
    /// N polarity: -1 -> `vth_high`, +1 -> `vth_low` (a stronger positive
    /// polarization turns the channel on earlier). P polarity mirrors the
    /// sign convention: -1 -> `vth_low`, +1 -> `vth_high`.
    pub fn vth_of(&self, state: &FeFetState<T>) -> T {
        let half = real::<T>(0.5);
        let t = (state.polarization + T::one()) * half; // 0 at -1, 1 at +1
        // convex form is exact at both endpoints
        match self.polarity {
            Polarity::N => self.vth_high * (T::one() - t) + self.vth_low * t,
            Polarity::P => self.vth_low * (T::one() - t) + self.vth_high * t,
        }
    }

    /// Drain current (A) at the given gate-source and drain-source voltage.
    ///
    /// Implements the closed form in the module docs. Smooth everywhere,
    /// exactly zero at `vds = 0`, monotone in `vgs` and in `vds`.
    pub fn id_drain(&self, state: &FeFetState<T>, vgs: T, vds: T) -> T {
        let vth = self.vth_of(state);
        let (u, vds_n) = match self.polarity {
            Polarity::N => (vgs - vth, vds),
            Polarity::P => (vth - vgs, -vds),
        };
        let s = self.subthreshold_smoothing;
        let half = real::<T>(0.5);
        let v_eff = half * s * softplus((u + u) / s);
        self.width_ratio * self.k_trans * v_eff * v_eff * (vds_n / self.vds_sat).tanh()
    }

    /// Normalized switching level of an effective pulse drive, if it moves
    /// anything: `None` inside the coercive dead zone, else the signed
    /// fraction of the `[v_coercive, v_saturation]` window (clamped to 1).
    fn pulse_level(&self, e: T) -> Option<T> {
        let mag = e.abs();
        if mag <= self.v_coercive {
            return None;
        }
        let span = self.v_saturation - self.v_coercive;
        let level = ((mag - self.v_coercive) / span).min(T::one());
        Some(if e < T::zero() { -level } else { level })
    }

    /// Volts corresponding to a normalized switching level (inverse of
    /// `pulse_level` on the active window).
    fn level_volts(&self, level: T) -> T {
        let span = self.v_saturation - self.v_coercive;
        let v = self.v_coercive + level.abs() * span;
        if level < T::zero() {
            -v
        } else {
            v
        }
    }
}

/// A single programming pulse applied gate-to-source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgramPulse<T> {
    /// Signed pulse amplitude (V).
    pub amplitude: T,
    /// Pulse duration (s), must be positive. The amplitude-only hysteresis
    /// rule ignores it, but plans carry it for export.
    pub duration: T,
}

impl<T: Real> ProgramPulse<T> {
    pub fn new(amplitude: T, duration: T) -> Self {
        ProgramPulse { amplitude, duration }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        if !(self.duration > T::zero()) {
            return Err(DeviceError::InvalidParam {
                name: "duration",
                reason: format!("must be > 0, got {}", self.duration),
            });
        }
        Ok(())
    }
}

/// Programmable polarization state of one FeFET.
///
/// `history` is the return-point-memory stack: alternating signed effective
/// pulse extrema (V), oldest first, starting with a positive entry. The
/// empty stack is the fully erased (all-down, polarization -1) state.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFetState<T> {
    polarization: T,
    history: Vec<T>,
}

impl<T: Real> FeFetState<T> {
    /// Fully erased state: polarization exactly -1.
    pub fn erased() -> Self {
        FeFetState { polarization: -T::one(), history: Vec::new() }
    }

    /// State with a prescribed polarization, represented as if reached from
    /// erased by one calibrated pulse. `p` is clamped to `[-1, +1]`.
    pub fn with_polarization(params: &FeFetParams<T>, p: T) -> Self {
        let p = p.max(-T::one()).min(T::one());
        let half = real::<T>(0.5);
        let level = (p + T::one()) * half;
        if level <= T::zero() {
            return Self::erased();
        }
        FeFetState { polarization: p, history: vec![params.level_volts(level)] }
    }

    /// Current polarization in `[-1, +1]`.
    pub fn polarization(&self) -> T {
        self.polarization
    }

    /// The return-point stack of effective pulse extrema (V), oldest first.
    pub fn history(&self) -> &[T] {
        &self.history
    }

    /// Applies a program pulse and returns the new state.
    ///
    /// Total on valid pulses: sub-coercive pulses return a bit-identical
    /// state, saturating pulses land on polarization exactly +1 or -1, and
    /// minor loops obey wiping-out/return-point memory exactly.
    pub fn apply_program_pulse(&self, params: &FeFetParams<T>, pulse: &ProgramPulse<T>) -> Self {
        // P devices respond to the mirrored gate drive.
        let e = match params.polarity {
            Polarity::N => pulse.amplitude,
            Polarity::P => -pulse.amplitude,
        };
        let level = match params.pulse_level(e) {
            None => return self.clone(),
            Some(l) => l,
        };
        let mut history = self.history.clone();
        let volts = params.level_volts(level);
        if level > T::zero() {
            // Up-pulse: raise the staircase to `volts` from the bottom,
            // wiping any reversal pair it supersedes.
            loop {
                match history.last().copied() {
                    None => {
                        history.push(volts);
                        break;
                    }
                    Some(last) if last > T::zero() => {
                        if last <= volts {
                            history.pop(); // superseded up-reversal
                        } else {
                            break; // existing boundary already higher
                        }
                    }
                    Some(_) => {
                        // Ends with a down-reversal; the up-reversal before
                        // it decides whether the pair is wiped out.
                        if history[history.len() - 2] <= volts {
                            history.pop();
                            history.pop();
                        } else {
                            history.push(volts);
                            break;
                        }
                    }
                }
            }
        } else {
            let mag = -volts;
            loop {
                match history.last().copied() {
                    None => break, // already fully down
                    Some(last) if last < T::zero() => {
                        if -last < mag {
                            history.pop(); // deeper down-switch supersedes it
                        } else {
                            break; // region already down
                        }
                    }
                    Some(_) => {
                        // Ends with an up-reversal whose band reaches down to
                        // the previous down-reversal (or the floor).
                        let band_floor = if history.len() >= 2 {
                            -history[history.len() - 2]
                        } else {
                            params.v_saturation
                        };
                        if mag < band_floor {
                            history.push(volts);
                            break;
                        } else {
                            history.pop(); // band fully switched down
                        }
                    }
                }
            }
        }
        let polarization = polarization_of(params, &history);
        FeFetState { polarization, history }
    }
}

/// Inverse of [`FeFetParams::vth_of`]: the polarization that realizes a
/// target threshold, clamped to `[-1, +1]`.
pub fn polarization_for_vth<T: Real>(params: &FeFetParams<T>, vth: T) -> T {
    let two = T::one() + T::one();
    let span = params.vth_high - params.vth_low;
    let t = match params.polarity {
        Polarity::N => (params.vth_high - vth) / span,
        Polarity::P => (vth - params.vth_low) / span,
    };
    (two * t - T::one()).max(-T::one()).min(T::one())
}

/// Integrates the Preisach staircase described by an alternating history
/// stack; returns polarization in `[-1, +1]`.
fn polarization_of<T: Real>(params: &FeFetParams<T>, history: &[T]) -> T {
    let span = params.v_saturation - params.v_coercive;
    let unit = |v: T| (v.abs() - params.v_coercive) / span;
    let mut area = T::zero();
    let mut y_top = T::one();
    let mut i = 0;
    while i < history.len() {
        let up = unit(history[i]);
        if i + 1 < history.len() {
            let down = unit(history[i + 1]);
            area += up * (y_top - down);
            y_top = down;
            i += 2;
        } else {
            area += up * y_top;
            y_top = T::zero();
            i += 1;
        }
    }
    (area + area) - T::one()
}
