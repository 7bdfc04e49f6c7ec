//! Write-sequence planning and execution: setting per-device thresholds
//! while honoring series-access constraints.
//!
//! Series presets cannot program an inner device until its access device
//! (the one on the drain side) conducts, so plans open access devices
//! first, write the inner devices, and write the access devices last.
//!
//! Every write uses a reset-then-set scheme: a saturating positive
//! (effective) pulse drives the device to full polarization, then a single
//! calibrated opposite pulse trims to the target. This makes writes
//! history-independent and idempotent. The `ACCESS_OPEN` pulse *is* the
//! access device's reset, so its later `FINAL_WRITE` is the trim pulse
//! alone; inner and parallel devices get a reset + trim pulse pair under
//! one `TARGET_WRITE` purpose. Trim amplitudes are found by bisection over
//! the monotone pulse-to-threshold law, not from its closed form.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::circuit::{Circuit, CircuitError};
use crate::device::{FeFetParams, FeFetState, Polarity, ProgramPulse};
use crate::netlist::CircuitSpec;
use crate::scalar::{real, Real};

/// Guaranteed worst-case error between achieved and requested thresholds (V).
pub const WRITE_TOLERANCE_V: f64 = 5e-3;

/// Default pulse duration stamped on plan steps (s); the amplitude-only
/// hysteresis rule ignores it.
pub const DEFAULT_PULSE_DURATION_S: f64 = 1e-6;

/// Why a step exists in a write plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Saturate an access device so programming reaches the inner device.
    AccessOpen,
    /// Program a non-access device toward its target threshold.
    TargetWrite,
    /// Program an access device after its inner devices are done.
    FinalWrite,
}

impl Purpose {
    pub fn as_str(&self) -> &'static str {
        match self {
            Purpose::AccessOpen => "ACCESS_OPEN",
            Purpose::TargetWrite => "TARGET_WRITE",
            Purpose::FinalWrite => "FINAL_WRITE",
        }
    }
}

impl fmt::Display for Purpose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One pulse of a write plan.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramStep<T> {
    pub device: String,
    pub pulse: ProgramPulse<T>,
    pub purpose: Purpose,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgramError {
    #[error("target vth {target} for device {device} outside [{lo}, {hi}]")]
    TargetOutOfRange { device: String, target: String, lo: String, hi: String },
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("series preset {preset} requires a target for access device {device}")]
    MissingAccessTarget { preset: String, device: String },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// A sequencing-rule violation found by [`validate_sequence`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {step}: {purpose} to inner device {inner} while access device {access} is not open")]
pub struct SequenceViolation {
    pub step: usize,
    pub inner: String,
    pub access: String,
    pub purpose: Purpose,
}

/// Saturating reset/open pulse for a device (effective drive `+v_saturation`).
fn open_pulse<T: Real>(params: &FeFetParams<T>) -> ProgramPulse<T> {
    let amplitude = match params.polarity {
        Polarity::N => params.v_saturation,
        Polarity::P => -params.v_saturation,
    };
    ProgramPulse::new(amplitude, real(DEFAULT_PULSE_DURATION_S))
}

/// Trim pulse reaching `target_vth` from the saturated (open) state, found
/// by bisection over the pulse magnitude.
fn trim_pulse<T: Real>(params: &FeFetParams<T>, target_vth: T) -> ProgramPulse<T> {
    let open_state = FeFetState::erased().apply_program_pulse(params, &open_pulse(params));
    let duration = real::<T>(DEFAULT_PULSE_DURATION_S);
    let amp_of = |mag: T| match params.polarity {
        Polarity::N => -mag,
        Polarity::P => mag,
    };
    let vth_after = |mag: T| {
        let pulse = ProgramPulse::new(amp_of(mag), duration);
        params.vth_of(&open_state.apply_program_pulse(params, &pulse))
    };
    // vth_after is monotone in the trim magnitude for both polarities:
    // deeper trims pull the device further from its open state.
    let toward_target = |vth: T| match params.polarity {
        Polarity::N => vth < target_vth,
        Polarity::P => vth > target_vth,
    };
    let (mut lo, mut hi) = (T::zero(), params.v_saturation);
    for _ in 0..80 {
        let mid = (lo + hi) * real(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if toward_target(vth_after(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ProgramPulse::new(amp_of((lo + hi) * real(0.5)), duration)
}

fn check_target<T: Real>(
    name: &str,
    params: &FeFetParams<T>,
    target: T,
) -> Result<(), ProgramError> {
    if target < params.vth_low || target > params.vth_high {
        return Err(ProgramError::TargetOutOfRange {
            device: name.to_string(),
            target: format!("{target}"),
            lo: format!("{}", params.vth_low),
            hi: format!("{}", params.vth_high),
        });
    }
    Ok(())
}

/// Plans a legal write sequence realizing the requested thresholds.
///
/// Series presets open access devices first, write inner devices, then
/// write the access devices; parallel presets write in device order.
/// Devices absent from `target_vths` are left untouched, except that
/// access devices of series presets must always carry a target (opening
/// them disturbs their state).
pub fn plan_write_sequence<T: Real>(
    spec: &CircuitSpec<T>,
    target_vths: &BTreeMap<String, T>,
) -> Result<Vec<ProgramStep<T>>, ProgramError> {
    for (name, &target) in target_vths {
        let role = spec
            .role_of(name)
            .ok_or_else(|| ProgramError::UnknownDevice(name.clone()))?;
        check_target(name, &spec.devices[role].1, target)?;
    }
    let access_pairs = spec.preset.access_pairs();
    let is_access = |role: usize| access_pairs.iter().any(|&(a, _)| a == role);
    let mut steps = Vec::new();

    if access_pairs.is_empty() {
        for (name, params) in &spec.devices {
            if let Some(&target) = target_vths.get(name) {
                steps.push(ProgramStep {
                    device: name.clone(),
                    pulse: open_pulse(params),
                    purpose: Purpose::TargetWrite,
                });
                steps.push(ProgramStep {
                    device: name.clone(),
                    pulse: trim_pulse(params, target),
                    purpose: Purpose::TargetWrite,
                });
            }
        }
        return Ok(steps);
    }

    for &(access, _) in access_pairs {
        let (name, params) = &spec.devices[access];
        if !target_vths.contains_key(name) {
            return Err(ProgramError::MissingAccessTarget {
                preset: spec.preset.canonical_name().to_string(),
                device: name.clone(),
            });
        }
        steps.push(ProgramStep {
            device: name.clone(),
            pulse: open_pulse(params),
            purpose: Purpose::AccessOpen,
        });
    }
    for (role, (name, params)) in spec.devices.iter().enumerate() {
        if is_access(role) {
            continue;
        }
        if let Some(&target) = target_vths.get(name) {
            steps.push(ProgramStep {
                device: name.clone(),
                pulse: open_pulse(params),
                purpose: Purpose::TargetWrite,
            });
            steps.push(ProgramStep {
                device: name.clone(),
                pulse: trim_pulse(params, target),
                purpose: Purpose::TargetWrite,
            });
        }
    }
    for &(access, _) in access_pairs {
        let (name, params) = &spec.devices[access];
        // the ACCESS_OPEN pulse was the reset; trim alone completes the write
        steps.push(ProgramStep {
            device: name.clone(),
            pulse: trim_pulse(params, target_vths[name]),
            purpose: Purpose::FinalWrite,
        });
    }
    Ok(steps)
}

/// Applies a plan to a circuit, returning the programmed circuit.
pub fn execute_write_sequence<T: Real>(
    circuit: &Circuit<T>,
    steps: &[ProgramStep<T>],
) -> Result<Circuit<T>, ProgramError> {
    let mut out = circuit.clone();
    for step in steps {
        let role = out
            .spec()
            .role_of(&step.device)
            .ok_or_else(|| ProgramError::UnknownDevice(step.device.clone()))?;
        let params = out.spec().devices[role].1;
        let next = out.state_by_role(role).apply_program_pulse(&params, &step.pulse);
        out.set_state(&step.device, next)?;
    }
    Ok(out)
}

/// Checks the series sequencing rule: no write may target an inner device
/// while its access device is not in the open (saturated low-vth) state.
/// Returns all violations, empty when the plan is legal.
pub fn validate_sequence<T: Real>(
    spec: &CircuitSpec<T>,
    steps: &[ProgramStep<T>],
) -> Result<(), Vec<SequenceViolation>> {
    let access_pairs = spec.preset.access_pairs();
    let mut open: BTreeMap<usize, bool> = access_pairs.iter().map(|&(a, _)| (a, false)).collect();
    let mut violations = Vec::new();
    for (idx, step) in steps.iter().enumerate() {
        let role = match spec.role_of(&step.device) {
            Some(r) => r,
            None => continue, // unknown devices are execution errors, not sequencing ones
        };
        let saturating = {
            let params = &spec.devices[role].1;
            let effective = match params.polarity {
                Polarity::N => step.pulse.amplitude,
                Polarity::P => -step.pulse.amplitude,
            };
            effective >= params.v_saturation
        };
        if let Some(entry) = open.get_mut(&role) {
            // a saturating positive pulse opens the access device; any
            // other pulse moves it off the open state
            *entry = saturating;
        }
        if matches!(step.purpose, Purpose::TargetWrite | Purpose::FinalWrite) {
            for &(access, inner) in access_pairs {
                if inner == role && !open[&access] {
                    violations.push(SequenceViolation {
                        step: idx,
                        inner: step.device.clone(),
                        access: spec.devices[access].0.clone(),
                        purpose: step.purpose,
                    });
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Plan as CSV (`device,purpose,amplitude,duration`), 12 significant digits.
pub fn plan_to_csv<T: Real>(steps: &[ProgramStep<T>]) -> String {
    let mut out = String::from("device,purpose,amplitude,duration\n");
    for s in steps {
        let _ = writeln!(
            out,
            "{},{},{:.11e},{:.11e}",
            s.device, s.purpose, s.pulse.amplitude, s.pulse.duration
        );
    }
    out
}
