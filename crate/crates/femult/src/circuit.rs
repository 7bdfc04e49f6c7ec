//! Preset instantiation, DC operating-point solving and transfer curves.
//!
//! Every preset reduces to parallel legs of one- or two-stage series
//! chains, where a stage is a parallel rank of devices between two nodes.
//! Parallel composition sums branch currents exactly; series composition
//! solves the internal node by bisection on the monotone current mismatch.
//!
//! Behavioral conventions, fixed here for the whole toolkit:
//!
//! * Gate drive expressions give each device's gate-to-source voltage
//!   directly (the complementary-voltage generators of the physical
//!   designs are not modeled). Only the drain-source span of a stage
//!   couples to the solved nodes, which keeps stage currents monotone in
//!   the node voltage and makes the paired-structure symmetry exact.
//! * At DC the device network is biased across the full supply; the output
//!   signal is the load-branch current (node voltage / R up to a constant).
//!   The load RC only shapes transient dynamics (see the spectrum module).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::device::{polarization_for_vth, FeFetParams, FeFetState, Polarity};
use crate::netlist::{CircuitSpec, ParseError};
use crate::scalar::{real, Real};

/// Default bisection tolerance on internal nodes (V).
pub const DEFAULT_NODE_TOL: f64 = 1e-6;

/// Default number of samples in a transfer sweep.
pub const DEFAULT_SWEEP_POINTS: usize = 2001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("invalid circuit spec: {}", format_errors(.0))]
    InvalidSpec(Vec<ParseError>),
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("initial states must cover exactly the spec devices (missing: {missing:?}, extra: {extra:?})")]
    StateMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error("sweep requires v_min < v_max and n_points >= 3")]
    BadSweepRange,
}

fn format_errors(errs: &[ParseError]) -> String {
    errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

/// Result of a series-node solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSolution<T> {
    /// Internal node voltage (V).
    pub vx: T,
    /// False when the mismatch had no sign change on `[0, vdd]`; `vx` is
    /// then the boundary with the smaller mismatch.
    pub bracketed: bool,
}

/// Relative stage-current agreement the node solver refines to once the
/// `tol` interval is reached (keeps series currents accurate even when the
/// solved node is exponentially close to a rail).
const NODE_CURRENT_REL_EPS: f64 = 1e-12;

/// Bottom-stage span for a split variable `w in [-1, 1]`; exact arbitrarily
/// close to either rail (Sterbenz).
#[inline]
fn span_bottom<T: Real>(w: T, vdd: T) -> T {
    (T::one() + w) * real::<T>(0.5) * vdd
}

/// Top-stage span; `span_bottom(w) + span_top(w) = vdd` up to one rounding.
#[inline]
fn span_top<T: Real>(w: T, vdd: T) -> T {
    (T::one() - w) * real::<T>(0.5) * vdd
}

/// Node solve on the symmetric split variable `w`: the bottom stage spans
/// `vdd*(1+w)/2`, the top stage `vdd*(1-w)/2`. Both spans stay exact near
/// the rails, so rail-hugging nodes resolve cleanly and mirrored circuits
/// trace bit-identical search paths. Returns `(w, bracketed)`.
fn solve_node_spans<T: Real>(
    bottom_span: impl Fn(T) -> T,
    top_span: impl Fn(T) -> T,
    vdd: T,
    tol: T,
) -> (T, bool) {
    let one = T::one();
    let half = real::<T>(0.5);
    let mismatch = |w: T| bottom_span(span_bottom(w, vdd)) - top_span(span_top(w, vdd));
    let g_lo = mismatch(-one);
    let g_hi = mismatch(one);
    if g_lo > T::zero() && g_hi > T::zero() {
        return (if g_lo.abs() <= g_hi.abs() { -one } else { one }, false);
    }
    if g_lo < T::zero() && g_hi < T::zero() {
        return (if g_hi.abs() <= g_lo.abs() { one } else { -one }, false);
    }
    let rel_eps = real::<T>(NODE_CURRENT_REL_EPS);
    let w_tol = (tol + tol) / vdd;
    let (mut lo, mut hi) = (-one, one);
    for _ in 0..200 {
        let mid = (lo + hi) * half;
        if mid <= lo || mid >= hi {
            break; // hit float resolution
        }
        let b = bottom_span(span_bottom(mid, vdd));
        let t = top_span(span_top(mid, vdd));
        if hi - lo <= w_tol && (b - t).abs() <= rel_eps * b.abs().max(t.abs()) {
            break;
        }
        if b < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ((lo + hi) * half, true)
}

/// Bisects `bottom(vx) = top(vx)` for `vx` in `[0, vdd]`.
///
/// Requires `bottom` non-decreasing and `top` non-increasing on the
/// interval (the device model guarantees this for stage currents). `tol`
/// bounds the node bracket; refinement then continues until the two
/// currents agree to ~1e-12 relative or the bracket hits float resolution.
/// Without a sign change the boundary with the smaller mismatch is
/// returned, flagged.
pub fn solve_series_node<T: Real>(
    bottom: impl Fn(T) -> T,
    top: impl Fn(T) -> T,
    vdd: T,
    tol: T,
) -> NodeSolution<T> {
    let (w, bracketed) = solve_node_spans(&bottom, |s| top(vdd - s), vdd, tol);
    NodeSolution { vx: span_bottom(w, vdd), bracketed }
}

/// One device of a stage with its gate drive folded in: current through the
/// branch is `pre * tanh(span / vds_sat)` for a stage spanning `span` volts.
#[derive(Debug, Clone, Copy)]
struct PreparedBranch<T> {
    pre: T,
    vds_sat: T,
}

impl<T: Real> PreparedBranch<T> {
    /// Folds the gate-dependent part of the drain current. Multiplication
    /// order matches `id_drain` so stage sums reproduce it bit-exactly.
    fn new(params: &FeFetParams<T>, state: &FeFetState<T>, vgs: T) -> Self {
        let vth = params.vth_of(state);
        let u = match params.polarity {
            Polarity::N => vgs - vth,
            Polarity::P => vth - vgs,
        };
        let s = params.subthreshold_smoothing;
        let half = real::<T>(0.5);
        let v_eff = half * s * crate::scalar::softplus((u + u) / s);
        PreparedBranch {
            pre: params.width_ratio * params.k_trans * v_eff * v_eff,
            vds_sat: params.vds_sat,
        }
    }

    #[inline]
    fn current(&self, span: T) -> T {
        self.pre * (span / self.vds_sat).tanh()
    }
}

fn stage_current<T: Real>(branches: &[PreparedBranch<T>], span: T) -> T {
    let mut total = T::zero();
    for b in branches {
        total += b.current(span);
    }
    total
}

/// A preset instantiated with per-device hysteresis states.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit<T> {
    spec: CircuitSpec<T>,
    states: Vec<FeFetState<T>>,
    node_tol: T,
}

impl<T: Real> Circuit<T> {
    /// Builds a circuit with every device erased (polarization -1).
    pub fn new(spec: CircuitSpec<T>) -> Result<Self, CircuitError> {
        spec.validate().map_err(CircuitError::InvalidSpec)?;
        let states = vec![FeFetState::erased(); spec.devices.len()];
        Ok(Circuit { spec, states, node_tol: real(DEFAULT_NODE_TOL) })
    }

    /// Builds a circuit from explicit per-device initial states; the map
    /// keys must be exactly the spec's device names.
    pub fn with_states(
        spec: CircuitSpec<T>,
        initial_states: &BTreeMap<String, FeFetState<T>>,
    ) -> Result<Self, CircuitError> {
        let mut circuit = Circuit::new(spec)?;
        let missing: Vec<String> = circuit
            .spec
            .devices
            .iter()
            .map(|(n, _)| n.clone())
            .filter(|n| !initial_states.contains_key(n))
            .collect();
        let extra: Vec<String> = initial_states
            .keys()
            .filter(|n| circuit.spec.role_of(n).is_none())
            .cloned()
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(CircuitError::StateMismatch { missing, extra });
        }
        for (name, state) in initial_states {
            let role = circuit.spec.role_of(name).expect("checked above");
            circuit.states[role] = state.clone();
        }
        Ok(circuit)
    }

    /// Replaces the internal-node bisection tolerance (V).
    pub fn with_node_tol(mut self, tol: T) -> Self {
        self.node_tol = tol;
        self
    }

    pub fn spec(&self) -> &CircuitSpec<T> {
        &self.spec
    }

    pub fn node_tol(&self) -> T {
        self.node_tol
    }

    pub fn state(&self, name: &str) -> Result<&FeFetState<T>, CircuitError> {
        let role = self.spec.role_of(name).ok_or_else(|| CircuitError::UnknownDevice(name.into()))?;
        Ok(&self.states[role])
    }

    pub fn state_by_role(&self, role: usize) -> &FeFetState<T> {
        &self.states[role]
    }

    pub fn set_state(&mut self, name: &str, state: FeFetState<T>) -> Result<(), CircuitError> {
        let role = self.spec.role_of(name).ok_or_else(|| CircuitError::UnknownDevice(name.into()))?;
        self.states[role] = state;
        Ok(())
    }

    /// Sets a device's polarization so `vth_of` hits the target exactly
    /// (bypasses the pulse law; programming writes go through the
    /// programming module instead).
    pub fn set_vth_exact(&mut self, name: &str, vth: T) -> Result<(), CircuitError> {
        let role = self.spec.role_of(name).ok_or_else(|| CircuitError::UnknownDevice(name.into()))?;
        let params = &self.spec.devices[role].1;
        self.states[role] = FeFetState::with_polarization(params, polarization_for_vth(params, vth));
        Ok(())
    }

    /// Effective threshold of each device, by role.
    pub fn vths(&self) -> Vec<T> {
        self.spec
            .devices
            .iter()
            .zip(&self.states)
            .map(|((_, p), s)| p.vth_of(s))
            .collect()
    }

    /// Gate voltage of each device for a given input voltage.
    pub fn gate_voltages(&self, vin: T) -> Vec<T> {
        self.spec.gate_wiring.iter().map(|d| d.eval(vin)).collect()
    }

    /// DC output current (A) through the load branch for an input voltage.
    pub fn dc_output_current(&self, vin: T) -> T {
        let gates = self.gate_voltages(vin);
        self.dc_output_from_gates(&gates)
    }

    /// Like [`Circuit::dc_output_current`] plus a flag that is false when
    /// any internal-node solve failed to bracket (unreachable for the
    /// monotone device law, but propagated for diagnostics).
    pub fn dc_output_checked(&self, vin: T) -> (T, bool) {
        let gates = self.gate_voltages(vin);
        self.dc_output_from_gates_checked(&gates)
    }

    /// DC output current with explicit per-device gate voltages (used by
    /// gate-filtered transient dynamics).
    pub fn dc_output_from_gates(&self, gates: &[T]) -> T {
        self.dc_output_from_gates_checked(gates).0
    }

    fn dc_output_from_gates_checked(&self, gates: &[T]) -> (T, bool) {
        let prepared: Vec<PreparedBranch<T>> = self
            .spec
            .devices
            .iter()
            .zip(&self.states)
            .zip(gates)
            .map(|(((_, p), s), &vg)| PreparedBranch::new(p, s, vg))
            .collect();
        let vdd = self.spec.supply_vdd;
        let mut total = T::zero();
        let mut all_bracketed = true;
        for leg in self.spec.preset.legs() {
            match leg {
                [stage] => {
                    let branches: Vec<_> = stage.iter().map(|&r| prepared[r]).collect();
                    total += stage_current(&branches, vdd);
                }
                [top, bottom] => {
                    let top_branches: Vec<_> = top.iter().map(|&r| prepared[r]).collect();
                    let bot_branches: Vec<_> = bottom.iter().map(|&r| prepared[r]).collect();
                    let (w, bracketed) = solve_node_spans(
                        |s| stage_current(&bot_branches, s),
                        |s| stage_current(&top_branches, s),
                        vdd,
                        self.node_tol,
                    );
                    all_bracketed &= bracketed;
                    // min of the two stage currents is a tight lower bound,
                    // exact at the crossing and robust when the node sits
                    // exponentially close to a rail
                    total += stage_current(&bot_branches, span_bottom(w, vdd))
                        .min(stage_current(&top_branches, span_top(w, vdd)));
                }
                _ => unreachable!("presets have one- or two-stage legs"),
            }
        }
        (total, all_bracketed)
    }

    /// Samples `I_out(V_in)` on a uniform grid and annotates interior
    /// extrema (detected by first-difference sign changes, refined by a
    /// local three-point parabola fit).
    pub fn transfer_sweep(
        &self,
        v_min: T,
        v_max: T,
        n_points: usize,
    ) -> Result<TransferCurve<T>, CircuitError> {
        if !(v_min < v_max) || n_points < 3 {
            return Err(CircuitError::BadSweepRange);
        }
        let vin = crate::scalar::linspace(v_min, v_max, n_points);
        let iout: Vec<T> = vin.iter().map(|&v| self.dc_output_current(v)).collect();
        let extrema = detect_extrema(&vin, &iout);
        Ok(TransferCurve { vin, iout, extrema })
    }
}

/// Kind of an interior extremum of a transfer curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Peak,
    Valley,
}

impl ExtremumKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExtremumKind::Peak => "peak",
            ExtremumKind::Valley => "valley",
        }
    }
}

/// An interior extremum of a transfer curve, parabola-refined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum<T> {
    pub vin: T,
    pub iout: T,
    pub kind: ExtremumKind,
}

/// A sampled transfer characteristic with annotated interior extrema.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferCurve<T> {
    /// Strictly ascending input-voltage grid (V).
    pub vin: Vec<T>,
    /// Output current per grid point (A).
    pub iout: Vec<T>,
    /// Interior extrema, alternating in kind along `vin`.
    pub extrema: Vec<Extremum<T>>,
}

impl<T: Real> TransferCurve<T> {
    /// Two-column CSV (`vin,iout`), 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("vin,iout\n");
        for (v, i) in self.vin.iter().zip(&self.iout) {
            let _ = writeln!(out, "{v:.11e},{i:.11e}");
        }
        out
    }
}

/// Finds interior extrema of sampled data by first-difference sign changes,
/// refining each with the parabola through the three surrounding samples.
/// Exactly flat plateaus yield no extremum. Returned kinds strictly
/// alternate.
pub(crate) fn detect_extrema<T: Real>(x: &[T], y: &[T]) -> Vec<Extremum<T>> {
    let mut extrema = Vec::new();
    let mut prev_sign = 0i8;
    let mut last_move_end = 0usize;
    for i in 1..y.len() {
        let d = y[i] - y[i - 1];
        let sign = if d > T::zero() {
            1
        } else if d < T::zero() {
            -1
        } else {
            continue;
        };
        if prev_sign != 0 && sign != prev_sign {
            let kind = if prev_sign > 0 { ExtremumKind::Peak } else { ExtremumKind::Valley };
            extrema.push(refine_extremum(x, y, last_move_end, kind));
        }
        prev_sign = sign;
        last_move_end = i;
    }
    debug_assert!(extrema.windows(2).all(|w| w[0].kind != w[1].kind));
    extrema
}

/// Parabola fit through `(idx-1, idx, idx+1)`; falls back to the grid point
/// when the fit degenerates or leaves the bracket.
fn refine_extremum<T: Real>(x: &[T], y: &[T], idx: usize, kind: ExtremumKind) -> Extremum<T> {
    let (x0, x1, x2) = (x[idx - 1], x[idx], x[idx + 1]);
    let (y0, y1, y2) = (y[idx - 1], y[idx], y[idx + 1]);
    let h = (x2 - x0) * real(0.5);
    let denom = y0 - (y1 + y1) + y2;
    if denom == T::zero() {
        return Extremum { vin: x1, iout: y1, kind };
    }
    let offset = h * (y0 - y2) / (denom + denom);
    if offset.abs() > h {
        return Extremum { vin: x1, iout: y1, kind };
    }
    let diff = y0 - y2;
    let eight = real::<T>(8.0);
    let iout = y1 - diff * diff / (eight * denom);
    Extremum { vin: x1 + offset, iout, kind }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::Preset;

    fn circuit(preset: Preset) -> Circuit<f64> {
        Circuit::new(CircuitSpec::preset_default(preset)).unwrap()
    }

    /// Sets every device threshold exactly, by role order.
    fn set_vths(c: &mut Circuit<f64>, vths: &[f64]) {
        let names: Vec<String> = c.spec().devices.iter().map(|(n, _)| n.clone()).collect();
        for (name, &v) in names.iter().zip(vths) {
            c.set_vth_exact(name, v).unwrap();
        }
    }

    #[test]
    fn solve_identical_drive_splits_supply_in_half() {
        let f = |vx: f64| 3e-5 * (vx / 0.3).tanh();
        let sol = solve_series_node(f, move |vx| f(1.0 - vx), 1.0, 1e-9);
        assert!(sol.bracketed);
        assert!((sol.vx - 0.5).abs() < 1e-9, "vx = {}", sol.vx);
    }

    #[test]
    fn solve_bottom_off_pushes_node_to_supply() {
        // top stage sees span (1 - vx); its current vanishes only at vx = 1
        let bottom = |_vx: f64| 0.0;
        let top = |vx: f64| 1e-5 * ((1.0 - vx) / 0.3f64).tanh();
        let sol = solve_series_node(bottom, top, 1.0, 1e-9);
        assert!(sol.bracketed);
        assert!(sol.vx > 1.0 - 1e-6, "vx = {}", sol.vx);
    }

    #[test]
    fn solve_unbracketed_returns_closer_boundary_flagged() {
        // bottom always above top: mismatch positive everywhere
        let sol = solve_series_node(|_| 2.0, |_| 1.0, 1.0, 1e-9);
        assert!(!sol.bracketed);
        assert_eq!(sol.vx, 0.0);
        let sol = solve_series_node(|_| 1.0, |_| 2.0, 1.0, 1e-9);
        assert!(!sol.bracketed);
        assert_eq!(sol.vx, 1.0);
    }

    #[test]
    fn solve_matches_grid_scan_oracle() {
        // 100 random monotone stage-current pairs; the solved node must sit
        // within 2 grid steps of a 1e5-point scan minimizing the mismatch.
        let mut seed = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        const GRID: usize = 100_000;
        for case in 0..100 {
            let a = 1e-6 + 1e-4 * next();
            let b = 1e-6 + 1e-4 * next();
            let sa = 0.1 + 0.4 * next();
            let sb = 0.1 + 0.4 * next();
            let bottom = move |vx: f64| a * (vx / sa).tanh();
            let top = move |vx: f64| b * ((1.0 - vx) / sb).tanh();
            let sol = solve_series_node(bottom, move |vx| top(vx), 1.0, 1e-9);
            let mut best = (f64::INFINITY, 0.0);
            for i in 0..=GRID {
                let vx = i as f64 / GRID as f64;
                let mismatch = (bottom(vx) - top(vx)).abs();
                if mismatch < best.0 {
                    best = (mismatch, vx);
                }
            }
            let step = 1.0 / GRID as f64;
            assert!(
                (sol.vx - best.1).abs() <= 2.0 * step,
                "case {case}: bisect {} vs grid {}",
                sol.vx,
                best.1
            );
        }
    }

    #[test]
    fn parallel_preset_sums_branch_currents_exactly() {
        let c = circuit(Preset::P2nPar);
        let vin = 0.37;
        let (name0, p0) = &c.spec().devices[0];
        let (name1, p1) = &c.spec().devices[1];
        let i0 = p0.id_drain(c.state(name0).unwrap(), vin, 1.0);
        let i1 = p1.id_drain(c.state(name1).unwrap(), -vin, 1.0);
        assert_eq!(c.dc_output_current(vin), i0 + i1);
    }

    #[test]
    fn np_parallel_with_zero_width_p_equals_single_n() {
        let mut spec = CircuitSpec::<f64>::preset_default(Preset::NpPar);
        spec.devices[1].1.width_ratio = 0.0;
        let c = Circuit::new(spec).unwrap();
        let single = {
            let (name, p) = &c.spec().devices[0];
            let s = c.state(name).unwrap();
            move |vin: f64| p.id_drain(s, vin, 1.0)
        };
        for vin in [-0.8, -0.2, 0.0, 0.4, 1.1] {
            assert_eq!(c.dc_output_current(vin), single(vin));
        }
    }

    #[test]
    fn two_n_parallel_is_mirror_symmetric() {
        let mut c = circuit(Preset::P2nPar);
        set_vths(&mut c, &[0.35, 0.35]);
        for i in 0..200 {
            let delta = 1.5 * (i as f64 + 1.0) / 200.0;
            let a = c.dc_output_current(delta);
            let b = c.dc_output_current(-delta);
            assert!(
                ((a - b) / a.abs().max(1e-300)).abs() < 1e-12,
                "delta {delta}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn two_p_serial_has_single_peak_at_symmetry_point() {
        let mut c = circuit(Preset::P2pSer).with_node_tol(1e-13);
        set_vths(&mut c, &[-0.5, -0.5]);
        let curve = c.transfer_sweep(-1.5, 1.5, 1001).unwrap();
        assert_eq!(curve.extrema.len(), 1, "extrema: {:?}", curve.extrema);
        assert_eq!(curve.extrema[0].kind, ExtremumKind::Peak);
        assert!(curve.extrema[0].vin.abs() < 2e-3, "peak at {}", curve.extrema[0].vin);
        for i in 0..100 {
            let delta = 1.2 * (i as f64 + 1.0) / 100.0;
            let a = c.dc_output_current(delta);
            let b = c.dc_output_current(-delta);
            assert!(
                ((a - b) / a.abs().max(1e-300)).abs() < 1e-9,
                "delta {delta}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn np_pair_symmetric_with_mirror_devices() {
        for preset in [Preset::NpPar, Preset::NpSer] {
            let mut c = circuit(preset).with_node_tol(1e-13);
            set_vths(&mut c, &[0.5, -0.5]);
            for i in 0..100 {
                let delta = 1.2 * (i as f64 + 1.0) / 100.0;
                let a = c.dc_output_current(delta);
                let b = c.dc_output_current(-delta);
                assert!(
                    ((a - b) / a.abs().max(1e-300)).abs() < 1e-9,
                    "{preset:?} delta {delta}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn four_n_serial_offset_pairs_make_double_valley() {
        let mut c = circuit(Preset::N4Serial);
        let (t0, d) = (0.5, 0.15);
        set_vths(&mut c, &[t0 - d, t0 + d, t0 + d, t0 - d]);
        let curve = c.transfer_sweep(-1.5, 1.5, 2001).unwrap();
        let kinds: Vec<_> = curve.extrema.iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![ExtremumKind::Valley, ExtremumKind::Peak, ExtremumKind::Valley],
            "extrema {:?}",
            curve.extrema
        );
        // valleys sit near the programmed stage centers, peak between them
        assert!((curve.extrema[0].vin + d).abs() < 0.05);
        assert!(curve.extrema[1].vin.abs() < 0.05);
        assert!((curve.extrema[2].vin - d).abs() < 0.05);
    }

    #[test]
    fn series_current_matches_nested_grid_oracle() {
        let mut c = circuit(Preset::N4Serial);
        set_vths(&mut c, &[0.42, 0.61, 0.55, 0.33]);
        let vdd = c.spec().supply_vdd;
        // inputs chosen so the internal node is grid-resolvable (both
        // stages conduct); degenerate rail-hugging nodes are covered by
        // the symmetric-pair tests instead
        for vin in [0.35, 0.6, 0.9] {
            let gates = c.gate_voltages(vin);
            let dev = &c.spec().devices;
            let pre: Vec<f64> = (0..4)
                .map(|r| {
                    let (name, p) = &dev[r];
                    p.id_drain(c.state(name).unwrap(), gates[r], 1e9) // saturated tanh ~ 1
                })
                .collect();
            let sat: Vec<f64> = dev.iter().map(|(_, p)| p.vds_sat).collect();
            let bottom =
                |vx: f64| pre[2] * (vx / sat[2]).tanh() + pre[3] * (vx / sat[3]).tanh();
            let top = |vx: f64| {
                pre[0] * ((vdd - vx) / sat[0]).tanh() + pre[1] * ((vdd - vx) / sat[1]).tanh()
            };
            // nested scan, 1e5 points per level
            let mut lo = 0.0;
            let mut hi = vdd;
            let mut best_vx = 0.0;
            for _ in 0..3 {
                const GRID: usize = 100_000;
                let mut best = f64::INFINITY;
                for i in 0..=GRID {
                    let vx = lo + (hi - lo) * i as f64 / GRID as f64;
                    let m = (bottom(vx) - top(vx)).abs();
                    if m < best {
                        best = m;
                        best_vx = vx;
                    }
                }
                let step = (hi - lo) / GRID as f64;
                lo = (best_vx - 2.0 * step).max(0.0);
                hi = (best_vx + 2.0 * step).min(vdd);
            }
            let oracle = bottom(best_vx).min(top(best_vx));
            let got = c.dc_output_current(vin);
            assert!(
                ((got - oracle) / oracle.abs().max(1e-300)).abs() < 1e-6,
                "vin {vin}: {got} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn sweep_detects_single_valley_for_symmetric_pair() {
        let mut c = circuit(Preset::P2nPar);
        set_vths(&mut c, &[0.3, 0.3]);
        let curve = c.transfer_sweep(-1.2, 1.2, 1201).unwrap();
        assert_eq!(curve.extrema.len(), 1, "{:?}", curve.extrema);
        assert_eq!(curve.extrema[0].kind, ExtremumKind::Valley);
        assert!(curve.extrema[0].vin.abs() < 2e-3);
    }

    #[test]
    fn extremum_refinement_is_exact_on_a_parabola() {
        let x: Vec<f64> = crate::scalar::linspace(-1.0, 1.0, 101);
        let y: Vec<f64> = x.iter().map(|&v| (v - 0.312f64).powi(2)).collect();
        let ex = detect_extrema(&x, &y);
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].kind, ExtremumKind::Valley);
        assert!((ex[0].vin - 0.312).abs() < 1e-12, "refined {}", ex[0].vin);
        assert!(ex[0].iout.abs() < 1e-12);
    }

    #[test]
    fn extrema_alternate_on_wiggly_data() {
        let x: Vec<f64> = crate::scalar::linspace(0.0, 10.0, 400);
        let y: Vec<f64> = x.iter().map(|&v| (1.7 * v).sin() + 0.2 * (0.3 * v).cos()).collect();
        let ex = detect_extrema(&x, &y);
        assert!(ex.len() >= 4);
        for w in ex.windows(2) {
            assert_ne!(w[0].kind, w[1].kind);
            assert!(w[0].vin < w[1].vin);
        }
    }

    #[test]
    fn state_map_mismatch_is_rejected() {
        let spec = CircuitSpec::<f64>::preset_default(Preset::P2nPar);
        let mut states = BTreeMap::new();
        states.insert("M1".to_string(), FeFetState::erased());
        states.insert("MX".to_string(), FeFetState::erased());
        match Circuit::with_states(spec, &states) {
            Err(CircuitError::StateMismatch { missing, extra }) => {
                assert_eq!(missing, vec!["M2".to_string()]);
                assert_eq!(extra, vec!["MX".to_string()]);
            }
            other => panic!("expected state mismatch, got {other:?}"),
        }
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let c = circuit(Preset::P2nPar);
        let curve = c.transfer_sweep(-1.0, 1.0, 5).unwrap();
        let csv = curve.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "vin,iout");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].contains(','));
    }
}
