//! Transient simulation, leakage-free power spectra, harmonic dominance
//! reports, maximum-operating-frequency search and power estimation.
//!
//! Captures are always an integer number of drive periods sampled on a
//! fixed per-period grid, so a rectangular-window periodogram puts every
//! harmonic in its own bin with zero leakage and margins are deterministic.
//! Input samples are generated from the sample index (not accumulated
//! time), which makes quasi-static captures exactly periodic and exactly
//! frequency-invariant.
//!
//! Two dynamics models:
//!
//! * `QuasiStatic` maps each input sample through the DC transfer.
//! * `SinglePole` first low-passes every device's gate drive through a
//!   first-order pole at its `gate_pole_hz` (trapezoidal update), then
//!   low-passes the output current through the load RC. This is the
//!   frequency-limiting mechanism of the toolkit.

use std::fmt::Write as _;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::circuit::Circuit;
use crate::scalar::{real, Real};

/// Default samples per drive period.
pub const DEFAULT_SAMPLES_PER_PERIOD: usize = 256;
/// Default number of captured periods.
pub const DEFAULT_N_PERIODS: usize = 16;
/// Periods discarded before spectral judgment (settling).
pub const DEFAULT_SKIP_PERIODS: usize = 2;
/// Highest harmonic order reported by default.
pub const DEFAULT_MAX_ORDER: usize = 6;
/// Dominance threshold on the margin (dB).
pub const DOMINANCE_MARGIN_DB: f64 = 10.0;
/// Floor for relative powers in dB (absent harmonics).
pub const DB_FLOOR: f64 = -400.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("capture grid too coarse: samples_per_period {spp} (>= 16) and n_periods {n_periods} (>= 4) required")]
    BadGrid { spp: usize, n_periods: usize },
    #[error("cannot skip {skip} of {n_periods} captured periods")]
    BadSkip { skip: usize, n_periods: usize },
    #[error("target order {target} must lie in 1..={max_order}")]
    BadTargetOrder { target: usize, max_order: usize },
    #[error("max order {max_order} exceeds the capture's Nyquist order {nyquist}")]
    OrderBeyondNyquist { max_order: usize, nyquist: usize },
    #[error("drive invalid: {0}")]
    BadDrive(String),
    #[error("initial margin {margin_db} dB below the required {required_db} dB at f_lo")]
    NotDominantAtStart { margin_db: String, required_db: String },
    #[error("frequency search requires 0 < f_lo < f_hi")]
    BadFrequencyBracket,
}

/// Sinusoidal input drive around an operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive<T> {
    /// DC operating point (V).
    pub v_op: T,
    /// Sine amplitude (V), non-negative.
    pub amplitude: T,
    /// Input frequency (Hz), positive.
    pub f_in: T,
    /// Phase offset (rad).
    pub phase: T,
}

impl<T: Real> Drive<T> {
    pub fn new(v_op: T, amplitude: T, f_in: T) -> Self {
        Drive { v_op, amplitude, f_in, phase: T::zero() }
    }

    pub fn validate(&self) -> Result<(), SpectrumError> {
        if !(self.amplitude >= T::zero()) {
            return Err(SpectrumError::BadDrive(format!("amplitude {} < 0", self.amplitude)));
        }
        if !(self.f_in > T::zero()) || !self.f_in.is_finite() {
            return Err(SpectrumError::BadDrive(format!("f_in {} must be positive", self.f_in)));
        }
        Ok(())
    }

    /// Input voltage at sample `i` of a `spp`-per-period grid.
    #[inline]
    pub fn sample(&self, i: usize, spp: usize) -> T {
        let tau = T::PI() + T::PI();
        let frac = T::from_usize(i % spp).expect("index fits scalar")
            / T::from_usize(spp).expect("grid fits scalar");
        self.v_op + self.amplitude * (tau * frac + self.phase).sin()
    }
}

/// Transient dynamics model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dynamics {
    QuasiStatic,
    SinglePole,
}

/// An integer-period capture: `samples.len() == n_periods * samples_per_period`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T> {
    /// Sample interval (s).
    pub dt: T,
    /// Output-current samples (A), or any uniformly sampled trace.
    pub samples: Vec<T>,
    pub n_periods: usize,
    pub samples_per_period: usize,
}

impl<T: Real> Waveform<T> {
    /// Fundamental frequency of the capture (Hz).
    pub fn f_in(&self) -> T {
        T::one() / (self.dt * T::from_usize(self.samples_per_period).expect("spp fits scalar"))
    }

    /// Drops the first `skip` periods (settling transient).
    pub fn skip_periods(&self, skip: usize) -> Result<Waveform<T>, SpectrumError> {
        if skip >= self.n_periods {
            return Err(SpectrumError::BadSkip { skip, n_periods: self.n_periods });
        }
        Ok(Waveform {
            dt: self.dt,
            samples: self.samples[skip * self.samples_per_period..].to_vec(),
            n_periods: self.n_periods - skip,
            samples_per_period: self.samples_per_period,
        })
    }

    /// Two-column CSV (`t,i`), 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,i\n");
        for (i, s) in self.samples.iter().enumerate() {
            let t = self.dt * T::from_usize(i).expect("index fits scalar");
            let _ = writeln!(out, "{t:.11e},{s:.11e}");
        }
        out
    }
}

/// First-order low-pass with trapezoidal (bilinear) update. `tau = 0`
/// passes the input through unchanged.
#[derive(Debug, Clone, Copy)]
pub struct OnePole<T> {
    tau: T,
    y: T,
    x_prev: T,
}

impl<T: Real> OnePole<T> {
    /// Filter with time constant `tau` (s), settled at `initial`.
    pub fn new(tau: T, initial: T) -> Self {
        OnePole { tau, y: initial, x_prev: initial }
    }

    /// Time constant for a single-pole cutoff frequency (Hz); infinite
    /// cutoff means no filtering.
    pub fn tau_from_cutoff_hz(f: T) -> T {
        if f.is_infinite() {
            T::zero()
        } else {
            T::one() / ((T::PI() + T::PI()) * f)
        }
    }

    /// Advances one step of size `dt` with input `x`; returns the output.
    #[inline]
    pub fn step(&mut self, x: T, dt: T) -> T {
        if self.tau <= T::zero() {
            self.y = x;
            self.x_prev = x;
            return x;
        }
        let a = dt / (self.tau + self.tau);
        self.y = (self.y * (T::one() - a) + a * (self.x_prev + x)) / (T::one() + a);
        self.x_prev = x;
        self.y
    }
}

fn check_grid(spp: usize, n_periods: usize) -> Result<(), SpectrumError> {
    if spp < 16 || n_periods < 4 {
        return Err(SpectrumError::BadGrid { spp, n_periods });
    }
    Ok(())
}

/// Simulates the output-current waveform of a driven circuit.
pub fn simulate_transient<T: Real>(
    circuit: &Circuit<T>,
    drive: &Drive<T>,
    samples_per_period: usize,
    n_periods: usize,
    dynamics: Dynamics,
) -> Result<Waveform<T>, SpectrumError> {
    check_grid(samples_per_period, n_periods)?;
    drive.validate()?;
    let n = samples_per_period * n_periods;
    let dt = T::one() / (drive.f_in * T::from_usize(samples_per_period).expect("spp fits scalar"));
    let samples = match dynamics {
        Dynamics::QuasiStatic => (0..n)
            .map(|i| circuit.dc_output_current(drive.sample(i, samples_per_period)))
            .collect(),
        Dynamics::SinglePole => {
            let wiring = circuit.spec().gate_wiring.clone();
            let vin0 = drive.sample(0, samples_per_period);
            let mut gate_filters: Vec<OnePole<T>> = circuit
                .spec()
                .devices
                .iter()
                .zip(&wiring)
                .map(|((_, p), w)| {
                    OnePole::new(OnePole::tau_from_cutoff_hz(p.gate_pole_hz), w.eval(vin0))
                })
                .collect();
            let load = circuit.spec().load;
            let mut gates = vec![T::zero(); wiring.len()];
            // settle the load filter at the initial operating current
            for (g, w) in gates.iter_mut().zip(&wiring) {
                *g = w.eval(vin0);
            }
            let mut load_filter =
                OnePole::new(load.resistance * load.capacitance, circuit.dc_output_from_gates(&gates));
            (0..n)
                .map(|i| {
                    let vin = drive.sample(i, samples_per_period);
                    for ((g, w), f) in gates.iter_mut().zip(&wiring).zip(gate_filters.iter_mut()) {
                        *g = f.step(w.eval(vin), dt);
                    }
                    load_filter.step(circuit.dc_output_from_gates(&gates), dt)
                })
                .collect()
        }
    };
    Ok(Waveform { dt, samples, n_periods, samples_per_period })
}

/// Quasi-static simulation of an arbitrary transfer function (test hook
/// and tuner fast path).
pub fn simulate_map<T: Real>(
    transfer: impl Fn(T) -> T,
    drive: &Drive<T>,
    samples_per_period: usize,
    n_periods: usize,
) -> Result<Waveform<T>, SpectrumError> {
    check_grid(samples_per_period, n_periods)?;
    drive.validate()?;
    let n = samples_per_period * n_periods;
    let dt = T::one() / (drive.f_in * T::from_usize(samples_per_period).expect("spp fits scalar"));
    let samples = (0..n).map(|i| transfer(drive.sample(i, samples_per_period))).collect();
    Ok(Waveform { dt, samples, n_periods, samples_per_period })
}

/// One-sided bin powers of an integer-period capture.
///
/// `bin_powers[k]` is the mean-square contribution of bin `k`; harmonic
/// order `m` lives in bin `m * bins_per_harmonic`. The sum of all non-DC
/// bin powers equals the mean square of the DC-removed waveform (Parseval).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumBins<T> {
    pub bin_powers: Vec<T>,
    pub bins_per_harmonic: usize,
    pub f_in: T,
}

impl<T: Real> SpectrumBins<T> {
    /// Highest harmonic order resolvable by this capture.
    pub fn nyquist_order(&self) -> usize {
        (self.bin_powers.len() - 1) / self.bins_per_harmonic
    }

    /// Mean-square power of a harmonic order.
    pub fn harmonic_power(&self, order: usize) -> T {
        self.bin_powers[order * self.bins_per_harmonic]
    }
}

/// Rectangular-window periodogram of an integer-period capture.
pub fn power_spectrum<T: Real>(waveform: &Waveform<T>) -> SpectrumBins<T> {
    let n = waveform.samples.len();
    assert_eq!(n, waveform.n_periods * waveform.samples_per_period, "integer-period capture");
    let mut buf: Vec<Complex<T>> =
        waveform.samples.iter().map(|&s| Complex::new(s, T::zero())).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let n_t = T::from_usize(n).expect("length fits scalar");
    let norm = T::one() / (n_t * n_t);
    let two = real::<T>(2.0);
    let half_n = n / 2;
    let one_sided = half_n + 1;
    let mut bin_powers = Vec::with_capacity(one_sided);
    for (k, c) in buf.iter().take(one_sided).enumerate() {
        let p = c.norm_sqr() * norm;
        let both_sides = k > 0 && !(n % 2 == 0 && k == half_n);
        bin_powers.push(if both_sides { two * p } else { p });
    }
    SpectrumBins { bin_powers, bins_per_harmonic: waveform.n_periods, f_in: waveform.f_in() }
}

/// Per-harmonic relative powers and the dominance verdict for a target
/// multiplication order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport<T> {
    pub f_in: T,
    /// dB relative to the strongest non-DC harmonic, index = order
    /// (0..=max_order), floored at [`DB_FLOOR`].
    pub harmonic_power_db: Vec<T>,
    pub target_order: usize,
    /// Target power minus the strongest other non-DC harmonic power (dB).
    pub dominance_margin_db: T,
    /// True when the margin meets [`DOMINANCE_MARGIN_DB`].
    pub dominant: bool,
}

impl<T: Real> SpectrumReport<T> {
    /// Flat `key=value` report block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "f_in={:.11e}", self.f_in);
        let _ = writeln!(out, "target_order={}", self.target_order);
        let _ = writeln!(out, "dominance_margin_db={:.11e}", self.dominance_margin_db);
        let _ = writeln!(out, "dominant={}", self.dominant);
        for (order, db) in self.harmonic_power_db.iter().enumerate() {
            let _ = writeln!(out, "power_db_order_{order}={db:.11e}");
        }
        out
    }

    /// Two-column CSV (`order,power_db`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("order,power_db\n");
        for (order, db) in self.harmonic_power_db.iter().enumerate() {
            let _ = writeln!(out, "{order},{db:.11e}");
        }
        out
    }
}

/// Builds the dominance report for a target order over harmonics
/// `0..=max_order` (margin excludes DC).
pub fn harmonic_report<T: Real>(
    bins: &SpectrumBins<T>,
    target_order: usize,
    max_order: usize,
) -> Result<SpectrumReport<T>, SpectrumError> {
    if target_order == 0 || target_order > max_order {
        return Err(SpectrumError::BadTargetOrder { target: target_order, max_order });
    }
    if max_order > bins.nyquist_order() {
        return Err(SpectrumError::OrderBeyondNyquist {
            max_order,
            nyquist: bins.nyquist_order(),
        });
    }
    let mut reference = T::zero();
    for order in 1..=max_order {
        reference = reference.max(bins.harmonic_power(order));
    }
    let floor = real::<T>(DB_FLOOR);
    let ten = real::<T>(10.0);
    let db_of = |p: T| {
        if p <= T::zero() || reference <= T::zero() {
            floor
        } else {
            (ten * (p / reference).log10()).max(floor)
        }
    };
    let harmonic_power_db: Vec<T> =
        (0..=max_order).map(|o| db_of(bins.harmonic_power(o))).collect();
    let mut best_other = floor;
    for order in 1..=max_order {
        if order != target_order {
            best_other = best_other.max(harmonic_power_db[order]);
        }
    }
    let margin = harmonic_power_db[target_order] - best_other;
    Ok(SpectrumReport {
        f_in: bins.f_in,
        harmonic_power_db,
        target_order,
        dominance_margin_db: margin,
        dominant: margin >= real(DOMINANCE_MARGIN_DB),
    })
}

/// Options for [`max_operating_frequency`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxFreqOpts<T> {
    pub f_lo: T,
    pub f_hi: T,
    /// Relative frequency resolution of the search.
    pub resolution: T,
    pub margin_db: T,
    pub samples_per_period: usize,
    pub n_periods: usize,
    pub skip_periods: usize,
    pub max_order: usize,
}

impl<T: Real> Default for MaxFreqOpts<T> {
    fn default() -> Self {
        MaxFreqOpts {
            f_lo: real(1e4),
            f_hi: real(1e12),
            resolution: real(0.01),
            margin_db: real(DOMINANCE_MARGIN_DB),
            samples_per_period: DEFAULT_SAMPLES_PER_PERIOD,
            n_periods: DEFAULT_N_PERIODS,
            skip_periods: DEFAULT_SKIP_PERIODS,
            max_order: DEFAULT_MAX_ORDER,
        }
    }
}

/// Result of the maximum-operating-frequency search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxFreqResult<T> {
    /// Largest frequency (Hz) holding the required dominance margin.
    pub f_max: T,
    /// False when the margin was found non-monotone past the boundary (the
    /// bracket was widened and the higher boundary reported).
    pub monotone: bool,
}

/// Dominance margin of a (circuit, drive) pair at one frequency under
/// single-pole dynamics.
pub fn margin_at<T: Real>(
    circuit: &Circuit<T>,
    drive: &Drive<T>,
    f: T,
    target_order: usize,
    opts: &MaxFreqOpts<T>,
) -> Result<T, SpectrumError> {
    let probe = Drive { f_in: f, ..*drive };
    let wave = simulate_transient(
        circuit,
        &probe,
        opts.samples_per_period,
        opts.n_periods,
        Dynamics::SinglePole,
    )?;
    let settled = wave.skip_periods(opts.skip_periods)?;
    let report = harmonic_report(&power_spectrum(&settled), target_order, opts.max_order)?;
    Ok(report.dominance_margin_db)
}

/// Binary search over log-frequency for the largest input frequency at
/// which the target harmonic still dominates by `opts.margin_db`.
///
/// Requires the margin to hold at `opts.f_lo`. If it still holds at
/// `opts.f_hi` the search reports `f_hi` (no roll-off in range). After the
/// bisection the region above the boundary is probed; a still-passing
/// higher frequency widens the bracket, re-bisects, and clears the
/// `monotone` flag.
pub fn max_operating_frequency<T: Real>(
    circuit: &Circuit<T>,
    drive: &Drive<T>,
    target_order: usize,
    opts: &MaxFreqOpts<T>,
) -> Result<MaxFreqResult<T>, SpectrumError> {
    if !(T::zero() < opts.f_lo && opts.f_lo < opts.f_hi) {
        return Err(SpectrumError::BadFrequencyBracket);
    }
    let margin_lo = margin_at(circuit, drive, opts.f_lo, target_order, opts)?;
    if margin_lo < opts.margin_db {
        return Err(SpectrumError::NotDominantAtStart {
            margin_db: format!("{margin_lo}"),
            required_db: format!("{}", opts.margin_db),
        });
    }
    if margin_at(circuit, drive, opts.f_hi, target_order, opts)? >= opts.margin_db {
        return Ok(MaxFreqResult { f_max: opts.f_hi, monotone: true });
    }
    // geometric bisection: lo always passes, hi always fails
    let bisect = |mut lo: T, mut hi: T| -> Result<T, SpectrumError> {
        while hi / lo > T::one() + opts.resolution {
            let mid = (lo * hi).sqrt();
            if mid <= lo || mid >= hi {
                break;
            }
            if margin_at(circuit, drive, mid, target_order, opts)? >= opts.margin_db {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    };
    let boundary = bisect(opts.f_lo, opts.f_hi)?;
    // probe above the boundary for non-monotone margin
    let mut highest_pass = T::zero();
    for factor in [1.1, 1.5, 2.0, 4.0, 8.0] {
        let f = (boundary * real(factor)).min(opts.f_hi);
        if f <= boundary {
            continue;
        }
        if margin_at(circuit, drive, f, target_order, opts)? >= opts.margin_db {
            highest_pass = highest_pass.max(f);
        }
    }
    if highest_pass > T::zero() {
        let widened = bisect(highest_pass, opts.f_hi)?;
        return Ok(MaxFreqResult { f_max: widened, monotone: false });
    }
    Ok(MaxFreqResult { f_max: boundary, monotone: true })
}

/// Mean output current times the supply: the DC power draw of a
/// steady-state waveform (discard settling periods first).
pub fn estimate_power<T: Real>(waveform: &Waveform<T>, vdd: T) -> T {
    if waveform.samples.is_empty() {
        return T::zero();
    }
    let sum = waveform.samples.iter().fold(T::zero(), |acc, &s| acc + s);
    sum / T::from_usize(waveform.samples.len()).expect("length fits scalar") * vdd
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{CircuitSpec, Preset};

    fn sine_wave(orders: &[(usize, f64)], spp: usize, n_periods: usize) -> Waveform<f64> {
        let n = spp * n_periods;
        let samples = (0..n)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * (i % spp) as f64 / spp as f64;
                orders.iter().map(|&(m, a)| a * (m as f64 * theta).sin()).sum()
            })
            .collect();
        Waveform { dt: 1e-6 / spp as f64, samples, n_periods, samples_per_period: spp }
    }

    #[test]
    fn linear_map_passes_sine_through() {
        let drive = Drive::new(0.1, 0.5, 1e6);
        let wave = simulate_map(|v| 3.0 * v + 0.2, &drive, 128, 8).unwrap();
        let report = harmonic_report(&power_spectrum(&wave), 1, 6).unwrap();
        assert_eq!(report.harmonic_power_db[1], 0.0);
        for order in 2..=6 {
            assert!(report.harmonic_power_db[order] <= -200.0, "order {order}");
        }
        assert!(report.dominant);
    }

    #[test]
    fn pure_sine_concentrates_in_order_one() {
        let wave = sine_wave(&[(1, 1.0)], 256, 8);
        let bins = power_spectrum(&wave);
        assert!((bins.harmonic_power(1) - 0.5).abs() < 1e-12); // mean square of unit sine
        let report = harmonic_report(&bins, 1, 6).unwrap();
        for order in 2..=6 {
            assert!(report.harmonic_power_db[order] <= -200.0);
        }
    }

    #[test]
    fn quadratic_at_vertex_gives_only_dc_and_second() {
        let drive = Drive::new(0.3, 0.4, 1e6);
        let wave = simulate_map(|v| (v - 0.3) * (v - 0.3), &drive, 256, 8).unwrap();
        let report = harmonic_report(&power_spectrum(&wave), 2, 6).unwrap();
        assert!(report.dominant);
        for order in [1usize, 3, 4, 5, 6] {
            assert!(
                report.harmonic_power_db[order] <= -100.0,
                "order {order}: {}",
                report.harmonic_power_db[order]
            );
        }
        // absent target: order 3 fails with a deeply negative margin
        let fail = harmonic_report(&power_spectrum(&wave), 3, 6).unwrap();
        assert!(!fail.dominant);
        assert!(fail.dominance_margin_db <= -100.0);
    }

    #[test]
    fn two_tone_ratio_is_six_db() {
        let wave = sine_wave(&[(1, 1.0), (3, 0.5)], 256, 8);
        let report = harmonic_report(&power_spectrum(&wave), 1, 6).unwrap();
        let ratio = report.harmonic_power_db[1] - report.harmonic_power_db[3];
        assert!((ratio - 20.0 * 2.0f64.log10()).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn parseval_holds_to_1e9_relative() {
        let drive = Drive::new(0.1, 0.6, 2e6);
        let wave = simulate_map(|v: f64| v.sin() + 0.3 * v * v, &drive, 192, 6).unwrap();
        let bins = power_spectrum(&wave);
        let mean = wave.samples.iter().sum::<f64>() / wave.samples.len() as f64;
        let ms: f64 = wave.samples.iter().map(|&s| (s - mean) * (s - mean)).sum::<f64>()
            / wave.samples.len() as f64;
        let total: f64 = bins.bin_powers[1..].iter().sum();
        assert!(((total - ms) / ms).abs() < 1e-9, "{total} vs {ms}");
    }

    #[test]
    fn phase_shift_leaves_bin_powers_unchanged() {
        let base = Drive::new(0.05, 0.4, 1e6);
        let shifted = Drive { phase: 1.234, ..base };
        let transfer = |v: f64| (3.0 * v).sin() + 0.1 * v;
        let a = power_spectrum(&simulate_map(transfer, &base, 256, 8).unwrap());
        let b = power_spectrum(&simulate_map(transfer, &shifted, 256, 8).unwrap());
        for order in 1..=6 {
            let pa = a.harmonic_power(order).max(1e-300);
            let pb = b.harmonic_power(order).max(1e-300);
            let drift_db = 10.0 * (pa / pb).log10().abs();
            assert!(drift_db <= 1e-9, "order {order}: drift {drift_db} dB");
        }
    }

    #[test]
    fn quasi_static_bins_are_frequency_invariant_bit_exact() {
        let c = crate::circuit::Circuit::new(CircuitSpec::<f64>::preset_default(Preset::P2nPar))
            .unwrap();
        let d1 = Drive::new(0.0, 0.3, 1e3);
        let d2 = Drive { f_in: 7.77e8, ..d1 };
        let w1 = simulate_transient(&c, &d1, 64, 4, Dynamics::QuasiStatic).unwrap();
        let w2 = simulate_transient(&c, &d2, 64, 4, Dynamics::QuasiStatic).unwrap();
        assert_eq!(power_spectrum(&w1).bin_powers, power_spectrum(&w2).bin_powers);
    }

    #[test]
    fn quasi_static_equals_single_pole_when_degenerate() {
        // default devices: gate_pole = inf; default load: c = 0
        let c = crate::circuit::Circuit::new(CircuitSpec::<f64>::preset_default(Preset::NpPar))
            .unwrap();
        let drive = Drive::new(0.2, 0.5, 1e6);
        let qs = simulate_transient(&c, &drive, 64, 4, Dynamics::QuasiStatic).unwrap();
        let sp = simulate_transient(&c, &drive, 64, 4, Dynamics::SinglePole).unwrap();
        assert_eq!(qs.samples, sp.samples);
    }

    #[test]
    fn one_pole_step_response_matches_analytic() {
        let tau = 1.0;
        let dt = tau / 1000.0;
        let mut filter = OnePole::new(tau, 0.0);
        let mut y = 0.0;
        for _ in 0..1000 {
            y = filter.step(1.0, dt);
        }
        let expected = 1.0 - (-1.0f64).exp();
        assert!(
            ((y - expected) / expected).abs() < 1e-3,
            "step response {y} vs {expected}"
        );
    }

    #[test]
    fn skip_periods_trims_settling() {
        let wave = sine_wave(&[(1, 1.0)], 32, 6);
        let trimmed = wave.skip_periods(2).unwrap();
        assert_eq!(trimmed.n_periods, 4);
        assert_eq!(trimmed.samples.len(), 4 * 32);
        assert!(wave.skip_periods(6).is_err());
    }

    #[test]
    fn report_rejects_bad_target_order() {
        let wave = sine_wave(&[(1, 1.0)], 64, 4);
        let bins = power_spectrum(&wave);
        assert!(matches!(
            harmonic_report(&bins, 7, 6),
            Err(SpectrumError::BadTargetOrder { .. })
        ));
        assert!(matches!(
            harmonic_report(&bins, 0, 6),
            Err(SpectrumError::BadTargetOrder { .. })
        ));
    }

    #[test]
    fn max_frequency_hits_upper_bound_without_rolloff() {
        // quasi-static devices (infinite gate pole, zero load C) never lose
        // dominance, so the search reports the configured upper bound
        let mut c = crate::circuit::Circuit::new(CircuitSpec::<f64>::preset_default(Preset::P2nPar))
            .unwrap();
        let names: Vec<String> = c.spec().devices.iter().map(|(n, _)| n.clone()).collect();
        for n in &names {
            c.set_vth_exact(n, 0.35).unwrap();
        }
        let drive = Drive::new(0.0, 0.05, 1e5);
        let opts = MaxFreqOpts { f_lo: 1e5, f_hi: 1e9, ..MaxFreqOpts::default() };
        let result = max_operating_frequency(&c, &drive, 2, &opts).unwrap();
        assert_eq!(result.f_max, 1e9);
        assert!(result.monotone);
    }

    #[test]
    fn estimate_power_basics() {
        let zero = Waveform { dt: 1e-9, samples: vec![0.0; 64], n_periods: 1, samples_per_period: 64 };
        assert_eq!(estimate_power(&zero, 1.0), 0.0);
        let constant = Waveform { dt: 1e-9, samples: vec![1e-6; 64], n_periods: 1, samples_per_period: 64 };
        assert!((estimate_power(&constant, 1.0) - 1e-6_f64).abs() < 1e-20);
        // mean of a sine rides on its offset regardless of amplitude
        for amp in [0.1, 2.5] {
            let wave = Waveform {
                dt: 1e-9,
                samples: (0..256)
                    .map(|i| {
                        1e-6 + amp * (2.0 * std::f64::consts::PI * i as f64 / 64.0).sin()
                    })
                    .collect(),
                n_periods: 4,
                samples_per_period: 64,
            };
            let p = estimate_power(&wave, 2.0);
            assert!((p - 2e-6).abs() < 1e-12, "amp {amp}: {p}");
        }
    }
}
