use femult::circuit::Circuit;
use femult::netlist::{CircuitSpec, Preset};
use femult::spectrum::{harmonic_report, power_spectrum, simulate_transient, Drive, Dynamics};

fn margin(c: &Circuit<f64>, vo: f64, a: f64, order: usize) -> f64 {
    let d = Drive { v_op: vo, amplitude: a, f_in: 1e6, phase: 0.0 };
    let w = simulate_transient(c, &d, 64, 4, Dynamics::QuasiStatic).unwrap();
    harmonic_report(&power_spectrum(&w), order, 6).unwrap().dominance_margin_db
}

fn best_for(c: &Circuit<f64>, order: usize) -> (f64, f64, f64, usize) {
    let curve = c.transfer_sweep(-1.5, 1.5, 1201).unwrap();
    let ex = &curve.extrema;
    if ex.len() != 3 { return (f64::NEG_INFINITY, 0.0, 0.0, ex.len()); }
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0, ex.len());
    let x0 = ex[0].vin; let x2 = ex[2].vin;
    let span = x2 - x0;
    for i in 0..=30 {
        let vo = x0 - 0.3 * span + 1.6 * span * i as f64 / 30.0;
        for j in 1..=30 {
            let a = span * (0.05 + 1.4 * j as f64 / 30.0);
            let m = margin(c, vo, a, order);
            if m > best.0 { best = (m, vo, a, ex.len()); }
        }
    }
    best
}

fn main() {
    // thresholds programmable through zero: complementary windows overlap,
    // devices conduct square-law in the interior
    for base in [-0.3f64, -0.15, 0.0, 0.1] {
        for delta in [0.15f64, 0.25, 0.35] {
            let mut spec = CircuitSpec::<f64>::preset_default(Preset::N4Serial);
            for (_, p) in spec.devices.iter_mut() { p.vth_low = -0.8; p.vth_high = 0.8; }
            let mut c = Circuit::new(spec).unwrap();
            for (name, off) in [("M1", -delta), ("M2", delta), ("M3", delta), ("M4", -delta)] {
                c.set_vth_exact(name, base + off).unwrap();
            }
            let b3 = best_for(&c, 3);
            let b4 = best_for(&c, 4);
            println!("base={base:+.2} delta={delta:.2}: ex={} 3rd {:.1} dB (vo {:+.3} A {:.3}) | 4th {:.1} dB (vo {:+.3} A {:.3})",
                b3.3, b3.0, b3.1, b3.2, b4.0, b4.1, b4.2);
        }
    }
}
