//! Band-pass design at the two sampling rates used by the pipeline.

use xgwo_svm::signal::{self, WindowKind};

fn main() -> xgwo_svm::Result<()> {
    for fs in [128.0, 700.0] {
        let taps = signal::default_taps(fs);
        let f = signal::design_bandpass(fs, 3.0, 100.0, taps, WindowKind::Hamming)?;
        println!(
            "fs = {fs} Hz, {} taps, pass band 3-{:.1} Hz{}",
            f.len(),
            f.f_high_effective_hz,
            if f.upper_clamped() { " (upper cutoff clamped)" } else { "" }
        );
        for hz in [0.5, 1.0, 3.0, 10.0, 50.0] {
            let g = f.freq_response(hz).norm();
            println!("  |H({hz:>4} Hz)| = {g:.4} ({:+.1} dB)", 20.0 * g.log10());
        }
        let tone: Vec<f64> = (0..(10.0 * fs) as usize)
            .map(|i| (2.0 * std::f64::consts::PI * 0.5 * i as f64 / fs).sin())
            .collect();
        let out = f.apply(&tone)?;
        let rms = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        println!("  0.5 Hz tone RMS ratio {:.4}", rms(&out) / rms(&tone));
    }
    Ok(())
}
