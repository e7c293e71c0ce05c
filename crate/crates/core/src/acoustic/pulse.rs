use super::ProbeConfig;

/// Envelope level below which the pulse is truncated.
const SUPPORT_FLOOR: f64 = 1e-4;

/// Pulse-echo kernel `h`: a Gaussian-modulated cosine.
///
/// The sampled form is kept for inspection and for DAS; the system matrix
/// evaluates [`PulseKernel::eval`] at exact delays.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseKernel {
    samples: Vec<f64>,
    sample_period_s: f64,
    center_index: usize,
    carrier_hz: f64,
    envelope_std_s: f64,
    half_support_s: f64,
}

impl PulseKernel {
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_period_s(&self) -> f64 {
        self.sample_period_s
    }

    pub fn center_index(&self) -> usize {
        self.center_index
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn envelope_std_s(&self) -> f64 {
        self.envelope_std_s
    }

    pub fn half_support_s(&self) -> f64 {
        self.half_support_s
    }

    /// `h(t)`, zero outside the truncated support. Peak `h(0) = 1`.
    pub fn eval(&self, t: f64) -> f64 {
        if t.abs() > self.half_support_s {
            return 0.0;
        }
        let s = self.envelope_std_s;
        (-t * t / (2.0 * s * s)).exp() * (2.0 * std::f64::consts::PI * self.carrier_hz * t).cos()
    }
}

/// Gaussian-modulated cosine whose −6 dB (half-amplitude) spectral width is
/// `bandwidth_ratio × center_frequency`.
pub fn build_pulse(probe: &ProbeConfig) -> PulseKernel {
    let fc = probe.center_frequency_hz;
    // |H(f)| ∝ exp(-(f-fc)²/2σ_f²); half amplitude at |f-fc| = σ_f·sqrt(2 ln 2)
    let sigma_f = probe.bandwidth_ratio * fc / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    let envelope_std_s = 1.0 / (2.0 * std::f64::consts::PI * sigma_f);
    let half_support_s = envelope_std_s * (-2.0 * SUPPORT_FLOOR.ln()).sqrt();
    let dt = 1.0 / probe.sampling_rate_hz;
    let center_index = (half_support_s / dt).floor() as usize;
    let mut kernel = PulseKernel {
        samples: Vec::new(),
        sample_period_s: dt,
        center_index,
        carrier_hz: fc,
        envelope_std_s,
        half_support_s,
    };
    kernel.samples = (0..=2 * center_index)
        .map(|i| kernel.eval((i as f64 - center_index as f64) * dt))
        .collect();
    kernel
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picmus_pulse_sampling() {
        let probe = ProbeConfig::default();
        let pulse = build_pulse(&probe);
        let samples_per_cycle = probe.sampling_rate_hz / probe.center_frequency_hz;
        assert!((samples_per_cycle - 3.994).abs() < 1e-3);
        assert_eq!(samples_per_cycle.round(), 4.0);
        let c = pulse.center_index();
        assert_eq!(pulse.samples()[c], 1.0);
        for i in 1..=c {
            assert_eq!(pulse.samples()[c + i], pulse.samples()[c - i]);
        }
        let max = pulse.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert_eq!(max, 1.0);
    }

    #[test]
    fn spectrum_band_edges() {
        let probe = ProbeConfig::default();
        let pulse = build_pulse(&probe);
        let n = 8192usize;
        let fs = probe.sampling_rate_hz;
        let bin = fs / n as f64;
        // direct DFT magnitude over the positive half
        let mag: Vec<f64> = (0..n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, h) in pulse.samples().iter().enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                    re += h * ph.cos();
                    im += h * ph.sin();
                }
                re.hypot(im)
            })
            .collect();
        let (peak_k, peak) = mag.iter().enumerate().fold((0, 0.0), |b, (k, &m)| if m > b.1 { (k, m) } else { b });
        let lo = (0..peak_k).rev().find(|&k| mag[k] < peak / 2.0).unwrap();
        let hi = (peak_k..n / 2).find(|&k| mag[k] < peak / 2.0).unwrap();
        let fc = probe.center_frequency_hz;
        let (want_lo, want_hi) = (fc * (1.0 - 0.335), fc * (1.0 + 0.335));
        assert!(((lo as f64 + 0.5) * bin - want_lo).abs() <= bin, "{} vs {want_lo}", lo as f64 * bin);
        assert!(((hi as f64 - 0.5) * bin - want_hi).abs() <= bin, "{} vs {want_hi}", hi as f64 * bin);
    }
}
