//! Stochastic channel between transmitter and receiver: multipath fading as a
//! short normalized FIR, AWGN pinned to a target SNR, and an optional
//! additive jammer. All randomness derives from (seed, step index, draw
//! index), so any stream can be replayed exactly.

use num_complex::Complex64;
use rand::RngExt;

use crate::dsp::IqBuffer;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, gauss, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    /// Target SNR in dB; `None` disables noise entirely.
    snr_db: Option<f64>,
    /// Path gains, kept at unit total power.
    fading_taps: Vec<Complex64>,
    /// Per-step complex Gaussian drift applied to each path gain.
    fading_drift_std: f64,
    /// Jammer power in dB relative to the (post-fading) signal power;
    /// `None` disables the jammer.
    jammer_power_db: Option<f64>,
    rng_seed: u64,
    step_index: u64,
    draws_this_step: u64,
}

impl ChannelModel {
    pub fn new(
        snr_db: Option<f64>,
        fading_taps: Vec<Complex64>,
        fading_drift_std: f64,
        jammer_power_db: Option<f64>,
        rng_seed: u64,
    ) -> Result<Self> {
        if fading_taps.is_empty() {
            return Err(Error::invalid("channel needs at least one path gain"));
        }
        if !fading_taps.iter().all(|g| g.re.is_finite() && g.im.is_finite()) {
            return Err(Error::invalid("path gains must be finite"));
        }
        if !(fading_drift_std >= 0.0 && fading_drift_std.is_finite()) {
            return Err(Error::invalid("fading_drift_std must be a finite nonnegative real"));
        }
        let mut model = ChannelModel {
            snr_db,
            fading_taps,
            fading_drift_std,
            jammer_power_db,
            rng_seed,
            step_index: 0,
            draws_this_step: 0,
        };
        model.normalize_gains()?;
        Ok(model)
    }

    /// Single unit path, no noise shaping beyond AWGN at `snr_db`.
    pub fn flat(snr_db: Option<f64>, rng_seed: u64) -> Self {
        ChannelModel::new(snr_db, vec![Complex64::new(1.0, 0.0)], 0.0, None, rng_seed)
            .expect("flat channel is always valid")
    }

    pub fn snr_db(&self) -> Option<f64> {
        self.snr_db
    }

    pub fn fading_taps(&self) -> &[Complex64] {
        &self.fading_taps
    }

    pub fn jammer_power_db(&self) -> Option<f64> {
        self.jammer_power_db
    }

    pub fn set_jammer_power_db(&mut self, db: Option<f64>) {
        self.jammer_power_db = db;
    }

    fn normalize_gains(&mut self) -> Result<()> {
        let power: f64 = self.fading_taps.iter().map(|g| g.norm_sqr()).sum();
        if power <= 0.0 {
            return Err(Error::invalid("path gains must carry nonzero power"));
        }
        let scale = 1.0 / power.sqrt();
        for g in &mut self.fading_taps {
            *g *= scale;
        }
        Ok(())
    }

    /// Propagate one waveform: fading convolution, then jammer burst, then
    /// AWGN sized against the post-fading signal power. Each call within a
    /// step consumes a fresh draw index.
    pub fn apply(&mut self, x: &IqBuffer) -> IqBuffer {
        let draw = self.draws_this_step;
        self.draws_this_step += 1;
        let mut rng = stream(derive_seed(
            derive_seed(self.rng_seed, "channel-apply", self.step_index),
            "draw",
            draw,
        ));

        let mut samples = convolve_truncated(x.samples(), &self.fading_taps);
        let n = samples.len();
        let signal_power = samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;

        if let Some(jam_db) = self.jammer_power_db {
            // 50% duty cycle: one contiguous burst at a random offset whose
            // instantaneous power is doubled so the buffer-average relative
            // power equals jam_db.
            let burst_len = (n / 2).max(1);
            let start = rng.random_range(0..=(n - burst_len));
            let burst_power = 2.0 * signal_power * 10f64.powf(jam_db / 10.0);
            let comp_std = (burst_power / 2.0).sqrt();
            for s in &mut samples[start..start + burst_len] {
                *s += Complex64::new(comp_std * gauss(&mut rng), comp_std * gauss(&mut rng));
            }
        }

        if let Some(snr_db) = self.snr_db {
            let noise_power = signal_power / 10f64.powf(snr_db / 10.0);
            let comp_std = (noise_power / 2.0).sqrt();
            for s in &mut samples {
                *s += Complex64::new(comp_std * gauss(&mut rng), comp_std * gauss(&mut rng));
            }
        }

        IqBuffer::new(samples).expect("channel output stays finite")
    }

    /// Advance the channel one coherence step: drift every path gain and
    /// renormalize to unit total power.
    pub fn step(&mut self) {
        if self.fading_drift_std > 0.0 {
            let mut rng = stream(derive_seed(self.rng_seed, "channel-drift", self.step_index));
            for g in &mut self.fading_taps {
                *g += Complex64::new(
                    self.fading_drift_std * gauss(&mut rng),
                    self.fading_drift_std * gauss(&mut rng),
                );
            }
            self.normalize_gains().expect("drifted gains keep nonzero power");
        }
        self.step_index += 1;
        self.draws_this_step = 0;
    }
}

fn convolve_truncated(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (m, &tap) in h.iter().enumerate() {
        if m >= n {
            break;
        }
        for i in m..n {
            out[i] += tap * x[i - m];
        }
    }
    out
}

/// A named channel regime: an SNR window plus a fading/jammer profile from
/// which per-episode [`ChannelModel`]s are drawn.
///
/// Echo phases concentrate around `path_phase_center`: the regime models a
/// quasi-static reflector geometry whose echo strength, exact phase, and SNR
/// vary per realization and drift over time.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPreset {
    pub name: &'static str,
    /// Uniform SNR window in dB; `None` means noiseless.
    pub snr_db_range: Option<(f64, f64)>,
    /// Number of fading paths (1 = flat).
    pub num_paths: usize,
    /// Relative magnitude scale of secondary paths; path k is drawn with
    /// magnitude ~ spread^k.
    pub path_spread: f64,
    /// Center and standard deviation (radians) of the echo phase draw.
    pub path_phase_center: f64,
    pub path_phase_std: f64,
    pub fading_drift_std: f64,
    pub jammer_power_db: Option<f64>,
}

impl ChannelPreset {
    /// Draw one concrete channel realization for this regime.
    pub fn sample_model(&self, seed: u64) -> ChannelModel {
        let mut rng = stream(derive_seed(seed, "preset-realization", 0));
        let snr_db = self.snr_db_range.map(|(lo, hi)| rng.random_range(lo..=hi));
        let mut taps = Vec::with_capacity(self.num_paths);
        taps.push(Complex64::new(1.0, 0.0));
        let mut magnitude = 1.0;
        for _ in 1..self.num_paths {
            magnitude *= self.path_spread;
            let mag = magnitude * rng.random_range(0.5..1.0);
            let phase = self.path_phase_center + self.path_phase_std * gauss(&mut rng);
            taps.push(Complex64::from_polar(mag, phase));
        }
        ChannelModel::new(
            snr_db,
            taps,
            self.fading_drift_std,
            self.jammer_power_db,
            derive_seed(seed, "channel-stream", 0),
        )
        .expect("preset parameters are valid")
    }
}

/// SNR regimes used across the experiments. `high_snr_train` is the clean
/// regime the classifier is trained under; the others are deployment regimes
/// with a strong quasi-static echo the classifier never saw.
pub fn preset(name: &str) -> Result<ChannelPreset> {
    let deployed_fading = ChannelPreset {
        name: "",
        snr_db_range: None,
        num_paths: 2,
        path_spread: 0.55,
        path_phase_center: std::f64::consts::PI,
        path_phase_std: 0.5,
        fading_drift_std: 0.01,
        jammer_power_db: None,
    };
    let p = match name {
        "high_snr_train" => ChannelPreset {
            name: "high_snr_train",
            snr_db_range: Some((16.0, 30.0)),
            num_paths: 1,
            path_spread: 0.0,
            path_phase_center: 0.0,
            path_phase_std: 0.0,
            fading_drift_std: 0.0,
            jammer_power_db: None,
        },
        "mid_snr" => ChannelPreset {
            name: "mid_snr",
            snr_db_range: Some((6.0, 14.0)),
            ..deployed_fading
        },
        "low_mid_snr" => ChannelPreset {
            name: "low_mid_snr",
            snr_db_range: Some((-10.0, 14.0)),
            ..deployed_fading
        },
        "low_snr" => ChannelPreset {
            name: "low_snr",
            snr_db_range: Some((-10.0, 4.0)),
            ..deployed_fading
        },
        "adv" => ChannelPreset {
            name: "adv",
            snr_db_range: Some((6.0, 14.0)),
            jammer_power_db: Some(0.0),
            ..deployed_fading
        },
        other => return Err(Error::Config(format!("unknown channel preset '{other}'"))),
    };
    Ok(p)
}

/// Preset sequence cycled per episode. Plain names yield one preset;
/// "switching" alternates two mid-SNR regimes whose echo geometries are
/// opposed, so no single filter suits both.
pub fn preset_cycle(name: &str) -> Result<Vec<ChannelPreset>> {
    if name == "switching" {
        let mut a = preset("mid_snr")?;
        a.name = "switching_a";
        a.path_phase_center = 0.0;
        a.path_phase_std = 0.35;
        let mut b = preset("mid_snr")?;
        b.name = "switching_b";
        b.path_phase_center = std::f64::consts::PI;
        b.path_phase_std = 0.35;
        return Ok(vec![a, b]);
    }
    Ok(vec![preset(name)?])
}
