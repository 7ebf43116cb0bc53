//! Synthetic baseband waveforms: Gray-mapped PSK/QAM modulators with
//! rectangular pulses, per-device hardware impairment signatures, hard
//! decision demodulation and BER measurement.

use num_complex::Complex64;
use rand::RngExt;

use crate::dsp::IqBuffer;
use crate::error::{Error, Result};
use crate::rng::{gauss, stream};

/// Modulation schemes available to the transmitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModScheme {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
}

impl ModScheme {
    pub const ALL: [ModScheme; 4] = [ModScheme::Bpsk, ModScheme::Qpsk, ModScheme::Qam16, ModScheme::Qam64];

    pub fn bits_per_symbol(self) -> usize {
        match self {
            ModScheme::Bpsk => 1,
            ModScheme::Qpsk => 2,
            ModScheme::Qam16 => 4,
            ModScheme::Qam64 => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModScheme::Bpsk => "bpsk",
            ModScheme::Qpsk => "qpsk",
            ModScheme::Qam16 => "qam16",
            ModScheme::Qam64 => "qam64",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "bpsk" => Ok(ModScheme::Bpsk),
            "qpsk" => Ok(ModScheme::Qpsk),
            "qam16" | "16qam" => Ok(ModScheme::Qam16),
            "qam64" | "64qam" => Ok(ModScheme::Qam64),
            other => Err(Error::invalid(format!("unknown modulation scheme '{other}'"))),
        }
    }

    /// Constellation points indexed by bit pattern (MSB first), normalized to
    /// unit average power. Bit pattern 0 maps to the most positive levels.
    pub fn constellation(self) -> Vec<Complex64> {
        match self {
            ModScheme::Bpsk => vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            ModScheme::Qpsk => square_constellation(1),
            ModScheme::Qam16 => square_constellation(2),
            ModScheme::Qam64 => square_constellation(3),
        }
    }
}

/// Square QAM with `bits_per_axis` Gray-coded bits on each of I and Q.
fn square_constellation(bits_per_axis: usize) -> Vec<Complex64> {
    let levels = 1usize << bits_per_axis;
    // Mean square of the odd-integer lattice {±1, ±3, ...} per axis.
    let axis_ms: f64 = (0..levels)
        .map(|p| {
            let l = (levels - 1) as f64 - 2.0 * p as f64;
            l * l
        })
        .sum::<f64>()
        / levels as f64;
    let scale = 1.0 / (2.0 * axis_ms).sqrt();
    let size = levels * levels;
    (0..size)
        .map(|idx| {
            let i_bits = idx >> bits_per_axis;
            let q_bits = idx & (levels - 1);
            Complex64::new(axis_level(i_bits, levels), axis_level(q_bits, levels)) * scale
        })
        .collect()
}

/// Decode the Gray-coded axis bits to an amplitude level.
fn axis_level(gray: usize, levels: usize) -> f64 {
    let mut p = gray;
    let mut shift = 1;
    while shift < usize::BITS as usize {
        p ^= p >> shift;
        shift <<= 1;
    }
    (levels - 1) as f64 - 2.0 * p as f64
}

/// Hardware signature of one transmitter: gain imbalance and phase skew
/// between the I and Q arms, DC offset, and oscillator phase noise.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceImpairment {
    pub iq_gain_imbalance: f64,
    pub iq_phase_skew: f64,
    pub dc_offset: Complex64,
    pub phase_noise_std: f64,
}

impl DeviceImpairment {
    pub fn new(
        iq_gain_imbalance: f64,
        iq_phase_skew: f64,
        dc_offset: Complex64,
        phase_noise_std: f64,
    ) -> Result<Self> {
        if !(0.8..=1.2).contains(&iq_gain_imbalance) {
            return Err(Error::invalid("iq_gain_imbalance must lie in [0.8, 1.2]"));
        }
        if dc_offset.norm() > 0.1 {
            return Err(Error::invalid("|dc_offset| must not exceed 0.1"));
        }
        if !(phase_noise_std >= 0.0 && phase_noise_std.is_finite()) {
            return Err(Error::invalid("phase_noise_std must be a finite nonnegative real"));
        }
        Ok(DeviceImpairment { iq_gain_imbalance, iq_phase_skew, dc_offset, phase_noise_std })
    }

    pub fn identity() -> Self {
        DeviceImpairment {
            iq_gain_imbalance: 1.0,
            iq_phase_skew: 0.0,
            dc_offset: Complex64::new(0.0, 0.0),
            phase_noise_std: 0.0,
        }
    }
}

/// Map bits onto constellation symbols and hold each for `sps` samples
/// (rectangular pulse). Bits are MSB-first within each symbol.
pub fn modulate(bits: &[u8], scheme: ModScheme, sps: usize) -> Result<IqBuffer> {
    let k = scheme.bits_per_symbol();
    if bits.is_empty() || bits.len() % k != 0 {
        return Err(Error::invalid(format!(
            "bit count {} is not a positive multiple of {k}",
            bits.len()
        )));
    }
    if sps == 0 {
        return Err(Error::invalid("sps must be at least 1"));
    }
    let points = scheme.constellation();
    let mut samples = Vec::with_capacity(bits.len() / k * sps);
    for chunk in bits.chunks_exact(k) {
        let mut idx = 0usize;
        for &b in chunk {
            idx = (idx << 1) | (b & 1) as usize;
        }
        let point = points[idx];
        samples.extend(std::iter::repeat(point).take(sps));
    }
    IqBuffer::new(samples)
}

/// Imprint a device signature on a waveform. Deterministic given the seed:
/// the phase noise is a Gaussian random walk drawn from a dedicated stream.
pub fn apply_impairment(x: &IqBuffer, imp: &DeviceImpairment, rng_seed: u64) -> IqBuffer {
    let mut rng = stream(rng_seed);
    let mut phase = 0.0f64;
    let (sin_skew, cos_skew) = imp.iq_phase_skew.sin_cos();
    let samples = x
        .samples()
        .iter()
        .map(|s| {
            phase += imp.phase_noise_std * gauss(&mut rng);
            let distorted = Complex64::new(
                imp.iq_gain_imbalance * s.re,
                sin_skew * s.re + cos_skew * s.im,
            );
            distorted * Complex64::from_polar(1.0, phase) + imp.dc_offset
        })
        .collect();
    IqBuffer::new(samples).expect("impairment preserves finiteness")
}

/// Nearest-point hard decisions on per-symbol sample averages. Ties resolve
/// to the lowest constellation index.
pub fn demodulate_hard(y: &IqBuffer, scheme: ModScheme, sps: usize) -> Result<Vec<u8>> {
    if sps == 0 {
        return Err(Error::invalid("sps must be at least 1"));
    }
    if y.len() % sps != 0 {
        return Err(Error::invalid(format!(
            "buffer length {} is not a multiple of sps {sps}",
            y.len()
        )));
    }
    let k = scheme.bits_per_symbol();
    let points = scheme.constellation();
    let mut bits = Vec::with_capacity(y.len() / sps * k);
    for block in y.samples().chunks_exact(sps) {
        let avg = block.iter().sum::<Complex64>() / sps as f64;
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for (idx, p) in points.iter().enumerate() {
            let d = (avg - p).norm_sqr();
            if d < best_dist {
                best_dist = d;
                best = idx;
            }
        }
        for shift in (0..k).rev() {
            bits.push(((best >> shift) & 1) as u8);
        }
    }
    Ok(bits)
}

/// Bit error rate: Hamming distance over length.
pub fn measure_ber(tx_bits: &[u8], rx_bits: &[u8]) -> Result<f64> {
    if tx_bits.len() != rx_bits.len() {
        return Err(Error::invalid(format!(
            "bit sequences differ in length: {} vs {}",
            tx_bits.len(),
            rx_bits.len()
        )));
    }
    if tx_bits.is_empty() {
        return Err(Error::invalid("bit sequences must be nonempty"));
    }
    let errors = tx_bits
        .iter()
        .zip(rx_bits)
        .filter(|(a, b)| (**a & 1) != (**b & 1))
        .count();
    Ok(errors as f64 / tx_bits.len() as f64)
}

/// Generate `n` random bits from a seeded stream.
pub fn random_bits(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = stream(seed);
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}
