//! Complex FIR filtering, the tap box constraint, and receiver-side
//! compensation of the synthesis filter.
//!
//! Filtering is length-preserving: samples before the start of the buffer are
//! taken as zero and the convolution tail is truncated, so `output.len() ==
//! input.len()` always holds.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// A finite sequence of complex baseband samples (interleaved I/Q pairs when
/// serialized). The universal signal carrier of the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct IqBuffer {
    samples: Vec<Complex64>,
}

impl IqBuffer {
    /// Wrap samples, rejecting empty buffers and non-finite values.
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("IqBuffer must contain at least one sample"));
        }
        if !samples.iter().all(|s| s.re.is_finite() && s.im.is_finite()) {
            return Err(Error::invalid("IqBuffer samples must be finite"));
        }
        Ok(IqBuffer { samples })
    }

    pub fn from_interleaved(iq: &[f64]) -> Result<Self> {
        if iq.len() % 2 != 0 {
            return Err(Error::invalid("interleaved I/Q slice must have even length"));
        }
        Self::new(iq.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
    }

    pub fn to_interleaved(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.samples.len() * 2);
        for s in &self.samples {
            out.push(s.re);
            out.push(s.im);
        }
        out
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // by construction
    }

    /// Mean of |s|^2 over the buffer.
    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// The ideal (pass-through) tap vector: 1 followed by zeros.
pub fn ideal_taps(num_taps: usize) -> Vec<Complex64> {
    let mut taps = vec![Complex64::new(0.0, 0.0); num_taps];
    taps[0] = Complex64::new(1.0, 0.0);
    taps
}

/// An M-tap complex FIR filter whose taps must stay inside the per-component
/// box of half-width `alpha` around the ideal filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    taps: Vec<Complex64>,
    alpha: f64,
}

impl FirFilter {
    /// Validate the box constraint: for every tap m, both Re and Im must lie
    /// within `alpha` of the ideal filter's component.
    pub fn new(taps: Vec<Complex64>, alpha: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::invalid("FirFilter needs at least one tap"));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid("alpha must be a positive finite real"));
        }
        let ideal = ideal_taps(taps.len());
        // Exact bound plus a one-ulp-ish slack so taps built right on the box
        // edge by clamp_taps round-trip through arithmetic without rejection.
        let slack = 1e-12;
        for (m, (t, i)) in taps.iter().zip(&ideal).enumerate() {
            if !t.re.is_finite() || !t.im.is_finite() {
                return Err(Error::invalid(format!("tap {m} is not finite")));
            }
            if (t.re - i.re).abs() > alpha + slack || (t.im - i.im).abs() > alpha + slack {
                return Err(Error::invalid(format!(
                    "tap {m} = {t} outside the [{:+.3}, {:+.3}] box around {i}",
                    -alpha, alpha
                )));
            }
        }
        Ok(FirFilter { taps, alpha })
    }

    /// The pass-through filter h0 = [1, 0, ..., 0].
    pub fn ideal(num_taps: usize, alpha: f64) -> Self {
        FirFilter::new(ideal_taps(num_taps), alpha).expect("ideal taps satisfy any box")
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_taps(&self) -> usize {
        self.taps.len()
    }
}

/// Map a raw action vector of 2M reals in [-1, 1] onto a feasible filter:
/// tap m = ideal[m] + alpha * (raw[2m] + i raw[2m+1]).
///
/// Components are clamped to [-1, 1] first, so the output satisfies the box
/// constraint by construction.
pub fn clamp_taps(raw: &[f64], alpha: f64) -> Result<FirFilter> {
    if raw.is_empty() || raw.len() % 2 != 0 {
        return Err(Error::invalid(format!(
            "raw action must hold 2M components, got {}",
            raw.len()
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("alpha must be a positive finite real"));
    }
    let num_taps = raw.len() / 2;
    let ideal = ideal_taps(num_taps);
    let taps = (0..num_taps)
        .map(|m| {
            let re = raw[2 * m].clamp(-1.0, 1.0);
            let im = raw[2 * m + 1].clamp(-1.0, 1.0);
            ideal[m] + Complex64::new(alpha * re, alpha * im)
        })
        .collect();
    FirFilter::new(taps, alpha)
}

/// Direct-form filtering: output[n] = sum_m h[m] * x[n-m], zeros before the
/// buffer start, output truncated to the input length. O(N*M).
pub fn fir_apply(x: &IqBuffer, h: &FirFilter) -> Result<IqBuffer> {
    Ok(IqBuffer {
        samples: convolve_truncated(x.samples(), h.taps()),
    })
}

/// Same contract as [`fir_apply`], computed with FFTs in O(N log N).
pub fn fir_apply_fft(x: &IqBuffer, h: &FirFilter) -> Result<IqBuffer> {
    let n = x.len();
    let m = h.num_taps();
    let fft_len = (n + m - 1).next_power_of_two();

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);

    let mut xs = vec![Complex64::new(0.0, 0.0); fft_len];
    xs[..n].copy_from_slice(x.samples());
    let mut hs = vec![Complex64::new(0.0, 0.0); fft_len];
    hs[..m].copy_from_slice(h.taps());

    fwd.process(&mut xs);
    fwd.process(&mut hs);
    for (a, b) in xs.iter_mut().zip(&hs) {
        *a *= b;
    }
    inv.process(&mut xs);

    let scale = 1.0 / fft_len as f64;
    Ok(IqBuffer {
        samples: xs[..n].iter().map(|s| s * scale).collect(),
    })
}

/// Magnitude floor below which a filter counts as non-invertible.
pub const EPS_INV: f64 = 1e-6;

/// Undo a synthesis filter at the receiver: given y = fir_apply(x, h),
/// recover x.
///
/// The filter is rejected as singular if its frequency response on the
/// zero-padded length-N grid has a bin with magnitude below [`EPS_INV`], or
/// if its leading tap is below [`EPS_INV`] (the truncated forward operator is
/// lower-triangular with determinant h[0]^N, so a vanishing leading tap has
/// no causal inverse).
///
/// Recovery runs the exact inverse recursion
/// `x[n] = (y[n] - sum_{m>=1} h[m] x[n-m]) / h[0]`,
/// which inverts the zero-prefix boundary convention sample for sample.
pub fn fir_compensate(y: &IqBuffer, h: &FirFilter) -> Result<IqBuffer> {
    let n = y.len();
    let taps = h.taps();

    let min_mag = min_response_magnitude(taps, n);
    if min_mag < EPS_INV {
        return Err(Error::SingularFilter(format!(
            "frequency response magnitude {min_mag:.3e} below {EPS_INV:.0e}"
        )));
    }
    if taps[0].norm() < EPS_INV {
        return Err(Error::SingularFilter(format!(
            "leading tap magnitude {:.3e} below {EPS_INV:.0e}",
            taps[0].norm()
        )));
    }

    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut acc = y.samples()[i];
        for (m, &tap) in taps.iter().enumerate().skip(1) {
            if m > i {
                break;
            }
            acc -= tap * x[i - m];
        }
        x[i] = acc / taps[0];
    }
    IqBuffer::new(x)
}

/// Minimum frequency-response magnitude of `taps` on the zero-padded DFT grid
/// of length `grid_len`.
pub fn min_response_magnitude(taps: &[Complex64], grid_len: usize) -> f64 {
    let len = grid_len.max(taps.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    buf[..taps.len()].copy_from_slice(taps);
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    buf.iter().map(|b| b.norm()).fold(f64::INFINITY, f64::min)
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
