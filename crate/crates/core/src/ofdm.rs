//! CP-OFDM baseline transceiver with unitary (I)DFT.

use num_complex::Complex64;

use crate::dft;
use crate::error::{Error, Result};
use crate::filterbank::TimeSignal;

/// `x = √M·IDFT(X)` (unitary) preceded by a cyclic prefix of `cp` samples.
pub fn modulate(pilots: &[Complex64], cp: usize) -> TimeSignal {
    let m = pilots.len();
    let scale = (m as f64).sqrt();
    let body: Vec<Complex64> = dft::ifft(pilots).into_iter().map(|v| v * scale).collect();
    let mut out = Vec::with_capacity(m + cp);
    out.extend_from_slice(&body[m - cp..]);
    out.extend_from_slice(&body);
    TimeSignal(out)
}

/// Drops the cyclic prefix and applies the unitary DFT.
pub fn demodulate(y: &TimeSignal, m: usize, cp: usize) -> Result<Vec<Complex64>> {
    if y.len() < m + cp {
        return Err(Error::Dimension { expected: m + cp, got: y.len() });
    }
    let scale = 1.0 / (m as f64).sqrt();
    Ok(dft::fft(&y.0[cp..cp + m]).into_iter().map(|v| v * scale).collect())
}
