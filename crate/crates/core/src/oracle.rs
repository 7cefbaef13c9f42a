//! Brute-force time-domain CP-OFDM simulator for up to two numerology blocks.
//!
//! Every block is synthesized at one common sample rate `N_base · 15 kHz`, so a block
//! with numerology `mu` uses an FFT of `N_base / 2^mu` points and a cyclic prefix of
//! `144/2048` of that. Transforms are unitary, which makes the useful part of every
//! symbol carry exactly the energy of its data symbols. There is no propagation channel;
//! noise enters [`measure_link`] analytically.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::io_util::mix_seed;
use crate::numerology::NUM_NUMEROLOGIES;

pub const MAX_BLOCKS: usize = 2;
pub const MAX_BLOCK_SUBCARRIERS: usize = 600;
/// Symbols synthesized for the block with the longest symbol.
pub const MIN_SYMBOLS: usize = 100;
const MIN_BASE_FFT: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub mu: u8,
    pub subcarriers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    pub spec: BlockSpec,
    /// Lowest subcarrier frequency in 15 kHz units relative to the frame center.
    pub offset_sc15: i64,
    pub fft_size: usize,
    pub cp_len: usize,
    /// `symbols[t][k]`: QPSK symbol `t` on subcarrier `k`.
    pub symbols: Vec<Vec<Complex64>>,
}

impl BlockLayout {
    pub fn symbol_len(&self) -> usize {
        self.fft_size + self.cp_len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeDomainFrame {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
    pub base_fft: usize,
    pub blocks: Vec<BlockLayout>,
}

fn qpsk(rng: &mut ChaCha8Rng) -> Complex64 {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    let re = if rng.random::<bool>() { a } else { -a };
    let im = if rng.random::<bool>() { a } else { -a };
    Complex64::new(re, im)
}

/// `e^{j 2π offset n / N}` over the frame, the carrier of a block placed at `offset` 15 kHz units.
fn rotate(samples: &mut [Complex64], offset_sc15: i64, base_fft: usize, sign: f64) {
    let n = base_fft as i64;
    for (i, s) in samples.iter_mut().enumerate() {
        // reduce the phase index exactly before converting to floating point
        let idx = (offset_sc15 * i as i64).rem_euclid(n);
        let phase = sign * std::f64::consts::TAU * idx as f64 / n as f64;
        *s *= Complex64::from_polar(1.0, phase);
    }
}

/// Places the blocks low to high with `guard_sc15` 15 kHz units between them.
pub fn synthesize_frame(blocks: &[BlockSpec], guard_sc15: u32, seed: u64) -> Result<TimeDomainFrame> {
    if blocks.is_empty() || blocks.len() > MAX_BLOCKS {
        return Err(Error::Config(format!(
            "oracle takes 1 to {MAX_BLOCKS} blocks, got {}",
            blocks.len()
        )));
    }
    for b in blocks {
        if usize::from(b.mu) >= NUM_NUMEROLOGIES {
            return Err(Error::Config(format!("numerology {} out of range", b.mu)));
        }
        if b.subcarriers == 0 || b.subcarriers > MAX_BLOCK_SUBCARRIERS {
            return Err(Error::Config(format!(
                "block width {} outside 1..={MAX_BLOCK_SUBCARRIERS}",
                b.subcarriers
            )));
        }
    }
    let widths: Vec<i64> = blocks
        .iter()
        .map(|b| (b.subcarriers as i64) << b.mu)
        .collect();
    let span = widths.iter().sum::<i64>() + i64::from(guard_sc15) * (blocks.len() as i64 - 1);
    let base_fft = (2 * span as usize).next_power_of_two().max(MIN_BASE_FFT);
    let max_mu = blocks.iter().map(|b| b.mu).max().unwrap_or(0);
    let min_mu = blocks.iter().map(|b| b.mu).min().unwrap_or(0);
    if !(base_fft >> max_mu).is_multiple_of(128) {
        return Err(Error::Config("cyclic prefix is not an integer sample count".into()));
    }
    let period = {
        let n = base_fft >> min_mu;
        n + n * 144 / 2048
    };
    let total = period * MIN_SYMBOLS;

    let mut planner = FftPlanner::<f64>::new();
    let mut samples = vec![Complex64::new(0.0, 0.0); total];
    let mut layouts = Vec::with_capacity(blocks.len());
    let mut low = -span / 2;
    for (i, (b, width)) in blocks.iter().zip(&widths).enumerate() {
        let fft_size = base_fft >> b.mu;
        let cp_len = fft_size * 144 / 2048;
        let n_sym = total / (fft_size + cp_len);
        let ifft = planner.plan_fft_inverse(fft_size);
        let norm = 1.0 / (fft_size as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64));
        let mut wave = Vec::with_capacity(total);
        let mut symbols = Vec::with_capacity(n_sym);
        let mut buf = vec![Complex64::new(0.0, 0.0); fft_size];
        for _ in 0..n_sym {
            let data: Vec<Complex64> = (0..b.subcarriers).map(|_| qpsk(&mut rng)).collect();
            buf.fill(Complex64::new(0.0, 0.0));
            buf[..b.subcarriers].copy_from_slice(&data);
            ifft.process(&mut buf);
            buf.iter_mut().for_each(|v| *v *= norm);
            wave.extend_from_slice(&buf[fft_size - cp_len..]);
            wave.extend_from_slice(&buf);
            symbols.push(data);
        }
        debug_assert_eq!(wave.len(), total);
        rotate(&mut wave, low, base_fft, 1.0);
        for (s, w) in samples.iter_mut().zip(&wave) {
            *s += w;
        }
        layouts.push(BlockLayout {
            spec: *b,
            offset_sc15: low,
            fft_size,
            cp_len,
            symbols,
        });
        low += width + i64::from(guard_sc15);
    }
    Ok(TimeDomainFrame {
        samples,
        sample_rate_hz: base_fft as f64 * crate::numerology::BASE_SCS_HZ,
        base_fft,
        blocks: layouts,
    })
}

/// Received subcarrier values of `block`, one row per symbol.
pub fn demodulate(frame: &TimeDomainFrame, block: usize) -> Result<Vec<Vec<Complex64>>> {
    let layout = frame
        .blocks
        .get(block)
        .ok_or_else(|| Error::Domain(format!("frame has no block {block}")))?;
    let mut baseband = frame.samples.clone();
    rotate(&mut baseband, layout.offset_sc15, frame.base_fft, -1.0);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(layout.fft_size);
    let norm = 1.0 / (layout.fft_size as f64).sqrt();
    let k = layout.spec.subcarriers;
    Ok(baseband
        .chunks_exact(layout.symbol_len())
        .take(layout.symbols.len())
        .map(|sym| {
            let mut buf = sym[layout.cp_len..].to_vec();
            fft.process(&mut buf);
            buf[..k].iter().map(|v| v * norm).collect()
        })
        .collect())
}

/// Energy of the frame with every cyclic prefix removed, counted per block.
///
/// Only meaningful for single-block frames, where it must equal the data energy.
pub fn useful_energy(frame: &TimeDomainFrame) -> f64 {
    let Some(layout) = frame.blocks.first() else {
        return 0.0;
    };
    frame
        .samples
        .chunks_exact(layout.symbol_len())
        .map(|s| s[layout.cp_len..].iter().map(Complex64::norm_sqr).sum::<f64>())
        .sum()
}

pub fn symbol_energy(frame: &TimeDomainFrame) -> f64 {
    frame
        .blocks
        .iter()
        .flat_map(|b| b.symbols.iter().flatten())
        .map(Complex64::norm_sqr)
        .sum()
}

/// Mean residual power `|Y - X|^2` per victim subcarrier over all symbols.
pub fn interference_per_subcarrier(frame: &TimeDomainFrame, victim: usize) -> Result<Vec<f64>> {
    let rx = demodulate(frame, victim)?;
    let tx = &frame.blocks[victim].symbols;
    let k = frame.blocks[victim].spec.subcarriers;
    let mut acc = vec![0.0; k];
    for (r, t) in rx.iter().zip(tx) {
        for ((a, y), x) in acc.iter_mut().zip(r).zip(t) {
            *a += (y - x).norm_sqr();
        }
    }
    let n = rx.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Mean interference power over the victim block.
pub fn measured_ini(frame: &TimeDomainFrame, victim: usize) -> Result<f64> {
    let v = interference_per_subcarrier(frame, victim)?;
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Linear SINR per victim subcarrier with unit-power symbols and additive noise.
pub fn measure_link(frame: &TimeDomainFrame, victim: usize, noise_power: f64) -> Result<Vec<f64>> {
    if noise_power.is_nan() || noise_power < 0.0 {
        return Err(Error::Domain("noise power must be >= 0".into()));
    }
    Ok(interference_per_subcarrier(frame, victim)?
        .into_iter()
        .map(|i| 1.0 / (i + noise_power))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_block_roundtrip_and_energy() {
        for mu in 0..4 {
            let f = synthesize_frame(&[BlockSpec { mu, subcarriers: 72 }], 0, 3).unwrap();
            let rx = demodulate(&f, 0).unwrap();
            assert!(rx.len() >= MIN_SYMBOLS);
            let (mut err, mut ref_e) = (0.0, 0.0);
            for (r, t) in rx.iter().zip(&f.blocks[0].symbols) {
                for (y, x) in r.iter().zip(t) {
                    err += (y - x).norm_sqr();
                    ref_e += x.norm_sqr();
                }
            }
            assert!((err / ref_e).sqrt() < 1e-10, "mu {mu}");
            let e = symbol_energy(&f);
            assert!((useful_energy(&f) - e).abs() / e < 1e-9);
        }
    }

    #[test]
    fn equal_numerologies_do_not_interfere() {
        let b = BlockSpec { mu: 1, subcarriers: 48 };
        let f = synthesize_frame(&[b, b], 0, 5).unwrap();
        assert!(measured_ini(&f, 0).unwrap() < 1e-20);
        assert!(measured_ini(&f, 1).unwrap() < 1e-20);
    }

    #[test]
    fn noise_only_link() {
        let f = synthesize_frame(&[BlockSpec { mu: 0, subcarriers: 24 }], 0, 1).unwrap();
        for s in measure_link(&f, 0, 0.01).unwrap() {
            assert!((10.0 * s.log10() - 20.0).abs() < 0.1);
        }
    }

    #[test]
    fn mixed_numerologies_leak_most_at_the_edge() {
        let blocks = [
            BlockSpec { mu: 0, subcarriers: 48 },
            BlockSpec { mu: 1, subcarriers: 24 },
        ];
        let f = synthesize_frame(&blocks, 0, 9).unwrap();
        let sinr = measure_link(&f, 0, 0.01).unwrap();
        assert!(sinr[47] < sinr[24]);
        let wide = synthesize_frame(&blocks, 8, 9).unwrap();
        assert!(measured_ini(&wide, 0).unwrap() < measured_ini(&f, 0).unwrap());
    }

    #[test]
    fn rejects_bad_layouts() {
        let b = BlockSpec { mu: 0, subcarriers: 12 };
        assert!(synthesize_frame(&[], 0, 0).is_err());
        assert!(synthesize_frame(&[b, b, b], 0, 0).is_err());
        assert!(synthesize_frame(&[BlockSpec { mu: 4, subcarriers: 12 }], 0, 0).is_err());
        assert!(synthesize_frame(&[BlockSpec { mu: 0, subcarriers: 601 }], 0, 0).is_err());
    }
}
