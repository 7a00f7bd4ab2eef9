//! Frequency-domain modal identification.
//!
//! Fits freely vibrating damped harmonic oscillators
//! `xi_i(t) = A_i exp(-t zeta_i omega_i) cos(t omega_i sqrt(1-zeta_i^2) + phi_i)`
//! with observable shapes `h_i` to measured sensor time series, by matching
//! Fourier coefficients on narrow bands around the spectral peaks. The
//! model transform is the same DFT as the data's (time-domain evaluation on
//! the measurement grid, transformed at the fitted bins), so no
//! continuous-transform mismatch enters the residual.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{BeamError, Result};
use crate::lm;
use crate::modal::ModalObservation;
use crate::sim::MeasurementSet;

/// One identified oscillator: amplitude, natural angular frequency,
/// damping ratio, phase, and unit-norm observable shape (free-end
/// component non-negative).
#[derive(Debug, Clone)]
pub struct OscillatorParams {
    pub amplitude: f64,
    pub omega: f64,
    pub zeta: f64,
    pub phase: f64,
    pub shape: DVector<f64>,
}

impl OscillatorParams {
    /// Unit-amplitude oscillator value at time `t`.
    fn unit_value(&self, t: f64) -> f64 {
        let damped = self.omega * (1.0 - self.zeta * self.zeta).sqrt();
        (-t * self.zeta * self.omega).exp() * (t * damped + self.phase).cos()
    }
}

/// Synthesizes the multi-oscillator sensor signal on a time grid; used by
/// round-trip tests and diagnostics.
pub fn synthesize(oscillators: &[OscillatorParams], times: &[f64]) -> DMatrix<f64> {
    let p = oscillators.first().map_or(0, |o| o.shape.len());
    let mut samples = DMatrix::zeros(times.len(), p);
    for osc in oscillators {
        for (k, &t) in times.iter().enumerate() {
            let value = osc.amplitude * osc.unit_value(t);
            for s in 0..p {
                samples[(k, s)] += osc.shape[s] * value;
            }
        }
    }
    samples
}

/// One contiguous group of FFT bins around a spectral peak. `lo..=hi`
/// includes the guard bins; `half_lo..=half_hi` is the -3 dB region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Band {
    pub lo: usize,
    pub hi: usize,
    pub peak: usize,
    pub half_lo: usize,
    pub half_hi: usize,
}

/// Disjoint per-mode bin groups, sorted by peak frequency.
#[derive(Debug, Clone)]
pub struct FrequencyBands {
    pub bands: Vec<Band>,
}

impl FrequencyBands {
    /// All selected bins in ascending order.
    pub fn all_bins(&self) -> Vec<usize> {
        let mut bins: Vec<usize> = self
            .bands
            .iter()
            .flat_map(|b| b.lo..=b.hi)
            .collect();
        bins.sort_unstable();
        bins
    }
}

fn sensor_ffts(set: &MeasurementSet) -> Vec<Vec<Complex<f64>>> {
    let nt = set.sample_count();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nt);
    (0..set.sensor_count())
        .map(|s| {
            let mut buf: Vec<Complex<f64>> = (0..nt)
                .map(|k| Complex::new(set.samples[(k, s)], 0.0))
                .collect();
            fft.process(&mut buf);
            buf
        })
        .collect()
}

/// Sensor-averaged magnitude spectrum for bins `0..=Nt/2`.
pub fn magnitude_spectrum(set: &MeasurementSet) -> Vec<f64> {
    let ffts = sensor_ffts(set);
    let half = set.sample_count() / 2 + 1;
    let p = ffts.len() as f64;
    (0..half)
        .map(|j| ffts.iter().map(|f| f[j].norm()).sum::<f64>() / p)
        .collect()
}

const GUARD_BINS: usize = 2;

/// Topographic prominence of a local maximum: its height above the higher
/// of the two saddles separating it from taller spectrum values. Ranking
/// peaks by prominence keeps noise ripples riding a strong mode's spectral
/// skirt from outranking a genuinely separated weaker mode.
fn prominence(avg: &[f64], peak: usize) -> f64 {
    let h = avg[peak];
    let mut key_saddle = f64::NEG_INFINITY;
    for side in [-1isize, 1] {
        let mut j = peak as isize;
        let mut low = h;
        loop {
            j += side;
            if j < 0 || j as usize >= avg.len() {
                break;
            }
            let v = avg[j as usize];
            if v > h {
                key_saddle = key_saddle.max(low);
                break;
            }
            low = low.min(v);
        }
    }
    if key_saddle.is_finite() {
        h - key_saddle
    } else {
        h
    }
}

/// Selects the `n` largest well-separated spectral peaks (ranked by
/// prominence) and their -3 dB bands, each widened by two guard bins. A
/// candidate peak whose -3 dB region runs into an already-selected band is
/// not counted as separated.
pub fn pick_bands(set: &MeasurementSet, n: usize) -> Result<FrequencyBands> {
    pick_bands_from_spectrum(&magnitude_spectrum(set), n)
}

/// Average of the per-set sensor-averaged magnitude spectra. Repeated
/// measurements of one damage case share their band selection: a single
/// release can leave a mode almost unexcited (the random tip torque can
/// cancel a mode's static content), and pooling the spectra keeps such a
/// set from derailing peak selection.
pub fn pooled_magnitude_spectrum(sets: &[&MeasurementSet]) -> Result<Vec<f64>> {
    let first = sets
        .first()
        .ok_or_else(|| BeamError::invalid("no measurement sets to pool"))?;
    let len = first.sample_count();
    let mut pooled = vec![0.0f64; len / 2 + 1];
    for set in sets {
        if set.sample_count() != len {
            return Err(BeamError::DimensionMismatch {
                context: "pooled_magnitude_spectrum".into(),
                expected: len,
                actual: set.sample_count(),
            });
        }
        for (acc, v) in pooled.iter_mut().zip(magnitude_spectrum(set)) {
            *acc += v;
        }
    }
    for v in &mut pooled {
        *v /= sets.len() as f64;
    }
    Ok(pooled)
}

/// Band selection on a precomputed magnitude spectrum.
pub fn pick_bands_from_spectrum(avg: &[f64], n: usize) -> Result<FrequencyBands> {
    if n == 0 {
        return Err(BeamError::invalid("at least one band must be requested"));
    }
    let nbins = avg.len();
    if nbins < 4 {
        return Err(BeamError::invalid("record too short for band selection"));
    }

    // Strict local maxima, excluding DC and Nyquist, most prominent first.
    let mut candidates: Vec<(usize, f64)> = (1..nbins - 1)
        .filter(|&j| avg[j] > avg[j - 1] && avg[j] > avg[j + 1] && avg[j] > 0.0)
        .map(|j| (j, prominence(avg, j)))
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
    let candidates: Vec<usize> = candidates.into_iter().map(|(j, _)| j).collect();

    let mut taken = vec![false; nbins];
    let mut bands: Vec<Band> = Vec::new();
    'candidates: for &peak in &candidates {
        if bands.len() == n {
            break;
        }
        if taken[peak] {
            continue;
        }
        let threshold = avg[peak] / std::f64::consts::SQRT_2;
        let mut half_lo = peak;
        while half_lo > 0 && avg[half_lo - 1] >= threshold {
            if taken[half_lo - 1] {
                continue 'candidates;
            }
            half_lo -= 1;
        }
        let mut half_hi = peak;
        while half_hi + 1 < nbins && avg[half_hi + 1] >= threshold {
            if taken[half_hi + 1] {
                continue 'candidates;
            }
            half_hi += 1;
        }
        let mut lo = half_lo.saturating_sub(GUARD_BINS);
        let mut hi = (half_hi + GUARD_BINS).min(nbins - 1);
        // Guard bins may touch an existing group; trim them back.
        while lo < half_lo && taken[lo] {
            lo += 1;
        }
        while hi > half_hi && taken[hi] {
            hi -= 1;
        }
        for bin in lo..=hi {
            taken[bin] = true;
        }
        bands.push(Band {
            lo,
            hi,
            peak,
            half_lo,
            half_hi,
        });
    }

    if bands.len() < n {
        return Err(BeamError::Identification(format!(
            "found {} separated spectral peaks, requested {n}",
            bands.len()
        )));
    }
    bands.sort_by_key(|b| b.peak);
    Ok(FrequencyBands { bands })
}

/// Fit result: oscillators sorted by frequency, the final frequency-domain
/// residual `sum_j ||y_hat(j) - m_hat(j)||^2`, and solver diagnostics.
#[derive(Debug, Clone)]
pub struct ModalFit {
    pub oscillators: Vec<OscillatorParams>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Per-mode DFT of the unit oscillator and (optionally) its derivatives
/// with respect to (omega, zeta, phi), evaluated at the fitted bins.
struct ModeTransform {
    value: Vec<Complex<f64>>,
    d_omega: Vec<Complex<f64>>,
    d_zeta: Vec<Complex<f64>>,
    d_phi: Vec<Complex<f64>>,
}

fn mode_transform(
    omega: f64,
    zeta: f64,
    phi: f64,
    dt: f64,
    nt: usize,
    bins: &[usize],
    with_derivatives: bool,
) -> ModeTransform {
    let nb = bins.len();
    let mut value = vec![Complex::new(0.0, 0.0); nb];
    let mut d_omega = vec![Complex::new(0.0, 0.0); nb];
    let mut d_zeta = vec![Complex::new(0.0, 0.0); nb];
    let mut d_phi = vec![Complex::new(0.0, 0.0); nb];

    let sq = (1.0 - zeta * zeta).sqrt();
    let damped = omega * sq;
    let gamma = zeta * omega;

    // Twiddle factors advanced once per sample.
    let step: Vec<Complex<f64>> = bins
        .iter()
        .map(|&j| {
            let angle = -2.0 * std::f64::consts::PI * j as f64 / nt as f64;
            Complex::new(angle.cos(), angle.sin())
        })
        .collect();
    let mut twiddle: Vec<Complex<f64>> = vec![Complex::new(1.0, 0.0); nb];

    for k in 0..nt {
        let t = k as f64 * dt;
        let envelope = (-gamma * t).exp();
        let (sin_th, cos_th) = (t * damped + phi).sin_cos();
        let xi = envelope * cos_th;
        let (dw, dz, dp);
        if with_derivatives {
            dw = -t * zeta * xi - envelope * t * sq * sin_th;
            dz = -t * omega * xi + envelope * t * omega * (zeta / sq) * sin_th;
            dp = -envelope * sin_th;
        } else {
            dw = 0.0;
            dz = 0.0;
            dp = 0.0;
        }
        for b in 0..nb {
            let w = twiddle[b];
            value[b] += xi * w;
            if with_derivatives {
                d_omega[b] += dw * w;
                d_zeta[b] += dz * w;
                d_phi[b] += dp * w;
            }
            twiddle[b] = w * step[b];
        }
    }
    ModeTransform {
        value,
        d_omega,
        d_zeta,
        d_phi,
    }
}

/// Parameter packing: per mode `(omega, zeta, phi, g_1..g_p)` where
/// `g = A * h` is the unnormalized shape carrying the amplitude.
const MODE_HEAD: usize = 3;

fn mode_stride(p: usize) -> usize {
    MODE_HEAD + p
}

fn initial_parameters(
    ffts: &[Vec<Complex<f64>>],
    bands: &FrequencyBands,
    dt: f64,
    nt: usize,
) -> DVector<f64> {
    let p = ffts.len();
    let stride = mode_stride(p);
    let mut params = DVector::zeros(bands.bands.len() * stride);
    let bin_hz = 1.0 / (dt * nt as f64);
    for (i, band) in bands.bands.iter().enumerate() {
        let f0 = band.peak as f64 * bin_hz;
        let omega0 = 2.0 * std::f64::consts::PI * f0;
        let width_hz = (band.half_hi - band.half_lo + 1) as f64 * bin_hz;
        let zeta0 = (width_hz / (2.0 * f0)).clamp(1e-4, 0.5);

        let peak_values: Vec<Complex<f64>> = ffts.iter().map(|f| f[band.peak]).collect();
        let reference = peak_values
            .iter()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .copied()
            .unwrap_or(Complex::new(1.0, 0.0));
        let phi0 = reference.im.atan2(reference.re);

        // DFT magnitude of a unit decaying cosine at resonance is about
        // half the geometric decay sum.
        let gamma0 = zeta0 * omega0;
        let decay = (-gamma0 * dt).exp();
        let decay_sum = if decay < 1.0 {
            (1.0 - decay.powi(nt as i32)) / (1.0 - decay)
        } else {
            nt as f64
        };

        let base = i * stride;
        params[base] = omega0;
        params[base + 1] = zeta0;
        params[base + 2] = phi0;
        for (s, c) in peak_values.iter().enumerate() {
            let relative_phase = c.im.atan2(c.re) - phi0;
            let sign = if relative_phase.cos() >= 0.0 { 1.0 } else { -1.0 };
            params[base + MODE_HEAD + s] = sign * 2.0 * c.norm() / decay_sum;
        }
    }
    params
}

/// Fits the oscillator model to the measurement set over the given bands.
pub fn fit_modes(set: &MeasurementSet, bands: &FrequencyBands) -> Result<ModalFit> {
    let p = set.sensor_count();
    let nt = set.sample_count();
    let dt = set.dt();
    let n_modes = bands.bands.len();
    if n_modes == 0 {
        return Err(BeamError::invalid("no frequency bands to fit"));
    }
    let stride = mode_stride(p);
    let bins = bands.all_bins();
    let nb = bins.len();

    let ffts = sensor_ffts(set);
    // Data vector: per bin, per sensor, (re, im).
    let mut data = DVector::zeros(2 * nb * p);
    for (bi, &j) in bins.iter().enumerate() {
        for s in 0..p {
            data[2 * (bi * p + s)] = ffts[s][j].re;
            data[2 * (bi * p + s) + 1] = ffts[s][j].im;
        }
    }

    let nyquist = std::f64::consts::PI / dt;
    let project = move |x: &mut DVector<f64>| {
        for i in 0..n_modes {
            let base = i * stride;
            x[base] = x[base].clamp(1e-9, nyquist);
            x[base + 1] = x[base + 1].clamp(0.0, 0.999);
        }
    };

    let transforms = |x: &DVector<f64>, with_derivatives: bool| -> Vec<ModeTransform> {
        (0..n_modes)
            .map(|i| {
                let base = i * stride;
                mode_transform(
                    x[base],
                    x[base + 1],
                    x[base + 2],
                    dt,
                    nt,
                    &bins,
                    with_derivatives,
                )
            })
            .collect()
    };

    let mut residual = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let tf = transforms(x, false);
        let mut r = -data.clone();
        for (i, t) in tf.iter().enumerate() {
            let base = i * stride;
            for (bi, v) in t.value.iter().enumerate() {
                for s in 0..p {
                    let g = x[base + MODE_HEAD + s];
                    r[2 * (bi * p + s)] += g * v.re;
                    r[2 * (bi * p + s) + 1] += g * v.im;
                }
            }
        }
        Ok(r)
    };

    let mut jacobian = |x: &DVector<f64>| -> Result<DMatrix<f64>> {
        let tf = transforms(x, true);
        let mut jac = DMatrix::zeros(2 * nb * p, n_modes * stride);
        for (i, t) in tf.iter().enumerate() {
            let base = i * stride;
            for bi in 0..nb {
                for s in 0..p {
                    let g = x[base + MODE_HEAD + s];
                    let row_re = 2 * (bi * p + s);
                    jac[(row_re, base)] = g * t.d_omega[bi].re;
                    jac[(row_re + 1, base)] = g * t.d_omega[bi].im;
                    jac[(row_re, base + 1)] = g * t.d_zeta[bi].re;
                    jac[(row_re + 1, base + 1)] = g * t.d_zeta[bi].im;
                    jac[(row_re, base + 2)] = g * t.d_phi[bi].re;
                    jac[(row_re + 1, base + 2)] = g * t.d_phi[bi].im;
                    jac[(row_re, base + MODE_HEAD + s)] = t.value[bi].re;
                    jac[(row_re + 1, base + MODE_HEAD + s)] = t.value[bi].im;
                }
            }
        }
        Ok(jac)
    };

    let init = initial_parameters(&ffts, bands, dt, nt);
    let opts = lm::LmOptions {
        max_iterations: 500,
        gradient_tol: 0.0,
        step_tol: 1e-12,
        residual_change_tol: 1e-10,
        initial_damping: 1e-3,
        scale_damping: true,
    };
    let outcome = lm::minimize(init, &mut residual, &mut jacobian, &project, &opts)?;
    if !outcome.converged {
        return Err(BeamError::Identification(format!(
            "oscillator fit did not converge after {} iterations; best residual {:.6e}",
            outcome.iterations, outcome.objective
        )));
    }

    let mut oscillators = Vec::with_capacity(n_modes);
    for i in 0..n_modes {
        let base = i * stride;
        let omega = outcome.params[base];
        let zeta = outcome.params[base + 1];
        let mut phase = outcome.params[base + 2];
        let g = DVector::from_iterator(
            p,
            (0..p).map(|s| outcome.params[base + MODE_HEAD + s]),
        );
        let amplitude = g.norm();
        if amplitude == 0.0 {
            return Err(BeamError::Identification(format!(
                "mode {i} collapsed to zero amplitude during the fit"
            )));
        }
        let mut shape = g.unscale(amplitude);
        if shape[p - 1] < 0.0 {
            shape.neg_mut();
            phase += std::f64::consts::PI;
        }
        // Wrap the phase into (-pi, pi].
        phase = phase.rem_euclid(2.0 * std::f64::consts::PI);
        if phase > std::f64::consts::PI {
            phase -= 2.0 * std::f64::consts::PI;
        }
        oscillators.push(OscillatorParams {
            amplitude,
            omega,
            zeta,
            phase,
            shape,
        });
    }
    oscillators.sort_by(|a, b| a.omega.total_cmp(&b.omega));

    Ok(ModalFit {
        oscillators,
        residual: outcome.objective,
        iterations: outcome.iterations,
        converged: outcome.converged,
    })
}

/// Stacks identified oscillators into the `(omega_i, h_i)` interleaved
/// modal-observation layout. The list must already be sorted by frequency.
pub fn to_modal_observation(oscillators: &[OscillatorParams]) -> Result<ModalObservation> {
    if oscillators.is_empty() {
        return ModalObservation::new(DVector::zeros(0), 0, 0);
    }
    let p = oscillators[0].shape.len();
    let mut prev = 0.0;
    for (i, osc) in oscillators.iter().enumerate() {
        if osc.omega <= prev {
            return Err(BeamError::invalid(format!(
                "oscillators must be sorted by strictly increasing frequency (violated at {i})"
            )));
        }
        if osc.shape.len() != p {
            return Err(BeamError::DimensionMismatch {
                context: "to_modal_observation".into(),
                expected: p,
                actual: osc.shape.len(),
            });
        }
        prev = osc.omega;
    }
    let mut entries = DVector::zeros(oscillators.len() * (p + 1));
    for (i, osc) in oscillators.iter().enumerate() {
        let base = i * (p + 1);
        entries[base] = osc.omega;
        entries.rows_mut(base + 1, p).copy_from(&osc.shape);
    }
    ModalObservation::new(entries, oscillators.len(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{MeasurementMeta, MeasurementSet};
    use approx::assert_relative_eq;

    fn set_from_samples(samples: DMatrix<f64>, sample_rate: f64) -> MeasurementSet {
        let nt = samples.nrows();
        MeasurementSet {
            times: (0..nt).map(|k| k as f64 / sample_rate).collect(),
            samples,
            metadata: MeasurementMeta {
                label: "synthetic".into(),
                seed: 0,
                damage: vec![],
                config_digest: String::new(),
                sample_rate,
            },
        }
    }

    fn unit_shape(p: usize, values: &[f64]) -> DVector<f64> {
        let mut v = DVector::from_column_slice(&values[..p]);
        let norm = v.norm();
        v.unscale_mut(norm);
        if v[p - 1] < 0.0 {
            v.neg_mut();
        }
        v
    }

    #[test]
    fn pure_tone_yields_single_band_containing_the_peak() {
        // Exact-bin sinusoid: 8 Hz on a 1 s record at 256 Hz -> bin 8.
        let nt = 256;
        let samples = DMatrix::from_fn(nt, 2, |k, _| {
            (2.0 * std::f64::consts::PI * 8.0 * k as f64 / 256.0).sin()
        });
        let bands = pick_bands(&set_from_samples(samples, 256.0), 1).unwrap();
        assert_eq!(bands.bands.len(), 1);
        let band = bands.bands[0];
        assert_eq!(band.peak, 8);
        assert!(band.lo <= 8 && 8 <= band.hi);
    }

    #[test]
    fn two_tone_band_selection_orders_by_amplitude() {
        let nt = 512;
        let samples = DMatrix::from_fn(nt, 1, |k, _| {
            let t = k as f64 / 256.0;
            3.0 * (2.0 * std::f64::consts::PI * 10.0 * t).sin()
                + 1.0 * (2.0 * std::f64::consts::PI * 40.0 * t).sin()
        });
        let set = set_from_samples(samples, 256.0);
        let one = pick_bands(&set, 1).unwrap();
        assert_eq!(one.bands[0].peak, 20); // 10 Hz at 0.5 Hz bins
        let two = pick_bands(&set, 2).unwrap();
        assert_eq!(two.bands.len(), 2);
        assert_eq!(two.bands[0].peak, 20);
        assert_eq!(two.bands[1].peak, 80);
    }

    #[test]
    fn too_few_peaks_is_an_identification_error() {
        let samples = DMatrix::from_element(256, 1, 1.0);
        let err = pick_bands(&set_from_samples(samples, 256.0), 1).unwrap_err();
        match err {
            BeamError::Identification(msg) => assert!(msg.contains("found 0")),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn bands_are_disjoint_and_contiguous() {
        let nt = 1024;
        let samples = DMatrix::from_fn(nt, 1, |k, _| {
            let t = k as f64 / 256.0;
            (-0.5 * t).exp() * (2.0 * std::f64::consts::PI * 20.0 * t).cos()
                + 0.8 * (-0.3 * t).exp() * (2.0 * std::f64::consts::PI * 26.0 * t).cos()
        });
        let bands = pick_bands(&set_from_samples(samples, 256.0), 2).unwrap();
        assert_eq!(bands.bands.len(), 2);
        let a = bands.bands[0];
        let b = bands.bands[1];
        assert!(a.hi < b.lo, "bands must not overlap: {a:?} vs {b:?}");
    }

    #[test]
    fn recovers_a_single_noiseless_oscillator() {
        let truth = OscillatorParams {
            amplitude: 1.0,
            omega: 2.0 * std::f64::consts::PI * 2.0,
            zeta: 0.01,
            phase: 0.3,
            shape: unit_shape(7, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
        };
        let times: Vec<f64> = (0..4096).map(|k| k as f64 / 256.0).collect();
        let set = set_from_samples(synthesize(&[truth.clone()], &times), 256.0);
        let bands = pick_bands(&set, 1).unwrap();
        let fit = fit_modes(&set, &bands).unwrap();
        let got = &fit.oscillators[0];
        assert!((got.omega - truth.omega).abs() / truth.omega < 1e-3);
        assert!((got.zeta - truth.zeta).abs() / truth.zeta < 0.05);
        assert!((got.phase - truth.phase).abs() < 0.05);
        assert!((got.amplitude - truth.amplitude).abs() / truth.amplitude < 0.05);
        assert!((&got.shape - &truth.shape).norm() < 1e-6);
    }

    #[test]
    fn amplitude_scales_linearly_with_the_signal() {
        let truth = OscillatorParams {
            amplitude: 0.7,
            omega: 2.0 * std::f64::consts::PI * 5.0,
            zeta: 0.02,
            phase: -0.4,
            shape: unit_shape(3, &[0.5, -0.4, 0.9]),
        };
        let times: Vec<f64> = (0..2048).map(|k| k as f64 / 256.0).collect();
        let base = synthesize(&[truth.clone()], &times);
        let scaled = base.scale(3.0);

        let fit_a = fit_modes(
            &set_from_samples(base, 256.0),
            &pick_bands(&set_from_samples(synthesize(&[truth.clone()], &times), 256.0), 1).unwrap(),
        )
        .unwrap();
        let set_b = set_from_samples(scaled, 256.0);
        let fit_b = fit_modes(&set_b, &pick_bands(&set_b, 1).unwrap()).unwrap();

        let a = &fit_a.oscillators[0];
        let b = &fit_b.oscillators[0];
        assert_relative_eq!(b.amplitude / a.amplitude, 3.0, max_relative = 1e-6);
        assert_relative_eq!(a.omega, b.omega, max_relative = 1e-9);
        assert_relative_eq!(a.zeta, b.zeta, max_relative = 1e-6);
        assert!((a.phase - b.phase).abs() < 1e-6);
        assert!((&a.shape - &b.shape).norm() < 1e-9);
    }

    #[test]
    fn three_mode_round_trip_recovers_all_parameters() {
        let truths = vec![
            OscillatorParams {
                amplitude: 1.0,
                omega: 2.0 * std::f64::consts::PI * 2.16,
                zeta: 0.006,
                phase: 0.2,
                shape: unit_shape(7, &[0.04, 0.15, 0.32, 0.52, 0.7, 0.9, 1.1]),
            },
            OscillatorParams {
                amplitude: 0.05,
                omega: 2.0 * std::f64::consts::PI * 13.5,
                zeta: 0.003,
                phase: -0.8,
                shape: unit_shape(7, &[-0.3, -0.7, -0.8, -0.4, 0.2, 0.9, 1.4]),
            },
            OscillatorParams {
                amplitude: 0.01,
                omega: 2.0 * std::f64::consts::PI * 37.8,
                zeta: 0.0027,
                phase: 1.1,
                shape: unit_shape(7, &[0.6, 1.0, 0.4, -0.6, -0.9, 0.1, 1.2]),
            },
        ];
        let times: Vec<f64> = (0..15360).map(|k| k as f64 / 512.0).collect();
        let set = set_from_samples(synthesize(&truths, &times), 512.0);
        let bands = pick_bands(&set, 3).unwrap();
        let fit = fit_modes(&set, &bands).unwrap();
        assert_eq!(fit.oscillators.len(), 3);
        for (got, truth) in fit.oscillators.iter().zip(&truths) {
            assert!(
                (got.omega - truth.omega).abs() / truth.omega < 1e-3,
                "omega {} vs {}",
                got.omega,
                truth.omega
            );
            assert!((got.zeta - truth.zeta).abs() / truth.zeta < 0.05);
            assert!((&got.shape - &truth.shape).norm() < 1e-3);
        }
        // The optimizer at least matches the truth's residual.
        let truth_fit_residual = {
            let bins = bands.all_bins();
            let ffts = sensor_ffts(&set);
            let model = synthesize(&truths, &times);
            let model_set = set_from_samples(model, 512.0);
            let model_ffts = sensor_ffts(&model_set);
            bins.iter()
                .map(|&j| {
                    (0..7)
                        .map(|s| (ffts[s][j] - model_ffts[s][j]).norm_sqr())
                        .sum::<f64>()
                })
                .sum::<f64>()
        };
        assert!(fit.residual <= truth_fit_residual + 1e-9);
    }

    #[test]
    fn observation_stacking_and_ordering() {
        let osc = |f: f64| OscillatorParams {
            amplitude: 1.0,
            omega: 2.0 * std::f64::consts::PI * f,
            zeta: 0.01,
            phase: 0.0,
            shape: unit_shape(7, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]),
        };
        let sorted = vec![osc(2.0), osc(13.0), osc(38.0)];
        let obs = to_modal_observation(&sorted).unwrap();
        assert_eq!(obs.len(), 24);
        assert_relative_eq!(obs.frequency(1), sorted[1].omega);

        let empty = to_modal_observation(&[]).unwrap();
        assert!(empty.is_empty());

        let unsorted = vec![osc(13.0), osc(2.0)];
        assert!(to_modal_observation(&unsorted).is_err());
    }
}
