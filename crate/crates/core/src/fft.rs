//! Cubic 3-D complex FFT built from rustfft line transforms.
//!
//! Forward transforms are unnormalized; [`inverse`] divides by `m^3`.
//! Line transforms run in parallel, but every output value is produced by
//! the same sequence of operations regardless of thread count.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

type Plan = Arc<dyn Fft<f64>>;

fn plan(m: usize, direction: FftDirection) -> Plan {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Plan>>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let forward = matches!(direction, FftDirection::Forward);
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry((m, forward))
        .or_insert_with(|| FftPlanner::new().plan_fft(m, direction))
        .clone()
}

fn transform_lines(data: &mut [Complex64], m: usize, plan: &Plan) {
    data.par_chunks_mut(m * m).for_each(|plane| {
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        for line in plane.chunks_exact_mut(m) {
            plan.process_with_scratch(line, &mut scratch);
        }
    });
}

/// Transforms along all three axes in place.
fn transform(data: &mut [Complex64], m: usize, direction: FftDirection) {
    assert_eq!(data.len(), m * m * m, "data is not an m^3 cube");
    let p = plan(m, direction);
    let mut buf = vec![Complex64::default(); data.len()];

    // axis 2 (contiguous)
    transform_lines(data, m, &p);

    // axis 1: (i, j, k) -> buf (i, k, j)
    buf.par_chunks_mut(m * m).enumerate().for_each(|(i, plane)| {
        for k in 0..m {
            for j in 0..m {
                plane[k * m + j] = data[(i * m + j) * m + k];
            }
        }
    });
    transform_lines(&mut buf, m, &p);
    data.par_chunks_mut(m * m).enumerate().for_each(|(i, plane)| {
        for j in 0..m {
            for k in 0..m {
                plane[j * m + k] = buf[(i * m + k) * m + j];
            }
        }
    });

    // axis 0: (i, j, k) -> buf (j, k, i)
    buf.par_chunks_mut(m * m).enumerate().for_each(|(j, plane)| {
        for k in 0..m {
            for i in 0..m {
                plane[k * m + i] = data[(i * m + j) * m + k];
            }
        }
    });
    transform_lines(&mut buf, m, &p);
    data.par_chunks_mut(m * m).enumerate().for_each(|(i, plane)| {
        for j in 0..m {
            for k in 0..m {
                plane[j * m + k] = buf[(j * m + k) * m + i];
            }
        }
    });
}

pub fn forward(data: &mut [Complex64], m: usize) {
    transform(data, m, FftDirection::Forward);
}

pub fn inverse(data: &mut [Complex64], m: usize) {
    transform(data, m, FftDirection::Inverse);
    let scale = 1.0 / (m * m * m) as f64;
    data.par_iter_mut().for_each(|z| *z *= scale);
}

pub fn forward_real(values: &[f64], m: usize) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward(&mut data, m);
    data
}

/// Inverse transform keeping the real part.
pub fn inverse_real(mut data: Vec<Complex64>, m: usize) -> Vec<f64> {
    inverse(&mut data, m);
    data.into_iter().map(|z| z.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft(values: &[f64], m: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); m * m * m];
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let mut acc = Complex64::default();
                    for i in 0..m {
                        for j in 0..m {
                            for k in 0..m {
                                let ph = -2.0 * PI * ((a * i + b * j + c * k) as f64) / m as f64;
                                acc += values[(i * m + j) * m + k] * Complex64::from_polar(1.0, ph);
                            }
                        }
                    }
                    out[(a * m + b) * m + c] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        let m = 6;
        let values: Vec<f64> = (0..m * m * m).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let fast = forward_real(&values, m);
        let slow = naive_dft(&values, m);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn round_trip() {
        let m = 8;
        let values: Vec<f64> = (0..m * m * m).map(|i| (i as f64 * 0.37).cos()).collect();
        let back = inverse_real(forward_real(&values, m), m);
        for (a, b) in values.iter().zip(&back) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
