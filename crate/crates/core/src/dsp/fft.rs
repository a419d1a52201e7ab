//! Complex FFT for arbitrary lengths.
//!
//! Power-of-two sizes use an iterative radix-2 transform; every other size
//! goes through Bluestein's chirp-z reformulation on a power-of-two
//! convolution. Twiddles are computed directly from the angle (no
//! recurrence), so round-off stays near machine precision even for long
//! transforms.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

/// A precomputed transform of a fixed length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Trivial,
    Radix2 {
        twiddles: Vec<Complex64>,
        rev: Vec<usize>,
    },
    Bluestein {
        inner: Box<FftPlan>,
        chirp: Vec<Complex64>,
        kernel: Vec<Complex64>,
    },
}

fn cis(angle: f64) -> Complex64 {
    Complex64::new(libm::cos(angle), libm::sin(angle))
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        if n <= 1 {
            return Self { n, kind: Kind::Trivial };
        }
        if n.is_power_of_two() {
            let bits = n.trailing_zeros();
            let rev = (0..n)
                .map(|i| i.reverse_bits() >> (usize::BITS - bits))
                .collect();
            let twiddles = (0..n / 2)
                .map(|k| cis(-2.0 * PI * k as f64 / n as f64))
                .collect();
            return Self {
                n,
                kind: Kind::Radix2 { twiddles, rev },
            };
        }

        let m = (2 * n - 1).next_power_of_two();
        let inner = FftPlan::new(m);
        // k^2 mod 2n keeps the chirp angle small for large k.
        let two_n = 2 * n as u128;
        let chirp: Vec<Complex64> = (0..n)
            .map(|k| {
                let k2 = (k as u128 * k as u128) % two_n;
                cis(-PI * k2 as f64 / n as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); m];
        kernel[0] = chirp[0].conj();
        for k in 1..n {
            kernel[k] = chirp[k].conj();
            kernel[m - k] = chirp[k].conj();
        }
        inner.forward(&mut kernel);
        Self {
            n,
            kind: Kind::Bluestein {
                inner: Box::new(inner),
                chirp,
                kernel,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Unnormalized forward transform, `X_k = sum_j x_j exp(-2 pi i jk / n)`.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n, "buffer length must match the plan");
        match &self.kind {
            Kind::Trivial => {}
            Kind::Radix2 { twiddles, rev } => radix2(buf, twiddles, rev),
            Kind::Bluestein {
                inner,
                chirp,
                kernel,
            } => {
                let m = inner.len();
                let mut work = vec![Complex64::new(0.0, 0.0); m];
                for (w, (x, c)) in work.iter_mut().zip(buf.iter().zip(chirp)) {
                    *w = x * c;
                }
                inner.forward(&mut work);
                for (w, k) in work.iter_mut().zip(kernel) {
                    *w *= k;
                }
                inner.inverse(&mut work);
                for (x, (w, c)) in buf.iter_mut().zip(work.iter().zip(chirp)) {
                    *x = w * c;
                }
            }
        }
    }

    /// Inverse transform including the `1/n` factor.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        for x in buf.iter_mut() {
            *x = x.conj();
        }
        self.forward(buf);
        let scale = 1.0 / self.n.max(1) as f64;
        for x in buf.iter_mut() {
            *x = x.conj() * scale;
        }
    }
}

fn radix2(buf: &mut [Complex64], twiddles: &[Complex64], rev: &[usize]) {
    let n = buf.len();
    for i in 0..n {
        let j = rev[i];
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

/// Forward transform of a real sequence, zero-padded to `plan.len()`.
pub fn real_forward(plan: &FftPlan, x: &[f64]) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); plan.len()];
    for (b, &v) in buf.iter_mut().zip(x) {
        b.re = v;
    }
    plan.forward(&mut buf);
    buf
}
