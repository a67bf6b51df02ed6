//! Forward complex FFT of arbitrary length.
//!
//! Power-of-two lengths run an iterative radix-2 decimation-in-time
//! transform. Other lengths go through Bluestein's chirp-z identity, which
//! rewrites the length-`n` DFT as a circular convolution evaluated with
//! radix-2 transforms of length `m >= 2n - 1`.

use std::f64::consts::PI;

use num_complex::Complex64;

#[derive(Debug, Clone)]
struct Radix2 {
    n: usize,
    /// `exp(-2πik/n)` for `k < n/2`.
    twiddles: Vec<Complex64>,
    bit_reverse: Vec<u32>,
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two());
        let twiddles = (0..n / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
            .collect();
        let bits = n.trailing_zeros();
        let bit_reverse = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        Self {
            n,
            twiddles,
            bit_reverse,
        }
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let n = self.n;
        for i in 0..n {
            let j = self.bit_reverse[i] as usize;
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }

    fn inverse(&self, buf: &mut [Complex64]) {
        buf.iter_mut().for_each(|z| *z = z.conj());
        self.forward(buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z = z.conj() * scale);
    }
}

#[derive(Debug, Clone)]
struct Bluestein {
    n: usize,
    inner: Radix2,
    /// `exp(-iπj²/n)` for `j < n`.
    chirp: Vec<Complex64>,
    /// Transform of the conjugate chirp arranged as a circular filter.
    filter: Vec<Complex64>,
}

impl Bluestein {
    fn new(n: usize) -> Self {
        let m = (2 * n - 1).next_power_of_two();
        let inner = Radix2::new(m);
        let two_n = 2 * n as u128;
        let chirp: Vec<Complex64> = (0..n)
            .map(|j| {
                // reduce j² mod 2n first to keep the angle exact for large n
                let r = ((j as u128 * j as u128) % two_n) as f64;
                Complex64::from_polar(1.0, -PI * r / n as f64)
            })
            .collect();
        let mut filter = vec![Complex64::new(0.0, 0.0); m];
        filter[0] = chirp[0].conj();
        for j in 1..n {
            filter[j] = chirp[j].conj();
            filter[m - j] = chirp[j].conj();
        }
        inner.forward(&mut filter);
        Self {
            n,
            inner,
            chirp,
            filter,
        }
    }

    fn forward(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        let m = self.inner.n;
        scratch.clear();
        scratch.extend(buf.iter().zip(&self.chirp).map(|(x, w)| x * w));
        scratch.resize(m, Complex64::new(0.0, 0.0));
        self.inner.forward(scratch);
        scratch.iter_mut().zip(&self.filter).for_each(|(a, b)| *a *= b);
        self.inner.inverse(scratch);
        for k in 0..self.n {
            buf[k] = scratch[k] * self.chirp[k];
        }
    }
}

#[derive(Debug, Clone)]
enum Algorithm {
    Trivial,
    Radix2(Radix2),
    Bluestein(Bluestein),
}

/// A precomputed forward DFT of one length:
/// `X[k] = Σ_j x[j] · exp(-2πi·jk/n)`, unnormalized.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    algorithm: Algorithm,
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        let algorithm = if n <= 1 {
            Algorithm::Trivial
        } else if n.is_power_of_two() {
            Algorithm::Radix2(Radix2::new(n))
        } else {
            Algorithm::Bluestein(Bluestein::new(n))
        };
        Self { n, algorithm }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Transforms `buf` in place. `scratch` is only used for non-power-of-two lengths.
    pub fn forward(&self, buf: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        assert_eq!(buf.len(), self.n, "buffer length must match the plan");
        match &self.algorithm {
            Algorithm::Trivial => {}
            Algorithm::Radix2(r) => r.forward(buf),
            Algorithm::Bluestein(b) => b.forward(buf, scratch),
        }
    }
}
