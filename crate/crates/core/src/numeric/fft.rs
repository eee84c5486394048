//! Discrete Fourier transform used to build frequency-domain views.
//!
//! Power-of-two lengths take the iterative radix-2 path; anything else falls
//! back to the direct O(n^2) sum, which is fine at window scale.

/// Magnitude spectrum |X_k| for k = 0..n-1.
pub fn fft_magnitude(signal: &[f64]) -> Vec<f64> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    let (re, im) = if n.is_power_of_two() {
        fft_radix2(signal)
    } else {
        dft_direct(signal)
    };
    re.iter()
        .zip(&im)
        .map(|(r, i)| (r * r + i * i).sqrt())
        .collect()
}

fn fft_radix2(signal: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = signal.len();
    if n == 1 {
        return (vec![signal[0]], vec![0.0]);
    }
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    // Bit-reversal permutation into the output buffers.
    let bits = n.trailing_zeros();
    for (i, &x) in signal.iter().enumerate() {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        re[j] = x;
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * std::f64::consts::PI / len as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let mut cr = 1.0;
            let mut ci = 0.0;
            for k in 0..len / 2 {
                let a = start + k;
                let b = a + len / 2;
                let tr = re[b] * cr - im[b] * ci;
                let ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                let next_cr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = next_cr;
            }
        }
        len *= 2;
    }
    (re, im)
}

fn dft_direct(signal: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = signal.len();
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    for k in 0..n {
        let mut sr = 0.0;
        let mut si = 0.0;
        for (t, &x) in signal.iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
            sr += x * ang.cos();
            si += x * ang.sin();
        }
        re[k] = sr;
        im[k] = si;
    }
    (re, im)
}
