//! Eigenvalues of small dense real matrices: balance, Householder reduction
//! to upper Hessenberg form, then Francis double-shift QR with deflation.

use alloc::vec;
use alloc::vec::Vec;


use super::Matrix;
use crate::error::{Error, Result};

pub type ComplexScalar = num_complex::Complex64;

const MAX_ITERATIONS_PER_EIGENVALUE: usize = 60;

/// All eigenvalues of a square matrix, with algebraic multiplicity.
///
/// Complex eigenvalues come in adjacent conjugate pairs, positive imaginary
/// part first. No further ordering is promised.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<ComplexScalar>> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let n = m.rows();
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![ComplexScalar::new(m[(0, 0)], 0.0)]),
        _ => {}
    }

    let mut h = m.clone();
    balance(&mut h);
    hessenberg(&mut h);
    hqr(h)
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Diagonal similarity scaling by powers of two so that row and column
/// norms are comparable. Exact in floating point.
fn balance(a: &mut Matrix) {
    const RADIX: f64 = 2.0;
    let n = a.rows();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let g = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= g;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// Orthogonal (Householder) similarity reduction to upper Hessenberg form.
/// Entries below the first subdiagonal are set to exactly zero.
fn hessenberg(h: &mut Matrix) {
    let n = h.rows();
    let high = n - 1;
    let mut ort = vec![0.0; n];
    for m in 1..high {
        let scale: f64 = (m..=high).map(|i| h[(i, m - 1)].abs()).sum();
        if scale == 0.0 {
            continue;
        }
        let mut hh = 0.0;
        for i in (m..=high).rev() {
            ort[i] = h[(i, m - 1)] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = libm::sqrt(hh);
        if ort[m] > 0.0 {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = 0.0;
            for i in (m..=high).rev() {
                f += ort[i] * h[(i, j)];
            }
            f /= hh;
            for i in m..=high {
                h[(i, j)] -= f * ort[i];
            }
        }
        for i in 0..=high {
            let mut f = 0.0;
            for j in (m..=high).rev() {
                f += ort[j] * h[(i, j)];
            }
            f /= hh;
            for j in m..=high {
                h[(i, j)] -= f * ort[j];
            }
        }
        h[(m, m - 1)] = scale * g;
    }
    for i in 2..n {
        for j in 0..i - 1 {
            h[(i, j)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (eigenvalues only).
///
/// Works on a 1-based copy so the index arithmetic stays close to the
/// classical EISPACK formulation.
fn hqr(h: Matrix) -> Result<Vec<ComplexScalar>> {
    let n = h.rows();
    let w = n + 1;
    let mut a = vec![0.0; w * w];
    for i in 0..n {
        for j in 0..n {
            a[(i + 1) * w + j + 1] = h[(i, j)];
        }
    }
    macro_rules! a {
        ($i:expr, $j:expr) => {
            a[($i) * w + ($j)]
        };
    }

    let mut wr = vec![0.0; w];
    let mut wi = vec![0.0; w];

    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a!(i, j).abs();
        }
    }

    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    let (mut x, mut y, mut z);
    let mut ww;
    while nn >= 1 {
        let mut its = 0;
        loop {
            // look for a single small subdiagonal element
            let mut l = nn;
            while l >= 2 {
                let mut s = a!(l - 1, l - 1).abs() + a!(l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a!(l, l - 1).abs() <= f64::EPSILON * s {
                    a!(l, l - 1) = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a!(nn, nn);
            if l == nn {
                // one root found
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            y = a!(nn - 1, nn - 1);
            ww = a!(nn, nn - 1) * a!(nn - 1, nn);
            if l == nn - 1 {
                // two roots found
                p = 0.5 * (y - x);
                q = p * p + ww;
                z = libm::sqrt(q.abs());
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    wr[nn - 1] = x + z;
                    wr[nn] = wr[nn - 1];
                    if z != 0.0 {
                        wr[nn] = x - ww / z;
                    }
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = z;
                    wi[nn] = -z;
                }
                nn = nn.saturating_sub(2);
                break;
            }

            if its == MAX_ITERATIONS_PER_EIGENVALUE {
                return Err(Error::ConvergenceFailure);
            }
            if its > 0 && its % 10 == 0 {
                // exceptional shift
                t += x;
                for i in 1..=nn {
                    a!(i, i) -= x;
                }
                let s = a!(nn, nn - 1).abs() + a!(nn - 1, nn - 2).abs();
                x = 0.75 * s;
                y = x;
                ww = -0.4375 * s * s;
            }
            its += 1;

            // form shift and look for two consecutive small subdiagonal elements
            let mut m = nn - 2;
            loop {
                z = a!(m, m);
                r = x - z;
                let s0 = y - z;
                p = (r * s0 - ww) / a!(m + 1, m) + a!(m, m + 1);
                q = a!(m + 1, m + 1) - z - r - s0;
                r = a!(m + 2, m + 1);
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a!(m, m - 1).abs() * (q.abs() + r.abs());
                let v = p.abs() * (a!(m - 1, m - 1).abs() + z.abs() + a!(m + 1, m + 1).abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a!(i, i - 2) = 0.0;
                if i != m + 2 {
                    a!(i, i - 3) = 0.0;
                }
            }

            // double QR step on rows l..nn and columns m..nn
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a!(k, k - 1);
                    q = a!(k + 1, k - 1);
                    r = 0.0;
                    if k != nn - 1 {
                        r = a!(k + 2, k - 1);
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = libm::sqrt(p * p + q * q + r * r).copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a!(k, k - 1) = -a!(k, k - 1);
                        }
                    } else {
                        a!(k, k - 1) = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        p = a!(k, j) + q * a!(k + 1, j);
                        if k != nn - 1 {
                            p += r * a!(k + 2, j);
                            a!(k + 2, j) -= p * z;
                        }
                        a!(k + 1, j) -= p * y;
                        a!(k, j) -= p * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        p = x * a!(i, k) + y * a!(i, k + 1);
                        if k != nn - 1 {
                            p += z * a!(i, k + 2);
                            a!(i, k + 2) -= p * r;
                        }
                        a!(i, k + 1) -= p * q;
                        a!(i, k) -= p;
                    }
                }
                k += 1;
            }
        }
    }

    let out: Vec<ComplexScalar> = (1..=n)
        .map(|i| ComplexScalar::new(wr[i], wi[i]))
        .collect();
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ConvergenceFailure);
    }
    Ok(out)
}
