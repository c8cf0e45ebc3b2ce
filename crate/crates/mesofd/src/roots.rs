//! Roots of small monic complex polynomials.
//!
//! Degree <= 2 uses the cancellation-safe closed form (exact on double
//! roots, which neutrally stable schemes produce at zero wavenumber);
//! higher degrees go through companion-matrix eigenvalues via a shifted
//! complex Hessenberg QR iteration.

use num_complex::Complex64;

type C = Complex64;

/// Roots of `x^2 + b x + c`.
pub fn quadratic_roots(b: C, c: C) -> [C; 2] {
    let disc = b * b - 4.0 * c;
    let mut sq = disc.sqrt();
    // Align sqrt with b so the larger root is computed without cancellation.
    if (b.conj() * sq).re < 0.0 {
        sq = -sq;
    }
    let q = -(b + sq) / 2.0;
    if q.norm() == 0.0 {
        [C::new(0.0, 0.0), -b]
    } else {
        [q, c / q]
    }
}

/// Roots of the monic polynomial `x^n + tail[n-1] x^(n-1) + ... + tail[0]`.
pub fn monic_roots(tail: &[C]) -> Vec<C> {
    match tail.len() {
        0 => Vec::new(),
        1 => vec![-tail[0]],
        2 => quadratic_roots(tail[1], tail[0]).to_vec(),
        _ => companion_eigenvalues(tail),
    }
}

fn eig2(a: C, b: C, c: C, d: C) -> [C; 2] {
    // Eigenvalues of [[a, b], [c, d]].
    quadratic_roots(-(a + d), a * d - b * c)
}

fn companion_eigenvalues(tail: &[C]) -> Vec<C> {
    let n = tail.len();
    let mut h = vec![vec![C::new(0.0, 0.0); n]; n];
    for i in 0..n {
        h[i][n - 1] = -tail[i];
        if i + 1 < n {
            h[i + 1][i] = C::new(1.0, 0.0);
        }
    }

    let mut roots = Vec::with_capacity(n);
    let mut m = n;
    let mut stalled = 0usize;
    let eps = f64::EPSILON;
    while m > 0 {
        if m == 1 {
            roots.push(h[0][0]);
            break;
        }
        let sub = h[m - 1][m - 2].norm();
        let scale = h[m - 1][m - 1].norm() + h[m - 2][m - 2].norm();
        if sub <= eps * scale.max(1e-300) {
            roots.push(h[m - 1][m - 1]);
            m -= 1;
            stalled = 0;
            continue;
        }
        if m == 2 || h[m - 2][m - 3].norm() <= eps * (h[m - 2][m - 2].norm() + h[m - 3][m - 3].norm()).max(1e-300)
        {
            let pair = eig2(h[m - 2][m - 2], h[m - 2][m - 1], h[m - 1][m - 2], h[m - 1][m - 1]);
            roots.push(pair[0]);
            roots.push(pair[1]);
            m -= 2;
            stalled = 0;
            continue;
        }

        // Wilkinson shift: trailing 2x2 eigenvalue closest to the corner.
        let corner = h[m - 1][m - 1];
        let shift = if stalled > 0 && stalled % 12 == 0 {
            // Exceptional (deterministic) shift to break rare cycles.
            C::new(sub + h[m - 2][m - 3].norm(), 0.0)
        } else {
            let pair = eig2(h[m - 2][m - 2], h[m - 2][m - 1], h[m - 1][m - 2], corner);
            if (pair[0] - corner).norm() <= (pair[1] - corner).norm() {
                pair[0]
            } else {
                pair[1]
            }
        };
        qr_step(&mut h, m, shift);
        stalled += 1;
        assert!(stalled < 200, "QR iteration failed to converge");
    }
    roots
}

/// One explicit shifted QR sweep on the leading m-by-m Hessenberg block.
fn qr_step(h: &mut [Vec<C>], m: usize, shift: C) {
    for i in 0..m {
        h[i][i] -= shift;
    }
    let mut rots = Vec::with_capacity(m - 1);
    for i in 0..m - 1 {
        let x1 = h[i][i];
        let x2 = h[i + 1][i];
        let r = (x1.norm_sqr() + x2.norm_sqr()).sqrt();
        let (c, s) = if r < 1e-300 {
            (C::new(1.0, 0.0), C::new(0.0, 0.0))
        } else {
            (x1 / r, x2 / r)
        };
        for j in i..m {
            let a = h[i][j];
            let b = h[i + 1][j];
            h[i][j] = c.conj() * a + s.conj() * b;
            h[i + 1][j] = -s * a + c * b;
        }
        rots.push((c, s));
    }
    for (i, (c, s)) in rots.into_iter().enumerate() {
        for row in h.iter_mut().take(m) {
            let a = row[i];
            let b = row[i + 1];
            row[i] = a * c + b * s;
            row[i + 1] = -a * s.conj() + b * c.conj();
        }
    }
    for i in 0..m {
        h[i][i] += shift;
    }
}
