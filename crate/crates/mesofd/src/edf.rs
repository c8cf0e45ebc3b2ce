//! Equilibrium and source distribution functions built from moment targets.
//!
//! Every distribution here is an instance of one quadratic form
//! `g_j = w_j (A + c~_j . B + Q~_j : C)` whose moments are `(A, B, A D2 + C)`;
//! the convection-diffusion, Navier-Stokes, and source constructors are thin
//! adapters choosing `(A, B, C)`.

use serde::Serialize;
use thiserror::Error;

use crate::lattice::{idx2, LatticeModel};

#[derive(Debug, Error, PartialEq)]
pub enum EdfError {
    #[error("degenerate scaling: c_a^2 == cs2 on axis {axis}")]
    DegenerateDenominator { axis: usize },
    #[error("value count {got} does not match lattice size {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Moment triple defining one quadratic distribution: zeroth moment `a`,
/// first moment `b`, and second-moment deviation `c` (so the full second
/// moment is `a * D2 + c`). `lambda_bar` records how the convective tensor
/// term was chosen when built by [`ncde_edf`]; it does not affect evaluation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EdfSpec {
    pub a: f64,
    pub b: [f64; 3],
    pub c: [f64; 9],
    pub lambda_bar: Option<f64>,
}

impl EdfSpec {
    pub fn new(a: f64, b: [f64; 3], c: [f64; 9]) -> Self {
        EdfSpec {
            a,
            b,
            c,
            lambda_bar: None,
        }
    }

    pub fn zero() -> Self {
        EdfSpec::new(0.0, [0.0; 3], [0.0; 9])
    }
}

/// Moments of a set of per-direction values, by direct summation.
#[derive(Debug, Clone, Copy)]
pub struct MomentSet {
    pub m0: f64,
    pub m1: [f64; 3],
    pub m2: [f64; 9],
    pub m3: [f64; 27],
}

impl MomentSet {
    pub fn m2_at(&self, a: usize, b: usize) -> f64 {
        self.m2[idx2(a, b)]
    }

    pub fn m3_at(&self, a: usize, b: usize, c: usize) -> f64 {
        self.m3[9 * a + 3 * b + c]
    }
}

/// Per-direction evaluation kernel: `g_j = a0 * A + sum b_coef . B + sum
/// c_coef : C`. Precomputed once per lattice so the stepper's inner loop is
/// a short dot product.
#[derive(Debug, Clone)]
pub struct DirectionKernel {
    pub base: f64,
    pub b_coef: [f64; 3],
    pub c_coef: [f64; 9],
}

impl DirectionKernel {
    #[inline]
    pub fn eval(&self, spec: &EdfSpec) -> f64 {
        let mut v = self.base * spec.a;
        for a in 0..3 {
            v += self.b_coef[a] * spec.b[a];
        }
        for i in 0..9 {
            v += self.c_coef[i] * spec.c[i];
        }
        v
    }
}

/// Build the evaluation kernels for every direction of a lattice.
///
/// Scalings: `c~_a = c_a / cs2`, diagonal `Q~_aa = (c_a^2 - cs2) / (cs2
/// (c_a^2 - cs2))`-style with the axis speed, off-diagonal `Q~_ab = c_a c_b /
/// (2 cs4)`.
pub fn direction_kernels(lat: &LatticeModel) -> Result<Vec<DirectionKernel>, EdfError> {
    let cs2 = lat.cs2;
    let cs4 = cs2 * cs2;
    for a in 0..lat.dim {
        let ca2 = lat.axis_speeds[a] * lat.axis_speeds[a];
        if (ca2 - cs2).abs() <= 1e-14 * ca2.max(1.0) {
            return Err(EdfError::DegenerateDenominator { axis: a });
        }
    }
    let mut kernels = Vec::with_capacity(lat.num_velocities());
    for j in 0..lat.num_velocities() {
        let w = lat.weights[j];
        let mut b_coef = [0.0; 3];
        let mut c_coef = [0.0; 9];
        for a in 0..lat.dim {
            let cja = lat.velocity(j, a);
            b_coef[a] = w * cja / cs2;
            for b in 0..lat.dim {
                let cjb = lat.velocity(j, b);
                let q = if a == b {
                    let ca2 = lat.axis_speeds[a] * lat.axis_speeds[a];
                    (cja * cja - cs2) / (cs2 * (ca2 - cs2))
                } else {
                    (cja * cjb) / (2.0 * cs4)
                };
                c_coef[idx2(a, b)] = w * q;
            }
        }
        kernels.push(DirectionKernel {
            base: w,
            b_coef,
            c_coef,
        });
    }
    Ok(kernels)
}

/// Evaluate the quadratic distribution for every direction.
pub fn eval_quadratic_edf(lat: &LatticeModel, spec: &EdfSpec) -> Result<Vec<f64>, EdfError> {
    let kernels = direction_kernels(lat)?;
    Ok(kernels.iter().map(|k| k.eval(spec)).collect())
}

/// Moment triple for the convection-diffusion equilibrium:
/// `(phi, B, beta cs2 D + C_extra - cs2 phi I)`.
pub fn ncde_spec(
    lat: &LatticeModel,
    phi: f64,
    bflux: [f64; 3],
    d_tensor: [f64; 9],
    c_extra: [f64; 9],
    beta: f64,
) -> EdfSpec {
    let cs2 = lat.cs2;
    let mut c = [0.0; 9];
    for i in 0..9 {
        c[i] = beta * cs2 * d_tensor[i] + c_extra[i];
    }
    for a in 0..lat.dim {
        c[idx2(a, a)] -= cs2 * phi;
    }
    EdfSpec::new(phi, bflux, c)
}

/// Convection-diffusion equilibrium values.
pub fn ncde_edf(
    lat: &LatticeModel,
    phi: f64,
    bflux: [f64; 3],
    d_tensor: [f64; 9],
    c_extra: [f64; 9],
    beta: f64,
) -> Result<Vec<f64>, EdfError> {
    eval_quadratic_edf(lat, &ncde_spec(lat, phi, bflux, d_tensor, c_extra, beta))
}

/// Source distribution `F_j = w_j (S + c_j . M1F / cs2)`, with moments
/// `(S, M1F, S D2)`.
pub fn ncde_source_df(lat: &LatticeModel, s: f64, m1f: [f64; 3]) -> Result<Vec<f64>, EdfError> {
    eval_quadratic_edf(lat, &EdfSpec::new(s, m1f, [0.0; 9]))
}

/// Navier-Stokes equilibrium with moments `(rho, rho u, rho u u + cs2 rho I)`.
pub fn nse_edf(lat: &LatticeModel, rho: f64, u: [f64; 3]) -> Result<Vec<f64>, EdfError> {
    let mut b = [0.0; 3];
    let mut c = [0.0; 9];
    for a in 0..lat.dim {
        b[a] = rho * u[a];
        for bx in 0..lat.dim {
            c[idx2(a, bx)] = rho * u[a] * u[bx];
        }
    }
    eval_quadratic_edf(lat, &EdfSpec::new(rho, b, c))
}

/// Navier-Stokes force distribution with moments `(S, F, M2F)`.
pub fn nse_force_df(
    lat: &LatticeModel,
    s: f64,
    force: [f64; 3],
    m2f: [f64; 9],
) -> Result<Vec<f64>, EdfError> {
    let mut c = m2f;
    for a in 0..lat.dim {
        c[idx2(a, a)] -= lat.cs2 * s;
    }
    eval_quadratic_edf(lat, &EdfSpec::new(s, force, c))
}

/// Zeroth through third moments of a set of per-direction values.
pub fn moments_of(values: &[f64], lat: &LatticeModel) -> Result<MomentSet, EdfError> {
    if values.len() != lat.num_velocities() {
        return Err(EdfError::LengthMismatch {
            expected: lat.num_velocities(),
            got: values.len(),
        });
    }
    let d = lat.dim;
    let mut m = MomentSet {
        m0: 0.0,
        m1: [0.0; 3],
        m2: [0.0; 9],
        m3: [0.0; 27],
    };
    for (j, &v) in values.iter().enumerate() {
        m.m0 += v;
        for a in 0..d {
            let ca = lat.velocity(j, a);
            m.m1[a] += v * ca;
            for b in 0..d {
                let cb = lat.velocity(j, b);
                m.m2[idx2(a, b)] += v * ca * cb;
                for c in 0..d {
                    m.m3[9 * a + 3 * b + c] += v * ca * cb * lat.velocity(j, c);
                }
            }
        }
    }
    Ok(m)
}

/// Even/odd split over opposite direction pairs:
/// `g_j^+ = (g_j + g_jbar)/2`, `g_j^- = (g_j - g_jbar)/2`.
pub fn even_odd_split(values: &[f64], lat: &LatticeModel) -> (Vec<f64>, Vec<f64>) {
    let mut plus = vec![0.0; values.len()];
    let mut minus = vec![0.0; values.len()];
    for j in 0..values.len() {
        let o = lat.opposite[j];
        plus[j] = 0.5 * (values[j] + values[o]);
        minus[j] = 0.5 * (values[j] - values[o]);
    }
    (plus, minus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_lattice, LatticeName};

    const THIRD: f64 = 1.0 / 3.0;

    fn rd2q9_std() -> LatticeModel {
        build_lattice(LatticeName::RD2Q9, &[THIRD, THIRD], &[1.0, 1.0]).unwrap()
    }

    fn mat2(c00: f64, c01: f64, c10: f64, c11: f64) -> [f64; 9] {
        let mut c = [0.0; 9];
        c[idx2(0, 0)] = c00;
        c[idx2(0, 1)] = c01;
        c[idx2(1, 0)] = c10;
        c[idx2(1, 1)] = c11;
        c
    }

    #[test]
    fn identity_spec_gives_weights() {
        let lat = rd2q9_std();
        let g = eval_quadratic_edf(&lat, &EdfSpec::new(1.0, [0.0; 3], [0.0; 9])).unwrap();
        for (j, v) in g.iter().enumerate() {
            assert!((v - lat.weights[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn first_moment_reproduced() {
        let lat = rd2q9_std();
        let g =
            eval_quadratic_edf(&lat, &EdfSpec::new(1.0, [0.1, 0.1, 0.0], [0.0; 9])).unwrap();
        let m = moments_of(&g, &lat).unwrap();
        assert!((m.m0 - 1.0).abs() < 1e-14);
        assert!((m.m1[0] - 0.1).abs() < 1e-14);
        assert!((m.m1[1] - 0.1).abs() < 1e-14);
    }

    #[test]
    fn pure_deviatoric_second_moment() {
        let lat = rd2q9_std();
        let c = mat2(0.2, 0.0, 0.0, -0.1);
        let g = eval_quadratic_edf(&lat, &EdfSpec::new(0.0, [0.0; 3], c)).unwrap();
        let m = moments_of(&g, &lat).unwrap();
        assert!(m.m0.abs() < 1e-14);
        assert!((m.m2_at(0, 0) - 0.2).abs() < 1e-14);
        assert!((m.m2_at(1, 1) + 0.1).abs() < 1e-14);
        assert!(m.m2_at(0, 1).abs() < 1e-14);
    }

    #[test]
    fn ncde_second_moment_with_uu() {
        // phi=1, B=phi*u, D=phi*I, C_extra=phi*uu, beta=1 -> m2 = cs2 I + uu.
        let lat = rd2q9_std();
        let u = [0.1, 0.1, 0.0];
        let uu = mat2(0.01, 0.01, 0.01, 0.01);
        let mut d = [0.0; 9];
        d[idx2(0, 0)] = 1.0;
        d[idx2(1, 1)] = 1.0;
        let g = ncde_edf(&lat, 1.0, u, d, uu, 1.0).unwrap();
        let m = moments_of(&g, &lat).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let expect = if a == b { lat.cs2 + 0.01 } else { 0.01 };
                assert!((m.m2_at(a, b) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ncde_zero_phi_is_zero() {
        let lat = rd2q9_std();
        let mut d = [0.0; 9];
        d[idx2(0, 0)] = 0.0;
        let g = ncde_edf(&lat, 0.0, [0.0; 3], d, [0.0; 9], 0.7).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-16));
    }

    #[test]
    fn wave_edf_matches_square_lattice_closed_form() {
        // u = 0, D = phi I: f_j = w_j phi [1 + (beta-1)(|c_j|^2 - 2 cs2)/(2 cs2)]
        // on any square lattice with d0 = 1/3 per axis.
        for name in [LatticeName::RD2Q9, LatticeName::RD2Q5I] {
            let lat = build_lattice(name, &[THIRD, THIRD], &[2.0, 2.0]).unwrap();
            let beta = 0.75;
            let phi = 1.3;
            let mut d = [0.0; 9];
            d[idx2(0, 0)] = phi;
            d[idx2(1, 1)] = phi;
            let g = ncde_edf(&lat, phi, [0.0; 3], d, [0.0; 9], beta).unwrap();
            for j in 0..lat.num_velocities() {
                let csq: f64 = (0..2).map(|a| lat.velocity(j, a).powi(2)).sum();
                let expect = lat.weights[j]
                    * phi
                    * (1.0 + (beta - 1.0) * (csq - 2.0 * lat.cs2) / (2.0 * lat.cs2));
                assert!((g[j] - expect).abs() < 1e-14, "{name} dir {j}");
            }
        }
    }

    #[test]
    fn source_df_moments() {
        let lat = rd2q9_std();
        let f = ncde_source_df(&lat, 1.0, [0.0; 3]).unwrap();
        for (j, v) in f.iter().enumerate() {
            assert!((v - lat.weights[j]).abs() < 1e-15);
        }
        let m = moments_of(&f, &lat).unwrap();
        assert!(m.m1[0].abs() < 1e-15 && m.m1[1].abs() < 1e-15);

        // Convective source: F_j = w_j R (1 + c_j.u/cs2) has M1F = R u.
        let r = 0.9;
        let u = [0.1, 0.1, 0.0];
        let f = ncde_source_df(&lat, r, [r * u[0], r * u[1], 0.0]).unwrap();
        for j in 0..lat.num_velocities() {
            let cu = lat.velocity(j, 0) * u[0] + lat.velocity(j, 1) * u[1];
            let expect = lat.weights[j] * r * (1.0 + cu / lat.cs2);
            assert!((f[j] - expect).abs() < 1e-15);
        }
        let m = moments_of(&f, &lat).unwrap();
        assert!((m.m1[0] - r * u[0]).abs() < 1e-14);
    }

    #[test]
    fn nse_moments() {
        let lat = rd2q9_std();
        let f = nse_edf(&lat, 1.0, [0.0; 3]).unwrap();
        for (j, v) in f.iter().enumerate() {
            assert!((v - lat.weights[j]).abs() < 1e-15);
        }
        let f = nse_edf(&lat, 1.0, [0.1, 0.0, 0.0]).unwrap();
        let m = moments_of(&f, &lat).unwrap();
        assert!((m.m2_at(0, 0) - (lat.cs2 + 0.01)).abs() < 1e-14);
        assert!((m.m2_at(1, 1) - lat.cs2).abs() < 1e-14);
        assert!(m.m2_at(0, 1).abs() < 1e-14);
    }

    #[test]
    fn nse_incompressible_variant_moments() {
        // f = g(rho, rho0 u, rho0 uu) has moments (rho, rho0 u, rho0 uu + cs2 rho I).
        let lat = rd2q9_std();
        let (rho, rho0) = (1.02, 1.0);
        let u = [0.1, -0.05, 0.0];
        let mut b = [0.0; 3];
        let mut c = [0.0; 9];
        for a in 0..2 {
            b[a] = rho0 * u[a];
            for bx in 0..2 {
                c[idx2(a, bx)] = rho0 * u[a] * u[bx];
            }
        }
        let f = eval_quadratic_edf(&lat, &EdfSpec::new(rho, b, c)).unwrap();
        let m = moments_of(&f, &lat).unwrap();
        assert!((m.m0 - rho).abs() < 1e-14);
        for a in 0..2 {
            assert!((m.m1[a] - rho0 * u[a]).abs() < 1e-14);
            for bx in 0..2 {
                let expect = rho0 * u[a] * u[bx] + if a == bx { lat.cs2 * rho } else { 0.0 };
                assert!((m.m2_at(a, bx) - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn nse_force_moments() {
        let lat = rd2q9_std();
        let f = nse_force_df(&lat, 0.0, [1.0, 0.0, 0.0], [0.0; 9]).unwrap();
        let m = moments_of(&f, &lat).unwrap();
        assert!(m.m0.abs() < 1e-14);
        assert!((m.m1[0] - 1.0).abs() < 1e-14);
        for i in 0..9 {
            assert!(m.m2[i].abs() < 1e-14);
        }
    }

    #[test]
    fn third_moment_closed_form() {
        // m3_abc = D2_ab B_c + D2_ac B_b + D2_bc B_a + aniso_abct B_t / cs2.
        let lat = rd2q9_std();
        let f = nse_edf(&lat, 1.0, [0.1, 0.1, 0.0]).unwrap();
        let m = moments_of(&f, &lat).unwrap();
        let t = lat.moments();
        let bvec = m.m1;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    let mut expect = t.delta2_at(a, b) * bvec[c]
                        + t.delta2_at(a, c) * bvec[b]
                        + t.delta2_at(b, c) * bvec[a];
                    for th in 0..2 {
                        expect += t.aniso_at(a, b, c, th) * bvec[th] / lat.cs2;
                    }
                    assert!((m.m3_at(a, b, c) - expect).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_values_zero_moments() {
        let lat = rd2q9_std();
        let m = moments_of(&vec![0.0; 9], &lat).unwrap();
        assert_eq!(m.m0, 0.0);
        assert!(m.m2.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn length_mismatch_rejected() {
        let lat = rd2q9_std();
        let err = moments_of(&[0.0; 5], &lat).unwrap_err();
        assert!(matches!(err, EdfError::LengthMismatch { expected: 9, got: 5 }));
    }

    #[test]
    fn degenerate_denominator_rejected() {
        // d0 = 1 makes cs2 == c^2.
        let lat = build_lattice(LatticeName::RD2Q5II, &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        let err = eval_quadratic_edf(&lat, &EdfSpec::new(1.0, [0.0; 3], [0.0; 9])).unwrap_err();
        assert!(matches!(err, EdfError::DegenerateDenominator { axis: 0 }));
    }

    #[test]
    fn even_odd_split_sums() {
        let lat = rd2q9_std();
        let g = ncde_edf(
            &lat,
            1.0,
            [0.3, -0.2, 0.0],
            {
                let mut d = [0.0; 9];
                d[idx2(0, 0)] = 1.0;
                d[idx2(1, 1)] = 1.0;
                d
            },
            mat2(0.02, 0.01, 0.01, 0.05),
            0.8,
        )
        .unwrap();
        let (plus, minus) = even_odd_split(&g, &lat);
        let sum_minus: f64 = minus.iter().sum();
        assert!(sum_minus.abs() <= 1e-14);
        for a in 0..2 {
            let c_plus: f64 = (0..9).map(|j| lat.velocity(j, a) * plus[j]).sum();
            assert!(c_plus.abs() <= 1e-14);
        }
        for j in 0..9 {
            assert!((plus[j] + minus[j] - g[j]).abs() <= 1e-15);
        }
    }
}
