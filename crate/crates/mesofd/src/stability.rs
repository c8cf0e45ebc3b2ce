//! Von Neumann stability analysis of the macroscopic schemes with frozen
//! (constant-coefficient) equilibrium weights: Fourier symbols, closed-form
//! criteria for the two-level, theta, and three-level schemes, and a
//! brute-force spectral scan.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::edf::{self, EdfError, EdfSpec};
use crate::lattice::{idx2, LatticeModel};
use crate::roots;
use crate::scheme::{split_even_odd, SchemeCoefficients};

type C = Complex64;

const TOL: f64 = 1e-12;

/// Boundary tolerance on |lambda| <= 1 verdicts; neutrally stable schemes
/// sit exactly on the unit circle.
pub const MODULUS_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum StabilityError {
    #[error("equilibrium is not linear in the conserved variable (zeroth moment {0} != 1)")]
    NonlinearEdf(f64),
    #[error("amplification denominator 1 - A0 is singular")]
    SingularDenominator,
    #[error("scheme shape not supported here: {0}")]
    WrongShape(String),
    #[error("theta = {0} outside [0, 1]")]
    ThetaOutOfRange(f64),
    #[error("scan resolution {0} < 8")]
    ResolutionTooCoarse(usize),
    #[error(transparent)]
    Edf(#[from] EdfError),
}

/// Even/odd split of the frozen per-direction equilibrium weights, one entry
/// per opposite pair plus the rest direction's even part.
#[derive(Debug, Clone, Serialize)]
pub struct SymbolDecomposition {
    pub dim: usize,
    pub omega0_plus: f64,
    pub pairs: Vec<PairWeights>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairWeights {
    pub dir: [i32; 3],
    pub u_plus: f64,
    pub u_minus: f64,
}

impl SymbolDecomposition {
    /// Phase angle of a pair's representative direction for the per-axis
    /// phase vector `xi`.
    #[inline]
    fn angle(&self, p: &PairWeights, xi: &[f64; 3]) -> f64 {
        (0..self.dim).map(|a| p.dir[a] as f64 * xi[a]).sum()
    }

    /// Sum of the even weights counting both pair members and the rest
    /// direction; equals 1 for a unit-moment equilibrium.
    pub fn total_even(&self) -> f64 {
        self.omega0_plus + 2.0 * self.pairs.iter().map(|p| p.u_plus).sum::<f64>()
    }
}

/// Split the frozen equilibrium `f_j = phi * u_j` into even/odd parts over
/// opposite pairs. The spec must have unit zeroth moment (linearity in phi).
pub fn symbol_decomposition(
    lat: &LatticeModel,
    spec: &EdfSpec,
) -> Result<SymbolDecomposition, StabilityError> {
    if (spec.a - 1.0).abs() > TOL {
        return Err(StabilityError::NonlinearEdf(spec.a));
    }
    let values = edf::eval_quadratic_edf(lat, spec)?;
    let mut pairs = Vec::new();
    let mut omega0_plus = 0.0;
    for j in 0..lat.num_velocities() {
        let o = lat.opposite[j];
        if j == o {
            omega0_plus += values[j];
        } else if j < o {
            pairs.push(PairWeights {
                dir: lat.directions[j],
                u_plus: 0.5 * (values[j] + values[o]),
                u_minus: 0.5 * (values[j] - values[o]),
            });
        }
    }
    Ok(SymbolDecomposition {
        dim: lat.dim,
        omega0_plus,
        pairs,
    })
}

/// Frozen-coefficient equilibrium spec for a constant advection velocity:
/// `(1, u, (beta - 1) cs2 I + lambda_bar u u)`.
pub fn frozen_ncde_spec(lat: &LatticeModel, u: [f64; 3], beta: f64, lambda_bar: f64) -> EdfSpec {
    let mut c = [0.0; 9];
    for a in 0..lat.dim {
        c[idx2(a, a)] = (beta - 1.0) * lat.cs2;
        for b in 0..lat.dim {
            c[idx2(a, b)] += lambda_bar * u[a] * u[b];
        }
    }
    let mut spec = EdfSpec::new(1.0, u, c);
    spec.lambda_bar = Some(lambda_bar);
    spec
}

/// Per-level complex amplitudes `A_q` of the Fourier-transformed scheme at
/// phase vector `xi`, keyed by the scheme's own level index `q`.
pub fn level_amplitudes(
    c: &SchemeCoefficients,
    dec: &SymbolDecomposition,
    xi: &[f64; 3],
) -> std::collections::BTreeMap<i32, C> {
    use std::collections::BTreeMap;
    let split = split_even_odd(c);
    let mut amps: BTreeMap<i32, C> = BTreeMap::new();
    for (&(_, q), &v) in &c.a {
        *amps.entry(q).or_insert(C::new(0.0, 0.0)) += v;
    }
    for (&(k, q), &ap) in &split.a_plus {
        let am = split.a_minus[&(k, q)];
        let mut re = 0.0;
        let mut im = 0.0;
        for p in &dec.pairs {
            let ang = k as f64 * dec.angle(p, xi);
            re += 2.0 * ap * p.u_plus * (ang.cos() - 1.0);
            im += 2.0 * am * p.u_minus * ang.sin();
        }
        *amps.entry(q).or_insert(C::new(0.0, 0.0)) += C::new(re, im);
    }
    amps
}

/// Roots of the characteristic polynomial of the scheme's symbol at `xi`,
/// sorted by descending modulus.
pub fn amplification_roots(
    c: &SchemeCoefficients,
    dec: &SymbolDecomposition,
    xi: &[f64; 3],
) -> Result<Vec<C>, StabilityError> {
    let amps = level_amplitudes(c, dec, xi);
    let qmin = amps.keys().copied().min().unwrap_or(0);

    let (depth, tail) = if c.shifted {
        // Left side one step ahead: lambda^h = sum_q A_q lambda^(h-1+q).
        let h = (1 - qmin) as usize;
        let mut tail = vec![C::new(0.0, 0.0); h];
        for (&q, &a) in &amps {
            tail[(h as i32 - 1 + q) as usize] = -a;
        }
        (h, tail)
    } else {
        let a0 = amps.get(&0).copied().unwrap_or(C::new(0.0, 0.0));
        if qmin == 0 {
            // No history: either the identity scheme or a contradiction.
            if (a0 - C::new(1.0, 0.0)).norm() <= TOL {
                return Ok(vec![C::new(1.0, 0.0)]);
            }
            return Err(StabilityError::WrongShape(
                "no history levels and A0 != 1".into(),
            ));
        }
        let den = C::new(1.0, 0.0) - a0;
        if den.norm() < 1e-14 {
            return Err(StabilityError::SingularDenominator);
        }
        let h = (-qmin) as usize;
        let mut tail = vec![C::new(0.0, 0.0); h];
        for (&q, &a) in &amps {
            if q < 0 {
                tail[(h as i32 + q) as usize] = -a / den;
            }
        }
        (h, tail)
    };

    let mut r = roots::monic_roots(&tail);
    debug_assert_eq!(r.len(), depth);
    r.sort_by(|x, y| {
        y.norm()
            .partial_cmp(&x.norm())
            .unwrap()
            .then(y.re.partial_cmp(&x.re).unwrap())
            .then(y.im.partial_cmp(&x.im).unwrap())
    });
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    ConditionallyStable,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub verdict: Verdict,
    pub conditions: Vec<ConditionCheck>,
    pub max_modulus: Option<f64>,
    pub witness: Option<[f64; 3]>,
}

/// The a-coefficients of the single history level of a two-level scheme,
/// keyed by k, after shift normalization.
fn single_level_coeffs(c: &SchemeCoefficients) -> Result<Vec<(i32, f64)>, StabilityError> {
    let levels = c.level_set();
    let expect = if c.shifted { vec![0] } else { vec![-1] };
    let a_levels: Vec<i32> = {
        let mut qs: Vec<i32> = c.a.keys().map(|&(_, q)| q).collect();
        qs.sort_unstable();
        qs.dedup();
        qs
    };
    if a_levels != expect {
        return Err(StabilityError::WrongShape(format!(
            "expected a single history level, found a-levels {a_levels:?} (all levels {levels:?})"
        )));
    }
    let q = expect[0];
    let mut out: Vec<(i32, f64)> = c
        .a
        .iter()
        .filter(|&(&(_, qq), _)| qq == q)
        .map(|(&(k, _), &v)| (k, v))
        .collect();
    out.sort_by_key(|&(k, _)| k);
    Ok(out)
}

/// Closed-form stability conditions for the two-level explicit scheme with
/// a frozen linear equilibrium. Zero even products are admitted when the
/// matching odd product vanishes as well.
pub fn two_level_explicit_check(
    c: &SchemeCoefficients,
    dec: &SymbolDecomposition,
) -> Result<StabilityReport, StabilityError> {
    let coeffs = single_level_coeffs(c)?;
    let asum: f64 = coeffs.iter().map(|&(_, v)| v).sum();
    let kmax = coeffs.iter().map(|&(k, _)| k.abs()).max().unwrap_or(0);
    let a_at = |k: i32| coeffs.iter().find(|&&(kk, _)| kk == k).map_or(0.0, |&(_, v)| v);

    let mut positivity_ok = true;
    let mut min_even = f64::INFINITY;
    let mut sum_even = 0.0;
    let mut sum_ratio = 0.0;
    for k in 1..=kmax {
        let ap = a_at(k) + a_at(-k);
        let am = a_at(k) - a_at(-k);
        for p in &dec.pairs {
            let even = ap * p.u_plus;
            let odd = am * p.u_minus;
            min_even = min_even.min(even);
            if even < -TOL {
                positivity_ok = false;
            } else if even.abs() <= TOL {
                if odd.abs() > TOL {
                    positivity_ok = false;
                }
            } else {
                sum_ratio += 2.0 * odd * odd / even;
            }
            sum_even += 2.0 * even;
        }
    }
    if min_even == f64::INFINITY {
        min_even = 0.0;
    }

    let conditions = vec![
        ConditionCheck {
            name: "coefficient_sum_one",
            passed: (asum - 1.0).abs() <= TOL,
            value: asum,
            bound: 1.0,
        },
        ConditionCheck {
            name: "even_products_nonnegative",
            passed: positivity_ok,
            value: min_even,
            bound: 0.0,
        },
        ConditionCheck {
            name: "even_sum_le_one",
            passed: sum_even <= 1.0 + TOL,
            value: sum_even,
            bound: 1.0,
        },
        ConditionCheck {
            name: "odd_ratio_le_one",
            passed: sum_ratio <= 1.0 + TOL,
            value: sum_ratio,
            bound: 1.0,
        },
    ];
    let verdict = if conditions.iter().all(|c| c.passed) {
        Verdict::Stable
    } else {
        Verdict::Unstable
    };
    Ok(StabilityReport {
        verdict,
        conditions,
        max_modulus: None,
        witness: None,
    })
}

/// Stability of the two-level theta-blend scheme. `theta = 1` is fully
/// explicit, `theta = 0` fully implicit; for `theta <= 1/2` positivity of
/// the even products gives unconditional stability, otherwise the symbol is
/// scanned and the worst wavenumber reported.
pub fn theta_scheme_check(
    c: &SchemeCoefficients,
    dec: &SymbolDecomposition,
    theta: f64,
    resolution: usize,
) -> Result<StabilityReport, StabilityError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(StabilityError::ThetaOutOfRange(theta));
    }
    let coeffs = single_level_coeffs(c)?;
    let kmax = coeffs.iter().map(|&(k, _)| k.abs()).max().unwrap_or(0);
    let a_at = |k: i32| coeffs.iter().find(|&&(kk, _)| kk == k).map_or(0.0, |&(_, v)| v);

    let mut positivity_ok = true;
    let mut min_even = f64::INFINITY;
    for k in 1..=kmax {
        let ap = a_at(k) + a_at(-k);
        for p in &dec.pairs {
            let even = ap * p.u_plus;
            min_even = min_even.min(even);
            if even < -TOL || (even.abs() <= TOL && ((a_at(k) - a_at(-k)) * p.u_minus).abs() > TOL)
            {
                positivity_ok = false;
            }
        }
    }
    if min_even == f64::INFINITY {
        min_even = 0.0;
    }
    let mut conditions = vec![ConditionCheck {
        name: "even_products_nonnegative",
        passed: positivity_ok,
        value: min_even,
        bound: 0.0,
    }];

    if theta <= 0.5 && positivity_ok {
        return Ok(StabilityReport {
            verdict: Verdict::Stable,
            conditions,
            max_modulus: None,
            witness: None,
        });
    }

    // Scan the growth indicator 2A + (2 theta - 1)(A^2 + B^2).
    let symbol_ab = |xi: &[f64; 3]| -> (f64, f64) {
        let mut a = 0.0;
        let mut b = 0.0;
        for k in 1..=kmax {
            let ap = a_at(k) + a_at(-k);
            let am = a_at(k) - a_at(-k);
            for p in &dec.pairs {
                let ang = k as f64 * dec.angle(p, xi);
                a += 2.0 * ap * p.u_plus * (ang.cos() - 1.0);
                b += 2.0 * am * p.u_minus * ang.sin();
            }
        }
        (a, b)
    };
    let grid = phase_grid(dec.dim, resolution)?;
    let mut worst = f64::NEG_INFINITY;
    let mut witness = [0.0; 3];
    let mut max_mod: f64 = 0.0;
    for xi in grid {
        let (a, b) = symbol_ab(&xi);
        let num = 2.0 * a + (2.0 * theta - 1.0) * (a * a + b * b);
        let lam = C::new(1.0 + theta * a, theta * b)
            / (C::new(1.0, 0.0) - (1.0 - theta) * C::new(a, b));
        max_mod = max_mod.max(lam.norm());
        if num > worst {
            worst = num;
            witness = xi;
        }
    }
    conditions.push(ConditionCheck {
        name: "growth_indicator_nonpositive",
        passed: worst <= TOL,
        value: worst,
        bound: 0.0,
    });
    let verdict = if worst <= TOL {
        if theta <= 0.5 {
            Verdict::Stable
        } else {
            Verdict::ConditionallyStable
        }
    } else {
        Verdict::Unstable
    };
    Ok(StabilityReport {
        verdict,
        conditions,
        max_modulus: Some(max_mod),
        witness: Some(witness),
    })
}

/// Schur-Cohn criterion for `lambda^2 - p1 lambda - p0`: both roots lie in
/// the closed unit disk iff `|p1 + conj(p1) p0| <= 1 - |p0|^2`.
pub fn three_level_check(p0: C, p1: C) -> bool {
    (p1 + p1.conj() * p0).norm() <= 1.0 - p0.norm_sqr()
}

/// Stability checks for the magic-line two-relaxation scheme at one phase
/// vector: the exact per-wavenumber criterion `A^2 + B^2 <= 1` plus the
/// wavenumber-independent sufficient conditions.
pub fn trt_condition(dec: &SymbolDecomposition, xi: &[f64; 3]) -> StabilityReport {
    let mut a = dec.omega0_plus;
    let mut b = 0.0;
    for p in &dec.pairs {
        let ang = dec.angle(p, xi);
        a += 2.0 * p.u_plus * ang.cos();
        b += 2.0 * p.u_minus * ang.sin();
    }
    let ns = a * a + b * b;

    let mut pairs_positive = true;
    let mut min_plus = f64::INFINITY;
    let mut ratio = 0.0;
    for p in &dec.pairs {
        min_plus = min_plus.min(p.u_plus);
        if p.u_plus > TOL {
            ratio += 2.0 * p.u_minus * p.u_minus / p.u_plus;
        } else if p.u_plus < -TOL || p.u_minus.abs() > TOL {
            pairs_positive = false;
        }
    }
    if min_plus == f64::INFINITY {
        min_plus = 0.0;
    }

    let conditions = vec![
        ConditionCheck {
            name: "per_wavenumber_symbol_le_one",
            passed: ns <= 1.0 + TOL,
            value: ns,
            bound: 1.0,
        },
        ConditionCheck {
            name: "rest_even_nonnegative",
            passed: dec.omega0_plus >= -TOL,
            value: dec.omega0_plus,
            bound: 0.0,
        },
        ConditionCheck {
            name: "pair_even_positive",
            passed: pairs_positive,
            value: min_plus,
            bound: 0.0,
        },
        ConditionCheck {
            name: "odd_ratio_le_one",
            passed: ratio <= 1.0 + TOL,
            value: ratio,
            bound: 1.0,
        },
    ];
    let sufficient = conditions[1].passed && conditions[2].passed && conditions[3].passed;
    let verdict = if sufficient {
        Verdict::Stable
    } else if conditions[0].passed {
        Verdict::ConditionallyStable
    } else {
        Verdict::Unstable
    };
    StabilityReport {
        verdict,
        conditions,
        max_modulus: Some(ns.sqrt()),
        witness: Some(*xi),
    }
}

/// Closed-form bounds for the two-level explicit scheme with the linear
/// equilibrium: `|u|^2 <= 2 alpha / dt <= cs2 / (1 - w0)`, plus the
/// per-axis diffusion-number bound on the minimal axis and corner lattices.
pub fn linear_edf_bounds(
    lat: &LatticeModel,
    u: [f64; 3],
    alpha: f64,
    dt: f64,
) -> StabilityReport {
    let rest = lat.rest_index();
    let w0 = rest.map_or(0.0, |j| lat.weights[j]);
    let usq: f64 = (0..lat.dim).map(|a| u[a] * u[a]).sum();
    let rate = 2.0 * alpha / dt;
    let cap = lat.cs2 / (1.0 - w0);

    let mut conditions = vec![
        ConditionCheck {
            name: "advective_bound",
            passed: usq <= rate + TOL,
            value: usq,
            bound: rate,
        },
        ConditionCheck {
            name: "diffusive_bound",
            passed: rate <= cap + TOL,
            value: rate,
            bound: cap,
        },
    ];

    // Lattice-class diffusion-number report.
    let nonrest: Vec<&[i32; 3]> = lat
        .directions
        .iter()
        .filter(|d| **d != [0, 0, 0])
        .collect();
    let axis_minimal = nonrest.len() == 2 * lat.dim
        && nonrest
            .iter()
            .all(|d| (0..3).map(|a| d[a].abs()).sum::<i32>() == 1);
    let corner = nonrest.len() == (1 << lat.dim)
        && nonrest
            .iter()
            .all(|d| (0..lat.dim).all(|a| d[a].abs() == 1));
    if axis_minimal || corner {
        let sum: f64 = (0..lat.dim)
            .map(|a| {
                let dx = lat.axis_speeds[a] * dt;
                2.0 * alpha * dt / (dx * dx)
            })
            .sum();
        let bound = if axis_minimal { 1.0 } else { lat.dim as f64 };
        conditions.push(ConditionCheck {
            name: if axis_minimal {
                "axis_diffusion_sum"
            } else {
                "corner_diffusion_sum"
            },
            passed: sum <= bound + TOL,
            value: sum,
            bound,
        });
    }

    let verdict = if conditions[0].passed && conditions[1].passed {
        Verdict::Stable
    } else {
        Verdict::Unstable
    };
    StabilityReport {
        verdict,
        conditions,
        max_modulus: None,
        witness: None,
    }
}

fn phase_grid(dim: usize, resolution: usize) -> Result<Vec<[f64; 3]>, StabilityError> {
    if resolution < 8 {
        return Err(StabilityError::ResolutionTooCoarse(resolution));
    }
    let axis: Vec<f64> = (0..resolution)
        .map(|i| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / resolution as f64)
        .collect();
    let total = resolution.pow(dim as u32);
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut xi = [0.0; 3];
        let mut rem = idx;
        for a in 0..dim {
            xi[a] = axis[rem % resolution];
            rem /= resolution;
        }
        out.push(xi);
    }
    Ok(out)
}

/// Maximum root modulus over a uniform phase grid, with the wavenumber where
/// it is attained. Deterministic for a fixed resolution regardless of the
/// execution schedule.
pub fn spectral_scan(
    c: &SchemeCoefficients,
    dec: &SymbolDecomposition,
    resolution: usize,
) -> Result<(f64, [f64; 3]), StabilityError> {
    let grid = phase_grid(dec.dim, resolution)?;
    let eval = |i: usize| -> Result<(usize, f64), StabilityError> {
        let r = amplification_roots(c, dec, &grid[i])?;
        Ok((i, r.first().map_or(0.0, |z| z.norm())))
    };
    let pick = |a: (usize, f64), b: (usize, f64)| {
        if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
            b
        } else {
            a
        }
    };

    #[cfg(feature = "parallel")]
    let best = {
        use rayon::prelude::*;
        (0..grid.len())
            .into_par_iter()
            .map(eval)
            .try_reduce(|| (usize::MAX, f64::NEG_INFINITY), |a, b| Ok(pick(a, b)))?
    };
    #[cfg(not(feature = "parallel"))]
    let best = {
        let mut acc = (usize::MAX, f64::NEG_INFINITY);
        for i in 0..grid.len() {
            acc = pick(acc, eval(i)?);
        }
        acc
    };

    Ok((best.1, grid[best.0]))
}
