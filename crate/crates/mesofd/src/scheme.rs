//! Multi-level stencil coefficient sets: Taylor moment constants, the
//! three-level constraint solver, presets, and recovered-equation reports.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SchemeError {
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("preset parameter out of range: {0}")]
    BadParameter(String),
}

/// Sparse multi-level coefficient set.
///
/// Keys are `(k, q)` with `q <= 0`; `a` weights equilibrium terms and `b`
/// source terms. `shifted` selects the convention where the scheme's left
/// side sits one step ahead of the newest right-hand level (the explicit
/// three-level form); unshifted schemes place the left side at the newest
/// level itself.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeCoefficients {
    pub a: BTreeMap<(i32, i32), f64>,
    pub b: BTreeMap<(i32, i32), f64>,
    pub shifted: bool,
}

impl SchemeCoefficients {
    pub fn new(shifted: bool) -> Self {
        SchemeCoefficients {
            a: BTreeMap::new(),
            b: BTreeMap::new(),
            shifted,
        }
    }

    pub fn with_a(mut self, k: i32, q: i32, v: f64) -> Self {
        if v != 0.0 {
            self.a.insert((k, q), v);
        }
        self
    }

    pub fn with_b(mut self, k: i32, q: i32, v: f64) -> Self {
        if v != 0.0 {
            self.b.insert((k, q), v);
        }
        self
    }

    pub fn a_at(&self, k: i32, q: i32) -> f64 {
        self.a.get(&(k, q)).copied().unwrap_or(0.0)
    }

    pub fn b_at(&self, k: i32, q: i32) -> f64 {
        self.b.get(&(k, q)).copied().unwrap_or(0.0)
    }

    /// History depth after shift normalization: the degree of the
    /// amplification polynomial, and the number of stored history fields.
    pub fn levels(&self) -> i32 {
        let qmin = self
            .a
            .keys()
            .chain(self.b.keys())
            .map(|&(_, q)| q)
            .min()
            .unwrap_or(0);
        if self.shifted {
            1 - qmin
        } else {
            (-qmin).max(1)
        }
    }

    /// Largest |k| appearing in the stencil.
    pub fn max_offset(&self) -> i32 {
        self.a
            .keys()
            .chain(self.b.keys())
            .map(|&(k, _)| k.abs())
            .max()
            .unwrap_or(0)
    }

    /// Distinct `q` levels carrying nonzero coefficients.
    pub fn level_set(&self) -> Vec<i32> {
        let mut qs: Vec<i32> = self
            .a
            .keys()
            .chain(self.b.keys())
            .map(|&(_, q)| q)
            .collect();
        qs.sort_unstable();
        qs.dedup();
        qs
    }

    /// Per-level sums of the a and b coefficients.
    pub fn level_sums(&self, q: i32) -> (f64, f64) {
        let asum = self
            .a
            .iter()
            .filter(|&(&(_, qq), _)| qq == q)
            .map(|(_, v)| v)
            .sum();
        let bsum = self
            .b
            .iter()
            .filter(|&(&(_, qq), _)| qq == q)
            .map(|(_, v)| v)
            .sum();
        (asum, bsum)
    }
}

/// Taylor moment constants `A_lm` (l <= 3) and `B_lm` (l <= 2).
#[derive(Debug, Clone, Serialize)]
pub struct MomentConstants {
    pub a: BTreeMap<(u32, u32), f64>,
    pub b: BTreeMap<(u32, u32), f64>,
}

impl MomentConstants {
    pub fn a_at(&self, l: u32, m: u32) -> f64 {
        self.a.get(&(l, m)).copied().unwrap_or(0.0)
    }

    pub fn b_at(&self, l: u32, m: u32) -> f64 {
        self.b.get(&(l, m)).copied().unwrap_or(0.0)
    }
}

/// Targets for the three-level solver: the free parameter `a0` plus the
/// four constrained Taylor constants. `source_targets`, when present, is
/// `(B00, B10, B11)` used only for consistency reporting.
#[derive(Debug, Clone, Copy)]
pub struct StencilTargets {
    pub a0: f64,
    pub a10: f64,
    pub a11: f64,
    pub a21: f64,
    pub a22: f64,
    pub source_targets: Option<(f64, f64, f64)>,
}

/// Even/odd coefficient split over `k >= 1`.
#[derive(Debug, Clone)]
pub struct EvenOddSplit {
    pub a_plus: BTreeMap<(i32, i32), f64>,
    pub a_minus: BTreeMap<(i32, i32), f64>,
    pub b_plus: BTreeMap<(i32, i32), f64>,
    pub b_minus: BTreeMap<(i32, i32), f64>,
}

fn binom(l: u32, m: u32) -> f64 {
    let mut v = 1.0;
    for i in 0..m {
        v = v * (l - i) as f64 / (i + 1) as f64;
    }
    v
}

fn factorial(l: u32) -> f64 {
    (1..=l).map(|i| i as f64).product::<f64>().max(1.0)
}

/// Taylor moment constants of a coefficient set.
///
/// `A_lm = (1/l!) C(l,m) sum a_kq q^(l-m) k^m`; for shifted schemes the
/// pure-time constants `A_l0` (l >= 1) carry an extra `-1/l!` from expanding
/// the advanced left side.
pub fn coefficient_moments(c: &SchemeCoefficients) -> MomentConstants {
    let mut out = MomentConstants {
        a: BTreeMap::new(),
        b: BTreeMap::new(),
    };
    let sum_over = |map: &BTreeMap<(i32, i32), f64>, l: u32, m: u32| -> f64 {
        map.iter()
            .map(|(&(k, q), &v)| v * (q as f64).powi((l - m) as i32) * (k as f64).powi(m as i32))
            .sum()
    };
    for l in 0..=3u32 {
        for m in 0..=l {
            let mut v = binom(l, m) / factorial(l) * sum_over(&c.a, l, m);
            if c.shifted && m == 0 && l >= 1 {
                v -= 1.0 / factorial(l);
            }
            out.a.insert((l, m), v);
        }
    }
    for l in 0..=2u32 {
        for m in 0..=l {
            let v = binom(l, m) / factorial(l) * sum_over(&c.b, l, m);
            out.b.insert((l, m), v);
        }
    }
    out
}

/// Solve the shifted three-level constraint system for the coefficients
/// `(a1, a-1, a^0, a^1, a^-1)` realizing the given Taylor targets with the
/// chosen free parameter `a0`. The relation `A20 = -A10/2 - 1` holds by
/// construction; `b` weights are left empty (they are not determined by the
/// targets).
pub fn solve_three_level(t: &StencilTargets) -> SchemeCoefficients {
    let StencilTargets {
        a0,
        a10,
        a11,
        a21,
        a22,
        ..
    } = *t;
    let a1 = 0.5 * (-a0 + a10 + a11 + a21 + 2.0);
    let am1 = 0.5 * (-a0 + a10 - a11 - a21 + 2.0);
    let h0 = 0.5 * (-2.0 * a0 - 4.0 * a22 + 2.0);
    let h1 = 0.5 * (a0 - a10 - a21 + 2.0 * a22 - 2.0);
    let hm1 = 0.5 * (a0 - a10 + a21 + 2.0 * a22 - 2.0);
    SchemeCoefficients::new(true)
        .with_a(0, 0, a0)
        .with_a(1, 0, a1)
        .with_a(-1, 0, am1)
        .with_a(0, -1, h0)
        .with_a(1, -1, h1)
        .with_a(-1, -1, hm1)
}

/// Named coefficient presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    /// Single-relaxation-time collision at unit relaxation.
    SrtTau1,
    /// Two-relaxation-time collision on the magic line `s+ + s- = 2`.
    TrtMagic { s_minus: f64 },
    /// One-stage simplified kinetic scheme, no source weights.
    SimplifiedLb { tau: f64 },
    /// Three-level wave scheme with second-moment weight `gamma`.
    Wave { gamma: f64 },
}

/// Build a preset coefficient set, including source weights where the
/// originating scheme defines them.
pub fn preset(p: Preset) -> Result<SchemeCoefficients, SchemeError> {
    match p {
        Preset::SrtTau1 => Ok(SchemeCoefficients::new(true)
            .with_a(-1, 0, 1.0)
            .with_b(-1, 0, 1.5)
            .with_b(-1, -1, -0.5)),
        Preset::TrtMagic { s_minus } => {
            if !s_minus.is_finite() {
                return Err(SchemeError::BadParameter(format!("s_minus = {s_minus}")));
            }
            Ok(SchemeCoefficients::new(true)
                .with_a(1, 0, 1.0 - s_minus)
                .with_a(-1, 0, 1.0)
                .with_a(0, -1, -(1.0 - s_minus))
                .with_b(0, 0, -(1.0 - s_minus) / 2.0)
                .with_b(0, -1, -(1.0 - s_minus) / 2.0)
                .with_b(-1, 0, 1.5)
                .with_b(-1, -1, -0.5))
        }
        Preset::SimplifiedLb { tau } => {
            if !tau.is_finite() {
                return Err(SchemeError::BadParameter(format!("tau = {tau}")));
            }
            Ok(SchemeCoefficients::new(true)
                .with_a(0, 0, 2.0 * (1.0 - tau))
                .with_a(1, 0, tau - 1.0)
                .with_a(-1, 0, tau))
        }
        Preset::Wave { gamma } => {
            if !gamma.is_finite() {
                return Err(SchemeError::BadParameter(format!("gamma = {gamma}")));
            }
            Ok(SchemeCoefficients::new(true)
                .with_a(0, 0, 2.0 * (1.0 - gamma))
                .with_a(1, 0, gamma)
                .with_a(-1, 0, gamma)
                .with_a(0, -1, -1.0))
        }
    }
}

pub fn preset_by_name(name: &str, param: Option<f64>) -> Result<SchemeCoefficients, SchemeError> {
    match name.to_ascii_lowercase().as_str() {
        "srt" | "srt_tau1" => preset(Preset::SrtTau1),
        "trt" | "trt_magic" => preset(Preset::TrtMagic {
            s_minus: param.ok_or_else(|| SchemeError::BadParameter("trt needs s_minus".into()))?,
        }),
        "simplified_lb" | "slb" => preset(Preset::SimplifiedLb {
            tau: param.ok_or_else(|| SchemeError::BadParameter("simplified_lb needs tau".into()))?,
        }),
        "wave" => preset(Preset::Wave {
            gamma: param.ok_or_else(|| SchemeError::BadParameter("wave needs gamma".into()))?,
        }),
        other => Err(SchemeError::UnknownPreset(other.to_string())),
    }
}

/// Classification of the equation a coefficient set approximates.
#[derive(Debug, Clone, Serialize)]
pub enum PdeReport {
    ConvectionDiffusion {
        alpha: f64,
        /// `A10 == -B00` (source scaling consistency).
        source_scale_ok: bool,
        /// `B10 + A20 == 0` (time-dependent-source consistency).
        source_time_ok: bool,
        has_source_weights: bool,
    },
    Wave {
        alpha: f64,
    },
    Inconsistent {
        reasons: Vec<String>,
    },
}

const CLASSIFY_TOL: f64 = 1e-12;

/// Classify the recovered second-order equation and report its diffusion
/// (or wave) coefficient for the given time step, EDF weight `beta`, and
/// lattice sound speed.
pub fn recovered_pde(c: &SchemeCoefficients, dt: f64, beta: f64, cs2: f64) -> PdeReport {
    let mc = coefficient_moments(c);
    let (a00, a10, a11, a20, a21, a22) = (
        mc.a_at(0, 0),
        mc.a_at(1, 0),
        mc.a_at(1, 1),
        mc.a_at(2, 0),
        mc.a_at(2, 1),
        mc.a_at(2, 2),
    );
    let mut reasons = Vec::new();
    if (a00 - 1.0).abs() > CLASSIFY_TOL {
        reasons.push(format!("A00 = {a00} != 1"));
        return PdeReport::Inconsistent { reasons };
    }
    if (a10 - a11).abs() <= CLASSIFY_TOL && a10.abs() > CLASSIFY_TOL {
        let alpha = -(a22 / a10) * dt * beta * cs2;
        let b00 = mc.b_at(0, 0);
        let b10 = mc.b_at(1, 0);
        return PdeReport::ConvectionDiffusion {
            alpha,
            source_scale_ok: (a10 + b00).abs() <= CLASSIFY_TOL,
            source_time_ok: (b10 + a20).abs() <= CLASSIFY_TOL,
            has_source_weights: !c.b.is_empty(),
        };
    }
    if a10.abs() <= CLASSIFY_TOL
        && a11.abs() <= CLASSIFY_TOL
        && a21.abs() <= CLASSIFY_TOL
        && (a20 + 1.0).abs() <= CLASSIFY_TOL
    {
        return PdeReport::Wave {
            alpha: a22 * beta * cs2,
        };
    }
    if a10.abs() <= CLASSIFY_TOL && a11.abs() <= CLASSIFY_TOL {
        reasons.push(format!("A10 = A11 = 0 but A20 = {a20} != -1 or A21 = {a21} != 0"));
    } else {
        reasons.push(format!("A10 = {a10} != A11 = {a11}"));
    }
    PdeReport::Inconsistent { reasons }
}

/// Even/odd split `a_kq^+- = a_kq +- a_-kq` for `k >= 1` (same for `b`).
pub fn split_even_odd(c: &SchemeCoefficients) -> EvenOddSplit {
    let mut out = EvenOddSplit {
        a_plus: BTreeMap::new(),
        a_minus: BTreeMap::new(),
        b_plus: BTreeMap::new(),
        b_minus: BTreeMap::new(),
    };
    let ks: Vec<(i32, i32)> = c
        .a
        .keys()
        .chain(c.b.keys())
        .map(|&(k, q)| (k.abs(), q))
        .filter(|&(k, _)| k >= 1)
        .collect();
    for (k, q) in ks {
        out.a_plus.insert((k, q), c.a_at(k, q) + c.a_at(-k, q));
        out.a_minus.insert((k, q), c.a_at(k, q) - c.a_at(-k, q));
        out.b_plus.insert((k, q), c.b_at(k, q) + c.b_at(-k, q));
        out.b_minus.insert((k, q), c.b_at(k, q) - c.b_at(-k, q));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-14
    }

    #[test]
    fn srt_moment_constants() {
        let c = preset(Preset::SrtTau1).unwrap();
        let m = coefficient_moments(&c);
        assert!(close(m.a_at(0, 0), 1.0));
        assert!(close(m.a_at(1, 0), -1.0));
        assert!(close(m.a_at(1, 1), -1.0));
        assert!(close(m.a_at(2, 0), -0.5));
        assert!(close(m.a_at(2, 1), 0.0));
        assert!(close(m.a_at(2, 2), 0.5));
        assert!(close(m.b_at(0, 0), 1.0));
        assert!(close(m.b_at(1, 0), 0.5));
        assert!(close(m.b_at(1, 1), -1.0));
    }

    #[test]
    fn identity_scheme_constants() {
        let c = SchemeCoefficients::new(false).with_a(0, 0, 1.0);
        let m = coefficient_moments(&c);
        assert!(close(m.a_at(0, 0), 1.0));
        for l in 1..=3u32 {
            for mm in 0..=l {
                assert!(close(m.a_at(l, mm), 0.0), "A{l}{mm}");
            }
        }
    }

    #[test]
    fn wave_preset_constants() {
        let gamma = 0.375;
        let c = preset(Preset::Wave { gamma }).unwrap();
        let m = coefficient_moments(&c);
        assert!(close(m.a_at(1, 0), 0.0));
        assert!(close(m.a_at(1, 1), 0.0));
        assert!(close(m.a_at(2, 0), -1.0));
        assert!(close(m.a_at(2, 1), 0.0));
        assert!(close(m.a_at(2, 2), gamma));
    }

    #[test]
    fn solve_reproduces_srt() {
        let c = solve_three_level(&StencilTargets {
            a0: 0.0,
            a10: -1.0,
            a11: -1.0,
            a21: 0.0,
            a22: 0.5,
            source_targets: None,
        });
        assert!(close(c.a_at(-1, 0), 1.0));
        assert_eq!(c.a.len(), 1);
    }

    #[test]
    fn solve_case_a21_quarter() {
        let c = solve_three_level(&StencilTargets {
            a0: 0.0,
            a10: -1.0,
            a11: -1.0,
            a21: 0.25,
            a22: 0.5,
            source_targets: None,
        });
        assert!(close(c.a_at(-1, 0), 7.0 / 8.0));
        assert!(close(c.a_at(1, 0), 1.0 / 8.0));
        assert!(close(c.a_at(1, -1), -1.0 / 8.0));
        assert!(close(c.a_at(-1, -1), 1.0 / 8.0));
        assert!(close(c.a_at(0, -1), 0.0));
    }

    #[test]
    fn solve_case_free_parameter_quarter() {
        // With a0 = 1/4 the solver puts +1/8 on both history offsets.
        let c = solve_three_level(&StencilTargets {
            a0: 0.25,
            a10: -1.0,
            a11: -1.0,
            a21: 0.0,
            a22: 0.5,
            source_targets: None,
        });
        assert!(close(c.a_at(-1, 0), 7.0 / 8.0));
        assert!(close(c.a_at(1, 0), -1.0 / 8.0));
        assert!(close(c.a_at(0, -1), -0.25));
        assert!(close(c.a_at(1, -1), 1.0 / 8.0));
        assert!(close(c.a_at(-1, -1), 1.0 / 8.0));
        let m = coefficient_moments(&c);
        assert!(close(m.a_at(0, 0), 1.0));
    }

    #[test]
    fn trt_preset_and_inversion() {
        let c = preset(Preset::TrtMagic { s_minus: 1.2 }).unwrap();
        assert!(close(c.a_at(1, 0), -0.2));
        assert!(close(c.a_at(-1, 0), 1.0));
        assert!(close(c.a_at(0, -1), 0.2));
        assert!(close(c.b_at(0, 0), 0.1));
        assert!(close(c.b_at(0, -1), 0.1));
        assert!(close(c.b_at(-1, 0), 1.5));
        assert!(close(c.b_at(-1, -1), -0.5));

        // Moment constants and solver round-trip over sampled s_minus.
        for i in 0..20 {
            let s = 0.1 + 0.09 * i as f64;
            let c = preset(Preset::TrtMagic { s_minus: s }).unwrap();
            let m = coefficient_moments(&c);
            assert!(close(m.a_at(1, 0), -s));
            assert!(close(m.a_at(1, 1), -s));
            assert!(close(m.a_at(2, 1), 0.0));
            assert!(close(m.a_at(2, 2), (2.0 - s) / 2.0));
            let solved = solve_three_level(&StencilTargets {
                a0: 0.0,
                a10: -s,
                a11: -s,
                a21: 0.0,
                a22: (2.0 - s) / 2.0,
                source_targets: None,
            });
            for (key, v) in &c.a {
                assert!(close(solved.a_at(key.0, key.1), *v));
            }
        }
    }

    #[test]
    fn trt_collapses_to_srt() {
        let trt = preset(Preset::TrtMagic { s_minus: 1.0 }).unwrap();
        let srt = preset(Preset::SrtTau1).unwrap();
        assert_eq!(trt, srt);
    }

    #[test]
    fn simplified_lb_preset() {
        let c = preset(Preset::SimplifiedLb { tau: 0.8 }).unwrap();
        assert!(close(c.a_at(0, 0), 0.4));
        assert!(close(c.a_at(1, 0), -0.2));
        assert!(close(c.a_at(-1, 0), 0.8));
        let m = coefficient_moments(&c);
        assert!(close(m.a_at(0, 0), 1.0));
        assert!(close(m.a_at(2, 2), 0.3));
    }

    #[test]
    fn wave_preset_values() {
        let c = preset(Preset::Wave { gamma: 0.375 }).unwrap();
        assert!(close(c.a_at(0, 0), 1.25));
        assert!(close(c.a_at(1, 0), 0.375));
        assert!(close(c.a_at(-1, 0), 0.375));
        assert!(close(c.a_at(0, -1), -1.0));
    }

    #[test]
    fn recovered_ncde_report() {
        let c = preset(Preset::SrtTau1).unwrap();
        match recovered_pde(&c, 1.0 / 6.0, 1.0, 0.12) {
            PdeReport::ConvectionDiffusion {
                alpha,
                source_scale_ok,
                source_time_ok,
                ..
            } => {
                assert!(close(alpha, 0.01));
                assert!(source_scale_ok);
                assert!(source_time_ok);
            }
            other => panic!("expected convection-diffusion, got {other:?}"),
        }
    }

    #[test]
    fn recovered_wave_report() {
        let c = preset(Preset::Wave { gamma: 0.375 }).unwrap();
        match recovered_pde(&c, 0.1, 1.0, 4.0 / 3.0) {
            PdeReport::Wave { alpha } => assert!(close(alpha, 0.5)),
            other => panic!("expected wave, got {other:?}"),
        }
    }

    #[test]
    fn identity_scheme_inconsistent() {
        let c = SchemeCoefficients::new(false).with_a(0, 0, 1.0);
        assert!(matches!(
            recovered_pde(&c, 1.0, 1.0, 1.0),
            PdeReport::Inconsistent { .. }
        ));
    }

    #[test]
    fn even_odd_splits() {
        let srt = preset(Preset::SrtTau1).unwrap();
        let s = split_even_odd(&srt);
        assert!(close(s.a_plus[&(1, 0)], 1.0));
        assert!(close(s.a_minus[&(1, 0)], -1.0));

        let wave = preset(Preset::Wave { gamma: 0.3 }).unwrap();
        let s = split_even_odd(&wave);
        assert!(close(s.a_minus[&(1, 0)], 0.0));

        let case3 = solve_three_level(&StencilTargets {
            a0: 0.0,
            a10: -1.0,
            a11: -1.0,
            a21: 0.25,
            a22: 0.5,
            source_targets: None,
        });
        let s = split_even_odd(&case3);
        assert!(close(s.a_plus[&(1, -1)], 0.0));
        assert!(close(s.a_minus[&(1, -1)], -0.25));
    }

    #[test]
    fn shifted_a20_relation() {
        for (a0, a10, a11, a21, a22) in [
            (0.0, -1.0, -1.0, 0.0, 0.5),
            (0.3, -0.7, -0.7, 0.1, 0.9),
            (-0.2, 0.0, 0.0, 0.0, 0.4),
        ] {
            let c = solve_three_level(&StencilTargets {
                a0,
                a10,
                a11,
                a21,
                a22,
                source_targets: None,
            });
            let m = coefficient_moments(&c);
            assert!(close(m.a_at(2, 0), -m.a_at(1, 0) / 2.0 - 1.0));
        }
    }

    #[test]
    fn solver_round_trip_random_targets() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..1000 {
            let t = StencilTargets {
                a0: rng.gen_range(-2.0..2.0),
                a10: rng.gen_range(-2.0..2.0),
                a11: rng.gen_range(-2.0..2.0),
                a21: rng.gen_range(-2.0..2.0),
                a22: rng.gen_range(-2.0..2.0),
                source_targets: None,
            };
            let c = solve_three_level(&t);
            let m = coefficient_moments(&c);
            assert!((m.a_at(0, 0) - 1.0).abs() <= 1e-13);
            assert!((m.a_at(1, 0) - t.a10).abs() <= 1e-13);
            assert!((m.a_at(1, 1) - t.a11).abs() <= 1e-13);
            assert!((m.a_at(2, 1) - t.a21).abs() <= 1e-13);
            assert!((m.a_at(2, 2) - t.a22).abs() <= 1e-13);
            assert!((c.a_at(0, 0) - t.a0).abs() <= 1e-13);
        }
    }
}
