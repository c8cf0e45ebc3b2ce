//! Shared helpers for the integration suites: an independent brute-force
//! implementation of one scheme step, written against the raw formulas with
//! its own loops, wrap logic, and equilibrium evaluation.

use mesofd::lattice::LatticeModel;
use mesofd::scheme::SchemeCoefficients;
use mesofd::stepper::{Grid, ProblemSpec, SimulationState};

/// One explicit update at every periodic node, by direct summation:
/// `phi(x, t+dt) = sum_j sum_kq [a_kq g_j(x + k c_j dt, t_q) + dt b_kq F_j]`
/// with the square-lattice equilibrium written out longhand
/// (valid for d0 = 1/3 per axis, which all callers use):
/// `g_j = w_j phi [1 + c_j.u / cs2 + ((beta-1) cs2 I + lb u u):(c_j c_j - cs2 I) / (2 cs4)]`.
pub fn brute_force_step(
    s: &SimulationState,
    c: &SchemeCoefficients,
    p: &ProblemSpec,
    g: &Grid,
    lat: &LatticeModel,
    beta: f64,
    lambda_bar: f64,
) -> Vec<f64> {
    let (n0, n1) = (g.nodes[0] as i64, g.nodes[1] as i64);
    let cs2 = lat.cs2;
    let cs4 = cs2 * cs2;
    let u = p.velocity;
    let q_count = lat.num_velocities();
    let t_new = s.time + p.dt;

    let edf = |phi: f64, j: usize| -> f64 {
        let cx = lat.velocity(j, 0);
        let cy = lat.velocity(j, 1);
        let cu = cx * u[0] + cy * u[1];
        let mut contraction = 0.0;
        for (a, ca) in [(0usize, cx), (1, cy)] {
            for (b, cb) in [(0usize, cx), (1, cy)] {
                let c_ab = (beta - 1.0) * cs2 * if a == b { 1.0 } else { 0.0 }
                    + lambda_bar * u[a] * u[b];
                let q_ab = ca * cb - if a == b { cs2 } else { 0.0 };
                contraction += c_ab * q_ab;
            }
        }
        lat.weights[j] * phi * (1.0 + cu / cs2 + contraction / (2.0 * cs4))
    };

    let mut out = vec![0.0; (n0 * n1) as usize];
    for i1 in 0..n1 {
        for i0 in 0..n0 {
            let mut acc = 0.0;
            for j in 0..q_count {
                let d = lat.directions[j];
                for (&(k, q), &a) in &c.a {
                    let y0 = (i0 + (k * d[0]) as i64).rem_euclid(n0);
                    let y1 = (i1 + (k * d[1]) as i64).rem_euclid(n1);
                    let hist = if c.shifted { -q } else { -q - 1 } as usize;
                    let phi = s.fields[hist][(y0 + n0 * y1) as usize];
                    acc += a * edf(phi, j);
                }
                if let Some(src) = &p.source {
                    for (&(k, q), &b) in &c.b {
                        let y0 = (i0 + (k * d[0]) as i64).rem_euclid(n0);
                        let y1 = (i1 + (k * d[1]) as i64).rem_euclid(n1);
                        let t_q = if c.shifted {
                            t_new + (q as f64 - 1.0) * p.dt
                        } else {
                            t_new + q as f64 * p.dt
                        };
                        let x = [
                            g.lower[0] + y0 as f64 * g.spacing[0],
                            g.lower[1] + y1 as f64 * g.spacing[1],
                            0.0,
                        ];
                        let sm = src(&x, t_q);
                        let cx = lat.velocity(j, 0);
                        let cy = lat.velocity(j, 1);
                        let fj = lat.weights[j]
                            * (sm.s + (cx * sm.m1f[0] + cy * sm.m1f[1]) / cs2);
                        acc += p.dt * b * fj;
                    }
                }
            }
            out[(i0 + n0 * i1) as usize] = acc;
        }
    }
    out
}

pub fn random_field(n: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}
