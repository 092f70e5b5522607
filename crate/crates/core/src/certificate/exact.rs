use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{hamiltonian, PmpCertificate};
use crate::error::{Error, Result};
use crate::ocp::{OcpSpec, Trajectory};

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base`.
pub fn halton(mut index: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= b;
        r += f * (index % base as u64) as f64;
        index /= base as u64;
    }
    r
}

/// Largest `max_μ H(t, μ) − H(t, u*(t))` over sampled controls, clipped at 0.
///
/// Samples are Halton points with a seeded Cranley–Patterson shift mapped to
/// the bounding box of `U(t)` and projected onto it, plus the set's extreme
/// probes. Only problems whose Hamiltonian is concave in `u` qualify:
/// dynamics affine in `u`, quadratic stage costs and compact `U(t)`.
pub fn exact_max_check(
    spec: &OcpSpec,
    traj: &Trajectory,
    cert: &PmpCertificate,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    traj.check_shape(spec)?;
    cert.check_shape(spec)?;
    if !spec.dynamics.iter().all(|f| f.is_control_affine()) {
        return Err(Error::Unsupported("exact maximization needs dynamics affine in u".into()));
    }
    if !spec.stage_costs.iter().all(|c| c.as_quadratic().is_some()) {
        return Err(Error::Unsupported("exact maximization needs quadratic stage costs".into()));
    }
    let m = spec.control_dim;
    if m > PRIMES.len() {
        return Err(Error::Unsupported(format!("control dimension {m} exceeds {}", PRIMES.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();

    let mut worst = 0.0f64;
    for t in 0..spec.horizon {
        let set = &spec.control_sets[t];
        let (lo, hi) = set
            .bounding_box()
            .ok_or_else(|| Error::Unsupported(format!("control_sets[{t}] is not compact")))?;
        let (x, ustar) = (&traj.x[t], &traj.u[t]);
        let eta_f = cert.eta_f_at(t as isize);
        let (lp, lc) = cert.lambda_terms(t);
        let h = |u: &DVector<f64>| hamiltonian(spec, t, cert.psi0, eta_f, &lp, &lc, x, u);
        let h_star = h(ustar);
        let mut best = f64::NEG_INFINITY;
        for s in 0..n_samples as u64 {
            let p = DVector::from_fn(m, |i, _| {
                let unit = (halton(s + 1, PRIMES[i]) + shift[i]).fract();
                lo[i] + unit * (hi[i] - lo[i])
            });
            best = best.max(h(&set.project(&p)?));
        }
        for v in set.probe_vertices() {
            best = best.max(h(&v));
        }
        worst = worst.max(best - h_star);
    }
    Ok(worst.max(0.0))
}
