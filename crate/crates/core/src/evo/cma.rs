use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// Covariance-matrix-adaptation evolution strategy state with the standard
/// tutorial parameter settings (rank-one + rank-μ updates, cumulative step
/// size control). Operates on unconstrained R^n; box handling lives in the
/// genome encoding.
#[derive(Debug, Clone)]
pub struct CmaState {
    pub dim: usize,
    pub lambda: usize,
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub path_sigma: DVector<f64>,
    pub path_c: DVector<f64>,
    pub generation: usize,
    // derived constants
    mu: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

const EIG_FLOOR: f64 = 1e-12;

impl CmaState {
    pub fn new(dim: usize, mean0: &[f64], sigma0: f64, lambda: usize) -> Result<Self> {
        if dim == 0 || mean0.len() != dim {
            return Err(Error::invalid("CMA dimension/mean mismatch"));
        }
        if !(sigma0 > 0.0) || lambda < 2 {
            return Err(Error::invalid("CMA needs sigma0 > 0 and lambda >= 2"));
        }
        let n = dim as f64;
        let mu = lambda / 2;
        let mut raw: Vec<f64> = (1..=mu).map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln()).collect();
        let sum: f64 = raw.iter().sum();
        raw.iter_mut().for_each(|w| *w /= sum);
        let mu_eff = 1.0 / raw.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3) * (n + 1.3) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0) * (n + 2.0) + mu_eff));
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Ok(CmaState {
            dim,
            lambda,
            mean: DVector::from_column_slice(mean0),
            sigma: sigma0,
            cov: DMatrix::identity(dim, dim),
            path_sigma: DVector::zeros(dim),
            path_c: DVector::zeros(dim),
            generation: 0,
            mu,
            weights: raw,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        })
    }

    /// Eigendecomposition of the covariance with eigenvalue flooring; returns
    /// (B, d) with C ≈ B·diag(d²)·Bᵀ.
    fn decompose(&self) -> (DMatrix<f64>, DVector<f64>) {
        let sym = nalgebra::SymmetricEigen::new(self.cov.clone());
        let mut floored = false;
        let d = sym.eigenvalues.map(|ev| {
            if ev < EIG_FLOOR {
                floored = true;
                EIG_FLOOR.sqrt()
            } else {
                ev.sqrt()
            }
        });
        if floored {
            log::warn!("covariance eigenvalue floored at {EIG_FLOOR} (generation {})", self.generation);
        }
        (sym.eigenvectors, d)
    }
}

/// Draw `lambda` candidate points from N(mean, sigma²·C), deterministically
/// in the seed.
pub fn cma_ask(state: &CmaState, seed: u64) -> Vec<Vec<f64>> {
    let (b, d) = state.decompose();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..state.lambda)
        .map(|_| {
            let z = DVector::from_iterator(state.dim, (0..state.dim).map(|_| StandardNormal.sample(&mut rng)));
            let y = &b * z.component_mul(&d);
            (&state.mean + state.sigma * y).iter().copied().collect()
        })
        .collect()
}

/// Rank-based CMA update (minimization). All-equal fitnesses leave the mean
/// and covariance untouched and update sigma by the path decay alone.
pub fn cma_tell(state: &CmaState, points: &[Vec<f64>], fitnesses: &[f64]) -> Result<CmaState> {
    if points.len() != state.lambda || fitnesses.len() != state.lambda {
        return Err(Error::invalid(format!("expected {} points and fitnesses", state.lambda)));
    }
    if fitnesses.iter().any(|f| !f.is_finite()) {
        return Err(Error::invalid("fitness values must be finite"));
    }
    let mut next = state.clone();
    next.generation += 1;

    let all_equal = fitnesses.windows(2).all(|w| w[0] == w[1]);
    if all_equal {
        next.path_sigma *= 1.0 - state.c_sigma;
        next.path_c *= 1.0 - state.c_c;
        next.sigma = state.sigma * ((state.c_sigma / state.d_sigma) * (next.path_sigma.norm() / state.chi_n - 1.0)).exp();
        return Ok(next);
    }

    let mut order: Vec<usize> = (0..state.lambda).collect();
    order.sort_by(|&a, &b| fitnesses[a].partial_cmp(&fitnesses[b]).unwrap());

    // selected steps in sampling space: y_i = (x_i - m) / sigma
    let ys: Vec<DVector<f64>> = order
        .iter()
        .take(state.mu)
        .map(|&i| (DVector::from_column_slice(&points[i]) - &state.mean) / state.sigma)
        .collect();
    let mut y_w = DVector::zeros(state.dim);
    for (w, y) in state.weights.iter().zip(&ys) {
        y_w += *w * y;
    }
    next.mean = &state.mean + state.sigma * &y_w;

    // step-size path uses C^{-1/2} y_w
    let (b, d) = state.decompose();
    let inv_d = d.map(|v| 1.0 / v);
    let c_inv_sqrt_yw = &b * (b.transpose() * &y_w).component_mul(&inv_d);
    next.path_sigma = (1.0 - state.c_sigma) * &state.path_sigma
        + (state.c_sigma * (2.0 - state.c_sigma) * state.mu_eff).sqrt() * c_inv_sqrt_yw;

    let gen1 = next.generation as f64;
    let h_sigma_ok = next.path_sigma.norm() / (1.0 - (1.0 - state.c_sigma).powf(2.0 * gen1)).sqrt()
        < (1.4 + 2.0 / (state.dim as f64 + 1.0)) * state.chi_n;
    let h_sigma = if h_sigma_ok { 1.0 } else { 0.0 };
    next.path_c =
        (1.0 - state.c_c) * &state.path_c + h_sigma * (state.c_c * (2.0 - state.c_c) * state.mu_eff).sqrt() * &y_w;

    let delta_h = (1.0 - h_sigma) * state.c_c * (2.0 - state.c_c);
    let mut cov = (1.0 - state.c_1 - state.c_mu) * &state.cov
        + state.c_1 * (&next.path_c * next.path_c.transpose() + delta_h * &state.cov);
    for (w, y) in state.weights.iter().zip(&ys) {
        cov += state.c_mu * *w * y * y.transpose();
    }
    // symmetrize against drift
    next.cov = (&cov + cov.transpose()) * 0.5;
    next.sigma = state.sigma * ((state.c_sigma / state.d_sigma) * (next.path_sigma.norm() / state.chi_n - 1.0)).exp();
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ask_tell_cycle(state: &CmaState, seed: u64, f: impl Fn(&[f64]) -> f64) -> CmaState {
        let xs = cma_ask(state, seed);
        let fit: Vec<f64> = xs.iter().map(|x| f(x)).collect();
        cma_tell(state, &xs, &fit).unwrap()
    }

    #[test]
    fn sphere_8d_converges() {
        let target = [0.5, -0.3, 0.8, 0.1, -0.6, 0.4, -0.2, 0.7];
        let sphere = |x: &[f64]| x.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let mut st = CmaState::new(8, &[0.0; 8], 0.5, 10).unwrap();
        let mut best = f64::INFINITY;
        for g in 0..2000 {
            st = ask_tell_cycle(&st, 900 + g, sphere);
            best = best.min(sphere(st.mean.as_slice()));
            if best < 1e-10 {
                break;
            }
        }
        assert!(best < 1e-10, "sphere not solved: f(mean) = {best}, gen {}", st.generation);
        assert!(st.generation <= 2000);
    }

    #[test]
    fn ask_is_deterministic_and_sigma_zero_degenerates() {
        let st = CmaState::new(4, &[1.0, 2.0, 3.0, 4.0], 1e-12, 6).unwrap();
        let a = cma_ask(&st, 42);
        let b = cma_ask(&st, 42);
        assert_eq!(a, b);
        for x in &a {
            for (xi, mi) in x.iter().zip(st.mean.iter()) {
                assert!((xi - mi).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sample_mean_matches_state_mean() {
        // Monte-Carlo oracle: mean over many draws within 3 standard errors
        let mean = [0.5, -1.0, 2.0];
        let mut st = CmaState::new(3, &mean, 0.7, 100_000).unwrap();
        st.cov[(0, 0)] = 2.0;
        st.cov[(1, 1)] = 0.5;
        let xs = cma_ask(&st, 7);
        let n = xs.len() as f64;
        for i in 0..3 {
            let emp: f64 = xs.iter().map(|x| x[i]).sum::<f64>() / n;
            let se = st.sigma * st.cov[(i, i)].sqrt() / n.sqrt();
            assert!(
                (emp - mean[i]).abs() < 3.0 * se,
                "coordinate {i}: empirical {emp} vs {} (3se = {})",
                mean[i],
                3.0 * se
            );
        }
    }

    #[test]
    fn permutation_and_monotone_transform_invariance() {
        let st = CmaState::new(3, &[0.0; 3], 1.0, 8).unwrap();
        let xs = cma_ask(&st, 5);
        let fit: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>() + 1.0).collect();
        let updated = cma_tell(&st, &xs, &fit).unwrap();

        // jointly permute pairs
        let perm = [3usize, 0, 7, 1, 5, 2, 6, 4];
        let xs_p: Vec<Vec<f64>> = perm.iter().map(|&i| xs[i].clone()).collect();
        let fit_p: Vec<f64> = perm.iter().map(|&i| fit[i]).collect();
        let updated_p = cma_tell(&st, &xs_p, &fit_p).unwrap();
        assert_eq!(updated.mean, updated_p.mean);
        assert_eq!(updated.cov, updated_p.cov);
        assert_eq!(updated.sigma.to_bits(), updated_p.sigma.to_bits());

        // monotone transform (cubing positive fitnesses) preserves ranks
        let fit_cubed: Vec<f64> = fit.iter().map(|f| f * f * f).collect();
        let updated_c = cma_tell(&st, &xs, &fit_cubed).unwrap();
        assert_eq!(updated.mean, updated_c.mean);
        assert_eq!(updated.cov, updated_c.cov);
    }

    #[test]
    fn all_equal_fitnesses_keep_mean() {
        let st = CmaState::new(4, &[1.0, -1.0, 0.5, 2.0], 0.8, 6).unwrap();
        let xs = cma_ask(&st, 11);
        let fit = vec![3.25; 6];
        let updated = cma_tell(&st, &xs, &fit).unwrap();
        assert_eq!(updated.mean, st.mean);
        assert_eq!(updated.cov, st.cov);
        // paths decay toward zero → sigma shrinks slightly from the start state
        assert!(updated.sigma < st.sigma);
        assert!(updated.sigma > 0.5 * st.sigma);
    }

    #[test]
    fn roundtrip_determinism_bitwise() {
        let run = || {
            let mut st = CmaState::new(5, &[0.2; 5], 0.9, 8).unwrap();
            for g in 0..30 {
                let xs = cma_ask(&st, 100 + g);
                let fit: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| (v - 0.7) * (v - 0.7)).sum()).collect();
                st = cma_tell(&st, &xs, &fit).unwrap();
            }
            (st.mean.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), st.sigma.to_bits(), st.cov.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(CmaState::new(0, &[], 1.0, 10).is_err());
        assert!(CmaState::new(2, &[0.0, 0.0], 0.0, 10).is_err());
        assert!(CmaState::new(2, &[0.0, 0.0], 1.0, 1).is_err());
        let st = CmaState::new(2, &[0.0, 0.0], 1.0, 4).unwrap();
        let xs = cma_ask(&st, 1);
        assert!(cma_tell(&st, &xs, &[1.0, 2.0]).is_err());
        assert!(cma_tell(&st, &xs, &[1.0, 2.0, f64::NAN, 0.0]).is_err());
    }
}
