use crate::objectives::ObjectivePoint;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

const EIG_FLOOR: f64 = 1e-12;

/// RBF similarity kernel over objective points:
/// L_ij = exp(−‖o_i − o_j‖² / (2·bandwidth²)).
pub fn rbf_kernel(points: &[ObjectivePoint], bandwidth: f64) -> DMatrix<f64> {
    let n = points.len();
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    DMatrix::from_fn(n, n, |i, j| {
        let d = points[i].distance(&points[j]);
        (-d * d * inv).exp()
    })
}

/// Sample exactly `k` diverse indices with probability proportional to the
/// determinant of the kernel submatrix (a k-DPP). Standard two-phase
/// algorithm: eigendecompose the kernel, pick an eigenvector subset of size k
/// via elementary symmetric polynomials, then run orthogonalized projection
/// sampling. Deterministic in the seed.
pub fn dpp_sample(points: &[ObjectivePoint], k: usize, bandwidth: f64, seed: u64) -> Result<Vec<usize>> {
    let n = points.len();
    if k > n {
        return Err(Error::invalid(format!("k-DPP size {k} exceeds point count {n}")));
    }
    if k == 0 {
        return Ok(vec![]);
    }
    if k == n {
        // forced subset: the full set with probability 1
        return Ok((0..n).collect());
    }
    let kernel = rbf_kernel(points, bandwidth);
    let eig = nalgebra::SymmetricEigen::new(kernel);
    let lambda: Vec<f64> = eig.eigenvalues.iter().map(|&v| v.max(EIG_FLOOR)).collect();

    // elementary symmetric polynomials: esp[i][j] = e_j(λ_1..λ_i)
    let mut esp = vec![vec![0.0f64; k + 1]; n + 1];
    for row in esp.iter_mut() {
        row[0] = 1.0;
    }
    for i in 1..=n {
        for j in 1..=k.min(i) {
            esp[i][j] = esp[i - 1][j] + lambda[i - 1] * esp[i - 1][j - 1];
        }
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut chosen_vecs: Vec<usize> = Vec::with_capacity(k);
    let mut j = k;
    for i in (1..=n).rev() {
        if j == 0 {
            break;
        }
        let denom = esp[i][j];
        let p = if denom > 0.0 { lambda[i - 1] * esp[i - 1][j - 1] / denom } else { 1.0 };
        if i == j || rng.random::<f64>() < p {
            chosen_vecs.push(i - 1);
            j -= 1;
        }
    }

    // projection sampling over the chosen eigenvectors (columns of V)
    let mut v = DMatrix::<f64>::zeros(n, chosen_vecs.len());
    for (c, &idx) in chosen_vecs.iter().enumerate() {
        v.set_column(c, &eig.eigenvectors.column(idx));
    }
    let mut selected = Vec::with_capacity(k);
    while v.ncols() > 0 {
        let probs: Vec<f64> = (0..n).map(|i| v.row(i).iter().map(|x| x * x).sum()).collect();
        let total: f64 = probs.iter().sum();
        let mut draw = rng.random::<f64>() * total;
        let mut item = n - 1;
        for (i, p) in probs.iter().enumerate() {
            draw -= p;
            if draw <= 0.0 {
                item = i;
                break;
            }
        }
        selected.push(item);
        // eliminate the direction that gave item its probability mass
        let row = v.row(item).into_owned();
        let (jmax, &pivot) = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .unwrap();
        let pivot_col = v.column(jmax).into_owned();
        let cols: Vec<usize> = (0..v.ncols()).filter(|&c| c != jmax).collect();
        let mut next = DMatrix::<f64>::zeros(n, cols.len());
        for (cnew, &cold) in cols.iter().enumerate() {
            let coeff = row[cold] / pivot;
            next.set_column(cnew, &(v.column(cold) - coeff * &pivot_col));
        }
        // re-orthonormalize (modified Gram–Schmidt) to keep squared rows a
        // valid probability distribution
        for c in 0..next.ncols() {
            let mut col = next.column(c).into_owned();
            for prev in 0..c {
                let p = next.column(prev);
                let dot = col.dot(&p.into_owned());
                col -= dot * next.column(prev).into_owned();
            }
            let norm = col.norm();
            if norm > 1e-14 {
                col /= norm;
            } else {
                col = DVector::zeros(n);
            }
            next.set_column(c, &col);
        }
        v = next;
    }
    selected.sort_unstable();
    selected.dedup();
    if selected.len() != k {
        return Err(Error::numerics(format!("DPP projection produced {} unique items, wanted {k}", selected.len())));
    }
    Ok(selected)
}

/// Mean pairwise Euclidean distance of a subset (diversity measure).
pub fn mean_pairwise_distance(points: &[ObjectivePoint], subset: &[usize]) -> f64 {
    if subset.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (a, &i) in subset.iter().enumerate() {
        for &j in subset.iter().skip(a + 1) {
            total += points[i].distance(&points[j]);
            count += 1;
        }
    }
    total / count as f64
}
