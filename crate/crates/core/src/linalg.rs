//! Symmetric banded matrices, `LDLᵀ` with inertia, and the smallest
//! eigenvalue of a symmetric-definite pencil.

use serde::Serialize;

use crate::error::SolverError;

/// Residual tolerance accepted by [`min_gen_eig`].
pub const EIG_RESIDUAL_TOL: f64 = 1e-10;
/// Iteration cap of the inverse iteration.
pub const EIG_MAX_ITER: usize = 500;

/// Lower band of a symmetric matrix. `data[i * (bw + 1) + d]` holds `A[i][i - d]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymBand {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBand {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SymBand::zeros(n, 0);
        for i in 0..n {
            m.data[i] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        SymBand {
            n: d.len(),
            bw: 0,
            data: d.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        (d <= self.bw && i < self.n).then_some(i * (self.bw + 1) + d)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.idx(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Adds `v` to the `(i, j)` entry (and its mirror). Panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j).expect("entry outside band");
        self.data[k] += v;
    }

    fn widened(&self, bw: usize) -> SymBand {
        if bw <= self.bw {
            return self.clone();
        }
        let mut out = SymBand::zeros(self.n, bw);
        for i in 0..self.n {
            for d in 0..=self.bw.min(i) {
                out.data[i * (bw + 1) + d] = self.data[i * (self.bw + 1) + d];
            }
        }
        out
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &SymBand) -> Result<SymBand, SolverError> {
        if self.n != other.n {
            return Err(SolverError::Shape(format!("{} vs {}", self.n, other.n)));
        }
        let bw = self.bw.max(other.bw);
        let mut out = self.widened(bw);
        for i in 0..self.n {
            for d in 0..=other.bw.min(i) {
                out.data[i * (bw + 1) + d] += s * other.data[i * (other.bw + 1) + d];
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> SymBand {
        SymBand {
            n: self.n,
            bw: self.bw,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = i * (self.bw + 1);
            y[i] += self.data[row] * x[i];
            for d in 1..=self.bw.min(i) {
                let a = self.data[row + d];
                y[i] += a * x[i - d];
                y[i - d] += a * x[i];
            }
        }
        y
    }

    /// `xᵀ A x`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec(x))
    }

    /// Infinity norm (largest absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0f64; self.n];
        for i in 0..self.n {
            let row = i * (self.bw + 1);
            rows[i] += self.data[row].abs();
            for d in 1..=self.bw.min(i) {
                let a = self.data[row + d].abs();
                rows[i] += a;
                rows[i - d] += a;
            }
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Dense copy, row major. Debugging and tests only.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Raw lower-band rows `[A[i][i], A[i][i-1], ...]`.
    pub fn band_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.bw + 1).map(|c| c.to_vec()).collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `LDLᵀ` factors without pivoting, in the same band layout as the input.
#[derive(Debug, Clone)]
pub struct Ldlt {
    n: usize,
    bw: usize,
    l: Vec<f64>,
    d: Vec<f64>,
}

impl Ldlt {
    /// Number of negative pivots, equal to the number of negative eigenvalues
    /// when the factorization exists.
    pub fn negatives(&self) -> usize {
        self.d.iter().filter(|&&x| x < 0.0).count()
    }

    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut x = b.to_vec();
        for i in 0..n {
            let row = i * (bw + 1);
            for d in 1..=bw.min(i) {
                x[i] -= self.l[row + d] * x[i - d];
            }
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            for d in 1..=bw.min(n - 1 - i) {
                x[i] -= self.l[(i + d) * (bw + 1) + d] * x[i + d];
            }
        }
        x
    }
}

/// Band `LDLᵀ`. Fails on a zero or non-finite pivot.
pub fn ldlt(a: &SymBand) -> Result<Ldlt, SolverError> {
    let (n, bw) = (a.n, a.bw);
    let w = bw + 1;
    let mut l = vec![0.0; n * w];
    let mut d = vec![0.0; n];
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut djj = a.data[j * w];
        for k in j.saturating_sub(bw)..j {
            let ljk = l[j * w + (j - k)];
            djj -= ljk * ljk * d[k];
        }
        if !djj.is_finite() || djj.abs() <= 1e-300 * scale {
            return Err(SolverError::Bracket(format!("singular pivot at row {j}")));
        }
        d[j] = djj;
        for i in (j + 1)..n.min(j + bw + 1) {
            let mut v = a.data[i * w + (i - j)];
            for k in i.saturating_sub(bw)..j {
                v -= l[i * w + (i - k)] * l[j * w + (j - k)] * d[k];
            }
            l[i * w + (i - j)] = v / djj;
        }
    }
    Ok(Ldlt { n, bw, l, d })
}

/// Whether the matrix is positive definite.
pub fn is_positive_definite(a: &SymBand) -> bool {
    ldlt(a).map(|f| f.negatives() == 0).unwrap_or(false)
}

/// Eigenvalues of the pencil below `sigma`: negative inertia of `A - σB`.
fn count_below(a: &SymBand, b: &SymBand, sigma: f64) -> Result<usize, SolverError> {
    // nudge off an exactly singular shift
    let mut s = sigma;
    for _ in 0..8 {
        match ldlt(&a.add_scaled(-s, b)?) {
            Ok(f) => return Ok(f.negatives()),
            Err(_) => s -= 1e-12 * s.abs().max(1e-300),
        }
    }
    Err(SolverError::Bracket(format!("cannot factor the pencil at shift {sigma}")))
}

/// Result of [`min_gen_eig`]: eigenvalue and `B`-normalized eigenvector.
/// `residual` is the normwise backward error
/// `‖Ax - λBx‖ / ((‖A‖ + |λ|‖B‖) ‖x‖)` in the infinity norm.
#[derive(Debug, Clone)]
pub struct EigPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Smallest eigenvalue of `A x = λ B x` with `B` positive definite.
///
/// Sylvester-inertia bisection brackets the eigenvalue from below; inverse
/// iteration with the bracket's lower end as shift (so the shifted matrix is
/// positive definite) then recovers the eigenvector and refines the value.
pub fn min_gen_eig(a: &SymBand, b: &SymBand) -> Result<EigPair, SolverError> {
    let n = a.dim();
    if n == 0 {
        return Err(SolverError::Empty);
    }
    if b.dim() != n {
        return Err(SolverError::Shape(format!("{n} vs {}", b.dim())));
    }
    if !is_positive_definite(b) {
        return Err(SolverError::MassNotDefinite);
    }
    // upper bound from a smooth trial vector
    let trial: Vec<f64> = (0..n)
        .map(|i| (std::f64::consts::PI * (i + 1) as f64 / (n + 1) as f64).sin())
        .collect();
    let mut hi = a.quad(&trial) / b.quad(&trial);
    if !hi.is_finite() {
        return Err(SolverError::Bracket("non-finite Rayleigh quotient".into()));
    }
    while count_below(a, b, hi)? == 0 {
        hi += hi.abs().max(1.0);
    }
    let mut step = hi.abs().max(1.0);
    let mut lo = hi - step;
    let mut guard = 0;
    while count_below(a, b, lo)? > 0 {
        step *= 2.0;
        lo = hi - step;
        guard += 1;
        if guard > 200 {
            return Err(SolverError::Bracket("no lower bound for the pencil".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(a, b, mid)? == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-11 * hi.abs().max(lo.abs()).max(1e-8) {
            break;
        }
    }
    // shift strictly below the eigenvalue keeps A - σB definite
    let gap = (hi - lo).max(1e-9 * hi.abs().max(1e-8));
    let sigma = lo - gap;
    let fact = ldlt(&a.add_scaled(-sigma, b)?)?;
    let (na, nb) = (a.norm_inf(), b.norm_inf());
    let mut x = trial;

    let mut residual = f64::INFINITY;
    for it in 1..=EIG_MAX_ITER {
        let bx = b.matvec(&x);
        let mut y = fact.solve(&bx);
        let by = b.matvec(&y);
        let bnorm = dot(&y, &by).sqrt();
        if !(bnorm > 0.0 && bnorm.is_finite()) {
            return Err(SolverError::NoConvergence {
                iterations: it,
                residual,
            });
        }
        for v in &mut y {
            *v /= bnorm;
        }
        let ay = a.matvec(&y);
        let by: Vec<f64> = by.iter().map(|v| v / bnorm).collect();
        let lambda = dot(&y, &ay);
        let r: Vec<f64> = ay.iter().zip(&by).map(|(p, q)| p - lambda * q).collect();
        // normwise backward error
        let xn = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let rn = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        residual = rn / ((na + lambda.abs() * nb) * xn).max(f64::MIN_POSITIVE);
        x = y;
        if residual < EIG_RESIDUAL_TOL {
            // deterministic sign: largest component positive
            let big = x.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
            if big < 0.0 {
                for v in &mut x {
                    *v = -*v;
                }
            }
            return Ok(EigPair {
                value: lambda,
                vector: x,
                iterations: it,
                residual,
            });
        }
    }
    Err(SolverError::NoConvergence {
        iterations: EIG_MAX_ITER,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(a: &[f64]) -> f64 {
        dot(a, a).sqrt()
    }

    fn laplacian(n: usize) -> SymBand {
        let mut a = SymBand::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn matvec_matches_dense() {
        let mut a = SymBand::zeros(5, 2);
        for i in 0..5 {
            for j in (i as usize).saturating_sub(2)..=i {
                a.add(i, j, (i * 7 + j * 3) as f64 * 0.1 + 1.0);
            }
        }
        let x = [1.0, -2.0, 0.5, 3.0, -1.0];
        let dense = a.to_dense();
        let want: Vec<f64> = dense.iter().map(|row| dot(row, &x)).collect();
        assert_eq!(a.matvec(&x), want);
        assert_eq!(a.get(1, 3), a.get(3, 1));
    }

    #[test]
    fn ldlt_solves() {
        let a = laplacian(6).add_scaled(1.0, &SymBand::identity(6)).unwrap();
        let b = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let x = ldlt(&a).unwrap().solve(&b);
        let back = a.matvec(&x);
        for (p, q) in back.iter().zip(b) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn inertia_counts_negative_eigenvalues() {
        // eigenvalues of the 1-D Laplacian: 2 - 2cos(jπ/(n+1))
        let n = 10;
        let a = laplacian(n);
        let eig: Vec<f64> = (1..=n)
            .map(|j| 2.0 - 2.0 * (j as f64 * std::f64::consts::PI / (n + 1) as f64).cos())
            .collect();
        for s in [0.1, 0.5, 1.7, 3.0] {
            let want = eig.iter().filter(|&&e| e < s).count();
            assert_eq!(count_below(&a, &SymBand::identity(n), s).unwrap(), want);
        }
    }

    #[test]
    fn identity_pencil() {
        let a = laplacian(20).add_scaled(3.0, &SymBand::identity(20)).unwrap();
        let p = min_gen_eig(&a, &a).unwrap();
        assert!((p.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn smallest_laplacian_eigenvalue() {
        let n = 200;
        let p = min_gen_eig(&laplacian(n), &SymBand::identity(n)).unwrap();
        let want = 2.0 - 2.0 * (std::f64::consts::PI / (n + 1) as f64).cos();
        assert!((p.value - want).abs() < 1e-12 * 4.0, "{} vs {want}", p.value);
        assert!(p.vector.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn negative_and_generalized() {
        let n = 50;
        let a = laplacian(n).add_scaled(-5.0, &SymBand::identity(n)).unwrap();
        let d: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 / n as f64).collect();
        let b = SymBand::from_diag(&d);
        let p = min_gen_eig(&a, &b).unwrap();
        // residual check
        let r: Vec<f64> = a
            .matvec(&p.vector)
            .iter()
            .zip(b.matvec(&p.vector))
            .map(|(x, y)| x - p.value * y)
            .collect();
        assert!(norm(&r) < 1e-8);
        assert!(p.value < -2.0);
        assert_eq!(count_below(&a, &b, p.value - 1e-8).unwrap(), 0);
    }

    #[test]
    fn rejects_indefinite_mass() {
        let a = laplacian(4);
        let b = SymBand::from_diag(&[1.0, -1.0, 1.0, 1.0]);
        assert_eq!(min_gen_eig(&a, &b).unwrap_err(), SolverError::MassNotDefinite);
    }
}
