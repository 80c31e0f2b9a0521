//! Dense complex linear algebra for small (N <= ~10) non-Hermitian matrices.
//!
//! The reduced generator W^II(z) is small, dense, complex, and non-normal;
//! its spectral projectors need matched left and right eigenvectors. The
//! solver below goes through the characteristic polynomial
//! (Faddeev-LeVerrier), finds all roots simultaneously (Durand-Kerner),
//! polishes them by Newton, and recovers eigenvectors by inverse iteration;
//! left vectors are right eigenvectors of the adjoint.

use crate::{C64, CMat, CVec, Error, Result};

/// Eigen-decomposition with matched left/right vectors.
///
/// Normalization: right vectors have unit 2-norm; left vectors are scaled so
/// that `left^H * right = 1` branch by branch. Branches are sorted by real
/// part (imaginary part breaks ties).
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<C64>,
    pub right: Vec<CVec>,
    pub left: Vec<CVec>,
}

impl Eigen {
    /// Rank-1 spectral projector of one branch: `right * left^H`.
    pub fn projector(&self, branch: usize) -> CMat {
        let r = &self.right[branch];
        let l = &self.left[branch];
        CMat::from_fn(r.len(), r.len(), |i, j| r[i] * l[j].conj())
    }
}

/// Coefficients of the monic characteristic polynomial
/// `p(x) = x^n + c[n-1] x^(n-1) + ... + c[0]` by Faddeev-LeVerrier.
pub fn char_poly(a: &CMat) -> Vec<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut c = vec![C64::new(0.0, 0.0); n];
    let mut m = CMat::identity(n, n);
    let mut am;
    let mut ck = C64::new(1.0, 0.0);
    for k in 1..=n {
        am = a * &m;
        ck = -am.trace() / C64::new(k as f64, 0.0);
        c[n - k] = ck;
        if k < n {
            m = &am + CMat::identity(n, n) * ck;
        }
    }
    let _ = ck;
    c
}

fn poly_eval(c: &[C64], x: C64) -> (C64, C64) {
    // Horner for p and p' of the monic polynomial with low coefficients c.
    let mut p = C64::new(1.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for k in (0..c.len()).rev() {
        dp = dp * x + p;
        p = p * x + c[k];
    }
    (p, dp)
}

/// All roots of the monic polynomial by Durand-Kerner plus Newton polish.
pub fn poly_roots(c: &[C64]) -> Vec<C64> {
    let n = c.len();
    if n == 0 {
        return vec![];
    }
    if n == 1 {
        return vec![-c[0]];
    }
    // Cauchy-style root bound for the start circle.
    let r = 1.0 + c.iter().map(|ck| ck.norm()).fold(0.0, f64::max);
    let seed = C64::new(0.4, 0.9);
    let mut z: Vec<C64> = (0..n)
        .map(|k| seed.powu(k as u32 + 1) / seed.norm().powi(k as i32) * r * 0.5)
        .collect();
    for _ in 0..500 {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let (p, _) = poly_eval(c, z[i]);
            let mut denom = C64::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                // Coinciding iterates; nudge apart.
                z[i] += C64::new(1e-8 * (1.0 + r), 1e-8);
                max_step = f64::MAX;
                continue;
            }
            let step = p / denom;
            z[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 * (1.0 + r) {
            break;
        }
    }
    // Newton polish sharpens simple roots to machine precision.
    for zi in z.iter_mut() {
        for _ in 0..20 {
            let (p, dp) = poly_eval(c, *zi);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            *zi -= step;
            if step.norm() < 1e-16 * (1.0 + zi.norm()) {
                break;
            }
        }
    }
    z
}

fn inverse_iteration(a: &CMat, lambda: C64) -> Result<CVec> {
    let n = a.nrows();
    // Shift slightly off the eigenvalue so the solve stays finite; the
    // eigenvector error from the shift is ~ shift/gap, far below tolerance.
    let scale = a.norm().max(1.0);
    let shift = lambda + C64::new(1e-13 * scale, 1e-13 * scale);
    let shifted = a - CMat::identity(n, n) * shift;
    let lu = shifted.lu();
    let mut v = CVec::from_fn(n, |i, _| C64::new(1.0, 0.3 * (i as f64 + 1.0)));
    v /= C64::new(v.norm(), 0.0);
    for _ in 0..4 {
        let w = lu
            .solve(&v)
            .ok_or_else(|| Error::InternalConsistency("singular shifted solve in inverse iteration".into()))?;
        let norm = w.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InternalConsistency(
                "inverse iteration produced a non-finite vector".into(),
            ));
        }
        v = w / C64::new(norm, 0.0);
    }
    Ok(v)
}

/// Full left/right eigen-decomposition.
///
/// `degeneracy_tol` is a relative gap: two computed eigenvalues closer than
/// `degeneracy_tol * spread` raise [`Error::Degeneracy`], naming the branches,
/// because rank-1 projectors are meaningless for (near-)defective pairs.
pub fn eigen(a: &CMat, degeneracy_tol: f64) -> Result<Eigen> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    if n == 1 {
        return Ok(Eigen {
            values: vec![a[(0, 0)]],
            right: vec![CVec::from_element(1, C64::new(1.0, 0.0))],
            left: vec![CVec::from_element(1, C64::new(1.0, 0.0))],
        });
    }
    let c = char_poly(a);
    let mut values = poly_roots(&c);
    values.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));

    let spread = values
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max)
        .max(1e-300);
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (values[i] - values[j]).norm() / spread;
            if gap < degeneracy_tol {
                return Err(Error::Degeneracy {
                    a: i,
                    b: j,
                    gap,
                    tol: degeneracy_tol,
                });
            }
        }
    }

    let adj = a.adjoint();
    let mut right = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    for &lambda in &values {
        let r = inverse_iteration(a, lambda)?;
        // l^H A = lambda l^H  <=>  A^H l = conj(lambda) l.
        let l_raw = inverse_iteration(&adj, lambda.conj())?;
        let overlap: C64 = l_raw.dotc(&r);
        if overlap.norm() < 1e-12 {
            return Err(Error::InternalConsistency(format!(
                "left/right eigenvector overlap {:.3e} at eigenvalue {lambda}; matrix is near-defective",
                overlap.norm()
            )));
        }
        // Scale the left vector so l^H r = 1 exactly.
        let l = l_raw / overlap.conj();
        right.push(r);
        left.push(l);
    }
    Ok(Eigen { values, right, left })
}

/// Largest singular value (operator 2-norm).
pub fn spectral_norm(m: &CMat) -> f64 {
    m.clone().singular_values()[0]
}
