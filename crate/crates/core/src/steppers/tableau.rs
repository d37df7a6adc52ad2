//! Butcher tableaux and the eigendecomposition of `𝒜⁻¹` that decouples the
//! Runge-Kutta stage equations.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ButcherTableau {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub stiffly_accurate: bool,
}

impl ButcherTableau {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        let s = a.nrows();
        if s == 0 || a.ncols() != s || b.len() != s || c.len() != s {
            return Err(Error::Config(
                "inconsistent Butcher tableau dimensions".into(),
            ));
        }
        let stiffly_accurate = (0..s).all(|j| (b[j] - a[(s - 1, j)]).abs() <= 1e-14);
        Ok(Self {
            a,
            b,
            c,
            stiffly_accurate,
        })
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn implicit_euler() -> Self {
        Self::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 1.0),
        )
        .unwrap()
    }

    pub fn implicit_midpoint() -> Self {
        Self::new(
            DMatrix::from_element(1, 1, 0.5),
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 0.5),
        )
        .unwrap()
    }

    /// Two-stage Gauss method, order 4.
    pub fn gauss2() -> Self {
        let r = 3f64.sqrt() / 6.0;
        Self::new(
            DMatrix::from_row_slice(2, 2, &[0.25, 0.25 - r, 0.25 + r, 0.25]),
            DVector::from_vec(vec![0.5, 0.5]),
            DVector::from_vec(vec![0.5 - r, 0.5 + r]),
        )
        .unwrap()
    }

    /// Two-stage Radau IIA method, order 3, stiffly accurate.
    pub fn radau2() -> Self {
        Self::new(
            DMatrix::from_row_slice(2, 2, &[5.0 / 12.0, -1.0 / 12.0, 0.75, 0.25]),
            DVector::from_vec(vec![0.75, 0.25]),
            DVector::from_vec(vec![1.0 / 3.0, 1.0]),
        )
        .unwrap()
    }

    /// Stability function `R(z) = 1 + z bᵀ(I − z𝒜)⁻¹𝟙`, from a direct stage solve.
    pub fn stability(&self, z: Complex64) -> Result<Complex64> {
        let s = self.stages();
        let m = DMatrix::from_fn(s, s, |i, j| {
            let id = if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            id - z * self.a[(i, j)]
        });
        let ones = DVector::from_element(s, Complex64::new(1.0, 0.0));
        let y = m
            .lu()
            .solve(&ones)
            .ok_or_else(|| Error::Numeric(format!("I − z𝒜 singular at z = {z}")))?;
        Ok(Complex64::new(1.0, 0.0)
            + z * self
                .b
                .iter()
                .zip(y.iter())
                .map(|(b, y)| y * *b)
                .sum::<Complex64>())
    }
}

/// How stage `i` of a decoupled iteration is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageRole {
    /// Real eigenvalue; solved on its own.
    Real,
    /// First member of a conjugate pair; solved.
    PairLeader,
    /// Conjugate of the previous stage; obtained by conjugation.
    PairFollower,
}

#[derive(Clone, Debug)]
pub struct SpectralTableau {
    pub tableau: ButcherTableau,
    /// Eigenvectors of `𝒜⁻¹` as columns, scaled so that `‖T‖₂ = 1`.
    pub t: DMatrix<Complex64>,
    pub t_inv: DMatrix<Complex64>,
    /// Eigenvalues of `𝒜⁻¹`, conjugate pairs adjacent (positive imaginary part first).
    pub lambdas: Vec<Complex64>,
    pub roles: Vec<StageRole>,
    /// Grid weights with `wᵀ𝒜 = bᵀ`.
    pub w: DVector<f64>,
    /// `max_i sup_{Re z ≤ 0} |λ_i − z|⁻¹ = max_i 1/Re λ_i`.
    pub mu: f64,
}

fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// Unit null vector of a (numerically) singular complex matrix.
fn null_vector(m: &DMatrix<Complex64>) -> DVector<Complex64> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.unwrap();
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    v_t.row(imin).adjoint()
}

impl SpectralTableau {
    pub fn build(tableau: ButcherTableau) -> Result<Self> {
        let s = tableau.stages();
        let a_inv = tableau
            .a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Unsupported("Runge-Kutta matrix is singular".into()))?;
        let scale = a_inv.amax().max(1.0);
        let raw = a_inv.complex_eigenvalues();

        // Deterministic order: by real part, with each conjugate pair adjacent.
        let mut upper: Vec<Complex64> = raw
            .iter()
            .copied()
            .filter(|l| l.im >= -1e-12 * scale)
            .collect();
        upper.sort_by(|x, y| x.re.total_cmp(&y.re).then(y.im.total_cmp(&x.im)));
        let mut lambdas = Vec::with_capacity(s);
        let mut roles = Vec::with_capacity(s);
        for l in upper {
            if l.im.abs() <= 1e-12 * scale {
                lambdas.push(Complex64::new(l.re, 0.0));
                roles.push(StageRole::Real);
            } else {
                lambdas.push(l);
                lambdas.push(l.conj());
                roles.push(StageRole::PairLeader);
                roles.push(StageRole::PairFollower);
            }
        }
        if lambdas.len() != s {
            return Err(Error::Numeric("eigenvalues of 𝒜⁻¹ do not pair up".into()));
        }
        if lambdas.iter().any(|l| l.re <= 0.0) {
            return Err(Error::Unsupported(
                "𝒜⁻¹ has eigenvalues outside the open right half-plane".into(),
            ));
        }

        let a_inv_c = a_inv.map(|v| Complex64::new(v, 0.0));
        let mut t = DMatrix::<Complex64>::zeros(s, s);
        for i in 0..s {
            let v = match roles[i] {
                StageRole::PairFollower => t.column(i - 1).map(|z| z.conj()),
                role => {
                    let shifted = &a_inv_c - DMatrix::from_diagonal_element(s, s, lambdas[i]);
                    let mut v = null_vector(&shifted);
                    if role == StageRole::Real {
                        let pivot = v
                            .iter()
                            .copied()
                            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                            .unwrap();
                        let phase = pivot.conj() / pivot.norm();
                        v = v.map(|z| Complex64::new((z * phase).re, 0.0));
                        let n = v.norm();
                        v /= Complex64::new(n, 0.0);
                    }
                    v
                }
            };
            t.set_column(i, &v);
        }
        let tn = spectral_norm(&t);
        t /= Complex64::new(tn, 0.0);
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Unsupported("𝒜⁻¹ is defective".into()))?;
        if spectral_norm(&t_inv) > 1e12 {
            return Err(Error::Unsupported("𝒜⁻¹ is (nearly) defective".into()));
        }
        let recon = &t * DMatrix::from_diagonal(&DVector::from_vec(lambdas.clone())) * &t_inv;
        if (recon - a_inv_c).camax() > 1e-10 * scale {
            return Err(Error::Numeric(
                "eigendecomposition of 𝒜⁻¹ failed to reconstruct".into(),
            ));
        }

        let w = tableau
            .a
            .transpose()
            .lu()
            .solve(&tableau.b)
            .ok_or_else(|| Error::Unsupported("cannot solve wᵀ𝒜 = bᵀ".into()))?;
        let mu = lambdas.iter().map(|l| 1.0 / l.re).fold(0.0, f64::max);
        Ok(Self {
            tableau,
            t,
            t_inv,
            lambdas,
            roles,
            w,
            mu,
        })
    }

    pub fn stages(&self) -> usize {
        self.lambdas.len()
    }

    /// `cond₂(T)`, which enters the contraction factor of the stage iteration.
    pub fn condition_number(&self) -> f64 {
        spectral_norm(&self.t) * spectral_norm(&self.t_inv)
    }
}
