//! Composite Gauss-Legendre quadrature on an interval.
//!
//! Every residual norm and normal-equation assembly in the crate goes
//! through the discrete inner product defined by a [`QuadratureRule`].

use nalgebra::{ComplexField, DVector};

use crate::error::{check_len, Error, Result};

/// Largest number of Gauss nodes per subinterval supported by the builder.
pub const MAX_NODES_PER: usize = 10;

/// Nodes and weights of a composite Gauss-Legendre rule on `[a, b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    a: f64,
    b: f64,
    subinterval_count: usize,
    nodes_per_subinterval: usize,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed by Newton's
/// method on the Legendre polynomial `P_n`. Nodes are returned ascending.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 || n > MAX_NODES_PER {
        return Err(Error::Config(format!(
            "nodes per subinterval must be in 1..={MAX_NODES_PER}, got {n}"
        )));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        // Pin the middle node exactly to zero.
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// Three-term recurrence for `(P_n(x), P_n'(x))`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, d)
}

impl QuadratureRule {
    /// Splits `[a, b]` into `subintervals` equal pieces with `nodes_per`
    /// Gauss points each.
    pub fn composite_gauss(a: f64, b: f64, subintervals: usize, nodes_per: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Config(format!("invalid interval [{a}, {b}]")));
        }
        if subintervals == 0 {
            return Err(Error::Config("subinterval count must be positive".into()));
        }
        let (ref_nodes, ref_weights) = gauss_legendre(nodes_per)?;
        let width = (b - a) / subintervals as f64;
        let mut nodes = Vec::with_capacity(subintervals * nodes_per);
        let mut weights = Vec::with_capacity(subintervals * nodes_per);
        for j in 0..subintervals {
            let left = a + j as f64 * width;
            let mid = left + 0.5 * width;
            for (x, w) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(mid + 0.5 * width * x);
                weights.push(0.5 * width * w);
            }
        }
        Ok(Self {
            nodes,
            weights,
            a,
            b,
            subinterval_count: subintervals,
            nodes_per_subinterval: nodes_per,
        })
    }

    /// The rule used throughout the experiments on the periodic domain `[-π, π]`.
    pub fn periodic(subintervals: usize, nodes_per: usize) -> Result<Self> {
        use std::f64::consts::PI;
        Self::composite_gauss(-PI, PI, subintervals, nodes_per)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn subinterval_count(&self) -> usize {
        self.subinterval_count
    }

    pub fn nodes_per_subinterval(&self) -> usize {
        self.nodes_per_subinterval
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// `Σ_m w_m conj(f_m) g_m`.
    pub fn inner_product<T: ComplexField<RealField = f64>>(&self, f: &[T], g: &[T]) -> Result<T> {
        check_len("inner product samples (f)", self.len(), f.len())?;
        check_len("inner product samples (g)", self.len(), g.len())?;
        let mut acc = T::zero();
        for ((fm, gm), &w) in f.iter().zip(g).zip(&self.weights) {
            acc += fm.clone().conjugate() * gm.clone() * T::from_real(w);
        }
        Ok(acc)
    }

    /// Discrete L² norm of node samples.
    pub fn norm<T: ComplexField<RealField = f64>>(&self, f: &[T]) -> Result<f64> {
        check_len("norm samples", self.len(), f.len())?;
        let s: f64 = f
            .iter()
            .zip(&self.weights)
            .map(|(v, &w)| w * v.clone().modulus_squared())
            .sum();
        Ok(s.sqrt())
    }

    /// Square roots of the weights, used to turn weighted least squares into
    /// ordinary ones.
    pub fn sqrt_weights(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.weights.iter().map(|w| w.sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn twenty_by_four_rule_has_80_nodes_and_total_weight_two_pi() {
        let rule = QuadratureRule::periodic(20, 4).unwrap();
        assert_eq!(rule.len(), 80);
        let total: f64 = rule.weights().iter().sum();
        assert_relative_eq!(total, 2.0 * PI, max_relative = 1e-12);
        assert!(rule.weights().iter().all(|&w| w > 0.0));
        assert!(rule.nodes().windows(2).all(|p| p[0] < p[1]));
        assert!(rule.nodes()[0] > -PI && rule.nodes()[79] < PI);
    }

    #[test]
    fn one_point_rule_is_midpoint() {
        let rule = QuadratureRule::composite_gauss(0.0, 1.0, 1, 1).unwrap();
        assert_eq!(rule.nodes(), &[0.5]);
        assert_eq!(rule.weights(), &[1.0]);
    }

    #[test]
    fn odd_degree_seven_integrates_to_zero() {
        let rule = QuadratureRule::periodic(50, 4).unwrap();
        let v = rule.integrate(|x| x.powi(7));
        // Scale: ∫|x|^7 over [-π, π] is about 2π^8/8.
        assert!(v.abs() <= 1e-12 * PI.powi(8) / 4.0, "{v}");
    }

    #[test]
    fn reference_nodes_match_known_values() {
        let (x, w) = gauss_legendre(2).unwrap();
        assert_relative_eq!(x[1], 1.0 / 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[0], 1.0, epsilon = 1e-15);
        let (x, w) = gauss_legendre(3).unwrap();
        assert_eq!(x[1], 0.0);
        assert_relative_eq!(x[2], (0.6f64).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(w[1], 8.0 / 9.0, epsilon = 1e-15);
        for n in 1..=MAX_NODES_PER {
            let (_, w) = gauss_legendre(n).unwrap();
            assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(QuadratureRule::composite_gauss(1.0, 0.0, 2, 2).is_err());
        assert!(QuadratureRule::composite_gauss(0.0, 1.0, 0, 2).is_err());
        assert!(QuadratureRule::composite_gauss(0.0, 1.0, 2, 0).is_err());
        assert!(QuadratureRule::composite_gauss(0.0, 1.0, 2, 11).is_err());
        assert!(QuadratureRule::composite_gauss(0.0, f64::NAN, 2, 2).is_err());
    }

    #[test]
    fn inner_products_of_trig_samples() {
        let rule = QuadratureRule::periodic(20, 4).unwrap();
        let ones = vec![1.0; rule.len()];
        assert_relative_eq!(
            rule.inner_product(&ones, &ones).unwrap(),
            2.0 * PI,
            max_relative = 1e-12
        );
        let s: Vec<f64> = rule.nodes().iter().map(|x| x.sin()).collect();
        let c: Vec<f64> = rule.nodes().iter().map(|x| x.cos()).collect();
        assert!(rule.inner_product(&s, &c).unwrap().abs() < 1e-12);
        assert_relative_eq!(
            rule.inner_product(&s, &s).unwrap(),
            PI,
            max_relative = 1e-12
        );
        assert!(matches!(
            rule.inner_product(&s[1..], &c),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn complex_inner_product_conjugates_first_argument() {
        let rule = QuadratureRule::periodic(20, 4).unwrap();
        let e: Vec<Complex64> = rule
            .nodes()
            .iter()
            .map(|&x| Complex64::new(0.0, x).exp())
            .collect();
        let v = rule.inner_product(&e, &e).unwrap();
        assert_relative_eq!(v.re, 2.0 * PI, max_relative = 1e-12);
        assert!(v.im.abs() < 1e-12);
        assert_relative_eq!(
            rule.norm(&e).unwrap(),
            (2.0 * PI).sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn norm_vanishes_only_for_zero_samples() {
        let rule = QuadratureRule::periodic(4, 3).unwrap();
        let mut f = vec![0.0; rule.len()];
        assert_eq!(rule.norm(&f).unwrap(), 0.0);
        f[5] = 1e-150;
        assert!(rule.norm(&f).unwrap() > 0.0);
    }

    proptest! {
        #[test]
        fn exact_for_polynomials_up_to_degree_2n_minus_1(
            n in 1usize..=MAX_NODES_PER,
            left in -3.0f64..2.0,
            width in 0.05f64..1.5,
            coeffs in proptest::collection::vec(-1.0f64..1.0, 20),
        ) {
            let deg = 2 * n - 1;
            let c = &coeffs[..=deg];
            let (a, b) = (left, left + width);
            let rule = QuadratureRule::composite_gauss(a, b, 1, n).unwrap();
            let p = |x: f64| c.iter().rev().fold(0.0, |acc, ci| acc * x + ci);
            let antideriv = |x: f64| {
                c.iter().enumerate().map(|(k, ci)| ci * x.powi(k as i32 + 1) / (k as f64 + 1.0)).sum::<f64>()
            };
            let exact = antideriv(b) - antideriv(a);
            let scale: f64 = c.iter().enumerate()
                .map(|(k, ci)| ci.abs() * a.abs().max(b.abs()).powi(k as i32) * width)
                .sum::<f64>()
                .max(1e-300);
            prop_assert!((rule.integrate(p) - exact).abs() <= 1e-12 * scale);
        }
    }
}
