//! Random polynomial expressions and bump factors for test data.

use rand::Rng;

use crate::expr::Expr;
use crate::taylor::multi_indices_up_to;

pub fn monomial<S: AsRef<str>>(vars: &[S], mu: &[u8]) -> Expr {
    Expr::product(vars.iter().zip(mu).filter(|(_, &e)| e > 0).map(|(v, &e)| {
        let x = Expr::var(v.as_ref());
        if e == 1 {
            x
        } else {
            x.pow(e as f64)
        }
    }))
}

/// `sum_mu c_mu x^mu` with the given coefficients in basis order.
pub fn polynomial<S: AsRef<str>>(vars: &[S], degree: usize, coeffs: &[f64]) -> Expr {
    let idx = multi_indices_up_to(vars.len(), degree);
    assert_eq!(idx.len(), coeffs.len());
    Expr::sum(
        idx.iter()
            .zip(coeffs)
            .filter(|(_, &c)| c != 0.0)
            .map(|(mu, &c)| {
                if mu.iter().all(|&e| e == 0) {
                    Expr::num(c)
                } else {
                    Expr::num(c) * monomial(vars, mu)
                }
            }),
    )
}

/// Polynomial of total degree `<= degree` with coefficients uniform in
/// `[-scale, scale]`.
pub fn random_polynomial<S: AsRef<str>, R: Rng>(vars: &[S], degree: usize, scale: f64, rng: &mut R) -> Expr {
    let n = multi_indices_up_to(vars.len(), degree).len();
    let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-scale..=scale)).collect();
    polynomial(vars, degree, &coeffs)
}

/// `prod_i (x_i - lo_i)^2 (hi_i - x_i)^2`: vanishes with its first
/// derivative on the boundary of the box.
pub fn bump<S: AsRef<str>>(vars: &[S], lo: &[f64], hi: &[f64]) -> Expr {
    Expr::product(vars.iter().zip(lo.iter().zip(hi)).map(|(v, (&a, &b))| {
        let x = Expr::var(v.as_ref());
        ((x.clone() - Expr::num(a)) * (Expr::num(b) - x)).pow(2.0)
    }))
}

/// Names `prefix1 .. prefixN`.
pub fn var_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ExprMap;
    use crate::sampling::rng;

    #[test]
    fn polynomial_reproduces_coefficients() {
        let vars = var_names("x", 2);
        // 1 - 2 x1 + 3 x1 x2
        let e = polynomial(&vars, 2, &[1.0, -2.0, 0.0, 0.0, 3.0, 0.0]);
        let m = ExprMap::new(&vars, vec![e]).unwrap();
        assert_eq!(m.eval(&[2.0, 5.0]).unwrap(), vec![1.0 - 4.0 + 30.0]);
        assert_eq!(m.polynomial_degree(), Some(2));
    }

    #[test]
    fn bump_vanishes_on_boundary() {
        let vars = var_names("x", 2);
        let m = ExprMap::new(&vars, vec![bump(&vars, &[0.0, -1.0], &[1.0, 2.0])]).unwrap();
        assert_eq!(m.eval(&[0.0, 0.5]).unwrap()[0], 0.0);
        assert_eq!(m.eval(&[0.3, 2.0]).unwrap()[0], 0.0);
        assert!(m.eval(&[0.5, 0.5]).unwrap()[0] > 0.0);
        let j = m.taylor_lift(&[1.0, 0.5], 1).unwrap();
        assert_eq!(j.components()[0].gradient(), vec![0.0, 0.0]);
        assert_eq!(m.polynomial_degree(), Some(8));
    }

    #[test]
    fn random_polynomial_is_seeded() {
        let vars = var_names("x", 3);
        let a = random_polynomial(&vars, 3, 1.0, &mut rng(5));
        let b = random_polynomial(&vars, 3, 1.0, &mut rng(5));
        assert_eq!(a, b);
        assert!(a.polynomial_degree().unwrap() <= 3);
    }
}
