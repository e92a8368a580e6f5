//! Damped BFGS approximation of the Lagrangian Hessian.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct Bfgs {
    matrix: DMatrix<f64>,
}

impl Bfgs {
    pub fn new(n: usize) -> Self {
        Bfgs {
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Updates with step `s` and gradient change `y`. Powell damping replaces
    /// `y` by a convex combination with `B s` when the curvature `s'y` is
    /// below `0.2 s'Bs`, which keeps the matrix positive definite.
    /// Returns `false` when the step is too small to carry information.
    pub fn update(&mut self, s: &[f64], y: &[f64]) -> bool {
        let s = DVector::from_column_slice(s);
        let mut y = DVector::from_column_slice(y);
        let bs = &self.matrix * &s;
        let sbs = s.dot(&bs);
        if !(sbs > 1e-300) {
            return false;
        }
        let sy = s.dot(&y);
        if sy < 0.2 * sbs {
            let theta = 0.8 * sbs / (sbs - sy);
            y = &y * theta + &bs * (1.0 - theta);
        }
        let sy = s.dot(&y);
        self.matrix -= &bs * bs.transpose() / sbs;
        self.matrix += &y * y.transpose() / sy;
        // keep exact symmetry
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        self.matrix = sym;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn secant_condition_after_each_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 5;
        // curvature from a fixed SPD quadratic, so no damping triggers
        let a = DMatrix::from_fn(n, n, |i, j| if i == j { 3.0 + i as f64 } else { 0.3 });
        let mut bfgs = Bfgs::new(n);
        for _ in 0..20 {
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (&a * DVector::from_column_slice(&s)).iter().copied().collect();
            assert!(bfgs.update(&s, &y));
            let bs = bfgs.matrix() * DVector::from_column_slice(&s);
            for i in 0..n {
                assert!((bs[i] - y[i]).abs() <= 1e-9 * (1.0 + y[i].abs()), "{} vs {}", bs[i], y[i]);
            }
        }
    }

    #[test]
    fn damping_keeps_positive_definite() {
        let mut bfgs = Bfgs::new(2);
        bfgs.update(&[1.0, 0.0], &[-1.0, 0.0]);
        assert!(bfgs.matrix().clone().cholesky().is_some());
    }
}
