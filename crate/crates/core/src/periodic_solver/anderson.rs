//! Fixed-point acceleration for the Poincaré iteration x ← G(x).

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::linalg;

/// Update rule for the shooting iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Acceleration {
    Plain,
    /// x ← (1 − θ)x + θ G(x), θ ∈ (0, 1]
    Relaxed(f64),
    /// Type-II Anderson mixing with the given history depth.
    Anderson(usize),
}

impl Default for Acceleration {
    fn default() -> Self {
        Acceleration::Anderson(3)
    }
}

/// Stateful mixer producing the next iterate from (x, G(x)).
#[derive(Debug, Clone)]
pub struct Mixer {
    kind: Acceleration,
    xs: VecDeque<Vec<f64>>,
    gs: VecDeque<Vec<f64>>,
}

impl Mixer {
    pub fn new(kind: Acceleration) -> Self {
        Self {
            kind,
            xs: VecDeque::new(),
            gs: VecDeque::new(),
        }
    }

    pub fn next(&mut self, x: &[f64], gx: &[f64]) -> Vec<f64> {
        match self.kind {
            Acceleration::Plain => gx.to_vec(),
            Acceleration::Relaxed(theta) => x
                .iter()
                .zip(gx)
                .map(|(a, b)| (1.0 - theta) * a + theta * b)
                .collect(),
            Acceleration::Anderson(depth) => self.anderson(depth, x, gx),
        }
    }

    fn anderson(&mut self, depth: usize, x: &[f64], gx: &[f64]) -> Vec<f64> {
        self.xs.push_back(x.to_vec());
        self.gs.push_back(gx.to_vec());
        while self.xs.len() > depth + 1 {
            self.xs.pop_front();
            self.gs.pop_front();
        }
        let m = self.xs.len() - 1;
        if m == 0 || depth == 0 {
            return gx.to_vec();
        }
        let n = x.len();
        let res = |k: usize| linalg::sub(&self.gs[k], &self.xs[k]);
        let f_last = res(m);
        let mut df = DMatrix::zeros(n, m);
        for j in 0..m {
            let d = linalg::sub(&res(j + 1), &res(j));
            for i in 0..n {
                df[(i, j)] = d[i];
            }
        }
        let svd = df.svd(true, true);
        let smax = svd.singular_values.max();
        if !(smax > 0.0) {
            return gx.to_vec();
        }
        let gamma = match svd.solve(&DVector::from_vec(f_last), 1e-10 * smax) {
            Ok(g) => g,
            Err(_) => return gx.to_vec(),
        };
        if gamma.iter().any(|v| !v.is_finite()) {
            self.reset();
            return gx.to_vec();
        }
        let mut out = gx.to_vec();
        for j in 0..m {
            let dg = linalg::sub(&self.gs[j + 1], &self.gs[j]);
            linalg::axpy(-gamma[j], &dg, &mut out);
        }
        out
    }

    pub fn reset(&mut self) {
        self.xs.clear();
        self.gs.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iterate(kind: Acceleration, g: impl Fn(&[f64]) -> Vec<f64>, x0: Vec<f64>) -> usize {
        let mut mixer = Mixer::new(kind);
        let mut x = x0;
        for it in 1..500 {
            let gx = g(&x);
            if linalg::norm_inf(&linalg::sub(&gx, &x)) < 1e-12 {
                return it;
            }
            x = mixer.next(&x, &gx);
        }
        500
    }

    #[test]
    fn anderson_beats_plain_on_slow_linear_map() {
        // contraction with a slow mode (factor 0.95) and a fast one
        let g = |x: &[f64]| vec![0.95 * x[0] + 1.0, 0.1 * x[1] - 0.5 + 0.01 * x[0]];
        let plain = iterate(Acceleration::Plain, g, vec![0.0, 0.0]);
        let anderson = iterate(Acceleration::Anderson(3), g, vec![0.0, 0.0]);
        assert!(plain > 300);
        assert!(anderson < 20, "{anderson}");
    }

    #[test]
    fn relaxation_keeps_fixed_points() {
        let mut m = Mixer::new(Acceleration::Relaxed(0.5));
        assert_eq!(m.next(&[1.0, 2.0], &[3.0, 2.0]), vec![2.0, 2.0]);
    }
}
