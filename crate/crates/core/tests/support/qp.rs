//! Dense reference solver for the soft-margin RBF dual
//!
//!   max  sum(a) - 1/2 a'Qa   s.t. 0 <= a_i <= C, sum(y_i a_i) = 0,
//!
//! by accelerated projected gradient. Projection onto the box intersected
//! with the hyperplane is a bisection on the hyperplane multiplier.

#![allow(dead_code)]

pub fn kernel(x: &[f32], y: &[f32], gamma: f64) -> f64 {
    let mut d2 = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = *a as f64 - *b as f64;
        d2 += d * d;
    }
    (-gamma * d2).exp()
}

pub struct Problem<'a> {
    pub xs: &'a [Vec<f32>],
    pub ys: &'a [i8],
    pub c: f64,
    pub gamma: f64,
}

pub struct Solution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
}

impl Problem<'_> {
    fn q(&self) -> Vec<Vec<f64>> {
        let n = self.xs.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        self.ys[i] as f64
                            * self.ys[j] as f64
                            * kernel(&self.xs[i], &self.xs[j], self.gamma)
                    })
                    .collect()
            })
            .collect()
    }

    pub fn objective(&self, a: &[f64]) -> f64 {
        let q = self.q();
        let mut quad = 0.0;
        for i in 0..a.len() {
            for j in 0..a.len() {
                quad += a[i] * q[i][j] * a[j];
            }
        }
        a.iter().sum::<f64>() - 0.5 * quad
    }

    fn project(&self, z: &[f64]) -> Vec<f64> {
        let clip = |zi: f64, y: i8, lam: f64| (zi - lam * y as f64).clamp(0.0, self.c);
        let balance = |lam: f64| -> f64 {
            z.iter()
                .zip(self.ys)
                .map(|(&zi, &y)| clip(zi, y, lam) * y as f64)
                .sum()
        };
        let span = z.iter().fold(0.0f64, |m, v| m.max(v.abs())) + self.c + 1.0;
        let (mut lo, mut hi) = (-span, span);
        while hi - lo > 1e-13 * span {
            let mid = 0.5 * (lo + hi);
            if balance(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lam = 0.5 * (lo + hi);
        z.iter()
            .zip(self.ys)
            .map(|(&zi, &y)| clip(zi, y, lam))
            .collect()
    }

    pub fn decision(&self, a: &[f64], bias: f64, x: &[f32]) -> f64 {
        a.iter()
            .enumerate()
            .map(|(i, &ai)| ai * self.ys[i] as f64 * kernel(&self.xs[i], x, self.gamma))
            .sum::<f64>()
            + bias
    }

    pub fn solve(&self, iterations: usize) -> Solution {
        let n = self.xs.len();
        let q = self.q();
        let lip = (0..n)
            .map(|i| q[i].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
            .max(1e-12);
        let mut a = vec![0.0; n];
        let mut v = a.clone();
        let mut t = 1.0f64;
        for _ in 0..iterations {
            // gradient of the minimisation form 1/2 a'Qa - sum(a)
            let grad: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| q[i][j] * v[j]).sum::<f64>() - 1.0)
                .collect();
            let z: Vec<f64> = v.iter().zip(&grad).map(|(vi, g)| vi - g / lip).collect();
            let next = self.project(&z);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            v = next
                .iter()
                .zip(&a)
                .map(|(&nx, &ax)| nx + (t - 1.0) / t_next * (nx - ax))
                .collect();
            a = next;
            t = t_next;
        }
        let bias = self.bias(&a, &q);
        Solution {
            objective: self.objective(&a),
            alphas: a,
            bias,
        }
    }

    /// Mean over free multipliers, else the middle of the feasible interval.
    fn bias(&self, a: &[f64], q: &[Vec<f64>]) -> f64 {
        let n = a.len();
        let eps = 1e-6 * self.c.max(1.0);
        let mut free = Vec::new();
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            let y = self.ys[i] as f64;
            let g = (0..n).map(|j| q[i][j] * a[j]).sum::<f64>() - 1.0;
            let b = -y * g;
            if a[i] > eps && a[i] < self.c - eps {
                free.push(b);
            } else {
                // y f(x_i) >= 1 when a_i = 0, <= 1 when a_i = C
                let lower_side = (a[i] <= eps) == (y > 0.0);
                if lower_side {
                    lo = lo.max(b);
                } else {
                    hi = hi.min(b);
                }
            }
        }
        if !free.is_empty() {
            free.iter().sum::<f64>() / free.len() as f64
        } else if lo.is_finite() && hi.is_finite() {
            0.5 * (lo + hi)
        } else if lo.is_finite() {
            lo
        } else {
            hi
        }
    }
}
