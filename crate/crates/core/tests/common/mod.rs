#![allow(dead_code)]

//! Dense reference Gramians from the textbook Cox–de Boor recursion and a
//! fixed five-point Gauss rule.

pub const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

pub struct Oracle {
    pub p: usize,
    pub knots: Vec<f64>,
    pub breaks: Vec<f64>,
}

impl Oracle {
    pub fn new(p: usize, level: u32, q: i32) -> Self {
        let n = 1usize << level;
        let mult = (p as i32 - q) as usize;
        let breaks: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let mut knots = vec![0.0; p + 1];
        for b in &breaks[1..n] {
            knots.extend(std::iter::repeat_n(*b, mult));
        }
        knots.extend(std::iter::repeat_n(1.0, p + 1));
        Self { p, knots, breaks }
    }

    pub fn dim(&self) -> usize {
        self.knots.len() - self.p - 1
    }

    /// `D^r N_{i,k}(x)` for `x` strictly inside a knot span.
    pub fn basis(&self, i: usize, k: usize, r: usize, x: f64) -> f64 {
        let t = &self.knots;
        if k == 0 {
            return if r == 0 && t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 };
        }
        let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
        if r == 0 {
            ratio(x - t[i], t[i + k] - t[i]) * self.basis(i, k - 1, 0, x)
                + ratio(t[i + k + 1] - x, t[i + k + 1] - t[i + 1]) * self.basis(i + 1, k - 1, 0, x)
        } else {
            k as f64
                * (ratio(self.basis(i, k - 1, r - 1, x), t[i + k] - t[i])
                    - ratio(self.basis(i + 1, k - 1, r - 1, x), t[i + k + 1] - t[i + 1]))
        }
    }

    /// Values at an end of the interval: open knots make the end functions interpolatory.
    pub fn end_value(&self, i: usize, at_right: bool) -> f64 {
        let target = if at_right { self.dim() - 1 } else { 0 };
        if i == target {
            1.0
        } else {
            0.0
        }
    }
}

/// Quadrature points on `[lo, hi]` splitting at every breakpoint of both oracles.
pub fn points(a: &Oracle, b: &Oracle, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = a.breaks.iter().chain(&b.breaks).copied().filter(|&x| x > lo && x < hi).collect();
    cuts.extend([lo, hi]);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .flat_map(|w| {
            let (m, h) = ((w[0] + w[1]) / 2.0, (w[1] - w[0]) / 2.0);
            GAUSS5.iter().map(move |&(s, wt)| (m + h * s, h * wt))
        })
        .collect()
}

/// `∫ D^a N_i D^b M_j` over `[lo, hi]`.
pub fn dense_gramian_1d(test: &Oracle, trial: &Oracle, a: usize, b: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let pts = points(test, trial, lo, hi);
    (0..test.dim())
        .map(|i| {
            (0..trial.dim())
                .map(|j| pts.iter().map(|&(x, w)| w * test.basis(i, test.p, a, x) * trial.basis(j, trial.p, b, x)).sum())
                .collect()
        })
        .collect()
}
