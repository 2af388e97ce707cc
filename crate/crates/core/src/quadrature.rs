//! Quadrature on the reference triangle `{(ξ, η): ξ, η ≥ 0, ξ + η ≤ 1}`.
//!
//! Rules are conical products of Gauss–Legendre rules (collapsed square), so
//! any order of exactness is available without tables.

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    /// Polynomial degree integrated exactly.
    pub order: usize,
    /// Reference coordinates `(ξ, η)`.
    pub points: Vec<[f64; 2]>,
    /// Weights summing to the reference area `1/2`.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Rule exact for all polynomials of total degree `order`.
    pub fn new(order: usize) -> Self {
        let n_s = (order + 2) / 2;
        let n_t = (order + 3) / 2;
        let (s_nodes, s_weights) = gauss_legendre(n_s.max(1));
        let (t_nodes, t_weights) = gauss_legendre(n_t.max(1));
        let mut points = Vec::with_capacity(n_s * n_t);
        let mut weights = Vec::with_capacity(n_s * n_t);
        for (t, wt) in t_nodes.iter().zip(&t_weights) {
            for (s, ws) in s_nodes.iter().zip(&s_weights) {
                points.push([s * (1.0 - t), *t]);
                weights.push(ws * wt * (1.0 - t));
            }
        }
        Self { order, points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Barycentric coordinates of point `q`.
    pub fn bary(&self, q: usize) -> [f64; 3] {
        let [x, y] = self.points[q];
        [1.0 - x - y, x, y]
    }
}
