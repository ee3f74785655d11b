//! Gauss-Legendre rules and the polar/cylindrical/ball quadratures built on them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(move |(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Node counts for polar disc quadrature: Gauss in radius, trapezoid in angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscQuadrature {
    pub radial: usize,
    pub angular: usize,
}

impl Default for DiscQuadrature {
    fn default() -> Self {
        Self {
            radial: 64,
            angular: 128,
        }
    }
}

impl DiscQuadrature {
    pub fn new(radial: usize, angular: usize) -> Self {
        Self { radial, angular }
    }

    pub fn doubled(self) -> Self {
        Self {
            radial: self.radial * 2,
            angular: self.angular * 2,
        }
    }

    /// Points `(x, y)` and weights covering `|x_h - center| < radius`.
    pub fn disc(&self, center: [f64; 2], radius: f64) -> Vec<([f64; 2], f64)> {
        if radius <= 0.0 {
            return Vec::new();
        }
        let gl = GaussLegendre::new(self.radial);
        let dtheta = 2.0 * PI / self.angular as f64;
        let angles: Vec<(f64, f64)> = (0..self.angular)
            .map(|j| (j as f64 * dtheta).sin_cos())
            .collect();
        let mut pts = Vec::with_capacity(self.radial * self.angular);
        for (r, wr) in gl.on(0.0, radius) {
            for &(s, c) in &angles {
                pts.push(([center[0] + r * c, center[1] + r * s], wr * r * dtheta));
            }
        }
        pts
    }

    /// Points on the circle `|x_h - center| = radius`, unit outward normal, arc weight.
    pub fn circle(&self, center: [f64; 2], radius: f64) -> Vec<([f64; 2], [f64; 2], f64)> {
        let dtheta = 2.0 * PI / self.angular as f64;
        (0..self.angular)
            .map(|j| {
                let (s, c) = (j as f64 * dtheta).sin_cos();
                (
                    [center[0] + radius * c, center[1] + radius * s],
                    [c, s],
                    radius * dtheta,
                )
            })
            .collect()
    }
}

/// Spatial shape of a probe region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// Euclidean ball `|x - x0| < r`.
    Ball,
    /// Cylinder `|x_h - x0_h| < r, |x3 - x03| < r`.
    AxisCylinder,
}

/// Quadrature over a ball or axis cylinder, as stacked horizontal discs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeQuadrature {
    pub vertical: usize,
    pub disc: DiscQuadrature,
}

impl Default for VolumeQuadrature {
    fn default() -> Self {
        Self {
            vertical: 24,
            disc: DiscQuadrature::new(24, 48),
        }
    }
}

impl VolumeQuadrature {
    pub fn doubled(self) -> Self {
        Self {
            vertical: self.vertical * 2,
            disc: self.disc.doubled(),
        }
    }

    pub fn points(&self, shape: Shape, center: [f64; 3], radius: f64) -> Vec<([f64; 3], f64)> {
        let gl = GaussLegendre::new(self.vertical);
        let mut pts = Vec::new();
        for (dz, wz) in gl.on(-radius, radius) {
            let rho = match shape {
                Shape::Ball => (radius * radius - dz * dz).max(0.0).sqrt(),
                Shape::AxisCylinder => radius,
            };
            for (xy, w) in self.disc.disc([center[0], center[1]], rho) {
                pts.push(([xy[0], xy[1], center[2] + dz], w * wz));
            }
        }
        pts
    }
}

pub fn region_volume(shape: Shape, radius: f64) -> f64 {
    match shape {
        Shape::Ball => 4.0 / 3.0 * PI * radius.powi(3),
        Shape::AxisCylinder => 2.0 * PI * radius.powi(3),
    }
}
