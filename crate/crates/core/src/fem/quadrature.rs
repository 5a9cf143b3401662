//! Quadrature on the reference triangle `(0,0), (1,0), (0,1)`.
//!
//! Degrees up to 5 use symmetric rules; anything higher falls back to a
//! collapsed (Duffy) Gauss-Legendre product rule, which is exact for any
//! requested polynomial degree.

/// Points in reference coordinates with weights summing to the reference area 1/2.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    pub fn of_degree(degree: usize) -> Self {
        match degree {
            0 | 1 => symmetric(degree, &[(1.0, Orbit::Centroid)]),
            2 => symmetric(2, &[(1.0 / 3.0, Orbit::Three(1.0 / 6.0))]),
            3 => symmetric(3, &[(-27.0 / 48.0, Orbit::Centroid), (25.0 / 48.0, Orbit::Three(0.2))]),
            4 => symmetric(
                4,
                &[
                    (0.223_381_589_678_011, Orbit::Three(0.445_948_490_915_965)),
                    (0.109_951_743_655_322, Orbit::Three(0.091_576_213_509_771)),
                ],
            ),
            5 => {
                let s15 = 15f64.sqrt();
                symmetric(
                    5,
                    &[
                        (9.0 / 40.0, Orbit::Centroid),
                        ((155.0 + s15) / 1200.0, Orbit::Three((6.0 + s15) / 21.0)),
                        ((155.0 - s15) / 1200.0, Orbit::Three((6.0 - s15) / 21.0)),
                    ],
                )
            }
            d => collapsed_gauss(d),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

enum Orbit {
    Centroid,
    /// Barycentric `(a, a, 1 - 2a)` and its permutations.
    Three(f64),
}

fn symmetric(degree: usize, orbits: &[(f64, Orbit)]) -> TriangleRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (w, orbit) in orbits {
        match *orbit {
            Orbit::Centroid => {
                points.push([1.0 / 3.0, 1.0 / 3.0]);
                weights.push(0.5 * w);
            }
            Orbit::Three(a) => {
                let b = 1.0 - 2.0 * a;
                for p in [[a, a], [b, a], [a, b]] {
                    points.push(p);
                    weights.push(0.5 * w);
                }
            }
        }
    }
    TriangleRule { points, weights, degree }
}

fn collapsed_gauss(degree: usize) -> TriangleRule {
    // the Jacobian (1 - s) raises the degree in s by one
    let n = (degree + 3).div_ceil(2);
    let (nodes, gw) = gauss_legendre_unit(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (s, ws) in nodes.iter().zip(&gw) {
        for (t, wt) in nodes.iter().zip(&gw) {
            points.push([*s, (1.0 - s) * t]);
            weights.push(ws * wt * (1.0 - s));
        }
    }
    TriangleRule { points, weights, degree }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
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
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

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
