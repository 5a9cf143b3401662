//! Butcher tableaux, consistency checks and the linear stability function.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use super::IrkError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gauss,
    RadauIIA,
    LobattoIIIC,
    PareschiRusso,
    Alexander,
    BackwardEuler,
}

impl Family {
    pub fn all() -> [Family; 6] {
        [
            Family::Gauss,
            Family::RadauIIA,
            Family::LobattoIIIC,
            Family::PareschiRusso,
            Family::Alexander,
            Family::BackwardEuler,
        ]
    }

    /// Stage counts available in the registry.
    pub fn supported_stages(self) -> &'static [usize] {
        match self {
            Family::Gauss | Family::RadauIIA | Family::LobattoIIIC => &[2, 3],
            Family::PareschiRusso => &[2],
            Family::Alexander => &[3],
            Family::BackwardEuler => &[1],
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Family::Gauss => "gauss",
            Family::RadauIIA => "radauiia",
            Family::LobattoIIIC => "lobattoiiic",
            Family::PareschiRusso => "pareschirusso",
            Family::Alexander => "alexander",
            Family::BackwardEuler => "backwardeuler",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Family {
    type Err = IrkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = s.to_ascii_lowercase().replace(['-', '_'], "");
        Ok(match k.as_str() {
            "gauss" | "gausslegendre" => Family::Gauss,
            "radauiia" | "radau" => Family::RadauIIA,
            "lobattoiiic" | "lobatto" => Family::LobattoIIIC,
            "pareschirusso" | "dirkpareschirusso" | "pr" => Family::PareschiRusso,
            "alexander" | "dirkalexander" => Family::Alexander,
            "backwardeuler" | "be" => Family::BackwardEuler,
            _ => return Err(IrkError::UnknownFamily(s.to_string())),
        })
    }
}

/// Coefficients `(A, b, c)` of an `r`-stage Runge-Kutta scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub name: String,
    pub family: Family,
    /// Row-major `r x r`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub order: usize,
    pub stage_order: usize,
    pub l_stable: bool,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.stages() + j]
    }

    /// `b` equals the last row of `A`.
    pub fn is_stiffly_accurate(&self) -> bool {
        let r = self.stages();
        (0..r).all(|j| (self.b[j] - self.a(r - 1, j)).abs() < 1e-15)
    }

    pub fn is_diagonally_implicit(&self) -> bool {
        let r = self.stages();
        (0..r).all(|i| (i + 1..r).all(|j| self.a(i, j) == 0.0))
    }
}

pub fn tableau_lookup(family: Family, stages: usize) -> Result<ButcherTableau, IrkError> {
    let unsupported = || IrkError::Unsupported { family, stages };
    let (a, b, c, order, stage_order, l_stable): (Vec<f64>, Vec<f64>, Vec<f64>, usize, usize, bool) =
        match (family, stages) {
            (Family::BackwardEuler, 1) => (vec![1.0], vec![1.0], vec![1.0], 1, 1, true),
            (Family::Gauss, 2) => {
                let s = 3f64.sqrt() / 6.0;
                (
                    vec![0.25, 0.25 - s, 0.25 + s, 0.25],
                    vec![0.5, 0.5],
                    vec![0.5 - s, 0.5 + s],
                    4,
                    2,
                    false,
                )
            }
            (Family::Gauss, 3) => {
                let s = 15f64.sqrt();
                (
                    vec![
                        5.0 / 36.0,
                        2.0 / 9.0 - s / 15.0,
                        5.0 / 36.0 - s / 30.0,
                        5.0 / 36.0 + s / 24.0,
                        2.0 / 9.0,
                        5.0 / 36.0 - s / 24.0,
                        5.0 / 36.0 + s / 30.0,
                        2.0 / 9.0 + s / 15.0,
                        5.0 / 36.0,
                    ],
                    vec![5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0],
                    vec![0.5 - s / 10.0, 0.5, 0.5 + s / 10.0],
                    6,
                    3,
                    false,
                )
            }
            (Family::RadauIIA, 2) => (
                vec![5.0 / 12.0, -1.0 / 12.0, 0.75, 0.25],
                vec![0.75, 0.25],
                vec![1.0 / 3.0, 1.0],
                3,
                2,
                true,
            ),
            (Family::RadauIIA, 3) => {
                let s = 6f64.sqrt();
                (
                    vec![
                        (88.0 - 7.0 * s) / 360.0,
                        (296.0 - 169.0 * s) / 1800.0,
                        (-2.0 + 3.0 * s) / 225.0,
                        (296.0 + 169.0 * s) / 1800.0,
                        (88.0 + 7.0 * s) / 360.0,
                        (-2.0 - 3.0 * s) / 225.0,
                        (16.0 - s) / 36.0,
                        (16.0 + s) / 36.0,
                        1.0 / 9.0,
                    ],
                    vec![(16.0 - s) / 36.0, (16.0 + s) / 36.0, 1.0 / 9.0],
                    vec![(4.0 - s) / 10.0, (4.0 + s) / 10.0, 1.0],
                    5,
                    3,
                    true,
                )
            }
            (Family::LobattoIIIC, 2) => {
                (vec![0.5, -0.5, 0.5, 0.5], vec![0.5, 0.5], vec![0.0, 1.0], 2, 1, true)
            }
            (Family::LobattoIIIC, 3) => (
                vec![
                    1.0 / 6.0,
                    -1.0 / 3.0,
                    1.0 / 6.0,
                    1.0 / 6.0,
                    5.0 / 12.0,
                    -1.0 / 12.0,
                    1.0 / 6.0,
                    2.0 / 3.0,
                    1.0 / 6.0,
                ],
                vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
                vec![0.0, 0.5, 1.0],
                4,
                2,
                true,
            ),
            (Family::PareschiRusso, 2) => {
                let x = 1.0 - 2f64.sqrt() / 2.0;
                (vec![x, 0.0, 1.0 - 2.0 * x, x], vec![0.5, 0.5], vec![x, 1.0 - x], 2, 1, true)
            }
            (Family::Alexander, 3) => {
                let x = alexander_root();
                let b1 = -(6.0 * x * x - 16.0 * x + 1.0) / 4.0;
                let b2 = (6.0 * x * x - 20.0 * x + 5.0) / 4.0;
                (
                    vec![x, 0.0, 0.0, (1.0 - x) / 2.0, x, 0.0, b1, b2, x],
                    vec![b1, b2, x],
                    vec![x, (1.0 + x) / 2.0, 1.0],
                    3,
                    1,
                    true,
                )
            }
            _ => return Err(unsupported()),
        };
    let name = match family {
        Family::BackwardEuler => "BackwardEuler".to_string(),
        Family::PareschiRusso => "DIRK-PareschiRusso(2)".to_string(),
        Family::Alexander => "DIRK-Alexander(3)".to_string(),
        Family::Gauss => format!("Gauss({stages})"),
        Family::RadauIIA => format!("RadauIIA({stages})"),
        Family::LobattoIIIC => format!("LobattoIIIC({stages})"),
    };
    Ok(ButcherTableau { name, family, a, b, c, order, stage_order, l_stable })
}

/// Root of `x^3 - 3x^2 + 3x/2 - 1/6` in `(1/6, 1/2)`, the diagonal of the
/// three-stage L-stable SDIRK.
fn alexander_root() -> f64 {
    let mut x: f64 = 0.4358665215;
    for _ in 0..50 {
        let f = x * x * x - 3.0 * x * x + 1.5 * x - 1.0 / 6.0;
        let df = 3.0 * x * x - 6.0 * x + 1.5;
        let dx = f / df;
        x -= dx;
        if dx.abs() < 1e-17 {
            break;
        }
    }
    x
}

/// Outcome of checking the simplifying conditions of a tableau.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub name: String,
    pub sum_b: f64,
    /// `sum_j a_ij - c_i` per row.
    pub row_sum_defects: Vec<f64>,
    /// `sum_j b_j c_j^(k-1) - 1/k` for `k = 1..=order`.
    pub quadrature_defects: Vec<f64>,
    /// `sum_j a_ij c_j^(k-1) - c_i^k / k`, worst row, for `k = 1..=stage_order`.
    pub stage_defects: Vec<f64>,
    pub passed: bool,
    pub failures: Vec<String>,
}

pub const CONSISTENCY_TOL: f64 = 1e-14;
pub const ORDER_TOL: f64 = 1e-12;

/// `B(k)`: `sum_j b_j c_j^(k-1) = 1/k`.
pub fn quadrature_defect(t: &ButcherTableau, k: usize) -> f64 {
    let s: f64 = t.b.iter().zip(&t.c).map(|(b, c)| b * c.powi(k as i32 - 1)).sum();
    s - 1.0 / k as f64
}

/// `C(k)`: `sum_j a_ij c_j^(k-1) = c_i^k / k`, worst row.
pub fn stage_defect(t: &ButcherTableau, k: usize) -> f64 {
    let r = t.stages();
    (0..r)
        .map(|i| {
            let s: f64 = (0..r).map(|j| t.a(i, j) * t.c[j].powi(k as i32 - 1)).sum();
            s - t.c[i].powi(k as i32) / k as f64
        })
        .fold(0.0, |m: f64, d| if d.abs() > m.abs() { d } else { m })
}

/// Largest `k` such that `B(1..=k)` all hold to [`ORDER_TOL`].
pub fn quadrature_order(t: &ButcherTableau) -> usize {
    (1..=2 * t.stages() + 2).take_while(|&k| quadrature_defect(t, k).abs() <= ORDER_TOL).count()
}

pub fn consistency_check(t: &ButcherTableau) -> ConsistencyReport {
    let r = t.stages();
    let sum_b: f64 = t.b.iter().sum();
    let row_sum_defects: Vec<f64> =
        (0..r).map(|i| (0..r).map(|j| t.a(i, j)).sum::<f64>() - t.c[i]).collect();
    let quadrature_defects: Vec<f64> = (1..=t.order).map(|k| quadrature_defect(t, k)).collect();
    let stage_defects: Vec<f64> = (1..=t.stage_order).map(|k| stage_defect(t, k)).collect();

    let mut failures = Vec::new();
    if (sum_b - 1.0).abs() > CONSISTENCY_TOL {
        failures.push(format!("sum of weights is {sum_b}, expected 1"));
    }
    for (i, d) in row_sum_defects.iter().enumerate() {
        if d.abs() > CONSISTENCY_TOL {
            failures.push(format!("row {i} sums to c_{i} {d:+e}"));
        }
    }
    for (k, d) in quadrature_defects.iter().enumerate() {
        if d.abs() > ORDER_TOL {
            failures.push(format!("quadrature condition B({}) fails by {d:e}", k + 1));
        }
    }
    for (k, d) in stage_defects.iter().enumerate() {
        if d.abs() > ORDER_TOL {
            failures.push(format!("stage condition C({}) fails by {d:e}", k + 1));
        }
    }
    ConsistencyReport {
        name: t.name.clone(),
        sum_b,
        row_sum_defects,
        quadrature_defects,
        stage_defects,
        passed: failures.is_empty(),
        failures,
    }
}

/// `r(z) = 1 + z b^T (I - zA)^{-1} 1`.
pub fn stability_function(t: &ButcherTableau, z: Complex64) -> Result<Complex64, IrkError> {
    let r = t.stages();
    let mut m: Vec<Complex64> = (0..r * r)
        .map(|k| {
            let (i, j) = (k / r, k % r);
            let id = if i == j { 1.0 } else { 0.0 };
            Complex64::new(id, 0.0) - z * t.a(i, j)
        })
        .collect();
    let mut rhs = vec![Complex64::new(1.0, 0.0); r];
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.norm()));
    for col in 0..r {
        let piv = (col..r)
            .max_by(|&p, &q| m[p * r + col].norm().partial_cmp(&m[q * r + col].norm()).unwrap())
            .unwrap();
        if m[piv * r + col].norm() <= 1e-14 * scale.max(1.0) {
            return Err(IrkError::SingularResolvent { re: z.re, im: z.im });
        }
        if piv != col {
            for j in 0..r {
                m.swap(piv * r + j, col * r + j);
            }
            rhs.swap(piv, col);
        }
        for row in col + 1..r {
            let f = m[row * r + col] / m[col * r + col];
            for j in col..r {
                let v = m[col * r + j];
                m[row * r + j] -= f * v;
            }
            let v = rhs[col];
            rhs[row] -= f * v;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); r];
    for i in (0..r).rev() {
        let mut s = rhs[i];
        for j in i + 1..r {
            s -= m[i * r + j] * x[j];
        }
        x[i] = s / m[i * r + i];
    }
    let btx: Complex64 = t.b.iter().zip(&x).map(|(b, xi)| xi * *b).sum();
    Ok(1.0 + z * btx)
}

/// Plain-text summary of a tableau for the `tableau-report` command.
pub fn tableau_report(t: &ButcherTableau) -> String {
    let rep = consistency_check(t);
    let far = stability_function(t, Complex64::new(-1e6, 0.0)).map(|v| v.norm()).unwrap_or(f64::NAN);
    let defects: Vec<String> = rep.row_sum_defects.iter().map(|d| format!("{d:.3e}")).collect();
    format!(
        "name: {}\nstages: {}\norder: {}\nstage order: {}\nsum b: {:.16}\nrow-sum defects: [{}]\n|r(-1e6)|: {:.6e}\nconsistent: {}\n",
        t.name,
        t.stages(),
        t.order,
        t.stage_order,
        rep.sum_b,
        defects.join(", "),
        far,
        if rep.passed { "yes" } else { "no" },
    )
}
