//! Coefficient sets of the Rosenbrock, IMEX and TR-BDF2 schemes.

/// How the printed `Gamma` enters the stage equations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GammaConvention {
    /// `(I - a_jj tau J) k_j = g(w + tau sum (a + gamma) k) - tau J sum gamma k`.
    Shifted,
    /// `(I - a_jj tau J) k_j = g(w + tau sum a k) + tau J sum gamma k`.
    Additive,
}

/// Linearly implicit `s`-stage scheme. `a` and `gamma` are row-major `s x s`.
#[derive(Clone, Debug, PartialEq)]
pub struct RosenbrockTableau {
    pub name: &'static str,
    pub stages: usize,
    pub a: Vec<f64>,
    pub gamma: Vec<f64>,
    pub b: Vec<f64>,
    pub embedded: Option<Vec<f64>>,
    pub convention: GammaConvention,
}

impl RosenbrockTableau {
    pub fn ros2() -> Self {
        let r = std::f64::consts::SQRT_2;
        Self {
            name: "ROS2",
            stages: 2,
            a: vec![1.0 - r / 2.0, 0.0, r - 1.0, 1.0 - r / 2.0],
            gamma: vec![0.0, 0.0, 2.0 - r, 0.0],
            b: vec![0.5, 0.5],
            embedded: None,
            convention: GammaConvention::Shifted,
        }
    }

    /// The diagonal parameter `a` of ROS3 from its closed form.
    pub fn ros3_diagonal() -> f64 {
        let theta = (2f64.sqrt() / 4.0).atan() / 3.0;
        1.0 - 0.5 * 2f64.sqrt() * theta.cos() + 0.5 * 6f64.sqrt() * theta.sin()
    }

    pub fn ros3() -> Self {
        let a = Self::ros3_diagonal();
        let g32 = 0.5 - 3.0 * a;
        let g31 = -(6.0 * a.powi(3) - 12.0 * a * a + 6.0 * (1.0 + g32) * a + 2.0 * g32 * g32 - 0.5) / (1.0 + 2.0 * g32);
        let g21 = -(3.0 * a + g31 + g32);
        let third = 1.0 / 3.0;
        Self {
            name: "ROS3",
            stages: 3,
            a: vec![a, 0.0, 0.0, 0.5, a, 0.0, 0.5, 0.5, a],
            gamma: vec![0.0, 0.0, 0.0, g21, 0.0, 0.0, g31, g32, 0.0],
            b: vec![third, third, third],
            embedded: Some(vec![0.5, 0.5, 0.0]),
            convention: GammaConvention::Additive,
        }
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.stages + j]
    }

    #[inline]
    pub fn gamma(&self, i: usize, j: usize) -> f64 {
        self.gamma[i * self.stages + j]
    }

    /// Coefficient of `k_j` inside the argument of `g` for stage `i`.
    pub fn argument_weight(&self, i: usize, j: usize) -> f64 {
        match self.convention {
            GammaConvention::Shifted => self.a(i, j) + self.gamma(i, j),
            GammaConvention::Additive => self.a(i, j),
        }
    }

    /// Coefficient of `tau J k_j` added to the right-hand side of stage `i`.
    pub fn jacobian_weight(&self, i: usize, j: usize) -> f64 {
        match self.convention {
            GammaConvention::Shifted => -self.gamma(i, j),
            GammaConvention::Additive => self.gamma(i, j),
        }
    }
}

/// Additive Runge-Kutta pair: explicit `(a_exp, b_exp)`, diagonally implicit
/// `(a_imp, b_imp)`, both row-major `s x s`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImexTableau {
    pub name: &'static str,
    pub stages: usize,
    pub a_exp: Vec<f64>,
    pub b_exp: Vec<f64>,
    pub c_exp: Vec<f64>,
    pub a_imp: Vec<f64>,
    pub b_imp: Vec<f64>,
    pub c_imp: Vec<f64>,
    pub embedded_exp: Option<Vec<f64>>,
    pub embedded_imp: Option<Vec<f64>>,
}

impl ImexTableau {
    /// Implicit-explicit midpoint rule.
    pub fn imex2() -> Self {
        Self {
            name: "IMEX2",
            stages: 2,
            a_exp: vec![0.0, 0.0, 0.5, 0.0],
            b_exp: vec![0.0, 1.0],
            c_exp: vec![0.0, 0.5],
            a_imp: vec![0.0, 0.0, 0.0, 0.5],
            b_imp: vec![0.0, 1.0],
            c_imp: vec![0.0, 0.5],
            embedded_exp: None,
            embedded_imp: None,
        }
    }

    /// Four-stage third-order pair with an L-stable, stiffly accurate implicit part
    /// and a second-order embedded companion.
    pub fn imex3() -> Self {
        let g = 1767732205903.0 / 4055673282236.0;
        let c2 = 1767732205903.0 / 2027836641118.0;
        let b = vec![
            1471266399579.0 / 7840856788654.0,
            -4482444167858.0 / 7529755066697.0,
            11266239266428.0 / 11593286722821.0,
            g,
        ];
        let embedded = vec![
            2756255671327.0 / 12835298489170.0,
            -10771552573575.0 / 22201958757719.0,
            9247589265047.0 / 10645013368117.0,
            2193209047091.0 / 5459859503100.0,
        ];
        #[rustfmt::skip]
        let a_exp = vec![
            0.0, 0.0, 0.0, 0.0,
            c2, 0.0, 0.0, 0.0,
            5535828885825.0 / 10492691773637.0, 788022342437.0 / 10882634858940.0, 0.0, 0.0,
            6485989280629.0 / 16251701735622.0, -4246266847089.0 / 9704473918619.0,
            10755448449292.0 / 10357097424841.0, 0.0,
        ];
        #[rustfmt::skip]
        let a_imp = vec![
            0.0, 0.0, 0.0, 0.0,
            g, g, 0.0, 0.0,
            2746238789719.0 / 10658868560708.0, -640167445237.0 / 6845629431997.0, g, 0.0,
            b[0], b[1], b[2], g,
        ];
        let c = vec![0.0, c2, 0.6, 1.0];
        Self {
            name: "IMEX3",
            stages: 4,
            a_exp,
            b_exp: b.clone(),
            c_exp: c.clone(),
            a_imp,
            b_imp: b,
            c_imp: c,
            embedded_exp: Some(embedded.clone()),
            embedded_imp: Some(embedded),
        }
    }

    #[inline]
    pub fn a_exp(&self, i: usize, j: usize) -> f64 {
        self.a_exp[i * self.stages + j]
    }

    #[inline]
    pub fn a_imp(&self, i: usize, j: usize) -> f64 {
        self.a_imp[i * self.stages + j]
    }
}

/// Butcher tableau of an implicit Runge-Kutta scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct ButcherTableau {
    pub stages: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl ButcherTableau {
    /// Simplified TR-BDF2: trapezoidal stage to `t + tau/2`, then a
    /// stiffly accurate closing stage.
    pub fn tr_bdf2() -> Self {
        let q = 0.25;
        let t = 1.0 / 3.0;
        Self {
            stages: 3,
            a: vec![0.0, 0.0, 0.0, q, q, 0.0, t, t, t],
            b: vec![t, t, t],
            c: vec![0.0, 0.5, 1.0],
        }
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.stages + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ros2_matches_printed_coefficients() {
        let t = RosenbrockTableau::ros2();
        let r = 2f64.sqrt();
        assert_eq!(t.a, vec![1.0 - r / 2.0, 0.0, r - 1.0, 1.0 - r / 2.0]);
        assert_eq!(t.gamma[2], 2.0 - r);
        assert!((t.argument_weight(1, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ros3_defining_relations() {
        let t = RosenbrockTableau::ros3();
        let a = t.a(0, 0);
        assert!((a - 0.435866521508459).abs() < 1e-14);
        assert!((t.gamma(2, 1) - (0.5 - 3.0 * a)).abs() < 1e-15);
        assert!((t.gamma(1, 0) + (3.0 * a + t.gamma(2, 0) + t.gamma(2, 1))).abs() < 1e-15);
        assert!((t.gamma(1, 0) - 0.27263012766755157).abs() < 1e-14);
        assert!((t.gamma(2, 0) + 0.7726301276675516).abs() < 1e-14);
        // a is the root of 6a^3 - 18a^2 + 9a - 1 that lies in (1/3, 1/2)
        assert!((6.0 * a.powi(3) - 18.0 * a * a + 9.0 * a - 1.0).abs() < 1e-14);
    }

    #[test]
    fn imex3_rows_are_consistent() {
        let t = ImexTableau::imex3();
        for i in 0..4 {
            let se: f64 = (0..4).map(|j| t.a_exp(i, j)).sum();
            let si: f64 = (0..4).map(|j| t.a_imp(i, j)).sum();
            assert!((se - t.c_exp[i]).abs() < 1e-11, "explicit row {i}");
            assert!((si - t.c_imp[i]).abs() < 1e-11, "implicit row {i}");
        }
        let sb: f64 = t.b_imp.iter().sum();
        let se: f64 = t.embedded_imp.as_ref().unwrap().iter().sum();
        assert!((sb - 1.0).abs() < 1e-14 && (se - 1.0).abs() < 1e-11);
    }

    #[test]
    fn tr_bdf2_rows_sum_to_abscissae() {
        let t = ButcherTableau::tr_bdf2();
        for i in 0..3 {
            let s: f64 = (0..3).map(|j| t.a(i, j)).sum();
            assert!((s - t.c[i]).abs() < 1e-15);
        }
    }
}
