//! Univariate component functions making up the additive transition map.

use std::fmt;
use std::sync::Arc;

use statrs::function::erf::erf;

/// Standard normal CDF.
pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// Standard normal density at zero, `1 / sqrt(2*pi)`.
const INV_SQRT_TAU: f64 = 0.398_942_280_401_432_7;

/// One additive component `h(x)` of a transition map, together with its
/// Lipschitz constant.
///
/// The five numbered variants form the crate's built-in benchmark suite:
///
/// | variant        | function                   | Lipschitz constant      |
/// |----------------|----------------------------|-------------------------|
/// | `F1Linear`     | `0.2 x`                    | `0.2`                   |
/// | `F2Sine`       | `-0.15 sin(1.5 x)`         | `0.225`                 |
/// | `F3GaussCdf`   | `-0.5 Phi((x - 0.5) / 1)`  | `0.5 / sqrt(2 pi)`      |
/// | `F4GaussBump`  | `0.2 x exp(-x^2 / 2)`      | `0.2`                   |
/// | `F5LogAbs`     | `0.15 log(|x| + 2)`        | `0.075`                 |
///
/// Each constant is the analytic supremum of `|h'|`: `F2` peaks where
/// `cos(1.5x) = ±1`, `F3` where the Gaussian density argument is zero
/// (`x = 0.5`), `F4` at `x = 0` where `(1 - x^2) e^{-x^2/2} = 1`, and `F5` at
/// `|x| -> 0` where `0.15 / (|x| + 2) = 0.075`.
#[derive(Clone)]
pub enum ComponentFunction {
    F1Linear,
    F2Sine,
    F3GaussCdf,
    F4GaussBump,
    F5LogAbs,
    /// Identically zero (absent edge).
    Zero,
    /// `a * x` for an arbitrary coefficient `a`.
    LinearCoef(f64),
    /// User-supplied function. The Lipschitz constant cannot be derived from a
    /// closure, so it must be declared; `None` marks it undeclared, which any
    /// stability analysis will reject.
    Custom {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        lipschitz: Option<f64>,
    },
}

impl ComponentFunction {
    /// Builds a custom component with a declared Lipschitz constant.
    pub fn custom<F>(f: F, lipschitz: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ComponentFunction::Custom {
            f: Arc::new(f),
            lipschitz: Some(lipschitz),
        }
    }

    /// Builds a custom component without declaring a Lipschitz constant.
    /// Useful for evaluation-only work; rejected by stability checks.
    pub fn custom_undeclared<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ComponentFunction::Custom {
            f: Arc::new(f),
            lipschitz: None,
        }
    }

    /// Evaluates the component at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ComponentFunction::F1Linear => 0.2 * x,
            ComponentFunction::F2Sine => -0.15 * (1.5 * x).sin(),
            ComponentFunction::F3GaussCdf => -0.5 * normal_cdf(x - 0.5),
            ComponentFunction::F4GaussBump => 0.2 * x * (-0.5 * x * x).exp(),
            ComponentFunction::F5LogAbs => 0.15 * (x.abs() + 2.0).ln(),
            ComponentFunction::Zero => 0.0,
            ComponentFunction::LinearCoef(a) => a * x,
            ComponentFunction::Custom { f, .. } => f(x),
        }
    }

    /// The declared or analytic Lipschitz constant; `None` only for an
    /// undeclared custom function.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match self {
            ComponentFunction::F1Linear => Some(0.2),
            ComponentFunction::F2Sine => Some(0.225),
            ComponentFunction::F3GaussCdf => Some(0.5 * INV_SQRT_TAU),
            ComponentFunction::F4GaussBump => Some(0.2),
            ComponentFunction::F5LogAbs => Some(0.075),
            ComponentFunction::Zero => Some(0.0),
            ComponentFunction::LinearCoef(a) => Some(a.abs()),
            ComponentFunction::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    /// The benchmark suite `[F1, F2, F3, F4, F5]` in its canonical order.
    pub fn benchmark_suite() -> [ComponentFunction; 5] {
        [
            ComponentFunction::F1Linear,
            ComponentFunction::F2Sine,
            ComponentFunction::F3GaussCdf,
            ComponentFunction::F4GaussBump,
            ComponentFunction::F5LogAbs,
        ]
    }
}

impl fmt::Debug for ComponentFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComponentFunction::F1Linear => write!(f, "F1Linear"),
            ComponentFunction::F2Sine => write!(f, "F2Sine"),
            ComponentFunction::F3GaussCdf => write!(f, "F3GaussCdf"),
            ComponentFunction::F4GaussBump => write!(f, "F4GaussBump"),
            ComponentFunction::F5LogAbs => write!(f, "F5LogAbs"),
            ComponentFunction::Zero => write!(f, "Zero"),
            ComponentFunction::LinearCoef(a) => write!(f, "LinearCoef({a})"),
            ComponentFunction::Custom { lipschitz, .. } => {
                write!(f, "Custom {{ lipschitz: {lipschitz:?} }}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_values_match_their_formulas() {
        let x = 0.7;
        assert!((ComponentFunction::F1Linear.eval(x) - 0.14).abs() < 1e-15);
        assert!((ComponentFunction::F2Sine.eval(x) + 0.15 * (1.05f64).sin()).abs() < 1e-15);
        // Phi(0.2) = 0.57925970943909...
        assert!((ComponentFunction::F3GaussCdf.eval(x) + 0.5 * 0.579_259_709_439_103).abs() < 1e-9);
        assert!(
            (ComponentFunction::F4GaussBump.eval(x) - 0.2 * 0.7 * (-0.245f64).exp()).abs() < 1e-15
        );
        assert!((ComponentFunction::F5LogAbs.eval(x) - 0.15 * 2.7f64.ln()).abs() < 1e-15);
        assert_eq!(ComponentFunction::Zero.eval(123.0), 0.0);
        assert_eq!(ComponentFunction::LinearCoef(0.5).eval(2.0), 1.0);
    }

    #[test]
    fn lipschitz_constants_bound_grid_maximized_slopes() {
        // Dense-grid maximization of |f'| over [-10, 10] must stay below the
        // analytic constant (up to discretization slack) and come close to it.
        for f in ComponentFunction::benchmark_suite() {
            let lip = f.lipschitz_constant().unwrap();
            let mut max_slope: f64 = 0.0;
            let h = 1e-5;
            let mut x = -10.0;
            while x <= 10.0 {
                let s = ((f.eval(x + h) - f.eval(x - h)) / (2.0 * h)).abs();
                max_slope = max_slope.max(s);
                x += 0.001;
            }
            assert!(max_slope <= lip + 1e-6, "{f:?}: slope {max_slope} > {lip}");
            assert!(max_slope >= 0.95 * lip, "{f:?}: slope {max_slope} << {lip}");
        }
    }

    #[test]
    fn benchmark_lipschitz_row_sum_is_the_documented_margin() {
        let total: f64 = ComponentFunction::benchmark_suite()
            .iter()
            .map(|f| f.lipschitz_constant().unwrap())
            .sum();
        assert!((total - 0.899_471_140_200_716_4).abs() < 1e-12);
    }

    #[test]
    fn custom_components_carry_their_declaration() {
        let c = ComponentFunction::custom(|x| 0.3 * x.tanh(), 0.3);
        assert_eq!(c.lipschitz_constant(), Some(0.3));
        assert!((c.eval(1.0) - 0.3 * 1.0f64.tanh()).abs() < 1e-15);
        let u = ComponentFunction::custom_undeclared(|x| x.sin());
        assert_eq!(u.lipschitz_constant(), None);
    }
}
