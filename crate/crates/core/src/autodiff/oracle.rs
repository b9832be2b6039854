use super::dual::CrossDual;
use super::scalar::ScalarFn;
use crate::error::{Error, Result};

/// Mixed partial `∂^|vars| f / Π ∂x_v` at `point`, exact up to rounding.
pub fn cross_partial<F: ScalarFn + ?Sized>(f: &F, point: &[f64], vars: &[usize]) -> Result<f64> {
    if point.len() != f.input_dim() {
        return Err(Error::Shape(format!(
            "point has {} entries, function takes {}",
            point.len(),
            f.input_dim()
        )));
    }
    let seeded = CrossDual::seed(point, vars)?;
    Ok(f.eval(&seeded)?.top())
}

/// Nested central differences over `vars` with step `h`. A test oracle:
/// it needs `2^|vars|` evaluations and loses accuracy quickly beyond three
/// variables.
pub fn fd_oracle<F>(f: F, point: &[f64], vars: &[usize], h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut x = point.to_vec();
    nested(&f, &mut x, vars, h)
}

fn nested<F>(f: &F, x: &mut [f64], vars: &[usize], h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let Some((&i, rest)) = vars.split_first() else {
        return f(x);
    };
    let x0 = x[i];
    x[i] = x0 + h;
    let hi = nested(f, x, rest, h);
    x[i] = x0 - h;
    let lo = nested(f, x, rest, h);
    x[i] = x0;
    Ok((hi? - lo?) / (2.0 * h))
}
