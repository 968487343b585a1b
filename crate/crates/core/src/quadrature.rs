/// Composite Simpson rule on `[a, b]` with `intervals` subintervals
/// (rounded up to even).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = (intervals.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let v = f(a + i as f64 * h);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even)
}

/// Simpson with the subinterval count chosen so the step does not exceed
/// `max_step`.
pub fn simpson_step(f: impl Fn(f64) -> f64, a: f64, b: f64, max_step: f64) -> f64 {
    let n = ((b - a) / max_step).ceil().max(2.0) as usize;
    simpson(f, a, b, n)
}

/// Three-point Gauss-Legendre on `[a, b]`; exact for polynomials up to degree 5.
pub fn gauss_legendre3(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: f64 = 0.774_596_669_241_483_4; // sqrt(3/5)
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    half * (5.0 / 9.0 * (f(mid - half * X) + f(mid + half * X)) + 8.0 / 9.0 * f(mid))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_is_exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 3);
        assert!((v - (15.0 / 4.0 - 3.0 + 3.0)).abs() < 1e-13, "{v}");
    }

    #[test]
    fn gauss_legendre_is_exact_for_quintics() {
        let v = gauss_legendre3(|x| x.powi(5) + x.powi(4), 0.0, 1.0);
        assert!((v - (1.0 / 6.0 + 1.0 / 5.0)).abs() < 1e-14);
    }
}
