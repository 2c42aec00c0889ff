/// Composite trapezoid rule on `nodes` equally spaced points of `[a, b]`.
pub(crate) fn trapezoid<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, nodes: usize) -> f64 {
    debug_assert!(nodes >= 2);
    if b <= a {
        return 0.0;
    }
    let intervals = (nodes - 1) as f64;
    let h = (b - a) / intervals;
    let mut sum = 0.5 * (f(a) + f(b));
    for k in 1..nodes - 1 {
        sum += f(a + (b - a) * (k as f64) / intervals);
    }
    sum * h
}
