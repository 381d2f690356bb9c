/// One step of the mean-reverting fundamental over `dt_ns` nanoseconds:
/// `r_bar + exp(-kappa dt) (r_prev - r_bar) + vol sqrt(dt) noise`.
pub fn ou_fundamental_step(
    r_prev: f64,
    r_bar: f64,
    kappa: f64,
    dt_ns: f64,
    vol: f64,
    noise: f64,
) -> f64 {
    debug_assert!(dt_ns >= 0.0);
    r_bar + (-kappa * dt_ns).exp() * (r_prev - r_bar) + vol * dt_ns.sqrt() * noise
}
