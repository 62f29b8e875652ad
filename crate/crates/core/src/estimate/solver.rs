//! Monotone accelerated proximal gradient (MFISTA) for `f(x) + lambda |x|_1`.

use nalgebra::DVector;

pub(crate) struct ProxOutcome {
    pub x: DVector<f64>,
    /// `f(x) + lambda |x|_1` after every accepted iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub lipschitz: f64,
}

pub(crate) fn soft_threshold(v: &DVector<f64>, t: f64) -> DVector<f64> {
    v.map(|x| x.signum() * (x.abs() - t).max(0.0))
}

fn l1(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// `smooth` returns the value and gradient. Stops when the inf-norm of the
/// gradient mapping falls below `tol * max(1, scale)`, where `scale` defaults
/// to `|grad f(x0)|_inf`, or when a step fails to lower the objective while
/// the gradient mapping is already within its rounding floor.
pub(crate) fn mfista<F>(
    x0: DVector<f64>,
    smooth: F,
    lambda: f64,
    max_iter: usize,
    tol: f64,
    lipschitz0: f64,
    scale: Option<f64>,
) -> ProxOutcome
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    let objective = |x: &DVector<f64>, fx: f64| fx + lambda * l1(x);
    let (f0, g0) = smooth(&x0);
    let scale = scale.unwrap_or_else(|| g0.amax()).max(1.0);
    let mut lip = lipschitz0.max(1e-12);
    let mut x = x0.clone();
    let mut fx_obj = objective(&x, f0);
    let mut y = x0;
    let mut t = 1.0f64;
    let mut cached: Option<(f64, DVector<f64>)> = Some((f0, g0));
    let mut trace = vec![fx_obj];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let (fy, gy) = match cached.take() {
            Some(v) => v,
            None => smooth(&y),
        };
        // backtracking on the quadratic upper bound
        let (z, fz) = loop {
            let z = soft_threshold(&(&y - &gy / lip), lambda / lip);
            let d = &z - &y;
            let (fz, _) = smooth(&z);
            let bound = fy + gy.dot(&d) + 0.5 * lip * d.norm_squared();
            if (fz.is_finite() && fz <= bound + 1e-13 * fy.abs()) || lip > 1e300 {
                break (z, fz);
            }
            lip *= 2.0;
        };
        let grad_map = (&z - &y).amax() * lip;
        let fz_obj = objective(&z, fz);
        let stalled = fz_obj >= fx_obj;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if fz_obj <= fx_obj {
            // gradient-based adaptive restart when momentum opposes descent
            let restart = (&y - &z).dot(&(&z - &x)) > 0.0;
            let x_prev = std::mem::replace(&mut x, z);
            fx_obj = fz_obj;
            if restart {
                y = x.clone();
                t = 1.0;
            } else {
                y = &x + (&x - &x_prev) * ((t - 1.0) / t_next);
                t = t_next;
            }
        } else {
            // rejected step: restart momentum from the incumbent
            y = x.clone();
            t = 1.0;
        }
        trace.push(fx_obj);
        // a decrease of grad_map^2 / 2L below the objective's rounding is invisible
        let floor = (2.0 * lip * 16.0 * f64::EPSILON * fx_obj.abs()).sqrt();
        if grad_map <= tol * scale || (stalled && grad_map <= floor) {
            converged = true;
            break;
        }
    }
    ProxOutcome { x, trace, iterations, converged, lipschitz: lip }
}
