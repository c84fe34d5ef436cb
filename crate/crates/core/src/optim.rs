//! Box-constrained local minimizers: a projected Nelder–Mead simplex and a
//! projected quasi-Newton (BFGS with an active-set treatment of the bounds and
//! finite-difference gradients).

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_evals: usize,
    pub max_iters: usize,
    pub ftol: f64,
    pub gtol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            max_iters: 200,
            ftol: 1e-10,
            gtol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub iters: usize,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// Non-finite objective values are treated as `+inf`.
fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Nelder–Mead with trial points projected onto the box.
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &OptimOptions,
) -> OptimResult {
    let d = x0.len();
    let eval = |x: &[f64], n: &mut usize| {
        *n += 1;
        sanitize(f(x))
    };
    let mut evals = 0;
    let mut start = x0.to_vec();
    project(&mut start, lo, hi);

    let mut simplex: Vec<Vec<f64>> = vec![start.clone()];
    for i in 0..d {
        let mut v = start.clone();
        let step = 0.1 * (hi[i] - lo[i]);
        v[i] = if v[i] + step <= hi[i] { v[i] + step } else { v[i] - step };
        simplex.push(v);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

    let mut iters = 0;
    while evals < opts.max_evals {
        iters += 1;
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        fv = order.iter().map(|&i| fv[i]).collect();

        let spread = (fv[d] - fv[0]).abs();
        if spread <= opts.ftol * (1.0 + fv[0].abs()) && fv[0].is_finite() {
            break;
        }

        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|v| v[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[d])
                .map(|(c, w)| c + t * (w - c))
                .collect();
            project(&mut p, lo, hi);
            p
        };

        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < fv[0] {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[d] = xe;
                fv[d] = fe;
            } else {
                simplex[d] = xr;
                fv[d] = fr;
            }
        } else if fr < fv[d - 1] {
            simplex[d] = xr;
            fv[d] = fr;
        } else {
            let (xc, fc) = if fr < fv[d] {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < fv[d].min(fr) {
                simplex[d] = xc;
                fv[d] = fc;
            } else {
                // shrink toward the best vertex
                for i in 1..=d {
                    let v: Vec<f64> = simplex[0]
                        .iter()
                        .zip(&simplex[i])
                        .map(|(b, x)| b + 0.5 * (x - b))
                        .collect();
                    fv[i] = eval(&v, &mut evals);
                    simplex[i] = v;
                }
            }
        }
    }
    let best = (0..=d).min_by(|&a, &b| fv[a].total_cmp(&fv[b])).unwrap();
    OptimResult {
        x: simplex[best].clone(),
        fx: fv[best],
        evals,
        iters,
    }
}

/// Central finite differences, one-sided at an active bound.
fn fd_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64], fx: f64, lo: &[f64], hi: &[f64], evals: &mut usize) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * x[i].abs().max(1.0);
        let up = (x[i] + h).min(hi[i]);
        let dn = (x[i] - h).max(lo[i]);
        xp[i] = up;
        let fu = if up > x[i] {
            *evals += 1;
            sanitize(f(&xp))
        } else {
            fx
        };
        xp[i] = dn;
        let fd = if dn < x[i] {
            *evals += 1;
            sanitize(f(&xp))
        } else {
            fx
        };
        xp[i] = x[i];
        let width = up - dn;
        g[i] = if width > 0.0 && fu.is_finite() && fd.is_finite() {
            (fu - fd) / width
        } else {
            0.0
        };
    }
    g
}

/// Projected BFGS: bounded quasi-Newton minimization with numerical
/// gradients. Variables sitting on a bound with the gradient pointing outward
/// are frozen for the step.
pub fn bounded_quasi_newton(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &OptimOptions,
) -> OptimResult {
    let d = x0.len();
    let mut evals = 0;
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut fx = sanitize(f(&x));
    evals += 1;
    let mut g = fd_gradient(&f, &x, fx, lo, hi, &mut evals);
    let mut hinv = identity(d);
    let mut iters = 0;

    while iters < opts.max_iters && evals < opts.max_evals {
        iters += 1;
        let active: Vec<bool> = (0..d)
            .map(|i| (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0))
            .collect();
        let pg_norm = (0..d)
            .filter(|&i| !active[i])
            .map(|i| g[i].abs())
            .fold(0.0, f64::max);
        if pg_norm < opts.gtol {
            break;
        }

        let mut dir = vec![0.0; d];
        for i in (0..d).filter(|&i| !active[i]) {
            dir[i] = -(0..d).filter(|&j| !active[j]).map(|j| hinv[i][j] * g[j]).sum::<f64>();
        }
        let mut slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            hinv = identity(d);
            for i in 0..d {
                dir[i] = if active[i] { 0.0 } else { -g[i] };
            }
            slope = -dir.iter().map(|v| v * v).sum::<f64>();
        }
        if slope == 0.0 {
            break;
        }

        // backtracking Armijo search along the projected path
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            project(&mut xn, lo, hi);
            let decrease: f64 = g.iter().zip(xn.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
            let fxn = sanitize(f(&xn));
            evals += 1;
            if fxn.is_finite() && fxn <= fx + 1e-4 * decrease.min(0.0) && xn != x {
                accepted = Some((xn, fxn));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fxn)) = accepted else { break };
        let gn = fd_gradient(&f, &xn, fxn, lo, hi, &mut evals);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            bfgs_update(&mut hinv, &s, &y, sy);
        }
        let improvement = fx - fxn;
        x = xn;
        g = gn;
        fx = fxn;
        if improvement.abs() <= opts.ftol * (1.0 + fx.abs()) {
            break;
        }
    }
    OptimResult { x, fx, evals, iters }
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let d = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..d).map(|i| (0..d).map(|j| h[i][j] * y[j]).sum()).collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..d {
        for j in 0..d {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Runs `local` from every start and keeps the lowest value. Ties go to the
/// earliest start.
pub fn multistart<F>(starts: &[Vec<f64>], local: F) -> OptimResult
where
    F: Fn(&[f64]) -> OptimResult,
{
    starts
        .iter()
        .map(|s| local(s))
        .fold(None::<OptimResult>, |best, r| match best {
            Some(b) if b.fx <= r.fx => Some(b),
            _ => Some(r),
        })
        .expect("at least one start")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let opts = OptimOptions {
            max_evals: 5000,
            ftol: 1e-14,
            ..Default::default()
        };
        let r = nelder_mead(rosenbrock, &[-1.2, 1.0], &[-2.0, -2.0], &[2.0, 2.0], &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-3 && (r.x[1] - 1.0).abs() < 1e-3, "{:?}", r.x);
    }

    #[test]
    fn quasi_newton_unconstrained_quadratic() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + 3.0 * (x[1] + 0.7).powi(2) + x[0] * x[1];
        let r = bounded_quasi_newton(f, &[2.0, 2.0], &[-5.0, -5.0], &[5.0, 5.0], &OptimOptions::default());
        // stationary point from the 2x2 normal equations (Cramer's rule)
        let det = 2.0 * 6.0 - 1.0;
        let x0 = (0.6 * 6.0 - (-4.2)) / det;
        let x1 = (2.0 * -4.2 - 0.6) / det;
        assert!((r.x[0] - x0).abs() < 1e-4 && (r.x[1] - x1).abs() < 1e-4, "{:?} vs {x0},{x1}", r.x);
    }

    #[test]
    fn quasi_newton_respects_active_bounds() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 3.0).powi(2);
        let r = bounded_quasi_newton(f, &[0.0, 0.0], &[-1.0, -1.0], &[1.0, 1.0], &OptimOptions::default());
        assert!((r.x[0] - 1.0).abs() < 1e-12 && (r.x[1] + 1.0).abs() < 1e-12, "{:?}", r.x);
    }

    #[test]
    fn multistart_keeps_global_basin() {
        // double well with the deeper minimum near x = -1
        let f = |x: &[f64]| (x[0] * x[0] - 1.0).powi(2) + 0.3 * x[0];
        let local = |s: &[f64]| bounded_quasi_newton(f, s, &[-3.0], &[3.0], &OptimOptions::default());
        let r = multistart(&[vec![2.0], vec![-2.0]], local);
        assert!(r.x[0] < 0.0);
    }
}
