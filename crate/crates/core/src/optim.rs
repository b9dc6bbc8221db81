//! Derivative-free local minimization.

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Nelder–Mead simplex minimization with the standard coefficients (1, 2, ½, ½).
///
/// Non-finite objective values are treated as `+∞`. Stops when the spread of the simplex
/// values falls below `ftol·(1 + |best|)` or after `max_evals` evaluations.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: f64, max_evals: usize, ftol: f64) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let m = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(m + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    if m == 0 || max_evals <= 1 {
        return Minimum {
            x: x0.to_vec(),
            value: v0,
            evaluations: evals,
        };
    }
    for i in 0..m {
        if evals >= max_evals {
            break;
        }
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    if simplex.len() < m + 1 {
        return best_of(simplex, evals);
    }

    // each pass needs up to two evaluations before any shrink
    while evals + 2 <= max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[m].1;
        if worst.is_finite() && (worst - best).abs() <= ftol * (1.0 + best.abs()) {
            break;
        }
        let mut centroid = vec![0.0; m];
        for (x, _) in &simplex[..m] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / m as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[m].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let vr = eval(&xr, &mut evals);
        if vr < simplex[0].1 {
            let xe = along(2.0);
            let ve = eval(&xe, &mut evals);
            simplex[m] = if ve < vr { (xe, ve) } else { (xr, vr) };
            continue;
        }
        if vr < simplex[m - 1].1 {
            simplex[m] = (xr, vr);
            continue;
        }
        // outside contraction when the reflection improved on the worst vertex, inside otherwise
        let xc = along(if vr < simplex[m].1 { 0.5 } else { -0.5 });
        let vc = eval(&xc, &mut evals);
        if vc < simplex[m].1.min(vr) {
            simplex[m] = (xc, vc);
            continue;
        }
        // shrink towards the best vertex
        let x0 = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            if evals >= max_evals {
                break;
            }
            let x: Vec<f64> = x0.iter().zip(&vertex.0).map(|(b, xi)| b + 0.5 * (xi - b)).collect();
            let v = eval(&x, &mut evals);
            *vertex = (x, v);
        }
    }
    best_of(simplex, evals)
}

fn best_of(simplex: Vec<(Vec<f64>, f64)>, evaluations: usize) -> Minimum {
    let (x, value) = simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty simplex");
    Minimum { x, value, evaluations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let r = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            0.1,
            5000,
            1e-16,
        );
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
        assert!(r.evaluations <= 5000);
    }

    #[test]
    fn respects_budget_and_ignores_nan() {
        let mut calls = 0;
        let r = nelder_mead(
            |x| {
                calls += 1;
                if x[0] > 2.0 {
                    f64::NAN
                } else {
                    (x[0] - 1.5).powi(2) + x[1] * x[1] + x[2].abs()
                }
            },
            &[0.0, 0.3, 0.1],
            0.5,
            40,
            0.0,
        );
        assert_eq!(r.evaluations, calls);
        assert!(r.evaluations <= 40);
        assert!(r.value.is_finite());
    }
}
