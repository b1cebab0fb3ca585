//! One-vs-rest linear models trained by full-batch gradient descent.
//!
//! All K binary problems share the design matrix, so each iteration does one
//! `Xᵀ R` and one `X D` product for every class at once. Each class then
//! runs its own backtracking (Armijo) line search, starting from the
//! Barzilai–Borwein step of its previous update.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::spectrum::Spectrum;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

pub(crate) fn feature_matrix(spectra: &[Spectrum]) -> Result<Array2<f64>> {
    let d = spectra.first().map(Spectrum::len).ok_or(Error::EmptyInput)?;
    let mut x = Array2::zeros((spectra.len(), d));
    for (mut row, s) in x.outer_iter_mut().zip(spectra) {
        crate::error::check_len(d, s.len())?;
        row.assign(&ndarray::ArrayView1::from(s.counts()));
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Loss {
    /// `log(1 + exp(−m))`
    Logistic,
    /// `max(0, 1 − m)²`
    SquaredHinge,
}

impl Loss {
    fn value(self, m: f64) -> f64 {
        match self {
            Loss::Logistic => softplus(-m),
            Loss::SquaredHinge => (1.0 - m).max(0.0).powi(2),
        }
    }

    fn derivative(self, m: f64) -> f64 {
        match self {
            Loss::Logistic => -sigmoid(-m),
            Loss::SquaredHinge => -2.0 * (1.0 - m).max(0.0),
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Stop {
    /// Euclidean norm of the full gradient (weights and intercept).
    GradNorm(f64),
    /// Absolute change of the objective between iterations.
    ObjectiveChange(f64),
}

/// Per class: `data_scale · Σ_i loss(y_i z_i) + ½ reg_w ‖w‖² + ½ reg_b b²`
/// with `z = X w + b`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OvrProblem {
    pub loss: Loss,
    pub data_scale: f64,
    pub reg_w: f64,
    pub reg_b: f64,
    pub fit_intercept: bool,
    pub stop: Stop,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct OvrSolution {
    /// d × K
    pub weights: Array2<f64>,
    pub intercepts: Array1<f64>,
    pub iterations: Vec<usize>,
    pub grad_norms: Vec<f64>,
    pub objectives: Vec<f64>,
}

struct ClassState {
    active: bool,
    iterations: usize,
    objective: f64,
    prev_objective: Option<f64>,
    grad_sq: f64,
    step: f64,
    /// Gradient from the previous iteration (weights then intercept).
    prev_grad: Option<(Array1<f64>, f64)>,
}

/// Solves the K one-vs-rest problems for `labels` in `0..k`.
pub(crate) fn solve_ovr(x: &Array2<f64>, labels: &[usize], k: usize, p: &OvrProblem) -> Result<OvrSolution> {
    let (n, d) = x.dim();
    crate::error::check_len(n, labels.len())?;
    // With an unpenalized intercept the features can be centered without
    // changing the optimum, which decouples the intercept's curvature.
    let center = p.fit_intercept && p.reg_b == 0.0;
    let mean = if center {
        x.mean_axis(Axis(0)).expect("n > 0")
    } else {
        Array1::zeros(d)
    };
    let y = Array2::from_shape_fn((n, k), |(i, c)| if labels[i] == c { 1.0 } else { -1.0 });

    let mut w = Array2::<f64>::zeros((d, k));
    let mut b = Array1::<f64>::zeros(k);
    let mut z = Array2::<f64>::zeros((n, k));
    let mut states: Vec<ClassState> = (0..k)
        .map(|_| ClassState {
            active: true,
            iterations: 0,
            objective: f64::NAN,
            prev_objective: None,
            grad_sq: f64::NAN,
            step: 1.0,
            prev_grad: None,
        })
        .collect();

    let data_term = |zc: ndarray::ArrayView1<f64>, yc: ndarray::ArrayView1<f64>| -> f64 {
        p.data_scale * zc.iter().zip(yc).map(|(z, y)| p.loss.value(y * z)).sum::<f64>()
    };

    for it in 0..=p.max_iter {
        // Residuals dF/dz.
        let r = Array2::from_shape_fn((n, k), |(i, c)| {
            p.data_scale * y[[i, c]] * p.loss.derivative(y[[i, c]] * z[[i, c]])
        });
        let r_sum = r.sum_axis(Axis(0));
        // Gradient in the centered parametrization.
        let mut gw = x.t().dot(&r);
        if center {
            for c in 0..k {
                gw.column_mut(c).scaled_add(-r_sum[c], &mean);
            }
        }
        gw.scaled_add(p.reg_w, &w);
        let gb: Array1<f64> = if p.fit_intercept {
            &r_sum + &(&b * p.reg_b)
        } else {
            Array1::zeros(k)
        };

        for c in 0..k {
            let st = &mut states[c];
            if !st.active {
                continue;
            }
            let wc = w.column(c);
            let f = data_term(z.column(c), y.column(c))
                + 0.5 * p.reg_w * wc.dot(&wc)
                + 0.5 * p.reg_b * b[c] * b[c];
            if !f.is_finite() {
                return Err(Error::NonFinite { step: it });
            }
            st.prev_objective = if it == 0 { None } else { Some(st.objective) };
            st.objective = f;
            // Report the gradient of the uncentered problem: ∂/∂w picks up
            // mean · ∂/∂b.
            let g_orig = if center {
                let mut g = gw.column(c).to_owned();
                g.scaled_add(gb[c], &mean);
                g
            } else {
                gw.column(c).to_owned()
            };
            st.grad_sq = g_orig.dot(&g_orig) + gb[c] * gb[c];
            let converged = match p.stop {
                Stop::GradNorm(tol) => st.grad_sq.sqrt() < tol,
                Stop::ObjectiveChange(tol) => st
                    .prev_objective
                    .is_some_and(|prev| (prev - f).abs() < tol),
            };
            if converged || it == p.max_iter || st.grad_sq == 0.0 {
                st.active = false;
            }
        }
        if states.iter().all(|s| !s.active) {
            break;
        }

        // Steepest descent directions; inactive classes get zero.
        let mut dw = -&gw;
        let mut db = -&gb;
        for c in 0..k {
            if !states[c].active {
                dw.column_mut(c).fill(0.0);
                db[c] = 0.0;
            }
        }
        let mut xd = x.dot(&dw);
        for c in 0..k {
            let shift = db[c] - if center { mean.dot(&dw.column(c)) } else { 0.0 };
            xd.column_mut(c).mapv_inplace(|v| v + shift);
        }

        for c in 0..k {
            let st = &mut states[c];
            if !st.active {
                continue;
            }
            let gc = gw.column(c).to_owned();
            let g_sq = gc.dot(&gc) + gb[c] * gb[c];
            // Barzilai–Borwein: t = sᵀs / sᵀΔg with s = −t_prev g_prev.
            if let Some((pg, pgb)) = &st.prev_grad {
                let dg_dot_pg = (gc.dot(pg) + gb[c] * pgb) - (pg.dot(pg) + pgb * pgb);
                let pg_sq = pg.dot(pg) + pgb * pgb;
                let s_dot_dg = -st.step * dg_dot_pg;
                if s_dot_dg > 0.0 {
                    st.step = st.step * st.step * pg_sq / s_dot_dg;
                } else {
                    st.step *= 2.0;
                }
            }
            let wc = w.column(c);
            let dwc = dw.column(c);
            let (ww, wd, dd) = (wc.dot(&wc), wc.dot(&dwc), dwc.dot(&dwc));
            let zc = z.column(c);
            let xdc = xd.column(c);
            let yc = y.column(c);
            let phi = |t: f64| -> f64 {
                let data = p.data_scale
                    * zc.iter()
                        .zip(xdc)
                        .zip(yc)
                        .map(|((z, dz), y)| p.loss.value(y * (z + t * dz)))
                        .sum::<f64>();
                let bt = b[c] + t * db[c];
                data + 0.5 * p.reg_w * (ww + 2.0 * t * wd + t * t * dd) + 0.5 * p.reg_b * bt * bt
            };
            let mut t = st.step;
            let mut accepted = false;
            for _ in 0..MAX_BACKTRACKS {
                let ft = phi(t);
                if ft.is_finite() && ft <= st.objective - ARMIJO * t * g_sq {
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                // No descent possible at machine precision.
                st.active = false;
                continue;
            }
            st.step = t;
            st.prev_grad = Some((gc, gb[c]));
            st.iterations += 1;
            w.column_mut(c).scaled_add(t, &dw.column(c));
            b[c] += t * db[c];
            z.column_mut(c).scaled_add(t, &xd.column(c));
        }
    }

    if center {
        // b_orig = b − w · mean
        for c in 0..k {
            b[c] -= w.column(c).dot(&mean);
        }
    }
    Ok(OvrSolution {
        weights: w,
        intercepts: b,
        iterations: states.iter().map(|s| s.iterations).collect(),
        grad_norms: states.iter().map(|s| s.grad_sq.sqrt()).collect(),
        objectives: states.iter().map(|s| s.objective).collect(),
    })
}

/// Decision values `X W + b` for a batch of spectra.
pub(crate) fn decision_values(
    spectra: &[Spectrum],
    weights: &Array2<f64>,
    intercepts: &Array1<f64>,
) -> Result<Vec<Vec<f64>>> {
    for s in spectra {
        crate::error::check_len(weights.nrows(), s.len())?;
    }
    let mut out = Vec::with_capacity(spectra.len());
    for chunk in spectra.chunks(512) {
        let x = feature_matrix(chunk)?;
        let scores = x.dot(weights) + intercepts;
        out.extend(scores.outer_iter().map(|r| r.to_vec()));
    }
    Ok(out)
}
