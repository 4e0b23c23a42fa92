//! Ridge regression on +1/-1 labels via the normal equations.

use super::RerankError;

/// `Σ (wᵀfᵢ − yᵢ)² + λ‖w‖²`.
pub fn ridge_objective(rows: &[Vec<f64>], labels: &[f64], lambda: f64, w: &[f64]) -> f64 {
    let fit: f64 = rows
        .iter()
        .zip(labels)
        .map(|(f, y)| {
            let r = dot(f, w) - y;
            r * r
        })
        .sum();
    fit + lambda * dot(w, w)
}

/// Analytic gradient of [`ridge_objective`].
pub fn ridge_gradient(rows: &[Vec<f64>], labels: &[f64], lambda: f64, w: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = w.iter().map(|v| 2.0 * lambda * v).collect();
    for (f, y) in rows.iter().zip(labels) {
        let r = dot(f, w) - y;
        for (gi, fi) in g.iter_mut().zip(f) {
            *gi += 2.0 * r * fi;
        }
    }
    g
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn validate(rows: &[Vec<f64>], labels: &[f64], lambda: f64) -> Result<(), RerankError> {
    if rows.len() != labels.len() {
        return Err(RerankError::InvalidInput(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(RerankError::InvalidInput(format!("ridge lambda {lambda} must be >= 0")));
    }
    let d = rows.first().map(Vec::len).unwrap_or(0);
    if d == 0 {
        return Err(RerankError::DegenerateTraining("no training rows".into()));
    }
    if rows.iter().any(|r| r.len() != d || r.iter().any(|v| !v.is_finite())) {
        return Err(RerankError::InvalidInput("training rows must be finite and of equal length".into()));
    }
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(RerankError::InvalidInput("labels must be +1 or -1".into()));
    }
    let pos = labels.iter().filter(|&&y| y > 0.0).count();
    if pos == 0 || pos == labels.len() {
        return Err(RerankError::DegenerateTraining(format!(
            "all {} training rows have the same label",
            labels.len()
        )));
    }
    Ok(())
}

/// Ridge weights for rows labeled +1 / -1.
///
/// Solves `(FᵀF + λI) w = Fᵀy`. With `λ = 0` and a singular system (a feature
/// that is zero on every row, duplicated columns) the dependent coordinates
/// are fixed at 0.
pub fn learn_weights(rows: &[Vec<f64>], labels: &[f64], lambda: f64) -> Result<Vec<f64>, RerankError> {
    validate(rows, labels, lambda)?;
    solve_ridge(rows, labels, lambda)
}

/// [`learn_weights`] with an unpenalized intercept: feature columns and labels
/// are centered before solving. The intercept is not returned since adding a
/// constant to every score leaves a ranking unchanged.
pub fn learn_weights_centered(rows: &[Vec<f64>], labels: &[f64], lambda: f64) -> Result<Vec<f64>, RerankError> {
    validate(rows, labels, lambda)?;
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let y_mean = labels.iter().sum::<f64>() / n;
    let x: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let y: Vec<f64> = labels.iter().map(|v| v - y_mean).collect();
    solve_ridge(&x, &y, lambda)
}

/// Solves the ridge normal equations for arbitrary real targets; inputs are
/// assumed validated.
pub(crate) fn solve_ridge(rows: &[Vec<f64>], labels: &[f64], lambda: f64) -> Result<Vec<f64>, RerankError> {
    let d = rows[0].len();

    let mut a = vec![vec![0.0; d]; d];
    let mut b = vec![0.0; d];
    for (f, y) in rows.iter().zip(labels) {
        for i in 0..d {
            b[i] += f[i] * y;
            for j in 0..=i {
                a[i][j] += f[i] * f[j];
            }
        }
    }
    for i in 0..d {
        a[i][i] += lambda;
        for j in 0..i {
            a[j][i] = a[i][j];
        }
    }

    let chol = Cholesky::new(&a);
    let mut w = chol.solve(&b);
    // one step of iterative refinement
    let residual: Vec<f64> = (0..d).map(|i| b[i] - dot(&a[i], &w)).collect();
    let delta = chol.solve(&residual);
    for (wi, di) in w.iter_mut().zip(delta) {
        *wi += di;
    }
    Ok(w)
}

/// Cholesky factor of a symmetric positive semi-definite matrix. Pivots that
/// vanish (relative to the largest diagonal entry) are dropped and the
/// matching unknowns solved as 0.
struct Cholesky {
    l: Vec<Vec<f64>>,
    skipped: Vec<bool>,
}

impl Cholesky {
    fn new(a: &[Vec<f64>]) -> Self {
        let d = a.len();
        let scale = a.iter().enumerate().map(|(i, r)| r[i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let tol = scale * 1e-12;
        let mut l = vec![vec![0.0; d]; d];
        let mut skipped = vec![false; d];
        for j in 0..d {
            let s = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
            if s <= tol {
                skipped[j] = true;
                continue;
            }
            let pivot = s.sqrt();
            l[j][j] = pivot;
            for i in j + 1..d {
                let v = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                l[i][j] = v / pivot;
            }
        }
        Self { l, skipped }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = b.len();
        let mut z = vec![0.0; d];
        for j in 0..d {
            if !self.skipped[j] {
                let s = b[j] - (0..j).map(|k| self.l[j][k] * z[k]).sum::<f64>();
                z[j] = s / self.l[j][j];
            }
        }
        let mut w = vec![0.0; d];
        for j in (0..d).rev() {
            if !self.skipped[j] {
                let s = z[j] - (j + 1..d).map(|k| self.l[k][j] * w[k]).sum::<f64>();
                w[j] = s / self.l[j][j];
            }
        }
        w
    }
}
