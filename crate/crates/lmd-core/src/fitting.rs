//! Lane model fitting.
//!
//! Fitting every lane pixel would be wasteful, so the image is split into
//! horizontal bands and each band contributes one candidate point: the mean
//! position of the group's pixels inside it, weighted by how many there were.
//! A cubic `col = a*row^3 + b*row^2 + c*row + d` is then fitted to the
//! candidates by weighted least squares (rows are the independent variable —
//! a vertical lane is not a function of the column). Rows are rescaled to
//! [-1, 1] before solving the normal equations and the coefficients mapped
//! back, which keeps the 4x4 system well conditioned at image scale.

use crate::error::{Error, Result};

/// Mean position of one group's pixels inside one horizontal band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidatePoint {
    pub row: f64,
    pub col: f64,
    /// Number of pixels behind this candidate; its least-squares weight.
    pub weight: f64,
}

/// Cubic lane model `col = a*row^3 + b*row^2 + c*row + d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Actually fitted degree (falls back below 3 for sparse groups).
    pub degree: usize,
    /// Row range of the candidates; evaluation outside it is extrapolation.
    pub domain: (f64, f64),
    /// Weighted sum of squared column residuals at the candidates.
    pub residual: f64,
}

/// A sample of the fitted model at one row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanePoint {
    pub row: f64,
    pub col: f64,
    pub extrapolated: bool,
}

/// Splits the image rows into `num_blocks` near-equal bands and emits the
/// mean (row, col) of `group_id`'s pixels per non-empty band.
pub fn block_candidates(
    group_labels: &[u32],
    h: usize,
    w: usize,
    group_id: u32,
    num_blocks: usize,
) -> Result<Vec<CandidatePoint>> {
    if num_blocks == 0 {
        return Err(Error::InvalidArgument("num_blocks must be >= 1".into()));
    }
    if group_labels.len() != h * w {
        return Err(Error::shape(
            "block_candidates",
            format!("{} labels for {h}x{w}", h * w),
            format!("{}", group_labels.len()),
        ));
    }
    let mut candidates = Vec::new();
    for k in 0..num_blocks {
        let y0 = k * h / num_blocks;
        let y1 = (k + 1) * h / num_blocks;
        let (mut count, mut sum_r, mut sum_c) = (0u64, 0.0f64, 0.0f64);
        for y in y0..y1 {
            for x in 0..w {
                if group_labels[y * w + x] == group_id {
                    count += 1;
                    sum_r += y as f64;
                    sum_c += x as f64;
                }
            }
        }
        if count > 0 {
            candidates.push(CandidatePoint {
                row: sum_r / count as f64,
                col: sum_c / count as f64,
                weight: count as f64,
            });
        }
    }
    Ok(candidates)
}

// Solves the (deg+1)-sized weighted normal equations on a pre-scaled basis.
// Returns None when the system is numerically singular.
fn solve_normal(points: &[(f64, f64, f64)], degree: usize) -> Option<Vec<f64>> {
    let m = degree + 1;
    let mut gram = vec![vec![0.0f64; m]; m];
    let mut rhs = vec![0.0f64; m];
    for &(t, col, weight) in points {
        let mut powers = [1.0f64; 7];
        for k in 1..2 * m - 1 {
            powers[k] = powers[k - 1] * t;
        }
        for j in 0..m {
            for k in 0..m {
                gram[j][k] += weight * powers[j + k];
            }
            rhs[j] += weight * col * powers[j];
        }
    }
    let scale = gram.iter().flat_map(|r| r.iter()).fold(0.0f64, |acc, v| acc.max(v.abs()));
    for col_idx in 0..m {
        let mut pivot = col_idx;
        for r in col_idx + 1..m {
            if gram[r][col_idx].abs() > gram[pivot][col_idx].abs() {
                pivot = r;
            }
        }
        if gram[pivot][col_idx].abs() <= 1e-12 * scale {
            return None;
        }
        gram.swap(col_idx, pivot);
        rhs.swap(col_idx, pivot);
        let pivot_row = gram[col_idx].clone();
        for r in col_idx + 1..m {
            let f = gram[r][col_idx] / pivot_row[col_idx];
            for (dst, src) in gram[r][col_idx..m].iter_mut().zip(&pivot_row[col_idx..m]) {
                *dst -= f * src;
            }
            rhs[r] -= f * rhs[col_idx];
        }
    }
    let mut sol = vec![0.0f64; m];
    for r in (0..m).rev() {
        let mut acc = rhs[r];
        for k in r + 1..m {
            acc -= gram[r][k] * sol[k];
        }
        sol[r] = acc / gram[r][r];
    }
    Some(sol)
}

/// Weighted least-squares fit of `col` as a polynomial in `row`, degree
/// `min(3, candidates - 1)`, falling back further if the system degenerates
/// (for example duplicate rows).
pub fn fit_cubic(candidates: &[CandidatePoint]) -> Result<LaneModel> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("fit needs at least one candidate".into()));
    }
    // Sort a working copy so the result is independent of candidate order.
    let mut pts: Vec<CandidatePoint> = candidates.to_vec();
    pts.sort_by(|a, b| {
        (a.row, a.col, a.weight)
            .partial_cmp(&(b.row, b.col, b.weight))
            .expect("candidate coordinates are finite")
    });

    let (rmin, rmax) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.row), hi.max(p.row)));
    let spread = rmax - rmin;

    // Affine map of rows onto [-1, 1] for conditioning.
    let (alpha, gamma) =
        if spread > 0.0 { (2.0 / spread, -(rmin + rmax) / spread) } else { (0.0, 0.0) };
    let scaled: Vec<(f64, f64, f64)> =
        pts.iter().map(|p| (alpha * p.row + gamma, p.col, p.weight)).collect();

    let mut degree = (pts.len() - 1).min(3);
    if spread == 0.0 {
        degree = 0;
    }
    let solution = loop {
        match solve_normal(&scaled, degree) {
            Some(sol) => break sol,
            None if degree > 0 => degree -= 1,
            None => {
                break vec![
                    pts.iter().map(|p| p.weight * p.col).sum::<f64>()
                        / pts.iter().map(|p| p.weight).sum::<f64>(),
                ]
            }
        }
    };

    // Expand sum beta_j (alpha*row + gamma)^j into row powers.
    let mut coeffs = [0.0f64; 4];
    let mut basis = [1.0f64, 0.0, 0.0, 0.0]; // (alpha*row + gamma)^j, by row power
    for (j, beta) in solution.iter().enumerate() {
        for k in 0..4 {
            coeffs[k] += beta * basis[k];
        }
        if j + 1 < solution.len() {
            let mut next = [0.0f64; 4];
            for k in 0..4 {
                next[k] += basis[k] * gamma;
                if k + 1 < 4 {
                    next[k + 1] += basis[k] * alpha;
                }
            }
            basis = next;
        }
    }

    let model = LaneModel {
        a: coeffs[3],
        b: coeffs[2],
        c: coeffs[1],
        d: coeffs[0],
        degree,
        domain: (rmin, rmax),
        residual: 0.0,
    };
    let residual = pts
        .iter()
        .map(|p| {
            let e = p.col - eval(&model, p.row);
            p.weight * e * e
        })
        .sum();
    Ok(LaneModel { residual, ..model })
}

fn eval(m: &LaneModel, row: f64) -> f64 {
    ((m.a * row + m.b) * row + m.c) * row + m.d
}

/// Evaluates the model at the given rows, flagging extrapolation outside the
/// fitted domain.
pub fn evaluate_lane(m: &LaneModel, rows: &[f64]) -> Vec<LanePoint> {
    rows.iter()
        .map(|&row| LanePoint {
            row,
            col: eval(m, row),
            extrapolated: row < m.domain.0 || row > m.domain.1,
        })
        .collect()
}
