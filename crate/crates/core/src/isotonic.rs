//! Euclidean projection onto nonincreasing, nonnegative (optionally capped)
//! vectors via pool-adjacent-violators.

/// Projects `row` onto `{v : v_1 >= v_2 >= ... >= v_L >= 0}`.
pub fn project_monotone_nonneg(row: &[f64]) -> Vec<f64> {
    let mut out = row.to_vec();
    project_in_place(&mut out, None, None);
    out
}

/// Projects `row` onto `{v : cap >= v_1 >= ... >= v_L >= 0}`.
pub fn project_monotone_capped(row: &[f64], cap: f64) -> Vec<f64> {
    let mut out = row.to_vec();
    project_in_place(&mut out, None, Some(cap));
    out
}

/// Projection in the norm `sum_r weights[r] * v_r^2` (all weights must be
/// positive), onto the same set as [`project_monotone_capped`].
pub fn project_weighted(row: &[f64], weights: &[f64], cap: Option<f64>) -> Vec<f64> {
    let mut out = row.to_vec();
    project_in_place(&mut out, Some(weights), cap);
    out
}

/// In-place projection, unweighted when `weights` is `None`. With a cap,
/// clipping the antitonic fit to `[0, cap]` is the projection onto the
/// box-constrained cone, and clipping preserves the ordering so no second
/// pooling pass is needed.
pub(crate) fn project_in_place(row: &mut [f64], weights: Option<&[f64]>, cap: Option<f64>) {
    antitonic_pava(row, weights);
    let hi = cap.unwrap_or(f64::INFINITY);
    for v in row.iter_mut() {
        *v = v.clamp(0.0, hi);
    }
}

/// Weighted least-squares nonincreasing fit, overwriting `values`.
fn antitonic_pava(values: &mut [f64], weights: Option<&[f64]>) {
    // (weighted sum, total weight, count) per pooled block
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (r, &v) in values.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[r]);
        let mut sum = w * v;
        let mut weight = w;
        let mut count = 1usize;
        while let Some(&(psum, pweight, pcount)) = blocks.last() {
            // previous block mean must be >= this block mean
            if psum * weight >= sum * pweight {
                break;
            }
            sum += psum;
            weight += pweight;
            count += pcount;
            blocks.pop();
        }
        blocks.push((sum, weight, count));
    }
    let mut pos = 0;
    for (sum, weight, count) in blocks {
        let mean = sum / weight;
        values[pos..pos + count].iter_mut().for_each(|v| *v = mean);
        pos += count;
    }
}
