#![allow(dead_code)]

use banditfit::dataset::Episode;
use banditfit::RewardSeries;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random 0/1 rewards and uniformly random choices.
pub fn random_episode(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize) -> Episode {
    let rewards: Vec<RewardSeries> = (0..k)
        .map(|_| (0..n).map(|_| (0..m).map(|_| f64::from(rng.gen_range(0..2u8))).collect()).collect())
        .collect();
    Episode { actions: (0..n).map(|_| rng.gen_range(0..m)).collect(), rewards, true_params: None, true_x: None }
}

/// Projection onto `{cap >= v_1 >= ... >= v_L >= 0}` by enumerating every
/// active set of the `L + 1` (or `L` without cap) inequality constraints.
/// Each active set pools consecutive entries into blocks whose value is the
/// block mean or the bound the block is tied to; the feasible candidate
/// closest to `v` is the projection.
pub fn projection_oracle(v: &[f64], cap: Option<f64>) -> Vec<f64> {
    let l = v.len();
    if l == 0 {
        return vec![];
    }
    // bits 0..l-1: v_r = v_{r+1} (r < l-1) and bit l-1: v_L = 0; bit l: v_1 = cap
    let n_constraints = if cap.is_some() { l + 1 } else { l };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << n_constraints) {
        let active = |c: usize| mask & (1 << c) != 0;
        let mut blocks: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for r in 0..l {
            if r == l - 1 || !active(r) {
                blocks.push((start, r + 1));
                start = r + 1;
            }
        }
        let mut cand = vec![0.0; l];
        let nb = blocks.len();
        for (bi, &(s, e)) in blocks.iter().enumerate() {
            let tied_zero = bi == nb - 1 && active(l - 1);
            let tied_cap = bi == 0 && cap.is_some() && active(l);
            let value = match (tied_zero, tied_cap) {
                (true, true) => {
                    if cap != Some(0.0) {
                        continue;
                    }
                    0.0
                }
                (true, false) => 0.0,
                (false, true) => cap.unwrap(),
                (false, false) => v[s..e].iter().sum::<f64>() / (e - s) as f64,
            };
            cand[s..e].iter_mut().for_each(|x| *x = value);
        }
        let hi = cap.unwrap_or(f64::INFINITY);
        let feasible = cand.windows(2).all(|w| w[0] >= w[1] - 1e-12)
            && cand[l - 1] >= -1e-12
            && cand[0] <= hi + 1e-12;
        if !feasible {
            continue;
        }
        let d: f64 = cand.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
            best = Some((d, cand));
        }
    }
    best.expect("zero vector is always a candidate").1
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
