use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::SampledSpace;
use crate::stats::CompensatedSum;

use super::{BesovParams, SampledFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeminormMode {
    /// Every ordered pair.
    Exact,
    /// Uniformly sampled ordered pairs, or every pair when that is no more.
    Budget(usize),
}

fn same_space<'a>(fns: &[&'a SampledFunction]) -> Result<&'a SampledSpace> {
    let first = fns.first().ok_or(Error::EmptyFamily)?;
    let space = first.space();
    for u in &fns[1..] {
        if !std::sync::Arc::ptr_eq(space, u.space()) && !space.same_points(u.space()) {
            return Err(Error::Mismatch("family mixes spaces".into()));
        }
    }
    Ok(space)
}

/// Exact contributions of the ordered pairs `(x, .)` for every function.
/// Ties in distance share the same open-ball measure.
fn exact_row(space: &SampledSpace, x: usize, fns: &[&SampledFunction], sp: f64, p: f64) -> Result<Vec<f64>> {
    let dist = space.distances_from(x);
    let mut order: Vec<usize> = (0..space.len()).filter(|&j| j != x).collect();
    order.sort_unstable_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    let wx = space.weight(x);
    let mut inside = CompensatedSum::default();
    inside.add(wx);
    let mut acc = vec![CompensatedSum::default(); fns.len()];
    let mut k = 0;
    while k < order.len() {
        let d = dist[order[k]];
        if d <= 0.0 {
            return Err(Error::DuplicatePoint(x, order[k]));
        }
        let mut end = k;
        while end < order.len() && dist[order[end]] == d {
            end += 1;
        }
        let scale = wx / (d.powf(sp) * inside.value());
        for &y in &order[k..end] {
            let wy = space.weight(y);
            for (a, u) in acc.iter_mut().zip(fns) {
                let diff = (u.value(x) - u.value(y)).abs();
                if diff > 0.0 {
                    a.add(diff.powf(p) * wy * scale);
                }
            }
        }
        for &y in &order[k..end] {
            inside.add(space.weight(y));
        }
        k = end;
    }
    Ok(acc.iter().map(CompensatedSum::value).collect())
}

/// The double sum before the `p`-th root, for every function of a family on
/// one space. Rows are computed in parallel and reduced in point order, so
/// results do not depend on the worker count.
pub fn besov_energy_family(
    fns: &[&SampledFunction],
    params: &BesovParams,
    mode: SeminormMode,
    seed: u64,
) -> Result<Vec<f64>> {
    let space = same_space(fns)?;
    let n = space.len();
    if n < 2 {
        return Err(Error::EmptySet);
    }
    let sp = params.s * params.p;
    let ordered_pairs = (n as u128) * (n as u128 - 1);
    match mode {
        SeminormMode::Budget(m) if (m as u128) < ordered_pairs => {
            if m == 0 {
                return Err(Error::InvalidParameter { name: "pair_budget", reason: "budget must be positive".into() });
            }
            let mut rng = crate::stats::rng(seed);
            let pairs: Vec<(usize, usize)> = (0..m)
                .map(|_| {
                    let x = rng.gen_range(0..n);
                    let mut y = rng.gen_range(0..n - 1);
                    if y >= x {
                        y += 1;
                    }
                    (x, y)
                })
                .collect();
            let rows: Vec<Vec<f64>> = pairs
                .par_iter()
                .map(|&(x, y)| {
                    let d = space.dist(x, y);
                    if d <= 0.0 {
                        return Err(Error::DuplicatePoint(x, y));
                    }
                    let k = space.weight(x) * space.weight(y) / (d.powf(sp) * space.ball_measure_unchecked(x, d));
                    Ok(fns.iter().map(|u| (u.value(x) - u.value(y)).abs().powf(params.p) * k).collect())
                })
                .collect::<Result<_>>()?;
            let scale = ordered_pairs as f64 / m as f64;
            Ok(reduce(&rows, fns.len()).into_iter().map(|v| v * scale).collect())
        }
        _ => {
            let rows: Vec<Vec<f64>> =
                (0..n).into_par_iter().map(|x| exact_row(space, x, fns, sp, params.p)).collect::<Result<_>>()?;
            Ok(reduce(&rows, fns.len()))
        }
    }
}

fn reduce(rows: &[Vec<f64>], width: usize) -> Vec<f64> {
    let mut acc = vec![CompensatedSum::default(); width];
    for row in rows {
        for (a, v) in acc.iter_mut().zip(row) {
            a.add(*v);
        }
    }
    acc.iter().map(CompensatedSum::value).collect()
}

/// Homogeneous Besov seminorms of a family sharing one space.
pub fn besov_seminorm_family(
    fns: &[&SampledFunction],
    params: &BesovParams,
    mode: SeminormMode,
    seed: u64,
) -> Result<Vec<f64>> {
    Ok(besov_energy_family(fns, params, mode, seed)?.into_iter().map(|e| e.powf(1.0 / params.p)).collect())
}

/// Homogeneous Besov seminorm: the `p`-th root of the sum over ordered pairs
/// of `|u(x) - u(y)|^p w(x) w(y) / (d^(sp) nu(B(x, d)))` with open balls.
pub fn besov_seminorm(u: &SampledFunction, params: &BesovParams, mode: SeminormMode, seed: u64) -> Result<f64> {
    Ok(besov_seminorm_family(&[u], params, mode, seed)?[0])
}
