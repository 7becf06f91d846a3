use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::space::SampledSpace;
use crate::stats::CompensatedSum;

use super::{lp_norm, BesovParams, SampledFunction};

/// Scale ladder `t_n = C sigma^n` for `n = n0, ..., n0 + n_scales - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub sigma: f64,
    pub n0: i32,
    pub n_scales: usize,
}

impl DiscretizationParams {
    pub fn new(c: f64, sigma: f64, n0: i32, n_scales: usize) -> Result<Self> {
        ensure_positive("C", c)?;
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(Error::InvalidParameter { name: "sigma", reason: format!("must lie in (0, 1), got {sigma}") });
        }
        if n_scales == 0 {
            return Err(Error::InvalidParameter { name: "n_scales", reason: "need at least one scale".into() });
        }
        Ok(DiscretizationParams { c, sigma, n0, n_scales })
    }

    /// `C` is the sample diameter and `sigma = 1/2`; the first scale is the
    /// largest one below `r` and the ladder stops at the last scale of at
    /// least two sample spacings, keeping at least three scales.
    pub fn for_space(space: &SampledSpace, r: f64) -> Result<Self> {
        ensure_positive("r", r)?;
        let c = space.diam_sample();
        let sigma: f64 = 0.5;
        let mut n0 = ((c / r).ln() / 2f64.ln()).floor() as i32;
        while c * sigma.powi(n0) >= r {
            n0 += 1;
        }
        while c * sigma.powi(n0 - 1) < r {
            n0 -= 1;
        }
        let floor = 2.0 * space.min_positive_distance();
        let mut n_scales = 0;
        while c * sigma.powi(n0 + n_scales as i32) >= floor {
            n_scales += 1;
        }
        DiscretizationParams::new(c, sigma, n0, n_scales.max(3))
    }

    pub fn scale(&self, n: i32) -> f64 {
        self.c * self.sigma.powi(n)
    }

    pub fn scales(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        (self.n0..self.n0 + self.n_scales as i32).map(|n| (n, self.scale(n)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleTerm {
    pub n: i32,
    pub t: f64,
    /// `t^(-sp) sum_x w(x) avg_{B(x, t)} |u(x) - u(.)|^p`
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteBesov {
    /// `(||u||_p^p + scale_sum)^(1/p)`
    pub value: f64,
    pub lp_norm: f64,
    pub scale_sum: f64,
    /// `scale_sum^(1/p)`, the counterpart of the seminorm.
    pub scale_norm: f64,
    pub terms: Vec<ScaleTerm>,
}

/// Multiscale Besov norm over a finite scale ladder.
pub fn discrete_besov(u: &SampledFunction, params: &BesovParams, disc: &DiscretizationParams) -> Result<DiscreteBesov> {
    Ok(discrete_besov_family(&[u], params, disc)?.pop().expect("one function"))
}

/// Same for a family on one space, sharing the neighbourhood queries.
pub fn discrete_besov_family(
    fns: &[&SampledFunction],
    params: &BesovParams,
    disc: &DiscretizationParams,
) -> Result<Vec<DiscreteBesov>> {
    let first = fns.first().ok_or(Error::EmptyFamily)?;
    let space = first.space();
    for u in &fns[1..] {
        if !std::sync::Arc::ptr_eq(space, u.space()) && !space.same_points(u.space()) {
            return Err(Error::Mismatch("family mixes spaces".into()));
        }
    }
    let resolution = space.min_positive_distance();
    let largest = disc.scale(disc.n0);
    if largest <= resolution {
        return Err(Error::EmptyScale(largest));
    }
    let p = params.p;
    let mut terms: Vec<Vec<ScaleTerm>> = vec![Vec::with_capacity(disc.n_scales); fns.len()];
    for (n, t) in disc.scales() {
        let rows: Vec<Vec<f64>> = (0..space.len())
            .into_par_iter()
            .map_init(Vec::new, |members, x| {
                members.clear();
                space.for_each_in_ball(x, t, |j, _| members.push(j));
                let mut mass = CompensatedSum::default();
                let mut acc = vec![CompensatedSum::default(); fns.len()];
                for &j in members.iter() {
                    let wj = space.weight(j);
                    mass.add(wj);
                    for (a, u) in acc.iter_mut().zip(fns) {
                        let diff = (u.value(x) - u.value(j)).abs();
                        if diff > 0.0 {
                            a.add(wj * diff.powf(p));
                        }
                    }
                }
                let scale = space.weight(x) / mass.value();
                acc.iter().map(|a| a.value() * scale).collect()
            })
            .collect();
        let factor = t.powf(-params.s * p);
        for (k, per_fn) in terms.iter_mut().enumerate() {
            let mut total = CompensatedSum::default();
            for row in &rows {
                total.add(row[k]);
            }
            per_fn.push(ScaleTerm { n, t, value: factor * total.value() });
        }
    }
    fns.iter()
        .zip(terms)
        .map(|(u, terms)| {
            let lp = lp_norm(u, p)?;
            let scale_sum = crate::stats::compensated_sum(&terms.iter().map(|t| t.value).collect::<Vec<_>>());
            Ok(DiscreteBesov {
                value: (lp.powf(p) + scale_sum).powf(1.0 / p),
                lp_norm: lp,
                scale_sum,
                scale_norm: scale_sum.powf(1.0 / p),
                terms,
            })
        })
        .collect()
}
