use crate::error::{ensure_positive, Error, Result};

use super::{Metric, SampledSpace, Window};

/// Largest sample the builders will produce.
pub const POINT_BUDGET: usize = 1 << 22;

/// Uniform grid on `[offset - half_width, offset + half_width]^dim`.
///
/// Each point carries the cell volume `(2 * half_width / resolution)^dim`, so
/// the total mass equals the window volume. Boundary points are not
/// half-weighted.
pub fn build_grid(dim: usize, half_width: f64, resolution: usize, offset: &[f64]) -> Result<SampledSpace> {
    if resolution < 2 {
        return Err(Error::InvalidResolution(resolution));
    }
    ensure_positive("half_width", half_width)?;
    if dim == 0 {
        return Err(Error::InvalidParameter { name: "dim", reason: "dimension must be positive".into() });
    }
    let offset: Vec<f64> = if offset.is_empty() { vec![0.0; dim] } else { offset.to_vec() };
    if offset.len() != dim {
        return Err(Error::Dimension { expected: dim, found: offset.len() });
    }
    let n = resolution
        .checked_pow(dim as u32)
        .filter(|&n| n <= POINT_BUDGET)
        .ok_or(Error::BudgetExceeded { requested: (resolution as u128).pow(dim as u32), limit: POINT_BUDGET })?;
    let denom = (resolution - 1) as f64;
    // integer numerators keep the grid exactly symmetric about the offset
    let axis: Vec<f64> = (0..resolution).map(|i| half_width * ((2 * i) as f64 - denom) / denom).collect();
    let mut coords = Vec::with_capacity(n * dim);
    let mut digits = vec![0usize; dim];
    for _ in 0..n {
        for (a, &d) in digits.iter().enumerate() {
            coords.push(offset[a] + axis[d]);
        }
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < resolution {
                break;
            }
            *d = 0;
        }
    }
    let weight = (2.0 * half_width / resolution as f64).powi(dim as i32);
    let ids = (0..n).map(|i| i.to_string()).collect();
    let window = Window { center: offset, half_width };
    let mut space = SampledSpace::assemble(ids, dim, coords, vec![weight; n], Metric::Euclidean, Some(window))?;
    // opposite corners realise the diameter
    space.set_diameter_pair((0, n - 1));
    Ok(space)
}

/// Centers of the depth-level cells of the self-similar Cantor set in
/// `[0, 1]^dim` with contraction `ratio`, each carrying the natural
/// self-similar mass `2^(-depth * dim)`.
pub fn build_cantor(ratio: f64, depth: usize, dim: usize) -> Result<SampledSpace> {
    if !(ratio > 0.0 && ratio < 0.5) {
        return Err(Error::InvalidParameter {
            name: "ratio",
            reason: format!("Cantor ratio must lie in (0, 1/2), got {ratio}"),
        });
    }
    if depth == 0 || dim == 0 {
        return Err(Error::InvalidParameter { name: "depth", reason: "depth and dim must be positive".into() });
    }
    let bits = depth * dim;
    if bits >= 64 || (1usize << bits) > POINT_BUDGET {
        return Err(Error::BudgetExceeded {
            requested: 1u128.checked_shl(bits as u32).unwrap_or(u128::MAX),
            limit: POINT_BUDGET,
        });
    }
    let per_axis = 1usize << depth;
    // one-dimensional centers, increasing in the index
    let axis: Vec<f64> = (0..per_axis)
        .map(|code| {
            let mut x = 0.0;
            let mut scale = 1.0;
            for k in 0..depth {
                if code >> (depth - 1 - k) & 1 == 1 {
                    x += (1.0 - ratio) * scale;
                }
                scale *= ratio;
            }
            x + scale / 2.0
        })
        .collect();
    let n = 1usize << bits;
    let mut coords = Vec::with_capacity(n * dim);
    for code in 0..n {
        for a in 0..dim {
            let digit = (code >> ((dim - 1 - a) * depth)) & (per_axis - 1);
            coords.push(axis[digit]);
        }
    }
    let weight = 0.5f64.powi(bits as i32);
    let ids = (0..n).map(|i| i.to_string()).collect();
    let mut space = SampledSpace::assemble(ids, dim, coords, vec![weight; n], Metric::Euclidean, None)?;
    space.set_diameter_pair((0, n - 1));
    Ok(space)
}

/// Same points and weights with metric `d^epsilon`.
pub fn snowflake(space: &SampledSpace, epsilon: f64) -> Result<SampledSpace> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidExponent(epsilon));
    }
    let metric = match space.metric() {
        Metric::Snowflake { base, epsilon: e } => Metric::Snowflake { base: base.clone(), epsilon: e * epsilon },
        base => Metric::Snowflake { base: Box::new(base.clone()), epsilon },
    };
    let mut s = SampledSpace::assemble(
        space.ids().to_vec(),
        space.dim(),
        space.all_coords().to_vec(),
        space.weights().to_vec(),
        metric,
        space.window().cloned(),
    )?;
    // d -> d^epsilon is increasing, so the parent's diameter pair still realises it
    s.set_diameter_pair(space.diam_pair);
    Ok(s)
}
