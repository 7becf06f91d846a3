use rand::seq::index::sample;

use crate::space::SampledSpace;

/// Unordered pairs `i < j` with `0 < d(i, j) < r`.
pub(crate) struct ClosePairs {
    pub pairs: Vec<(usize, usize, f64)>,
    pub total: u64,
    pub exhaustive: bool,
}

fn sorted_neighbours(space: &SampledSpace, i: usize, r: f64, out: &mut Vec<(usize, f64)>) {
    out.clear();
    space.for_each_in_ball(i, r, |j, d| {
        if j > i && d > 0.0 {
            out.push((j, d));
        }
    });
    out.sort_unstable_by_key(|&(j, _)| j);
}

/// Enumerates every close pair when there are at most `budget` of them and
/// otherwise draws `budget` of them uniformly without replacement.
pub(crate) fn close_pairs(space: &SampledSpace, r: f64, budget: usize, seed: u64) -> ClosePairs {
    let mut buf = Vec::new();
    let counts: Vec<u64> = (0..space.len())
        .map(|i| {
            sorted_neighbours(space, i, r, &mut buf);
            buf.len() as u64
        })
        .collect();
    let total: u64 = counts.iter().sum();
    let exhaustive = total <= budget as u64;
    let mut wanted: Vec<u64> = if exhaustive {
        Vec::new()
    } else {
        let mut rng = crate::stats::rng(seed);
        let mut v: Vec<u64> = sample(&mut rng, total as usize, budget).into_iter().map(|k| k as u64).collect();
        v.sort_unstable();
        v
    };
    wanted.reverse();
    let mut pairs = Vec::with_capacity(if exhaustive { total as usize } else { budget });
    let mut offset = 0u64;
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let hit = exhaustive || wanted.last().is_some_and(|&k| k < offset + c);
        if hit {
            sorted_neighbours(space, i, r, &mut buf);
            if exhaustive {
                pairs.extend(buf.iter().map(|&(j, d)| (i, j, d)));
            } else {
                while let Some(&k) = wanted.last() {
                    if k >= offset + c {
                        break;
                    }
                    let (j, d) = buf[(k - offset) as usize];
                    pairs.push((i, j, d));
                    wanted.pop();
                }
            }
        }
        offset += c;
    }
    ClosePairs { pairs, total, exhaustive }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::build_grid;

    #[test]
    fn exhaustive_matches_brute_force() {
        let g = build_grid(2, 1.0, 9, &[]).unwrap();
        let cp = close_pairs(&g, 0.6, usize::MAX, 0);
        assert!(cp.exhaustive);
        let mut brute = 0;
        for i in 0..g.len() {
            for j in i + 1..g.len() {
                if g.dist(i, j) < 0.6 {
                    brute += 1;
                }
            }
        }
        assert_eq!(cp.pairs.len(), brute);
        assert_eq!(cp.total, brute as u64);
    }

    #[test]
    fn sampled_pairs_are_distinct_and_close() {
        let g = build_grid(2, 1.0, 21, &[]).unwrap();
        let cp = close_pairs(&g, 0.5, 300, 7);
        assert!(!cp.exhaustive);
        assert_eq!(cp.pairs.len(), 300);
        let mut seen = std::collections::HashSet::new();
        for &(i, j, d) in &cp.pairs {
            assert!(i < j && d < 0.5 && d == g.dist(i, j));
            assert!(seen.insert((i, j)));
        }
        let again = close_pairs(&g, 0.5, 300, 7);
        assert_eq!(again.pairs, cp.pairs);
    }
}
