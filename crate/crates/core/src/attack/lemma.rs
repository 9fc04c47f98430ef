//! Exhaustive evaluation of both sides of
//! `max_{w∈P, δ_1..δ_K} Σ w_i f_i(δ_i) = max_i max_{δ_i} f_i(δ_i)`
//! on finite candidate tables, in any ordered field (exact rationals included).

use num_traits::Num;

use crate::{Error, Result};

fn check_table<T>(table: &[Vec<T>]) -> Result<()> {
    if table.is_empty() || table.iter().any(Vec::is_empty) {
        return Err(Error::InvalidArgument("every domain needs at least one candidate".into()));
    }
    Ok(())
}

fn max_of<T: Copy + PartialOrd>(it: impl IntoIterator<Item = T>) -> T {
    it.into_iter().reduce(|a, b| if b > a { b } else { a }).expect("non-empty")
}

/// Right-hand side: the largest single-domain maximum.
pub fn max_of_domain_maxima<T: Copy + PartialOrd>(table: &[Vec<T>]) -> Result<T> {
    check_table(table)?;
    Ok(max_of(table.iter().map(|row| max_of(row.iter().copied()))))
}

/// Left-hand side by brute force: every candidate assignment `(δ_1..δ_K)`
/// against every simplex point with coordinates in `{0, 1/n, ..., 1}`.
pub fn joint_weighted_max<T: Num + Copy + PartialOrd>(table: &[Vec<T>], grid: usize) -> Result<T> {
    check_table(table)?;
    if grid == 0 {
        return Err(Error::InvalidArgument("simplex grid resolution must be positive".into()));
    }
    let k = table.len();
    let n = (0..grid).fold(T::zero(), |acc, _| acc + T::one());
    let weights: Vec<Vec<T>> = compositions(grid, k)
        .into_iter()
        .map(|parts| {
            parts
                .into_iter()
                .map(|p| (0..p).fold(T::zero(), |acc, _| acc + T::one()) / n)
                .collect()
        })
        .collect();

    let mut best: Option<T> = None;
    let mut choice = vec![0usize; k];
    loop {
        for w in &weights {
            let v = (0..k).fold(T::zero(), |acc, i| acc + w[i] * table[i][choice[i]]);
            if best.is_none_or(|b| v > b) {
                best = Some(v);
            }
        }
        // Odometer over candidate choices.
        let mut i = 0;
        loop {
            if i == k {
                return Ok(best.expect("at least one evaluation"));
            }
            choice[i] += 1;
            if choice[i] < table[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

/// All ways to write `n` as an ordered sum of `k` non-negative parts.
fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|first| {
            compositions(n - first, k - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}
