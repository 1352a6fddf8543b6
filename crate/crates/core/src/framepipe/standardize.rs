use super::FramepipeError;

/// Evenly spaced indices `round(i * (n - 1) / (t - 1))` for `i in 0..t`;
/// `[0]` when `t == 1`.
pub fn uniform_sample_indices(n: usize, t: usize) -> Result<Vec<usize>, FramepipeError> {
    if t == 0 {
        return Err(FramepipeError::ZeroTarget);
    }
    if n < t {
        return Err(FramepipeError::TooFewFrames { available: n, target: t });
    }
    if t == 1 {
        return Ok(vec![0]);
    }
    let span = (n - 1) as f64;
    let steps = (t - 1) as f64;
    Ok((0..t).map(|i| (i as f64 * span / steps).round() as usize).collect())
}

/// Selects `t` of `n >= t` items at evenly spaced positions, keeping order.
pub fn uniform_sample<T: Clone>(frames: &[T], t: usize) -> Result<Vec<T>, FramepipeError> {
    Ok(uniform_sample_indices(frames.len(), t)?
        .into_iter()
        .map(|i| frames[i].clone())
        .collect())
}

/// Pads `1 <= n < t` items to `t` by repeating the middle item (index
/// `n / 2`) in place: `frames[..m]`, then `t - n + 1` copies of
/// `frames[m]`, then `frames[m + 1..]`.
pub fn pad_middle<T: Clone>(frames: &[T], t: usize) -> Result<Vec<T>, FramepipeError> {
    let n = frames.len();
    if n == 0 {
        return Err(FramepipeError::EmptyInput);
    }
    if n >= t {
        return Err(FramepipeError::NothingToPad { available: n, target: t });
    }
    let m = n / 2;
    let mut out = Vec::with_capacity(t);
    out.extend_from_slice(&frames[..m]);
    out.extend(std::iter::repeat_n(frames[m].clone(), t - n));
    out.extend_from_slice(&frames[m..]);
    debug_assert_eq!(out.len(), t);
    Ok(out)
}

/// Exactly `t` items: identity when `n == t`, uniform sampling when `n > t`,
/// middle padding when `n < t`.
pub fn standardize<T: Clone>(frames: &[T], t: usize) -> Result<Vec<T>, FramepipeError> {
    if t == 0 {
        return Err(FramepipeError::ZeroTarget);
    }
    let n = frames.len();
    if n == 0 {
        return Err(FramepipeError::EmptyInput);
    }
    match n.cmp(&t) {
        std::cmp::Ordering::Equal => Ok(frames.to_vec()),
        std::cmp::Ordering::Greater => uniform_sample(frames, t),
        std::cmp::Ordering::Less => pad_middle(frames, t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_when_counts_match() {
        assert_eq!(uniform_sample_indices(31, 31).unwrap(), (0..31).collect::<Vec<_>>());
        let v: Vec<u32> = (0..31).collect();
        assert_eq!(standardize(&v, 31).unwrap(), v);
    }

    #[test]
    fn five_into_three() {
        assert_eq!(uniform_sample_indices(5, 3).unwrap(), vec![0, 2, 4]);
    }

    #[test]
    fn sixty_two_into_thirty_one() {
        // i * 61 / 30 rounded, computed by hand for a few positions.
        let idx = uniform_sample_indices(62, 31).unwrap();
        assert_eq!(idx.len(), 31);
        assert_eq!(idx[0], 0);
        assert_eq!(idx[1], 2); // 2.033
        assert_eq!(idx[2], 4); // 4.067
        assert_eq!(idx[15], 31); // 30.5 rounds away from zero
        assert_eq!(idx[29], 59); // 58.967
        assert_eq!(idx[30], 61);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn single_target() {
        assert_eq!(uniform_sample_indices(9, 1).unwrap(), vec![0]);
        assert_eq!(standardize(&['a', 'b'], 1).unwrap(), vec!['a']);
    }

    #[test]
    fn pad_three_to_five() {
        assert_eq!(pad_middle(&['A', 'B', 'C'], 5).unwrap(), vec!['A', 'B', 'B', 'B', 'C']);
    }

    #[test]
    fn pad_even_count_uses_upper_middle() {
        assert_eq!(pad_middle(&['A', 'B', 'C', 'D'], 6).unwrap(), vec!['A', 'B', 'C', 'C', 'C', 'D']);
    }

    #[test]
    fn pad_single() {
        assert_eq!(pad_middle(&['A'], 31).unwrap(), vec!['A'; 31]);
    }

    #[test]
    fn contract_errors() {
        assert!(matches!(pad_middle::<u8>(&[], 5), Err(FramepipeError::EmptyInput)));
        assert!(matches!(pad_middle(&[1, 2, 3], 3), Err(FramepipeError::NothingToPad { .. })));
        assert!(matches!(uniform_sample(&[1, 2], 3), Err(FramepipeError::TooFewFrames { .. })));
        assert!(matches!(standardize::<u8>(&[], 31), Err(FramepipeError::EmptyInput)));
        assert!(matches!(standardize(&[1], 0), Err(FramepipeError::ZeroTarget)));
    }

    #[test]
    fn seventeen_frames_embed_as_subsequence() {
        let v: Vec<u32> = (0..17).collect();
        let out = standardize(&v, 31).unwrap();
        assert_eq!(out.len(), 31);
        let mut it = out.iter();
        assert!(v.iter().all(|x| it.any(|y| y == x)));
    }

    proptest! {
        #[test]
        fn indices_monotone_with_endpoints(t in 2usize..64, extra in 0usize..200) {
            let n = t + extra;
            let idx = uniform_sample_indices(n, t).unwrap();
            prop_assert_eq!(idx.len(), t);
            prop_assert_eq!(idx[0], 0);
            prop_assert_eq!(idx[t - 1], n - 1);
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn padding_duplicates_exactly_one_item(t in 2usize..64, n_frac in 0.0..1.0f64) {
            let n = 1 + ((t - 2) as f64 * n_frac) as usize;
            let v: Vec<usize> = (0..n).collect();
            let out = pad_middle(&v, t).unwrap();
            prop_assert_eq!(out.len(), t);
            prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
            let mut dedup = out.clone();
            dedup.dedup();
            prop_assert_eq!(&dedup, &v);
            let repeated: Vec<usize> = v.iter().copied().filter(|x| out.iter().filter(|y| *y == x).count() > 1).collect();
            prop_assert_eq!(repeated, vec![n / 2]);
        }
    }
}
