//! Convergence plumbing: split-chain potential scale reduction.

/// Split-chain R-hat of one scalar quantity.
///
/// Each chain is halved, then the usual between/within variance ratio is
/// computed over the resulting 2m sequences. Values near 1 indicate the
/// chains agree; a common rule of thumb flags values above 1.01-1.1.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let mut pieces: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    let half_len = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if half_len < 2 {
        return f64::NAN;
    }
    for chain in chains {
        pieces.push(&chain[..half_len]);
        pieces.push(&chain[chain.len() - half_len..]);
    }
    let m = pieces.len() as f64;
    let len = half_len as f64;

    let piece_means: Vec<f64> =
        pieces.iter().map(|p| p.iter().sum::<f64>() / len).collect();
    let grand_mean = piece_means.iter().sum::<f64>() / m;
    let between = len / (m - 1.0)
        * piece_means.iter().map(|pm| (pm - grand_mean).powi(2)).sum::<f64>();
    let within = pieces
        .iter()
        .zip(&piece_means)
        .map(|(p, pm)| p.iter().map(|v| (v - pm).powi(2)).sum::<f64>() / (len - 1.0))
        .sum::<f64>()
        / m;
    if within == 0.0 {
        return if between == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_hat = (len - 1.0) / len * within + between / len;
    (var_hat / within).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn iid_chains_give_rhat_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..2_000).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        let r = split_rhat(&chains);
        assert!((r - 1.0).abs() < 0.02, "rhat {r}");
    }

    #[test]
    fn shifted_chains_are_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let a: Vec<f64> = (0..1_000).map(|_| normal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..1_000).map(|_| 3.0 + normal.sample(&mut rng)).collect();
        let r = split_rhat(&[a, b]);
        assert!(r > 1.5, "rhat {r}");
    }

    #[test]
    fn degenerate_inputs() {
        assert!(split_rhat(&[]).is_nan());
        assert!(split_rhat(&[vec![1.0, 2.0]]).is_nan());
        assert_eq!(split_rhat(&[vec![1.0; 100], vec![1.0; 100]]), 1.0);
    }
}
