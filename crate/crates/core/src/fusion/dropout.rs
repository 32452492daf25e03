use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FusionError;
use crate::image::RgbImage;
use crate::repr::EventFrame;

/// Result of [`image_dropout`]: the batch plus which images were blanked.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutOutcome {
    pub batch: Vec<(RgbImage, EventFrame)>,
    pub dropped: Vec<bool>,
}

impl DropoutOutcome {
    pub fn dropped_fraction(&self) -> f64 {
        self.dropped.iter().filter(|&&d| d).count() as f64 / self.dropped.len().max(1) as f64
    }
}

/// Replaces each image with a black frame independently with probability
/// `rate`. Event frames are passed through untouched.
pub fn image_dropout(batch: Vec<(RgbImage, EventFrame)>, rate: f64, seed: u64) -> Result<DropoutOutcome, FusionError> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(FusionError::InvalidRate(rate));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dropped = Vec::with_capacity(batch.len());
    let batch = batch
        .into_iter()
        .map(|(img, ev)| {
            let drop = rng.random::<f64>() < rate;
            dropped.push(drop);
            if drop {
                (RgbImage::filled(img.width(), img.height(), [0; 3]), ev)
            } else {
                (img, ev)
            }
        })
        .collect();
    Ok(DropoutOutcome { batch, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(n: usize) -> Vec<(RgbImage, EventFrame)> {
        (0..n)
            .map(|i| (RgbImage::filled(2, 2, [(i % 200) as u8 + 1, 9, 9]), EventFrame::from_values(2, 2, vec![0.5; 12])))
            .collect()
    }

    #[test]
    fn extremes() {
        let b = batch(20);
        let kept = image_dropout(b.clone(), 0.0, 3).unwrap();
        assert_eq!(kept.batch, b);
        let all = image_dropout(b.clone(), 1.0, 3).unwrap();
        assert!(all.batch.iter().all(|(img, _)| img.data().iter().all(|&v| v == 0)));
        assert!(all.batch.iter().zip(&b).all(|(a, o)| a.1 == o.1));
        assert!(image_dropout(b.clone(), 1.5, 0).is_err());
        assert!(image_dropout(b, -0.1, 0).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let a = image_dropout(batch(50), 0.5, 11).unwrap();
        let b = image_dropout(batch(50), 0.5, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn half_rate_binomial_bound() {
        // std of the fraction is 0.005 at n = 10_000; 0.02 is four sigma
        let out = image_dropout(batch(10_000), 0.5, 0).unwrap();
        assert!((out.dropped_fraction() - 0.5).abs() <= 0.02, "{}", out.dropped_fraction());
    }
}
