//! Synthetic feature corpora with a known class signal, for exercising the
//! classifier and cross-validation without videos or a backbone.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::backbone::FeatureSequence;
use crate::corpus::{Label, LocalId};
use crate::seed::stage_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub count: usize,
    pub steps: usize,
    pub dim: usize,
    /// Distance between the class means, per dimension, in noise standard
    /// deviations. Relevant sits at `+separation/2`, irrelevant at `-separation/2`.
    pub separation: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            count: 200,
            steps: 31,
            dim: 8,
            separation: 2.0,
            noise_sd: 1.0,
            seed: 0,
        }
    }
}

/// `count` sequences with alternating labels (irrelevant first), ids
/// `vid_0001` upward. Every value is its class mean plus independent
/// Gaussian noise.
pub fn synthetic_corpus(spec: &SyntheticSpec) -> Vec<(FeatureSequence, Label)> {
    let mut rng = stage_rng(spec.seed, "synthetic");
    let noise = Normal::new(0.0, spec.noise_sd).expect("noise_sd must be finite and non-negative");
    let half = spec.separation * spec.noise_sd / 2.0;
    (0..spec.count)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Irrelevant } else { Label::Relevant };
            let mean = match label {
                Label::Irrelevant => -half,
                Label::Relevant => half,
            };
            let data: Vec<f32> = (0..spec.steps * spec.dim)
                .map(|_| (mean + noise.sample(&mut rng)) as f32)
                .collect();
            let id = LocalId::from_counter(i as u64 + 1);
            (FeatureSequence::new(id, spec.dim, data).expect("positive dims"), label)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_balance_and_means() {
        let data = synthetic_corpus(&SyntheticSpec::default());
        assert_eq!(data.len(), 200);
        assert_eq!(data.iter().filter(|(_, l)| *l == Label::Relevant).count(), 100);
        assert_eq!(data[0].0.local_id.as_str(), "vid_0001");
        assert_eq!((data[0].0.steps(), data[0].0.dim()), (31, 8));

        let mean_of = |class: Label| {
            let vals: Vec<f64> = data
                .iter()
                .filter(|(_, l)| *l == class)
                .flat_map(|(f, _)| f.as_slice().iter().map(|&v| v as f64))
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        assert!((mean_of(Label::Relevant) - 1.0).abs() < 0.05);
        assert!((mean_of(Label::Irrelevant) + 1.0).abs() < 0.05);
    }

    #[test]
    fn seeded() {
        let a = synthetic_corpus(&SyntheticSpec { count: 4, ..SyntheticSpec::default() });
        let b = synthetic_corpus(&SyntheticSpec { count: 4, ..SyntheticSpec::default() });
        assert_eq!(a, b);
        let c = synthetic_corpus(&SyntheticSpec { count: 4, seed: 1, ..SyntheticSpec::default() });
        assert_ne!(a, c);
    }
}
