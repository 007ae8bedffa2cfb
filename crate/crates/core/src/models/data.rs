use crate::tensor::{Matrix, Rng};

/// Gaussian-mixture classification data: one unit-variance cluster per
/// class, centers drawn from N(0, separation²).
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub seed: u64,
}

impl SyntheticDataset {
    /// Class centers depend only on `center_seed`, so train and validation
    /// splits drawn with different sample seeds share the same clusters.
    pub fn generate(
        samples: usize,
        dim: usize,
        classes: usize,
        separation: f64,
        center_seed: u64,
        sample_seed: u64,
    ) -> Self {
        let mut center_rng = Rng::new(center_seed);
        let centers = Matrix::randn(classes, dim, separation, &mut center_rng);
        let mut rng = Rng::new(sample_seed);
        let mut inputs = Matrix::zeros(samples, dim);
        let mut labels = Vec::with_capacity(samples);
        for i in 0..samples {
            let label = i % classes;
            for d in 0..dim {
                inputs[(i, d)] = centers[(label, d)] + rng.normal();
            }
            labels.push(label);
        }
        Self {
            inputs,
            labels,
            seed: sample_seed,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows at `indices`, in order.
    pub fn gather(&self, indices: &[usize]) -> (Matrix, Vec<usize>) {
        let dim = self.inputs.cols();
        let mut data = Vec::with_capacity(indices.len() * dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.inputs.row(i));
            labels.push(self.labels[i]);
        }
        (
            Matrix::from_vec(indices.len(), dim, data).expect("row-sized chunks"),
            labels,
        )
    }

    /// `batch` indices drawn uniformly with replacement.
    pub fn sample_batch(&self, batch: usize, rng: &mut Rng) -> (Matrix, Vec<usize>) {
        let idx: Vec<usize> = (0..batch).map(|_| rng.below(self.len())).collect();
        self.gather(&idx)
    }
}

/// Adds N(0, (severity · max(batch))²) noise to each entry independently with
/// the given probability.
pub fn inject_spikes(batch: &Matrix, probability: f64, severity: f64, rng: &mut Rng) -> Matrix {
    if probability <= 0.0 || severity == 0.0 || batch.is_empty() {
        return batch.clone();
    }
    let std = severity * batch.max().expect("nonempty").abs();
    let mut out = batch.clone();
    for x in out.as_mut_slice() {
        if rng.bernoulli(probability) {
            *x += std * rng.normal();
        }
    }
    out
}
