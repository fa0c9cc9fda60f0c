use rand::Rng;
use rand_distr::StandardNormal;

/// `K` standard-normal perturbation vectors stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBatch {
    data: Vec<f64>,
    samples: usize,
    dim: usize,
    antithetic: bool,
}

impl NoiseBatch {
    /// Draws `samples` vectors of length `dim`.
    ///
    /// With `antithetic`, vectors come in `(z, -z)` pairs; an odd count ends
    /// with one unpaired draw.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, samples: usize, dim: usize, antithetic: bool) -> Self {
        assert!(samples >= 1, "need at least one sample");
        let mut data = vec![0.0; samples * dim];
        let mut k = 0;
        while k < samples {
            let row = &mut data[k * dim..(k + 1) * dim];
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            if antithetic && k + 1 < samples {
                let (head, tail) = data.split_at_mut((k + 1) * dim);
                for (mirror, v) in tail[..dim].iter_mut().zip(&head[k * dim..]) {
                    *mirror = -*v;
                }
                k += 2;
            } else {
                k += 1;
            }
        }
        Self {
            data,
            samples,
            dim,
            antithetic,
        }
    }

    /// Builds a batch from explicit rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == dim), "ragged noise rows");
        Self {
            data: rows.concat(),
            samples: rows.len(),
            dim,
            antithetic: false,
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_antithetic(&self) -> bool {
        self.antithetic
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.samples)
    }
}
