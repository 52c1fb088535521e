use super::SvmError;
use crate::exec::Execution;

/// `exp(-gamma * ||x - y||^2)`.
pub fn rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> Result<f64, SvmError> {
    if x.len() != y.len() {
        return Err(SvmError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(SvmError::InvalidParameter("gamma must be positive"));
    }
    Ok(rbf_unchecked(x, y, gamma))
}

#[inline]
pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
pub(crate) fn rbf_unchecked(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    (-gamma * squared_distance(x, y)).exp()
}

/// Dense symmetric Gram matrix over a set of points.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    pub fn compute<X: AsRef<[f64]> + Sync>(xs: &[X], gamma: f64, exec: Execution) -> Self {
        let n = xs.len();
        let mut values = vec![0.0; n * n];
        if n > 0 {
            exec.fill_chunks(&mut values, n, |i, row| {
                let xi = xs[i].as_ref();
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if i == j {
                        1.0
                    } else {
                        rbf_unchecked(xi, xs[j].as_ref(), gamma)
                    };
                }
            });
        }
        KernelMatrix { n, values }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}
