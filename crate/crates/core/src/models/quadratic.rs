use crate::error::TensorError;
use crate::tensor::{Matrix, Rng};

/// `f(w) = ½ wᵀAw − bᵀw` with `A = MᵀM + δI`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    pub a: Matrix,
    pub b: Matrix,
    pub w: Matrix,
}

pub const CONDITIONING_SHIFT: f64 = 0.1;

impl QuadraticProblem {
    /// Random SPD problem of dimension `n`, starting from a random `w`.
    pub fn random(n: usize, rng: &mut Rng) -> Self {
        let m = Matrix::randn(n, n, 1.0, rng);
        let mut a = m.transpose().matmul(&m).expect("square");
        for i in 0..n {
            a[(i, i)] += CONDITIONING_SHIFT;
        }
        let b = Matrix::randn(n, 1, 1.0, rng);
        let w = Matrix::randn(n, 1, 1.0, rng);
        Self { a, b, w }
    }

    pub fn dim(&self) -> usize {
        self.b.rows()
    }

    pub fn loss_at(&self, w: &Matrix) -> Result<f64, TensorError> {
        let aw = self.a.matmul(w)?;
        let quad = w.transpose().matmul(&aw)?[(0, 0)];
        let lin = self.b.transpose().matmul(w)?[(0, 0)];
        Ok(0.5 * quad - lin)
    }

    pub fn grad_at(&self, w: &Matrix) -> Result<Matrix, TensorError> {
        self.a.matmul(w)?.sub(&self.b)
    }

    /// Loss and gradient at the current `w`.
    pub fn loss_grad(&self) -> Result<(f64, Matrix), TensorError> {
        Ok((self.loss_at(&self.w)?, self.grad_at(&self.w)?))
    }

    /// `A⁻¹b` by Gaussian elimination with partial pivoting.
    pub fn optimum(&self) -> Matrix {
        let n = self.dim();
        let mut aug: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row = self.a.row(i).to_vec();
                row.push(self.b[(i, 0)]);
                row
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| aug[i][col].abs().total_cmp(&aug[j][col].abs()))
                .unwrap();
            aug.swap(col, pivot);
            for r in col + 1..n {
                let f = aug[r][col] / aug[col][col];
                for c in col..=n {
                    aug[r][c] -= f * aug[col][c];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = aug[i][n];
            for j in i + 1..n {
                s -= aug[i][j] * x[j];
            }
            x[i] = s / aug[i][i];
        }
        Matrix::column_vector(&x)
    }
}
