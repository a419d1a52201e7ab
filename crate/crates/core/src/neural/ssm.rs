use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Matrix;
use crate::{Error, Result};

/// Diagonal linear state-space layer:
/// `y_k = C x_k + D u_k`, `x_{k+1} = a * x_k + B u_k`, `x_0 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SsmParams {
    a: Vec<f64>,
    b: Matrix,
    c: Matrix,
    d: Matrix,
}

impl SsmParams {
    /// `b` is `N x d_in`, `c` is `d_out x N`, `d` is `d_out x d_in`.
    pub fn new(a: Vec<f64>, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        let n = a.len();
        if let Some(i) = a.iter().position(|v| !(v.is_finite() && libm::fabs(*v) <= 1.0)) {
            return Err(Error::Config(format!("unstable state: |a[{i}]| = {} exceeds 1", a[i])));
        }
        if b.rows() != n || c.cols() != n || d.rows() != c.rows() || d.cols() != b.cols() {
            return Err(Error::Shape(format!(
                "state {n}, B {:?}, C {:?}, D {:?} are inconsistent",
                b.shape(),
                c.shape(),
                d.shape()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn state_dim(&self) -> usize {
        self.a.len()
    }

    pub fn d_in(&self) -> usize {
        self.b.cols()
    }

    pub fn d_out(&self) -> usize {
        self.c.rows()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn d(&self) -> &Matrix {
        &self.d
    }
}

/// One left-to-right pass over `u` (`n x d_in`), `O(n)` in the sequence length.
pub fn ssm_scan(u: &Matrix, p: &SsmParams) -> Result<Matrix> {
    if u.cols() != p.d_in() {
        return Err(Error::Shape(format!("input width {} but d_in {}", u.cols(), p.d_in())));
    }
    let (n, ns, dout) = (u.rows(), p.state_dim(), p.d_out());
    let mut y = Matrix::zeros(n, dout);
    let mut x = vec![0.0; ns];
    let mut bu = vec![0.0; ns];
    for k in 0..n {
        let uk = u.row(k);
        let yk = y.row_mut(k);
        for (o, yo) in yk.iter_mut().enumerate() {
            let cx: f64 = p.c.row(o).iter().zip(&x).map(|(c, s)| c * s).sum();
            let du: f64 = p.d.row(o).iter().zip(uk).map(|(d, v)| d * v).sum();
            *yo = cx + du;
        }
        for (s, b) in bu.iter_mut().enumerate() {
            *b = p.b.row(s).iter().zip(uk).map(|(w, v)| w * v).sum();
        }
        for s in 0..ns {
            x[s] = p.a[s] * x[s] + bu[s];
        }
    }
    Ok(y)
}
