use crate::error::{Error, Result};
use crate::nn::Real;

/// Dense row-major array with an optional gradient slot.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
    grad: Option<Vec<T>>,
}

impl<T: Real> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) && !data.is_empty() {
            return Err(Error::dim("Tensor::new", "positive dims", format!("{shape:?}")));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::dim("Tensor::new", n, data.len()));
        }
        Ok(Tensor {
            shape,
            data,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![T::zero(); n],
            grad: None,
        }
    }

    /// Builds a `[rows.len(), width]` matrix; all rows must share a width.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * width);
        for r in rows {
            if r.len() != width {
                return Err(Error::dim("Tensor::from_rows", width, r.len()));
            }
            data.extend_from_slice(r);
        }
        Tensor::new(vec![rows.len(), width], data)
    }

    pub fn from_f64(shape: Vec<usize>, data: &[f64]) -> Result<Self> {
        Tensor::new(shape, data.iter().map(|&x| T::of(x)).collect())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Leading dimension of a matrix.
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Trailing extent: product of all but the first dimension.
    pub fn cols(&self) -> usize {
        self.shape.iter().skip(1).product()
    }

    pub fn row(&self, i: usize) -> &[T] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::dim("Tensor::reshape", self.data.len(), n));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn grad(&self) -> Option<&[T]> {
        self.grad.as_deref()
    }

    /// Gradient slot, allocated as zeros on first use.
    pub fn grad_mut(&mut self) -> &mut [T] {
        let n = self.data.len();
        self.grad.get_or_insert_with(|| vec![T::zero(); n])
    }

    /// Simultaneous access to data and gradient, as an optimizer needs.
    pub fn data_and_grad_mut(&mut self) -> (&mut [T], &mut [T]) {
        let n = self.data.len();
        let g = self.grad.get_or_insert_with(|| vec![T::zero(); n]);
        (&mut self.data, g)
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = self.grad.as_mut() {
            g.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    pub fn drop_grad(&mut self) {
        self.grad = None;
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|x| U::of(x.to_f64().unwrap_or(f64::NAN)))
                .collect(),
            grad: None,
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
            grad: None,
        }
    }
}

/// `a · bᵀ` for `a: [m, k]`, `b: [n, k]`.
pub fn matmul_nt<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k, n) = (a.rows(), a.cols(), b.rows());
    if b.cols() != k {
        return Err(Error::dim("matmul_nt", k, b.cols()));
    }
    let mut out = Tensor::zeros(vec![m, n]);
    T::gemm(m, k, n, T::one(), a.data(), false, b.data(), true, T::zero(), out.data_mut());
    Ok(out)
}

/// `a · b` for `a: [m, k]`, `b: [k, n]`.
pub fn matmul_nn<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    if b.rows() != k {
        return Err(Error::dim("matmul_nn", k, b.rows()));
    }
    let mut out = Tensor::zeros(vec![m, n]);
    T::gemm(m, k, n, T::one(), a.data(), false, b.data(), false, T::zero(), out.data_mut());
    Ok(out)
}

/// `acc += aᵀ · b` for `a: [m, k]`, `b: [m, n]`, `acc: [k, n]`.
pub fn matmul_tn_acc<T: Real>(a: &Tensor<T>, b: &Tensor<T>, acc: &mut [T]) -> Result<()> {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    if b.rows() != m {
        return Err(Error::dim("matmul_tn_acc", m, b.rows()));
    }
    if acc.len() != k * n {
        return Err(Error::dim("matmul_tn_acc", k * n, acc.len()));
    }
    T::gemm(k, m, n, T::one(), a.data(), true, b.data(), false, T::one(), acc);
    Ok(())
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shape() {
        assert!(Tensor::<f32>::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f32>::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn grad_slot_matches_data_length() {
        let mut t = Tensor::<f64>::zeros(vec![3, 4]);
        assert!(t.grad().is_none());
        assert_eq!(t.grad_mut().len(), 12);
        t.grad_mut()[5] = 2.0;
        t.zero_grad();
        assert!(t.grad().unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn matmul_variants_agree() {
        let a = Tensor::<f64>::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Tensor::<f64>::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        // a · bᵀ
        assert_eq!(matmul_nt(&a, &b).unwrap().data(), &[17.0, 23.0, 39.0, 53.0]);
        // a · b
        assert_eq!(matmul_nn(&a, &b).unwrap().data(), &[19.0, 22.0, 43.0, 50.0]);
        // aᵀ · b
        let mut acc = vec![0.0; 4];
        matmul_tn_acc(&a, &b, &mut acc).unwrap();
        assert_eq!(acc, vec![26.0, 30.0, 38.0, 44.0]);
    }
}
