//! Tiny dense complex matrices for the transport integrator. The fiber is
//! at most 8x8, so plain loops beat general-purpose array code here.

use ndarray::Array2;

use crate::linalg::{C64, ONE, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct SmallMat {
    pub n: usize,
    pub a: Vec<C64>,
}

impl SmallMat {
    pub fn zeros(n: usize) -> Self {
        SmallMat { n, a: vec![ZERO; n * n] }
    }

    pub fn eye(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = ONE;
        }
        m
    }

    pub fn from_array(x: &Array2<C64>) -> Self {
        let n = x.nrows();
        SmallMat { n, a: x.iter().copied().collect() }
    }

    pub fn to_array(&self) -> Array2<C64> {
        Array2::from_shape_vec((self.n, self.n), self.a.clone()).expect("square")
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.a[i * self.n + j]
    }

    pub fn mul(&self, b: &SmallMat) -> SmallMat {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let x = self.a[i * n + k];
                if x == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += x * b.a[k * n + j];
                }
            }
        }
        out
    }

    pub fn scale(&self, z: C64) -> SmallMat {
        SmallMat { n: self.n, a: self.a.iter().map(|x| x * z).collect() }
    }

    pub fn add(&self, b: &SmallMat) -> SmallMat {
        SmallMat { n: self.n, a: self.a.iter().zip(&b.a).map(|(x, y)| x + y).collect() }
    }

    pub fn adjoint(&self) -> SmallMat {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.a[j * n + i] = self.a[i * n + j].conj();
            }
        }
        out
    }

    pub fn norm1(&self) -> f64 {
        (0..self.n).map(|j| (0..self.n).map(|i| self.get(i, j).norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, b: &SmallMat) -> f64 {
        self.a.iter().zip(&b.a).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
    }

    /// exp(self) by scaling and squaring with a Taylor series.
    pub fn expm(&self) -> SmallMat {
        let n = self.n;
        let nrm = self.norm1();
        let mut sq = 0;
        if nrm > 0.25 {
            sq = (nrm / 0.25).log2().ceil() as i32;
        }
        let x = self.scale(C64::new(0.5f64.powi(sq), 0.0));
        let mut term = Self::eye(n);
        let mut sum = Self::eye(n);
        for k in 1..=20 {
            term = term.mul(&x).scale(C64::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
            if term.a.iter().all(|z| z.norm() < 1e-18) {
                break;
            }
        }
        for _ in 0..sq {
            sum = sum.mul(&sum);
        }
        sum
    }

    /// Unitarity defect max |U*U - 1|.
    pub fn unitarity_defect(&self) -> f64 {
        self.adjoint().mul(self).max_abs_diff(&Self::eye(self.n))
    }

    /// One or two Newton steps toward the polar factor.
    pub fn reunitarize(&self) -> SmallMat {
        let n = self.n;
        let mut x = self.clone();
        for _ in 0..2 {
            let g = x.adjoint().mul(&x);
            if g.max_abs_diff(&Self::eye(n)) < 1e-15 {
                break;
            }
            let corr = Self::eye(n).scale(C64::new(1.5, 0.0)).add(&g.scale(C64::new(-0.5, 0.0)));
            x = x.mul(&corr);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, expm, max_abs_diff};

    #[test]
    fn agrees_with_array_expm() {
        let x = Array2::from_shape_fn((4, 4), |(i, j)| c((i as f64 - j as f64) * 0.3, (i + j) as f64 * 0.1));
        let a = SmallMat::from_array(&x).expm().to_array();
        assert!(max_abs_diff(&a, &expm(&x)) < 1e-12);
    }

    #[test]
    fn roundtrip_and_products() {
        let x = Array2::from_shape_fn((3, 3), |(i, j)| c(i as f64, j as f64));
        let m = SmallMat::from_array(&x);
        assert_eq!(m.to_array(), x);
        assert!(max_abs_diff(&m.mul(&m).to_array(), &x.dot(&x)) < 1e-12);
        assert_eq!(m.adjoint().to_array(), crate::linalg::dagger(&x));
    }
}
