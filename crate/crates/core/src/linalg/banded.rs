//! Band storage and LU factorization (LAPACK zgbtrf/zgbtrs).

use std::os::raw::{c_char, c_int};

use ndarray::{Array1, Array2, ShapeBuilder};

use super::{C64, ZERO};
use crate::error::{Error, Result};

/// Square band matrix in LAPACK layout with room for the LU fill-in
/// (`ldab = 2*kl + ku + 1`, column major).
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<C64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandedMatrix { n, kl, ku, ab: vec![ZERO; ldab * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn ldab(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || i + self.ku < j || j + self.kl < i {
            return None;
        }
        Some(self.kl + self.ku + i - j + j * self.ldab())
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.slot(i, j).map(|k| self.ab[k]).unwrap_or(ZERO)
    }

    pub fn add(&mut self, i: usize, j: usize, z: C64) -> Result<()> {
        match self.slot(i, j) {
            Some(k) => {
                self.ab[k] += z;
                Ok(())
            }
            None => Err(Error::Linalg(format!("entry ({i},{j}) outside band"))),
        }
    }

    pub fn matvec(&self, x: &Array1<C64>) -> Array1<C64> {
        let mut y = Array1::zeros(self.n);
        let ld = self.ldab();
        for j in 0..self.n {
            let xj = x[j];
            if xj == ZERO {
                continue;
            }
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl + 1).min(self.n);
            let base = self.kl + self.ku + j * ld;
            for i in lo..hi {
                y[i] += self.ab[base + i - j] * xj;
            }
        }
        y
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut out = Array2::zeros((self.n, self.n));
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl + 1).min(self.n);
            for i in lo..hi {
                out[[i, j]] = self.get(i, j);
            }
        }
        out
    }

    /// LU factorization with partial pivoting.
    pub fn factor(&self) -> Result<BandedLu> {
        let mut ab = self.ab.clone();
        let mut ipiv = vec![0 as c_int; self.n];
        let n = self.n as c_int;
        let kl = self.kl as c_int;
        let ku = self.ku as c_int;
        let ldab = self.ldab() as c_int;
        let mut info: c_int = 0;
        // SAFETY: buffers sized per the LAPACK contract; Complex64 is repr(C)
        // with the same layout as the bindgen complex type.
        unsafe {
            lapack_sys::zgbtrf_(
                &n,
                &n,
                &kl,
                &ku,
                ab.as_mut_ptr() as *mut _,
                &ldab,
                ipiv.as_mut_ptr(),
                &mut info,
            );
        }
        if info < 0 {
            return Err(Error::Linalg(format!("zgbtrf: bad argument {}", -info)));
        }
        if info > 0 {
            return Err(Error::Linalg(format!("zgbtrf: exactly singular at pivot {info}")));
        }
        Ok(BandedLu { n: self.n, kl: self.kl, ku: self.ku, ab, ipiv })
    }
}

#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<C64>,
    ipiv: Vec<c_int>,
}

impl BandedLu {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Solve A X = B (or A^* X = B when `adjoint`) for the columns of `b`.
    pub fn solve(&self, b: &Array2<C64>, adjoint: bool) -> Result<Array2<C64>> {
        assert_eq!(b.nrows(), self.n);
        let nrhs = b.ncols();
        let mut buf = Array2::<C64>::zeros((self.n, nrhs).f());
        buf.assign(b);
        let trans: c_char = if adjoint { b'C' as c_char } else { b'N' as c_char };
        let n = self.n as c_int;
        let kl = self.kl as c_int;
        let ku = self.ku as c_int;
        let ldab = (2 * self.kl + self.ku + 1) as c_int;
        let nrhs_c = nrhs as c_int;
        let ldb = self.n.max(1) as c_int;
        let mut info: c_int = 0;
        let ptr = buf.as_slice_memory_order_mut().expect("contiguous").as_mut_ptr();
        // SAFETY: `buf` is column major n x nrhs; factors came from zgbtrf.
        unsafe {
            lapack_sys::zgbtrs_(
                &trans,
                &n,
                &kl,
                &ku,
                &nrhs_c,
                self.ab.as_ptr() as *const _,
                &ldab,
                self.ipiv.as_ptr(),
                ptr as *mut _,
                &ldb,
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Linalg(format!("zgbtrs: info {info}")));
        }
        Ok(buf.as_standard_layout().to_owned())
    }

    pub fn solve_vec(&self, b: &Array1<C64>, adjoint: bool) -> Result<Array1<C64>> {
        let m = b.clone().insert_axis(ndarray::Axis(1));
        Ok(self.solve(&m, adjoint)?.column(0).to_owned())
    }
}
