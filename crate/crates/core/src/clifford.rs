//! Representations of the complex Clifford algebra, the even-d grading, and
//! lifts of orthogonal maps into the Pin group.

use ndarray::{array, Array2};

use crate::error::{Error, Result};
use crate::linalg::{c, dagger, eye, kron, max_abs_diff, C64, ONE, ZERO};

pub const DEFAULT_MAX_DIM: usize = 6;

#[derive(Clone, Debug)]
pub struct CliffordRep {
    pub d: usize,
    pub fiber_dim: usize,
    pub gammas: Vec<Array2<C64>>,
    /// Present iff d is even.
    pub grading: Option<Array2<C64>>,
}

pub fn pauli() -> [Array2<C64>; 3] {
    [
        array![[ZERO, ONE], [ONE, ZERO]],
        array![[ZERO, c(0.0, -1.0)], [c(0.0, 1.0), ZERO]],
        array![[ONE, ZERO], [ZERO, -ONE]],
    ]
}

/// Irreducible recursive representation: dimension 2^(d/2) for even d (with
/// grading), 2^((d-1)/2) for odd d.
pub fn build_clifford(d: usize) -> Result<CliffordRep> {
    build_clifford_with_max(d, DEFAULT_MAX_DIM)
}

pub fn build_clifford_with_max(d: usize, max_d: usize) -> Result<CliffordRep> {
    if d == 0 || d > max_d {
        return Err(Error::Clifford(format!("dimension {d} outside 1..={max_d}")));
    }
    let [s1, s2, s3] = pauli();
    // start from d = 1: gamma_1 = [1]
    let mut gammas = vec![array![[ONE]]];
    let mut grading: Option<Array2<C64>> = None;
    let mut cur = 1;
    while cur < d {
        if cur % 2 == 1 {
            // odd -> even: double the fiber
            let size = gammas[0].nrows();
            let id = eye(size);
            let mut next: Vec<Array2<C64>> = gammas.iter().map(|g| kron(&s1, g)).collect();
            next.push(kron(&s2, &id));
            grading = Some(kron(&s3, &id));
            gammas = next;
        } else {
            // even -> odd: the grading becomes the last generator
            gammas.push(grading.take().expect("even rep carries a grading"));
        }
        cur += 1;
    }
    let fiber_dim = gammas[0].nrows();
    Ok(CliffordRep { d, fiber_dim, gammas, grading })
}

impl CliffordRep {
    /// gamma_v = sum_k v_k gamma_k.
    pub fn gamma_v(&self, v: &[f64]) -> Array2<C64> {
        assert_eq!(v.len(), self.d, "vector length must equal d");
        let mut out = Array2::zeros((self.fiber_dim, self.fiber_dim));
        for (g, &vk) in self.gammas.iter().zip(v) {
            if vk != 0.0 {
                out.scaled_add(c(vk, 0.0), g);
            }
        }
        out
    }

    /// Largest deviation from the anticommutation relations and from
    /// selfadjointness (and the grading relations for even d).
    pub fn relation_defect(&self) -> f64 {
        let n = self.fiber_dim;
        let mut worst: f64 = 0.0;
        for (i, gi) in self.gammas.iter().enumerate() {
            worst = worst.max(max_abs_diff(gi, &dagger(gi)));
            for (j, gj) in self.gammas.iter().enumerate() {
                let ac = gi.dot(gj) + gj.dot(gi);
                let want = if i == j { eye(n).mapv(|z| z * 2.0) } else { Array2::zeros((n, n)) };
                worst = worst.max(max_abs_diff(&ac, &want));
            }
        }
        if let Some(g) = &self.grading {
            worst = worst.max(max_abs_diff(&g.dot(g), &eye(n)));
            worst = worst.max(max_abs_diff(g, &dagger(g)));
            for gj in &self.gammas {
                worst = worst.max(max_abs_diff(&(g.dot(gj) + gj.dot(g)), &Array2::zeros((n, n))));
            }
        }
        worst
    }
}

/// Quasi-reflection R_v = 2 v v^T - 1 for a unit vector v.
pub fn quasi_reflection(v: &[f64]) -> Vec<Vec<f64>> {
    let d = v.len();
    (0..d)
        .map(|i| (0..d).map(|j| 2.0 * v[i] * v[j] - if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

#[derive(Clone, Debug)]
pub struct PinLift {
    pub reflection_vectors: Vec<Vec<f64>>,
    pub g_o: Array2<C64>,
    pub orthogonal: Vec<Vec<f64>>,
}

fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn determinant(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for k in col..n {
                a[r][k] -= f * a[col][k];
            }
        }
    }
    det
}

pub fn check_orthogonal(o: &[Vec<f64>], tol: f64) -> Result<()> {
    let d = o.len();
    if o.iter().any(|r| r.len() != d) {
        return Err(Error::Clifford("matrix is not square".into()));
    }
    for i in 0..d {
        for j in 0..d {
            let dot: f64 = (0..d).map(|k| o[k][i] * o[k][j]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            if (dot - want).abs() > tol {
                return Err(Error::Clifford(format!("matrix is not orthogonal (entry ({i},{j}) of O^T O is {dot})")));
            }
        }
    }
    Ok(())
}

/// Lift O into the Pin group: g_O = gamma_{v_1}...gamma_{v_k} with
/// gamma_{Ow} = g_O gamma_w i(g_O). In odd d only det O = +1 is reachable
/// by quasi-reflections; improper O is rejected.
pub fn pin_lift(rep: &CliffordRep, o: &[Vec<f64>]) -> Result<PinLift> {
    let d = rep.d;
    if o.len() != d {
        return Err(Error::Clifford(format!("orthogonal matrix has size {} but d = {d}", o.len())));
    }
    check_orthogonal(o, 1e-10)?;
    let det = determinant(o);
    // The quasi-reflection product of k vectors equals (-1)^k times the
    // product of the Householder reflections.
    let target: Vec<Vec<f64>> = if det > 0.0 {
        o.to_vec()
    } else if d % 2 == 0 {
        o.iter().map(|r| r.iter().map(|x| -x).collect()).collect()
    } else {
        return Err(Error::Clifford(
            "improper orthogonal map in odd dimension has no quasi-reflection lift".into(),
        ));
    };
    let mut m = target;
    let mut vectors = Vec::new();
    for j in 0..d {
        let col: Vec<f64> = (0..d).map(|i| m[i][j]).collect();
        let mut w: Vec<f64> = col.clone();
        w[j] -= 1.0;
        let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nw <= 1e-12 {
            continue;
        }
        let mut u: Vec<f64> = w.iter().map(|x| x / nw).collect();
        if let Some(first) = u.iter().find(|x| x.abs() > 1e-14) {
            if *first < 0.0 {
                u.iter_mut().for_each(|x| *x = -*x);
            }
        }
        // m <- H_u m
        for k in 0..d {
            let colk: Vec<f64> = (0..d).map(|i| m[i][k]).collect();
            let p: f64 = u.iter().zip(&colk).map(|(a, b)| a * b).sum();
            for i in 0..d {
                m[i][k] = colk[i] - 2.0 * p * u[i];
            }
        }
        vectors.push(u);
    }
    let mut g = eye(rep.fiber_dim);
    for u in &vectors {
        g = g.dot(&rep.gamma_v(u));
    }
    Ok(PinLift { reflection_vectors: vectors, g_o: g, orthogonal: o.to_vec() })
}

impl PinLift {
    /// Clifford transposition: reversal of the generator product.
    pub fn transposed(&self, rep: &CliffordRep) -> Array2<C64> {
        let mut g = eye(rep.fiber_dim);
        for u in self.reflection_vectors.iter().rev() {
            g = g.dot(&rep.gamma_v(u));
        }
        g
    }

    /// max_w |gamma_{Ow} - g_O gamma_w i(g_O)| over basis vectors w.
    pub fn conjugation_defect(&self, rep: &CliffordRep) -> f64 {
        let gi = self.transposed(rep);
        let mut worst: f64 = 0.0;
        for k in 0..rep.d {
            let mut w = vec![0.0; rep.d];
            w[k] = 1.0;
            let ow = mat_vec(&self.orthogonal, &w);
            let lhs = rep.gamma_v(&ow);
            let rhs = self.g_o.dot(&rep.gammas[k]).dot(&gi);
            worst = worst.max(max_abs_diff(&lhs, &rhs));
        }
        worst
    }
}

/// All signed permutation matrices of size d (the symmetry group of a cube).
pub fn signed_permutations(d: usize) -> Vec<Vec<Vec<f64>>> {
    fn perms(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            perms(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let mut ps = Vec::new();
    perms(&mut (0..d).collect(), 0, &mut ps);
    let mut out = Vec::new();
    for p in ps {
        for signs in 0..(1usize << d) {
            let mut m = vec![vec![0.0; d]; d];
            for (col, &row) in p.iter().enumerate() {
                m[row][col] = if signs >> col & 1 == 1 { -1.0 } else { 1.0 };
            }
            out.push(m);
        }
    }
    out
}

pub fn det(o: &[Vec<f64>]) -> f64 {
    determinant(o)
}
