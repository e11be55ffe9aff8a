//! Compressed sparse rows, ILU(0) and preconditioned Krylov solvers for the
//! Newton systems.

use alloc::vec;
use alloc::vec::Vec;

/// Square sparse matrix in CSR layout with sorted, duplicate-free rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Csr {
    n: usize,
    ptr: Vec<usize>,
    col: Vec<u32>,
    val: Vec<f64>,
}

impl Csr {
    /// Empty matrix to be filled row by row with [`Csr::push_row`].
    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut ptr = Vec::with_capacity(n + 1);
        ptr.push(0);
        Csr { n, ptr, col: Vec::with_capacity(nnz), val: Vec::with_capacity(nnz) }
    }

    /// Appends the next row; `entries` is sorted and merged in place.
    pub fn push_row(&mut self, entries: &mut Vec<(u32, f64)>) {
        assert!(self.ptr.len() <= self.n, "too many rows");
        entries.sort_unstable_by_key(|e| e.0);
        let mut last = u32::MAX;
        for &(c, v) in entries.iter() {
            debug_assert!((c as usize) < self.n);
            if c == last {
                *self.val.last_mut().unwrap() += v;
            } else {
                self.col.push(c);
                self.val.push(v);
                last = c;
            }
        }
        self.ptr.push(self.col.len());
        entries.clear();
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let mut m = Csr::with_capacity(a.len(), 0);
        let mut row = Vec::new();
        for r in a {
            row.extend(r.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(j, v)| (j as u32, *v)));
            m.push_row(&mut row);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.ptr[i]..self.ptr[i + 1];
        (&self.col[r.clone()], &self.val[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&(j as u32)).map(|k| v[k]).unwrap_or(0.0)
    }

    /// `y = A x`.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let (c, v) = self.row(i);
            *yi = c.iter().zip(v).map(|(&j, &a)| a * x[j as usize]).sum();
        }
    }
}

/// Incomplete LU factorization with the sparsity pattern of `A`.
#[derive(Clone, Debug)]
pub struct Ilu0 {
    lu: Csr,
    diag: Vec<usize>,
}

impl Ilu0 {
    /// `None` when a pivot vanishes or a diagonal entry is missing.
    pub fn new(a: &Csr) -> Option<Self> {
        let n = a.n;
        let mut lu = a.clone();
        let mut diag = vec![usize::MAX; n];
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.ptr[i], lu.ptr[i + 1]);
            for k in start..end {
                pos[lu.col[k] as usize] = k;
            }
            for k in start..end {
                let c = lu.col[k] as usize;
                if c >= i {
                    break;
                }
                let pivot = lu.val[diag[c]];
                let f = lu.val[k] / pivot;
                lu.val[k] = f;
                for m in diag[c] + 1..lu.ptr[c + 1] {
                    let p = pos[lu.col[m] as usize];
                    if p != usize::MAX {
                        lu.val[p] -= f * lu.val[m];
                    }
                }
            }
            let d = pos[i];
            for k in start..end {
                pos[lu.col[k] as usize] = usize::MAX;
            }
            if d == usize::MAX || !(lu.val[d].abs() > 0.0) || !lu.val[d].is_finite() {
                return None;
            }
            diag[i] = d;
        }
        Some(Ilu0 { lu, diag })
    }

    /// `x = (LU)⁻¹ b`.
    pub fn apply(&self, b: &[f64], x: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut s = b[i];
            for k in lu.ptr[i]..self.diag[i] {
                s -= lu.val[k] * x[lu.col[k] as usize];
            }
            x[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = x[i];
            for k in self.diag[i] + 1..lu.ptr[i + 1] {
                s -= lu.val[k] * x[lu.col[k] as usize];
            }
            x[i] = s / lu.val[self.diag[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Outcome of a Krylov solve: iterations and final residual 2-norm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Right-preconditioned BiCGSTAB for `A x = b` starting from `x`.
/// Stops once `‖b − A x‖₂ ≤ tol`; `None` on breakdown or when `max_iter` is
/// exhausted.
pub fn bicgstab(a: &Csr, m: &Ilu0, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Option<KrylovStats> {
    let n = a.n;
    let mut r = vec![0.0; n];
    a.mul_into(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut rn = norm(&r);
    if rn <= tol {
        return Some(KrylovStats { iterations: 0, residual: rn });
    }
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ph = vec![0.0; n];
    let mut sh = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho1 = dot(&r0, &r);
        if rho1 == 0.0 || !rho1.is_finite() {
            return None;
        }
        let beta = (rho1 / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        m.apply(&p, &mut ph);
        a.mul_into(&ph, &mut v);
        let rv = dot(&r0, &v);
        if rv == 0.0 {
            return None;
        }
        alpha = rho1 / rv;
        for i in 0..n {
            r[i] -= alpha * v[i];
        }
        let sn = norm(&r);
        if sn <= tol {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            return Some(KrylovStats { iterations: it, residual: sn });
        }
        m.apply(&r, &mut sh);
        a.mul_into(&sh, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return None;
        }
        omega = dot(&t, &r) / tt;
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] -= omega * t[i];
        }
        rn = norm(&r);
        if !rn.is_finite() {
            return None;
        }
        if rn <= tol {
            return Some(KrylovStats { iterations: it, residual: rn });
        }
        if omega == 0.0 {
            return None;
        }
        rho = rho1;
    }
    None
}

/// Right-preconditioned restarted GMRES(`restart`) for `A x = b`.
pub fn gmres(
    a: &Csr,
    m: &Ilu0,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Option<KrylovStats> {
    let n = a.n;
    let k = restart.max(1);
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
    let mut hess = vec![vec![0.0; k]; k + 1];
    let (mut cs, mut sn) = (vec![0.0; k], vec![0.0; k]);
    let mut total = 0;
    loop {
        a.mul_into(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = norm(&r);
        if beta <= tol {
            return Some(KrylovStats { iterations: total, residual: beta });
        }
        if total >= max_iter || !beta.is_finite() {
            return None;
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut g = vec![0.0; k + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..k {
            m.apply(&basis[j], &mut z);
            a.mul_into(&z, &mut w);
            for (i, q) in basis.iter().enumerate() {
                let hij = dot(&w, q);
                hess[i][j] = hij;
                for (wl, ql) in w.iter_mut().zip(q) {
                    *wl -= hij * ql;
                }
            }
            let hn = norm(&w);
            hess[j + 1][j] = hn;
            for i in 0..j {
                let tmp = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = tmp;
            }
            let d = libm::hypot(hess[j][j], hess[j + 1][j]);
            if d == 0.0 {
                return None;
            }
            cs[j] = hess[j][j] / d;
            sn[j] = hess[j + 1][j] / d;
            hess[j][j] = d;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            total += 1;
            if g[j + 1].abs() <= tol || total >= max_iter || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|l| hess[i][l] * y[l]).sum();
            y[i] = (g[i] - s) / hess[i][i];
        }
        w.iter_mut().for_each(|v| *v = 0.0);
        for (yi, q) in y.iter().zip(&basis) {
            for (wl, ql) in w.iter_mut().zip(q) {
                *wl += yi * ql;
            }
        }
        m.apply(&w, &mut z);
        for i in 0..n {
            x[i] += z[i];
        }
    }
}

/// Band storage holds at most this many entries.
pub const MAX_BAND_ENTRIES: usize = 1 << 27;

/// Banded LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    kv: usize,
    ld: usize,
    // column-major; entry (i, j) lives at `j·ld + kv + i − j`
    ab: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    /// `None` when a pivot vanishes or the band exceeds [`MAX_BAND_ENTRIES`].
    pub fn new(a: &Csr) -> Option<Self> {
        let n = a.n;
        let (mut kl, mut ku) = (0, 0);
        for i in 0..n {
            for &j in a.row(i).0 {
                let j = j as usize;
                kl = kl.max(i.saturating_sub(j));
                ku = ku.max(j.saturating_sub(i));
            }
        }
        let kv = kl + ku;
        let ld = 2 * kl + ku + 1;
        if n.checked_mul(ld)? > MAX_BAND_ENTRIES {
            return None;
        }
        let mut ab = vec![0.0; n * ld];
        for i in 0..n {
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                let j = j as usize;
                ab[j * ld + kv + i - j] = x;
            }
        }
        let mut piv = vec![0; n];
        let mut ju = 0;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ld + kv;
            let mut jp = 0;
            for r in 1..=km {
                if ab[col + r].abs() > ab[col + jp].abs() {
                    jp = r;
                }
            }
            piv[j] = j + jp;
            let p = ab[col + jp];
            if !(p.abs() > 0.0) || !p.is_finite() {
                return None;
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let base = c * ld + kv;
                    ab.swap(base + j - c, base + j + jp - c);
                }
            }
            if km > 0 {
                let inv = 1.0 / ab[col];
                for r in 1..=km {
                    ab[col + r] *= inv;
                }
                for c in j + 1..=ju {
                    let base = c * ld + kv + j - c;
                    let f = ab[base];
                    if f != 0.0 {
                        for r in 1..=km {
                            ab[base + r] -= ab[col + r] * f;
                        }
                    }
                }
            }
        }
        Some(BandLu { n, kl, kv, ld, ab, piv })
    }

    /// Overwrites `b` with `A⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, ld, kv) = (self.n, self.ld, self.kv);
        for j in 0..n {
            b.swap(j, self.piv[j]);
            let km = self.kl.min(n - 1 - j);
            let col = j * ld + kv;
            let bj = b[j];
            for r in 1..=km {
                b[j + r] -= self.ab[col + r] * bj;
            }
        }
        for j in (0..n).rev() {
            let col = j * ld + kv;
            b[j] /= self.ab[col];
            let bj = b[j];
            for i in j.saturating_sub(kv)..j {
                b[i] -= self.ab[col + i - j] * bj;
            }
        }
    }
}

fn residual_norm(a: &Csr, x: &[f64], b: &[f64]) -> f64 {
    let mut r = vec![0.0; a.n];
    a.mul_into(x, &mut r);
    libm::sqrt(r.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum())
}

/// Direct solve of `A x = b` by [`BandLu`].
pub fn solve_direct(a: &Csr, b: &[f64]) -> Option<(Vec<f64>, KrylovStats)> {
    let lu = BandLu::new(a)?;
    let mut x = b.to_vec();
    lu.solve_in_place(&mut x);
    let residual = residual_norm(a, &x, b);
    residual.is_finite().then_some((x, KrylovStats { iterations: 0, residual }))
}

/// Solves `A x = b` to `‖b − A x‖₂ ≤ tol` with ILU(0)-BiCGSTAB, falling back
/// to [`solve_direct`] on breakdown.
pub fn solve(a: &Csr, b: &[f64], tol: f64) -> Option<(Vec<f64>, KrylovStats)> {
    if let Some(m) = Ilu0::new(a) {
        let mut x = vec![0.0; a.n];
        if let Some(s) = bicgstab(a, &m, b, &mut x, tol, 2000) {
            return Some((x, s));
        }
    }
    solve_direct(a, b)
}
