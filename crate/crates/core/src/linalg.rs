//! Chain-structured sparse matrices and their solvers.
//!
//! Every P1 matrix on a metric graph is tridiagonal along each edge chain,
//! coupled only through the shared vertex unknowns. Direct solves therefore
//! reduce to one Thomas sweep per chain plus a small dense Schur complement
//! on the vertex unknowns.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{cst, Real};

/// Index layout of one chain of elements between two (possibly equal) ends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainLayout {
    pub start: Option<usize>,
    pub end: Option<usize>,
    pub offset: usize,
    pub n_elems: usize,
}

impl ChainLayout {
    /// Global unknown at local node `k`, `None` on a Dirichlet end.
    #[inline]
    pub fn node(&self, k: usize) -> Option<usize> {
        if k == 0 {
            self.start
        } else if k == self.n_elems {
            self.end
        } else {
            Some(self.offset + k - 1)
        }
    }

    #[inline]
    pub fn n_interior(&self) -> usize {
        self.n_elems - 1
    }
}

/// Global unknown numbering: vertex unknowns first, then chain interiors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n_dofs: usize,
    pub n_vertex_dofs: usize,
    pub chains: Vec<ChainLayout>,
}

#[derive(Clone, Debug)]
pub struct ChainMatrix<T> {
    layout: Arc<Layout>,
    diag: Vec<Vec<T>>,
    off: Vec<Vec<T>>,
}

impl<T: Real> ChainMatrix<T> {
    pub fn zeros(layout: Arc<Layout>) -> Self {
        let diag = layout
            .chains
            .iter()
            .map(|c| vec![T::zero(); c.n_elems + 1])
            .collect();
        let off = layout
            .chains
            .iter()
            .map(|c| vec![T::zero(); c.n_elems])
            .collect();
        ChainMatrix { layout, diag, off }
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    /// Adds the symmetric element matrix `[[a, b], [b, d]]` of element `k` on chain `c`.
    #[inline]
    pub fn add_element(&mut self, c: usize, k: usize, a: T, b: T, d: T) {
        self.diag[c][k] = self.diag[c][k] + a;
        self.diag[c][k + 1] = self.diag[c][k + 1] + d;
        self.off[c][k] = self.off[c][k] + b;
    }

    /// `a * self + b * other`.
    pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Self {
        debug_assert!(Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout);
        let zip = |x: &Vec<Vec<T>>, y: &Vec<Vec<T>>| {
            x.iter()
                .zip(y)
                .map(|(xs, ys)| xs.iter().zip(ys).map(|(&p, &q)| a * p + b * q).collect())
                .collect()
        };
        ChainMatrix {
            layout: self.layout.clone(),
            diag: zip(&self.diag, &other.diag),
            off: zip(&self.off, &other.off),
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.layout.n_dofs];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.layout.n_dofs);
        for v in y.iter_mut() {
            *v = T::zero();
        }
        for (c, ch) in self.layout.chains.iter().enumerate() {
            let (dg, of) = (&self.diag[c], &self.off[c]);
            for k in 0..=ch.n_elems {
                if let Some(i) = ch.node(k) {
                    y[i] = y[i] + dg[k] * x[i];
                }
            }
            for k in 0..ch.n_elems {
                if let (Some(i), Some(j)) = (ch.node(k), ch.node(k + 1)) {
                    y[i] = y[i] + of[k] * x[j];
                    y[j] = y[j] + of[k] * x[i];
                }
            }
        }
    }

    pub fn quad_form(&self, x: &[T]) -> T {
        dot(x, &self.matvec(x))
    }

    /// Dense copy, for tests on small meshes.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.layout.n_dofs;
        let mut a = vec![vec![T::zero(); n]; n];
        for (c, ch) in self.layout.chains.iter().enumerate() {
            for k in 0..=ch.n_elems {
                if let Some(i) = ch.node(k) {
                    a[i][i] = a[i][i] + self.diag[c][k];
                }
            }
            for k in 0..ch.n_elems {
                if let (Some(i), Some(j)) = (ch.node(k), ch.node(k + 1)) {
                    a[i][j] = a[i][j] + self.off[c][k];
                    a[j][i] = a[j][i] + self.off[c][k];
                }
            }
        }
        a
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `y += a * x`.
#[inline]
pub fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

struct ChainFactor<T> {
    denom: Vec<T>,
    cprime: Vec<T>,
    sub: Vec<T>,
    first: T,
    last: T,
    w1: Vec<T>,
    w2: Vec<T>,
}

impl<T: Real> ChainFactor<T> {
    fn solve(&self, f: &[T]) -> Vec<T> {
        let m = self.denom.len();
        let mut d = vec![T::zero(); m];
        for i in 0..m {
            let prev = if i == 0 { T::zero() } else { self.sub[i] * d[i - 1] };
            d[i] = (f[i] - prev) / self.denom[i];
        }
        for i in (0..m.saturating_sub(1)).rev() {
            d[i] = d[i] - self.cprime[i] * d[i + 1];
        }
        d
    }
}

/// Dense LU with partial pivoting.
pub struct DenseLu<T> {
    lu: Vec<Vec<T>>,
    piv: Vec<usize>,
}

impl<T: Real> DenseLu<T> {
    pub fn factor(mut a: Vec<Vec<T>>) -> Result<Self> {
        let n = a.len();
        let scale = a
            .iter()
            .flat_map(|r| r.iter())
            .fold(T::zero(), |m, &x| m.max(x.abs()));
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap())
                .unwrap();
            if a[p][k].abs() <= T::epsilon() * scale * cst(16.0) || !a[p][k].is_finite() {
                return Err(Error::NumericalFailure("singular vertex Schur complement".into()));
            }
            a.swap(k, p);
            piv.swap(k, p);
            for i in k + 1..n {
                let l = a[i][k] / a[k][k];
                a[i][k] = l;
                for j in k + 1..n {
                    a[i][j] = a[i][j] - l * a[k][j];
                }
            }
        }
        Ok(DenseLu { lu: a, piv })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.len();
        let mut x: Vec<T> = self.piv.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] = x[i] - self.lu[i][j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] = x[i] - self.lu[i][j] * x[j];
            }
            x[i] = x[i] / self.lu[i][i];
        }
        x
    }
}

/// Direct solver for a nonsingular chain matrix whose chain interiors admit a
/// pivot-free tridiagonal factorization (e.g. any SPD matrix).
pub struct ChainSolver<T> {
    layout: Arc<Layout>,
    chains: Vec<ChainFactor<T>>,
    schur: Option<DenseLu<T>>,
}

impl<T: Real> ChainSolver<T> {
    pub fn factor(a: &ChainMatrix<T>) -> Result<Self> {
        let layout = a.layout.clone();
        let nv = layout.n_vertex_dofs;
        let mut s = vec![vec![T::zero(); nv]; nv];
        let mut chains = Vec::with_capacity(layout.chains.len());
        for (c, ch) in layout.chains.iter().enumerate() {
            let n = ch.n_elems;
            let m = n - 1;
            let dg = &a.diag[c];
            let of = &a.off[c];
            let mut denom = vec![T::zero(); m];
            let mut cprime = vec![T::zero(); m];
            let mut sub = vec![T::zero(); m];
            for i in 0..m {
                let k = i + 1;
                sub[i] = if i == 0 { T::zero() } else { of[k - 1] };
                let prev = if i == 0 { T::zero() } else { sub[i] * cprime[i - 1] };
                denom[i] = dg[k] - prev;
                if denom[i].abs() <= T::min_positive_value() || !denom[i].is_finite() {
                    return Err(Error::NumericalFailure(format!(
                        "zero pivot in chain {c} at interior node {k}"
                    )));
                }
                cprime[i] = if i + 1 < m { of[k] / denom[i] } else { T::zero() };
            }
            let mut fac = ChainFactor {
                denom,
                cprime,
                sub,
                first: of[0],
                last: of[n - 1],
                w1: vec![],
                w2: vec![],
            };
            let mut e = vec![T::zero(); m];
            e[0] = fac.first;
            fac.w1 = fac.solve(&e);
            e[0] = T::zero();
            e[m - 1] = fac.last;
            fac.w2 = fac.solve(&e);
            if let Some(sv) = ch.start {
                s[sv][sv] = s[sv][sv] + dg[0];
            }
            if let Some(ev) = ch.end {
                s[ev][ev] = s[ev][ev] + dg[n];
            }
            if let Some(sv) = ch.start {
                s[sv][sv] = s[sv][sv] - fac.first * fac.w1[0];
                if let Some(ev) = ch.end {
                    s[sv][ev] = s[sv][ev] - fac.first * fac.w2[0];
                }
            }
            if let Some(ev) = ch.end {
                s[ev][ev] = s[ev][ev] - fac.last * fac.w2[m - 1];
                if let Some(sv) = ch.start {
                    s[ev][sv] = s[ev][sv] - fac.last * fac.w1[m - 1];
                }
            }
            chains.push(fac);
        }
        let schur = if nv > 0 { Some(DenseLu::factor(s)?) } else { None };
        Ok(ChainSolver {
            layout,
            chains,
            schur,
        })
    }

    pub fn solve(&self, f: &[T]) -> Vec<T> {
        let layout = &self.layout;
        let nv = layout.n_vertex_dofs;
        let mut ys = Vec::with_capacity(self.chains.len());
        let mut rhs: Vec<T> = f[..nv].to_vec();
        for (ch, fac) in layout.chains.iter().zip(&self.chains) {
            let m = ch.n_interior();
            let y = fac.solve(&f[ch.offset..ch.offset + m]);
            if let Some(sv) = ch.start {
                rhs[sv] = rhs[sv] - fac.first * y[0];
            }
            if let Some(ev) = ch.end {
                rhs[ev] = rhs[ev] - fac.last * y[m - 1];
            }
            ys.push(y);
        }
        let xv = match &self.schur {
            Some(lu) => lu.solve(&rhs),
            None => vec![],
        };
        let mut x = vec![T::zero(); layout.n_dofs];
        x[..nv].copy_from_slice(&xv);
        for ((ch, fac), y) in layout.chains.iter().zip(&self.chains).zip(ys) {
            let xs = ch.start.map_or(T::zero(), |i| xv[i]);
            let xe = ch.end.map_or(T::zero(), |i| xv[i]);
            for (i, yi) in y.into_iter().enumerate() {
                x[ch.offset + i] = yi - fac.w1[i] * xs - fac.w2[i] * xe;
            }
        }
        x
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MinresInfo {
    pub iterations: usize,
    pub converged: bool,
    /// Preconditioned residual estimate relative to the initial one.
    pub rel_residual: f64,
}

/// Preconditioned MINRES for a symmetric (possibly indefinite or singular but
/// consistent) system `A x = b` with an SPD preconditioner `P`.
pub fn minres<T: Real>(
    apply: impl Fn(&[T]) -> Vec<T>,
    precond: impl Fn(&[T]) -> Vec<T>,
    b: &[T],
    rtol: T,
    max_iter: usize,
) -> (Vec<T>, MinresInfo) {
    let n = b.len();
    let mut x = vec![T::zero(); n];
    let mut r1 = b.to_vec();
    let mut y = precond(&r1);
    let beta1 = dot(&r1, &y).max(T::zero()).sqrt();
    let mut info = MinresInfo {
        iterations: 0,
        converged: true,
        rel_residual: 0.0,
    };
    if beta1 == T::zero() {
        return (x, info);
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta, mut dbar, mut epsln) = (T::zero(), beta1, T::zero(), T::zero());
    let mut phibar = beta1;
    let (mut cs, mut sn) = (-T::one(), T::zero());
    let mut w = vec![T::zero(); n];
    let mut w2 = vec![T::zero(); n];
    info.converged = false;
    for itn in 1..=max_iter {
        let s = T::one() / beta;
        let v: Vec<T> = y.iter().map(|&yi| s * yi).collect();
        y = apply(&v);
        if itn >= 2 {
            axpy(-(beta / oldb), &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-(alfa / beta), &r2, &mut y);
        r1 = std::mem::replace(&mut r2, y);
        y = precond(&r2);
        oldb = beta;
        let bb = dot(&r2, &y);
        beta = bb.max(T::zero()).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(T::epsilon() * beta1);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar = sn * phibar;
        let denom = T::one() / gamma;
        let w1 = std::mem::replace(&mut w2, std::mem::take(&mut w));
        w = v
            .iter()
            .zip(&w1)
            .zip(&w2)
            .map(|((&vi, &a), &b)| (vi - oldeps * a - delta * b) * denom)
            .collect();
        axpy(phi, &w, &mut x);
        info.iterations = itn;
        info.rel_residual = (phibar / beta1).to_f64().unwrap_or(f64::NAN);
        if phibar <= rtol * beta1 || beta <= T::epsilon() * beta1 {
            info.converged = phibar <= rtol * beta1 * cst(10.0) || beta <= T::epsilon() * beta1;
            break;
        }
    }
    (x, info)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // star of three chains plus a loop, with one Dirichlet end
    fn layout() -> Arc<Layout> {
        Arc::new(Layout {
            n_dofs: 2 + 3 + 4 + 2 + 5,
            n_vertex_dofs: 2,
            chains: vec![
                ChainLayout { start: Some(0), end: Some(1), offset: 2, n_elems: 4 },
                ChainLayout { start: Some(1), end: None, offset: 5, n_elems: 5 },
                ChainLayout { start: Some(0), end: Some(0), offset: 9, n_elems: 3 },
                ChainLayout { start: Some(1), end: Some(0), offset: 11, n_elems: 6 },
            ],
        })
    }

    fn random_spd(rng: &mut ChaCha8Rng) -> ChainMatrix<f64> {
        let lay = layout();
        let mut a = ChainMatrix::zeros(lay.clone());
        for (c, ch) in lay.chains.iter().enumerate() {
            for k in 0..ch.n_elems {
                let s = rng.gen_range(0.5..2.0);
                let m = rng.gen_range(0.1..1.0);
                a.add_element(c, k, s + 2.0 * m, -s + m, s + 2.0 * m);
            }
        }
        a
    }

    #[test]
    fn direct_solver_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_spd(&mut rng);
        let n = a.layout().n_dofs;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.matvec(&x);
        let dense = a.to_dense();
        for i in 0..n {
            let bi: f64 = (0..n).map(|j| dense[i][j] * x[j]).sum();
            assert!((bi - b[i]).abs() < 1e-12);
            for j in 0..n {
                assert_eq!(dense[i][j], dense[j][i]);
            }
        }
        let sol = ChainSolver::factor(&a).unwrap().solve(&b);
        for i in 0..n {
            assert!((sol[i] - x[i]).abs() < 1e-10, "{i}: {} vs {}", sol[i], x[i]);
        }
    }

    #[test]
    fn minres_indefinite_bordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_spd(&mut rng);
        let n = a.layout().n_dofs;
        let shifted = a.lin_comb(1.0, &a, 0.0);
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        // [[A - 0.3 I, c], [c^T, 0]]
        let apply = |z: &[f64]| {
            let mut out = shifted.matvec(&z[..n]);
            for i in 0..n {
                out[i] += -0.3 * z[i] + c[i] * z[n];
            }
            out.push(dot(&c, &z[..n]));
            out
        };
        let want: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = apply(&want);
        let solver = ChainSolver::factor(&a).unwrap();
        let pre = |r: &[f64]| {
            let mut z = solver.solve(&r[..n]);
            z.push(r[n]);
            z
        };
        let (x, info) = minres(apply, pre, &b, 1e-13, 500);
        assert!(info.converged);
        for i in 0..=n {
            assert!((x[i] - want[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn dense_lu() {
        let a = vec![vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]];
        let lu = DenseLu::factor(a.clone()).unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]);
        for (i, row) in a.iter().enumerate() {
            let bi: f64 = row.iter().zip(&x).map(|(p, q)| p * q).sum();
            assert!((bi - [3.0, 2.0, 4.0][i]).abs() < 1e-14);
        }
        assert!(DenseLu::factor(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).is_err());
    }
}
