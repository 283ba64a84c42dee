//! Sparse direct solver for real symmetric 7-point operators on an n×n×n box.
//!
//! The box is bisected recursively along its longest axis. Each cut plane is
//! a separator; leaves are small boxes eliminated whole. Elimination runs as a
//! multifrontal LU in postorder: every node assembles a dense front over its
//! separator and the neighbouring nodes outside its box, eliminates the
//! separator with partial pivoting and passes the Schur complement to its
//! parent. All dense kernels run sequentially, so results are bit-stable.

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Accum, Mat, MatMut, Par};

use crate::error::{Error, Result};

const LEAF_VOLUME: usize = 64;

struct Front {
    sep: Vec<usize>,
    bnd: Vec<usize>,
    lu: PartialPivLu<f64>,
    /// Front block coupling boundary rows to separator columns. By symmetry
    /// its transpose is the separator-to-boundary block.
    fbs: Mat<f64>,
}

struct BoxNode {
    lo: [usize; 3],
    hi: [usize; 3],
    sep_lo: [usize; 3],
    sep_hi: [usize; 3],
    children: Vec<usize>,
}

fn build_tree(lo: [usize; 3], hi: [usize; 3], out: &mut Vec<BoxNode>) -> usize {
    let d = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    if d[0] * d[1] * d[2] <= LEAF_VOLUME {
        out.push(BoxNode {
            lo,
            hi,
            sep_lo: lo,
            sep_hi: hi,
            children: vec![],
        });
        return out.len() - 1;
    }
    let ax = (0..3).max_by_key(|&a| (d[a], 3 - a)).unwrap_or(0);
    let mid = lo[ax] + d[ax] / 2;
    let mut hi1 = hi;
    hi1[ax] = mid;
    let mut lo2 = lo;
    lo2[ax] = mid + 1;
    let mut children = vec![];
    if mid > lo[ax] {
        children.push(build_tree(lo, hi1, out));
    }
    if hi[ax] > mid + 1 {
        children.push(build_tree(lo2, hi, out));
    }
    let mut sep_lo = lo;
    sep_lo[ax] = mid;
    let mut sep_hi = hi;
    sep_hi[ax] = mid + 1;
    out.push(BoxNode {
        lo,
        hi,
        sep_lo,
        sep_hi,
        children,
    });
    out.len() - 1
}

/// LU factors of `A = diag + coupling·(sum over the six neighbours)` on an
/// n³ box with zero values outside. Unknowns are ordered `(i·n + j)·n + k`.
pub struct GridFactorization {
    n: usize,
    fronts: Vec<Front>,
}

impl GridFactorization {
    pub fn new(n: usize, diag: &[f64], coupling: f64) -> Result<Self> {
        let nn = n * n * n;
        if n == 0 || diag.len() != nn {
            return Err(Error::Validation(format!(
                "diagonal has {} entries for a box of {n}³",
                diag.len()
            )));
        }
        let idx = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
        let mut tree = Vec::new();
        build_tree([0; 3], [n; 3], &mut tree);

        let mut pos = vec![u32::MAX; nn];
        let mut fronts: Vec<Front> = Vec::with_capacity(tree.len());
        let mut updates: Vec<Option<Mat<f64>>> = (0..tree.len()).map(|_| None).collect();
        for (node_id, b) in tree.iter().enumerate() {
            let mut sep = Vec::new();
            for i in b.sep_lo[0]..b.sep_hi[0] {
                for j in b.sep_lo[1]..b.sep_hi[1] {
                    for k in b.sep_lo[2]..b.sep_hi[2] {
                        sep.push(idx(i, j, k));
                    }
                }
            }
            // nodes outside the box that touch it through one face
            let mut bnd = Vec::new();
            for i in b.lo[0].saturating_sub(1)..(b.hi[0] + 1).min(n) {
                for j in b.lo[1].saturating_sub(1)..(b.hi[1] + 1).min(n) {
                    for k in b.lo[2].saturating_sub(1)..(b.hi[2] + 1).min(n) {
                        let outside = [(i, 0), (j, 1), (k, 2)]
                            .iter()
                            .filter(|&&(c, a)| c < b.lo[a] || c >= b.hi[a])
                            .count();
                        if outside == 1 {
                            bnd.push(idx(i, j, k));
                        }
                    }
                }
            }
            let s = sep.len();
            let m = s + bnd.len();
            for (l, &g) in sep.iter().chain(bnd.iter()).enumerate() {
                pos[g] = l as u32;
            }
            let mut f = Mat::<f64>::zeros(m, m);
            for (l, &g) in sep.iter().enumerate() {
                f[(l, l)] += diag[g];
                let (i, j, k) = (g / (n * n), (g / n) % n, g % n);
                let nbrs = [
                    (i.wrapping_sub(1), j, k),
                    (i + 1, j, k),
                    (i, j.wrapping_sub(1), k),
                    (i, j + 1, k),
                    (i, j, k.wrapping_sub(1)),
                    (i, j, k + 1),
                ];
                for &(a, bb, c) in &nbrs {
                    if a < n && bb < n && c < n {
                        let pq = pos[idx(a, bb, c)];
                        if pq != u32::MAX {
                            let pq = pq as usize;
                            f[(l, pq)] += coupling;
                            if pq >= s {
                                f[(pq, l)] += coupling;
                            }
                        }
                    }
                }
            }
            for &c in &b.children {
                let u = updates[c]
                    .take()
                    .ok_or_else(|| Error::Singular("missing child update".into()))?;
                let cb = &fronts[c].bnd;
                for (cj, &gj) in cb.iter().enumerate() {
                    let lj = pos[gj] as usize;
                    for (ci, &gi) in cb.iter().enumerate() {
                        f[(pos[gi] as usize, lj)] += u[(ci, cj)];
                    }
                }
            }
            let lu = f.as_ref().submatrix(0, 0, s, s).partial_piv_lu();
            let fbs = f.as_ref().submatrix(s, 0, m - s, s).to_owned();
            let w = lu.solve(f.as_ref().submatrix(0, s, s, m - s));
            if !w.as_ref().is_all_finite() {
                return Err(Error::Singular(format!(
                    "front {node_id} of {} is numerically singular",
                    tree.len()
                )));
            }
            let mut upd = f.as_ref().submatrix(s, s, m - s, m - s).to_owned();
            matmul(upd.as_mut(), Accum::Add, fbs.as_ref(), w.as_ref(), -1.0, Par::Seq);
            for &g in sep.iter().chain(bnd.iter()) {
                pos[g] = u32::MAX;
            }
            updates[node_id] = Some(upd);
            fronts.push(Front { sep, bnd, lu, fbs });
        }
        Ok(GridFactorization { n, fronts })
    }

    pub fn unknowns(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Bytes held by the stored factors.
    pub fn factor_bytes(&self) -> usize {
        self.fronts
            .iter()
            .map(|f| 8 * (f.sep.len() * f.sep.len() + f.sep.len() * f.bnd.len()))
            .sum()
    }

    /// Overwrite the columns of `x` with `A⁻¹ x`.
    pub fn solve_in_place(&self, mut x: MatMut<'_, f64>) {
        assert_eq!(x.nrows(), self.unknowns());
        let r = x.ncols();
        for fr in &self.fronts {
            let xs = Mat::<f64>::from_fn(fr.sep.len(), r, |l, c| x[(fr.sep[l], c)]);
            let ys = fr.lu.solve(&xs);
            let upd = &fr.fbs * &ys;
            for (l, &g) in fr.sep.iter().enumerate() {
                for c in 0..r {
                    x[(g, c)] = ys[(l, c)];
                }
            }
            for (l, &g) in fr.bnd.iter().enumerate() {
                for c in 0..r {
                    x[(g, c)] -= upd[(l, c)];
                }
            }
        }
        for fr in self.fronts.iter().rev() {
            if fr.bnd.is_empty() {
                continue;
            }
            let xb = Mat::<f64>::from_fn(fr.bnd.len(), r, |l, c| x[(fr.bnd[l], c)]);
            let corr = fr.lu.solve(fr.fbs.transpose() * &xb);
            for (l, &g) in fr.sep.iter().enumerate() {
                for c in 0..r {
                    x[(g, c)] -= corr[(l, c)];
                }
            }
        }
    }

    pub fn solve(&self, rhs: &Mat<f64>) -> Mat<f64> {
        let mut x = rhs.clone();
        self.solve_in_place(x.as_mut());
        x
    }
}

/// `y = A x` for the operator described in [`GridFactorization::new`].
pub fn apply_grid_operator(n: usize, diag: &[f64], coupling: f64, x: &[f64], y: &mut [f64]) {
    let nn = n * n;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let p = i * nn + j * n + k;
                let mut s = 0.0;
                if i > 0 {
                    s += x[p - nn];
                }
                if i + 1 < n {
                    s += x[p + nn];
                }
                if j > 0 {
                    s += x[p - n];
                }
                if j + 1 < n {
                    s += x[p + n];
                }
                if k > 0 {
                    s += x[p - 1];
                }
                if k + 1 < n {
                    s += x[p + 1];
                }
                y[p] = diag[p] * x[p] + coupling * s;
            }
        }
    }
}
