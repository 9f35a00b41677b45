//! Spectral projections from an ordered real Schur form.
//!
//! The Schur factorization itself comes from `nalgebra`; block classification,
//! reordering by adjacent swaps and block-diagonalization through Sylvester
//! solves are done here. Everything runs in `f64`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Spectral group of an eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Group {
    Center = 0,
    Stable = 1,
    Unstable = 2,
}

#[derive(Clone, Debug)]
pub struct Eigen {
    pub re: f64,
    pub im: f64,
    pub group: Group,
}

/// Projections onto the center, stable and unstable invariant subspaces.
#[derive(Clone, Debug)]
pub struct SpectralProjections {
    pub eigenvalues: Vec<Eigen>,
    pub pc: Mat<f64>,
    pub ps: Mat<f64>,
    pub pu: Mat<f64>,
    /// Orthogonal Schur vectors of the reordered form (center, stable, unstable).
    pub schur_vectors: Mat<f64>,
    pub schur_form: Mat<f64>,
}

pub fn classify(re: f64, center_tol: f64) -> Group {
    if re.abs() <= center_tol {
        Group::Center
    } else if re < 0.0 {
        Group::Stable
    } else {
        Group::Unstable
    }
}

fn to_na(m: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

fn from_na(m: &DMatrix<f64>) -> Mat<f64> {
    let mut out = Mat::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[(i, j)] = m[(i, j)];
        }
    }
    out
}

/// Solve `A X - X B = C` through the Kronecker form (small blocks only).
pub fn sylvester(a: &Mat<f64>, b: &Mat<f64>, c: &Mat<f64>) -> Result<Mat<f64>> {
    let (p, q) = (a.rows(), b.rows());
    let mut k = Mat::zeros(p * q, p * q);
    // column-major vec: X[i, j] -> j*p + i
    for j in 0..q {
        for i in 0..p {
            let row = j * p + i;
            for l in 0..p {
                k[(row, j * p + l)] += a[(i, l)];
            }
            for l in 0..q {
                k[(row, l * p + i)] -= b[(l, j)];
            }
        }
    }
    let mut rhs = Mat::zeros(p * q, 1);
    for j in 0..q {
        for i in 0..p {
            rhs[(j * p + i, 0)] = c[(i, j)];
        }
    }
    let v = k.solve(&rhs).map_err(|_| {
        Error::NumericalFailure("Sylvester equation is singular (blocks share eigenvalues)".into())
    })?;
    let mut x = Mat::zeros(p, q);
    for j in 0..q {
        for i in 0..p {
            x[(i, j)] = v[(j * p + i, 0)];
        }
    }
    Ok(x)
}

struct Block {
    start: usize,
    size: usize,
    re: f64,
    im: f64,
}

fn blocks_of(t: &Mat<f64>) -> Vec<Block> {
    let n = t.rows();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let two = i + 1 < n && t[(i + 1, i)] != 0.0;
        if two {
            let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
            let half_tr = 0.5 * (a + d);
            let disc = 0.25 * (a - d) * (a - d) + b * c;
            out.push(Block { start: i, size: 2, re: half_tr, im: (-disc).max(0.0).sqrt() });
            i += 2;
        } else {
            out.push(Block { start: i, size: 1, re: t[(i, i)], im: 0.0 });
            i += 1;
        }
    }
    out
}

/// Apply `diag(I, G, I)` with `G` acting on rows/cols `p..p+g.rows()`:
/// `T <- Gᵀ T G`, `Z <- Z G`.
fn apply_orthogonal(t: &mut Mat<f64>, z: &mut Mat<f64>, p: usize, g: &Mat<f64>) {
    let n = t.rows();
    let m = g.rows();
    let gt = g.transpose();
    let rows = t.block(p, 0, m, n);
    t.set_block(p, 0, &(&gt * &rows));
    let cols = t.block(0, p, n, m);
    t.set_block(0, p, &(&cols * g));
    let zc = z.block(0, p, n, m);
    z.set_block(0, p, &(&zc * g));
}

/// Split 2x2 blocks with real eigenvalues into two 1x1 blocks.
fn standardize_real_pairs(t: &mut Mat<f64>, z: &mut Mat<f64>) {
    let n = t.rows();
    let mut i = 0;
    while i + 1 < n {
        if t[(i + 1, i)] == 0.0 {
            i += 1;
            continue;
        }
        let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
        let disc = 0.25 * (a - d) * (a - d) + b * c;
        if disc >= 0.0 {
            let lam = 0.5 * (a + d) + disc.sqrt().copysign(0.5 * (a - d) + f64::MIN_POSITIVE);
            // eigenvector of [[a,b],[c,d]] for lam
            let (vx, vy) = if (lam - d).hypot(c) >= b.hypot(lam - a) { (lam - d, c) } else { (b, lam - a) };
            let r = vx.hypot(vy);
            let (cs, sn) = (vx / r, vy / r);
            let g = Mat::from_vec(2, 2, vec![cs, -sn, sn, cs]).unwrap();
            apply_orthogonal(t, z, i, &g);
            t[(i + 1, i)] = 0.0;
            i += 2;
        } else {
            i += 2;
        }
    }
}

/// Swap adjacent diagonal blocks `[p, p+s1)` and `[p+s1, p+s1+s2)`.
fn swap_blocks(t: &mut Mat<f64>, z: &mut Mat<f64>, p: usize, s1: usize, s2: usize) -> Result<()> {
    let t11 = t.block(p, p, s1, s1);
    let t22 = t.block(p + s1, p + s1, s2, s2);
    let t12 = t.block(p, p + s1, s1, s2);
    let x = sylvester(&t11, &t22, &t12)?;
    // columns of [-X; I] span the invariant subspace of the trailing block
    let m = s1 + s2;
    let mut k = Mat::zeros(m, m);
    for i in 0..s1 {
        for j in 0..s2 {
            k[(i, j)] = -x[(i, j)];
        }
        k[(i, s2 + i)] = 1.0;
    }
    for j in 0..s2 {
        k[(s1 + j, j)] = 1.0;
    }
    let q = from_na(&to_na(&k).qr().q());
    apply_orthogonal(t, z, p, &q);
    for i in 0..s1 {
        for j in 0..s2 {
            t[(p + s2 + i, p + j)] = 0.0;
        }
    }
    Ok(())
}

/// Projector onto the leading `k` Schur coordinates along the trailing ones,
/// in the original basis.
fn leading_projector(t: &Mat<f64>, z: &Mat<f64>, k: usize) -> Result<Mat<f64>> {
    let n = t.rows();
    if k == 0 {
        return Ok(Mat::zeros(n, n));
    }
    if k == n {
        return Ok(Mat::identity(n));
    }
    let t11 = t.block(0, 0, k, k);
    let t22 = t.block(k, k, n - k, n - k);
    let t12 = t.block(0, k, k, n - k);
    let y = sylvester(&t11, &t22, &t12.scale(-1.0))?;
    let mut p = Mat::zeros(n, n);
    for i in 0..k {
        p[(i, i)] = 1.0;
        for j in 0..n - k {
            p[(i, k + j)] = -y[(i, j)];
        }
    }
    Ok(&(z * &p) * &z.transpose())
}

/// Ordered Schur decomposition and the center/stable/unstable projections.
pub fn spectral_projections(a: &Mat<f64>, center_tol: f64) -> Result<SpectralProjections> {
    let n = a.rows();
    if !a.is_square() || n == 0 {
        return Err(Error::InvalidArgument("spectral split needs a nonempty square matrix".into()));
    }
    if a.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericalFailure("matrix has non-finite entries".into()));
    }
    let schur = nalgebra::linalg::Schur::new(to_na(a));
    let (zq, tq) = schur.unpack();
    let mut t = from_na(&tq);
    let mut z = from_na(&zq);
    standardize_real_pairs(&mut t, &mut z);
    // bubble blocks into center | stable | unstable order
    loop {
        let blocks = blocks_of(&t);
        let mut swapped = false;
        for w in blocks.windows(2) {
            let g0 = classify(w[0].re, center_tol);
            let g1 = classify(w[1].re, center_tol);
            if g0 > g1 {
                swap_blocks(&mut t, &mut z, w[0].start, w[0].size, w[1].size)?;
                standardize_real_pairs(&mut t, &mut z);
                swapped = true;
                break;
            }
        }
        if !swapped {
            break;
        }
    }
    let blocks = blocks_of(&t);
    let mut eigenvalues = Vec::with_capacity(n);
    let (mut nc, mut ncs) = (0, 0);
    for b in &blocks {
        let g = classify(b.re, center_tol);
        if g == Group::Center {
            nc += b.size;
        }
        if g != Group::Unstable {
            ncs += b.size;
        }
        if b.size == 1 {
            eigenvalues.push(Eigen { re: b.re, im: 0.0, group: g });
        } else {
            eigenvalues.push(Eigen { re: b.re, im: b.im, group: g });
            eigenvalues.push(Eigen { re: b.re, im: -b.im, group: g });
        }
    }
    let pc = leading_projector(&t, &z, nc)?;
    let pcs = leading_projector(&t, &z, ncs)?;
    let ps = &pcs - &pc;
    let pu = &Mat::identity(n) - &pcs;
    Ok(SpectralProjections { eigenvalues, pc, ps, pu, schur_vectors: z, schur_form: t })
}
