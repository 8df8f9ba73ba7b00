//! Dense system assembly for every formulation: the global matrix with a
//! cross-interface coefficient, the constant-coefficient subdomain blocks,
//! the interface coupling, the bordered and block-diagonal systems, the
//! local tridiagonal matrix, and the load vectors.
//!
//! Node indices are 1-based (`1..=N_h`) in the public API; matrix row `r`
//! stores node `r + 1`.

use crate::csvfmt::format_g17;
use crate::error::{Error, Result};
use crate::kernel::{
    bicher_entry, eval_h_family, fractional_constant, unit_half_hat_tail, unit_l1, unit_l2, unit_s1, unit_s2,
    KernelParams, KernelValueSet,
};
use crate::lifting::{alpha1, alpha2_closed_form, exterior_integrals, FractionalLifting, Lifting};
use crate::mesh::InterfaceMesh;
use crate::problem::{CoefficientField, SourceTerm};
use crate::quadrature::{integrate, integrate_graded_both};
use rayon::prelude::*;
use std::io::Write;

/// Largest dense order assembled (512 MiB of storage).
pub const MAX_DENSE_ORDER: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Old,
    Bordered,
    BlockDiag,
    LocalTridiag,
    Subdomain,
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StiffnessMatrix {
    order: usize,
    data: Vec<f64>,
    kind: MatrixKind,
}

impl StiffnessMatrix {
    pub fn zeros(order: usize, kind: MatrixKind) -> Result<Self> {
        if order > MAX_DENSE_ORDER {
            return Err(Error::Capacity { cells: order as u128 + 1, max: MAX_DENSE_ORDER + 1 });
        }
        Ok(Self { order, data: vec![0.0; order * order], kind })
    }

    pub fn from_rows(rows: &[Vec<f64>], kind: MatrixKind) -> Result<Self> {
        let order = rows.len();
        if rows.iter().any(|r| r.len() != order) {
            return Err(Error::config("matrix rows must form a square array"));
        }
        Ok(Self { order, data: rows.concat(), kind })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.order + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.order + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.order..(r + 1) * self.order]
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.order).map(|r| self.row(r).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `max |a_ij - a_ji| / max |a_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.order;
        let mut d = 0.0f64;
        for r in 0..n {
            for c in r + 1..n {
                d = d.max((self.get(r, c) - self.get(c, r)).abs());
            }
        }
        let m = self.max_abs();
        if m == 0.0 {
            0.0
        } else {
            d / m
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.order);
        (0..self.order).map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Upper triangle copied onto the lower one.
    fn mirror_upper(&mut self) {
        let n = self.order;
        for r in 1..n {
            for c in 0..r {
                self.data[r * n + c] = self.data[c * n + r];
            }
        }
    }

    /// One row per line, comma separated, `%.17g` formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in 0..self.order {
            let line: Vec<String> = self.row(r).iter().map(|&v| format_g17(v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Which closed-form case produced a global-matrix entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntryCase {
    DiagAtInterface,
    DiagLeftNeighbour,
    DiagRightNeighbour,
    DiagRight,
    DiagLeft,
    SuperFromInterface,
    SuperToInterface,
    SuperRight,
    SuperLeft,
    FarFromInterface,
    FarToInterface,
    FarSeparated,
}

impl EntryCase {
    pub fn classify(mesh: &InterfaceMesh, i: usize, j: usize) -> Self {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let m = mesh.m();
        match j - i {
            0 if i == m => EntryCase::DiagAtInterface,
            0 if i + 1 == m => EntryCase::DiagLeftNeighbour,
            0 if i == m + 1 => EntryCase::DiagRightNeighbour,
            0 if i > m => EntryCase::DiagRight,
            0 => EntryCase::DiagLeft,
            1 if i == m => EntryCase::SuperFromInterface,
            1 if j == m => EntryCase::SuperToInterface,
            1 if i > m => EntryCase::SuperRight,
            1 => EntryCase::SuperLeft,
            _ if i == m => EntryCase::FarFromInterface,
            _ if j == m => EntryCase::FarToInterface,
            _ => EntryCase::FarSeparated,
        }
    }

    pub fn class_name(&self) -> &'static str {
        use EntryCase::*;
        match self {
            DiagAtInterface | DiagLeftNeighbour | DiagRightNeighbour | DiagRight | DiagLeft => "diag-5-cases",
            SuperFromInterface | SuperToInterface | SuperRight | SuperLeft => "superdiag-4-cases",
            FarFromInterface | FarToInterface | FarSeparated => "far-3-cases",
        }
    }
}

/// Precomputed kernel values for one `(mesh, s)` pair.
struct KernelTables {
    n: usize,
    m: usize,
    hf: KernelValueSet,
    s1: Vec<f64>,
    s2: Vec<f64>,
    tail: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
}

impl KernelTables {
    fn new(mesh: &InterfaceMesh, s: f64) -> Result<Self> {
        let p = KernelParams::new(mesh.h(), s)?;
        let n = mesh.n_cells();
        let c = p.scale();
        let table = |from: usize, f: &(dyn Fn(usize) -> f64 + Sync)| -> Vec<f64> {
            (0..=n).into_par_iter().map(|k| if k < from { f64::NAN } else { c * f(k) }).collect()
        };
        Ok(Self {
            n,
            m: mesh.m(),
            hf: eval_h_family(&p),
            s1: table(2, &|k| unit_s1(&p, k as f64)),
            s2: table(2, &|k| unit_s2(&p, k as f64)),
            tail: table(1, &|k| unit_half_hat_tail(&p, k as f64)),
            l1: table(2, &|k| unit_l1(&p, k)),
            l2: table(2, &|k| unit_l2(&p, k)),
        })
    }

    /// Entry `(i, j)`, `i <= j`, of the global form without the `C(s)/2` factor.
    ///
    /// The closed forms treat every pair on opposite sides of `b` (including
    /// points outside `(0, 1)`) with `σ3`; the exterior terms below switch the
    /// pairs (left subinterval, `x > 1`) to `σ1` and (right subinterval, `x < 0`)
    /// to `σ2`.
    fn entry(&self, sg: &CoefficientField, i: usize, j: usize) -> f64 {
        let (s1, s2, s3) = (sg.sigma1, sg.sigma2, sg.sigma3);
        let (n, m, v) = (self.n, self.m, &self.hf);
        match j - i {
            0 => {
                let base = if i == m {
                    (s1 + s2) * (v.h1 + v.h3) + 2.0 * s3 * (v.h2 + v.h4)
                } else if i + 1 == m {
                    (s1 + s3) * (v.h1 + v.h2) + 2.0 * s1 * (v.h3 + v.h4)
                } else if i == m + 1 {
                    (s2 + s3) * (v.h1 + v.h2) + 2.0 * s2 * (v.h3 + v.h4)
                } else if i > m {
                    2.0 * s2 * v.sum_h1_to_h4() + (s3 - s2) * self.s1[i - m]
                } else {
                    2.0 * s1 * v.sum_h1_to_h4() + (s3 - s1) * self.s1[m - i]
                };
                let exterior = if i == m {
                    (s1 - s3) * self.tail[n - m] + (s2 - s3) * self.tail[m]
                } else if i < m {
                    (s1 - s3) * self.s1[n - i]
                } else {
                    (s2 - s3) * self.s1[i]
                };
                base + exterior
            }
            1 => {
                let interior = -v.h3 + 2.0 * v.h5 + 2.0 * v.h6 + v.h7;
                let base = if i == m {
                    -s2 * v.h3 + (s2 + s3) * (v.h5 + v.h6) + s3 * v.h7
                } else if j == m {
                    -s1 * v.h3 + (s1 + s3) * (v.h5 + v.h6) + s3 * v.h7
                } else if i > m {
                    s2 * interior - (s3 - s2) * self.s2[j - m]
                } else {
                    s1 * interior - (s3 - s1) * self.s2[m - i]
                };
                let exterior = if j <= m { -(s1 - s3) * self.s2[n - i] } else { -(s2 - s3) * self.s2[j] };
                base + exterior
            }
            k => {
                if i == m {
                    s3 * self.l1[k] + s2 * self.l2[k]
                } else if j == m {
                    s3 * self.l1[k] + s1 * self.l2[k]
                } else {
                    let sh = if j < m {
                        s1
                    } else if i > m {
                        s2
                    } else {
                        s3
                    };
                    sh * (self.l1[k] + self.l2[k])
                }
            }
        }
    }
}

/// Global matrix `(C(s)/2)·B` of the form with coefficients `(σ1, σ2, σ3)`.
pub fn assemble_old(mesh: &InterfaceMesh, coeff: &CoefficientField, s: f64) -> Result<StiffnessMatrix> {
    let n = mesh.n_interior();
    let mut out = StiffnessMatrix::zeros(n, MatrixKind::Old)?;
    let tables = KernelTables::new(mesh, s)?;
    let half_c = 0.5 * fractional_constant(s)?;
    out.data.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
        for c in r..n {
            row[c] = half_c * tables.entry(coeff, r + 1, c + 1);
        }
    });
    out.mirror_upper();
    Ok(out)
}

/// Single global-matrix entry for nodes `i`, `j` (1-based).
pub fn old_entry(mesh: &InterfaceMesh, coeff: &CoefficientField, s: f64, i: usize, j: usize) -> Result<f64> {
    let n = mesh.n_interior();
    if i == 0 || j == 0 || i > n || j > n {
        return Err(Error::domain(format!("node pair ({i}, {j}) outside 1..={n}")));
    }
    let tables = KernelTables::new(mesh, s)?;
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    Ok(0.5 * fractional_constant(s)? * tables.entry(coeff, i, j))
}

/// `(C(s)/2)·bicher(k)` for `k = 0..len`.
pub fn toeplitz_symbol(h: f64, s: f64, len: usize) -> Result<Vec<f64>> {
    let p = KernelParams::new(h, s)?;
    let half_c = 0.5 * fractional_constant(s)?;
    Ok((0..len).into_par_iter().map(|k| half_c * bicher_entry(&p, k)).collect())
}

fn toeplitz(symbol: &[f64], scale: f64, kind: MatrixKind) -> Result<StiffnessMatrix> {
    let n = symbol.len();
    let mut out = StiffnessMatrix::zeros(n, kind)?;
    out.data.par_chunks_mut(n.max(1)).enumerate().for_each(|(r, row)| {
        for (c, v) in row.iter_mut().enumerate() {
            *v = scale * symbol[r.abs_diff(c)];
        }
    });
    Ok(out)
}

/// Which side of the interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subdomain {
    Left,
    Right,
}

impl Subdomain {
    pub fn size(&self, mesh: &InterfaceMesh) -> usize {
        match self {
            Subdomain::Left => mesh.m() - 1,
            Subdomain::Right => mesh.n_interior() - mesh.m(),
        }
    }
}

/// Constant-coefficient fractional matrix over the interior nodes of one
/// subinterval, with zero exterior data outside that subinterval.
pub fn assemble_subdomain(mesh: &InterfaceMesh, side: Subdomain, sigma: f64, s: f64) -> Result<StiffnessMatrix> {
    let size = side.size(mesh);
    if size == 0 {
        return Err(Error::config(format!("{side:?} subdomain has no interior node")));
    }
    toeplitz(&toeplitz_symbol(mesh.h(), s, size)?, sigma, MatrixKind::Subdomain)
}

/// Energy `a(φˢ, φˢ)` of the fractional lifting with `σ3 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceEnergy {
    pub value: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Same quantity with `|σ1|`, `|σ2|`, the reference for degeneracy.
    pub scale: f64,
}

pub fn interface_energy(b: f64, sigma1: f64, sigma2: f64, s: f64) -> Result<InterfaceEnergy> {
    let l = FractionalLifting::new(b, s)?;
    let a1 = alpha1(&l, sigma1, sigma2)?;
    let a2 = alpha2_closed_form(b, sigma1, sigma2, s)?;
    let (e1, e2) = exterior_integrals(&l);
    let c = fractional_constant(s)?;
    let scale = c * (sigma1.abs() * e1 + sigma2.abs() * e2)
        + alpha2_closed_form(b, sigma1.abs(), 0.0, s)?
        + alpha2_closed_form(b, 0.0, sigma2.abs(), s)?;
    Ok(InterfaceEnergy { value: a1 + a2, alpha1: a1, alpha2: a2, scale })
}

/// `a(φˢ, φˢ)`, rejecting a (numerically) vanishing value.
pub fn c_star(b: f64, sigma1: f64, sigma2: f64, s: f64) -> Result<f64> {
    let e = interface_energy(b, sigma1, sigma2, s)?;
    let threshold = 1e-10 * e.scale;
    if e.value.abs() < threshold {
        return Err(Error::Solvability { value: e.value.abs(), threshold });
    }
    Ok(e.value)
}

/// Coupling between the hat basis and the interface lifting.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    /// `D_i` for node `i = r + 1`; the interface slot holds 0.
    pub d: Vec<f64>,
    /// Quadratic form of the interpolated lifting.
    pub c_h: f64,
    pub c_star: f64,
}

pub fn coupling_vector_and_scalars(
    mesh: &InterfaceMesh,
    coeff: &CoefficientField,
    s: f64,
    interpolant: &[f64],
) -> Result<Coupling> {
    if coeff.sigma3 != 0.0 {
        return Err(Error::config("the interface coupling is defined for sigma3 = 0"));
    }
    if interpolant.len() != mesh.n_interior() {
        return Err(Error::config("interpolant length differs from the number of interior nodes"));
    }
    let a = assemble_old(mesh, coeff, s)?;
    let mut d = a.matvec(interpolant);
    let c_h = d.iter().zip(interpolant).map(|(x, y)| x * y).sum();
    d[mesh.m() - 1] = 0.0;
    let c_star = c_star(mesh.b_value(), coeff.sigma1, coeff.sigma2, s)?;
    Ok(Coupling { d, c_h, c_star })
}

fn bordered(mesh: &InterfaceMesh, coeff: &CoefficientField, s: f64, d: Option<&[f64]>, c_star: f64) -> Result<StiffnessMatrix> {
    let n = mesh.n_interior();
    let m = mesh.m() - 1;
    let kind = if d.is_some() { MatrixKind::Bordered } else { MatrixKind::BlockDiag };
    let mut out = StiffnessMatrix::zeros(n, kind)?;
    let symbol = toeplitz_symbol(mesh.h(), s, n)?;
    out.data.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
        if r == m {
            return;
        }
        let sigma = if r < m { coeff.sigma1 } else { coeff.sigma2 };
        let cols = if r < m { 0..m } else { m + 1..n };
        for c in cols {
            row[c] = sigma * symbol[r.abs_diff(c)];
        }
    });
    if let Some(d) = d {
        for r in 0..n {
            if r != m {
                out.set(r, m, d[r]);
                out.set(m, r, d[r]);
            }
        }
    }
    out.set(m, m, c_star);
    Ok(out)
}

/// `[A1 0 D1; 0 A2 D2; D1ᵀ D2ᵀ c*]` with the interface unknown at row `M`.
pub fn assemble_bordered(mesh: &InterfaceMesh, coeff: &CoefficientField, s: f64) -> Result<StiffnessMatrix> {
    let l = FractionalLifting::new(mesh.b_value(), s)?;
    let iota = crate::lifting::interpolant_coeffs(mesh, &l)?;
    let cp = coupling_vector_and_scalars(mesh, coeff, s, &iota)?;
    bordered(mesh, coeff, s, Some(&cp.d), cp.c_star)
}

/// The bordered matrix with the coupling removed.
pub fn assemble_block_diag(mesh: &InterfaceMesh, coeff: &CoefficientField, s: f64) -> Result<StiffnessMatrix> {
    if coeff.sigma3 != 0.0 {
        return Err(Error::config("the block-diagonal system is defined for sigma3 = 0"));
    }
    let cs = c_star(mesh.b_value(), coeff.sigma1, coeff.sigma2, s)?;
    bordered(mesh, coeff, s, None, cs)
}

/// P1 matrix of `∫ σ u' v'` with `σ1` left and `σ2` right of the interface.
pub fn assemble_local(mesh: &InterfaceMesh, coeff: &CoefficientField) -> Result<StiffnessMatrix> {
    let n = mesh.n_interior();
    let m = mesh.m();
    let h = mesh.h();
    let cell_sigma = |cell: usize| if cell < m { coeff.sigma1 } else { coeff.sigma2 };
    let mut out = StiffnessMatrix::zeros(n, MatrixKind::LocalTridiag)?;
    for r in 0..n {
        let node = r + 1;
        out.set(r, r, (cell_sigma(node - 1) + cell_sigma(node)) / h);
        if r + 1 < n {
            let v = -cell_sigma(node) / h;
            out.set(r, r + 1, v);
            out.set(r + 1, r, v);
        }
    }
    Ok(out)
}

/// What the interface entry of a load vector integrates against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterfaceRole {
    HatBasis,
    Lifting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadVector {
    pub entries: Vec<f64>,
    pub interface_role: InterfaceRole,
}

const EXACT_LOAD_NODES: usize = 8;

/// `∫ f φ_j` for `j = 1..=N_h`.
pub fn hat_loads(mesh: &InterfaceMesh, f: &SourceTerm) -> Vec<f64> {
    let a = f.alpha();
    let h = mesh.h();
    (1..=mesh.n_interior())
        .into_par_iter()
        .map(|j| {
            let (xl, xc, xr) = (mesh.node(j - 1), mesh.node(j), mesh.node(j + 1));
            if j <= EXACT_LOAD_NODES {
                let g = |x: f64| x.powf(a + 2.0);
                (g(xr) - 2.0 * g(xc) + g(xl)) / (h * (a + 1.0) * (a + 2.0))
            } else {
                integrate(xl, xc, 8, |x| f.eval(x) * (x - xl) / h) + integrate(xc, xr, 8, |x| f.eval(x) * (xr - x) / h)
            }
        })
        .collect()
}

pub fn hat_load_vector(mesh: &InterfaceMesh, f: &SourceTerm) -> LoadVector {
    LoadVector { entries: hat_loads(mesh, f), interface_role: InterfaceRole::HatBasis }
}

/// Hat loads with the interface entry replaced by `∫ f φˢ`.
pub fn bordered_load_vector(mesh: &InterfaceMesh, f: &SourceTerm, l: &FractionalLifting) -> LoadVector {
    let mut entries = hat_loads(mesh, f);
    entries[mesh.m() - 1] = lifting_load(f, l);
    LoadVector { entries, interface_role: InterfaceRole::Lifting }
}

/// `∫_0^1 f φˢ`: exact on the left, graded Gauss on the right.
pub fn lifting_load(f: &SourceTerm, l: &FractionalLifting) -> f64 {
    let (a, b, s) = (f.alpha(), l.b(), l.s());
    let left = b.powf(a + 1.0) / (a + s + 1.0);
    let right = integrate_graded_both(1.0 - b, 40, 7, |d, db| f.eval(b + db) * l.right(d));
    left + right
}

/// `∫_0^1 f φ` for the local lifting.
pub fn local_lifting_load(f: &SourceTerm, b: f64) -> f64 {
    let a = f.alpha();
    b.powf(a + 1.0) / (a + 2.0)
        + ((1.0 - b.powf(a + 1.0)) / (a + 1.0) - (1.0 - b.powf(a + 2.0)) / (a + 2.0)) / (1.0 - b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, RationalInterface};

    fn mesh(p: u64, q: u64, k: u32) -> InterfaceMesh {
        build_mesh(RationalInterface::new(p, q).unwrap(), k).unwrap()
    }

    fn cf(a: f64, b: f64, c: f64) -> CoefficientField {
        CoefficientField::new(a, b, c).unwrap()
    }

    #[test]
    fn constant_coefficients_reduce_to_toeplitz() {
        for s in [0.5, 0.6, 0.75, 0.9] {
            for (p, q, k) in [(1, 2, 3), (3, 4, 2), (1, 2, 5)] {
                let me = mesh(p, q, k);
                let a = assemble_old(&me, &cf(1.0, 1.0, 1.0), s).unwrap();
                let sym = toeplitz_symbol(me.h(), s, me.n_interior()).unwrap();
                let scale = a.max_abs();
                for r in 0..a.order() {
                    for c in 0..a.order() {
                        let d = (a.get(r, c) - sym[r.abs_diff(c)]).abs();
                        assert!(d <= 1e-12 * scale, "s={s} ({r},{c}) {d:e}");
                    }
                }
            }
        }
    }

    #[test]
    fn cross_entries_vanish_without_cross_coefficient() {
        let me = mesh(1, 2, 3);
        let a = assemble_old(&me, &cf(1.0, -1.0, 0.0), 0.75).unwrap();
        let m = me.m();
        for i in 1..m {
            for j in m + 1..=me.n_interior() {
                if j - i >= 2 {
                    assert_eq!(a.get(i - 1, j - 1), 0.0);
                }
            }
        }
    }

    #[test]
    fn symmetric_and_linear() {
        let me = mesh(3, 4, 3);
        let s = 0.7;
        let a = assemble_old(&me, &cf(1.0, -0.5, 0.25), s).unwrap();
        let b = assemble_old(&me, &cf(2.0, 3.0, -1.0), s).unwrap();
        let ab = assemble_old(&me, &cf(3.0, 2.5, -0.75), s).unwrap();
        assert!(a.symmetry_defect() < 1e-12);
        let scale = ab.max_abs();
        for (x, (y, z)) in ab.as_slice().iter().zip(a.as_slice().iter().zip(b.as_slice())) {
            assert!((x - y - z).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn subdomain_is_linear_in_sigma() {
        let me = mesh(1, 2, 4);
        let a = assemble_subdomain(&me, Subdomain::Left, 1.0, 0.8).unwrap();
        let b = assemble_subdomain(&me, Subdomain::Left, -1.0, 0.8).unwrap();
        assert_eq!(a.order(), 15);
        assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| *x == -*y));
        let tiny = mesh(1, 2, 0);
        assert!(assemble_subdomain(&tiny, Subdomain::Right, 1.0, 0.8).is_err());
    }

    #[test]
    fn local_matrix() {
        let me = mesh(1, 2, 1);
        let a = assemble_local(&me, &cf(1.0, 1.0, 0.0)).unwrap();
        assert_eq!((a.get(0, 0), a.get(0, 1), a.get(1, 1)), (8.0, -4.0, 8.0));
        let b = assemble_local(&me, &cf(1.0, -0.5, 0.0)).unwrap();
        assert_eq!(b.get(1, 1), (1.0 - 0.5) / 0.25);
        assert_eq!(b.symmetry_defect(), 0.0);
    }

    #[test]
    fn bordered_structure() {
        let me = mesh(1, 2, 3);
        let c = cf(1.0, -0.5, 0.0);
        let s = 0.75;
        let k = assemble_bordered(&me, &c, s).unwrap();
        let kd = assemble_block_diag(&me, &c, s).unwrap();
        let m = me.m() - 1;
        assert_eq!(k.order(), me.n_interior());
        assert!(k.symmetry_defect() < 1e-12);
        assert_eq!(kd.get(m, m), c_star(0.5, 1.0, -0.5, s).unwrap());
        for r in 0..k.order() {
            for col in 0..k.order() {
                if r != m && col != m {
                    assert_eq!(k.get(r, col), kd.get(r, col));
                    if (r < m) != (col < m) {
                        assert_eq!(kd.get(r, col), 0.0);
                    }
                } else if r != col {
                    assert_eq!(kd.get(r, col), 0.0);
                }
            }
        }
        let a1 = assemble_subdomain(&me, Subdomain::Left, 1.0, s).unwrap();
        for r in 0..m {
            for col in 0..m {
                assert_eq!(kd.get(r, col), a1.get(r, col));
            }
        }
    }

    #[test]
    fn loads_constant_source() {
        let me = mesh(1, 2, 5);
        let f = SourceTerm::monomial(0.0).unwrap();
        for v in hat_loads(&me, &f) {
            assert!((v - me.h()).abs() < 1e-15);
        }
        let l = FractionalLifting::new(0.5, 0.7).unwrap();
        assert!((lifting_load(&f, &l) - 1.0 / 1.7).abs() < 1e-13);
        assert!((local_lifting_load(&f, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn loads_linear_source() {
        let me = mesh(3, 4, 3);
        let f = SourceTerm::monomial(1.0).unwrap();
        for (j, v) in hat_loads(&me, &f).iter().enumerate() {
            let x = me.node(j + 1);
            assert!((v - me.h() * x).abs() < 1e-15, "{j}");
        }
    }

    #[test]
    fn loads_fractional_exponent() {
        let me = mesh(1, 2, 6);
        let f = SourceTerm::monomial(-0.3).unwrap();
        let loads = hat_loads(&me, &f);
        let a = -0.3;
        for j in [1, 8, 9, 40, 127] {
            let g = |x: f64| x.powf(a + 2.0);
            let (h, x) = (me.h(), me.node(j));
            let exact = (g(x + h) - 2.0 * g(x) + g(x - h)) / (h * (a + 1.0) * (a + 2.0));
            assert!((loads[j - 1] - exact).abs() < 1e-11 * exact, "{j}");
        }
    }

    #[test]
    fn interface_energy_limit() {
        let g1 = (c_star(0.5, 1.0, 1.0, 0.99).unwrap() - 4.0).abs();
        let g2 = (c_star(0.5, 1.0, 1.0, 0.999).unwrap() - 4.0).abs();
        assert!(g1 / g2 > 7.0 && g1 / g2 < 13.0, "{g1} {g2}");
    }

    #[test]
    fn entry_cases() {
        let me = mesh(1, 2, 3);
        assert_eq!(EntryCase::classify(&me, 8, 8), EntryCase::DiagAtInterface);
        assert_eq!(EntryCase::classify(&me, 7, 7), EntryCase::DiagLeftNeighbour);
        assert_eq!(EntryCase::classify(&me, 9, 8), EntryCase::SuperFromInterface);
        assert_eq!(EntryCase::classify(&me, 2, 8), EntryCase::FarToInterface);
        assert_eq!(EntryCase::classify(&me, 2, 12).class_name(), "far-3-cases");
    }

    #[test]
    fn csv_rows() {
        let a = StiffnessMatrix::from_rows(&[vec![1.0, 0.1], vec![0.1, 2.0]], MatrixKind::Old).unwrap();
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1,0.10000000000000001\n0.10000000000000001,2\n");
    }
}
