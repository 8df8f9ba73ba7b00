//! Dense solves and the end-to-end runners for every model.

use crate::assembly::{
    assemble_bordered, assemble_local, assemble_old, assemble_subdomain, bordered_load_vector, c_star, hat_loads,
    lifting_load, StiffnessMatrix, Subdomain,
};
use crate::csvfmt::format_g17;
use crate::error::{Error, Result};
use crate::exact::{build_exact, check_contrast, LocalExactSolution};
use crate::lifting::{FractionalLifting, Lifting};
use crate::mesh::InterfaceMesh;
use crate::problem::{ModelKind, ProblemConfig};
use nalgebra::{DMatrix, DVector};
use std::io::Write;

/// Samples per cell in the exported curve of a reconstructed solution.
pub const OVERSAMPLING: usize = 10;

/// Solves `A x = rhs` by LU with row pivoting.
pub fn lu_solve(a: &StiffnessMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.order();
    if rhs.len() != n {
        return Err(Error::config(format!("right-hand side has length {}, matrix order is {n}", rhs.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let norm = a.norm_inf();
    let threshold = 1e-14 * norm;
    let m = DMatrix::from_row_slice(n, n, a.as_slice());
    let lu = m.lu();
    let pivot = lu.u().diagonal().iter().fold(f64::INFINITY, |p, v| p.min(v.abs()));
    if !(pivot > threshold) {
        return Err(Error::Singular { pivot, threshold });
    }
    let x = lu
        .solve(&DVector::from_column_slice(rhs))
        .ok_or(Error::Singular { pivot, threshold })?;
    let x: Vec<f64> = x.iter().copied().collect();
    let residual = a.matvec(&x).iter().zip(rhs).fold(0.0f64, |r, (ax, b)| r.max((ax - b).abs()));
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let bound = 1e-10 * (norm * inf(&x) + inf(rhs));
    if !(residual <= bound) {
        return Err(Error::Residual { residual, bound });
    }
    Ok(x)
}

/// Discrete solution of one model on one mesh.
#[derive(Debug, Clone)]
pub struct ModelSolution {
    kind: ModelKind,
    n_cells: usize,
    m: usize,
    /// Coefficients of the interior hats; the interface slot is 0 for the
    /// reconstructed kinds.
    hat_coeffs: Vec<f64>,
    interface_value: f64,
    lifting: Option<FractionalLifting>,
    exact: Option<LocalExactSolution>,
}

impl ModelSolution {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    pub fn b(&self) -> f64 {
        self.m as f64 / self.n_cells as f64
    }

    pub fn interface_value(&self) -> f64 {
        self.interface_value
    }

    pub fn hat_coeffs(&self) -> &[f64] {
        &self.hat_coeffs
    }

    pub fn lifting(&self) -> Option<&FractionalLifting> {
        self.lifting.as_ref()
    }

    /// Values at the interior nodes `x_1, …, x_{N_h}`.
    pub fn nodal_values(&self) -> Vec<f64> {
        (1..self.n_cells).map(|j| self.value(j as f64 / self.n_cells as f64)).collect()
    }

    fn hat_part(&self, x: f64) -> (f64, f64) {
        let n = self.n_cells as f64;
        let t = x * n;
        let c = (t.floor() as usize).min(self.n_cells - 1);
        let coeff = |node: usize| if node == 0 || node == self.n_cells { 0.0 } else { self.hat_coeffs[node - 1] };
        let (l, r) = (coeff(c), coeff(c + 1));
        let w = t - c as f64;
        (l + (r - l) * w, (r - l) * n)
    }

    pub fn value(&self, x: f64) -> f64 {
        if !(x > 0.0 && x < 1.0) {
            return 0.0;
        }
        if let Some(u) = &self.exact {
            return u.value(x);
        }
        let mut v = self.hat_part(x).0;
        if let Some(l) = &self.lifting {
            v += self.interface_value * l.value(x);
        }
        v
    }

    /// Derivative away from the nodes (and from `0`, `b`, `1`).
    pub fn deriv(&self, x: f64) -> f64 {
        if let Some(u) = &self.exact {
            return u.deriv(x);
        }
        let mut d = self.hat_part(x).1;
        if let Some(l) = &self.lifting {
            if let Ok(ld) = l.deriv(x) {
                d += self.interface_value * ld;
            }
        }
        d
    }

    /// Derivative without the lifting term.
    pub fn smooth_deriv(&self, x: f64) -> f64 {
        match &self.exact {
            Some(u) => u.deriv(x),
            None => self.hat_part(x).1,
        }
    }

    /// `x,value` rows: the nodes, or an `OVERSAMPLING`-times finer grid for
    /// the reconstructed kinds.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,value")?;
        let per_cell = if self.kind.is_reconstructed() { OVERSAMPLING } else { 1 };
        let total = self.n_cells * per_cell;
        for k in 0..=total {
            let x = k as f64 / total as f64;
            writeln!(w, "{},{}", format_g17(x), format_g17(self.value(x)))?;
        }
        Ok(())
    }
}

/// Runs `kind` for `config` on `mesh`; failures carry the model name.
pub fn run_model(kind: ModelKind, config: &ProblemConfig, mesh: &InterfaceMesh) -> Result<ModelSolution> {
    run_inner(kind, config, mesh).map_err(|e| Error::Model { model: kind.name(), source: Box::new(e) })
}

fn run_inner(kind: ModelKind, config: &ProblemConfig, mesh: &InterfaceMesh) -> Result<ModelSolution> {
    if mesh.b() != config.b {
        return Err(Error::config(format!("mesh interface {} differs from configured {}", mesh.b(), config.b)));
    }
    let f = config.source()?;
    let coeff = config.coefficients_for(kind)?;
    let (b, s) = (config.b.value(), config.s);
    let m = mesh.m();
    let base = |hat_coeffs: Vec<f64>, interface_value: f64| ModelSolution {
        kind,
        n_cells: mesh.n_cells(),
        m,
        hat_coeffs,
        interface_value,
        lifting: None,
        exact: None,
    };
    match kind {
        ModelKind::LocalExact => {
            let u = build_exact(b, coeff.sigma1, coeff.sigma2, f.alpha())?;
            let nodal: Vec<f64> = (1..mesh.n_cells()).map(|j| u.value(mesh.node(j))).collect();
            Ok(ModelSolution { exact: Some(u), ..base(nodal, u.interface_value()) })
        }
        ModelKind::LocalFem => {
            check_contrast(b, coeff.sigma1, coeff.sigma2)?;
            let u = lu_solve(&assemble_local(mesh, &coeff)?, &hat_loads(mesh, &f))?;
            let ub = u[m - 1];
            Ok(base(u, ub))
        }
        ModelKind::Old => {
            if !(s > 0.0 && s < 1.0) {
                return Err(Error::domain(format!("s = {s} outside (0, 1)")));
            }
            let u = lu_solve(&assemble_old(mesh, &coeff, s)?, &hat_loads(mesh, &f))?;
            let ub = u[m - 1];
            Ok(base(u, ub))
        }
        ModelKind::New => {
            let l = FractionalLifting::new(b, s)?;
            let k = assemble_bordered(mesh, &coeff, s)?;
            let g = bordered_load_vector(mesh, &f, &l);
            let mut u = lu_solve(&k, &g.entries)?;
            let ub = u[m - 1];
            u[m - 1] = 0.0;
            Ok(ModelSolution { lifting: Some(l), ..base(u, ub) })
        }
        ModelKind::Simplified => {
            let l = FractionalLifting::new(b, s)?;
            let cs = c_star(b, coeff.sigma1, coeff.sigma2, s)?;
            let loads = hat_loads(mesh, &f);
            let a1 = assemble_subdomain(mesh, Subdomain::Left, coeff.sigma1, s)?;
            let a2 = assemble_subdomain(mesh, Subdomain::Right, coeff.sigma2, s)?;
            let (u1, u2) = rayon::join(|| lu_solve(&a1, &loads[..m - 1]), || lu_solve(&a2, &loads[m..]));
            let mut u = u1?;
            u.push(0.0);
            u.extend(u2?);
            Ok(ModelSolution { lifting: Some(l), ..base(u, lifting_load(&f, &l) / cs) })
        }
    }
}
