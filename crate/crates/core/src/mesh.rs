//! Uniform meshes of `(0, 1)` with the interface on a node, and the P1 hat basis.

use crate::error::{Error, Result};
use num_integer::Integer;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

/// Default cap on the number of cells.
pub const MAX_CELLS: usize = 1 << 16;

/// Interface position `b = p/q` in lowest terms, `0 < p < q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RationalInterface {
    p: u64,
    q: u64,
}

impl RationalInterface {
    pub fn new(p: u64, q: u64) -> Result<Self> {
        if q == 0 || p == 0 || p >= q {
            return Err(Error::domain(format!("interface {p}/{q} is not inside (0, 1)")));
        }
        let g = p.gcd(&q);
        Ok(Self { p: p / g, q: q / g })
    }

    pub fn numerator(&self) -> u64 {
        self.p
    }

    pub fn denominator(&self) -> u64 {
        self.q
    }

    pub fn value(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    /// Closest interface that lies on the node set of a mesh with `n_cells` cells.
    pub fn nearest_on_grid(b: f64, n_cells: u64) -> Result<Self> {
        if !(b > 0.0 && b < 1.0) || n_cells < 2 {
            return Err(Error::domain(format!("cannot place b = {b} on a {n_cells}-cell grid")));
        }
        let p = (b * n_cells as f64).round().clamp(1.0, (n_cells - 1) as f64) as u64;
        Self::new(p, n_cells)
    }
}

impl fmt::Display for RationalInterface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.p, self.q)
    }
}

impl FromStr for RationalInterface {
    type Err = Error;

    /// Accepts `p/q` or a terminating decimal such as `0.75`.
    fn from_str(text: &str) -> Result<Self> {
        let t = text.trim();
        let bad = || Error::Parse(format!("interface '{text}' is neither p/q nor a decimal in (0, 1)"));
        if let Some((a, b)) = t.split_once('/') {
            let p = a.trim().parse::<u64>().map_err(|_| bad())?;
            let q = b.trim().parse::<u64>().map_err(|_| bad())?;
            return Self::new(p, q);
        }
        let (int, frac) = t.split_once('.').unwrap_or((t, ""));
        if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) || frac.len() > 18 {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        if int != 0 {
            return Err(bad());
        }
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            return Err(bad());
        }
        let q = 10u64.pow(frac.len() as u32);
        Self::new(frac.parse().map_err(|_| bad())?, q)
    }
}

/// Uniform mesh with `n_cells` elements and the interface at node `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceMesh {
    n_cells: usize,
    m: usize,
    h: f64,
    b: RationalInterface,
}

/// Mesh with `q·2^k` cells for `b = p/q`, capped at [`MAX_CELLS`].
pub fn build_mesh(b: RationalInterface, refinement: u32) -> Result<InterfaceMesh> {
    build_mesh_capped(b, refinement, MAX_CELLS)
}

pub fn build_mesh_capped(b: RationalInterface, refinement: u32, max_cells: usize) -> Result<InterfaceMesh> {
    let cells = (b.q as u128).checked_shl(refinement).filter(|c| c >> refinement == b.q as u128);
    let cells = cells.ok_or(Error::Capacity { cells: u128::MAX, max: max_cells })?;
    if cells > max_cells as u128 {
        return Err(Error::Capacity { cells, max: max_cells });
    }
    let n_cells = cells as usize;
    let m = (b.p as usize) << refinement;
    Ok(InterfaceMesh { n_cells, m, h: 1.0 / n_cells as f64, b })
}

impl InterfaceMesh {
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Number of interior nodes.
    pub fn n_interior(&self) -> usize {
        self.n_cells - 1
    }

    /// Index of the interface node.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn b(&self) -> RationalInterface {
        self.b
    }

    pub fn b_value(&self) -> f64 {
        self.b.value()
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / self.n_cells as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_cells).map(|i| self.node(i)).collect()
    }

    /// `max(0, 1 - |x - x_i|/h)`.
    pub fn hat_value(&self, i: usize, x: f64) -> f64 {
        (1.0 - (x * self.n_cells as f64 - i as f64).abs()).max(0.0)
    }

    /// Interior nodes lying strictly inside the left subinterval.
    pub fn left_nodes(&self) -> std::ops::Range<usize> {
        1..self.m
    }

    /// Interior nodes lying strictly inside the right subinterval.
    pub fn right_nodes(&self) -> std::ops::RangeInclusive<usize> {
        self.m + 1..=self.n_interior()
    }

    /// Index of the cell containing `x` (the last cell for `x = 1`).
    pub fn cell_of(&self, x: f64) -> usize {
        ((x * self.n_cells as f64).floor() as usize).min(self.n_cells - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half() -> RationalInterface {
        RationalInterface::new(1, 2).unwrap()
    }

    #[test]
    fn half_level_three() {
        let m = build_mesh(half(), 3).unwrap();
        assert_eq!((m.n_cells(), m.m()), (16, 8));
        assert_eq!(m.h(), 1.0 / 16.0);
    }

    #[test]
    fn half_level_eight() {
        let m = build_mesh(half(), 8).unwrap();
        assert_eq!(m.h(), 2f64.powi(-9));
        assert_eq!((m.m(), m.n_interior()), (256, 511));
    }

    #[test]
    fn seven_tenths() {
        let b: RationalInterface = "0.7".parse().unwrap();
        let m = build_mesh(b, 0).unwrap();
        assert_eq!((m.n_cells(), m.m()), (10, 7));
        assert_eq!(m.node(7), 0.7);
    }

    #[test]
    fn capacity() {
        assert!(matches!(build_mesh(half(), 16), Err(Error::Capacity { .. })));
        assert!(build_mesh(half(), 15).is_ok());
        assert!(matches!(build_mesh_capped(half(), 5, 32), Err(Error::Capacity { .. })));
    }

    #[test]
    fn parse_forms() {
        assert_eq!("6/8".parse::<RationalInterface>().unwrap(), RationalInterface::new(3, 4).unwrap());
        assert!("1/1".parse::<RationalInterface>().is_err());
        assert!("abc".parse::<RationalInterface>().is_err());
        assert!("1.5".parse::<RationalInterface>().is_err());
        assert_eq!(RationalInterface::nearest_on_grid(0.7, 16).unwrap(), RationalInterface::new(11, 16).unwrap());
    }

    #[test]
    fn hat_examples() {
        let m = build_mesh(half(), 2).unwrap();
        assert_eq!(m.hat_value(4, m.node(4)), 1.0);
        assert_eq!(m.hat_value(4, m.node(4) + m.h() / 2.0), 0.5);
        assert_eq!(m.hat_value(4, m.node(5)), 0.0);
    }

    proptest! {
        #[test]
        fn interface_on_node(p in 1u64..50, extra in 1u64..50, k in 0u32..6) {
            let b = RationalInterface::new(p, p + extra).unwrap();
            if let Ok(m) = build_mesh(b, k) {
                prop_assert_eq!(m.m() as u128 * b.denominator() as u128, m.n_cells() as u128 * b.numerator() as u128);
                prop_assert_eq!(m.node(m.m()), b.value());
                prop_assert!(m.m() >= 1 && m.m() <= m.n_interior());
            }
        }

        #[test]
        fn partition_of_unity(k in 1u32..6, t in 0.0f64..1.0) {
            let m = build_mesh(half(), k).unwrap();
            let x = m.node(1) + t * (m.node(m.n_interior()) - m.node(1));
            let sum: f64 = (1..=m.n_interior()).map(|i| m.hat_value(i, x)).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }
    }
}
