//! P1 finite elements on uniform interval/rectangle meshes: the discrete
//! triple H^1_0 ⊂ L^2 ⊂ H^-1 with Gram matrices J (stiffness), M (mass)
//! and the weighted mass B.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, BandedCholesky, SparseMatrix, SymmetricAccumulator};

/// Uniform mesh of an interval (0, l) or rectangle (0, lx) x (0, ly).
///
/// Boundary nodes carry no degree of freedom (homogeneous Dirichlet data).
#[derive(Debug, Clone)]
pub struct SpatialDiscretization {
    dimension: usize,
    extents: Vec<f64>,
    cells: Vec<usize>,
    nodes: Vec<[f64; 2]>,
    node_dof: Vec<Option<usize>>,
    dof_nodes: Vec<usize>,
    elements: Vec<Element>,
    h: f64,
}

/// A simplex: a segment in 1D, a triangle in 2D.
#[derive(Debug, Clone)]
pub struct Element {
    /// Mesh node indices; only the first `dimension + 1` are used.
    pub nodes: [usize; 3],
    pub measure: f64,
    pub centroid: [f64; 2],
    /// Gradients of the barycentric coordinates.
    pub gradients: [[f64; 2]; 3],
}

impl Element {
    pub fn vertex_count(&self, dimension: usize) -> usize {
        dimension + 1
    }
}

impl SpatialDiscretization {
    /// Build a uniform mesh with `cells[d]` cells along axis `d`.
    pub fn build(dimension: usize, extents: &[f64], cells: &[usize]) -> Result<Self> {
        if dimension != 1 && dimension != 2 {
            return Err(Error::config(format!(
                "mesh dimension must be 1 or 2, got {dimension}"
            )));
        }
        if extents.len() != dimension || cells.len() != dimension {
            return Err(Error::config(format!(
                "mesh needs {dimension} extents and {dimension} cell counts, got {} and {}",
                extents.len(),
                cells.len()
            )));
        }
        if let Some(l) = extents.iter().find(|&&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::config(format!("domain extent must be positive, got {l}")));
        }
        if let Some(c) = cells.iter().find(|&&c| c < 2) {
            return Err(Error::config(format!(
                "at least 2 cells per axis are needed for an interior node, got {c}"
            )));
        }
        match dimension {
            1 => Ok(Self::build_1d(extents[0], cells[0])),
            _ => Ok(Self::build_2d(extents, cells)),
        }
    }

    fn build_1d(length: f64, n: usize) -> Self {
        let h = length / n as f64;
        let nodes: Vec<[f64; 2]> = (0..=n).map(|i| [i as f64 * h, 0.0]).collect();
        let mut node_dof = vec![None; n + 1];
        let mut dof_nodes = Vec::with_capacity(n - 1);
        for (i, slot) in node_dof.iter_mut().enumerate().take(n).skip(1) {
            *slot = Some(dof_nodes.len());
            dof_nodes.push(i);
        }
        let elements = (0..n)
            .map(|e| Element {
                nodes: [e, e + 1, usize::MAX],
                measure: h,
                centroid: [(e as f64 + 0.5) * h, 0.0],
                gradients: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0, 0.0]],
            })
            .collect();
        Self {
            dimension: 1,
            extents: vec![length],
            cells: vec![n],
            nodes,
            node_dof,
            dof_nodes,
            elements,
            h,
        }
    }

    fn build_2d(extents: &[f64], cells: &[usize]) -> Self {
        let (nx, ny) = (cells[0], cells[1]);
        let (hx, hy) = (extents[0] / nx as f64, extents[1] / ny as f64);
        let node = |i: usize, j: usize| j * (nx + 1) + i;
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut node_dof = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut dof_nodes = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([i as f64 * hx, j as f64 * hy]);
                if i > 0 && i < nx && j > 0 && j < ny {
                    node_dof.push(Some(dof_nodes.len()));
                    dof_nodes.push(node(i, j));
                } else {
                    node_dof.push(None);
                }
            }
        }
        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
                elements.push(triangle(&nodes, [a, b, c]));
                elements.push(triangle(&nodes, [a, c, d]));
            }
        }
        Self {
            dimension: 2,
            extents: extents.to_vec(),
            cells: cells.to_vec(),
            nodes,
            node_dof,
            dof_nodes,
            elements,
            h: hx.hypot(hy),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    /// Maximal element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dof_count(&self) -> usize {
        self.dof_nodes.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    /// Coordinates of the node carrying degree of freedom `dof`.
    pub fn dof_coordinates(&self, dof: usize) -> &[f64] {
        &self.nodes[self.dof_nodes[dof]][..self.dimension]
    }

    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        self.node_dof[node]
    }

    pub fn domain_measure(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Degrees of freedom of an element's vertices (None on the boundary).
    pub fn element_dofs(&self, e: &Element) -> [Option<usize>; 3] {
        let mut out = [None; 3];
        for (slot, &n) in out.iter_mut().zip(&e.nodes[..self.dimension + 1]) {
            *slot = self.node_dof[n];
        }
        out
    }

    /// Quadrature on one element: (point, weight, barycentric coordinates).
    /// Three-point Gauss in 1D, seven-point degree-5 rule on triangles.
    pub fn element_quadrature(&self, e: &Element) -> Vec<([f64; 2], f64, [f64; 3])> {
        if self.dimension == 1 {
            let x0 = self.nodes[e.nodes[0]][0];
            let s = (0.6_f64).sqrt();
            [(-s, 5.0 / 9.0), (0.0, 8.0 / 9.0), (s, 5.0 / 9.0)]
                .iter()
                .map(|&(xi, w)| {
                    let l1 = 0.5 * (1.0 + xi);
                    ([x0 + l1 * e.measure, 0.0], 0.5 * w * e.measure, [1.0 - l1, l1, 0.0])
                })
                .collect()
        } else {
            const A1: f64 = 0.470_142_064_105_115;
            const A2: f64 = 0.101_286_507_323_456;
            const W0: f64 = 0.225;
            const W1: f64 = 0.132_394_152_788_506;
            const W2: f64 = 0.125_939_180_544_827;
            let bary = [
                ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], W0),
                ([A1, A1, 1.0 - 2.0 * A1], W1),
                ([A1, 1.0 - 2.0 * A1, A1], W1),
                ([1.0 - 2.0 * A1, A1, A1], W1),
                ([A2, A2, 1.0 - 2.0 * A2], W2),
                ([A2, 1.0 - 2.0 * A2, A2], W2),
                ([1.0 - 2.0 * A2, A2, A2], W2),
            ];
            bary.iter()
                .map(|&(l, w)| {
                    let mut p = [0.0; 2];
                    for (k, &lk) in l.iter().enumerate() {
                        let v = self.nodes[e.nodes[k]];
                        p[0] += lk * v[0];
                        p[1] += lk * v[1];
                    }
                    (p, w * e.measure, l)
                })
                .collect()
        }
    }

    /// Load vector ∫ f φ_i dz by element quadrature.
    pub fn load_vector(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dof_count()];
        for e in &self.elements {
            let dofs = self.element_dofs(e);
            for (p, w, l) in self.element_quadrature(e) {
                let fv = f(&p[..self.dimension]) * w;
                for (a, dof) in dofs.iter().enumerate().take(self.dimension + 1) {
                    if let Some(i) = dof {
                        out[*i] += fv * l[a];
                    }
                }
            }
        }
        out
    }

    /// Nodal interpolant of a function on the degrees of freedom.
    pub fn interpolate(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.dof_count())
            .map(|i| f(self.dof_coordinates(i)))
            .collect()
    }

    /// Assemble Σ_e coeff_e ∫_e ∇φ_i·∇φ_j over interior dofs.
    pub fn assemble_weighted_stiffness(&self, coeff: &[f64]) -> SparseMatrix {
        debug_assert_eq!(coeff.len(), self.elements.len());
        let nv = self.dimension + 1;
        let mut acc = SymmetricAccumulator::new(self.dof_count());
        for (e, &c) in self.elements.iter().zip(coeff) {
            let dofs = self.element_dofs(e);
            for a in 0..nv {
                let Some(i) = dofs[a] else { continue };
                for b in a..nv {
                    let Some(j) = dofs[b] else { continue };
                    let g = e.gradients[a][0] * e.gradients[b][0]
                        + e.gradients[a][1] * e.gradients[b][1];
                    acc.add_pair(i, j, c * e.measure * g);
                }
            }
        }
        acc.into_csr()
    }

    /// Assemble Σ_e coeff_e ∫_e φ_i φ_j (exact for P1).
    pub fn assemble_weighted_mass(&self, coeff: &[f64]) -> SparseMatrix {
        debug_assert_eq!(coeff.len(), self.elements.len());
        let nv = self.dimension + 1;
        let denom = (nv * (nv + 1)) as f64;
        let mut acc = SymmetricAccumulator::new(self.dof_count());
        for (e, &c) in self.elements.iter().zip(coeff) {
            let dofs = self.element_dofs(e);
            for a in 0..nv {
                let Some(i) = dofs[a] else { continue };
                for b in a..nv {
                    let Some(j) = dofs[b] else { continue };
                    let factor = if a == b { 2.0 } else { 1.0 };
                    acc.add_pair(i, j, c * e.measure * factor / denom);
                }
            }
        }
        acc.into_csr()
    }

    /// Row sums of the interior (Dirichlet-restricted) consistent mass
    /// matrix, so that M_L·1 = M·1 on the degrees of freedom.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let nv = self.dimension + 1;
        let denom = (nv * (nv + 1)) as f64;
        let mut out = vec![0.0; self.dof_count()];
        for e in &self.elements {
            let dofs = self.element_dofs(e);
            for a in 0..nv {
                let Some(i) = dofs[a] else { continue };
                for (b, other) in dofs.iter().enumerate().take(nv) {
                    if other.is_some() {
                        let factor = if a == b { 2.0 } else { 1.0 };
                        out[i] += e.measure * factor / denom;
                    }
                }
            }
        }
        out
    }
}

fn triangle(nodes: &[[f64; 2]], ids: [usize; 3]) -> Element {
    let [p0, p1, p2] = [nodes[ids[0]], nodes[ids[1]], nodes[ids[2]]];
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    let area = 0.5 * det.abs();
    // ∇λ_k = rot(p_{k+2} - p_{k+1}) / det
    let grad = |a: [f64; 2], b: [f64; 2]| [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
    Element {
        nodes: ids,
        measure: area,
        centroid: [
            (p0[0] + p1[0] + p2[0]) / 3.0,
            (p0[1] + p1[1] + p2[1]) / 3.0,
        ],
        gradients: [grad(p1, p2), grad(p2, p0), grad(p0, p1)],
    }
}

/// Weight function m(z) ≥ 0 of the operator B u = m u.
#[derive(Clone)]
pub enum Weight {
    Constant(f64),
    /// `inside` on lower < z_axis < upper, `outside` elsewhere.
    Indicator {
        axis: usize,
        lower: f64,
        upper: f64,
        inside: f64,
        outside: f64,
    },
    /// One value per element.
    Table(Vec<f64>),
    Function(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Constant(v) => write!(f, "Constant({v})"),
            Weight::Indicator {
                axis,
                lower,
                upper,
                inside,
                outside,
            } => write!(
                f,
                "Indicator(axis {axis}, ({lower}, {upper}), inside {inside}, outside {outside})"
            ),
            Weight::Table(t) => write!(f, "Table({} values)", t.len()),
            Weight::Function(_) => write!(f, "Function"),
        }
    }
}

impl Weight {
    /// Per-element samples at the centroids (midpoint rule).
    pub fn element_samples(&self, mesh: &SpatialDiscretization) -> Result<Vec<f64>> {
        let dim = mesh.dimension();
        match self {
            Weight::Constant(v) => Ok(vec![*v; mesh.elements().len()]),
            Weight::Indicator {
                axis,
                lower,
                upper,
                inside,
                outside,
            } => {
                if *axis >= dim {
                    return Err(Error::config(format!(
                        "indicator axis {axis} out of range for a {dim}D mesh"
                    )));
                }
                Ok(mesh
                    .elements()
                    .iter()
                    .map(|e| {
                        let z = e.centroid[*axis];
                        if z > *lower && z < *upper {
                            *inside
                        } else {
                            *outside
                        }
                    })
                    .collect())
            }
            Weight::Table(t) => {
                if t.len() != mesh.elements().len() {
                    return Err(Error::config(format!(
                        "weight table has {} values but the mesh has {} elements",
                        t.len(),
                        mesh.elements().len()
                    )));
                }
                Ok(t.clone())
            }
            Weight::Function(f) => Ok(mesh
                .elements()
                .iter()
                .map(|e| f(&e.centroid[..dim]))
                .collect()),
        }
    }
}

/// Assembled Gram matrices of the discrete evolution triple.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    /// Riesz map of X = H^1_0: ∫ Du·Dv.
    pub riesz: SparseMatrix,
    /// Weighted mass ∫ m u v; possibly singular.
    pub weighted_mass: SparseMatrix,
    /// Consistent mass ∫ u v (Gram matrix of H).
    pub mass: SparseMatrix,
    /// Row sums of `mass`.
    pub lumped_mass: Vec<f64>,
    /// Element samples of m used for `weighted_mass`.
    pub weight_samples: Vec<f64>,
}

/// Stiffness matrix of −Δ with homogeneous Dirichlet conditions.
pub fn assemble_riesz_j(mesh: &SpatialDiscretization) -> SparseMatrix {
    mesh.assemble_weighted_stiffness(&vec![1.0; mesh.elements().len()])
}

pub fn assemble_mass(mesh: &SpatialDiscretization) -> SparseMatrix {
    mesh.assemble_weighted_mass(&vec![1.0; mesh.elements().len()])
}

/// Check H(m) on element samples: finite and nonnegative everywhere.
pub fn check_weight_samples(samples: &[f64]) -> Result<()> {
    if let Some((e, v)) = samples
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
    {
        return Err(Error::hypothesis(
            "H(m)",
            format!("m = {v} < 0 at the quadrature point of element {e}"),
        ));
    }
    Ok(())
}

/// B_ij = ∫ m φ_i φ_j with m sampled at element midpoints.
pub fn assemble_b(mesh: &SpatialDiscretization, m: &Weight) -> Result<SparseMatrix> {
    let samples = m.element_samples(mesh)?;
    check_weight_samples(&samples)?;
    Ok(mesh.assemble_weighted_mass(&samples))
}

impl OperatorSet {
    pub fn assemble(mesh: &SpatialDiscretization, m: &Weight) -> Result<Self> {
        let weight_samples = m.element_samples(mesh)?;
        check_weight_samples(&weight_samples)?;
        Ok(Self {
            riesz: assemble_riesz_j(mesh),
            weighted_mass: mesh.assemble_weighted_mass(&weight_samples),
            mass: assemble_mass(mesh),
            lumped_mass: mesh.lumped_mass(),
            weight_samples,
        })
    }

    pub fn dof_count(&self) -> usize {
        self.lumped_mass.len()
    }

    /// (u, v)_X = u^T J v
    pub fn inner_product_x(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        linalg::check_len(u, self.dof_count())?;
        linalg::check_len(v, self.dof_count())?;
        Ok(linalg::bilinear(&self.riesz, u, v))
    }

    /// (u, v)_H = u^T M v
    pub fn inner_product_h(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        linalg::check_len(u, self.dof_count())?;
        linalg::check_len(v, self.dof_count())?;
        Ok(linalg::bilinear(&self.mass, u, v))
    }

    pub fn norm_x(&self, u: &[f64]) -> f64 {
        linalg::bilinear(&self.riesz, u, u).max(0.0).sqrt()
    }

    pub fn norm_h(&self, u: &[f64]) -> f64 {
        linalg::bilinear(&self.mass, u, u).max(0.0).sqrt()
    }

    /// Nodal L^2 norm with lumped weights.
    pub fn norm_lumped(&self, u: &[f64]) -> f64 {
        u.iter()
            .zip(&self.lumped_mass)
            .map(|(x, l)| l * x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Largest ratio |u|/‖u‖ over the discrete space, i.e. 1/sqrt(λ_min(J, G))
/// for the H-Gram matrix G, by inverse iteration. `lumped` selects
/// G = diag(lumped mass) instead of the consistent mass.
pub fn embedding_constant(ops: &OperatorSet, lumped: bool) -> Result<f64> {
    let n = ops.dof_count();
    let chol = BandedCholesky::factor(&ops.riesz)?;
    let apply_gram = |x: &[f64]| -> Vec<f64> {
        if lumped {
            x.iter().zip(&ops.lumped_mass).map(|(a, l)| a * l).collect()
        } else {
            linalg::matvec(&ops.mass, x)
        }
    };
    // smooth positive start vector has a component along the ground state
    let mut x: Vec<f64> = (0..n)
        .map(|i| ((i as f64 + 1.0) * std::f64::consts::PI / (n as f64 + 1.0)).sin() + 0.1)
        .collect();
    let mut rayleigh = 0.0;
    for _ in 0..200 {
        let gx = apply_gram(&x);
        let mut next = chol.solve(&gx);
        let norm = linalg::norm2(&next);
        for v in &mut next {
            *v /= norm;
        }
        let gxn = apply_gram(&next);
        let jxn = linalg::matvec(&ops.riesz, &next);
        let r = linalg::dot(&next, &gxn) / linalg::dot(&next, &jxn);
        x = next;
        if (r - rayleigh).abs() <= 1e-14 * r {
            rayleigh = r;
            break;
        }
        rayleigh = r;
    }
    Ok(rayleigh.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{is_exactly_symmetric, to_dense};

    fn mesh1d(n: usize) -> SpatialDiscretization {
        SpatialDiscretization::build(1, &[1.0], &[n]).unwrap()
    }

    #[test]
    fn uniform_1d_mesh() {
        let mesh = mesh1d(4);
        assert_eq!(mesh.dof_count(), 3);
        assert_eq!(mesh.h(), 0.25);
        let xs: Vec<f64> = (0..3).map(|i| mesh.dof_coordinates(i)[0]).collect();
        assert_eq!(xs, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn degenerate_meshes_are_config_errors() {
        assert!(matches!(
            SpatialDiscretization::build(1, &[1.0], &[1]),
            Err(Error::Config(_))
        ));
        assert!(SpatialDiscretization::build(1, &[0.0], &[4]).is_err());
        assert!(SpatialDiscretization::build(1, &[-1.0], &[4]).is_err());
        assert!(SpatialDiscretization::build(3, &[1.0; 3], &[4; 3]).is_err());
    }

    #[test]
    fn uniform_2d_mesh_counts() {
        let mesh = SpatialDiscretization::build(2, &[1.0, 1.0], &[4, 4]).unwrap();
        assert_eq!(mesh.dof_count(), 9);
        assert_eq!(mesh.elements().len(), 32);
        let total: f64 = mesh.elements().iter().map(|e| e.measure).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(mesh.elements().iter().all(|e| e.measure > 0.0));
    }

    #[test]
    fn stiffness_1d_hand_values() {
        let j = to_dense(&assemble_riesz_j(&mesh1d(4)));
        let expected = [[8.0, -4.0, 0.0], [-4.0, 8.0, -4.0], [0.0, -4.0, 8.0]];
        for r in 0..3 {
            for c in 0..3 {
                assert!((j[(r, c)] - expected[r][c]).abs() < 1e-12);
            }
        }
        let j1 = to_dense(&assemble_riesz_j(&mesh1d(2)));
        assert_eq!(j1.shape(), (1, 1));
        assert!((j1[(0, 0)] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn mass_1d_hand_values() {
        let b = to_dense(&assemble_b(&mesh1d(4), &Weight::Constant(1.0)).unwrap());
        let (d, o) = (1.0 / 6.0, 1.0 / 24.0);
        let expected = [[d, o, 0.0], [o, d, o], [0.0, o, d]];
        for r in 0..3 {
            for c in 0..3 {
                assert!((b[(r, c)] - expected[r][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_weight_gives_zero_matrix() {
        let b = assemble_b(&mesh1d(6), &Weight::Constant(0.0)).unwrap();
        assert!(b.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_weight_names_hm() {
        let err = assemble_b(&mesh1d(4), &Weight::Table(vec![1.0, 1.0, -0.5, 1.0])).unwrap_err();
        match err {
            Error::Hypothesis { hypothesis, .. } => assert_eq!(hypothesis, "H(m)"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn indicator_weight_rows_vanish_outside() {
        // m = 1 on (0, 1/2), mesh h = 1/8 resolves z = 1/2 at dof 3
        let mesh = mesh1d(8);
        let m = Weight::Indicator {
            axis: 0,
            lower: 0.0,
            upper: 0.5,
            inside: 1.0,
            outside: 0.0,
        };
        let b = to_dense(&assemble_b(&mesh, &m).unwrap());
        // oracle: per-element quadrature of m φ_i φ_j, h/6 (2, 1)
        let h = 0.125;
        for i in 0..7 {
            let z = (i + 1) as f64 * h;
            let left = if z - 0.5 * h < 0.5 { 1.0 } else { 0.0 };
            let right = if z + 0.5 * h < 0.5 { 1.0 } else { 0.0 };
            assert!((b[(i, i)] - h / 3.0 * (left + right)).abs() < 1e-15);
            if i + 1 < 7 {
                assert!((b[(i, i + 1)] - h / 6.0 * right).abs() < 1e-15);
            }
        }
        // dofs strictly inside (1/2, 1): z = 5/8, 6/8, 7/8
        for i in 4..7 {
            for k in 0..7 {
                assert_eq!(b[(i, k)], 0.0);
            }
        }
        // interface row at z = 1/2 keeps its left contribution
        assert!(b[(3, 3)] > 0.0);
        // kernel dimension = number of dofs strictly inside the zero region
        let svd = b.clone().svd(false, false);
        let tol = 1e-12 * svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
        assert_eq!(7 - rank, 3);
    }

    #[test]
    fn assembled_operators_are_exactly_symmetric() {
        let m = Weight::Function(Arc::new(|z: &[f64]| 1.0 + z[0] * z.iter().sum::<f64>().sin()));
        for mesh in [
            mesh1d(7),
            SpatialDiscretization::build(2, &[1.0, 2.0], &[5, 3]).unwrap(),
        ] {
            let ops = OperatorSet::assemble(&mesh, &m).unwrap();
            assert!(is_exactly_symmetric(&ops.riesz));
            assert!(is_exactly_symmetric(&ops.weighted_mass));
            assert!(is_exactly_symmetric(&ops.mass));
        }
    }

    #[test]
    fn inner_products() {
        let ops = OperatorSet::assemble(&mesh1d(4), &Weight::Constant(1.0)).unwrap();
        let e2 = [0.0, 1.0, 0.0];
        assert!((ops.inner_product_x(&e2, &e2).unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(ops.inner_product_x(&[0.0; 3], &e2).unwrap(), 0.0);
        assert!(matches!(
            ops.inner_product_h(&[1.0; 2], &e2),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn lumped_mass_matches_row_sums() {
        let mesh = SpatialDiscretization::build(2, &[1.0, 1.0], &[4, 3]).unwrap();
        let ops = OperatorSet::assemble(&mesh, &Weight::Constant(1.0)).unwrap();
        let ones = vec![1.0; mesh.dof_count()];
        let rows = linalg::matvec(&ops.mass, &ones);
        for (a, b) in rows.iter().zip(&ops.lumped_mass) {
            assert!((a - b).abs() < 1e-15);
            assert!(*b > 0.0);
        }
    }

    #[test]
    fn embedding_constant_approaches_inverse_pi() {
        let ops = OperatorSet::assemble(&mesh1d(64), &Weight::Constant(1.0)).unwrap();
        let c1 = embedding_constant(&ops, false).unwrap();
        // discrete λ_min(J, M) = π² (1 + O(h²)), slightly above π²
        assert!((c1 - 1.0 / std::f64::consts::PI).abs() < 1e-3);
    }

    #[test]
    fn load_vector_of_sine_mode_is_exact() {
        // ∫ sin(πz) φ_i = sin(π z_i) 2 (1 - cos πh) / (π² h)
        let mesh = mesh1d(10);
        let pi = std::f64::consts::PI;
        let load = mesh.load_vector(|z| (pi * z[0]).sin());
        let h = mesh.h();
        for (i, v) in load.iter().enumerate() {
            let z = mesh.dof_coordinates(i)[0];
            let exact = (pi * z).sin() * 2.0 * (1.0 - (pi * h).cos()) / (pi * pi * h);
            assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
        }
    }
}
