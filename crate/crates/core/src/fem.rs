//! Bilinear (Q1) finite elements on square cells.
//!
//! Nodal vectors always carry one value per mesh node. Unknowns live on the
//! free nodes only: Dirichlet nodes hold prescribed values and hanging nodes
//! are averages of their parents, resolved recursively through [`DofMap`].
//! Assembly works in residual form over free unknowns, which is the same as
//! eliminating Dirichlet rows and columns and moving the data to the right.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{MeshError, SolveError};
use crate::mesh::{BoundaryTag, Mesh, Point};

/// Tensor Gauss–Legendre rule on the reference square `[-1, 1]^2`.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// `n x n` rule for `n` in 1..=3.
    pub fn gauss(n: usize) -> Self {
        let (x, w): (Vec<f64>, Vec<f64>) = match n {
            1 => (vec![0.0], vec![2.0]),
            2 => {
                let a = 1.0 / 3f64.sqrt();
                (vec![-a, a], vec![1.0, 1.0])
            }
            3 => {
                let a = (0.6f64).sqrt();
                (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
            }
            _ => panic!("unsupported Gauss order {n}"),
        };
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for j in 0..n {
            for i in 0..n {
                points.push([x[i], x[j]]);
                weights.push(w[i] * w[j]);
            }
        }
        QuadratureRule { points, weights }
    }
}

/// Bilinear shape functions and their reference gradients, counterclockwise
/// from the corner `(-1, -1)`.
pub fn shape_eval(p: Point) -> ([f64; 4], [[f64; 2]; 4]) {
    let (x, y) = (p[0], p[1]);
    let values = [
        0.25 * (1.0 - x) * (1.0 - y),
        0.25 * (1.0 + x) * (1.0 - y),
        0.25 * (1.0 + x) * (1.0 + y),
        0.25 * (1.0 - x) * (1.0 + y),
    ];
    let grads = [
        [-0.25 * (1.0 - y), -0.25 * (1.0 - x)],
        [0.25 * (1.0 - y), -0.25 * (1.0 + x)],
        [0.25 * (1.0 + y), 0.25 * (1.0 + x)],
        [-0.25 * (1.0 + y), 0.25 * (1.0 - x)],
    ];
    (values, grads)
}

/// Shape data at one physical point of one cell.
#[derive(Clone, Debug)]
pub struct QuadPoint {
    pub cell: usize,
    pub index: usize,
    pub nodes: [usize; 4],
    pub x: Point,
    /// Quadrature weight times Jacobian determinant (0 for sample points).
    pub jxw: f64,
    pub shape: [f64; 4],
    pub grad: [[f64; 2]; 4],
}

impl QuadPoint {
    fn new(mesh: &Mesh, cell: usize, index: usize, xi: Point, weight: f64) -> Self {
        let c = &mesh.cells()[cell];
        let half = 0.5 * c.size;
        let (shape, rg) = shape_eval(xi);
        let grad = rg.map(|g| [g[0] / half, g[1] / half]);
        QuadPoint {
            cell,
            index,
            nodes: c.nodes,
            x: [c.origin[0] + half * (xi[0] + 1.0), c.origin[1] + half * (xi[1] + 1.0)],
            jxw: weight * half * half,
            shape,
            grad,
        }
    }

    pub fn value(&self, nodal: &[f64]) -> f64 {
        (0..4).map(|a| self.shape[a] * nodal[self.nodes[a]]).sum()
    }

    pub fn gradient(&self, nodal: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for a in 0..4 {
            let v = nodal[self.nodes[a]];
            g[0] += self.grad[a][0] * v;
            g[1] += self.grad[a][1] * v;
        }
        g
    }
}

/// Calls `f` for every quadrature point of `rule` on every cell.
pub fn for_each_qp(mesh: &Mesh, rule: &QuadratureRule, mut f: impl FnMut(&QuadPoint)) {
    for cell in 0..mesh.n_cells() {
        for (q, (&xi, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            f(&QuadPoint::new(mesh, cell, q, xi, w));
        }
    }
}

/// Evaluation point inside the cell containing `p`.
pub fn point_eval(mesh: &Mesh, p: Point) -> Result<QuadPoint, MeshError> {
    let cell = mesh.locate(p).ok_or(MeshError::OutsideMesh(p[0], p[1]))?;
    let c = &mesh.cells()[cell];
    let half = 0.5 * c.size;
    let xi = [(p[0] - c.origin[0]) / half - 1.0, (p[1] - c.origin[1]) / half - 1.0];
    let mut qp = QuadPoint::new(mesh, cell, 0, xi, 0.0);
    qp.x = p;
    Ok(qp)
}

/// Nodal coefficient vector, one entry per mesh node.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(mesh: &Mesh, v: f64) -> Self {
        ScalarField { values: vec![v; mesh.n_nodes()] }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Self {
        ScalarField { values: mesh.nodes().iter().map(|&p| f(p)).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Dirichlet data plus the mesh's hanging-node relations.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSet {
    pub dirichlet: BTreeMap<usize, f64>,
    /// Hanging node and its two parents (weights one half each).
    pub hanging: Vec<(usize, [usize; 2])>,
}

impl ConstraintSet {
    /// Hanging relations of `mesh` and no Dirichlet data.
    pub fn from_mesh(mesh: &Mesh) -> Self {
        ConstraintSet {
            dirichlet: BTreeMap::new(),
            hanging: mesh.hanging_nodes().iter().map(|h| (h.node, h.parents)).collect(),
        }
    }

    /// Prescribes `value(p)` on every node of `tag`. A node that already
    /// carries a different value from another tag receives the average.
    pub fn add_dirichlet(&mut self, mesh: &Mesh, tag: BoundaryTag, value: impl Fn(Point) -> f64) {
        let hanging: std::collections::HashSet<usize> = self.hanging.iter().map(|h| h.0).collect();
        for n in mesh.boundary_nodes(tag) {
            if hanging.contains(&n) {
                continue;
            }
            let v = value(mesh.nodes()[n]);
            self.dirichlet.entry(n).and_modify(|old| *old = 0.5 * (*old + v)).or_insert(v);
        }
    }

    /// Writes Dirichlet values, then resolves hanging nodes.
    pub fn distribute(&self, dofs: &DofMap, values: &mut [f64]) {
        for (&n, &v) in &self.dirichlet {
            values[n] = v;
        }
        dofs.resolve_hanging(values);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Free(usize),
    Fixed,
    Hanging,
}

/// Maps nodes to unknowns.
#[derive(Clone, Debug)]
pub struct DofMap {
    kinds: Vec<NodeKind>,
    /// Per node: free unknowns it depends on, with weights.
    terms: Vec<Vec<(usize, f64)>>,
    /// Per hanging node: non-hanging nodes it averages, with weights.
    expansion: Vec<(usize, Vec<(usize, f64)>)>,
    free_nodes: Vec<usize>,
}

impl DofMap {
    pub fn new(n_nodes: usize, constraints: &ConstraintSet) -> Self {
        let parents: BTreeMap<usize, [usize; 2]> = constraints.hanging.iter().copied().collect();
        let mut kinds = vec![NodeKind::Fixed; n_nodes];
        let mut free_nodes = Vec::new();
        for (n, kind) in kinds.iter_mut().enumerate() {
            *kind = if parents.contains_key(&n) {
                NodeKind::Hanging
            } else if constraints.dirichlet.contains_key(&n) {
                NodeKind::Fixed
            } else {
                free_nodes.push(n);
                NodeKind::Free(free_nodes.len() - 1)
            };
        }
        fn expand(n: usize, w: f64, parents: &BTreeMap<usize, [usize; 2]>, out: &mut Vec<(usize, f64)>) {
            match parents.get(&n) {
                Some(&[a, b]) => {
                    expand(a, 0.5 * w, parents, out);
                    expand(b, 0.5 * w, parents, out);
                }
                None => match out.iter_mut().find(|t| t.0 == n) {
                    Some(t) => t.1 += w,
                    None => out.push((n, w)),
                },
            }
        }
        let mut expansion = Vec::new();
        let mut terms = vec![Vec::new(); n_nodes];
        for n in 0..n_nodes {
            let mut e = Vec::new();
            expand(n, 1.0, &parents, &mut e);
            terms[n] = e
                .iter()
                .filter_map(|&(m, w)| match kinds[m] {
                    NodeKind::Free(d) => Some((d, w)),
                    _ => None,
                })
                .collect();
            if kinds[n] == NodeKind::Hanging {
                expansion.push((n, e));
            }
        }
        DofMap { kinds, terms, expansion, free_nodes }
    }

    pub fn n_dofs(&self) -> usize {
        self.free_nodes.len()
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.kinds[node]
    }

    pub fn terms(&self, node: usize) -> &[(usize, f64)] {
        &self.terms[node]
    }

    pub fn free_nodes(&self) -> &[usize] {
        &self.free_nodes
    }

    pub fn resolve_hanging(&self, values: &mut [f64]) {
        for (n, e) in &self.expansion {
            values[*n] = e.iter().map(|&(m, w)| w * values[m]).sum();
        }
    }

    /// Nodal increment produced by the unknown increment `delta`.
    pub fn expand_increment(&self, delta: &[f64]) -> Vec<f64> {
        self.terms.iter().map(|t| t.iter().map(|&(d, w)| w * delta[d]).sum()).collect()
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Zero matrix with the given (row-wise sorted) pattern.
    pub fn from_pattern(rows: &[Vec<usize>]) -> Self {
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        for r in rows {
            cols.extend_from_slice(r);
            row_ptr.push(cols.len());
        }
        let nnz = cols.len();
        SparseMatrix { n: rows.len(), row_ptr, cols, values: vec![0.0; nnz] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SparseMatrix::from_pattern(&(0..n).map(|i| vec![i]).collect::<Vec<_>>());
        m.values.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let rows: Vec<Vec<usize>> =
            a.iter().map(|r| (0..r.len()).filter(|&j| r[j] != 0.0).collect()).collect();
        let mut m = SparseMatrix::from_pattern(&rows);
        for (i, r) in rows.iter().enumerate() {
            for &j in r {
                m.add(i, j, a[i][j]);
            }
        }
        m
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.position(i, j).expect("entry outside sparsity pattern");
        self.values[k] += v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.cols[k]];
            }
            y[i] = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[i][self.cols[k]] = self.values[k];
            }
        }
        d
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients; stops at `||Ax - b|| <= tol ||b||`.
pub fn solve_linear(a: &SparseMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>, SolveError> {
    solve_linear_counted(a, b, tol).map(|(x, _)| x)
}

/// As [`solve_linear`], also returning the iteration count.
pub fn solve_linear_counted(a: &SparseMatrix, b: &[f64], tol: f64) -> Result<(Vec<f64>, usize), SolveError> {
    let n = a.n;
    let mut x = vec![0.0; n];
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let inv_diag: Vec<f64> =
        a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iter = 10 * n + 100;
    let mut rnorm = bnorm;
    for it in 0..max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(SolveError::Linear { iterations: it, residual: rnorm / bnorm });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = norm(&r);
        if rnorm <= tol * bnorm {
            // Guard against drift in the recursive residual.
            let mut ax = vec![0.0; n];
            a.matvec(&x, &mut ax);
            let true_res = ax.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            if true_res <= 10.0 * tol * bnorm {
                return Ok((x, it + 1));
            }
            r = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolveError::Linear { iterations: max_iter, residual: rnorm / bnorm })
}

/// A mesh together with a degree-of-freedom map and the matching sparsity pattern.
#[derive(Clone, Debug)]
pub struct FeSpace {
    pub mesh: Arc<Mesh>,
    pub dofs: DofMap,
    rows: Vec<Vec<usize>>,
    lumped: Vec<f64>,
    rule: QuadratureRule,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, constraints: &ConstraintSet) -> Self {
        let dofs = DofMap::new(mesh.n_nodes(), constraints);
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); dofs.n_dofs()];
        for c in mesh.cells() {
            let mut local: Vec<usize> = c.nodes.iter().flat_map(|&n| dofs.terms(n).iter().map(|t| t.0)).collect();
            local.sort_unstable();
            local.dedup();
            for &i in &local {
                rows[i].extend_from_slice(&local);
            }
        }
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
        }
        let rule = QuadratureRule::gauss(2);
        let mut lumped = vec![0.0; mesh.n_nodes()];
        for_each_qp(&mesh, &rule, |qp| {
            for a in 0..4 {
                lumped[qp.nodes[a]] += qp.shape[a] * qp.jxw;
            }
        });
        FeSpace { mesh, dofs, rows, lumped, rule }
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs()
    }

    /// `∫ N_i` for every node.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    pub fn zero_matrix(&self) -> SparseMatrix {
        SparseMatrix::from_pattern(&self.rows)
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Assembles `Σ_cells Σ_qp local(qp)` into the free unknowns.
    pub fn assemble_vector(&self, mut local: impl FnMut(&QuadPoint, &mut [f64; 4])) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs()];
        let mut buf = [0.0; 4];
        for_each_qp(&self.mesh, &self.rule, |qp| {
            buf = [0.0; 4];
            local(qp, &mut buf);
            for a in 0..4 {
                for &(d, w) in self.dofs.terms(qp.nodes[a]) {
                    out[d] += w * buf[a];
                }
            }
        });
        out
    }

    /// Adds nodal contributions `f(node)` to the free unknowns.
    pub fn add_nodal(&self, out: &mut [f64], f: impl Fn(usize) -> f64) {
        for n in 0..self.mesh.n_nodes() {
            let terms = self.dofs.terms(n);
            if terms.is_empty() {
                continue;
            }
            let v = f(n);
            if v != 0.0 {
                for &(d, w) in terms {
                    out[d] += w * v;
                }
            }
        }
    }

    /// Assembles a matrix from local 4x4 blocks.
    pub fn assemble_matrix(&self, mut local: impl FnMut(&QuadPoint, &mut [[f64; 4]; 4])) -> SparseMatrix {
        let mut m = self.zero_matrix();
        let mut buf = [[0.0; 4]; 4];
        for_each_qp(&self.mesh, &self.rule, |qp| {
            buf = [[0.0; 4]; 4];
            local(qp, &mut buf);
            for a in 0..4 {
                for &(da, wa) in self.dofs.terms(qp.nodes[a]) {
                    for b in 0..4 {
                        let v = buf[a][b];
                        if v == 0.0 {
                            continue;
                        }
                        for &(db, wb) in self.dofs.terms(qp.nodes[b]) {
                            m.add(da, db, wa * wb * v);
                        }
                    }
                }
            }
        });
        m
    }

    /// Adds a diagonal nodal term `f(node) * δ_node` to the matrix.
    pub fn add_nodal_matrix(&self, m: &mut SparseMatrix, f: impl Fn(usize) -> f64) {
        for n in 0..self.mesh.n_nodes() {
            let terms = self.dofs.terms(n);
            if terms.is_empty() {
                continue;
            }
            let v = f(n);
            if v != 0.0 {
                for &(da, wa) in terms {
                    for &(db, wb) in terms {
                        m.add(da, db, wa * wb * v);
                    }
                }
            }
        }
    }

    /// Integral of `f` at the 2x2 Gauss points.
    pub fn integrate(&self, mut f: impl FnMut(&QuadPoint) -> f64) -> f64 {
        let mut s = 0.0;
        for_each_qp(&self.mesh, &self.rule, |qp| s += qp.jxw * f(qp));
        s
    }
}

/// `||u_h - u||_{L2}` with 3x3 Gauss quadrature per cell.
pub fn l2_error(mesh: &Mesh, field: &ScalarField, exact: impl Fn(Point) -> f64) -> f64 {
    let rule = QuadratureRule::gauss(3);
    let mut s = 0.0;
    for_each_qp(mesh, &rule, |qp| {
        let e = qp.value(&field.values) - exact(qp.x);
        s += qp.jxw * e * e;
    });
    s.sqrt()
}

/// `n` equally spaced samples from `p0` to `p1`, each paired with its arc length.
pub fn sample_line<T>(
    mesh: &Mesh,
    p0: Point,
    p1: Point,
    n: usize,
    mut eval: impl FnMut(&QuadPoint) -> T,
) -> Result<Vec<(f64, T)>, MeshError> {
    let len = (p1[0] - p0[0]).hypot(p1[1] - p0[1]);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
        let p = [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])];
        let qp = point_eval(mesh, p)?;
        out.push((t * len, eval(&qp)));
    }
    Ok(out)
}
