use super::grid::{Field, Grid};
use super::tridiag;
use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Cell Péclet number `γh/D` above which convection is upwinded.
pub const PECLET_LIMIT: f64 = 2.0;

/// Relative residual accepted by [`solve_inverse`].
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryKind {
    /// `γu − Du′ = 0` at the birth end, no flux at the right end.
    RobinLeft,
    /// No flux at either end; births enter through the source term.
    NoFluxBoth,
    /// Flux jumps by `Lu` across the face at `x_j`.
    FluxJumpInterior { x_j: f64 },
}

/// Rank-one modification of one row: the matrix is `T − e_row cᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRow {
    pub row: usize,
    pub coeffs: Vec<(usize, f64)>,
}

impl JumpRow {
    fn dot(&self, u: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, c)| c * u[j]).sum()
    }
}

/// Finite-volume discretisation of `Mu = (γu − Du′)′ + μu` on a grid.
///
/// Row `i` reads `(Φᵢ₊₁ − Φᵢ)/h + μ̄ᵢ uᵢ`, where `Φ` are face fluxes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub bc_kind: BoundaryKind,
    pub jump_row: Option<JumpRow>,
    grid: Grid,
    mu_cells: Vec<f64>,
    outflow: f64,
    upwind_faces: usize,
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Cell averages of μ used in the zero-order term.
    pub fn mortality(&self) -> &[f64] {
        &self.mu_cells
    }

    /// Interior faces where convection was upwinded.
    pub fn upwind_faces(&self) -> usize {
        self.upwind_faces
    }

    /// Flux leaving through the right end (zero for a no-flux boundary).
    pub fn boundary_outflow(&self, u: &[f64]) -> f64 {
        self.outflow * u[u.len() - 1]
    }

    /// The operator without its jump row.
    pub fn without_jump(&self) -> Self {
        Self {
            jump_row: None,
            ..self.clone()
        }
    }

    /// Multiplies the jump functional by `c`.
    pub fn with_jump_scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        if let Some(j) = out.jump_row.as_mut() {
            for (_, v) in j.coeffs.iter_mut() {
                *v *= c;
            }
        }
        out
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = tridiag::apply(&self.lower, &self.diag, &self.upper, u);
        if let Some(j) = &self.jump_row {
            out[j.row] -= j.dot(u);
        }
        out
    }

    /// Solves `(αI + βA) x = rhs`.
    pub fn solve_affine(&self, alpha: f64, beta: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        let lower: Vec<f64> = self.lower.iter().map(|v| beta * v).collect();
        let upper: Vec<f64> = self.upper.iter().map(|v| beta * v).collect();
        let diag: Vec<f64> = self.diag.iter().map(|v| alpha + beta * v).collect();
        let y = tridiag::solve(&lower, &diag, &upper, rhs)?;
        let Some(j) = &self.jump_row else {
            return Ok(y);
        };
        // Sherman–Morrison for T − e_r (βc)ᵀ.
        let mut e = vec![0.0; rhs.len()];
        e[j.row] = 1.0;
        let z = tridiag::solve(&lower, &diag, &upper, &e)?;
        let denom = 1.0 - beta * j.dot(&z);
        if denom.abs() < tridiag::PIVOT_FLOOR || !denom.is_finite() {
            return Err(Error::Singular {
                row: j.row,
                pivot: denom,
            });
        }
        let f = beta * j.dot(&y) / denom;
        Ok(y.iter().zip(&z).map(|(a, b)| a + f * b).collect())
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solve_affine(0.0, 1.0, rhs)
    }

    /// Solves `Aᵀ x = rhs`.
    pub fn solve_transposed(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let y = tridiag::solve_transposed(&self.lower, &self.diag, &self.upper, rhs)?;
        let Some(j) = &self.jump_row else {
            return Ok(y);
        };
        // (T − e cᵀ)ᵀ = Tᵀ − c eᵀ
        let mut c = vec![0.0; rhs.len()];
        for &(i, v) in &j.coeffs {
            c[i] += v;
        }
        let z = tridiag::solve_transposed(&self.lower, &self.diag, &self.upper, &c)?;
        let denom = 1.0 - z[j.row];
        if denom.abs() < tridiag::PIVOT_FLOOR {
            return Err(Error::Singular {
                row: j.row,
                pivot: denom,
            });
        }
        let f = y[j.row] / denom;
        Ok(y.iter().zip(&z).map(|(a, b)| a + f * b).collect())
    }
}

/// Face flux `Φ = a u_left + b u_right`.
fn face_coefficients(gamma: f64, d: f64, h: f64) -> (f64, f64, bool) {
    if d == 0.0 || gamma * h / d > PECLET_LIMIT {
        (gamma + d / h, -d / h, true)
    } else {
        (0.5 * gamma + d / h, 0.5 * gamma - d / h, false)
    }
}

/// Assembles `M` with zero flux at the left end (the homogeneous Robin
/// condition) and no flux at the right end. A pure-transport model on a
/// bounded domain lets mass leave through the right end instead.
pub fn assemble_operator(m: &ModelSpec, g: &Grid) -> Result<DiscreteOperator> {
    let n = g.n_cells();
    let h = g.spacing();
    let d = m.diffusion;
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::Assembly(format!("invalid diffusion coefficient {d}")));
    }

    // a[f], b[f] for faces 0..=n
    let mut a = vec![0.0; n + 1];
    let mut b = vec![0.0; n + 1];
    let mut upwind_faces = 0;
    for f in 1..n {
        let gamma = m.gamma_at(g.face(f));
        if !gamma.is_finite() {
            return Err(Error::Assembly(format!("growth rate {gamma} at x = {}", g.face(f))));
        }
        let (af, bf, up) = face_coefficients(gamma, d, h);
        a[f] = af;
        b[f] = bf;
        upwind_faces += up as usize;
    }
    let outflow = if d == 0.0 && !m.is_semi_infinite() {
        m.gamma_at(g.x_right())
    } else {
        0.0
    };
    a[n] = outflow;

    let mu_cells = g.cell_averages(|x| m.mu_at(x), &m.mu.kinks());
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        lower[i] = -a[i] / h;
        upper[i] = b[i + 1] / h;
        diag[i] = (a[i + 1] - b[i]) / h + mu_cells[i];
        let ok = diag[i] > 0.0 && lower[i] <= 0.0 && upper[i] <= 0.0 && diag[i].is_finite();
        if !ok {
            return Err(Error::Assembly(format!(
                "row {i} is not an M-matrix row: ({}, {}, {})",
                lower[i], diag[i], upper[i]
            )));
        }
    }
    lower[0] = 0.0;
    upper[n - 1] = 0.0;

    let bc_kind = if m.x0 == m.x_min {
        BoundaryKind::RobinLeft
    } else {
        BoundaryKind::NoFluxBoth
    };
    Ok(DiscreteOperator {
        lower,
        diag,
        upper,
        bc_kind,
        jump_row: None,
        grid: *g,
        mu_cells,
        outflow,
        upwind_faces,
    })
}

/// Lagrange weights for quadratic interpolation of cell averages at `p`
/// from the three nearest cells.
pub fn sample_weights(g: &Grid, p: f64) -> [(usize, f64); 3] {
    let n = g.n_cells();
    let c = g.cell_of(p) as isize;
    let start = (c - 1).clamp(0, n as isize - 3) as usize;
    let xs = [g.center(start), g.center(start + 1), g.center(start + 2)];
    let mut out = [(0, 0.0); 3];
    for i in 0..3 {
        let mut w = 1.0;
        for j in 0..3 {
            if i != j {
                w *= (p - xs[j]) / (xs[i] - xs[j]);
            }
        }
        out[i] = (start + i, w);
    }
    out
}

/// Weights `wᵢ` with `Lu ≈ Σ wᵢ uᵢ` for the model's birth functional.
pub fn birth_weights(m: &ModelSpec, g: &Grid) -> Vec<(usize, f64)> {
    match m.birth_sample_point {
        Some(p) => {
            let scale = m.birth_multiplicity * m.gamma_at(p);
            sample_weights(g, p).iter().map(|&(i, w)| (i, scale * w)).collect()
        }
        None => {
            let h = g.spacing();
            let mut kinks = m.beta.kinks();
            kinks.extend(m.mu.kinks());
            g.cell_averages(|x| m.beta_at(x), &kinks)
                .into_iter()
                .enumerate()
                .filter(|(_, b)| *b != 0.0)
                .map(|(i, b)| (i, m.birth_multiplicity * h * b))
                .collect()
        }
    }
}

/// `M⁻¹ rhs`, with the residual checked against `1e−10 ‖rhs‖∞`.
pub fn solve_inverse(op: &DiscreteOperator, rhs: &Field) -> Result<Field> {
    if rhs.grid != op.grid {
        return Err(Error::Domain("right-hand side lives on a different grid".into()));
    }
    let scale = rhs.max_abs();
    let mut x = op.solve(&rhs.values)?;
    for _ in 0..3 {
        let ax = op.apply(&x);
        let r: Vec<f64> = rhs.values.iter().zip(&ax).map(|(b, v)| b - v).collect();
        let res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if res <= RESIDUAL_TOL * scale {
            return Field::from_values(&op.grid, x);
        }
        let dx = op.solve(&r)?;
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    let ax = op.apply(&x);
    let res = rhs
        .values
        .iter()
        .zip(&ax)
        .fold(0.0f64, |m, (b, v)| m.max((b - v).abs()));
    if res <= RESIDUAL_TOL * scale {
        Field::from_values(&op.grid, x)
    } else {
        Err(Error::Singular {
            row: 0,
            pivot: res / scale,
        })
    }
}

/// Numerical Green's column `G(·, s)`: the inverse applied to the normalised
/// indicator of the cell containing `s`.
pub fn green_column(m: &ModelSpec, g: &Grid, s: f64) -> Result<Field> {
    let op = assemble_operator(m, g)?;
    solve_inverse(&op, &Field::cell_indicator(g, s))
}

/// Operator with the flux jump `Φ(x_j⁺) − Φ(x_j⁻) = Lu` at the face nearest `x_j`.
pub fn assemble_interior_jump(m: &ModelSpec, g: &Grid, x_j: f64) -> Result<DiscreteOperator> {
    let face = g.nearest_face(x_j);
    if !(x_j > g.x_left() && x_j < g.x_right()) || face < 2 || face + 2 > g.n_cells() {
        return Err(Error::Domain(format!(
            "jump point {x_j} must lie at least two cells inside [{}, {}]",
            g.x_left(),
            g.x_right()
        )));
    }
    let mut op = assemble_operator(m, g)?;
    let h = g.spacing();
    op.bc_kind = BoundaryKind::FluxJumpInterior { x_j: g.face(face) };
    op.jump_row = Some(JumpRow {
        row: face,
        coeffs: birth_weights(m, g).into_iter().map(|(i, w)| (i, w / h)).collect(),
    });
    Ok(op)
}

/// Growth exponent of `u′ = −Au`: minus the eigenvalue of `A` nearest to
/// `shift`, found by inverse iteration.
pub fn leading_eigenvalue(op: &DiscreteOperator, shift: f64) -> Result<f64> {
    let n = op.diag.len();
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut nu = f64::NAN;
    let mut change = f64::INFINITY;
    for it in 0..500 {
        let y = op.solve_affine(-shift, 1.0, &x)?;
        let xy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let next = shift + 1.0 / xy;
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let sign = if y.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        x = y.iter().map(|v| sign * v / norm).collect();
        change = (next - nu).abs();
        nu = next;
        if it > 2 && change <= 1e-12 * (1.0 + nu.abs()) {
            return Ok(-nu);
        }
    }
    Err(Error::NoConvergence {
        iterations: 500,
        change,
    })
}
