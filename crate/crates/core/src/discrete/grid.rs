use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::quad;

/// Smallest grid accepted by the solvers.
pub const MIN_CELLS: usize = 16;

/// Uniform cell-centred grid on `[x_left, x_right]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_left: f64,
    x_right: f64,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(x_left: f64, x_right: f64, n_cells: usize) -> Result<Self> {
        if n_cells < MIN_CELLS {
            return Err(Error::Domain(format!(
                "grid needs at least {MIN_CELLS} cells, got {n_cells}"
            )));
        }
        if !(x_left.is_finite() && x_right.is_finite() && x_left < x_right) {
            return Err(Error::Domain(format!("invalid grid interval [{x_left}, {x_right}]")));
        }
        Ok(Self {
            x_left,
            x_right,
            n: n_cells,
            h: (x_right - x_left) / n_cells as f64,
        })
    }

    /// Grid on the model's computational domain with at least `n_min` cells
    /// and spacing at most `1/(4 k_max)`.
    ///
    /// On a truncated semi-infinite domain the spacing is `1/(4 k_max j)` for
    /// an integer `j`, so `x0 + 1/k` falls on a face for every power of two
    /// `k ≤ k_max`; the right end is moved outwards to the next face.
    pub fn for_model(m: &ModelSpec, n_min: usize, k_max: u32) -> Result<Self> {
        let left = m.x_min;
        let right = m.truncation();
        let len = right - left;
        if !(len > 0.0 && len.is_finite()) {
            return Err(Error::Domain(format!("cannot grid [{left}, {right}]")));
        }
        let n_min = n_min.max(MIN_CELLS);
        let unit = 1.0 / (4.0 * k_max.max(1) as f64);
        let h_max = (len / n_min as f64).min(unit);
        if m.is_semi_infinite() && m.x0 == left {
            let j = (unit / h_max * (1.0 - 1e-12)).ceil().max(1.0);
            let h = unit / j;
            let n = (len / h * (1.0 - 1e-12)).ceil() as usize;
            Self::new(left, left + n as f64 * h, n.max(MIN_CELLS))
        } else {
            let n = (len / h_max * (1.0 - 1e-12)).ceil() as usize;
            Self::new(left, right, n)
        }
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    pub fn n_cells(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn face(&self, i: usize) -> f64 {
        if i == self.n {
            self.x_right
        } else {
            self.x_left + i as f64 * self.h
        }
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_left + (i as f64 + 0.5) * self.h
    }

    pub fn face_positions(&self) -> Vec<f64> {
        (0..=self.n).map(|i| self.face(i)).collect()
    }

    pub fn cell_centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    /// Index of the cell containing `x` (clamped to the grid).
    pub fn cell_of(&self, x: f64) -> usize {
        let i = ((x - self.x_left) / self.h).floor();
        if i < 0.0 {
            0
        } else {
            (i as usize).min(self.n - 1)
        }
    }

    /// Index of the face nearest to `x`.
    pub fn nearest_face(&self, x: f64) -> usize {
        let i = ((x - self.x_left) / self.h).round();
        if i < 0.0 {
            0
        } else {
            (i as usize).min(self.n)
        }
    }

    /// Cell averages of `f`, integrated with 5-point Gauss–Legendre on each
    /// cell split at the given kinks.
    pub fn cell_averages<F: Fn(f64) -> f64>(&self, f: F, kinks: &[f64]) -> Vec<f64> {
        let mut sorted: Vec<f64> = kinks.iter().copied().filter(|x| x.is_finite()).collect();
        sorted.sort_by(f64::total_cmp);
        (0..self.n)
            .map(|i| {
                let (a, b) = (self.face(i), self.face(i + 1));
                let lo = sorted.partition_point(|&x| x <= a);
                let hi = sorted.partition_point(|&x| x < b);
                quad::gauss_legendre_split(&f, a, b, &sorted[lo..hi]) / (b - a)
            })
            .collect()
    }
}

/// Cell averages on a grid: a discrete element of L¹.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<f64>,
    pub grid: Grid,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            values: vec![0.0; grid.n_cells()],
            grid: *grid,
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::Domain(format!(
                "field has {} values for a grid of {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        Ok(Self { values, grid: *grid })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: &Grid, f: F, kinks: &[f64]) -> Self {
        Self {
            values: grid.cell_averages(f, kinks),
            grid: *grid,
        }
    }

    /// Normalised indicator of the single cell containing `s`.
    pub fn cell_indicator(grid: &Grid, s: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.values[grid.cell_of(s)] = 1.0 / grid.spacing();
        f
    }

    /// `h Σ uᵢ`
    pub fn mass(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }

    pub fn l1_norm(&self) -> f64 {
        self.grid.spacing() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `h Σ |uᵢ − f(xᵢ)|` against a point function evaluated at cell centres.
    pub fn l1_distance_to<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let g = &self.grid;
        g.spacing()
            * self
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| (v - f(g.center(i))).abs())
                .sum::<f64>()
    }
}
