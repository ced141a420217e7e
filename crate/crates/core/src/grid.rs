//! Periodic spatial grids, snapshot matrices and discrete shift transports.
//!
//! A shift transport `T` maps a field `q(x)` to `q(x - delta)` on a periodic
//! equidistant grid. Off-lattice shifts are interpolated with Lagrange
//! polynomials of degree 5 on a centered 6-point stencil, which is exact for
//! integer lattice shifts and has interpolation error of order `O(h^6)` on
//! smooth data.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Result, SpodError};

/// Interpolation nodes of the 6-point stencil, relative to the floor index.
const STENCIL_NODES: [f64; 6] = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0];

/// Uniform periodic spatial grid with `m_points` points starting at `x_min`
/// with lattice spacing `dx`. Point `i` sits at `x_min + i * dx`; the right
/// domain endpoint is excluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    m_points: usize,
    x_min: f64,
    dx: f64,
}

impl SpatialGrid {
    pub fn new(m_points: usize, x_min: f64, dx: f64) -> Result<Self> {
        if m_points < 6 {
            return Err(SpodError::Domain(format!(
                "grid needs at least 6 points for the interpolation stencil, got {m_points}"
            )));
        }
        if !(dx > 0.0) || !dx.is_finite() || !x_min.is_finite() {
            return Err(SpodError::Domain(format!(
                "invalid grid parameters: x_min = {x_min}, dx = {dx}"
            )));
        }
        Ok(Self {
            m_points,
            x_min,
            dx,
        })
    }

    /// Grid of `m_points` points uniformly spanning `[x_min, x_max)`.
    pub fn uniform(m_points: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(SpodError::Domain(format!(
                "empty domain [{x_min}, {x_max})"
            )));
        }
        Self::new(m_points, x_min, (x_max - x_min) / m_points as f64)
    }

    pub fn len(&self) -> usize {
        self.m_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Coordinate of grid point `i`.
    pub fn coord(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    /// Length of the periodic domain, `m_points * dx`.
    pub fn domain_length(&self) -> f64 {
        self.m_points as f64 * self.dx
    }
}

/// Space-time data: an `M x N` matrix whose columns are spatial snapshots at
/// strictly increasing time samples.
#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    values: Array2<f64>,
    grid: SpatialGrid,
    times: Vec<f64>,
}

impl SnapshotMatrix {
    pub fn new(values: Array2<f64>, grid: SpatialGrid, times: Vec<f64>) -> Result<Self> {
        let (m, n) = values.dim();
        if m != grid.len() {
            return Err(SpodError::Shape(format!(
                "matrix has {m} rows but grid has {} points",
                grid.len()
            )));
        }
        if n != times.len() {
            return Err(SpodError::Shape(format!(
                "matrix has {n} columns but {} time samples given",
                times.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SpodError::Contract(
                "time samples must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            values,
            grid,
            times,
        })
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_space(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_time(&self) -> usize {
        self.values.ncols()
    }
}

/// Interpolation stencil for one fractional target index: the leftmost grid
/// index (modulo `M`) and the six Lagrange basis weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilWeights {
    pub base_index: usize,
    pub weights: [f64; 6],
}

/// Lagrange basis values of degree 5 at fractional offset `f` in `[0, 1)`,
/// for the nodes `{-2, -1, 0, 1, 2, 3}`.
///
/// The weights sum to 1 (constant reproduction) and reduce to a one-hot
/// vector at `f = 0`.
pub fn lagrange_weights(f: f64) -> Result<[f64; 6]> {
    if !(0.0..1.0).contains(&f) {
        return Err(SpodError::Domain(format!(
            "fractional offset must lie in [0, 1), got {f}"
        )));
    }
    let mut w = [0.0; 6];
    for (j, wj) in w.iter_mut().enumerate() {
        let xj = STENCIL_NODES[j];
        let mut p = 1.0;
        for (m, &xm) in STENCIL_NODES.iter().enumerate() {
            if m != j {
                p *= (f - xm) / (xj - xm);
            }
        }
        *wj = p;
    }
    Ok(w)
}

/// Stencil for interpolating at fractional grid index `target` on a periodic
/// grid of `m` points.
pub fn stencil_for(target: f64, m: usize) -> Result<StencilWeights> {
    let i0 = target.floor();
    let f = target - i0;
    // round-off can push f to exactly 1.0 for targets just below an integer
    let (i0, f) = if f >= 1.0 { (i0 + 1.0, 0.0) } else { (i0, f) };
    let base_index = (i0 as i64 - 2).rem_euclid(m as i64) as usize;
    Ok(StencilWeights {
        base_index,
        weights: lagrange_weights(f)?,
    })
}

/// Shift a periodic field by `delta` (in physical units): the result
/// interpolates `q` at `x - delta`, i.e. entry `m` is read at fractional
/// index `m - delta/dx` with periodic wrap-around.
pub fn apply_shift(q: ArrayView1<'_, f64>, delta: f64, grid: &SpatialGrid) -> Result<Array1<f64>> {
    if !delta.is_finite() {
        return Err(SpodError::Domain(format!("non-finite shift {delta}")));
    }
    if q.len() != grid.len() {
        return Err(SpodError::Shape(format!(
            "field has {} entries but grid has {} points",
            q.len(),
            grid.len()
        )));
    }
    let m = grid.len();
    // m - delta/dx = m + g with g constant over the column; hoist the
    // fractional split so every target uses the same weights
    let mut g = -delta / grid.dx();
    // snap to the lattice when the division misses an integer by round-off,
    // so lattice shifts stay exact circular permutations
    let nearest = g.round();
    if (g - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
        g = nearest;
    }
    let g_floor = g.floor();
    let mut f = g - g_floor;
    let mut base = g_floor as i64;
    if f >= 1.0 {
        f = 0.0;
        base += 1;
    }
    let w = lagrange_weights(f)?;
    let m_i = m as i64;
    let base = (base - 2).rem_euclid(m_i);

    let mut out = Array1::zeros(m);
    if f == 0.0 {
        // pure circular permutation
        let roll = (base + 2).rem_euclid(m_i) as usize;
        for i in 0..m {
            out[i] = q[(i + roll) % m];
        }
        return Ok(out);
    }
    for i in 0..m {
        let start = (i as i64 + base).rem_euclid(m_i) as usize;
        let mut acc = 0.0;
        for (j, &wj) in w.iter().enumerate() {
            acc += wj * q[(start + j) % m];
        }
        out[i] = acc;
    }
    Ok(out)
}

/// One co-moving frame's transport: per-snapshot shift amounts (physical
/// units) over a fixed grid.
#[derive(Debug, Clone)]
pub struct TransportOperator {
    shifts: Vec<f64>,
    grid: SpatialGrid,
}

impl TransportOperator {
    pub fn new(shifts: Vec<f64>, grid: SpatialGrid) -> Result<Self> {
        if let Some(bad) = shifts.iter().find(|s| !s.is_finite()) {
            return Err(SpodError::Domain(format!("non-finite shift {bad}")));
        }
        Ok(Self { shifts, grid })
    }

    pub fn shifts(&self) -> &[f64] {
        &self.shifts
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn n_time(&self) -> usize {
        self.shifts.len()
    }

    fn check_shape(&self, q: &ArrayView2<'_, f64>) -> Result<()> {
        let (m, n) = q.dim();
        if m != self.grid.len() {
            return Err(SpodError::Shape(format!(
                "matrix has {m} rows but grid has {} points",
                self.grid.len()
            )));
        }
        if n != self.shifts.len() {
            return Err(SpodError::Shape(format!(
                "matrix has {n} columns but operator has {} shift samples",
                self.shifts.len()
            )));
        }
        Ok(())
    }

    /// Apply `T`: column `n` becomes `q(x - delta_n)`.
    pub fn forward(&self, q: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.transport(q, 1.0)
    }

    /// Apply `T^{-1}` (approximate inverse): column `n` becomes `q(x + delta_n)`.
    pub fn backward(&self, q: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.transport(q, -1.0)
    }

    fn transport(&self, q: ArrayView2<'_, f64>, sign: f64) -> Result<Array2<f64>> {
        self.check_shape(&q)?;
        let mut out = Array2::zeros(q.raw_dim());
        for (n, &delta) in self.shifts.iter().enumerate() {
            let col = apply_shift(q.column(n), sign * delta, &self.grid)?;
            out.column_mut(n).assign(&col);
        }
        Ok(out)
    }
}
