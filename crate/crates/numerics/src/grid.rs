//! Space-time grids on `[0, T] × 𝕋` and fields sampled on them.

use std::io::Write;

use crate::error::{NumError, NumResult};

/// `Nx` points on the unit torus, `Nt` steps of size `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub nt: usize,
    pub dt: f64,
    /// Time of row 0.
    pub t0: f64,
}

impl Grid {
    pub fn new(nx: usize, nt: usize, dt: f64) -> NumResult<Self> {
        if !nx.is_power_of_two() || nx < 4 {
            return Err(NumError::Grid(format!("Nx = {nx} must be a power of two >= 4")));
        }
        if nt == 0 || !(dt > 0.0) {
            return Err(NumError::Grid(format!("need Nt > 0 and dt > 0 (Nt = {nt}, dt = {dt})")));
        }
        Ok(Self { nx, nt, dt, t0: 0.0 })
    }

    /// Grid whose step count is `T/dt`, which must be an integer exactly.
    pub fn from_rationals(nx: usize, t_final: mallitree::Q, dt: mallitree::Q) -> NumResult<Self> {
        if dt <= mallitree::Q::from_integer(0) {
            return Err(NumError::Grid("dt must be positive".into()));
        }
        let n = t_final / dt;
        if !n.is_integer() {
            return Err(NumError::Grid(format!("T/dt = {n} is not an integer")));
        }
        let nt = usize::try_from(n.to_integer()).map_err(|_| NumError::Grid("T/dt out of range".into()))?;
        Self::new(nx, nt, mallitree::q::to_f64(&dt))
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn t(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn t_final(&self) -> f64 {
        self.t(self.nt)
    }

    pub fn rows(&self) -> usize {
        self.nt + 1
    }

    /// Same torus, half the step, twice the steps.
    pub fn refined(&self) -> Self {
        Self { nt: 2 * self.nt, dt: self.dt / 2.0, ..*self }
    }
}

/// `(Nt+1) × Nx` values, row `n` at time `t0 + n·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.rows() * grid.nx] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for n in 0..grid.rows() {
            let t = grid.t(n);
            for (i, v) in out.row_mut(n).iter_mut().enumerate() {
                *v = f(t, grid.x(i));
            }
        }
        out
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.rows() * grid.nx] }
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.grid.nx..(n + 1) * self.grid.nx]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        let nx = self.grid.nx;
        &mut self.values[n * nx..(n + 1) * nx]
    }

    pub fn at(&self, n: usize, i: usize) -> f64 {
        self.values[n * self.grid.nx + i]
    }

    fn check_same(&self, other: &Field) -> NumResult<()> {
        if self.grid.nx != other.grid.nx || self.grid.nt != other.grid.nt {
            return Err(NumError::Shape(format!(
                "{}x{} vs {}x{}",
                self.grid.rows(),
                self.grid.nx,
                other.grid.rows(),
                other.grid.nx
            )));
        }
        Ok(())
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> NumResult<Field> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Ok(Field { grid: self.grid, values })
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|x| a * x).collect() }
    }

    /// `dt·dx·Σ_{n ∈ rows} self·other`.
    pub fn pair_rows(&self, other: &Field, rows: std::ops::Range<usize>) -> NumResult<f64> {
        self.check_same(other)?;
        let g = self.grid;
        let mut s = 0.0;
        for n in rows {
            s += self.row(n).iter().zip(other.row(n)).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(s * g.dt * g.dx())
    }

    /// Discrete space-time L² norm over all rows.
    pub fn l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.dt * self.grid.dx()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Average consecutive pairs of cells in time: the grid with step `2dt`.
    pub fn coarsen_time(&self) -> NumResult<Field> {
        let g = self.grid;
        if g.nt % 2 != 0 {
            return Err(NumError::Grid(format!("cannot coarsen Nt = {} in time", g.nt)));
        }
        let cg = Grid { nt: g.nt / 2, dt: 2.0 * g.dt, ..g };
        let mut out = Field::zeros(cg);
        for n in 0..cg.nt {
            let (a, b) = (self.row(2 * n), self.row(2 * n + 1));
            for (i, v) in out.row_mut(n).iter_mut().enumerate() {
                *v = 0.5 * (a[i] + b[i]);
            }
        }
        Ok(out)
    }

    /// Rows `from..from+len` as a field starting at the time of row `from`.
    pub fn crop_time(&self, from: usize, nt: usize) -> NumResult<Field> {
        if from + nt >= self.grid.rows() {
            return Err(NumError::Shape(format!("rows {from}..={} out of {}", from + nt, self.grid.rows())));
        }
        let nx = self.grid.nx;
        let grid = Grid { nt, t0: self.grid.t(from), ..self.grid };
        Ok(Field { grid, values: self.values[from * nx..(from + nt + 1) * nx].to_vec() })
    }

    pub fn write_csv(&self, mut w: impl Write) -> NumResult<()> {
        writeln!(w, "t,x,value")?;
        for n in 0..self.grid.rows() {
            for (i, v) in self.row(n).iter().enumerate() {
                writeln!(w, "{},{},{:e}", self.grid.t(n), self.grid.x(i), v)?;
            }
        }
        Ok(())
    }

    /// Header `Nx: u64, Nt: u64, dt: f64`, then the values row-major, all
    /// little-endian.
    pub fn write_binary(&self, mut w: impl Write) -> NumResult<()> {
        w.write_all(&(self.grid.nx as u64).to_le_bytes())?;
        w.write_all(&(self.grid.nt as u64).to_le_bytes())?;
        w.write_all(&self.grid.dt.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(bytes: &[u8]) -> NumResult<Field> {
        let word = |i: usize| -> NumResult<[u8; 8]> {
            bytes.get(8 * i..8 * i + 8).map(|b| b.try_into().unwrap()).ok_or_else(|| NumError::Shape("truncated field".into()))
        };
        let nx = u64::from_le_bytes(word(0)?) as usize;
        let nt = u64::from_le_bytes(word(1)?) as usize;
        let dt = f64::from_le_bytes(word(2)?);
        let grid = Grid::new(nx, nt, dt)?;
        let n = grid.rows() * nx;
        if bytes.len() != 8 * (3 + n) {
            return Err(NumError::Shape(format!("expected {} values", n)));
        }
        let values = (0..n).map(|i| word(3 + i).map(f64::from_le_bytes)).collect::<NumResult<_>>()?;
        Ok(Field { grid, values })
    }
}
