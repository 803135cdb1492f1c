//! Discrete white noise and its mollification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{NumError, NumResult};
use crate::grid::{Field, Grid};

/// I.i.d. `N(0, 1/(dt·dx))` per cell, from the ChaCha stream `(seed, 0)`.
pub fn sample_white_noise(grid: Grid, seed: u64) -> Field {
    sample_white_noise_stream(grid, seed, 0)
}

/// As [`sample_white_noise`] on an independent stream, for per-sample
/// reproducibility under parallel Monte Carlo.
pub fn sample_white_noise_stream(grid: Grid, seed: u64, stream: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let scale = 1.0 / (grid.dt * grid.dx()).sqrt();
    let mut f = Field::zeros(grid);
    for v in &mut f.values {
        let z: f64 = rng.sample(StandardNormal);
        *v = scale * z;
    }
    f
}

/// The standard bump `exp(-1/(1-s²))` on `(-1, 1)`.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// `ρ^(ε)(t, x) = ε^{-3} ρ(t/ε², x/ε)` with `ρ(t, x) = b(t)·b(x)` normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierSpec {
    pub eps: f64,
}

/// Normalized discrete weights of a mollifier on a particular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifierWeights {
    /// Offsets `-mx..=mx` in space.
    pub space: Vec<f64>,
    /// Offsets `-mt..=mt` in time.
    pub time: Vec<f64>,
}

fn weights(support: f64, h: f64) -> Vec<f64> {
    let m = (support / h).ceil() as i64;
    let mut w: Vec<f64> = (-m..=m).map(|j| bump(j as f64 * h / support)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

impl MollifierSpec {
    pub fn new(eps: f64) -> Self {
        Self { eps }
    }

    pub fn check(&self, grid: &Grid) -> NumResult<()> {
        let (min_x, min_t) = (4.0 * grid.dx(), 4.0 * grid.dt);
        let slack = 1.0 - 1e-12;
        if !(self.eps >= min_x * slack && self.eps * self.eps >= min_t * slack) {
            return Err(NumError::UnderResolved { eps: self.eps, min_x, min_t });
        }
        Ok(())
    }

    pub fn weights(&self, grid: &Grid) -> NumResult<MollifierWeights> {
        self.check(grid)?;
        Ok(MollifierWeights { space: weights(self.eps, grid.dx()), time: weights(self.eps * self.eps, grid.dt) })
    }

    /// Margin in rows needed so that cropped mollified values see no padding.
    pub fn time_margin(&self, grid: &Grid) -> usize {
        (self.eps * self.eps / grid.dt).ceil() as usize
    }
}

/// Space-time convolution with `ρ^(ε)`: circular in space, zero-padded in
/// time.
pub fn mollify(noise: &Field, m: &MollifierSpec) -> NumResult<Field> {
    let g = noise.grid;
    let w = m.weights(&g)?;
    let (mx, mt) = ((w.space.len() / 2) as i64, (w.time.len() / 2) as i64);
    let nx = g.nx as i64;
    let mut tmp = Field::zeros(g);
    for n in 0..g.rows() {
        let src = noise.row(n);
        let dst = tmp.row_mut(n);
        for i in 0..nx {
            let mut s = 0.0;
            for (j, wj) in w.space.iter().enumerate() {
                let y = (i - (j as i64 - mx)).rem_euclid(nx) as usize;
                s += wj * src[y];
            }
            dst[i as usize] = s;
        }
    }
    let mut out = Field::zeros(g);
    let rows = g.rows() as i64;
    for n in 0..rows {
        for (j, wj) in w.time.iter().enumerate() {
            let src = n - (j as i64 - mt);
            if src < 0 || src >= rows {
                continue;
            }
            let (a, b) = (tmp.row(src as usize).to_vec(), out.row_mut(n as usize));
            for (o, v) in b.iter_mut().zip(a) {
                *o += wj * v;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_have_unit_mass() {
        let g = Grid::new(64, 100, 1e-3).unwrap();
        let w = MollifierSpec::new(0.1).weights(&g).unwrap();
        assert!((w.space.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((w.time.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn under_resolved_is_rejected() {
        let g = Grid::new(64, 100, 1e-3).unwrap();
        assert!(matches!(MollifierSpec::new(0.05).check(&g), Err(NumError::UnderResolved { .. })));
    }
}
