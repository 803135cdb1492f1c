//! Monte-Carlo expectations of tree evaluations under mollified white noise.

use std::collections::BTreeSet;

use mallitree::{DecoratedTree, MultiIndex, TypeId};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{NumError, NumResult};
use crate::grid::Grid;
use crate::lift::{kernel_depth, lift_eval, LiftGrid, Sources};
use crate::noise::{mollify, sample_white_noise_stream, MollifierSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSetup {
    pub eps: f64,
    pub nx: usize,
    pub dt: f64,
    /// Time support of the kernel cutoff.
    pub support: f64,
    pub samples: usize,
    pub seed: u64,
}

impl McSetup {
    /// `ε = 1/8` on 64 points with `dt = ε²/8` and kernel support `1/4`.
    pub fn standard(samples: usize, seed: u64) -> Self {
        let eps = 0.125;
        Self { eps, nx: 64, dt: eps * eps / 8.0, support: 0.25, samples, seed }
    }

    pub fn lift_grid(&self, tree: &DecoratedTree) -> LiftGrid {
        LiftGrid::new(self.nx, self.dt, self.support, kernel_depth(tree))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: usize,
}

fn noise_types(tree: &DecoratedTree) -> Vec<TypeId> {
    let set: BTreeSet<TypeId> = tree.noise_edges().into_iter().map(|u| tree.edge(u).unwrap().ty.clone()).collect();
    set.into_iter().collect()
}

/// Mollified noise on the window of `lg`, one independent field per base
/// noise type, drawn from streams determined by `(seed, index)`.
pub fn sample_sources(tree: &DecoratedTree, setup: &McSetup, lg: LiftGrid, index: u64) -> NumResult<Sources> {
    let m = MollifierSpec::new(setup.eps);
    let types = noise_types(tree);
    let bases: Vec<TypeId> = types.iter().map(|t| t.base()).collect::<BTreeSet<_>>().into_iter().collect();
    let probe = Grid { nx: lg.nx, nt: lg.rows(), dt: lg.dt, t0: 0.0 };
    let margin = m.time_margin(&probe);
    let grid = Grid::new(lg.nx, lg.rows() - 1 + 2 * margin, lg.dt)?;
    let mut fields = Vec::new();
    for (b, _) in bases.iter().enumerate() {
        let stream = index * bases.len() as u64 + b as u64;
        let xi = mollify(&sample_white_noise_stream(grid, setup.seed, stream), &m)?;
        fields.push(xi.crop_time(margin, lg.rows() - 1)?.values);
    }
    Ok(types
        .iter()
        .map(|t| {
            let b = bases.iter().position(|x| *x == t.base()).unwrap();
            (t.clone(), fields[b].clone())
        })
        .collect())
}

/// Sample mean and standard error of `(Π τ)(0)` over `setup.samples`
/// realizations.
pub fn mc_expectation(tree: &DecoratedTree, setup: &McSetup) -> NumResult<McEstimate> {
    let noises = tree.noise_edges().len();
    if noises > 4 {
        return Err(NumError::Budget(format!("{noises} noise edges (at most 4)")));
    }
    if setup.samples < 2 {
        return Err(NumError::Budget("need at least two samples".into()));
    }
    let lg = setup.lift_grid(tree);
    let values: Vec<f64> = (0..setup.samples as u64)
        .into_par_iter()
        .map(|i| lift_eval(tree, &sample_sources(tree, setup, lg, i)?, lg))
        .collect::<NumResult<_>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McEstimate { estimate: mean, stderr: (var / n).sqrt(), samples: values.len() })
}

fn autocorrelation(w: &[f64], lag: i64) -> f64 {
    let n = w.len() as i64;
    (0..n).filter(|&m| (0..n).contains(&(m + lag))).map(|m| w[m as usize] * w[(m + lag) as usize]).sum()
}

/// `E[(Π I(Ξ)Ξ)(0)] = Σ_{j,y} K_j(-y)·Cov(ξ^ε(0,0), ξ^ε(-j,y))` evaluated
/// exactly for the discrete kernel and mollifier.
pub fn cherry_oracle(setup: &McSetup, kernel: &TypeId) -> NumResult<f64> {
    let lg = LiftGrid::new(setup.nx, setup.dt, setup.support, 1);
    let k = lg.real_kernel(kernel, &MultiIndex::zero(1))?;
    let g = Grid::new(setup.nx, 1, setup.dt)?;
    let w = MollifierSpec::new(setup.eps).weights(&g)?;
    let nx = setup.nx as i64;
    let mx = (w.space.len() / 2) as i64;
    let ax = |y: i64| -> f64 {
        let mut s = 0.0;
        for a in -mx..=mx {
            for b in -mx..=mx {
                if (a - b - y).rem_euclid(nx) == 0 {
                    s += w.space[(a + mx) as usize] * w.space[(b + mx) as usize];
                }
            }
        }
        s
    };
    let mut total = 0.0;
    for (j, kj) in k.iter().enumerate() {
        let at = autocorrelation(&w.time, j as i64);
        if at == 0.0 {
            continue;
        }
        for y in 0..nx {
            total += kj[((-y).rem_euclid(nx)) as usize] * at * ax(y);
        }
    }
    Ok(total / (setup.dt / setup.nx as f64))
}
