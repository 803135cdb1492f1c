//! Quadrature evaluation of the canonical lift of a tree at a base point.
//!
//! Kernel edges convolve with `K(t, x) = χ(t)·p_t(x)`, the periodic heat
//! kernel cut off smoothly in time; dual kernel edges convolve with
//! `K(-t, -x)` and so look into the future. Noise edges multiply by the
//! sampled function assigned to their type, and node decorations multiply by
//! `(t - t_z)^{n₀}(x - x_z)^{n₁}`.

use std::collections::HashMap;
use std::f64::consts::TAU;

use mallitree::{DecoratedTree, MultiIndex, NodeId, TypeId};
use rustfft::num_complex::Complex64;

use crate::error::{NumError, NumResult};
use crate::spectral::Spectral;

/// Smooth cutoff equal to 1 on `[0, L/2]` and 0 beyond `L`.
pub fn time_cutoff(s: f64, support: f64) -> f64 {
    let r = s / support;
    if r <= 0.5 {
        1.0
    } else if r >= 1.0 {
        0.0
    } else {
        let e = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
        e(1.0 - r) / (e(1.0 - r) + e(r - 0.5))
    }
}

/// Space-time window centred at the base point `z`: row `half` is `t_z`
/// and column 0 is `x_z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftGrid {
    pub nx: usize,
    pub dt: f64,
    pub half: usize,
    /// Time support `L` of the kernel cutoff.
    pub support: f64,
}

impl LiftGrid {
    /// Window wide enough for trees of kernel depth `depth`.
    pub fn new(nx: usize, dt: f64, support: f64, depth: usize) -> Self {
        let g = Self { nx, dt, half: 0, support };
        Self { half: depth.max(1) * g.lags(), ..g }
    }

    pub fn rows(&self) -> usize {
        2 * self.half + 1
    }

    pub fn len(&self) -> usize {
        self.rows() * self.nx
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest lag with nonzero kernel weight.
    pub fn lags(&self) -> usize {
        (self.support / self.dt).ceil() as usize
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.nx as f64
    }

    /// `t - t_z` on row `i`.
    pub fn rel_t(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64) * self.dt
    }

    /// Periodic `x - x_z ∈ [-1/2, 1/2)` on column `j`.
    pub fn rel_x(&self, j: usize) -> f64 {
        let x = j as f64 * self.dx();
        if x >= 0.5 {
            x - 1.0
        } else {
            x
        }
    }

    /// Samples `f(t, x)` on the window around `z = (t_z, x_z)`.
    pub fn sample(&self, z: (f64, f64), f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.rows() {
            for j in 0..self.nx {
                out.push(f(z.0 + self.rel_t(i), z.1 + j as f64 * self.dx()));
            }
        }
        out
    }

    /// Fourier weights per lag `W_j(k)` of the kernel of `ty` differentiated
    /// by `dec = (k₀, k₁)`.
    pub fn kernel_weights(&self, ty: &TypeId, dec: &MultiIndex) -> NumResult<Vec<Vec<Complex64>>> {
        if dec.len() != 2 {
            return Err(NumError::Config(format!("lift evaluation needs a 1+1 dimensional scaling, got {}", dec.len())));
        }
        let (k0, k1) = (dec.0[0] as i32, dec.0[1] as i32);
        let dual = ty.is_dual();
        let mut out = Vec::with_capacity(self.lags() + 1);
        for j in 0..=self.lags() {
            let s = j as f64 * self.dt;
            let (a, b) = (((j as f64) - 0.5).max(0.0) * self.dt, (j as f64 + 0.5) * self.dt);
            let chi = time_cutoff(s, self.support);
            let row = (0..self.nx)
                .map(|m| {
                    let lam = Spectral::lambda(self.nx, m);
                    let cell = if lam == 0.0 { b - a } else { ((-lam * a).exp() - (-lam * b).exp()) / lam };
                    let t = if dual { lam.powi(k0) } else { (-lam).powi(k0) };
                    let x = Complex64::new(0.0, TAU * Spectral::freq(self.nx, m)).powi(k1);
                    x * (chi * cell * t)
                })
                .collect();
            out.push(row);
        }
        Ok(out)
    }

    /// The kernel in real space at lag `j`: `K_j(x) = (1/Nx) Σ_k W_j(k) e^{2πikx}`.
    pub fn real_kernel(&self, ty: &TypeId, dec: &MultiIndex) -> NumResult<Vec<Vec<f64>>> {
        let mut sp = Spectral::new(self.nx);
        let w = self.kernel_weights(ty, dec)?;
        Ok(w
            .iter()
            .map(|row| {
                let mut out = vec![0.0; self.nx];
                sp.inverse(row, &mut out);
                out
            })
            .collect())
    }
}

/// Sampled inputs keyed by noise type.
pub type Sources = HashMap<TypeId, Vec<f64>>;

struct Evaluator<'a> {
    grid: LiftGrid,
    tree: &'a DecoratedTree,
    sources: &'a Sources,
    sp: Spectral,
}

impl Evaluator<'_> {
    fn source(&self, ty: &TypeId) -> NumResult<&[f64]> {
        let s = self.sources.get(ty).ok_or_else(|| NumError::Unassigned(ty.to_string()))?;
        if s.len() != self.grid.len() {
            return Err(NumError::Shape(format!("source for `{ty}` has {} values, expected {}", s.len(), self.grid.len())));
        }
        Ok(s)
    }

    fn poly(&self, n: &MultiIndex) -> Vec<f64> {
        let g = self.grid;
        let mut out = vec![1.0; g.len()];
        if n.is_zero() {
            return out;
        }
        for i in 0..g.rows() {
            let tp = g.rel_t(i).powi(n.0[0] as i32);
            for j in 0..g.nx {
                out[i * g.nx + j] = tp * g.rel_x(j).powi(n.0[1] as i32);
            }
        }
        out
    }

    /// The value of the subtree at `u` on the whole window.
    fn field(&mut self, u: NodeId) -> NumResult<Vec<f64>> {
        let mut out = self.poly(self.tree.node_dec(u));
        for &c in self.tree.children(u) {
            let edge = self.tree.edge(c).unwrap();
            let f = if edge.ty.is_noise() {
                self.source(&edge.ty)?.to_vec()
            } else {
                let inner = self.field(c)?;
                self.convolve(&inner, &edge.ty, &edge.dec)?
            };
            out.iter_mut().zip(&f).for_each(|(o, v)| *o *= v);
        }
        Ok(out)
    }

    fn spectra(&mut self, f: &[f64]) -> Vec<Vec<Complex64>> {
        let nx = self.grid.nx;
        f.chunks(nx).map(|row| self.sp.forward(row)).collect()
    }

    fn convolve(&mut self, f: &[f64], ty: &TypeId, dec: &MultiIndex) -> NumResult<Vec<f64>> {
        let g = self.grid;
        let w = g.kernel_weights(ty, dec)?;
        let fh = self.spectra(f);
        let mut out = vec![0.0; g.len()];
        let mut acc = vec![Complex64::default(); g.nx];
        for i in 0..g.rows() {
            acc.iter_mut().for_each(|a| *a = Complex64::default());
            for (j, wj) in w.iter().enumerate() {
                let Some(src) = lagged(i, j, ty.is_dual(), g.rows()) else { continue };
                for ((a, x), y) in acc.iter_mut().zip(wj).zip(&fh[src]) {
                    *a += x * y;
                }
            }
            self.sp.inverse(&acc, &mut out[i * g.nx..(i + 1) * g.nx]);
        }
        Ok(out)
    }

    /// As `convolve` but only at the base point.
    fn convolve_at_root(&mut self, f: &[f64], ty: &TypeId, dec: &MultiIndex) -> NumResult<f64> {
        let g = self.grid;
        let w = g.kernel_weights(ty, dec)?;
        let mut s = Complex64::default();
        for (j, wj) in w.iter().enumerate() {
            let Some(src) = lagged(g.half, j, ty.is_dual(), g.rows()) else { continue };
            let fh = self.sp.forward(&f[src * g.nx..(src + 1) * g.nx]);
            s += wj.iter().zip(&fh).map(|(x, y)| x * y).sum::<Complex64>();
        }
        Ok(s.re / g.nx as f64)
    }
}

fn lagged(i: usize, j: usize, dual: bool, rows: usize) -> Option<usize> {
    if dual {
        (i + j < rows).then_some(i + j)
    } else {
        i.checked_sub(j)
    }
}

/// `(Π_z τ)(z)` by quadrature on `grid`, with noise inputs from `sources`.
pub fn lift_eval(tree: &DecoratedTree, sources: &Sources, grid: LiftGrid) -> NumResult<f64> {
    let mut ev = Evaluator { grid, tree, sources, sp: Spectral::new(grid.nx) };
    let root = tree.root();
    if !tree.node_dec(root).is_zero() {
        return Ok(0.0);
    }
    let centre = grid.half * grid.nx;
    let mut value = 1.0;
    for &c in tree.children(root) {
        let edge = tree.edge(c).unwrap();
        value *= if edge.ty.is_noise() {
            ev.source(&edge.ty)?[centre]
        } else {
            let inner = ev.field(c)?;
            ev.convolve_at_root(&inner, &edge.ty, &edge.dec)?
        };
    }
    Ok(value)
}

/// Largest number of kernel edges on a root-to-leaf path.
pub fn kernel_depth(tree: &DecoratedTree) -> usize {
    tree.node_ids()
        .map(|u| tree.path_from_root(u).map(|p| p.iter().filter(|&&e| tree.edge(e).unwrap().ty.is_kernel()).count()).unwrap_or(0))
        .max()
        .unwrap_or(0)
}

/// Smooth input `(t, x) ↦ value`.
pub type SmoothFn<'a> = &'a (dyn Fn(f64, f64) -> f64 + Sync);

/// Quadrature settings shared by the identity checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftSetup {
    pub nx: usize,
    pub dt: f64,
    pub support: f64,
    pub z: (f64, f64),
}

impl Default for LiftSetup {
    fn default() -> Self {
        Self { nx: 16, dt: 1.0 / 64.0, support: 0.25, z: (0.3, 0.2) }
    }
}

/// Both sides of an evaluated identity.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LiftCheck {
    pub tree: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs|` over the sum of the absolute values of all evaluated
    /// terms (1 if they all vanish).
    pub residual: f64,
}

fn noise_base_types(tree: &DecoratedTree) -> Vec<TypeId> {
    let mut v: Vec<TypeId> = tree.noise_edges().into_iter().map(|u| tree.edge(u).unwrap().ty.base()).collect();
    v.sort();
    v.dedup();
    v
}

fn finish(tree: &DecoratedTree, lhs: f64, rhs: f64, scale: f64) -> LiftCheck {
    let s = if scale > 0.0 { scale } else { 1.0 };
    LiftCheck { tree: tree.code().to_string(), lhs, rhs, residual: (lhs - rhs).abs() / s }
}

/// `Π^{h+k}τ(z)` against `Σ_{terms of S_1 τ} Π τ'(z)` with unlabelled noise
/// set to `h` and labelled noise to `k`.
pub fn shift_check(tree: &DecoratedTree, h: SmoothFn, k: SmoothFn, setup: &LiftSetup) -> NumResult<LiftCheck> {
    const LABEL: &str = "shift";
    let grid = LiftGrid::new(setup.nx, setup.dt, setup.support, kernel_depth(tree));
    let (hs, ks) = (grid.sample(setup.z, h), grid.sample(setup.z, k));
    let sum: Vec<f64> = hs.iter().zip(&ks).map(|(a, b)| a + b).collect();
    let mut lhs_src = Sources::new();
    let mut rhs_src = Sources::new();
    for b in noise_base_types(tree) {
        lhs_src.insert(b.clone(), sum.clone());
        rhs_src.insert(b.labelled(LABEL)?, ks.clone());
        rhs_src.insert(b, hs.clone());
    }
    let lhs = lift_eval(tree, &lhs_src, grid)?;
    let mut rhs = 0.0;
    let mut scale = lhs.abs();
    for (_, t, c) in mallitree::extensions::shift_expand(tree, LABEL)?.at_one().terms() {
        let v = c as f64 * lift_eval(t, &rhs_src, grid)?;
        rhs += v;
        scale += v.abs();
    }
    Ok(finish(tree, lhs, rhs, scale))
}

/// `Π τ_h(z) - Π τ_k(z)` against `Σ Π(𝔸τ)(z)` for the leaf order `order`,
/// where `τ_h`, `τ_k` label every hatted leaf `h`, resp. `k`, unhatted noise
/// evaluates `base` and `h-k` evaluates the difference.
pub fn telescope_check(
    tree: &DecoratedTree,
    order: &[NodeId],
    base: SmoothFn,
    h: SmoothFn,
    k: SmoothFn,
    setup: &LiftSetup,
) -> NumResult<LiftCheck> {
    use mallitree::extensions::{hatted_leaves, telescope_a, LABEL_H, LABEL_HK, LABEL_K};
    let grid = LiftGrid::new(setup.nx, setup.dt, setup.support, kernel_depth(tree));
    let (bs, hs, ks) = (grid.sample(setup.z, base), grid.sample(setup.z, h), grid.sample(setup.z, k));
    let diff: Vec<f64> = hs.iter().zip(&ks).map(|(a, b)| a - b).collect();
    let mut src = Sources::new();
    for b in noise_base_types(tree) {
        src.insert(b.labelled(LABEL_H)?, hs.clone());
        src.insert(b.labelled(LABEL_K)?, ks.clone());
        src.insert(b.labelled(LABEL_HK)?, diff.clone());
        src.insert(b, bs.clone());
    }
    let relabel = |label: &str| -> NumResult<DecoratedTree> {
        let mut t = tree.clone();
        for u in hatted_leaves(tree) {
            let ty = t.edge(u).unwrap().ty.base().labelled(label)?;
            t.set_edge_type(u, ty)?;
        }
        Ok(t)
    };
    let (a, b) = (lift_eval(&relabel(LABEL_H)?, &src, grid)?, lift_eval(&relabel(LABEL_K)?, &src, grid)?);
    let mut rhs = 0.0;
    let mut scale = a.abs() + b.abs();
    for (_, t, c) in telescope_a(tree, order)?.terms() {
        let v = c as f64 * lift_eval(t, &src, grid)?;
        rhs += v;
        scale += v.abs();
    }
    Ok(finish(tree, a - b, rhs, scale))
}
