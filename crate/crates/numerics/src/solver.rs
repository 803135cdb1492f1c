//! Time steppers for the regularized equation, its tangent and its dual.
//!
//! The forward step is `u ← e^{dtΔ}(u + dt·N(u, ξ))` with
//! `N = f + gξ + C¹g'g + C²g'³g + C³g''g'g²`. The tangent applies the
//! linearization of the same step; the adjoint solver is its exact
//! transpose for the pairing `dt·dx·Σ`.

use serde::Serialize;

use crate::config::SimConfig;
use crate::error::{NumError, NumResult};
use crate::grid::Field;
use crate::noise::{mollify, sample_white_noise};
use crate::spectral::{heat_multiplier, implicit_multiplier, Spectral};

fn counterterm(c: &SimConfig, u: f64) -> f64 {
    let (g, g1, g2) = (c.g.d(0, u), c.g.d(1, u), c.g.d(2, u));
    c.constants[0] * g1 * g + c.constants[1] * g1.powi(3) * g + c.constants[2] * g2 * g1 * g * g
}

fn counterterm_prime(c: &SimConfig, u: f64) -> f64 {
    let (g, g1, g2, g3) = (c.g.d(0, u), c.g.d(1, u), c.g.d(2, u), c.g.d(3, u));
    let h1 = g2 * g + g1 * g1;
    let h2 = 3.0 * g1 * g1 * g2 * g + g1.powi(4);
    let h3 = g3 * g1 * g * g + g2 * g2 * g * g + 2.0 * g2 * g1 * g1 * g;
    c.constants[0] * h1 + c.constants[1] * h2 + c.constants[2] * h3
}

/// `a = f'(u) + g'(u)ξ + Σ C^i h_i'(u)`, the coefficient of the linearization.
pub fn linear_coefficient(c: &SimConfig, u: f64, xi: f64) -> f64 {
    c.f.d(1, u) + c.g.d(1, u) * xi + counterterm_prime(c, u)
}

fn check_shape(c: &SimConfig, f: &Field, what: &str) -> NumResult<()> {
    if f.grid.nx != c.grid.nx || f.grid.nt != c.grid.nt {
        return Err(NumError::Shape(format!("{what} does not match the configured grid")));
    }
    Ok(())
}

fn check_row(c: &SimConfig, row: &[f64], step: usize) -> NumResult<()> {
    for &v in row {
        if !v.is_finite() || v.abs() > c.blowup {
            return Err(NumError::BlowUp { step, value: v });
        }
    }
    Ok(())
}

/// Solution driven by the (already mollified) noise `xi`.
pub fn solve_forward(c: &SimConfig, xi: &Field) -> NumResult<Field> {
    check_shape(c, xi, "noise")?;
    let g = c.grid;
    let e = heat_multiplier(g.nx, g.dt);
    let mut sp = Spectral::new(g.nx);
    let mut u = Field::zeros(g);
    for (i, v) in u.row_mut(0).iter_mut().enumerate() {
        *v = c.u0.eval(g.x(i));
    }
    let mut r = vec![0.0; g.nx];
    for n in 0..g.nt {
        let (un, xn) = (u.row(n), xi.row(n));
        for i in 0..g.nx {
            let v = un[i];
            r[i] = v + g.dt * (c.f.eval(v) + c.g.eval(v) * xn[i] + counterterm(c, v));
        }
        sp.apply(&mut r, &e);
        check_row(c, &r, n + 1)?;
        u.row_mut(n + 1).copy_from_slice(&r);
    }
    Ok(u)
}

/// Derivative of [`solve_forward`] in the direction `h` added to the noise.
pub fn solve_tangent(c: &SimConfig, u: &Field, xi: &Field, h: &Field) -> NumResult<Field> {
    for (f, w) in [(u, "u"), (xi, "noise"), (h, "h")] {
        check_shape(c, f, w)?;
    }
    let g = c.grid;
    let e = heat_multiplier(g.nx, g.dt);
    let mut sp = Spectral::new(g.nx);
    let mut v = Field::zeros(g);
    let mut r = vec![0.0; g.nx];
    for n in 0..g.nt {
        let (un, xn, hn, vn) = (u.row(n), xi.row(n), h.row(n), v.row(n));
        for i in 0..g.nx {
            let a = linear_coefficient(c, un[i], xn[i]);
            r[i] = vn[i] + g.dt * (a * vn[i] + c.g.eval(un[i]) * hn[i]);
        }
        sp.apply(&mut r, &e);
        check_row(c, &r, n + 1)?;
        v.row_mut(n + 1).copy_from_slice(&r);
    }
    Ok(v)
}

/// Transpose of the tangent recursion: `w^N = 0`,
/// `w^n = e^{dtΔ}((1 + dt·a_{n+1}) w^{n+1} + dt·φ^{n+1})`.
pub fn solve_dual_adjoint(c: &SimConfig, u: &Field, xi: &Field, phi: &Field) -> NumResult<Field> {
    for (f, w) in [(u, "u"), (xi, "noise"), (phi, "phi")] {
        check_shape(c, f, w)?;
    }
    let g = c.grid;
    let e = heat_multiplier(g.nx, g.dt);
    let mut sp = Spectral::new(g.nx);
    let mut w = Field::zeros(g);
    let mut r = vec![0.0; g.nx];
    for n in (0..g.nt).rev() {
        let (un, xn, pn, wn) = (u.row(n + 1), xi.row(n + 1), phi.row(n + 1), w.row(n + 1));
        for i in 0..g.nx {
            let a = linear_coefficient(c, un[i], xn[i]);
            r[i] = (1.0 + g.dt * a) * wn[i] + g.dt * pn[i];
        }
        sp.apply(&mut r, &e);
        check_row(c, &r, n)?;
        w.row_mut(n).copy_from_slice(&r);
    }
    Ok(w)
}

/// Backward implicit Euler for `-∂_t w = Δw + a·w + φ`, `w(T) = 0`:
/// `(I - dtΔ) w^n = w^{n+1} + dt(a_n w^{n+1} + φ^n)`.
pub fn solve_dual_pde(c: &SimConfig, u: &Field, xi: &Field, phi: &Field) -> NumResult<Field> {
    for (f, w) in [(u, "u"), (xi, "noise"), (phi, "phi")] {
        check_shape(c, f, w)?;
    }
    let g = c.grid;
    let m = implicit_multiplier(g.nx, g.dt);
    let mut sp = Spectral::new(g.nx);
    let mut w = Field::zeros(g);
    let mut r = vec![0.0; g.nx];
    for n in (0..g.nt).rev() {
        let (un, xn, pn, wn) = (u.row(n), xi.row(n), phi.row(n), w.row(n + 1));
        for i in 0..g.nx {
            let a = linear_coefficient(c, un[i], xn[i]);
            r[i] = wn[i] + g.dt * (a * wn[i] + pn[i]);
        }
        sp.apply(&mut r, &m);
        check_row(c, &r, n)?;
        w.row_mut(n).copy_from_slice(&r);
    }
    Ok(w)
}

/// `⟨v, φ⟩ = dt·dx·Σ_{n=1}^{N} v^n·φ^n`.
pub fn pair_tangent(v: &Field, phi: &Field) -> NumResult<f64> {
    v.pair_rows(phi, 1..v.grid.rows())
}

/// `⟨g(u)h, w⟩ = dt·dx·Σ_{n=0}^{N-1} g(u^n)h^n·w^n`.
pub fn pair_source(c: &SimConfig, u: &Field, h: &Field, w: &Field) -> NumResult<f64> {
    let mut gh = h.clone();
    for (s, uv) in gh.values.iter_mut().zip(&u.values) {
        *s *= c.g.eval(*uv);
    }
    gh.pair_rows(w, 0..w.grid.nt)
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    pub tangent_pairing: f64,
    /// `⟨|v|, |φ|⟩ / |⟨v, φ⟩|`; large when the pairing is mostly
    /// cancellation and relative residuals lose meaning.
    pub pairing_condition: f64,
    pub adjoint_pairing: f64,
    pub adjoint_residual: f64,
    pub pde_pairing: f64,
    pub pde_residual: f64,
    /// `‖w_pde - w_adj‖ / ‖w_adj‖`.
    pub pde_gap: f64,
    /// `⟨v(0), w(0)⟩`, zero for deterministic initial data.
    pub boundary_term: f64,
}

/// Both duality identities for one noise realization.
pub fn check_duality(c: &SimConfig, xi: &Field, h: &Field, phi: &Field) -> NumResult<DualityReport> {
    let u = solve_forward(c, xi)?;
    let v = solve_tangent(c, &u, xi, h)?;
    let wa = solve_dual_adjoint(c, &u, xi, phi)?;
    let wp = solve_dual_pde(c, &u, xi, phi)?;
    let lhs = pair_tangent(&v, phi)?;
    let ra = pair_source(c, &u, h, &wa)?;
    let rp = pair_source(c, &u, h, &wp)?;
    let boundary = v.pair_rows(&wa, 0..1)? / c.grid.dt;
    let rel = |x: f64| (lhs - x).abs() / lhs.abs().max(f64::MIN_POSITIVE);
    let abs = |f: &Field| Field { grid: f.grid, values: f.values.iter().map(|x| x.abs()).collect() };
    let magnitude = pair_tangent(&abs(&v), &abs(phi))?;
    Ok(DualityReport {
        tangent_pairing: lhs,
        pairing_condition: magnitude / lhs.abs().max(f64::MIN_POSITIVE),
        adjoint_pairing: ra,
        adjoint_residual: rel(ra),
        pde_pairing: rp,
        pde_residual: rel(rp),
        pde_gap: wp.combine(1.0, &wa, -1.0)?.l2() / wa.l2().max(f64::MIN_POSITIVE),
        boundary_term: boundary,
    })
}

/// Duality at step `dt` and at `dt/2` for one noise realization.
#[derive(Debug, Clone, Serialize)]
pub struct RefinementReport {
    pub coarse: DualityReport,
    pub fine: DualityReport,
    /// `fine.pde_gap / coarse.pde_gap`.
    pub gap_ratio: f64,
}

/// Samples white noise on the grid with step `dt/2`; the coarse run uses
/// its time average over pairs of cells, so both runs see the same noise.
pub fn check_duality_refinement(
    c: &SimConfig,
    seed: u64,
    h: impl Fn(f64, f64) -> f64,
    phi: impl Fn(f64, f64) -> f64,
) -> NumResult<RefinementReport> {
    let mut fc = c.clone();
    fc.grid = c.grid.refined();
    fc.validate()?;
    let fine_noise = sample_white_noise(fc.grid, seed);
    let run = |cfg: &SimConfig, noise: &Field| -> NumResult<DualityReport> {
        let xi = mollify(noise, &cfg.mollifier)?;
        let hf = mollify(&Field::from_fn(cfg.grid, &h), &cfg.mollifier)?;
        check_duality(cfg, &xi, &hf, &Field::from_fn(cfg.grid, &phi))
    };
    let fine = run(&fc, &fine_noise)?;
    let coarse = run(c, &fine_noise.coarsen_time()?)?;
    let gap_ratio = fine.pde_gap / coarse.pde_gap.max(f64::MIN_POSITIVE);
    Ok(RefinementReport { coarse, fine, gap_ratio })
}

#[derive(Debug, Clone, Serialize)]
pub struct FrechetRow {
    pub r: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrechetReport {
    pub rows: Vec<FrechetRow>,
    /// Least-squares slope of `log error` against `log r`.
    pub order: f64,
    pub tangent_norm: f64,
}

/// `‖(u(ξ + r h) - u(ξ))/r - v_h‖ / ‖v_h‖` for each `r`.
pub fn check_frechet(c: &SimConfig, xi: &Field, h: &Field, rs: &[f64]) -> NumResult<FrechetReport> {
    let u = solve_forward(c, xi)?;
    let v = solve_tangent(c, &u, xi, h)?;
    let vn = v.l2();
    let mut rows = Vec::new();
    for &r in rs {
        let ur = solve_forward(c, &xi.combine(1.0, h, r)?)?;
        let d = ur.combine(1.0 / r, &u, -1.0 / r)?.combine(1.0, &v, -1.0)?;
        rows.push(FrechetRow { r, rel_error: d.l2() / vn });
    }
    Ok(FrechetReport { order: fit_order(&rows), rows, tangent_norm: vn })
}

fn fit_order(rows: &[FrechetRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.r.ln(), r.rel_error.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// One linearized step `x ↦ e^{dtΔ}((1 + dt·a)x)` with `a` taken from the
/// rows `u`, `xi`.
pub fn linear_step(c: &SimConfig, u: &[f64], xi: &[f64], x: &[f64]) -> Vec<f64> {
    let mut r: Vec<f64> = (0..x.len()).map(|i| (1.0 + c.grid.dt * linear_coefficient(c, u[i], xi[i])) * x[i]).collect();
    Spectral::new(x.len()).apply(&mut r, &heat_multiplier(x.len(), c.grid.dt));
    r
}

/// Transpose of [`linear_step`]: `y ↦ (1 + dt·a)·e^{dtΔ}y`.
pub fn linear_step_transpose(c: &SimConfig, u: &[f64], xi: &[f64], y: &[f64]) -> Vec<f64> {
    let mut r = y.to_vec();
    Spectral::new(y.len()).apply(&mut r, &heat_multiplier(y.len(), c.grid.dt));
    (0..y.len()).map(|i| (1.0 + c.grid.dt * linear_coefficient(c, u[i], xi[i])) * r[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcs::ScalarFn;
    use crate::grid::Grid;

    #[test]
    fn counterterm_prime_matches_central_differences() {
        let g = ScalarFn::Sin { offset: 1.5, amp: 0.7, freq: 1.3, phase: 0.2 };
        let mut c = SimConfig::new(Grid::new(8, 4, 1e-3).unwrap(), 0.1, ScalarFn::zero(), g);
        c.constants = [0.3, -1.1, 0.8];
        let h = 1e-5;
        for u in [-1.2, -0.3, 0.0, 0.4, 2.1] {
            let fd = (counterterm(&c, u + h) - counterterm(&c, u - h)) / (2.0 * h);
            assert!((fd - counterterm_prime(&c, u)).abs() < 1e-7, "u = {u}");
        }
    }
}
