//! Fourier multipliers on the periodic grid.

use std::f64::consts::TAU;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward and inverse transforms of a fixed length plus scratch space.
pub struct Spectral {
    nx: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Spectral {
    pub fn new(nx: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(nx);
        let inv = planner.plan_fft_inverse(nx);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self { nx, fwd, inv, buf: vec![Complex64::default(); nx], scratch: vec![Complex64::default(); len] }
    }

    pub fn len(&self) -> usize {
        self.nx
    }

    pub fn is_empty(&self) -> bool {
        self.nx == 0
    }

    /// Signed integer frequency of FFT bin `j`.
    pub fn freq(nx: usize, j: usize) -> f64 {
        if j <= nx / 2 {
            j as f64
        } else {
            j as f64 - nx as f64
        }
    }

    /// `4π²k²`, the symbol of `-Δ` on bin `j`.
    pub fn lambda(nx: usize, j: usize) -> f64 {
        let k = TAU * Self::freq(nx, j);
        k * k
    }

    pub fn forward(&mut self, x: &[f64]) -> Vec<Complex64> {
        for (b, v) in self.buf.iter_mut().zip(x) {
            *b = Complex64::new(*v, 0.0);
        }
        self.fwd.process_with_scratch(&mut self.buf, &mut self.scratch);
        self.buf.clone()
    }

    /// Real part of the normalized inverse transform.
    pub fn inverse(&mut self, c: &[Complex64], out: &mut [f64]) {
        self.buf.copy_from_slice(c);
        self.inv.process_with_scratch(&mut self.buf, &mut self.scratch);
        let s = 1.0 / self.nx as f64;
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re * s;
        }
    }

    /// In place `x ← m(λ)·x` for a real even multiplier `m`.
    pub fn apply(&mut self, x: &mut [f64], m: &[f64]) {
        for (b, v) in self.buf.iter_mut().zip(x.iter()) {
            *b = Complex64::new(*v, 0.0);
        }
        self.fwd.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (b, f) in self.buf.iter_mut().zip(m) {
            *b *= f;
        }
        self.inv.process_with_scratch(&mut self.buf, &mut self.scratch);
        let s = 1.0 / self.nx as f64;
        for (o, b) in x.iter_mut().zip(&self.buf) {
            *o = b.re * s;
        }
    }
}

/// `e^{dtΔ}` per bin.
pub fn heat_multiplier(nx: usize, dt: f64) -> Vec<f64> {
    (0..nx).map(|j| (-dt * Spectral::lambda(nx, j)).exp()).collect()
}

/// `(I - dtΔ)^{-1}` per bin.
pub fn implicit_multiplier(nx: usize, dt: f64) -> Vec<f64> {
    (0..nx).map(|j| 1.0 / (1.0 + dt * Spectral::lambda(nx, j))).collect()
}
