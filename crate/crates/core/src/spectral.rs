//! Uniform periodic grids, real-to-complex transforms and Fourier-space
//! differential operators.
//!
//! Fields are stored row-major with `x` varying fastest:
//! `values[j * nx + i] = f(x_i, y_j)` with `x_i = i * lx / nx`.
//!
//! Spectra use the real-to-complex layout along `x` (`nx / 2 + 1` modes)
//! and a full complex transform along `y`. Coefficients are stored
//! column-major, `coeffs[ix * ny + iy]`, so the `y` transforms run over
//! contiguous memory. The forward transform is unnormalized; the inverse
//! divides by `nx * ny`.
//!
//! All derivative operators act by their exact symbols. Odd operators
//! (the first derivatives) drop the Nyquist mode, even operators keep it.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[0, lx) x [0, ly)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        for (name, n) in [("nx", nx), ("ny", ny)] {
            if n < 4 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "{name} = {n}; point counts must be even and at least 4"
                )));
            }
        }
        if !(lx.is_finite() && lx > 0.0 && ly.is_finite() && ly > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "domain lengths must be positive, got {lx} x {ly}"
            )));
        }
        Ok(Grid { nx, ny, lx, ly })
    }

    /// `n x n` grid on `[0, 2pi)^2`.
    pub fn square(n: usize) -> Result<Self> {
        Grid::new(n, n, 2.0 * PI, 2.0 * PI)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    /// Quadrature weight of a single node.
    pub fn cell_area(&self) -> f64 {
        self.area() / self.len() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.lx / self.nx as f64
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.ly / self.ny as f64
    }

    /// Number of `x` modes kept by the real-to-complex layout.
    pub fn nx_half(&self) -> usize {
        self.nx / 2 + 1
    }

    fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{} on [0,{}]x[0,{}]", self.nx, self.ny, self.lx, self.ly)
    }
}

/// Real scalar field sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every grid node.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            let y = grid.y(j);
            for i in 0..grid.nx {
                values.push(f(grid.x(i), y));
            }
        }
        Field { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values for {grid}, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    ///
    /// Panics on grid mismatch.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_same_grid(&self.grid, &other.grid);
        Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &Field) {
        assert_same_grid(&self.grid, &x.grid);
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    pub fn add_constant(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v += c);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Arithmetic average of the nodal values.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Discrete L2 norm with the trapezoidal weight.
    pub fn norm_l2(&self) -> f64 {
        (self.grid.cell_area() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { what, index }),
            None => Ok(()),
        }
    }
}

fn assert_same_grid(a: &Grid, b: &Grid) {
    assert!(a == b, "grid mismatch: {a} vs {b}");
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a - b)
    }
}

impl Mul for &Field {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        self.map(|a| a * rhs)
    }
}

/// Fourier coefficients of a real field in the real-to-complex layout.
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Coefficients, indexed `ix * ny + iy`.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient of the signed mode `(mx, my)`, resolving negative `mx`
    /// through conjugate symmetry.
    pub fn mode(&self, mx: i64, my: i64) -> Complex64 {
        let (nx, ny) = (self.grid.nx as i64, self.grid.ny as i64);
        let wrap = |m: i64, n: i64| m.rem_euclid(n) as usize;
        let ix = wrap(mx, nx);
        if ix <= self.grid.nx / 2 {
            self.coeffs[ix * self.grid.ny + wrap(my, ny)]
        } else {
            let ix = wrap(-mx, nx);
            self.coeffs[ix * self.grid.ny + wrap(-my, ny)].conj()
        }
    }
}

/// Transform plans and wavenumber tables for one grid.
///
/// All methods take `&self` and allocate their own scratch, so one instance
/// may be shared across threads.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    /// |k|^2 per coefficient, Nyquist included.
    k2: Vec<f64>,
    /// First-derivative wavenumbers with the Nyquist entry zeroed.
    kx_odd: Vec<f64>,
    ky_odd: Vec<f64>,
    dealias: bool,
}

impl fmt::Debug for Spectral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

fn signed_mode(i: usize, n: usize) -> i64 {
    if i < n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut real_planner = RealFftPlanner::<f64>::new();
        let mut planner = FftPlanner::<f64>::new();
        let nxh = grid.nx_half();

        let kx: Vec<f64> = (0..nxh)
            .map(|i| 2.0 * PI * i as f64 / grid.lx)
            .collect();
        let ky: Vec<f64> = (0..grid.ny)
            .map(|j| 2.0 * PI * signed_mode(j, grid.ny) as f64 / grid.ly)
            .collect();

        let mut k2 = Vec::with_capacity(nxh * grid.ny);
        for &kxi in &kx {
            for &kyj in &ky {
                k2.push(kxi * kxi + kyj * kyj);
            }
        }
        let mut kx_odd = kx;
        kx_odd[grid.nx / 2] = 0.0;
        let mut ky_odd = ky;
        ky_odd[grid.ny / 2] = 0.0;

        Spectral {
            grid,
            r2c: real_planner.plan_fft_forward(grid.nx),
            c2r: real_planner.plan_fft_inverse(grid.nx),
            fwd_y: planner.plan_fft_forward(grid.ny),
            inv_y: planner.plan_fft_inverse(grid.ny),
            k2,
            kx_odd,
            ky_odd,
            dealias: false,
        }
    }

    /// Enables the two-thirds filter on explicit nonlinear products
    /// (see [`Spectral::nonlinear`]).
    pub fn with_dealias(mut self, on: bool) -> Self {
        self.dealias = on;
        self
    }

    pub fn dealias_enabled(&self) -> bool {
        self.dealias
    }

    /// Passes an explicitly evaluated nonlinear product through the
    /// two-thirds filter when dealiasing is enabled.
    pub fn nonlinear(&self, f: Field) -> Field {
        if self.dealias {
            self.dealias(&f)
        } else {
            f
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// |k|^2 for each coefficient in spectrum layout.
    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    pub fn forward(&self, field: &Field) -> Result<Spectrum> {
        self.grid.ensure_same(field.grid())?;
        field.check_finite("forward transform input")?;
        Ok(self.transform(field))
    }

    /// Inverse transform. Rejects spectra whose self-conjugate columns
    /// deviate from Hermitian symmetry by more than `1e-10` relative to the
    /// largest coefficient.
    pub fn inverse(&self, spec: &Spectrum) -> Result<Field> {
        self.grid.ensure_same(spec.grid())?;
        let deviation = self.symmetry_deviation(spec);
        if deviation > 1e-10 {
            return Err(Error::AsymmetricSpectrum { deviation });
        }
        let field = self.untransform(spec.clone());
        field.check_finite("inverse transform output")?;
        Ok(field)
    }

    fn symmetry_deviation(&self, spec: &Spectrum) -> f64 {
        let ny = self.grid.ny;
        let scale = spec.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut dev = 0.0f64;
        for ix in [0, self.grid.nx / 2] {
            let col = &spec.coeffs[ix * ny..(ix + 1) * ny];
            for j in 0..ny {
                let mirror = col[(ny - j) % ny].conj();
                dev = dev.max((col[j] - mirror).norm());
            }
        }
        dev / scale
    }

    pub(crate) fn transform(&self, field: &Field) -> Spectrum {
        assert_same_grid(&self.grid, field.grid());
        let (nx, ny, nxh) = (self.grid.nx, self.grid.ny, self.grid.nx_half());
        let mut coeffs = vec![Complex64::new(0.0, 0.0); nxh * ny];
        let mut row_in = self.r2c.make_input_vec();
        let mut row_out = self.r2c.make_output_vec();
        let mut scratch = self.r2c.make_scratch_vec();
        for j in 0..ny {
            row_in.copy_from_slice(&field.values[j * nx..(j + 1) * nx]);
            self.r2c
                .process_with_scratch(&mut row_in, &mut row_out, &mut scratch)
                .expect("row buffers sized by the planner");
            for (ix, c) in row_out.iter().enumerate() {
                coeffs[ix * ny + j] = *c;
            }
        }
        let mut scratch_y = vec![Complex64::new(0.0, 0.0); self.fwd_y.get_inplace_scratch_len()];
        self.fwd_y.process_with_scratch(&mut coeffs, &mut scratch_y);
        Spectrum {
            grid: self.grid,
            coeffs,
        }
    }

    /// Inverse transform that projects onto the Hermitian subspace instead
    /// of checking it.
    pub(crate) fn untransform(&self, mut spec: Spectrum) -> Field {
        assert_same_grid(&self.grid, spec.grid());
        let (nx, ny, nxh) = (self.grid.nx, self.grid.ny, self.grid.nx_half());
        let mut scratch_y = vec![Complex64::new(0.0, 0.0); self.inv_y.get_inplace_scratch_len()];
        self.inv_y.process_with_scratch(&mut spec.coeffs, &mut scratch_y);

        let norm = 1.0 / (nx * ny) as f64;
        let mut values = vec![0.0; nx * ny];
        let mut row_in = self.c2r.make_input_vec();
        let mut row_out = self.c2r.make_output_vec();
        let mut scratch = self.c2r.make_scratch_vec();
        for j in 0..ny {
            for ix in 0..nxh {
                row_in[ix] = spec.coeffs[ix * ny + j];
            }
            row_in[0].im = 0.0;
            row_in[nxh - 1].im = 0.0;
            self.c2r
                .process_with_scratch(&mut row_in, &mut row_out, &mut scratch)
                .expect("row buffers sized by the planner");
            for (v, r) in values[j * nx..(j + 1) * nx].iter_mut().zip(&row_out) {
                *v = r * norm;
            }
        }
        Field {
            grid: self.grid,
            values,
        }
    }

    /// Multiplies every coefficient by a real symbol of `|k|^2`.
    pub fn apply_symbol(&self, f: &Field, symbol: impl Fn(f64) -> f64) -> Field {
        let mut spec = self.transform(f);
        for (c, &k2) in spec.coeffs.iter_mut().zip(&self.k2) {
            *c *= symbol(k2);
        }
        self.untransform(spec)
    }

    pub fn laplacian(&self, f: &Field) -> Field {
        self.apply_symbol(f, |k2| -k2)
    }

    pub fn biharmonic(&self, f: &Field) -> Field {
        self.apply_symbol(f, |k2| k2 * k2)
    }

    /// Mean-zero solution `v` of `lap v = f - mean(f)`.
    pub fn inverse_laplacian(&self, f: &Field) -> Field {
        self.apply_symbol(f, |k2| if k2 == 0.0 { 0.0 } else { -1.0 / k2 })
    }

    /// Removes the spatial mean.
    pub fn project_mean_zero(&self, f: &Field) -> Field {
        let m = f.mean();
        f.map(|v| v - m)
    }

    pub fn gradient(&self, f: &Field) -> (Field, Field) {
        let spec = self.transform(f);
        let ny = self.grid.ny;
        let mut dx = spec.clone();
        let mut dy = spec;
        for (ix, &kx) in self.kx_odd.iter().enumerate() {
            for (iy, &ky) in self.ky_odd.iter().enumerate() {
                let k = ix * ny + iy;
                dx.coeffs[k] *= Complex64::new(0.0, kx);
                dy.coeffs[k] *= Complex64::new(0.0, ky);
            }
        }
        (self.untransform(dx), self.untransform(dy))
    }

    pub fn divergence(&self, fx: &Field, fy: &Field) -> Field {
        let mut sx = self.transform(fx);
        let sy = self.transform(fy);
        let ny = self.grid.ny;
        for (ix, &kx) in self.kx_odd.iter().enumerate() {
            for (iy, &ky) in self.ky_odd.iter().enumerate() {
                let k = ix * ny + iy;
                sx.coeffs[k] = Complex64::new(0.0, kx) * sx.coeffs[k]
                    + Complex64::new(0.0, ky) * sy.coeffs[k];
            }
        }
        self.untransform(sx)
    }

    /// Pointwise `|grad f|^2`.
    pub fn grad_sq(&self, f: &Field) -> Field {
        let (gx, gy) = self.gradient(f);
        gx.zip_map(&gy, |a, b| a * a + b * b)
    }

    /// `div(a grad f)` for a variable coefficient `a`.
    pub fn div_a_grad(&self, a: &Field, f: &Field) -> Field {
        let (gx, gy) = self.gradient(f);
        self.divergence(&(a * &gx), &(a * &gy))
    }

    /// `int |grad f|^2 dx` evaluated with the full even symbol `|k|^2`, so it
    /// pairs exactly with [`Spectral::laplacian`]: `dirichlet(f) = -(lap f, f)`.
    pub fn dirichlet(&self, f: &Field) -> f64 {
        let spec = self.transform(f);
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut sum = 0.0;
        for ix in 0..self.grid.nx_half() {
            let weight = if ix == 0 || ix == nx / 2 { 1.0 } else { 2.0 };
            for iy in 0..ny {
                let k = ix * ny + iy;
                sum += weight * self.k2[k] * spec.coeffs[k].norm_sqr();
            }
        }
        self.grid.cell_area() * sum / (nx * ny) as f64
    }

    /// Applies the operator with symbol `sum_j coeffs[j] * |k|^(2j)`.
    pub fn apply_polynomial(&self, coeffs: &[f64], f: &Field) -> Field {
        self.apply_symbol(f, |k2| eval_poly(coeffs, k2))
    }

    /// Solves `(sum_j coeffs[j] * (-lap)^j) f = rhs` diagonally in Fourier
    /// space. A mode whose symbol vanishes is set to zero provided the
    /// right-hand side has no content there.
    pub fn solve_polynomial(&self, coeffs: &[f64], rhs: &Field) -> Result<Field> {
        self.grid.ensure_same(rhs.grid())?;
        let mut spec = self.transform(rhs);
        let symbols: Vec<f64> = self.k2.iter().map(|&k2| eval_poly(coeffs, k2)).collect();
        let sym_scale = symbols.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        let rhs_scale = rhs.max_abs() * self.grid.len() as f64;
        let ny = self.grid.ny;
        for (k, (c, &s)) in spec.coeffs.iter_mut().zip(&symbols).enumerate() {
            if s.abs() <= 1e-14 * sym_scale {
                if c.norm() > 1e-10 * rhs_scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::SingularOperator {
                        kx: k / ny,
                        ky: k % ny,
                    });
                }
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c /= s;
            }
        }
        Ok(self.untransform(spec))
    }

    /// Solves `(a - b lap + c lap^2) f = rhs`.
    pub fn solve_constant_coeff(&self, a: f64, b: f64, c: f64, rhs: &Field) -> Result<Field> {
        self.solve_polynomial(&[a, b, c], rhs)
    }

    /// Spatial mean (arithmetic average of nodal values).
    pub fn mean(&self, f: &Field) -> f64 {
        f.mean()
    }

    /// Trapezoidal L2 inner product.
    pub fn inner(&self, f: &Field, g: &Field) -> Result<f64> {
        f.grid().ensure_same(g.grid())?;
        Ok(inner_unchecked(f, g))
    }

    /// Two-thirds rule filter: zeroes every mode with `|m| > n / 3` in
    /// either direction.
    pub fn dealias(&self, f: &Field) -> Field {
        let mut spec = self.transform(f);
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (cut_x, cut_y) = ((nx / 3) as i64, (ny / 3) as i64);
        for ix in 0..self.grid.nx_half() {
            for iy in 0..ny {
                if ix as i64 > cut_x || signed_mode(iy, ny).abs() > cut_y {
                    spec.coeffs[ix * ny + iy] = Complex64::new(0.0, 0.0);
                }
            }
        }
        self.untransform(spec)
    }
}

fn eval_poly(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Trapezoidal inner product without the grid check. Panics on length
/// mismatch only through the debug assertion.
pub(crate) fn inner_unchecked(f: &Field, g: &Field) -> f64 {
    debug_assert_eq!(f.grid(), g.grid());
    f.grid().cell_area()
        * f.values()
            .iter()
            .zip(g.values())
            .map(|(a, b)| a * b)
            .sum::<f64>()
}
