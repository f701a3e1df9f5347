//! Meromorphic partition of unity on finite-window surrogate surfaces:
//! Bergman projections of cell indicators, per-atom exponential decay
//! certificates, and the sum audit against the window-indicator projection.
//!
//! A surrogate embeds the realized cell window into the unit-disk carrier by
//! zeta = scale * z with scale = 1 / (margin * corner_radius), so every cell
//! sits inside radius 1/margin. On the carrier the projection kernel is
//! either the plain disk kernel or a truncated Poincare series over one of
//! the shipped groups; the punctured-window kind additionally removes small
//! disks around the realized lattice points from all integrals.
//!
//! Atoms are stored as moment tables: with the kernel expanded as
//! (1 - x conj(w))^-4 = sum_m binom(m+3, 3) x^m conj(w)^m, the projection of
//! a cell indicator is determined by the cell moments
//! M_m = int (1 - |w|^2)^2 conj(w)^m over the scaled cell. The integrands
//! are polynomials, so a Gauss-Legendre tensor rule of matching degree makes
//! the tables exact to roundoff; evaluation is a Horner sum (per orbit word
//! on quotients). Adaptive quadrature of the defining integral stays in as
//! the independent oracle for every audit.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bergman::{self, MeasurableQD};
use crate::fuchsian::{FuchsianGroup, WordOrbit};
use crate::geom;
use crate::lattice::{self, Cell, IntRect, Quasilattice};
use crate::quadrature::{self, gauss_legendre, integrate_polar, integrate_rect, Rect, Region};
use crate::{Error, Result};

/// Default carrier margin: cells stay inside radius 1/margin of the disk.
pub const DEFAULT_MARGIN: f64 = 1.4;

/// Default puncture exclusion radius, in plane (cell) units.
pub const DEFAULT_EPS_PUNCT: f64 = 1e-3;

/// Default univalence-radius input for the metric floor of the
/// punctured-window kind.
pub const DEFAULT_R0: f64 = 0.4;

/// Certified ceiling on the kernel-series truncation error of every moment
/// evaluation (per orbit term, times the moment scale).
pub const SERIES_TOL: f64 = 1e-12;

/// Word depth used by quotient kinds unless overridden.
pub const DEFAULT_QUOTIENT_DEPTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Disk,
    CyclicQuotient,
    Gamma2Quotient,
    PuncturedWindow,
}

/// Finite-window surrogate surface carrying everything projections need:
/// the embedding scale, the kernel (group + truncation depth), the puncture
/// set, and the certified kernel-series degree.
///
/// Immutable after construction; all evaluations are pure.
#[derive(Debug, Clone)]
pub struct SurfaceModel {
    kind: ModelKind,
    window: IntRect,
    margin: f64,
    scale: f64,
    group: FuchsianGroup,
    depth: usize,
    /// Plane-coordinate puncture centers (realized lattice points).
    punctures: Vec<Complex64>,
    eps_punct: f64,
    s0: f64,
    series_degree: usize,
    series_tail: f64,
}

fn series_degree_for(q: f64, tol: f64) -> Result<(usize, f64)> {
    if !(0.0 < q && q < 1.0) {
        return Err(Error::Config(format!("series ratio {q} outside (0,1)")));
    }
    let binom3 = |m: f64| (m + 1.0) * (m + 2.0) * (m + 3.0) / 6.0;
    let mut m = 8usize;
    while m < 1000 {
        let mf = (m + 1) as f64;
        let q_hat = q * ((mf + 4.0) / (mf + 1.0)).powi(3);
        if q_hat < 1.0 {
            let first = binom3(mf) * q.powf(mf);
            let tail = first / (1.0 - q_hat);
            if tail <= tol {
                return Ok((m, tail));
            }
        }
        m += 1;
    }
    Err(Error::Config(format!(
        "margin too tight: kernel series will not reach tolerance {tol} at ratio {q}"
    )))
}

impl SurfaceModel {
    #[allow(clippy::too_many_arguments)]
    fn build(
        kind: ModelKind,
        window: IntRect,
        margin: f64,
        group: FuchsianGroup,
        depth: usize,
        punctures: Vec<Complex64>,
        eps_punct: f64,
        s0: f64,
    ) -> Result<Self> {
        if !(margin > 1.0) {
            return Err(Error::Config(format!(
                "carrier margin must exceed 1, got {margin}"
            )));
        }
        let scale = 1.0 / (margin * window.corner_radius());
        let q = 1.0 / (margin * margin);
        let (series_degree, series_tail) = series_degree_for(q, SERIES_TOL)?;
        Ok(Self {
            kind,
            window,
            margin,
            scale,
            group,
            depth,
            punctures,
            eps_punct,
            s0,
            series_degree,
            series_tail,
        })
    }

    /// Plain disk carrier: trivial group, no punctures. The reported metric
    /// floor is the embedding scale (the carrier density is >= 1).
    pub fn disk(window: IntRect, margin: f64) -> Result<Self> {
        let s0 = 1.0 / (margin * window.corner_radius());
        Self::build(
            ModelKind::Disk,
            window,
            margin,
            FuchsianGroup::trivial(),
            0,
            Vec::new(),
            0.0,
            s0,
        )
    }

    /// Cyclic-quotient carrier: kernel is the Poincare series of the
    /// translation of hyperbolic length `length`, truncated at `depth`.
    pub fn cyclic_quotient(window: IntRect, margin: f64, length: f64, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("quotient kinds need depth >= 1".into()));
        }
        let s0 = 1.0 / (margin * window.corner_radius());
        Self::build(
            ModelKind::CyclicQuotient,
            window,
            margin,
            FuchsianGroup::cyclic(length)?,
            depth,
            Vec::new(),
            0.0,
            s0,
        )
    }

    /// Rank-2 parabolic quotient carrier at truncation `depth`.
    pub fn gamma2_quotient(window: IntRect, margin: f64, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("quotient kinds need depth >= 1".into()));
        }
        let s0 = 1.0 / (margin * window.corner_radius());
        Self::build(
            ModelKind::Gamma2Quotient,
            window,
            margin,
            FuchsianGroup::gamma2(),
            depth,
            Vec::new(),
            0.0,
            s0,
        )
    }

    /// Stand-in for the lattice complement: disk carrier with small disks
    /// around the realized lattice points excluded from every integral, and
    /// the metric floor s0 = r0/8 of the distance machinery carried for
    /// downstream constants.
    pub fn punctured_window(
        lattice: &Quasilattice,
        margin: f64,
        eps_punct: f64,
        r0: f64,
    ) -> Result<Self> {
        if !(eps_punct > 0.0) {
            return Err(Error::NonPositive {
                name: "eps_punct",
                value: eps_punct,
            });
        }
        if eps_punct > 0.1 {
            return Err(Error::OutOfRange {
                name: "eps_punct",
                value: eps_punct,
                range: "(0, 0.1]",
            });
        }
        let koebe = geom::koebe_constants(r0)?;
        let punctures = lattice.points().map(|(_, w)| w).collect();
        Self::build(
            ModelKind::PuncturedWindow,
            lattice.window(),
            margin,
            FuchsianGroup::trivial(),
            0,
            punctures,
            eps_punct,
            koebe.s0,
        )
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn window(&self) -> IntRect {
        self.window
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    /// Plane-to-carrier embedding factor.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn group(&self) -> &FuchsianGroup {
        &self.group
    }

    pub fn punctures(&self) -> &[Complex64] {
        &self.punctures
    }

    pub fn eps_punct(&self) -> f64 {
        self.eps_punct
    }

    pub fn series_degree(&self) -> usize {
        self.series_degree
    }

    pub fn series_tail(&self) -> f64 {
        self.series_tail
    }

    pub fn to_carrier(&self, z: Complex64) -> Complex64 {
        self.scale * z
    }

    /// Orbit of a carrier point under the model group, at the model depth.
    pub fn orbit(&self, zeta: Complex64) -> Result<WordOrbit> {
        let depth = if self.group.rank() == 0 { 0 } else { self.depth };
        self.group.enumerate_orbit(zeta, depth)
    }

    /// Weighted conjugate moments M_m of the scaled cell (k, l), puncture
    /// disks removed. Exact to roundoff: the integrands are polynomials and
    /// the rules match their degree.
    pub fn cell_moments(&self, k: i64, l: i64) -> Result<Vec<Complex64>> {
        if !self.window.contains(k, l) {
            return Err(Error::WindowTooSmall { k, l });
        }
        let cell = Cell { k, l };
        let rect = scale_rect(cell.rect(), self.scale);
        let mut moments = moments_over_rect(rect, self.series_degree);
        for &p in &self.punctures {
            if lattice::cell_of(p) == cell {
                let removed = moments_over_disk(
                    self.to_carrier(p),
                    self.eps_punct * self.scale,
                    self.series_degree,
                );
                for (m, r) in moments.iter_mut().zip(removed) {
                    *m -= r;
                }
            }
        }
        Ok(moments)
    }

    /// Kernel of the model between carrier points, orbit-summed. The direct
    /// route used by the adaptive oracles; moment evaluation never calls it.
    fn kernel_at(&self, orbit: &WordOrbit, w: Complex64) -> Complex64 {
        let mut total = Complex64::default();
        for el in &orbit.elements {
            total += bergman::disk_kernel(el.image, w) * el.derivative * el.derivative;
        }
        total
    }

    /// Independent projection oracle: adaptive quadrature of
    /// c * int over region of (1 - |w|^2)^2 B(zeta, w), region given in
    /// plane coordinates, punctures removed.
    fn adaptive_projection(&self, plane_rect: Rect, z: Complex64, tol: f64) -> Result<Complex64> {
        let zeta = self.to_carrier(z);
        geom::require_in_disk(zeta)?;
        let orbit = self.orbit(zeta)?;
        let integrand = |w: Complex64| -> Complex64 {
            let t = 1.0 - w.norm_sqr();
            (t * t) * self.kernel_at(&orbit, w)
        };
        let rect = scale_rect(plane_rect, self.scale);
        let mut value = integrate_rect(&integrand, rect, tol, quadrature::DEFAULT_BUDGET)?.value;
        for &p in &self.punctures {
            let center = self.to_carrier(p);
            let radius = self.eps_punct * self.scale;
            if rect.contains(center) {
                value -= integrate_polar(
                    &integrand,
                    center,
                    0.0,
                    radius,
                    0.0,
                    std::f64::consts::TAU,
                    tol,
                    quadrature::DEFAULT_BUDGET,
                )?
                .value;
            }
        }
        Ok(value * bergman::calibrated_constant())
    }

    /// Adaptive-quadrature projection of one cell indicator at plane point
    /// z. Oracle route; [`PartitionAtom::eval`] is the fast one.
    pub fn cell_projection(&self, k: i64, l: i64, z: Complex64, tol: f64) -> Result<Complex64> {
        if !self.window.contains(k, l) {
            return Err(Error::WindowTooSmall { k, l });
        }
        self.adaptive_projection(Cell { k, l }.rect(), z, tol)
    }

    /// Adaptive-quadrature projection of the whole window indicator: the
    /// finite-window target of the sum audit. It approaches 1 as the
    /// realized cells fill the carrier (margin -> 1). Growing the window at
    /// fixed margin rescales the embedding instead, so the target plateaus
    /// below 1; comparing the atom sum against this computable target is
    /// the honest finite restatement of summing to 1.
    pub fn window_projection(&self, z: Complex64, tol: f64) -> Result<Complex64> {
        self.adaptive_projection(self.window_rect(), z, tol)
    }

    /// Plane-coordinate rectangle spanned by the realized cells.
    pub fn window_rect(&self) -> Rect {
        Rect::new(
            self.window.k_min as f64 - 0.5,
            self.window.k_max as f64 + 0.5,
            self.window.l_min as f64 - 0.5,
            self.window.l_max as f64 + 0.5,
        )
    }
}

fn scale_rect(r: Rect, s: f64) -> Rect {
    Rect::new(r.x0 * s, r.x1 * s, r.y0 * s, r.y1 * s)
}

/// int over `rect` of (1 - |w|^2)^2 conj(w)^m for m = 0..=degree, by a
/// tensor Gauss-Legendre rule exact for the integrand's polynomial degree.
fn moments_over_rect(rect: Rect, degree: usize) -> Vec<Complex64> {
    let n = (degree + 4).div_ceil(2) + 1;
    let (xs, ws) = gauss_legendre(n);
    let mut moments = vec![Complex64::default(); degree + 1];
    let (hx, hy) = (0.5 * rect.width(), 0.5 * rect.height());
    let c = rect.center();
    let jac = hx * hy;
    for (xi, wx) in xs.iter().zip(&ws) {
        for (yi, wy) in xs.iter().zip(&ws) {
            let w = Complex64::new(c.re + hx * xi, c.im + hy * yi);
            let t = 1.0 - w.norm_sqr();
            let base = jac * wx * wy * t * t;
            let cw = w.conj();
            let mut pw = Complex64::new(base, 0.0);
            for m in moments.iter_mut() {
                *m += pw;
                pw *= cw;
            }
        }
    }
    moments
}

/// Same moments over a disk, polar tensor rule: Gauss-Legendre radially,
/// equispaced angles (exact for the trigonometric degree involved).
fn moments_over_disk(center: Complex64, radius: f64, degree: usize) -> Vec<Complex64> {
    let n_r = (degree + 6).div_ceil(2) + 1;
    let n_t = degree + 8;
    let (xs, ws) = gauss_legendre(n_r);
    let mut moments = vec![Complex64::default(); degree + 1];
    let dt = std::f64::consts::TAU / n_t as f64;
    for (xi, wr) in xs.iter().zip(&ws) {
        let r = 0.5 * radius * (xi + 1.0);
        let jac = 0.5 * radius * wr * r * dt;
        for j in 0..n_t {
            let th = (j as f64 + 0.5) * dt;
            let w = center + Complex64::from_polar(r, th);
            let t = 1.0 - w.norm_sqr();
            let base = jac * t * t;
            let cw = w.conj();
            let mut pw = Complex64::new(base, 0.0);
            for m in moments.iter_mut() {
                *m += pw;
                pw *= cw;
            }
        }
    }
    moments
}

/// Horner evaluation of sum_m binom(m+3, 3) moments[m] x^m.
fn kernel_series(moments: &[Complex64], x: Complex64) -> Complex64 {
    let mut acc = Complex64::default();
    for m in (0..moments.len()).rev() {
        let mf = m as f64;
        let b = (mf + 1.0) * (mf + 2.0) * (mf + 3.0) / 6.0;
        acc = acc * x + moments[m] * b;
    }
    acc
}

/// Projection value of a moment table at carrier orbit `orbit`:
/// c * sum over words A of series(A zeta) A'(zeta)^2.
pub fn eval_with_orbit(moments: &[Complex64], orbit: &WordOrbit) -> Complex64 {
    let mut total = Complex64::default();
    for el in &orbit.elements {
        total += kernel_series(moments, el.image) * el.derivative * el.derivative;
    }
    total * bergman::calibrated_constant()
}

/// Projection value of a moment table at plane point z.
pub fn eval_moment_series(model: &SurfaceModel, moments: &[Complex64], z: Complex64) -> Result<Complex64> {
    let zeta = model.to_carrier(z);
    geom::require_in_disk(zeta)?;
    Ok(eval_with_orbit(moments, &model.orbit(zeta)?))
}

/// Indicator of the half-open cell (k, l) as projectable data: evaluates to
/// 1 on the cell, 0 elsewhere, with the cell rectangle as its support.
pub fn cell_indicator(k: i64, l: i64) -> MeasurableQD {
    let cell = Cell { k, l };
    MeasurableQD::with_support(
        move |z| {
            if cell.contains(z) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            }
        },
        Region::Rect(cell.rect()),
    )
}

/// One partition atom P_{k,l}: the Bergman projection of its cell
/// indicator, as an exact moment table plus the fitted decay certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionAtom {
    pub k: i64,
    pub l: i64,
    moments: Vec<Complex64>,
    /// Smallest C with |P(z)| <= C exp(-|z - z_{k,l}| / C) on the standard
    /// Omega grid of the window. A finite-window certificate, refit nowhere.
    pub decay_c: f64,
    /// |P| at the atom's own cell center (the natural sample value).
    pub center_abs: f64,
}

impl PartitionAtom {
    pub fn moments(&self) -> &[Complex64] {
        &self.moments
    }

    pub fn center(&self) -> Complex64 {
        lattice::lattice_point(self.k, self.l)
    }

    pub fn eval(&self, model: &SurfaceModel, z: Complex64) -> Result<Complex64> {
        eval_moment_series(model, &self.moments, z)
    }

    /// The certified envelope at distance r from the atom's center.
    pub fn envelope(&self, r: f64) -> f64 {
        decay_envelope(self.decay_c, r)
    }
}

pub fn decay_envelope(c: f64, r: f64) -> f64 {
    c * (-r / c).exp()
}

/// Smallest C with C exp(-r_i / C) >= v_i for all samples. The envelope is
/// increasing in C pointwise, so bisection applies; the returned value is
/// the certified upper endpoint.
pub fn fit_decay_constant(samples: &[(f64, f64)]) -> Result<f64> {
    let holds = |c: f64| samples.iter().all(|&(r, v)| decay_envelope(c, r) >= v);
    let mut hi = 1e-6;
    while !holds(hi) {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Config(
                "no exponential envelope with C <= 1e9 covers the samples".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi * (1.0 + 1e-12))
}

/// The standard Omega sample grid of a window: points on the step-1/subdiv
/// grid shifted to cell corners, kept if they lie in Omega and inside the
/// window rectangle. subdiv = 1 gives exactly the half-integer corners.
pub fn omega_grid(window: IntRect, subdiv: u32) -> Vec<Complex64> {
    assert!(subdiv >= 1);
    let step = 1.0 / subdiv as f64;
    let mut out = Vec::new();
    let (x0, x1) = (window.k_min as f64 - 0.5, window.k_max as f64 + 0.5);
    let (y0, y1) = (window.l_min as f64 - 0.5, window.l_max as f64 + 0.5);
    let nx = ((x1 - x0) / step).round() as i64;
    let ny = ((y1 - y0) / step).round() as i64;
    for i in 0..=nx {
        for j in 0..=ny {
            let z = Complex64::new(x0 + i as f64 * step, y0 + j as f64 * step);
            if lattice::omega_contains(z) {
                out.push(z);
            }
        }
    }
    out
}

/// Builds the atom of cell (k, l): exact moment table plus the decay
/// constant fitted on the standard Omega grid. `tol` caps the certified
/// kernel-series truncation error of later evaluations.
pub fn build_atom(model: &SurfaceModel, k: i64, l: i64, tol: f64) -> Result<PartitionAtom> {
    require_series_within(model, tol)?;
    let moments = model.cell_moments(k, l)?;
    finish_atom(model, k, l, moments, &omega_grid(model.window(), 1))
}

fn require_series_within(model: &SurfaceModel, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::NonPositive {
            name: "tol",
            value: tol,
        });
    }
    if model.series_tail() > tol {
        return Err(Error::Config(format!(
            "kernel series tail {} exceeds requested tolerance {tol}",
            model.series_tail()
        )));
    }
    Ok(tol)
}

fn finish_atom(
    model: &SurfaceModel,
    k: i64,
    l: i64,
    moments: Vec<Complex64>,
    grid: &[Complex64],
) -> Result<PartitionAtom> {
    let center = lattice::lattice_point(k, l);
    let mut samples = Vec::with_capacity(grid.len());
    for &z in grid {
        let v = eval_moment_series(model, &moments, z)?.norm();
        samples.push(((z - center).norm(), v));
    }
    let decay_c = fit_decay_constant(&samples)?;
    let center_abs = eval_moment_series(model, &moments, center)?.norm();
    Ok(PartitionAtom {
        k,
        l,
        moments,
        decay_c,
        center_abs,
    })
}

/// Builds every atom of the window. Orbit enumeration is shared per grid
/// point, which matters on quotient models.
pub fn build_atoms(model: &SurfaceModel, tol: f64) -> Result<Vec<PartitionAtom>> {
    require_series_within(model, tol)?;
    let window = model.window();
    let cells: Vec<(i64, i64)> = window.indices().collect();
    let mut tables = Vec::with_capacity(cells.len());
    for &(k, l) in &cells {
        tables.push(model.cell_moments(k, l)?);
    }
    let grid = omega_grid(window, 1);
    let mut values = vec![Vec::with_capacity(grid.len()); cells.len()];
    for &z in &grid {
        let zeta = model.to_carrier(z);
        geom::require_in_disk(zeta)?;
        let orbit = model.orbit(zeta)?;
        for (vals, table) in values.iter_mut().zip(&tables) {
            vals.push(eval_with_orbit(table, &orbit).norm());
        }
    }
    let mut atoms = Vec::with_capacity(cells.len());
    for (i, (&(k, l), moments)) in cells.iter().zip(tables).enumerate() {
        let center = lattice::lattice_point(k, l);
        let samples: Vec<(f64, f64)> = grid
            .iter()
            .zip(&values[i])
            .map(|(&z, &v)| ((z - center).norm(), v))
            .collect();
        let decay_c = fit_decay_constant(&samples)?;
        let center_abs = eval_moment_series(model, &moments, center)?.norm();
        atoms.push(PartitionAtom {
            k,
            l,
            moments,
            decay_c,
            center_abs,
        });
    }
    Ok(atoms)
}

/// Partial partition sum with its truncation certificate.
#[derive(Debug, Clone, Copy)]
pub struct PartitionSum {
    pub value: Complex64,
    pub truncation_radius: f64,
    /// Decay-certificate mass of the window cells left out, plus the
    /// kernel-series slack of the included evaluations.
    pub tail_bound: f64,
}

/// Sums the atoms of all cells within `radius` of z. Every window cell in
/// that disk must have an atom; a cell of the disk outside the window is a
/// window-too-small error. The audited contract is
/// |value - window_projection(z)| <= tail_bound + quadrature slack.
pub fn partition_sum(
    model: &SurfaceModel,
    atoms: &[PartitionAtom],
    z: Complex64,
    radius: f64,
) -> Result<PartitionSum> {
    if !(radius >= 0.0) {
        return Err(Error::NonPositive {
            name: "radius",
            value: radius,
        });
    }
    if !lattice::omega_contains(z) {
        return Err(Error::Config(format!(
            "partition sums are audited on Omega; {z} is inside a quarter-disk"
        )));
    }
    let window = model.window();
    let mut by_index = std::collections::BTreeMap::new();
    for atom in atoms {
        by_index.insert((atom.k, atom.l), atom);
    }

    // Cells of the radius disk, window or not.
    let k_lo = (z.re - radius).floor() as i64;
    let k_hi = (z.re + radius).ceil() as i64;
    let l_lo = (z.im - radius).floor() as i64;
    let l_hi = (z.im + radius).ceil() as i64;
    let mut value = Complex64::default();
    let mut included = 0usize;
    let zeta = model.to_carrier(z);
    geom::require_in_disk(zeta)?;
    let orbit = model.orbit(zeta)?;
    for k in k_lo..=k_hi {
        for l in l_lo..=l_hi {
            let d = (lattice::lattice_point(k, l) - z).norm();
            if d > radius {
                continue;
            }
            if !window.contains(k, l) {
                return Err(Error::WindowTooSmall { k, l });
            }
            match by_index.get(&(k, l)) {
                Some(atom) => {
                    value += eval_with_orbit(atom.moments(), &orbit);
                    included += 1;
                }
                None => return Err(Error::WindowTooSmall { k, l }),
            }
        }
    }
    let mut tail = included as f64 * model.series_tail();
    for (&(k, l), atom) in &by_index {
        let d = (lattice::lattice_point(k, l) - z).norm();
        if d > radius {
            tail += atom.envelope(d);
        }
    }
    Ok(PartitionSum {
        value,
        truncation_radius: radius,
        tail_bound: tail,
    })
}

static MEAN_VALUE_CONSTANT: OnceLock<f64> = OnceLock::new();

/// Mean-value radius used by the expansion audit.
pub const MEAN_VALUE_RADIUS: f64 = 0.125;

/// How the area-mean prefactor was fixed: calibrated = 1 / measured area of
/// the radius-1/8 disk (64/pi analytically, so the mean of h = 1 is 1); the
/// half convention 32/pi yields 1/2, the same |dw|^2 = 2 dx dy bookkeeping
/// as the projection constant.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanValueReport {
    pub calibrated: f64,
    pub analytic: f64,
    pub half_convention: f64,
    pub mean_of_one_half_convention: f64,
}

fn mean_value_constant() -> f64 {
    *MEAN_VALUE_CONSTANT.get_or_init(|| {
        let area = quadrature::integrate_disk(
            &|_| Complex64::new(1.0, 0.0),
            Complex64::default(),
            MEAN_VALUE_RADIUS,
            1e-12,
            quadrature::DEFAULT_BUDGET,
        )
        .expect("area quadrature")
        .re();
        1.0 / area
    })
}

pub fn mean_value_report() -> MeanValueReport {
    let calibrated = mean_value_constant();
    let analytic = 64.0 / std::f64::consts::PI;
    let half = 32.0 / std::f64::consts::PI;
    MeanValueReport {
        calibrated,
        analytic,
        half_convention: half,
        mean_of_one_half_convention: half / analytic,
    }
}

/// Area mean of h over the disk of radius 1/8 at z0, with the calibrated
/// prefactor: equals h(z0) exactly for h holomorphic on the closed disk.
/// A pole inside surfaces as divergent refinement (budget error).
pub fn mean_value_expand<F>(h: &F, z0: Complex64, tol: f64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64 + ?Sized,
{
    let integral = quadrature::integrate_disk(h, z0, MEAN_VALUE_RADIUS, tol, quadrature::DEFAULT_BUDGET)?;
    Ok(integral.value * mean_value_constant())
}

/// max{16 e^(2 s0 + 2), 2/s0}: the decay constant produced by the distance
/// estimate chain for metric floor s0.
pub fn pestimate_constant(s0: f64) -> Result<f64> {
    if !(s0 > 0.0) {
        return Err(Error::NonPositive {
            name: "s0",
            value: s0,
        });
    }
    Ok((16.0 * (2.0 * s0 + 2.0).exp()).max(2.0 / s0))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnvelopeSample {
    pub z: Complex64,
    pub r: f64,
    pub value_abs: f64,
    pub fitted_env: f64,
    pub reference_env: f64,
    pub within_fitted: bool,
}

/// Per-sample audit of one atom's decay certificate, against both the
/// fitted constant and the reference constant from `pestimate_constant`.
#[derive(Debug, Clone, Serialize)]
pub struct PestimateReport {
    pub k: i64,
    pub l: i64,
    pub s0: f64,
    pub fitted_c: f64,
    pub reference_c: f64,
    pub pass: bool,
    pub violations: usize,
    pub samples: Vec<EnvelopeSample>,
}

/// Checks |P(z)| <= fitted_c e^(-r/fitted_c) at every sample (r measured
/// from the atom's own cell center). Samples must lie in Omega; a sample
/// inside a quarter-disk is a precondition error. Violations are reported,
/// never refit.
pub fn pestimate_audit(
    model: &SurfaceModel,
    atom: &PartitionAtom,
    samples: &[Complex64],
) -> Result<PestimateReport> {
    let reference_c = pestimate_constant(model.s0())?;
    let center = atom.center();
    let mut out = Vec::with_capacity(samples.len());
    let mut violations = 0usize;
    for &z in samples {
        if !lattice::omega_contains(z) {
            return Err(Error::Config(format!(
                "sample {z} is not in Omega (distance to the integer lattice < 1/4)"
            )));
        }
        let r = (z - center).norm();
        let value_abs = atom.eval(model, z)?.norm();
        let fitted_env = atom.envelope(r);
        let within = value_abs <= fitted_env * (1.0 + 1e-9) + 1e-300;
        if !within {
            violations += 1;
        }
        out.push(EnvelopeSample {
            z,
            r,
            value_abs,
            fitted_env,
            reference_env: decay_envelope(reference_c, r),
            within_fitted: within,
        });
    }
    Ok(PestimateReport {
        k: atom.k,
        l: atom.l,
        s0: model.s0(),
        fitted_c: atom.decay_c,
        reference_c,
        pass: violations == 0,
        violations,
        samples: out,
    })
}

/// Writes atoms as CSV, one row per moment: k, l, decay_c, center_abs, m,
/// re, im. Values print in shortest-roundtrip form, so read-back is exact.
pub fn write_atoms_csv<W: std::io::Write>(atoms: &[PartitionAtom], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "l", "decay_c", "center_abs", "m", "re", "im"])?;
    for atom in atoms {
        for (m, c) in atom.moments.iter().enumerate() {
            w.write_record([
                atom.k.to_string(),
                atom.l.to_string(),
                atom.decay_c.to_string(),
                atom.center_abs.to_string(),
                m.to_string(),
                c.re.to_string(),
                c.im.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads the CSV written by [`write_atoms_csv`], validating contiguous
/// moment indices per cell.
pub fn read_atoms_csv<R: std::io::Read>(reader: R) -> Result<Vec<PartitionAtom>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let expect = ["k", "l", "decay_c", "center_abs", "m", "re", "im"];
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != expect {
        return Err(Error::CsvSchema(format!(
            "atom csv needs columns {expect:?}, got {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut atoms: Vec<PartitionAtom> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let field = |i: usize| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::CsvSchema("short row".into()))
        };
        let k: i64 = field(0)?.parse().map_err(|e| Error::CsvSchema(format!("k: {e}")))?;
        let l: i64 = field(1)?.parse().map_err(|e| Error::CsvSchema(format!("l: {e}")))?;
        let decay_c: f64 = field(2)?.parse().map_err(|e| Error::CsvSchema(format!("decay_c: {e}")))?;
        let center_abs: f64 = field(3)?.parse().map_err(|e| Error::CsvSchema(format!("center_abs: {e}")))?;
        let m: usize = field(4)?.parse().map_err(|e| Error::CsvSchema(format!("m: {e}")))?;
        let re: f64 = field(5)?.parse().map_err(|e| Error::CsvSchema(format!("re: {e}")))?;
        let im: f64 = field(6)?.parse().map_err(|e| Error::CsvSchema(format!("im: {e}")))?;
        let push_new = match atoms.last() {
            Some(a) => (a.k, a.l) != (k, l),
            None => true,
        };
        if push_new {
            if m != 0 {
                return Err(Error::CsvSchema(format!(
                    "cell ({k},{l}) starts at moment {m}, expected 0"
                )));
            }
            atoms.push(PartitionAtom {
                k,
                l,
                moments: Vec::new(),
                decay_c,
                center_abs,
            });
        }
        let atom = atoms.last_mut().expect("just pushed");
        if m != atom.moments.len() {
            return Err(Error::CsvSchema(format!(
                "cell ({k},{l}) moment index {m} out of order"
            )));
        }
        atom.moments.push(Complex64::new(re, im));
    }
    if atoms.is_empty() {
        return Err(Error::CsvSchema("atom csv has no rows".into()));
    }
    Ok(atoms)
}
