//! Integer lattice, quasilattices, the cell decomposition, the region Omega,
//! and Euclidean-to-hyperbolic distance floors.
//!
//! The integer lattice is enumerated by z_{k,l} = k + l i. A quasilattice
//! realizes one perturbed point w_{k,l} per cell with |w_{k,l} - z_{k,l}|
//! <= delta <= 1/8, on a finite index window. Omega is the set of points at
//! distance >= 1/4 from the integer lattice; it avoids every quasilattice by
//! at least 1/8.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::quadrature::Rect;
use crate::{Error, Result};

/// Largest admissible perturbation modulus.
pub const MAX_OFFSET: f64 = 0.125;

/// Omega keeps this Euclidean distance from every integer lattice point.
pub const OMEGA_CLEARANCE: f64 = 0.25;

/// Inclusive integer index rectangle `[k_min, k_max] x [l_min, l_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRect {
    pub k_min: i64,
    pub k_max: i64,
    pub l_min: i64,
    pub l_max: i64,
}

impl IntRect {
    pub fn new(k_min: i64, k_max: i64, l_min: i64, l_max: i64) -> Result<Self> {
        if k_min > k_max || l_min > l_max {
            return Err(Error::Config(format!(
                "empty index window [{k_min},{k_max}]x[{l_min},{l_max}]"
            )));
        }
        Ok(Self {
            k_min,
            k_max,
            l_min,
            l_max,
        })
    }

    /// The centered window `[-n, n]^2`.
    pub fn centered(n: i64) -> Self {
        Self {
            k_min: -n,
            k_max: n,
            l_min: -n,
            l_max: n,
        }
    }

    /// The `side x side` window `[-side/2, side/2 - 1]^2` (floor-centered,
    /// so even side lengths have an exact cell count of `side^2`).
    pub fn floor_centered(side: i64) -> Result<Self> {
        if side < 1 {
            return Err(Error::NonPositive {
                name: "side",
                value: side as f64,
            });
        }
        let lo = -(side / 2);
        let hi = lo + side - 1;
        Self::new(lo, hi, lo, hi)
    }

    pub fn contains(&self, k: i64, l: i64) -> bool {
        (self.k_min..=self.k_max).contains(&k) && (self.l_min..=self.l_max).contains(&l)
    }

    pub fn count(&self) -> usize {
        ((self.k_max - self.k_min + 1) * (self.l_max - self.l_min + 1)) as usize
    }

    /// Lexicographic (k, then l) enumeration of the window.
    pub fn indices(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        let ls = self.l_min..=self.l_max;
        (self.k_min..=self.k_max).flat_map(move |k| ls.clone().map(move |l| (k, l)))
    }

    /// Largest |z_{k,l}| over the window, measured to cell corners: the
    /// radius of a disk containing every realized cell.
    pub fn corner_radius(&self) -> f64 {
        let kx = (self.k_min.abs().max(self.k_max.abs()) as f64) + 0.5;
        let ly = (self.l_min.abs().max(self.l_max.abs()) as f64) + 0.5;
        kx.hypot(ly)
    }
}

/// z_{k,l} = k + l i.
pub fn lattice_point(k: i64, l: i64) -> Complex64 {
    Complex64::new(k as f64, l as f64)
}

/// Index square of the cell decomposition, cell = z_{k,l} + [-1/2, 1/2)^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub k: i64,
    pub l: i64,
}

impl Cell {
    pub fn center(&self) -> Complex64 {
        lattice_point(self.k, self.l)
    }

    /// Closed-bounds geometry; membership with the half-open convention is
    /// [`Cell::contains`].
    pub fn rect(&self) -> Rect {
        let c = self.center();
        Rect::new(c.re - 0.5, c.re + 0.5, c.im - 0.5, c.im + 0.5)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        cell_of(z) == *self
    }
}

/// The unique cell with z in z_{k,l} + [-1/2, 1/2)^2. The half-open
/// convention makes this a function; boundary overlaps are null sets.
pub fn cell_of(z: Complex64) -> Cell {
    Cell {
        k: (z.re + 0.5).floor() as i64,
        l: (z.im + 0.5).floor() as i64,
    }
}

/// True iff d(z, L0) >= 1/4, L0 the integer lattice. Boundary included.
pub fn omega_contains(z: Complex64) -> bool {
    let nearest = Complex64::new(z.re.round(), z.im.round());
    (z - nearest).norm() >= OMEGA_CLEARANCE
}

fn cell_seed(seed: u64, k: i64, l: i64) -> u64 {
    let mut x = seed ^ 0x9E37_79B9_7F4A_7C15;
    for v in [k as u64, l as u64] {
        x ^= v.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = x.rotate_left(27).wrapping_mul(0x94D0_49BB_1331_11EB);
    }
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    x
}

/// A perturbed integer lattice realized on a finite index window.
///
/// Immutable after construction; all queries are pure. The offset table is
/// authoritative: `seed` records how generated lattices were drawn and is 0
/// for extracted ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "QuasilatticeRepr", try_from = "QuasilatticeRepr")]
pub struct Quasilattice {
    seed: u64,
    delta: f64,
    window: IntRect,
    offsets: BTreeMap<(i64, i64), Complex64>,
}

/// Wire form: offsets as a sorted array of (k, l, re, im) rows so the JSON
/// is deterministic and self-describing.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct QuasilatticeRepr {
    seed: u64,
    delta: f64,
    window: IntRect,
    offsets: Vec<(i64, i64, f64, f64)>,
}

impl From<Quasilattice> for QuasilatticeRepr {
    fn from(q: Quasilattice) -> Self {
        QuasilatticeRepr {
            seed: q.seed,
            delta: q.delta,
            window: q.window,
            offsets: q
                .offsets
                .iter()
                .map(|(&(k, l), o)| (k, l, o.re, o.im))
                .collect(),
        }
    }
}

impl TryFrom<QuasilatticeRepr> for Quasilattice {
    type Error = Error;

    fn try_from(r: QuasilatticeRepr) -> Result<Self> {
        if !(0.0..=MAX_OFFSET).contains(&r.delta) {
            return Err(Error::DeltaTooLarge { delta: r.delta });
        }
        let mut offsets = BTreeMap::new();
        for (k, l, re, im) in r.offsets {
            let o = Complex64::new(re, im);
            if !r.window.contains(k, l) {
                return Err(Error::Config(format!("offset index ({k},{l}) outside window")));
            }
            if o.norm() > r.delta * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "offset at ({k},{l}) has modulus {} > delta {}",
                    o.norm(),
                    r.delta
                )));
            }
            if offsets.insert((k, l), o).is_some() {
                return Err(Error::Config(format!("duplicate offset index ({k},{l})")));
            }
        }
        if offsets.len() != r.window.count() {
            return Err(Error::Config(format!(
                "window realizes {} cells but {} offsets given",
                r.window.count(),
                offsets.len()
            )));
        }
        Ok(Quasilattice {
            seed: r.seed,
            delta: r.delta,
            window: r.window,
            offsets,
        })
    }
}

impl Quasilattice {
    /// Deterministic pseudo-random lattice: each cell draws its offset from
    /// its own stream keyed by (seed, k, l), modulus delta * sqrt(u) with
    /// uniform angle, so offsets are uniform on the delta-disk and a window
    /// change never reshuffles existing cells.
    pub fn generate(seed: u64, delta: f64, window: IntRect) -> Result<Self> {
        if !(0.0..=MAX_OFFSET).contains(&delta) {
            return Err(Error::DeltaTooLarge { delta });
        }
        let mut offsets = BTreeMap::new();
        for (k, l) in window.indices() {
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, k, l));
            let r = delta * rng.random::<f64>().sqrt();
            let phi = rng.random::<f64>() * std::f64::consts::TAU;
            offsets.insert((k, l), Complex64::from_polar(r, phi));
        }
        Ok(Self {
            seed,
            delta,
            window,
            offsets,
        })
    }

    /// The unperturbed lattice on `window`.
    pub fn integer(window: IntRect) -> Self {
        Self::generate(0, 0.0, window).expect("delta 0 is valid")
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn window(&self) -> IntRect {
        self.window
    }

    /// Realized point w_{k,l}, if (k,l) lies in the window.
    pub fn point(&self, k: i64, l: i64) -> Option<Complex64> {
        self.offsets
            .get(&(k, l))
            .map(|o| lattice_point(k, l) + o)
    }

    pub fn offset(&self, k: i64, l: i64) -> Option<Complex64> {
        self.offsets.get(&(k, l)).copied()
    }

    /// All realized points in lexicographic index order.
    pub fn points(&self) -> impl Iterator<Item = ((i64, i64), Complex64)> + '_ {
        self.offsets
            .iter()
            .map(|(&(k, l), o)| ((k, l), lattice_point(k, l) + o))
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Euclidean distance from z to the realized point set.
    pub fn distance_to(&self, z: Complex64) -> f64 {
        // Offsets are <= 1/8, so only cells within ceil(d)+1 of the nearest
        // candidate matter; a full scan is still cheap at desk scale.
        self.points()
            .map(|(_, w)| (z - w).norm())
            .fold(f64::INFINITY, f64::min)
    }
}

/// A raw set of points with a claimed well-distribution radius: every disk
/// of that radius (in the window of interest) is claimed to meet the set.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub points: Vec<Complex64>,
    pub claimed_c: f64,
}

impl PointSet {
    pub fn new(points: Vec<Complex64>, claimed_c: f64) -> Result<Self> {
        if !(claimed_c > 0.0) {
            return Err(Error::NonPositive {
                name: "claimed_c",
                value: claimed_c,
            });
        }
        Ok(Self { points, claimed_c })
    }

    /// Reads `re,im` columns (with header) from CSV.
    pub fn from_csv<R: Read>(reader: R, claimed_c: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let re_idx = headers.iter().position(|h| h.trim() == "re");
        let im_idx = headers.iter().position(|h| h.trim() == "im");
        let (re_idx, im_idx) = match (re_idx, im_idx) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::CsvSchema(format!(
                    "need columns re,im; got {:?}",
                    headers.iter().collect::<Vec<_>>()
                )))
            }
        };
        let mut points = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let parse = |idx: usize| -> Result<f64> {
                record
                    .get(idx)
                    .ok_or_else(|| Error::CsvSchema("short row".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::CsvSchema(format!("bad number: {e}")))
            };
            points.push(Complex64::new(parse(re_idx)?, parse(im_idx)?));
        }
        Self::new(points, claimed_c)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P, claimed_c: f64) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?, claimed_c)
    }

    pub fn to_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["re", "im"])?;
        for p in &self.points {
            w.write_record([format!("{:.17}", p.re), format!("{:.17}", p.im)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Selects one point of `e` inside the closed 1/8-disk around each cell
/// center of `window`, smallest distance first and lexicographic (re, im)
/// on ties, so the extraction is deterministic. An empty disk names the
/// offending cell.
pub fn extract_quasilattice(e: &PointSet, window: IntRect) -> Result<Quasilattice> {
    let mut offsets = BTreeMap::new();
    let mut delta = 0.0_f64;
    for (k, l) in window.indices() {
        let center = lattice_point(k, l);
        let mut best: Option<(f64, Complex64)> = None;
        for &p in &e.points {
            let d = (p - center).norm();
            if d > MAX_OFFSET {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, bp)) => {
                    d < bd - 1e-15
                        || ((d - bd).abs() <= 1e-15
                            && (p.re, p.im) < (bp.re, bp.im))
                }
            };
            if better {
                best = Some((d, p));
            }
        }
        match best {
            Some((d, p)) => {
                delta = delta.max(d);
                offsets.insert((k, l), p - center);
            }
            None => return Err(Error::NotWellDistributed { k, l }),
        }
    }
    Ok(Quasilattice {
        seed: 0,
        delta: delta.min(MAX_OFFSET),
        window,
        offsets,
    })
}

/// Certified hyperbolic-distance floor on the lattice complement:
/// d_L(z, w) >= (s0/2) |z - w| - 2 s0, with s0 the metric floor on Omega.
/// Vacuous (negative) at short range, sharp enough at long range.
pub fn distance_lower_bound(z: Complex64, w: Complex64, s0: f64) -> Result<f64> {
    if !(s0 > 0.0) {
        return Err(Error::NonPositive {
            name: "s0",
            value: s0,
        });
    }
    Ok(0.5 * s0 * (z - w).norm() - 2.0 * s0)
}

/// Euclidean length of the portion of a polyline that lies inside Omega.
///
/// Each edge is cut into steps of at most `OMEGA_PATH_STEP` and classified
/// at its midpoint. Endpoints must avoid the realized lattice points.
/// Contract (tested adversarially): for any path between z and w the result
/// is >= |z - w| / 2 - 2.
pub fn omega_path_length(path: &[Complex64], lattice: &Quasilattice) -> Result<f64> {
    const OMEGA_PATH_STEP: f64 = 0.004;
    if path.len() < 2 {
        return Err(Error::Config("path needs at least two vertices".into()));
    }
    for &end in [path[0], path[path.len() - 1]].iter() {
        if lattice.distance_to(end) < 1e-9 {
            return Err(Error::Config(format!(
                "path endpoint {end} lies on a lattice point"
            )));
        }
    }
    let mut inside = 0.0;
    for pair in path.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let len = (b - a).norm();
        if len == 0.0 {
            continue;
        }
        let steps = (len / OMEGA_PATH_STEP).ceil() as usize;
        let h = len / steps as f64;
        for i in 0..steps {
            let t = (i as f64 + 0.5) / steps as f64;
            if omega_contains(a + (b - a) * t) {
                inside += h;
            }
        }
    }
    Ok(inside)
}
