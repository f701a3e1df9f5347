//! C ABI for the reichlab numerical laboratory.
//!
//! Conventions, mirrored in the generated `include/reichlab.h`:
//!
//! * Every fallible function returns an `int32_t` status code
//!   ([`REICHLAB_OK`] is 0) and writes its results through out-pointers.
//!   Out-pointers are written only on success.
//! * Complex scalars pass as separate `re`/`im` doubles.
//! * `ReichlabGroup`, `ReichlabModel`, and `ReichlabAtomSet` are opaque
//!   handles. Each constructor pairs with a `_free` function; `_free`
//!   accepts NULL. Handles are immutable after construction, so sharing a
//!   handle across threads for concurrent reads is safe; freeing must
//!   happen exactly once.
//! * Passing NULL where a handle or out-pointer is required yields
//!   [`REICHLAB_ERR_INVALID_ARG`]; non-finite doubles are rejected the
//!   same way.

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;

use reichlab::fuchsian::FuchsianGroup;
use reichlab::lattice::{IntRect, Quasilattice};
use reichlab::partition::{self, PartitionAtom, SurfaceModel};
use reichlab::reich;
use reichlab::{bergman, geom, Error};

/// Success.
pub const REICHLAB_OK: i32 = 0;
/// Input outside the mathematical domain (point outside the disk, window
/// too small, parameter out of range).
pub const REICHLAB_ERR_DOMAIN: i32 = 1;
/// A certified computation gave up before reaching its tolerance
/// (quadrature budget, word depth, decay envelope, boundary deviation).
pub const REICHLAB_ERR_CONVERGENCE: i32 = 2;
/// NULL pointer, non-finite double, unknown cell index, or otherwise
/// malformed argument.
pub const REICHLAB_ERR_INVALID_ARG: i32 = 3;
/// Unexpected internal failure.
pub const REICHLAB_ERR_INTERNAL: i32 = 4;

fn status_of(err: &Error) -> i32 {
    match err {
        Error::OutsideDisk { .. }
        | Error::NonPositive { .. }
        | Error::OutOfRange { .. }
        | Error::DeltaTooLarge { .. }
        | Error::NotWellDistributed { .. }
        | Error::WindowTooSmall { .. }
        | Error::RegionTouchesBasePoint { .. } => REICHLAB_ERR_DOMAIN,
        Error::BudgetExceeded { .. }
        | Error::NonIntegrable { .. }
        | Error::DepthExhausted { .. }
        | Error::EnvelopeViolation { .. }
        | Error::BoundaryEpsViolated { .. } => REICHLAB_ERR_CONVERGENCE,
        Error::UnsupportedGroup { .. } | Error::Config(_) | Error::CsvSchema(_) => {
            REICHLAB_ERR_INVALID_ARG
        }
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => REICHLAB_ERR_INTERNAL,
    }
}

/// Runs a fallible body, translating panics into the internal status code
/// so they never unwind across the ABI.
fn guarded(body: impl FnOnce() -> i32) -> i32 {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or(REICHLAB_ERR_INTERNAL)
}

fn finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

/// Library version as a static NUL-terminated string; never NULL, never
/// freed by the caller.
#[no_mangle]
pub extern "C" fn reichlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Short static name for a status code ("ok", "domain", "convergence",
/// "invalid-argument", "internal", or "unknown"); never NULL, never freed
/// by the caller.
#[no_mangle]
pub extern "C" fn reichlab_error_name(code: i32) -> *const c_char {
    let name: &'static str = match code {
        REICHLAB_OK => "ok\0",
        REICHLAB_ERR_DOMAIN => "domain\0",
        REICHLAB_ERR_CONVERGENCE => "convergence\0",
        REICHLAB_ERR_INVALID_ARG => "invalid-argument\0",
        REICHLAB_ERR_INTERNAL => "internal\0",
        _ => "unknown\0",
    };
    name.as_ptr() as *const c_char
}

/// Weight-4 kernel of the unit disk, K(z, w) = (1 - z conj(w))^-4, for
/// |z| < 1 and |w| < 1.
///
/// # Safety
/// `out_re` and `out_im` must be valid writable pointers.
#[no_mangle]
pub unsafe extern "C" fn reichlab_disk_kernel(
    z_re: f64,
    z_im: f64,
    w_re: f64,
    w_im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> i32 {
    if out_re.is_null() || out_im.is_null() || !finite(&[z_re, z_im, w_re, w_im]) {
        return REICHLAB_ERR_INVALID_ARG;
    }
    let z = Complex64::new(z_re, z_im);
    let w = Complex64::new(w_re, w_im);
    if let Err(err) = geom::require_in_disk(z).and_then(|_| geom::require_in_disk(w)) {
        return status_of(&err);
    }
    let value = bergman::disk_kernel(z, w);
    *out_re = value.re;
    *out_im = value.im;
    REICHLAB_OK
}

/// Hyperbolic distance between two points of the unit disk (density
/// 1/(1 - |z|^2)).
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn reichlab_disk_distance(
    z_re: f64,
    z_im: f64,
    w_re: f64,
    w_im: f64,
    out: *mut f64,
) -> i32 {
    if out.is_null() || !finite(&[z_re, z_im, w_re, w_im]) {
        return REICHLAB_ERR_INVALID_ARG;
    }
    match geom::disk_distance(Complex64::new(z_re, z_im), Complex64::new(w_re, w_im)) {
        Ok(d) => {
            *out = d;
            REICHLAB_OK
        }
        Err(err) => status_of(&err),
    }
}

/// Sequence weight alpha_{k,l}(n) = (|z_{k,l}| / n + 1)^-4 at the integer
/// lattice point (k, l); n must be >= 1.
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn reichlab_alpha(k: i64, l: i64, n: u32, out: *mut f64) -> i32 {
    if out.is_null() {
        return REICHLAB_ERR_INVALID_ARG;
    }
    match reich::alpha(k, l, n) {
        Ok(a) => {
            *out = a;
            REICHLAB_OK
        }
        Err(err) => status_of(&err),
    }
}

/// The gap |lambda| - Re(lambda); total, returns NaN on non-finite input.
#[no_mangle]
pub extern "C" fn reichlab_lambda_gap(lambda_re: f64, lambda_im: f64) -> f64 {
    if !finite(&[lambda_re, lambda_im]) {
        return f64::NAN;
    }
    reich::lambda_gap(Complex64::new(lambda_re, lambda_im))
}

/// Reference decay constant of partition atoms for a metric density
/// floor s0 > 0.
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn reichlab_pestimate_constant(s0: f64, out: *mut f64) -> i32 {
    if out.is_null() || !finite(&[s0]) {
        return REICHLAB_ERR_INVALID_ARG;
    }
    match partition::pestimate_constant(s0) {
        Ok(c) => {
            *out = c;
            REICHLAB_OK
        }
        Err(err) => status_of(&err),
    }
}

// ---------------------------------------------------------------------------
// Groups
// ---------------------------------------------------------------------------

/// Opaque handle to a group of disk automorphisms.
pub struct ReichlabGroup {
    inner: FuchsianGroup,
}

/// The trivial (rank-0) group; never NULL.
#[no_mangle]
pub extern "C" fn reichlab_group_trivial() -> *mut ReichlabGroup {
    Box::into_raw(Box::new(ReichlabGroup {
        inner: FuchsianGroup::trivial(),
    }))
}

/// Cyclic hyperbolic group of the given translation length (> 0);
/// NULL on invalid input.
#[no_mangle]
pub extern "C" fn reichlab_group_cyclic(length: f64) -> *mut ReichlabGroup {
    if !length.is_finite() {
        return std::ptr::null_mut();
    }
    match FuchsianGroup::cyclic(length) {
        Ok(inner) => Box::into_raw(Box::new(ReichlabGroup { inner })),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Free rank-2 group generated by the level-2 congruence translations,
/// conjugated to the disk; never NULL.
#[no_mangle]
pub extern "C" fn reichlab_group_gamma2() -> *mut ReichlabGroup {
    Box::into_raw(Box::new(ReichlabGroup {
        inner: FuchsianGroup::gamma2(),
    }))
}

/// Frees a group handle; NULL is a no-op.
///
/// # Safety
/// `group` must be NULL or a pointer returned by a `reichlab_group_*`
/// constructor that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn reichlab_group_free(group: *mut ReichlabGroup) {
    if !group.is_null() {
        drop(Box::from_raw(group));
    }
}

/// Truncated orbit sum of kernel pullbacks at word depth `depth`:
/// value and the certificate bound on the omitted terms.
///
/// # Safety
/// `group` must be a live group handle; `out_re`, `out_im`, and
/// `out_tail` must be valid writable pointers.
#[no_mangle]
pub unsafe extern "C" fn reichlab_poincare_kernel(
    group: *const ReichlabGroup,
    z_re: f64,
    z_im: f64,
    w_re: f64,
    w_im: f64,
    depth: usize,
    out_re: *mut f64,
    out_im: *mut f64,
    out_tail: *mut f64,
) -> i32 {
    if group.is_null()
        || out_re.is_null()
        || out_im.is_null()
        || out_tail.is_null()
        || !finite(&[z_re, z_im, w_re, w_im])
    {
        return REICHLAB_ERR_INVALID_ARG;
    }
    let group = &(*group).inner;
    guarded(|| {
        match bergman::poincare_kernel(
            group,
            Complex64::new(z_re, z_im),
            Complex64::new(w_re, w_im),
            depth,
        ) {
            Ok(kernel) => {
                *out_re = kernel.value.re;
                *out_im = kernel.value.im;
                *out_tail = kernel.tail_bound;
                REICHLAB_OK
            }
            Err(err) => status_of(&err),
        }
    })
}

// ---------------------------------------------------------------------------
// Models and atom sets
// ---------------------------------------------------------------------------

/// Opaque handle to a finite-window surface model.
pub struct ReichlabModel {
    inner: SurfaceModel,
}

/// Opaque handle to a set of partition atoms built on a model's window.
pub struct ReichlabAtomSet {
    atoms: Vec<PartitionAtom>,
}

fn centered_window(side: i64) -> Option<IntRect> {
    IntRect::floor_centered(side).ok()
}

/// Plain-disk surrogate model on a centered `side x side` window with the
/// given embedding margin (> 1); NULL on invalid input.
#[no_mangle]
pub extern "C" fn reichlab_model_disk(window_side: i64, margin: f64) -> *mut ReichlabModel {
    if !margin.is_finite() {
        return std::ptr::null_mut();
    }
    let Some(window) = centered_window(window_side) else {
        return std::ptr::null_mut();
    };
    match SurfaceModel::disk(window, margin) {
        Ok(inner) => Box::into_raw(Box::new(ReichlabModel { inner })),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Punctured-window model: a seeded quasilattice (offset bound `delta`
/// <= 1/8) on a centered `side x side` window, punctures regularized at
/// radius `eps_punct`, density floor from covering radius `r0`; NULL on
/// invalid input.
#[no_mangle]
pub extern "C" fn reichlab_model_punctured(
    window_side: i64,
    margin: f64,
    seed: u64,
    delta: f64,
    eps_punct: f64,
    r0: f64,
) -> *mut ReichlabModel {
    if !finite(&[margin, delta, eps_punct, r0]) {
        return std::ptr::null_mut();
    }
    let Some(window) = centered_window(window_side) else {
        return std::ptr::null_mut();
    };
    let Ok(lattice) = Quasilattice::generate(seed, delta, window) else {
        return std::ptr::null_mut();
    };
    match SurfaceModel::punctured_window(&lattice, margin, eps_punct, r0) {
        Ok(inner) => Box::into_raw(Box::new(ReichlabModel { inner })),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Frees a model handle; NULL is a no-op.
///
/// # Safety
/// `model` must be NULL or a pointer returned by a `reichlab_model_*`
/// constructor that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn reichlab_model_free(model: *mut ReichlabModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of window cells of a model; 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn reichlab_model_cell_count(model: *const ReichlabModel) -> usize {
    match model.as_ref() {
        Some(model) => model.inner.window().count(),
        None => 0,
    }
}

/// Builds one partition atom per window cell, each with an exact moment
/// table and a fitted decay certificate; `tol` caps the certified series
/// truncation error of later evaluations. On success writes a new atom-set
/// handle to `out`.
///
/// # Safety
/// `model` must be a live model handle; `out` must be a valid writable
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn reichlab_atoms_build(
    model: *const ReichlabModel,
    tol: f64,
    out: *mut *mut ReichlabAtomSet,
) -> i32 {
    if model.is_null() || out.is_null() || !finite(&[tol]) {
        return REICHLAB_ERR_INVALID_ARG;
    }
    let model = &(*model).inner;
    guarded(|| match partition::build_atoms(model, tol) {
        Ok(atoms) => {
            *out = Box::into_raw(Box::new(ReichlabAtomSet { atoms }));
            REICHLAB_OK
        }
        Err(err) => status_of(&err),
    })
}

/// Frees an atom-set handle; NULL is a no-op.
///
/// # Safety
/// `atoms` must be NULL or a pointer returned by `reichlab_atoms_build`
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn reichlab_atoms_free(atoms: *mut ReichlabAtomSet) {
    if !atoms.is_null() {
        drop(Box::from_raw(atoms));
    }
}

/// Number of atoms in a set; 0 for NULL.
///
/// # Safety
/// `atoms` must be NULL or a live atom-set handle.
#[no_mangle]
pub unsafe extern "C" fn reichlab_atoms_len(atoms: *const ReichlabAtomSet) -> usize {
    match atoms.as_ref() {
        Some(set) => set.atoms.len(),
        None => 0,
    }
}

unsafe fn find_atom<'a>(
    atoms: *const ReichlabAtomSet,
    k: i64,
    l: i64,
) -> Option<&'a PartitionAtom> {
    atoms
        .as_ref()?
        .atoms
        .iter()
        .find(|atom| atom.k == k && atom.l == l)
}

/// Fitted decay constant of the atom of cell (k, l):
/// |P_{k,l}(z)| <= C e^(-|z - z_{k,l}| / C) at audited sample points.
///
/// # Safety
/// `atoms` must be a live atom-set handle; `out` must be a valid writable
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn reichlab_atom_decay_constant(
    atoms: *const ReichlabAtomSet,
    k: i64,
    l: i64,
    out: *mut f64,
) -> i32 {
    if atoms.is_null() || out.is_null() {
        return REICHLAB_ERR_INVALID_ARG;
    }
    match find_atom(atoms, k, l) {
        Some(atom) => {
            *out = atom.decay_c;
            REICHLAB_OK
        }
        None => REICHLAB_ERR_INVALID_ARG,
    }
}

/// Evaluates the atom of cell (k, l) at z.
///
/// # Safety
/// `model` and `atoms` must be live handles built from the same model;
/// `out_re` and `out_im` must be valid writable pointers.
#[no_mangle]
pub unsafe extern "C" fn reichlab_atom_eval(
    model: *const ReichlabModel,
    atoms: *const ReichlabAtomSet,
    k: i64,
    l: i64,
    z_re: f64,
    z_im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> i32 {
    if model.is_null()
        || atoms.is_null()
        || out_re.is_null()
        || out_im.is_null()
        || !finite(&[z_re, z_im])
    {
        return REICHLAB_ERR_INVALID_ARG;
    }
    let model = &(*model).inner;
    let Some(atom) = find_atom(atoms, k, l) else {
        return REICHLAB_ERR_INVALID_ARG;
    };
    guarded(|| match atom.eval(model, Complex64::new(z_re, z_im)) {
        Ok(value) => {
            *out_re = value.re;
            *out_im = value.im;
            REICHLAB_OK
        }
        Err(err) => status_of(&err),
    })
}

/// Sums the atoms of all cells within `radius` of z (z in the region at
/// distance >= 1/4 from the integer lattice); writes the value and the
/// certificate bound on the truncation error.
///
/// # Safety
/// `model` and `atoms` must be live handles built from the same model;
/// `out_re`, `out_im`, and `out_tail` must be valid writable pointers.
#[no_mangle]
pub unsafe extern "C" fn reichlab_partition_sum(
    model: *const ReichlabModel,
    atoms: *const ReichlabAtomSet,
    z_re: f64,
    z_im: f64,
    radius: f64,
    out_re: *mut f64,
    out_im: *mut f64,
    out_tail: *mut f64,
) -> i32 {
    if model.is_null()
        || atoms.is_null()
        || out_re.is_null()
        || out_im.is_null()
        || out_tail.is_null()
        || !finite(&[z_re, z_im, radius])
    {
        return REICHLAB_ERR_INVALID_ARG;
    }
    let model = &(*model).inner;
    let atoms = &(*atoms).atoms;
    guarded(
        || match partition::partition_sum(model, atoms, Complex64::new(z_re, z_im), radius) {
            Ok(sum) => {
                *out_re = sum.value.re;
                *out_im = sum.value.im;
                *out_tail = sum.tail_bound;
                REICHLAB_OK
            }
            Err(err) => status_of(&err),
        },
    )
}

/// Evaluates the weighted atom sum phi_n (weights alpha_{k,l}(n) over the
/// whole window) at z; writes the value and the series evaluation slack.
///
/// # Safety
/// `model` and `atoms` must be live handles built from the same model;
/// `out_re`, `out_im`, and `out_slack` must be valid writable pointers.
#[no_mangle]
pub unsafe extern "C" fn reichlab_phi_eval(
    model: *const ReichlabModel,
    atoms: *const ReichlabAtomSet,
    n: u32,
    z_re: f64,
    z_im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
    out_slack: *mut f64,
) -> i32 {
    if model.is_null()
        || atoms.is_null()
        || out_re.is_null()
        || out_im.is_null()
        || out_slack.is_null()
        || !finite(&[z_re, z_im])
    {
        return REICHLAB_ERR_INVALID_ARG;
    }
    let model = &(*model).inner;
    let atoms = &(*atoms).atoms;
    guarded(|| {
        let series = match reich::phi_series(model, atoms, n) {
            Ok(series) => series,
            Err(err) => return status_of(&err),
        };
        match series.eval(model, Complex64::new(z_re, z_im)) {
            Ok(value) => {
                *out_re = value.re;
                *out_im = value.im;
                *out_slack = series.eval_slack;
                REICHLAB_OK
            }
            Err(err) => status_of(&err),
        }
    })
}
