//! C ABI over `msc-core`.
//!
//! Dictionaries and joint models are opaque handles created by the
//! `*_train` / `*_load` functions and released with the matching `*_free`.
//! Every fallible call returns an [`MscStatus`]; on failure a description is
//! available from [`msc_last_error_message`] on the same thread.
//!
//! Matrices cross the boundary as column-major `double` buffers with one
//! example per column. Output buffers are caller-allocated; the required
//! length is documented on each function and checked against `out_len`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use msc_core::dictionary::{
    load_dictionary, save_dictionary, train, Dictionary, DictionaryMeta, TrainConfig,
};
use msc_core::multimodal::{load_joint, save_joint, train_joint, JointModel};
use msc_core::sparse::{batch_encode, codes_to_matrix};
use msc_core::{Error, Matrix, SolverConfig, SparseCode};

/// Result codes. The non-zero values match the `msc` exit codes where they
/// overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MscStatus {
    Ok = 0,
    /// Bad argument, configuration or modality name.
    InvalidArgument = 2,
    /// Shape mismatch, malformed or unreadable file.
    DataError = 3,
    /// Numerical failure or non-convergence.
    NumericalError = 4,
    /// A required pointer was null.
    NullPointer = 5,
    /// Rust panic caught at the boundary.
    Panic = 6,
}

/// A single-modality dictionary with its default coder.
pub struct MscDictionary {
    dictionary: Dictionary,
    solver: Option<SolverConfig>,
}

/// A joint dictionary over two or more modalities.
pub struct MscJointModel {
    model: JointModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn arg(msg: impl Into<String>) -> Fail {
    Fail::Core(Error::Argument(msg.into()))
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MscStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            MscStatus::Ok
        }
        Ok(Err(Fail::Null(name))) => {
            set_last_error(format!("null pointer: {name}"));
            MscStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            let status = match e.exit_code() {
                2 => MscStatus::InvalidArgument,
                3 => MscStatus::DataError,
                _ => MscStatus::NumericalError,
            };
            set_last_error(e.to_string());
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            MscStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn input_slice<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn input_matrix(p: *const f64, rows: usize, cols: usize, name: &'static str) -> Result<Matrix, Fail> {
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| arg(format!("{name}: {rows}x{cols} overflows")))?;
    let data = input_slice(p, len, name)?;
    Ok(Matrix::from_col_major(rows, cols, data.to_vec())?)
}

unsafe fn str_arg<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| arg(format!("{name} is not valid UTF-8")))
}

unsafe fn write_out(m: &Matrix, out: *mut f64, out_len: usize) -> Result<(), Fail> {
    let need = m.rows() * m.cols();
    if out_len < need {
        return Err(Fail::Core(Error::Shape(format!(
            "output buffer holds {out_len} values, {need} needed"
        ))));
    }
    if need == 0 {
        return Ok(());
    }
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    std::slice::from_raw_parts_mut(out, need).copy_from_slice(m.data());
    Ok(())
}

unsafe fn write_codes(codes: &[SparseCode], out: *mut f64, out_len: usize) -> Result<(), Fail> {
    write_out(&codes_to_matrix(codes), out, out_len)
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn msc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn msc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Trains an ℓ1 dictionary of `num_atoms` atoms with online learning.
///
/// `data` is `rows x cols`, column-major.
///
/// # Safety
/// `data` must point to `rows * cols` doubles and `out` to writable storage
/// for one handle.
#[no_mangle]
pub unsafe extern "C" fn msc_dictionary_train_l1(
    data: *const f64,
    rows: usize,
    cols: usize,
    num_atoms: usize,
    lambda: f64,
    epochs: usize,
    seed: u64,
    out: *mut *mut MscDictionary,
) -> MscStatus {
    guard(|| {
        let xs = input_matrix(data, rows, cols, "data")?;
        let cfg = TrainConfig::online(num_atoms, lambda)
            .with_epochs(epochs)
            .with_seed(seed);
        let dictionary = train(&xs, &cfg)?;
        store(
            out,
            MscDictionary {
                dictionary,
                solver: Some(cfg.solver),
            },
        )
    })
}

/// Trains an ℓ0 dictionary with K-SVD, `sparsity` atoms per code.
///
/// # Safety
/// As for [`msc_dictionary_train_l1`].
#[no_mangle]
pub unsafe extern "C" fn msc_dictionary_train_l0(
    data: *const f64,
    rows: usize,
    cols: usize,
    num_atoms: usize,
    sparsity: usize,
    epochs: usize,
    seed: u64,
    out: *mut *mut MscDictionary,
) -> MscStatus {
    guard(|| {
        let xs = input_matrix(data, rows, cols, "data")?;
        let cfg = TrainConfig::ksvd(num_atoms, sparsity)
            .with_epochs(epochs)
            .with_seed(seed);
        let dictionary = train(&xs, &cfg)?;
        store(
            out,
            MscDictionary {
                dictionary,
                solver: Some(cfg.solver),
            },
        )
    })
}

/// Loads `<stem>.msc` / `<stem>.json`.
///
/// # Safety
/// `stem` must be a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn msc_dictionary_load(
    stem: *const c_char,
    out: *mut *mut MscDictionary,
) -> MscStatus {
    guard(|| {
        let stem = str_arg(stem, "stem")?;
        let (dictionary, meta) = load_dictionary(Path::new(stem))?;
        store(
            out,
            MscDictionary {
                dictionary,
                solver: meta.solver,
            },
        )
    })
}

/// # Safety
/// `dict` must be a live handle, `stem` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn msc_dictionary_save(
    dict: *const MscDictionary,
    stem: *const c_char,
) -> MscStatus {
    guard(|| {
        let d = non_null(dict, "dict")?;
        let stem = str_arg(stem, "stem")?;
        let meta = DictionaryMeta::for_dictionary(&d.dictionary, d.solver, None);
        Ok(save_dictionary(&d.dictionary, &meta, Path::new(stem))?)
    })
}

/// Releases a handle. Null is a no-op.
///
/// # Safety
/// `dict` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn msc_dictionary_free(dict: *mut MscDictionary) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}

/// Atom dimension, or 0 for a null handle.
///
/// # Safety
/// `dict` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn msc_dictionary_atom_dim(dict: *const MscDictionary) -> usize {
    dict.as_ref().map_or(0, |d| d.dictionary.atom_dim())
}

/// Number of atoms, or 0 for a null handle.
///
/// # Safety
/// `dict` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn msc_dictionary_num_atoms(dict: *const MscDictionary) -> usize {
    dict.as_ref().map_or(0, |d| d.dictionary.num_atoms())
}

/// Copies the atoms, column-major, into `out` (`atom_dim * num_atoms`).
///
/// # Safety
/// `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn msc_dictionary_atoms(
    dict: *const MscDictionary,
    out: *mut f64,
    out_len: usize,
) -> MscStatus {
    guard(|| {
        let d = non_null(dict, "dict")?;
        write_out(d.dictionary.atoms(), out, out_len)
    })
}

fn encode_into(
    d: &MscDictionary,
    xs: &Matrix,
    solver: &SolverConfig,
    out: *mut f64,
    out_len: usize,
) -> Result<(), Fail> {
    let codes = batch_encode(xs, &d.dictionary, solver)?;
    unsafe { write_codes(&codes, out, out_len) }
}

/// LASSO codes of each column of `x` (`rows x cols`), written to `out` as a
/// `num_atoms x cols` column-major matrix.
///
/// # Safety
/// `x` must point to `rows * cols` doubles, `out` to `out_len` writable ones.
#[no_mangle]
pub unsafe extern "C" fn msc_encode_l1(
    dict: *const MscDictionary,
    x: *const f64,
    rows: usize,
    cols: usize,
    lambda: f64,
    out: *mut f64,
    out_len: usize,
) -> MscStatus {
    guard(|| {
        let d = non_null(dict, "dict")?;
        let xs = input_matrix(x, rows, cols, "x")?;
        encode_into(d, &xs, &SolverConfig::l1(lambda), out, out_len)
    })
}

/// OMP codes with at most `sparsity` non-zeros per column. Layout as for
/// [`msc_encode_l1`].
///
/// # Safety
/// As for [`msc_encode_l1`].
#[no_mangle]
pub unsafe extern "C" fn msc_encode_l0(
    dict: *const MscDictionary,
    x: *const f64,
    rows: usize,
    cols: usize,
    sparsity: usize,
    out: *mut f64,
    out_len: usize,
) -> MscStatus {
    guard(|| {
        let d = non_null(dict, "dict")?;
        let xs = input_matrix(x, rows, cols, "x")?;
        encode_into(d, &xs, &SolverConfig::l0(sparsity), out, out_len)
    })
}

/// Codes with the solver the dictionary was trained or saved with.
///
/// # Safety
/// As for [`msc_encode_l1`].
#[no_mangle]
pub unsafe extern "C" fn msc_encode(
    dict: *const MscDictionary,
    x: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
    out_len: usize,
) -> MscStatus {
    guard(|| {
        let d = non_null(dict, "dict")?;
        let solver = d
            .solver
            .ok_or_else(|| arg("dictionary has no stored solver; use msc_encode_l1 or msc_encode_l0"))?;
        let xs = input_matrix(x, rows, cols, "x")?;
        encode_into(d, &xs, &solver, out, out_len)
    })
}

/// Trains a joint ℓ1 dictionary on `num_modalities` paired datasets.
///
/// Modality `m` is named `names[m]` and has `dims[m] x cols` values at
/// `data[m]`. λ′ is `lambda_joint`; λ″ is derived from it.
///
/// # Safety
/// `names`, `data` and `dims` must each hold `num_modalities` valid entries.
#[no_mangle]
pub unsafe extern "C" fn msc_joint_train(
    names: *const *const c_char,
    data: *const *const f64,
    dims: *const usize,
    num_modalities: usize,
    cols: usize,
    num_atoms: usize,
    lambda_joint: f64,
    epochs: usize,
    seed: u64,
    out: *mut *mut MscJointModel,
) -> MscStatus {
    guard(|| {
        if num_modalities == 0 {
            return Err(arg("no modalities"));
        }
        if names.is_null() || data.is_null() || dims.is_null() {
            return Err(Fail::Null("names/data/dims"));
        }
        let names = std::slice::from_raw_parts(names, num_modalities);
        let data = std::slice::from_raw_parts(data, num_modalities);
        let dims = std::slice::from_raw_parts(dims, num_modalities);
        let mut mats = Vec::with_capacity(num_modalities);
        let mut owned_names = Vec::with_capacity(num_modalities);
        for m in 0..num_modalities {
            owned_names.push(str_arg(names[m], "names[m]")?);
            mats.push(input_matrix(data[m], dims[m], cols, "data[m]")?);
        }
        let pairs: Vec<(&str, &Matrix)> = owned_names.iter().copied().zip(&mats).collect();
        let cfg = TrainConfig::online(num_atoms, lambda_joint)
            .with_epochs(epochs)
            .with_seed(seed);
        let model = train_joint(&pairs, &cfg, None)?.model;
        store(out, MscJointModel { model })
    })
}

/// # Safety
/// `stem` must be a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn msc_joint_load(
    stem: *const c_char,
    out: *mut *mut MscJointModel,
) -> MscStatus {
    guard(|| {
        let stem = str_arg(stem, "stem")?;
        let (model, _) = load_joint(Path::new(stem))?;
        store(out, MscJointModel { model })
    })
}

/// # Safety
/// `model` must be a live handle, `stem` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn msc_joint_save(
    model: *const MscJointModel,
    stem: *const c_char,
) -> MscStatus {
    guard(|| {
        let m = non_null(model, "model")?;
        let stem = str_arg(stem, "stem")?;
        Ok(save_joint(&m.model, Path::new(stem), None)?)
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn msc_joint_free(model: *mut MscJointModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn msc_joint_num_atoms(model: *const MscJointModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.num_atoms())
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn msc_joint_num_modalities(model: *const MscJointModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.specs().len())
}

/// Dimension of modality `index` (in training order), or 0 when out of range.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn msc_joint_modality_dim(model: *const MscJointModel, index: usize) -> usize {
    model
        .as_ref()
        .and_then(|m| m.model.specs().get(index))
        .map_or(0, |s| s.dim)
}

/// Joint codes of paired examples. `data[m]` holds `dim_m x cols` values of
/// modality `m` in training order; `out` receives `num_atoms x cols`.
///
/// # Safety
/// `data` must hold one valid pointer per modality of the model.
#[no_mangle]
pub unsafe extern "C" fn msc_joint_encode(
    model: *const MscJointModel,
    data: *const *const f64,
    cols: usize,
    out: *mut f64,
    out_len: usize,
) -> MscStatus {
    guard(|| {
        let m = &non_null(model, "model")?.model;
        if data.is_null() {
            return Err(Fail::Null("data"));
        }
        let ptrs = std::slice::from_raw_parts(data, m.specs().len());
        let mats = m
            .specs()
            .iter()
            .zip(ptrs)
            .map(|(s, &p)| input_matrix(p, s.dim, cols, "data[m]"))
            .collect::<Result<Vec<_>, _>>()?;
        let refs: Vec<&Matrix> = mats.iter().collect();
        write_codes(&m.joint_encode_batch(&refs)?, out, out_len)
    })
}

/// Cross-modal codes of single-modality examples, using λ″.
///
/// # Safety
/// `modality` must be a NUL-terminated string, `x` must point to
/// `rows * cols` doubles.
#[no_mangle]
pub unsafe extern "C" fn msc_joint_cross_encode(
    model: *const MscJointModel,
    modality: *const c_char,
    x: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
    out_len: usize,
) -> MscStatus {
    guard(|| {
        let m = &non_null(model, "model")?.model;
        let name = str_arg(modality, "modality")?;
        let xs = input_matrix(x, rows, cols, "x")?;
        write_codes(&m.cross_encode_batch(&xs, name)?, out, out_len)
    })
}

/// Estimates modality `to` from examples of modality `from`; `out` receives
/// `dim_to x cols`.
///
/// # Safety
/// As for [`msc_joint_cross_encode`], with `to` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn msc_joint_cross_reconstruct(
    model: *const MscJointModel,
    from: *const c_char,
    to: *const c_char,
    x: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
    out_len: usize,
) -> MscStatus {
    guard(|| {
        let m = &non_null(model, "model")?.model;
        let from = str_arg(from, "from")?;
        let to = str_arg(to, "to")?;
        let xs = input_matrix(x, rows, cols, "x")?;
        write_out(&m.cross_reconstruct_batch(&xs, from, to)?, out, out_len)
    })
}
