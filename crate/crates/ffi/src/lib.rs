//! C ABI over `pnn-core`.
//!
//! Every function returns a [`PnnStatus`]; on failure a description is available from
//! [`pnn_last_error`] on the same thread. Models and datasets are opaque heap handles owned by
//! the caller and released with [`pnn_model_free`] / [`pnn_dataset_free`]. Panics never cross
//! the boundary; they are reported as `PNN_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use pnn_core::activation::ActivationKind;
use pnn_core::arch::parse_arch;
use pnn_core::checkpoint::{load_checkpoint, save_checkpoint};
use pnn_core::data::{load_mnist, Dataset, Example};
use pnn_core::metrics::{categorize, epoch_metrics};
use pnn_core::network::{classify, connect, BiasMode, FnnModel, PnnModel};
use pnn_core::rng::Rng;
use pnn_core::train::{run, Method, TrainConfig, INIT_STREAM};
use pnn_core::PnnError;

pub const PNN_ACTIVATION_SIGMOID: u32 = 0;
pub const PNN_ACTIVATION_RELU: u32 = 1;
pub const PNN_ACTIVATION_TANH: u32 = 2;

pub const PNN_MASK_OWN: u32 = 0;
pub const PNN_MASK_SHARED: u32 = 1;

pub const PNN_METHOD_A: u32 = 0;
pub const PNN_METHOD_B: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    InvalidArchitecture = 4,
    FormatError = 5,
    IoError = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque PNN model.
pub struct PnnModelHandle {
    model: PnnModel,
}

/// Opaque training/evaluation data.
pub struct PnnDatasetHandle {
    data: Dataset,
}

/// Training settings; fill with [`pnn_train_config_default`] and override fields.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PnnTrainConfig {
    /// `PNN_METHOD_A` or `PNN_METHOD_B`.
    pub method: u32,
    pub epochs_separate: usize,
    pub epochs_joint: usize,
    pub eta: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Hidden-layer `PNN_ACTIVATION_*`.
    pub activation: u32,
    /// Output-layer `PNN_ACTIVATION_*`.
    pub head_activation: u32,
}

/// Counts of the PNN's correct results by type.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PnnTypeCounts {
    pub total_correct: usize,
    pub type_i: usize,
    pub type_ii: usize,
    pub type_iii: usize,
    pub type_iv: usize,
}

struct Failure {
    status: PnnStatus,
    message: String,
}

impl Failure {
    fn new(status: PnnStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl From<PnnError> for Failure {
    fn from(e: PnnError) -> Self {
        let status = match e {
            PnnError::DimensionMismatch { .. } => PnnStatus::DimensionMismatch,
            PnnError::InvalidArgument(_) => PnnStatus::InvalidArgument,
            PnnError::InvalidArchitecture(_) | PnnError::ArchSyntax { .. } => PnnStatus::InvalidArchitecture,
            PnnError::IdxFormat { .. } | PnnError::CheckpointFormat(_) | PnnError::ReportFormat(_) => {
                PnnStatus::FormatError
            }
            PnnError::Io { .. } => PnnStatus::IoError,
        };
        Failure::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, converting errors and panics into a status and the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PnnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PnnStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            PnnStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::new(PnnStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(PnnStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, needed: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len < needed {
        return Err(Failure::new(
            PnnStatus::BufferTooSmall,
            format!("{what} holds {len} values, {needed} needed"),
        ));
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, needed))
}

unsafe fn write_out<T>(p: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(value);
    Ok(())
}

fn activation(code: u32, what: &str) -> Result<ActivationKind, Failure> {
    u8::try_from(code)
        .ok()
        .and_then(ActivationKind::from_code)
        .ok_or_else(|| Failure::new(PnnStatus::InvalidArgument, format!("unknown {what} code {code}")))
}

fn mask_mode(code: u32) -> Result<BiasMode, Failure> {
    match code {
        PNN_MASK_OWN => Ok(BiasMode::Own),
        PNN_MASK_SHARED => Ok(BiasMode::Shared),
        other => Err(Failure::new(PnnStatus::InvalidArgument, format!("unknown mask mode {other}"))),
    }
}

fn into_handle(model: PnnModel) -> *mut PnnModelHandle {
    Box::into_raw(Box::new(PnnModelHandle { model }))
}

/// Description of the last failure on this thread, or NULL if none. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn pnn_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pnn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a PNN from freshly initialized sub-networks, e.g. `"784,30,20,10+784,32,10"`.
///
/// # Safety
/// `arch` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pnn_model_init(
    arch: *const c_char,
    activation_code: u32,
    seed: u64,
    out: *mut *mut PnnModelHandle,
) -> PnnStatus {
    guard(|| {
        let archs = parse_arch(str_arg(arch, "arch")?)?;
        let act = activation(activation_code, "activation")?;
        let rng = Rng::new(seed);
        let fnns = archs
            .iter()
            .enumerate()
            .map(|(i, a)| FnnModel::init(a, act, &mut rng.derive(INIT_STREAM + i as u64)))
            .collect::<Result<Vec<_>, _>>()?;
        write_out(out, into_handle(connect(&fnns)?), "out")
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pnn_model_load(path: *const c_char, out: *mut *mut PnnModelHandle) -> PnnStatus {
    guard(|| {
        let model = load_checkpoint(str_arg(path, "path")?)?;
        write_out(out, into_handle(model), "out")
    })
}

/// # Safety
/// `model` must come from this library and `path` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pnn_model_save(model: *const PnnModelHandle, path: *const c_char) -> PnnStatus {
    guard(|| {
        let m = ref_arg(model, "model")?;
        save_checkpoint(&m.model, str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Releases a model; NULL is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pnn_model_free(model: *mut PnnModelHandle) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// All pointers must be valid; any output pointer may be NULL to skip it.
#[no_mangle]
pub unsafe extern "C" fn pnn_model_shape(
    model: *const PnnModelHandle,
    subnet_count: *mut usize,
    input_width: *mut usize,
    output_width: *mut usize,
) -> PnnStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.model;
        if !subnet_count.is_null() {
            subnet_count.write(m.subnet_count());
        }
        if !input_width.is_null() {
            input_width.write(m.input_width());
        }
        if !output_width.is_null() {
            output_width.write(m.output_width());
        }
        Ok(())
    })
}

/// Output activations of the whole PNN.
///
/// # Safety
/// `input` must hold `input_len` values and `output` room for `output_len`.
#[no_mangle]
pub unsafe extern "C" fn pnn_model_forward(
    model: *const PnnModelHandle,
    input: *const f64,
    input_len: usize,
    output: *mut f64,
    output_len: usize,
) -> PnnStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.model;
        let x = slice_arg(input, input_len, "input")?;
        let out = out_slice(output, output_len, m.output_width(), "output")?;
        out.copy_from_slice(&m.forward(x)?.activation);
        Ok(())
    })
}

/// Output activations of sub-network `subnet` alone (`PNN_MASK_OWN` or `PNN_MASK_SHARED` bias).
///
/// # Safety
/// As [`pnn_model_forward`].
#[no_mangle]
pub unsafe extern "C" fn pnn_model_forward_masked(
    model: *const PnnModelHandle,
    input: *const f64,
    input_len: usize,
    subnet: usize,
    mode: u32,
    output: *mut f64,
    output_len: usize,
) -> PnnStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.model;
        let x = slice_arg(input, input_len, "input")?;
        let mode = mask_mode(mode)?;
        let out = out_slice(output, output_len, m.output_width(), "output")?;
        out.copy_from_slice(&m.forward_masked(x, subnet, mode)?.1);
        Ok(())
    })
}

/// Predicted class of the whole PNN.
///
/// # Safety
/// `input` must hold `input_len` values and `class_out` be valid.
#[no_mangle]
pub unsafe extern "C" fn pnn_model_classify(
    model: *const PnnModelHandle,
    input: *const f64,
    input_len: usize,
    class_out: *mut usize,
) -> PnnStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.model;
        let x = slice_arg(input, input_len, "input")?;
        write_out(class_out, classify(&m.forward(x)?.activation), "class_out")
    })
}

/// Loads MNIST from `dir`; `train_cap == 0` keeps the whole training split.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pnn_dataset_load_mnist(
    dir: *const c_char,
    train_cap: usize,
    out: *mut *mut PnnDatasetHandle,
) -> PnnStatus {
    guard(|| {
        let cap = (train_cap > 0).then_some(train_cap);
        let data = load_mnist(str_arg(dir, "dir")?, None, cap)?;
        write_out(out, Box::into_raw(Box::new(PnnDatasetHandle { data })), "out")
    })
}

/// Builds a dataset from row-major pixel buffers (`n × width`, values in [0,1]) and labels (0–9).
///
/// # Safety
/// Buffers must hold the stated number of values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pnn_dataset_from_buffers(
    width: usize,
    train_pixels: *const f64,
    train_labels: *const u8,
    train_count: usize,
    eval_pixels: *const f64,
    eval_labels: *const u8,
    eval_count: usize,
    out: *mut *mut PnnDatasetHandle,
) -> PnnStatus {
    guard(|| {
        if width == 0 {
            return Err(Failure::new(PnnStatus::InvalidArgument, "width must be > 0"));
        }
        let examples = |pixels: *const f64, labels: *const u8, n: usize, what: &str| -> Result<Vec<Example>, Failure> {
            let len = n
                .checked_mul(width)
                .ok_or_else(|| Failure::new(PnnStatus::InvalidArgument, "buffer size overflow"))?;
            let px = slice_arg(pixels, len, what)?;
            let ls = slice_arg(labels, n, what)?;
            px.chunks_exact(width)
                .zip(ls)
                .map(|(p, &l)| Example::new(p.to_vec(), l).map_err(Failure::from))
                .collect()
        };
        let data = Dataset {
            train: examples(train_pixels, train_labels, train_count, "train buffers")?,
            eval: examples(eval_pixels, eval_labels, eval_count, "eval buffers")?,
        };
        write_out(out, Box::into_raw(Box::new(PnnDatasetHandle { data })), "out")
    })
}

/// # Safety
/// `data` must be valid; output pointers may be NULL to skip them.
#[no_mangle]
pub unsafe extern "C" fn pnn_dataset_sizes(
    data: *const PnnDatasetHandle,
    train_count: *mut usize,
    eval_count: *mut usize,
) -> PnnStatus {
    guard(|| {
        let d = &ref_arg(data, "data")?.data;
        if !train_count.is_null() {
            train_count.write(d.train.len());
        }
        if !eval_count.is_null() {
            eval_count.write(d.eval.len());
        }
        Ok(())
    })
}

/// Releases a dataset; NULL is ignored.
///
/// # Safety
/// `data` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pnn_dataset_free(data: *mut PnnDatasetHandle) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Accuracy of the whole PNN and of every sub-network (own-bias `alpha`, shared-bias
/// `alpha_prime`) on the evaluation split. The arrays need `capacity >= subnet count`.
///
/// # Safety
/// All pointers must be valid for the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn pnn_evaluate(
    model: *const PnnModelHandle,
    data: *const PnnDatasetHandle,
    alpha_para: *mut f64,
    alpha: *mut f64,
    alpha_prime: *mut f64,
    capacity: usize,
) -> PnnStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.model;
        let d = &ref_arg(data, "data")?.data;
        let k = m.subnet_count();
        let a = out_slice(alpha, capacity, k, "alpha")?;
        let ap = out_slice(alpha_prime, capacity, k, "alpha_prime")?;
        if alpha_para.is_null() {
            return Err(null("alpha_para"));
        }
        let metrics = epoch_metrics(m, &d.eval, 0)?;
        alpha_para.write(metrics.alpha_para);
        a.copy_from_slice(&metrics.alpha);
        ap.copy_from_slice(&metrics.alpha_prime);
        Ok(())
    })
}

/// Type I–IV counts of the PNN's correct evaluation results (2 sub-networks only).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pnn_taxonomy(
    model: *const PnnModelHandle,
    data: *const PnnDatasetHandle,
    mode: u32,
    counts: *mut PnnTypeCounts,
) -> PnnStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.model;
        let d = &ref_arg(data, "data")?.data;
        let t = categorize(m, &d.eval, mask_mode(mode)?)?;
        let c = t.type_counts;
        write_out(
            counts,
            PnnTypeCounts {
                total_correct: t.total_correct,
                type_i: c.i,
                type_ii: c.ii,
                type_iii: c.iii,
                type_iv: c.iv,
            },
            "counts",
        )
    })
}

/// Default settings: method A, 60 + 40 epochs, eta 0.1, lambda 5, batch 10, seed 1, sigmoid.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pnn_train_config_default(out: *mut PnnTrainConfig) -> PnnStatus {
    guard(|| {
        let d = TrainConfig::default();
        write_out(
            out,
            PnnTrainConfig {
                method: PNN_METHOD_A,
                epochs_separate: d.epochs_separate,
                epochs_joint: d.epochs_joint,
                eta: d.eta,
                lambda: d.lambda,
                batch_size: d.batch_size,
                seed: d.seed,
                activation: u32::from(d.activation.code()),
                head_activation: u32::from(d.head.code()),
            },
            "out",
        )
    })
}

/// Trains a PNN and returns the model from the epoch with the best whole-PNN accuracy.
///
/// # Safety
/// `arch` must be a NUL-terminated string; other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pnn_train(
    arch: *const c_char,
    config: *const PnnTrainConfig,
    data: *const PnnDatasetHandle,
    best_alpha_para: *mut f64,
    out: *mut *mut PnnModelHandle,
) -> PnnStatus {
    guard(|| {
        let archs = parse_arch(str_arg(arch, "arch")?)?;
        let c = ref_arg(config, "config")?;
        let d = &ref_arg(data, "data")?.data;
        if out.is_null() {
            return Err(null("out"));
        }
        let method = match c.method {
            PNN_METHOD_A => Method::A,
            PNN_METHOD_B => Method::B,
            other => return Err(Failure::new(PnnStatus::InvalidArgument, format!("unknown method {other}"))),
        };
        let cfg = TrainConfig {
            method,
            epochs_separate: c.epochs_separate,
            epochs_joint: c.epochs_joint,
            eta: c.eta,
            lambda: c.lambda,
            batch_size: c.batch_size,
            seed: c.seed,
            activation: activation(c.activation, "activation")?,
            head: activation(c.head_activation, "head activation")?,
        };
        let result = run(&archs, &cfg, &Rng::new(cfg.seed), d, &mut |_| Ok(()))?;
        if !best_alpha_para.is_null() {
            best_alpha_para.write(result.best_metrics().alpha_para);
        }
        out.write(into_handle(result.best_model));
        Ok(())
    })
}
