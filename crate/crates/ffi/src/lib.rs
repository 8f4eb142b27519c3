//! C ABI over the `entropy-gap` library.
//!
//! Objects cross the boundary as opaque handles created by `egap_*_load`,
//! `egap_*_from_bytes`, `egap_encode` or `egap_decode` and released with
//! the matching `egap_*_free`. Every fallible call returns an
//! [`EgapStatus`]; on failure [`egap_last_error`] describes the cause
//! until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use entropy_gap::adapt::{Method, MethodConfig};
use entropy_gap::codec::{self, EncodeOptions, HyperpriorInput, Instance};
use entropy_gap::container::ScaleDescriptor;
use entropy_gap::entropy::{self, PmfTable};
use entropy_gap::latent::{self, LatentTensor, SideInfo};
use entropy_gap::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgapStatus {
    Ok = 0,
    NullArgument = 1,
    Io = 2,
    Format = 3,
    InvalidArgument = 4,
    Mismatch = 5,
    Corrupt = 6,
    Panic = 7,
}

/// A latent tensor with optional side information.
pub struct EgapLatents {
    tensor: LatentTensor,
    side_info: Option<SideInfo>,
}

/// Learned factorized tables.
pub struct EgapTables {
    tables: Vec<PmfTable>,
}

/// An owned byte buffer.
pub struct EgapBuffer {
    bytes: Vec<u8>,
}

/// Method settings for one entropy model. `method`: 0 none, 1 gmm,
/// 2 zero-mean Gaussian, 3 center-bin.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EgapMethodConfig {
    pub method: u8,
    pub components: u8,
    pub bits: u8,
    pub targets: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgapEncodeOptions {
    pub factorized: EgapMethodConfig,
    pub hyperprior: EgapMethodConfig,
    pub precision: u32,
    /// Hyperprior scale table: count, smallest and largest scale.
    pub scale_count: u16,
    pub scale_min: f64,
    pub scale_max: f64,
}

/// Per-model and total percentages. Absent models report NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgapReport {
    pub factorized_ratio: f64,
    pub factorized_gap: f64,
    pub factorized_gain: f64,
    pub hyperprior_ratio: f64,
    pub hyperprior_gap: f64,
    pub hyperprior_gain: f64,
    pub total_gap: f64,
    pub total_gain: f64,
    pub total_bits: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EgapStatus {
    match e {
        Error::Io(_) => EgapStatus::Io,
        Error::BadMagic { .. }
        | Error::UnsupportedVersion { .. }
        | Error::Truncated { .. }
        | Error::Malformed { .. }
        | Error::TrailingBytes { .. } => EgapStatus::Format,
        Error::Mismatch(_) | Error::SideInfoLength { .. } => EgapStatus::Mismatch,
        Error::Corrupt(_) => EgapStatus::Corrupt,
        _ => EgapStatus::InvalidArgument,
    }
}

struct Failure(EgapStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(EgapStatus::NullArgument, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EgapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EgapStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            EgapStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(path: *const c_char) -> Result<&'a str, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Failure(EgapStatus::InvalidArgument, "path is not UTF-8".into()))
}

unsafe fn bytes_arg<'a>(data: *const u8, len: usize) -> Result<&'a [u8], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null("data"));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn method_config(c: &EgapMethodConfig) -> Result<MethodConfig, Failure> {
    let method = Method::from_id(c.method)
        .ok_or_else(|| Failure(EgapStatus::InvalidArgument, format!("unknown method id {}", c.method)))?;
    Ok(MethodConfig::new(method, c.components, c.targets, c.bits)?)
}

fn c_config(c: &MethodConfig) -> EgapMethodConfig {
    EgapMethodConfig {
        method: c.method.id(),
        components: c.components,
        bits: c.bits,
        targets: c.targets,
    }
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next failing call.
#[no_mangle]
pub extern "C" fn egap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Defaults for factorized-only (`hyperprior == false`) or hyperprior
/// instances.
#[no_mangle]
pub extern "C" fn egap_default_options(hyperprior: bool) -> EgapEncodeOptions {
    let o = EncodeOptions::defaults(hyperprior);
    let d = ScaleDescriptor::default();
    EgapEncodeOptions {
        factorized: c_config(&o.factorized),
        hyperprior: c_config(&o.hyperprior),
        precision: o.precision,
        scale_count: d.count,
        scale_min: d.min,
        scale_max: d.max,
    }
}

/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn egap_latents_load(path: *const c_char, out: *mut *mut EgapLatents) -> EgapStatus {
    guard(|| {
        let (tensor, side_info) = latent::load_latents(path_arg(path)?)?;
        store(out, EgapLatents { tensor, side_info })
    })
}

/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn egap_latents_from_bytes(data: *const u8, len: usize, out: *mut *mut EgapLatents) -> EgapStatus {
    guard(|| {
        let (tensor, side_info) = latent::latents_from_bytes(bytes_arg(data, len)?)?;
        store(out, EgapLatents { tensor, side_info })
    })
}

/// Writes the tensor (and its side information, if any) as LATB.
///
/// # Safety
/// `latents` must be a live handle and `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn egap_latents_save(latents: *const EgapLatents, path: *const c_char) -> EgapStatus {
    guard(|| {
        let l = ref_arg(latents, "latents")?;
        latent::save_latents(&l.tensor, l.side_info.as_ref(), path_arg(path)?)?;
        Ok(())
    })
}

/// Number of symbols; 0 for a null handle.
///
/// # Safety
/// `latents` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn egap_latents_len(latents: *const EgapLatents) -> usize {
    latents.as_ref().map_or(0, |l| l.tensor.len())
}

/// Symbols in height, width, channel order; null for a null handle.
///
/// # Safety
/// `latents` must be null or a live handle. The pointer lives as long as
/// the handle.
#[no_mangle]
pub unsafe extern "C" fn egap_latents_symbols(latents: *const EgapLatents) -> *const i32 {
    latents.as_ref().map_or(ptr::null(), |l| l.tensor.symbols().as_ptr())
}

/// # Safety
/// `latents` must be a live handle; the output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn egap_latents_shape(
    latents: *const EgapLatents,
    height: *mut u32,
    width: *mut u32,
    channels: *mut u32,
) -> EgapStatus {
    guard(|| {
        let s = ref_arg(latents, "latents")?.tensor.shape();
        if height.is_null() || width.is_null() || channels.is_null() {
            return Err(null("output pointer"));
        }
        *height = s.height;
        *width = s.width;
        *channels = s.channels;
        Ok(())
    })
}

/// # Safety
/// `latents` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn egap_latents_has_side_info(latents: *const EgapLatents) -> bool {
    latents.as_ref().is_some_and(|l| l.side_info.is_some())
}

/// # Safety
/// `latents` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn egap_latents_free(latents: *mut EgapLatents) {
    if !latents.is_null() {
        drop(Box::from_raw(latents));
    }
}

/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn egap_tables_load(path: *const c_char, out: *mut *mut EgapTables) -> EgapStatus {
    guard(|| {
        let tables = entropy::load_tables(path_arg(path)?)?;
        store(out, EgapTables { tables })
    })
}

/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn egap_tables_from_bytes(data: *const u8, len: usize, out: *mut *mut EgapTables) -> EgapStatus {
    guard(|| {
        let tables = entropy::tables_from_bytes(bytes_arg(data, len)?)?;
        store(out, EgapTables { tables })
    })
}

/// # Safety
/// `tables` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn egap_tables_count(tables: *const EgapTables) -> usize {
    tables.as_ref().map_or(0, |t| t.tables.len())
}

/// # Safety
/// `tables` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn egap_tables_free(tables: *mut EgapTables) {
    if !tables.is_null() {
        drop(Box::from_raw(tables));
    }
}

struct Owned {
    options: EncodeOptions,
    scales: ScaleDescriptor,
}

fn owned_options(o: &EgapEncodeOptions) -> Result<Owned, Failure> {
    let scales = ScaleDescriptor {
        count: o.scale_count,
        min: o.scale_min,
        max: o.scale_max,
    };
    scales.table()?;
    Ok(Owned {
        options: EncodeOptions {
            factorized: method_config(&o.factorized)?,
            hyperprior: method_config(&o.hyperprior)?,
            precision: o.precision,
        },
        scales,
    })
}

unsafe fn instance<'a>(
    main: *const EgapLatents,
    side: *const EgapLatents,
    tables: *const EgapTables,
    scales: ScaleDescriptor,
) -> Result<Instance<'a>, Failure> {
    let main = ref_arg(main, "main")?;
    let tables = ref_arg(tables, "tables")?;
    let hyperprior = match (side.as_ref(), &main.side_info) {
        (Some(s), Some(info)) => Some(HyperpriorInput {
            side: &s.tensor,
            side_info: info,
            scales,
        }),
        (None, None) => None,
        (None, Some(_)) => return Err(Failure(EgapStatus::InvalidArgument, "main carries side information but no side latent was given".into())),
        (Some(_), None) => return Err(Failure(EgapStatus::InvalidArgument, "side latent given but main has no side information".into())),
    };
    Ok(Instance {
        main: &main.tensor,
        tables: &tables.tables,
        hyperprior,
    })
}

/// Encodes an instance into an EGAP container. `side` is null for
/// factorized-only instances; otherwise `main` must carry side
/// information. `options` may be null for the defaults.
///
/// # Safety
/// Handles must be live or null where allowed; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn egap_encode(
    main: *const EgapLatents,
    side: *const EgapLatents,
    tables: *const EgapTables,
    options: *const EgapEncodeOptions,
    out: *mut *mut EgapBuffer,
) -> EgapStatus {
    guard(|| {
        let opts = match options.as_ref() {
            Some(o) => *o,
            None => egap_default_options(!side.is_null()),
        };
        let owned = owned_options(&opts)?;
        let inst = instance(main, side, tables, owned.scales)?;
        let encoded = codec::encode_instance(&inst, &owned.options)?;
        store(out, EgapBuffer { bytes: encoded.bytes })
    })
}

/// Ideal-bit gap and gain report without coding.
///
/// # Safety
/// As for [`egap_encode`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn egap_report(
    main: *const EgapLatents,
    side: *const EgapLatents,
    tables: *const EgapTables,
    options: *const EgapEncodeOptions,
    out: *mut EgapReport,
) -> EgapStatus {
    guard(|| {
        let opts = match options.as_ref() {
            Some(o) => *o,
            None => egap_default_options(!side.is_null()),
        };
        let owned = owned_options(&opts)?;
        let inst = instance(main, side, tables, owned.scales)?;
        let r = codec::analyze(&inst, &owned.options)?.report;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let cells = |row: Option<entropy_gap::gap::ModelRow>| match row {
            Some(r) => (r.ratio_percent, r.gap_percent, r.gain_percent),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        let (fr, fg, fn_) = cells(r.factorized);
        let (hr, hg, hn) = cells(r.hyperprior);
        *out = EgapReport {
            factorized_ratio: fr,
            factorized_gap: fg,
            factorized_gain: fn_,
            hyperprior_ratio: hr,
            hyperprior_gap: hg,
            hyperprior_gain: hn,
            total_gap: r.total_gap_percent,
            total_gain: r.total_gain_percent,
            total_bits: r.total_bits,
        };
        Ok(())
    })
}

/// Decodes a container. `side_info` supplies the side information of
/// hyperprior containers and may be null otherwise; `out_side` may be
/// null when the side latent is not wanted.
///
/// # Safety
/// `data` must point to `len` readable bytes; handles must be live or
/// null where allowed; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn egap_decode(
    data: *const u8,
    len: usize,
    tables: *const EgapTables,
    side_info: *const EgapLatents,
    out_main: *mut *mut EgapLatents,
    out_side: *mut *mut EgapLatents,
) -> EgapStatus {
    guard(|| {
        let bytes = bytes_arg(data, len)?;
        let tables = ref_arg(tables, "tables")?;
        let info = side_info.as_ref().and_then(|l| l.side_info.as_ref());
        if out_main.is_null() {
            return Err(null("output pointer"));
        }
        let decoded = codec::decode_instance(bytes, &tables.tables, info)?;
        store(
            out_main,
            EgapLatents {
                tensor: decoded.main,
                side_info: info.cloned(),
            },
        )?;
        if !out_side.is_null() {
            *out_side = match decoded.side {
                Some(tensor) => Box::into_raw(Box::new(EgapLatents {
                    tensor,
                    side_info: None,
                })),
                None => ptr::null_mut(),
            };
        }
        Ok(())
    })
}

/// # Safety
/// `buffer` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn egap_buffer_data(buffer: *const EgapBuffer) -> *const u8 {
    buffer.as_ref().map_or(ptr::null(), |b| b.bytes.as_ptr())
}

/// # Safety
/// `buffer` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn egap_buffer_len(buffer: *const EgapBuffer) -> usize {
    buffer.as_ref().map_or(0, |b| b.bytes.len())
}

/// # Safety
/// `buffer` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn egap_buffer_free(buffer: *mut EgapBuffer) {
    if !buffer.is_null() {
        drop(Box::from_raw(buffer));
    }
}
