//! C ABI over the `sedfuse` core library.
//!
//! Objects cross the boundary as opaque handles created by `*_new` / `*_read`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`SedfuseStatus`]; on failure the message is available from
//! [`sedfuse_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sedfuse::decode::{decode_all, PostProcessConfig};
use sedfuse::formats::{parse_events, parse_framegrids, write_events, write_framegrids};
use sedfuse::fusion::{self, ClassF1Table, FusionMode, FusionWeights};
use sedfuse::metrics::{event_f1, psds, CollarConfig, PsdsConfig};
use sedfuse::{ClassVocabulary, Error, EventList, FrameGrid};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SedfuseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidString = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    Shape = 6,
    Config = 7,
    Internal = 8,
}

/// Class vocabulary handle.
pub struct SedfuseVocab(ClassVocabulary);

/// Ordered set of per-clip frame grids.
pub struct SedfuseGrids(Vec<FrameGrid>);

/// Strong labels or detections.
pub struct SedfuseEvents(EventList);

/// Class-wise fusion weights (models x classes).
pub struct SedfuseWeights(FusionWeights);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SedfuseStatus {
    match err {
        Error::Io { .. } => SedfuseStatus::Io,
        Error::Parse { .. } => SedfuseStatus::Parse,
        Error::Vocabulary { .. } | Error::Validation { .. } | Error::Input(_) => SedfuseStatus::Validation,
        Error::Shape(_) => SedfuseStatus::Shape,
        Error::Config(_) => SedfuseStatus::Config,
    }
}

enum Fail {
    Null(&'static str),
    Str(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SedfuseStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SedfuseStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("{what} is null"));
            SedfuseStatus::NullPointer
        }
        Ok(Err(Fail::Str(what))) => {
            set_error(format!("{what} is not valid UTF-8"));
            SedfuseStatus::InvalidString
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".to_string());
            SedfuseStatus::Internal
        }
    }
}

unsafe fn href<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Str(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn grid_sets(sets: *const *const SedfuseGrids, n: usize) -> Result<Vec<Vec<FrameGrid>>, Fail> {
    if sets.is_null() {
        return Err(Fail::Null("sets"));
    }
    std::slice::from_raw_parts(sets, n)
        .iter()
        .map(|&p| href(p, "sets[i]").map(|g| g.0.clone()))
        .collect()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sedfuse_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sedfuse_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `names` must point to `n` NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_vocab_new(
    names: *const *const c_char,
    n: usize,
    out: *mut *mut SedfuseVocab,
) -> SedfuseStatus {
    guard(|| {
        if names.is_null() {
            return Err(Fail::Null("names"));
        }
        let list = std::slice::from_raw_parts(names, n)
            .iter()
            .map(|&p| text(p, "names[i]").map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?;
        put(out, SedfuseVocab(ClassVocabulary::new(list)?), "out")
    })
}

/// # Safety
/// `vocab` must be null or a handle from `sedfuse_vocab_new`.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_vocab_free(vocab: *mut SedfuseVocab) {
    if !vocab.is_null() {
        drop(Box::from_raw(vocab));
    }
}

/// # Safety
/// `vocab` must be a live handle (null gives 0).
#[no_mangle]
pub unsafe extern "C" fn sedfuse_vocab_len(vocab: *const SedfuseVocab) -> usize {
    vocab.as_ref().map_or(0, |v| v.0.len())
}

/// Empty grid set, filled with `sedfuse_grids_push`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_grids_new(out: *mut *mut SedfuseGrids) -> SedfuseStatus {
    guard(|| put(out, SedfuseGrids(Vec::new()), "out"))
}

/// Appends one clip; `values` is row-major `n_frames x n_classes`.
///
/// # Safety
/// `values` must hold `n_frames * n_classes` doubles.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_grids_push(
    grids: *mut SedfuseGrids,
    clip_id: *const c_char,
    hop_seconds: f64,
    n_frames: usize,
    n_classes: usize,
    values: *const f64,
) -> SedfuseStatus {
    guard(|| {
        let grids = grids.as_mut().ok_or(Fail::Null("grids"))?;
        let clip = text(clip_id, "clip_id")?;
        let len = n_frames.checked_mul(n_classes).ok_or_else(|| Error::Shape("grid too large".into()))?;
        let data = if len == 0 {
            Vec::new()
        } else if values.is_null() {
            return Err(Fail::Null("values"));
        } else {
            std::slice::from_raw_parts(values, len).to_vec()
        };
        grids.0.push(FrameGrid::new(clip, hop_seconds, n_classes, data)?);
        Ok(())
    })
}

/// Reads a grids.jsonl file, reordering columns to `vocab`.
///
/// # Safety
/// Pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_grids_read(
    path: *const c_char,
    vocab: *const SedfuseVocab,
    out: *mut *mut SedfuseGrids,
) -> SedfuseStatus {
    guard(|| {
        let grids = parse_framegrids(text(path, "path")?, &href(vocab, "vocab")?.0)?;
        put(out, SedfuseGrids(grids), "out")
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_grids_write(
    grids: *const SedfuseGrids,
    vocab: *const SedfuseVocab,
    path: *const c_char,
) -> SedfuseStatus {
    guard(|| {
        write_framegrids(&href(grids, "grids")?.0, &href(vocab, "vocab")?.0, text(path, "path")?)?;
        Ok(())
    })
}

/// Number of clips (null gives 0).
///
/// # Safety
/// `grids` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_grids_len(grids: *const SedfuseGrids) -> usize {
    grids.as_ref().map_or(0, |g| g.0.len())
}

/// Posterior of `class` at `frame` of clip `clip`.
///
/// # Safety
/// `grids` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_grids_get(
    grids: *const SedfuseGrids,
    clip: usize,
    frame: usize,
    class: usize,
    out: *mut f64,
) -> SedfuseStatus {
    guard(|| {
        let g = href(grids, "grids")?
            .0
            .get(clip)
            .ok_or_else(|| Error::Shape(format!("clip index {clip} out of range")))?;
        if frame >= g.n_frames() || class >= g.n_classes() {
            return Err(Error::Shape(format!("cell ({frame}, {class}) out of range")).into());
        }
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = g.get(frame, class);
        Ok(())
    })
}

/// # Safety
/// `grids` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_grids_free(grids: *mut SedfuseGrids) {
    if !grids.is_null() {
        drop(Box::from_raw(grids));
    }
}

/// Reads an events.tsv file.
///
/// # Safety
/// Pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_events_read(
    path: *const c_char,
    vocab: *const SedfuseVocab,
    out: *mut *mut SedfuseEvents,
) -> SedfuseStatus {
    guard(|| {
        let events = parse_events(text(path, "path")?, &href(vocab, "vocab")?.0)?;
        put(out, SedfuseEvents(events), "out")
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_events_write(events: *const SedfuseEvents, path: *const c_char) -> SedfuseStatus {
    guard(|| {
        write_events(&href(events, "events")?.0, text(path, "path")?)?;
        Ok(())
    })
}

/// # Safety
/// `events` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_events_len(events: *const SedfuseEvents) -> usize {
    events.as_ref().map_or(0, |e| e.0.len())
}

/// # Safety
/// `events` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_events_free(events: *mut SedfuseEvents) {
    if !events.is_null() {
        drop(Box::from_raw(events));
    }
}

/// Frame-wise mean of `n` aligned grid sets.
///
/// # Safety
/// `sets` must point to `n` live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_fuse_average(
    sets: *const *const SedfuseGrids,
    n: usize,
    out: *mut *mut SedfuseGrids,
) -> SedfuseStatus {
    guard(|| {
        let fused = fusion::fuse_average_sets(&grid_sets(sets, n)?)?;
        put(out, SedfuseGrids(fused), "out")
    })
}

/// `alpha * sed + (1 - alpha) * fsed`.
///
/// # Safety
/// Pointers must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_fuse_pair(
    sed: *const SedfuseGrids,
    fsed: *const SedfuseGrids,
    alpha: f64,
    out: *mut *mut SedfuseGrids,
) -> SedfuseStatus {
    guard(|| {
        let fused = fusion::combine_pair_sets(&href(sed, "sed")?.0, &href(fsed, "fsed")?.0, alpha)?;
        put(out, SedfuseGrids(fused), "out")
    })
}

/// Softmax weights from an `n_models x n_classes` row-major F1 table.
/// `faithful` non-zero keeps the 1/M prefactor.
///
/// # Safety
/// `f1` must hold `n_models * vocab_len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_classwise_weights(
    f1: *const f64,
    n_models: usize,
    vocab: *const SedfuseVocab,
    beta: f64,
    faithful: i32,
    out: *mut *mut SedfuseWeights,
) -> SedfuseStatus {
    guard(|| {
        let vocab = &href(vocab, "vocab")?.0;
        if f1.is_null() {
            return Err(Fail::Null("f1"));
        }
        let c = vocab.len();
        let data = std::slice::from_raw_parts(f1, n_models * c);
        let table = ClassF1Table::new(
            (1..=n_models).map(|m| format!("model_{m}")).collect(),
            vocab.classes().to_vec(),
            data.chunks(c.max(1)).map(<[f64]>::to_vec).collect(),
        )?;
        let mode = if faithful != 0 { FusionMode::Faithful } else { FusionMode::Normalized };
        put(out, SedfuseWeights(fusion::classwise_weights(&table, beta, mode)?), "out")
    })
}

/// # Safety
/// `weights` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_weights_get(
    weights: *const SedfuseWeights,
    model: usize,
    class: usize,
    out: *mut f64,
) -> SedfuseStatus {
    guard(|| {
        let w = &href(weights, "weights")?.0;
        let v = w
            .weights
            .get(model)
            .and_then(|row| row.get(class))
            .ok_or_else(|| Error::Shape(format!("weight ({model}, {class}) out of range")))?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = *v;
        Ok(())
    })
}

/// # Safety
/// `weights` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_weights_free(weights: *mut SedfuseWeights) {
    if !weights.is_null() {
        drop(Box::from_raw(weights));
    }
}

/// # Safety
/// `sets` must point to `n` live handles; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_fuse_classwise(
    sets: *const *const SedfuseGrids,
    n: usize,
    weights: *const SedfuseWeights,
    out: *mut *mut SedfuseGrids,
) -> SedfuseStatus {
    guard(|| {
        let fused = fusion::fuse_classwise_sets(&grid_sets(sets, n)?, &href(weights, "weights")?.0)?;
        put(out, SedfuseGrids(fused), "out")
    })
}

/// Threshold, median filter and extract events with one setting for all classes.
///
/// # Safety
/// Pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_decode(
    grids: *const SedfuseGrids,
    vocab: *const SedfuseVocab,
    threshold: f64,
    median_window: usize,
    out: *mut *mut SedfuseEvents,
) -> SedfuseStatus {
    guard(|| {
        let vocab = &href(vocab, "vocab")?.0;
        let cfg = PostProcessConfig::uniform(vocab.len(), threshold, median_window)?;
        let events = decode_all(&href(grids, "grids")?.0, &cfg, vocab)?;
        put(out, SedfuseEvents(events), "out")
    })
}

/// Macro collar-based F1 with the default collars.
///
/// # Safety
/// Pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_event_f1(
    reference: *const SedfuseEvents,
    estimated: *const SedfuseEvents,
    vocab: *const SedfuseVocab,
    out: *mut f64,
) -> SedfuseStatus {
    guard(|| {
        let report = event_f1(
            &href(reference, "reference")?.0,
            &href(estimated, "estimated")?.0,
            &href(vocab, "vocab")?.0,
            &CollarConfig::default(),
        )?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = report.macro_f1;
        Ok(())
    })
}

/// PSDS with preset 1 or 2 and default decoding (median window 7).
///
/// # Safety
/// Pointers must be valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sedfuse_psds(
    grids: *const SedfuseGrids,
    reference: *const SedfuseEvents,
    vocab: *const SedfuseVocab,
    preset: i32,
    out: *mut f64,
) -> SedfuseStatus {
    guard(|| {
        let cfg = match preset {
            1 => PsdsConfig::psds1(),
            2 => PsdsConfig::psds2(),
            p => return Err(Error::Config(format!("unknown PSDS preset {p}")).into()),
        };
        let vocab = &href(vocab, "vocab")?.0;
        let report = psds(
            &href(grids, "grids")?.0,
            &href(reference, "reference")?.0,
            vocab,
            &PostProcessConfig::defaults(vocab.len()),
            &cfg,
        )?;
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        *out = report.psds;
        Ok(())
    })
}
