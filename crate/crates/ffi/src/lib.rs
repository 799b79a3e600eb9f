//! C ABI surface for the snipforge toolkit.
//!
//! Conventions:
//! - every fallible function returns a [`SnipforgeStatus`]; results go to
//!   `out` pointers that are written only on `SNIPFORGE_STATUS_OK`;
//! - strings are NUL-terminated UTF-8; strings returned through `out`
//!   pointers are owned by the caller and must be released with
//!   [`snipforge_string_free`];
//! - on failure, [`snipforge_last_error`] returns a message for the most
//!   recent error on the calling thread, valid until the next failing call;
//! - datasets are opaque handles created by [`snipforge_dataset_open`] and
//!   released with [`snipforge_dataset_free`].

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use snipforge::analysis::{classify, ConnectiveClass};
use snipforge::corpus::{
    join_tokens, tokenize, CorpusError, OpinionPair, Polarity, PredictionRecord, Segment,
    SnippetInstance, TemplateId,
};
use snipforge::metrics::{isolate_connective, lcs_recall, ngram_recall, score_corpus};
use snipforge::records::collect_records;
use snipforge::template;

/// Result codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SnipforgeStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    IoError = 4,
    ParseError = 5,
    InternalError = 6,
}

/// Classification verdict kinds mirrored across the ABI.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SnipforgeClassKind {
    ExactTemplate = 0,
    NewFusion = 1,
    GenerationError = 2,
}

/// Corpus-level evaluation result.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SnipforgeCorpusMeans {
    pub rouge_l_input: f64,
    pub rouge_3_best: f64,
    pub rouge_4_best: f64,
    pub conn_rouge_2: f64,
    pub conn_rouge_3: f64,
    pub evaluated: u64,
    pub skipped: u64,
    /// False when nothing was evaluated; the five means are zero then.
    pub has_means: bool,
}

/// Opaque handle over a loaded dataset.
pub struct SnipforgeDataset {
    instances: Vec<SnippetInstance>,
    by_id: HashMap<String, usize>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String, status: SnipforgeStatus) -> SnipforgeStatus {
    let message = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("error message unavailable").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
    status
}

fn corpus_error(e: CorpusError) -> SnipforgeStatus {
    let status = match &e {
        CorpusError::Io(_) | CorpusError::File { .. } => SnipforgeStatus::IoError,
        CorpusError::MissingField { .. }
        | CorpusError::InvalidField { .. }
        | CorpusError::Malformed { .. } => SnipforgeStatus::ParseError,
        _ => SnipforgeStatus::InvalidArgument,
    };
    set_error(e.to_string(), status)
}

/// Message for the most recent failure on this thread, or NULL when the
/// last call succeeded. The pointer is borrowed; do not free it, and do not
/// use it after the next failing snipforge call on this thread.
#[no_mangle]
pub extern "C" fn snipforge_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |message| message.as_ptr())
    })
}

/// Library version as a static string; never freed.
#[no_mangle]
pub extern "C" fn snipforge_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned through an `out` parameter of
/// this library, not yet freed; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn snipforge_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn str_arg<'a>(ptr: *const c_char) -> Result<&'a str, SnipforgeStatus> {
    if ptr.is_null() {
        return Err(set_error("null argument".into(), SnipforgeStatus::NullArgument));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| set_error("argument is not valid UTF-8".into(), SnipforgeStatus::InvalidUtf8))
}

fn string_out(value: String, out: *mut *mut c_char) -> SnipforgeStatus {
    match CString::new(value) {
        Ok(cstring) => {
            unsafe { *out = cstring.into_raw() };
            SnipforgeStatus::Ok
        }
        Err(_) => set_error(
            "result contains an interior NUL byte".into(),
            SnipforgeStatus::InternalError,
        ),
    }
}

fn guarded(body: impl FnOnce() -> SnipforgeStatus) -> SnipforgeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => set_error("internal panic".into(), SnipforgeStatus::InternalError),
    }
}

/// Tokenizes `text` and writes the space-joined canonical form to `out`.
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn snipforge_tokenize(
    text: *const c_char,
    out: *mut *mut c_char,
) -> SnipforgeStatus {
    guarded(|| {
        if out.is_null() {
            return set_error("null out pointer".into(), SnipforgeStatus::NullArgument);
        }
        let text = match str_arg(text) {
            Ok(s) => s,
            Err(status) => return status,
        };
        string_out(join_tokens(&tokenize(text)), out)
    })
}

/// Longest-common-subsequence recall between the tokenized texts.
///
/// # Safety
/// Both texts must be valid NUL-terminated strings; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn snipforge_lcs_recall(
    candidate: *const c_char,
    reference: *const c_char,
    out: *mut f64,
) -> SnipforgeStatus {
    guarded(|| {
        if out.is_null() {
            return set_error("null out pointer".into(), SnipforgeStatus::NullArgument);
        }
        let (candidate, reference) = match (str_arg(candidate), str_arg(reference)) {
            (Ok(c), Ok(r)) => (c, r),
            (Err(status), _) | (_, Err(status)) => return status,
        };
        *out = lcs_recall(&tokenize(candidate), &tokenize(reference));
        SnipforgeStatus::Ok
    })
}

/// Clipped n-gram recall between the tokenized texts; `n` must be >= 1.
///
/// # Safety
/// Both texts must be valid NUL-terminated strings; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn snipforge_ngram_recall(
    candidate: *const c_char,
    reference: *const c_char,
    n: u32,
    out: *mut f64,
) -> SnipforgeStatus {
    guarded(|| {
        if out.is_null() {
            return set_error("null out pointer".into(), SnipforgeStatus::NullArgument);
        }
        if n == 0 {
            return set_error("n-gram order must be >= 1".into(), SnipforgeStatus::InvalidArgument);
        }
        let (candidate, reference) = match (str_arg(candidate), str_arg(reference)) {
            (Ok(c), Ok(r)) => (c, r),
            (Err(status), _) | (_, Err(status)) => return status,
        };
        *out = ngram_recall(&tokenize(candidate), &tokenize(reference), n as usize);
        SnipforgeStatus::Ok
    })
}

/// Removes from `output` every token still available in the `input`
/// multiset and writes the surviving connective tokens to `out`.
///
/// # Safety
/// Both texts must be valid NUL-terminated strings; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn snipforge_isolate_connective(
    output: *const c_char,
    input: *const c_char,
    out: *mut *mut c_char,
) -> SnipforgeStatus {
    guarded(|| {
        if out.is_null() {
            return set_error("null out pointer".into(), SnipforgeStatus::NullArgument);
        }
        let (output, input) = match (str_arg(output), str_arg(input)) {
            (Ok(o), Ok(i)) => (o, i),
            (Err(status), _) | (_, Err(status)) => return status,
        };
        let survivors = isolate_connective(&tokenize(output), &tokenize(input));
        string_out(join_tokens(&survivors), out)
    })
}

/// Renders inventory template `template_id` (1..=7) over a positive and a
/// negative opinion and writes the snippet to `out`.
///
/// # Safety
/// Both texts must be valid NUL-terminated strings; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn snipforge_render_template(
    template_id: u8,
    positive: *const c_char,
    negative: *const c_char,
    out: *mut *mut c_char,
) -> SnipforgeStatus {
    guarded(|| {
        if out.is_null() {
            return set_error("null out pointer".into(), SnipforgeStatus::NullArgument);
        }
        let (positive, negative) = match (str_arg(positive), str_arg(negative)) {
            (Ok(p), Ok(n)) => (p, n),
            (Err(status), _) | (_, Err(status)) => return status,
        };
        let id = match TemplateId::new(template_id) {
            Ok(id) => id,
            Err(e) => return set_error(e.to_string(), SnipforgeStatus::InvalidArgument),
        };
        let pair = match OpinionPair::new(
            Segment::new("ffi", positive, Polarity::Positive),
            Segment::new("ffi", negative, Polarity::Negative),
        ) {
            Ok(pair) => pair,
            Err(e) => return set_error(e.to_string(), SnipforgeStatus::InvalidArgument),
        };
        match template::template(id).render(&pair) {
            Ok(tokens) => string_out(join_tokens(&tokens), out),
            Err(e) => set_error(e.to_string(), SnipforgeStatus::InvalidArgument),
        }
    })
}

/// Loads a dataset record file into an opaque handle.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be valid. The
/// handle must be released with [`snipforge_dataset_free`].
#[no_mangle]
pub unsafe extern "C" fn snipforge_dataset_open(
    path: *const c_char,
    out: *mut *mut SnipforgeDataset,
) -> SnipforgeStatus {
    guarded(|| {
        if out.is_null() {
            return set_error("null out pointer".into(), SnipforgeStatus::NullArgument);
        }
        let path = match str_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let instances: Vec<SnippetInstance> = match collect_records(path) {
            Ok(instances) => instances,
            Err(e) => return corpus_error(e),
        };
        let mut by_id = HashMap::with_capacity(instances.len());
        for (index, instance) in instances.iter().enumerate() {
            if by_id.insert(instance.id().to_string(), index).is_some() {
                return set_error(
                    format!("duplicate instance id {:?}", instance.id()),
                    SnipforgeStatus::ParseError,
                );
            }
        }
        *out = Box::into_raw(Box::new(SnipforgeDataset { instances, by_id }));
        SnipforgeStatus::Ok
    })
}

/// Number of instances in the dataset.
///
/// # Safety
/// `dataset` must be a live handle from [`snipforge_dataset_open`]; `out`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn snipforge_dataset_len(
    dataset: *const SnipforgeDataset,
    out: *mut u64,
) -> SnipforgeStatus {
    if dataset.is_null() || out.is_null() {
        return set_error("null argument".into(), SnipforgeStatus::NullArgument);
    }
    *out = (*dataset).instances.len() as u64;
    SnipforgeStatus::Ok
}

/// Releases a dataset handle. NULL is ignored.
///
/// # Safety
/// `dataset` must come from [`snipforge_dataset_open`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn snipforge_dataset_free(dataset: *mut SnipforgeDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Scores a prediction record file against the dataset and writes the
/// corpus means and counts to `out`.
///
/// # Safety
/// `dataset` must be a live handle; `predictions_path` a valid string;
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn snipforge_evaluate_file(
    dataset: *const SnipforgeDataset,
    predictions_path: *const c_char,
    out: *mut SnipforgeCorpusMeans,
) -> SnipforgeStatus {
    guarded(|| {
        if dataset.is_null() || out.is_null() {
            return set_error("null argument".into(), SnipforgeStatus::NullArgument);
        }
        let path = match str_arg(predictions_path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let predictions: Vec<PredictionRecord> = match collect_records(path) {
            Ok(predictions) => predictions,
            Err(e) => return corpus_error(e),
        };
        let dataset = &*dataset;
        let report = match score_corpus(&predictions, &dataset.instances) {
            Ok(report) => report,
            Err(e) => return set_error(e.to_string(), SnipforgeStatus::InvalidArgument),
        };
        let means = report.corpus;
        *out = SnipforgeCorpusMeans {
            rouge_l_input: means.as_ref().map_or(0.0, |m| m.rouge_l_input),
            rouge_3_best: means.as_ref().map_or(0.0, |m| m.rouge_3_best),
            rouge_4_best: means.as_ref().map_or(0.0, |m| m.rouge_4_best),
            conn_rouge_2: means.as_ref().map_or(0.0, |m| m.conn_rouge_2),
            conn_rouge_3: means.as_ref().map_or(0.0, |m| m.conn_rouge_3),
            evaluated: report.counts.evaluated as u64,
            skipped: report.counts.skipped as u64,
            has_means: means.is_some(),
        };
        SnipforgeStatus::Ok
    })
}

/// Classifies one output against the dataset instance named by
/// `instance_id`. Writes the verdict kind to `kind_out` and its detail (the
/// matched template id, the fused connective, or the error subtype) to
/// `detail_out`.
///
/// # Safety
/// `dataset` must be a live handle; both strings valid; both out pointers
/// valid. The detail string must be freed with [`snipforge_string_free`].
#[no_mangle]
pub unsafe extern "C" fn snipforge_classify_output(
    dataset: *const SnipforgeDataset,
    instance_id: *const c_char,
    output: *const c_char,
    kind_out: *mut SnipforgeClassKind,
    detail_out: *mut *mut c_char,
) -> SnipforgeStatus {
    guarded(|| {
        if dataset.is_null() || kind_out.is_null() || detail_out.is_null() {
            return set_error("null argument".into(), SnipforgeStatus::NullArgument);
        }
        let (instance_id, output) = match (str_arg(instance_id), str_arg(output)) {
            (Ok(i), Ok(o)) => (i, o),
            (Err(status), _) | (_, Err(status)) => return status,
        };
        let dataset = &*dataset;
        let instance = match dataset.by_id.get(instance_id) {
            Some(index) => &dataset.instances[*index],
            None => {
                return set_error(
                    format!("unknown instance id {instance_id:?}"),
                    SnipforgeStatus::InvalidArgument,
                )
            }
        };
        let prediction = match PredictionRecord::new(instance_id, output) {
            Ok(prediction) => prediction,
            Err(e) => return set_error(e.to_string(), SnipforgeStatus::InvalidArgument),
        };
        let (kind, detail) = match classify(&prediction, instance) {
            ConnectiveClass::ExactTemplate(id) => {
                (SnipforgeClassKind::ExactTemplate, id.to_string())
            }
            ConnectiveClass::NewFusion(connective) => (SnipforgeClassKind::NewFusion, connective),
            ConnectiveClass::Error(subtype) => (
                SnipforgeClassKind::GenerationError,
                subtype.as_str().to_string(),
            ),
        };
        *kind_out = kind;
        string_out(detail, detail_out)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use snipforge::records::write_records;
    use snipforge::template::references_for;
    use snipforge::Split;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    unsafe fn take_string(ptr: *mut c_char) -> String {
        let s = CStr::from_ptr(ptr).to_str().unwrap().to_string();
        snipforge_string_free(ptr);
        s
    }

    #[test]
    fn tokenize_round_trip() {
        let text = cstr("It works GREAT. However, camera is not good.");
        let mut out: *mut c_char = ptr::null_mut();
        let status = unsafe { snipforge_tokenize(text.as_ptr(), &mut out) };
        assert_eq!(status, SnipforgeStatus::Ok);
        let joined = unsafe { take_string(out) };
        assert_eq!(joined, "it works great . however , camera is not good .");
    }

    #[test]
    fn null_arguments_are_rejected() {
        let mut out: *mut c_char = ptr::null_mut();
        let status = unsafe { snipforge_tokenize(ptr::null(), &mut out) };
        assert_eq!(status, SnipforgeStatus::NullArgument);
        let message = unsafe { CStr::from_ptr(snipforge_last_error()) };
        assert!(!message.to_bytes().is_empty());
    }

    #[test]
    fn recall_metrics_cross_the_boundary() {
        let cand = cstr("display is awesome . however , battery takes long time to charge .");
        let reference = cstr("display is awesome . battery takes long time to charge .");
        let mut value = 0.0f64;
        let status = unsafe { snipforge_lcs_recall(cand.as_ptr(), reference.as_ptr(), &mut value) };
        assert_eq!(status, SnipforgeStatus::Ok);
        assert_eq!(value, 1.0);

        let status =
            unsafe { snipforge_ngram_recall(cand.as_ptr(), cand.as_ptr(), 3, &mut value) };
        assert_eq!(status, SnipforgeStatus::Ok);
        assert_eq!(value, 1.0);

        let status =
            unsafe { snipforge_ngram_recall(cand.as_ptr(), cand.as_ptr(), 0, &mut value) };
        assert_eq!(status, SnipforgeStatus::InvalidArgument);
    }

    #[test]
    fn render_and_isolate() {
        let pos = cstr("it works great");
        let neg = cstr("camera is not good");
        let mut out: *mut c_char = ptr::null_mut();
        let status =
            unsafe { snipforge_render_template(2, pos.as_ptr(), neg.as_ptr(), &mut out) };
        assert_eq!(status, SnipforgeStatus::Ok);
        let rendered = unsafe { take_string(out) };
        assert_eq!(rendered, "it works great . however camera is not good .");

        let rendered_c = cstr(&rendered);
        let input = cstr("it works great . camera is not good .");
        let status = unsafe {
            snipforge_isolate_connective(rendered_c.as_ptr(), input.as_ptr(), &mut out)
        };
        assert_eq!(status, SnipforgeStatus::Ok);
        assert_eq!(unsafe { take_string(out) }, "however");

        let status = unsafe { snipforge_render_template(9, pos.as_ptr(), neg.as_ptr(), &mut out) };
        assert_eq!(status, SnipforgeStatus::InvalidArgument);
    }

    fn write_fixture(dir: &std::path::Path) -> (String, String) {
        let pair = OpinionPair::new(
            Segment::new("p1", "it works great", Polarity::Positive),
            Segment::new("p1", "camera is not good", Polarity::Negative),
        )
        .unwrap();
        let references = references_for(&pair).unwrap();
        let instance = SnippetInstance::new(
            "p1:000000",
            pair,
            references,
            TemplateId::new(2).unwrap(),
            Split::Test,
        )
        .unwrap();
        let prediction =
            PredictionRecord::from_tokens("p1:000000", &instance.chosen_reference().tokens)
                .unwrap();
        let dataset_path = dir.join("dataset.ndrec");
        let predictions_path = dir.join("preds.ndrec");
        write_records(&dataset_path, [instance]).unwrap();
        write_records(&predictions_path, [prediction]).unwrap();
        (
            dataset_path.to_str().unwrap().to_string(),
            predictions_path.to_str().unwrap().to_string(),
        )
    }

    #[test]
    fn dataset_evaluate_and_classify() {
        let dir = tempfile::tempdir().unwrap();
        let (dataset_path, predictions_path) = write_fixture(dir.path());

        let path = cstr(&dataset_path);
        let mut handle: *mut SnipforgeDataset = ptr::null_mut();
        let status = unsafe { snipforge_dataset_open(path.as_ptr(), &mut handle) };
        assert_eq!(status, SnipforgeStatus::Ok);

        let mut len = 0u64;
        assert_eq!(
            unsafe { snipforge_dataset_len(handle, &mut len) },
            SnipforgeStatus::Ok
        );
        assert_eq!(len, 1);

        let preds = cstr(&predictions_path);
        let mut means = SnipforgeCorpusMeans {
            rouge_l_input: 0.0,
            rouge_3_best: 0.0,
            rouge_4_best: 0.0,
            conn_rouge_2: 0.0,
            conn_rouge_3: 0.0,
            evaluated: 0,
            skipped: 0,
            has_means: false,
        };
        let status = unsafe { snipforge_evaluate_file(handle, preds.as_ptr(), &mut means) };
        assert_eq!(status, SnipforgeStatus::Ok);
        assert!(means.has_means);
        assert_eq!(means.evaluated, 1);
        assert_eq!(means.rouge_l_input, 1.0);
        assert_eq!(means.conn_rouge_3, 1.0);

        let id = cstr("p1:000000");
        let output = cstr("it works great . however , camera is not good .");
        let mut kind = SnipforgeClassKind::GenerationError;
        let mut detail: *mut c_char = ptr::null_mut();
        let status = unsafe {
            snipforge_classify_output(handle, id.as_ptr(), output.as_ptr(), &mut kind, &mut detail)
        };
        assert_eq!(status, SnipforgeStatus::Ok);
        assert_eq!(kind, SnipforgeClassKind::NewFusion);
        assert_eq!(unsafe { take_string(detail) }, "however ,");

        let missing = cstr("nope");
        let status = unsafe {
            snipforge_classify_output(handle, missing.as_ptr(), output.as_ptr(), &mut kind, &mut detail)
        };
        assert_eq!(status, SnipforgeStatus::InvalidArgument);

        unsafe { snipforge_dataset_free(handle) };
    }

    #[test]
    fn missing_dataset_file_reports_io_error() {
        let path = cstr("/nonexistent/missing.ndrec");
        let mut handle: *mut SnipforgeDataset = ptr::null_mut();
        let status = unsafe { snipforge_dataset_open(path.as_ptr(), &mut handle) };
        assert_eq!(status, SnipforgeStatus::IoError);
        assert!(handle.is_null());
    }

    #[test]
    fn version_is_static() {
        let version = unsafe { CStr::from_ptr(snipforge_version()) };
        assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
