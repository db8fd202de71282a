//! C interface to `qsm-core`.
//!
//! Every function returns a [`QsmStatus`]; on failure the message is available
//! from [`qsm_last_error`] on the same thread. Scenarios are opaque handles
//! created from JSON text and released with [`qsm_scenario_free`]. Strings
//! returned through out-parameters are owned by the caller and released with
//! [`qsm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qsm_core::boxes::synthesize_query;
use qsm_core::measure::ent_z_threshold;
use qsm_core::relations::dpo_preferred_direct;
use qsm_core::scenario::{named_partition, AnyScenario};
use qsm_core::space::answer_probability;
use qsm_core::synthesis::SearchConfig;
use qsm_core::{Answer, Error, MeasureSpec, Partition};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QsmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    Infeasible = 5,
    WrongKind = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// A loaded scenario, either partition or box.
pub struct QsmScenario {
    inner: AnyScenario,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Failure(QsmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::MeasureParse { .. } => QsmStatus::Parse,
            Error::NoRealizableGoal { .. } => QsmStatus::Infeasible,
            _ => QsmStatus::Validation,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> QsmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QsmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            QsmStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(QsmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(QsmStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn scenario<'a>(p: *const QsmScenario) -> Result<&'a AnyScenario, Failure> {
    p.as_ref().map(|s| &s.inner).ok_or_else(|| null("scenario"))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn measure(p: *const c_char) -> Result<MeasureSpec, Failure> {
    Ok(read_str(p, "measure")?.parse::<MeasureSpec>()?)
}

fn query(s: &AnyScenario, index: usize) -> Result<Partition, Failure> {
    match s {
        AnyScenario::Partitions(p) => p.queries.get(index).map(|(_, q)| *q).ok_or_else(|| {
            Failure(QsmStatus::OutOfRange, format!("query index {index} out of range ({} queries)", p.queries.len()))
        }),
        AnyScenario::Boxes(_) => Err(Failure(QsmStatus::WrongKind, "box scenarios hold no queries".into())),
    }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qsm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qsm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a partition or box scenario from JSON.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qsm_scenario_from_json(json: *const c_char, out: *mut *mut QsmScenario) -> QsmStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        serde_json::from_str::<serde_json::Value>(text).map_err(|e| Failure(QsmStatus::Parse, e.to_string()))?;
        let inner = AnyScenario::from_json(text)?;
        out.write(Box::into_raw(Box::new(QsmScenario { inner })));
        Ok(())
    })
}

/// Releases a scenario. Null is ignored.
///
/// # Safety
/// `s` must come from [`qsm_scenario_from_json`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qsm_scenario_free(s: *mut QsmScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of hypotheses and, for partition scenarios, of named queries.
///
/// # Safety
/// `s` must be a live scenario; either out-pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn qsm_scenario_sizes(
    s: *const QsmScenario,
    hypotheses: *mut usize,
    queries: *mut usize,
) -> QsmStatus {
    guard(|| {
        let s = scenario(s)?;
        if !hypotheses.is_null() {
            hypotheses.write(s.names().len());
        }
        if !queries.is_null() {
            queries.write(match s {
                AnyScenario::Partitions(p) => p.queries.len(),
                AnyScenario::Boxes(_) => 0,
            });
        }
        Ok(())
    })
}

/// Value of a measure such as `"ENT"` or `"SPL_z=1.1"` on query `index`.
///
/// # Safety
/// `s` must be a live scenario, `measure_spec` a nul-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qsm_evaluate(
    s: *const QsmScenario,
    measure_spec: *const c_char,
    index: usize,
    out: *mut f64,
) -> QsmStatus {
    guard(|| {
        let s = scenario(s)?;
        let m = measure(measure_spec)?;
        let value = m.evaluate(&query(s, index)?, s.dist())?;
        write(out, value, "out")
    })
}

/// Probability of answer 1 (`yes` true) or 0 for query `index`.
///
/// # Safety
/// `s` must be a live scenario and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qsm_answer_probability(
    s: *const QsmScenario,
    index: usize,
    yes: bool,
    out: *mut f64,
) -> QsmStatus {
    guard(|| {
        let s = scenario(s)?;
        let answer = if yes { Answer::Yes } else { Answer::No };
        let p = answer_probability(&query(s, index)?, s.dist(), answer)?;
        write(out, p, "out")
    })
}

/// Index and value of the query the measure selects among all queries.
///
/// # Safety
/// `s` must be a live scenario, `measure_spec` a nul-terminated string and
/// both out-pointers writable.
#[no_mangle]
pub unsafe extern "C" fn qsm_select_best(
    s: *const QsmScenario,
    measure_spec: *const c_char,
    index: *mut usize,
    value: *mut f64,
) -> QsmStatus {
    guard(|| {
        let s = scenario(s)?;
        let m = measure(measure_spec)?;
        let pool = match s {
            AnyScenario::Partitions(p) => p.partitions(),
            AnyScenario::Boxes(_) => return Err(Failure(QsmStatus::WrongKind, "box scenarios hold no queries".into())),
        };
        let (i, v) = m.select_best(&pool, s.dist())?;
        write(index, i, "index")?;
        write(value, v, "value")
    })
}

/// Whether query `first` is DPO-preferred to query `second`.
///
/// # Safety
/// `s` must be a live scenario and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qsm_dpo_preferred(
    s: *const QsmScenario,
    first: usize,
    second: usize,
    out: *mut bool,
) -> QsmStatus {
    guard(|| {
        let s = scenario(s)?;
        let verdict = dpo_preferred_direct(&query(s, first)?, &query(s, second)?)?;
        write(out, verdict.preferred, "out")
    })
}

/// Smallest `z` making ENT_z satisfy the DPO when all answer probabilities
/// exceed `t`, for `t` in (0, 0.5).
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qsm_ent_z_threshold(t: f64, out: *mut f64) -> QsmStatus {
    guard(|| {
        let z = ent_z_threshold(t)?;
        write(out, z, "out")
    })
}

/// Synthesizes a point query for a box scenario.
///
/// Writes the point to `x`/`y`. When `details` is not null it receives a JSON
/// object with the partition, search counters and rejected goals; release it
/// with [`qsm_string_free`]. Pass `epsilon < 0` for the default tolerance.
///
/// # Safety
/// `s` must be a live box scenario, `measure_spec` a nul-terminated string,
/// `x` and `y` writable.
#[no_mangle]
pub unsafe extern "C" fn qsm_synthesize_query(
    s: *const QsmScenario,
    measure_spec: *const c_char,
    epsilon: f64,
    x: *mut f64,
    y: *mut f64,
    details: *mut *mut c_char,
) -> QsmStatus {
    guard(|| {
        let s = scenario(s)?;
        let m = measure(measure_spec)?;
        let spec = match s {
            AnyScenario::Boxes(b) => b,
            AnyScenario::Partitions(_) => {
                return Err(Failure(QsmStatus::WrongKind, "query synthesis needs a box scenario".into()))
            }
        };
        let mut config = SearchConfig::new(m);
        if epsilon >= 0.0 {
            config = config.epsilon(epsilon);
        }
        config.validate()?;
        let q = synthesize_query(&config, &spec.scenario)?;
        if x.is_null() || y.is_null() {
            return Err(null("x/y"));
        }
        x.write(q.point.x);
        y.write(q.point.y);
        if !details.is_null() {
            let doc = serde_json::json!({
                "partition": named_partition(&spec.names, &q.partition),
                "expanded": q.trace.expanded.len(),
                "backtracks": q.trace.backtracks,
                "budget_exhausted": q.trace.budget_exhausted,
                "rejected": q.rejected.iter().map(|p| named_partition(&spec.names, p)).collect::<Vec<_>>(),
            });
            let text = CString::new(doc.to_string()).expect("json has no nul bytes");
            details.write(text.into_raw());
        }
        Ok(())
    })
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn qsm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
