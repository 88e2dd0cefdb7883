//! C ABI over `trlink`.
//!
//! Objects cross the boundary as opaque handles (`TrlinkCir`,
//! `TrlinkWaveform`, `TrlinkFilter`) that the caller releases with the
//! matching `*_free`. Every fallible call returns a [`TrlinkStatus`] and
//! writes its result through an out-pointer; on failure the out-pointer is
//! left untouched and [`trlink_last_error`] describes the problem.
//!
//! Times are in seconds, rates in hertz, energies in joules.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use num_complex::Complex64;
use trlink::channel::{self, AnalyticCir, ChannelSynthParams, MultipathTap};
use trlink::trfilter::{self, FilterRecipe, TrFilter};
use trlink::{correlation, phy, Error, SampledWaveform};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrlinkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Numerical = 4,
    BufferTooSmall = 5,
    EmptyChannel = 6,
    ZeroEnergy = 7,
    Internal = 8,
}

/// Multipath channel: a list of taps with amplitude, phase and delay.
pub struct TrlinkCir(AnalyticCir);

/// Uniformly sampled complex baseband waveform.
pub struct TrlinkWaveform(SampledWaveform);

/// Time-reversal precoding filter.
pub struct TrlinkFilter(TrFilter);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn from_core(err: Error) -> TrlinkStatus {
    set_error(err.to_string());
    match err {
        Error::EmptyChannel => TrlinkStatus::EmptyChannel,
        Error::ZeroEnergy => TrlinkStatus::ZeroEnergy,
        Error::Parse { .. } => TrlinkStatus::Parse,
        Error::Numerical(_) => TrlinkStatus::Numerical,
        _ => TrlinkStatus::InvalidArgument,
    }
}

fn fail(status: TrlinkStatus, msg: impl Into<String>) -> TrlinkStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), TrlinkStatus>) -> TrlinkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TrlinkStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(TrlinkStatus::Internal, "internal panic"),
    }
}

fn core<T>(r: trlink::Result<T>) -> Result<T, TrlinkStatus> {
    r.map_err(from_core)
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, TrlinkStatus> {
    p.as_ref().ok_or_else(|| fail(TrlinkStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn put<T>(out: *mut T, value: T, name: &str) -> Result<(), TrlinkStatus> {
    if out.is_null() {
        return Err(fail(TrlinkStatus::NullPointer, format!("`{name}` is null")));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], TrlinkStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(TrlinkStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string<'a>(p: *const c_char, name: &str) -> Result<&'a str, TrlinkStatus> {
    if p.is_null() {
        return Err(fail(TrlinkStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(TrlinkStatus::InvalidArgument, format!("`{name}` is not UTF-8")))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message for the most recent failure on this thread; empty after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn trlink_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, e.g. `"0.1.0"`. Static storage.
#[no_mangle]
pub extern "C" fn trlink_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn trlink_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- channels ----

/// Builds a CIR from `n` taps. Delays are in seconds, phases in radians,
/// amplitudes non-negative.
///
/// # Safety
/// The three arrays must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_cir_new(
    amplitudes: *const f64,
    phases: *const f64,
    delays: *const f64,
    n: usize,
    out: *mut *mut TrlinkCir,
) -> TrlinkStatus {
    guard(|| {
        let (a, p, d) = (slice(amplitudes, n, "amplitudes")?, slice(phases, n, "phases")?, slice(delays, n, "delays")?);
        let taps = (0..n).map(|i| MultipathTap::new(a[i], p[i], d[i])).collect::<trlink::Result<Vec<_>>>();
        let cir = core(taps.and_then(AnalyticCir::new))?;
        put(out, boxed(TrlinkCir(cir)), "out")
    })
}

/// Draws a reverberant CIR, normalized to unit energy. Rates in taps per
/// second, times in seconds.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_cir_synth(
    tap_arrival_rate: f64,
    decay_time_constant: f64,
    span: f64,
    los_gain: f64,
    first_arrival_delay: f64,
    seed: u64,
    out: *mut *mut TrlinkCir,
) -> TrlinkStatus {
    guard(|| {
        let params = ChannelSynthParams { tap_arrival_rate, decay_time_constant, span, los_gain, first_arrival_delay };
        let cir = core(channel::synth_reverberant(&params, seed))?;
        put(out, boxed(TrlinkCir(cir)), "out")
    })
}

/// Parses the `cir v1` text format.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_cir_import(text: *const c_char, out: *mut *mut TrlinkCir) -> TrlinkStatus {
    guard(|| {
        let cir = core(channel::import_cir(string(text, "text")?))?;
        put(out, boxed(TrlinkCir(cir)), "out")
    })
}

/// Serializes to the `cir v1` text format. Free the result with
/// `trlink_string_free`.
///
/// # Safety
/// `cir` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_cir_export(cir: *const TrlinkCir, out: *mut *mut c_char) -> TrlinkStatus {
    guard(|| {
        let text = channel::export_cir(&deref(cir, "cir")?.0);
        let c = CString::new(text).map_err(|_| fail(TrlinkStatus::Internal, "export produced a NUL byte"))?;
        put(out, c.into_raw(), "out")
    })
}

/// Number of taps; 0 for a null handle.
///
/// # Safety
/// `cir` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn trlink_cir_len(cir: *const TrlinkCir) -> usize {
    cir.as_ref().map_or(0, |c| c.0.len())
}

/// Copies tap `index` out.
///
/// # Safety
/// `cir` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_cir_tap(
    cir: *const TrlinkCir,
    index: usize,
    amplitude: *mut f64,
    phase: *mut f64,
    delay: *mut f64,
) -> TrlinkStatus {
    guard(|| {
        let c = &deref(cir, "cir")?.0;
        let tap = c.taps().get(index).ok_or_else(|| {
            fail(TrlinkStatus::InvalidArgument, format!("tap index {index} out of range (len {})", c.len()))
        })?;
        put(amplitude, tap.amplitude, "amplitude")?;
        put(phase, tap.phase, "phase")?;
        put(delay, tap.delay, "delay")
    })
}

/// Total tap energy `sum A^2`.
///
/// # Safety
/// `cir` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_cir_energy(cir: *const TrlinkCir, out: *mut f64) -> TrlinkStatus {
    guard(|| put(out, deref(cir, "cir")?.0.energy(), "out"))
}

/// Power-weighted RMS delay spread in seconds.
///
/// # Safety
/// `cir` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_cir_rms_delay_spread(cir: *const TrlinkCir, out: *mut f64) -> TrlinkStatus {
    guard(|| put(out, channel::rms_delay_spread(&deref(cir, "cir")?.0), "out"))
}

/// Places the taps on a grid of spacing `dt` covering `[0, max delay + pad]`.
/// `merged_taps` (may be null) receives the number of taps that shared a bin.
///
/// # Safety
/// `cir` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_cir_to_sampled(
    cir: *const TrlinkCir,
    dt: f64,
    pad: f64,
    out: *mut *mut TrlinkWaveform,
    merged_taps: *mut usize,
) -> TrlinkStatus {
    guard(|| {
        let s = core(channel::to_sampled(&deref(cir, "cir")?.0, dt, pad))?;
        if out.is_null() {
            return Err(fail(TrlinkStatus::NullPointer, "`out` is null"));
        }
        if !merged_taps.is_null() {
            merged_taps.write(s.merged_taps);
        }
        put(out, boxed(TrlinkWaveform(s.waveform)), "out")
    })
}

/// # Safety
/// `cir` must be null or a live handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn trlink_cir_free(cir: *mut TrlinkCir) {
    if !cir.is_null() {
        drop(Box::from_raw(cir));
    }
}

// ---- waveforms ----

/// Builds a waveform from `n` complex samples split into real and
/// imaginary arrays. `imag` may be null for a real waveform.
///
/// # Safety
/// `real` (and `imag` if non-null) must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_waveform_new(
    real: *const f64,
    imag: *const f64,
    n: usize,
    dt: f64,
    t0: f64,
    out: *mut *mut TrlinkWaveform,
) -> TrlinkStatus {
    guard(|| {
        let re = slice(real, n, "real")?;
        let im = if imag.is_null() { None } else { Some(slice(imag, n, "imag")?) };
        let samples = (0..n).map(|k| Complex64::new(re[k], im.map_or(0.0, |im| im[k]))).collect();
        let w = core(SampledWaveform::new(samples, dt, t0))?;
        put(out, boxed(TrlinkWaveform(w)), "out")
    })
}

/// Sample count; 0 for a null handle.
///
/// # Safety
/// `w` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn trlink_waveform_len(w: *const TrlinkWaveform) -> usize {
    w.as_ref().map_or(0, |w| w.0.len())
}

/// Grid spacing and start time in seconds.
///
/// # Safety
/// `w` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_waveform_grid(w: *const TrlinkWaveform, dt: *mut f64, t0: *mut f64) -> TrlinkStatus {
    guard(|| {
        let w = &deref(w, "w")?.0;
        put(dt, w.dt(), "dt")?;
        put(t0, w.t0(), "t0")
    })
}

/// `sum |x|^2 * dt`.
///
/// # Safety
/// `w` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_waveform_energy(w: *const TrlinkWaveform, out: *mut f64) -> TrlinkStatus {
    guard(|| put(out, deref(w, "w")?.0.energy(), "out"))
}

/// Copies the samples into caller buffers of capacity `cap`. Returns
/// `BufferTooSmall` when `cap` is below `trlink_waveform_len`. `imag` may
/// be null to skip the imaginary parts.
///
/// # Safety
/// `real` (and `imag` if non-null) must be writable for `cap` elements.
#[no_mangle]
pub unsafe extern "C" fn trlink_waveform_copy(
    w: *const TrlinkWaveform,
    real: *mut f64,
    imag: *mut f64,
    cap: usize,
) -> TrlinkStatus {
    guard(|| {
        let s = deref(w, "w")?.0.samples();
        if cap < s.len() {
            return Err(fail(TrlinkStatus::BufferTooSmall, format!("need {} samples, buffer holds {cap}", s.len())));
        }
        if s.is_empty() {
            return Ok(());
        }
        if real.is_null() {
            return Err(fail(TrlinkStatus::NullPointer, "`real` is null"));
        }
        for (k, x) in s.iter().enumerate() {
            real.add(k).write(x.re);
            if !imag.is_null() {
                imag.add(k).write(x.im);
            }
        }
        Ok(())
    })
}

/// Linear convolution `dt * sum a[i] b[k-i]` on the shared grid; the result
/// starts at `t0_a + t0_b`.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_convolve(
    a: *const TrlinkWaveform,
    b: *const TrlinkWaveform,
    out: *mut *mut TrlinkWaveform,
) -> TrlinkStatus {
    guard(|| {
        let y = core(correlation::convolve(&deref(a, "a")?.0, &deref(b, "b")?.0))?;
        put(out, boxed(TrlinkWaveform(y)), "out")
    })
}

/// # Safety
/// `w` must be null or a live handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn trlink_waveform_free(w: *mut TrlinkWaveform) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

// ---- TR filters ----

fn filter_out(out: *mut *mut TrlinkFilter, f: trlink::Result<TrFilter>) -> Result<(), TrlinkStatus> {
    let f = core(f)?;
    // SAFETY: forwarded from the exported caller's contract on `out`.
    unsafe { put(out, boxed(TrlinkFilter(f)), "out") }
}

/// Ideal TR filter of a sampled CIR: conjugated, time-reversed, unit energy.
///
/// # Safety
/// `cir_sampled` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_filter_ideal(cir_sampled: *const TrlinkWaveform, out: *mut *mut TrlinkFilter) -> TrlinkStatus {
    guard(|| filter_out(out, trfilter::ideal_tr(&deref(cir_sampled, "cir_sampled")?.0)))
}

/// Builds a filter from recipe text such as `"tr+zoh@100GHz+quant@6"`.
/// The non-precoded recipe `"none"` is rejected.
///
/// # Safety
/// `cir_sampled` must be a live handle; `recipe` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_filter_from_recipe(
    cir_sampled: *const TrlinkWaveform,
    recipe: *const c_char,
    out: *mut *mut TrlinkFilter,
) -> TrlinkStatus {
    guard(|| {
        let r: FilterRecipe = core(string(recipe, "recipe")?.parse())?;
        match core(r.build(&deref(cir_sampled, "cir_sampled")?.0))? {
            Some(f) => filter_out(out, Ok(f)),
            None => Err(fail(TrlinkStatus::InvalidArgument, "recipe `none` has no filter")),
        }
    })
}

/// Zero-order hold at `sampling_rate` Hz, renormalized to unit energy.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_filter_zoh(f: *const TrlinkFilter, sampling_rate: f64, out: *mut *mut TrlinkFilter) -> TrlinkStatus {
    guard(|| filter_out(out, trfilter::zoh_resample(&deref(f, "f")?.0, sampling_rate)))
}

/// Shifts a held filter by `offset_fraction` of its hold period.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_filter_jitter(f: *const TrlinkFilter, offset_fraction: f64, out: *mut *mut TrlinkFilter) -> TrlinkStatus {
    guard(|| filter_out(out, trfilter::apply_jitter(&deref(f, "f")?.0, offset_fraction)))
}

/// Uniform `bits`-bit quantization of the real and imaginary parts.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_filter_quantize(f: *const TrlinkFilter, bits: u32, out: *mut *mut TrlinkFilter) -> TrlinkStatus {
    guard(|| filter_out(out, trfilter::quantize_amplitude(&deref(f, "f")?.0, bits)))
}

/// Time of the focused peak of `cir * filter`, seconds.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_filter_causal_delay(f: *const TrlinkFilter, out: *mut f64) -> TrlinkStatus {
    guard(|| put(out, deref(f, "f")?.0.causal_delay, "out"))
}

/// Copy of the filter taps as a new waveform handle.
///
/// # Safety
/// `f` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_filter_waveform(f: *const TrlinkFilter, out: *mut *mut TrlinkWaveform) -> TrlinkStatus {
    guard(|| put(out, boxed(TrlinkWaveform(deref(f, "f")?.0.waveform.clone())), "out"))
}

/// # Safety
/// `f` must be null or a live handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn trlink_filter_free(f: *mut TrlinkFilter) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

// ---- detection ----

/// Bit error rate of OOK with an energy detector: `mean_energy_one` is the
/// signal energy collected for a 1, `noise_energy` the mean noise energy in
/// the window and `window_samples` the number of complex noise samples in
/// it.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn trlink_ber_theoretical_ook(
    mean_energy_one: f64,
    noise_energy: f64,
    window_samples: f64,
    out: *mut f64,
) -> TrlinkStatus {
    guard(|| {
        if !(noise_energy > 0.0 && noise_energy.is_finite()) {
            return Err(fail(TrlinkStatus::InvalidArgument, format!("noise_energy must be positive, got {noise_energy}")));
        }
        if !(window_samples >= 1.0 && window_samples.is_finite()) {
            return Err(fail(TrlinkStatus::InvalidArgument, format!("window_samples must be >= 1, got {window_samples}")));
        }
        if !mean_energy_one.is_finite() {
            return Err(fail(TrlinkStatus::InvalidArgument, "mean_energy_one must be finite"));
        }
        put(out, phy::ber_theoretical_ook(mean_energy_one, noise_energy, window_samples), "out")
    })
}
