//! C ABI over `nlos_uv`.
//!
//! Every fallible entry point returns an [`NlosStatus`]. On failure a
//! description is kept per thread and can be read with
//! [`nlos_last_error_message`]. Results are written through out-pointers,
//! which are left untouched on failure.
//!
//! Handles ([`NlosImpulseResponse`], [`NlosTrace`], [`NlosTemplate`]) are
//! owned by the caller once returned and must be released with the matching
//! `_free` function. Passing NULL to a `_free` function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nlos_uv::atmosphere::{self, AtmosphereParams};
use nlos_uv::channel::{self, Estimator, Geometry, ImpulseResponse, TransportConfig};
use nlos_uv::detection::{self, OokOperatingPoint};
use nlos_uv::localization::{self, CorrelationEnd, PulseTemplate, WindowEstimate};
use nlos_uv::signal::{self, FrameSpec, PhotoelectronTrace, SourceDetectorParams};
use nlos_uv::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlosStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Domain = 3,
    BinWidthMismatch = 4,
    NoSignal = 5,
    FrameTooShort = 6,
    TraceTooShort = 7,
    Empty = 8,
    /// The localizer found no pulse. Not an error in the usual sense.
    NotFound = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

/// Opaque channel impulse response.
pub struct NlosImpulseResponse(ImpulseResponse);

/// Opaque photoelectron trace.
pub struct NlosTrace(PhotoelectronTrace);

/// Opaque correlation template.
pub struct NlosTemplate(PulseTemplate);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NlosGeometry {
    /// m
    pub baseline_distance: f64,
    /// rad
    pub tx_elevation: f64,
    /// rad
    pub rx_elevation: f64,
    /// Half-angle, rad.
    pub rx_fov: f64,
    /// m²
    pub aperture_area: f64,
    /// Half-angle, rad.
    pub tx_divergence: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NlosAtmosphere {
    /// 1/m
    pub k_a: f64,
    /// 1/m
    pub k_s_rayleigh: f64,
    /// 1/m
    pub k_s_mie: f64,
    pub g: f64,
    pub f: f64,
    pub gamma: f64,
    /// m
    pub wavelength: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlosEstimator {
    LocalEstimate = 0,
    AnalogAperture = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NlosTransport {
    pub photons: u64,
    /// s
    pub bin_width: f64,
    pub max_scatters: u32,
    pub estimator: NlosEstimator,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NlosSource {
    /// J
    pub pulse_energy: f64,
    pub quantum_efficiency: f64,
    /// m
    pub wavelength: f64,
    /// 1/s
    pub background_rate: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct NlosFrame {
    /// s
    pub frame_length: f64,
    /// s
    pub pulse_offset: f64,
    /// s
    pub chip_duration: f64,
    pub boundary_fraction: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NlosBroadening {
    /// s
    pub left_boundary: f64,
    /// s
    pub right_boundary: f64,
    /// s
    pub broadening: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NlosCorrelationEnd {
    WindowStart = 0,
    WindowEnd = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NlosWindow {
    /// s
    pub start: f64,
    /// s
    pub end: f64,
    /// Nonzero when the end criterion never fired and `end` is the frame end.
    pub end_clamped: u8,
}

impl From<NlosGeometry> for Geometry {
    fn from(g: NlosGeometry) -> Self {
        Geometry {
            baseline_distance: g.baseline_distance,
            tx_elevation: g.tx_elevation,
            rx_elevation: g.rx_elevation,
            rx_fov: g.rx_fov,
            aperture_area: g.aperture_area,
            tx_divergence: g.tx_divergence,
        }
    }
}

impl From<Geometry> for NlosGeometry {
    fn from(g: Geometry) -> Self {
        NlosGeometry {
            baseline_distance: g.baseline_distance,
            tx_elevation: g.tx_elevation,
            rx_elevation: g.rx_elevation,
            rx_fov: g.rx_fov,
            aperture_area: g.aperture_area,
            tx_divergence: g.tx_divergence,
        }
    }
}

impl From<NlosAtmosphere> for AtmosphereParams {
    fn from(a: NlosAtmosphere) -> Self {
        AtmosphereParams {
            k_a: a.k_a,
            k_s_rayleigh: a.k_s_rayleigh,
            k_s_mie: a.k_s_mie,
            g: a.g,
            f: a.f,
            gamma: a.gamma,
            wavelength: a.wavelength,
        }
    }
}

impl From<AtmosphereParams> for NlosAtmosphere {
    fn from(a: AtmosphereParams) -> Self {
        NlosAtmosphere {
            k_a: a.k_a,
            k_s_rayleigh: a.k_s_rayleigh,
            k_s_mie: a.k_s_mie,
            g: a.g,
            f: a.f,
            gamma: a.gamma,
            wavelength: a.wavelength,
        }
    }
}

impl From<NlosTransport> for TransportConfig {
    fn from(t: NlosTransport) -> Self {
        TransportConfig {
            photons: t.photons,
            bin_width: t.bin_width,
            max_scatters: t.max_scatters,
            estimator: match t.estimator {
                NlosEstimator::LocalEstimate => Estimator::LocalEstimate,
                NlosEstimator::AnalogAperture => Estimator::AnalogAperture,
            },
        }
    }
}

impl From<TransportConfig> for NlosTransport {
    fn from(t: TransportConfig) -> Self {
        NlosTransport {
            photons: t.photons,
            bin_width: t.bin_width,
            max_scatters: t.max_scatters,
            estimator: match t.estimator {
                Estimator::LocalEstimate => NlosEstimator::LocalEstimate,
                Estimator::AnalogAperture => NlosEstimator::AnalogAperture,
            },
        }
    }
}

impl From<NlosSource> for SourceDetectorParams {
    fn from(s: NlosSource) -> Self {
        SourceDetectorParams {
            pulse_energy: s.pulse_energy,
            quantum_efficiency: s.quantum_efficiency,
            wavelength: s.wavelength,
            background_rate: s.background_rate,
        }
    }
}

impl From<SourceDetectorParams> for NlosSource {
    fn from(s: SourceDetectorParams) -> Self {
        NlosSource {
            pulse_energy: s.pulse_energy,
            quantum_efficiency: s.quantum_efficiency,
            wavelength: s.wavelength,
            background_rate: s.background_rate,
        }
    }
}

impl From<NlosFrame> for FrameSpec {
    fn from(f: NlosFrame) -> Self {
        FrameSpec {
            frame_length: f.frame_length,
            pulse_offset: f.pulse_offset,
            chip_duration: f.chip_duration,
            boundary_fraction: f.boundary_fraction,
        }
    }
}

impl From<FrameSpec> for NlosFrame {
    fn from(f: FrameSpec) -> Self {
        NlosFrame {
            frame_length: f.frame_length,
            pulse_offset: f.pulse_offset,
            chip_duration: f.chip_duration,
            boundary_fraction: f.boundary_fraction,
        }
    }
}

impl From<WindowEstimate> for NlosWindow {
    fn from(w: WindowEstimate) -> Self {
        NlosWindow {
            start: w.start,
            end: w.end,
            end_clamped: w.end_clamped as u8,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure {
    status: NlosStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Domain(_) => NlosStatus::Domain,
            Error::InvalidParameter { .. } => NlosStatus::InvalidParameter,
            Error::BinWidthMismatch(..) => NlosStatus::BinWidthMismatch,
            Error::NoSignal => NlosStatus::NoSignal,
            Error::FrameTooShort { .. } => NlosStatus::FrameTooShort,
            Error::TraceTooShort { .. } => NlosStatus::TraceTooShort,
            Error::Empty(_) => NlosStatus::Empty,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn fail(status: NlosStatus, message: impl Into<String>) -> Failure {
    Failure {
        status,
        message: message.into(),
    }
}

fn set_last_error(message: &str) {
    // interior NULs would truncate the C string; replace them
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NlosStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NlosStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(&e.message);
            e.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            NlosStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(NlosStatus::NullPointer, format!("`{name}` is NULL")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(NlosStatus::NullPointer, format!("`{name}` is NULL")))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(NlosStatus::NullPointer, format!("`{name}` is NULL")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn copy_into<T: Copy>(src: &[T], dst: *mut T, capacity: usize) -> Result<(), Failure> {
    if capacity < src.len() {
        return Err(fail(
            NlosStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, need {}", src.len()),
        ));
    }
    if src.is_empty() {
        return Ok(());
    }
    if dst.is_null() {
        return Err(fail(NlosStatus::NullPointer, "`buffer` is NULL"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message for the most recent failed call on this thread, or an empty
/// string. Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nlos_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a NUL-terminated string with static lifetime.
#[no_mangle]
pub extern "C" fn nlos_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn nlos_geometry_default() -> NlosGeometry {
    Geometry::default().into()
}

#[no_mangle]
pub extern "C" fn nlos_atmosphere_default() -> NlosAtmosphere {
    AtmosphereParams::default().into()
}

#[no_mangle]
pub extern "C" fn nlos_transport_default() -> NlosTransport {
    TransportConfig::default().into()
}

#[no_mangle]
pub extern "C" fn nlos_source_default() -> NlosSource {
    SourceDetectorParams::default().into()
}

#[no_mangle]
pub extern "C" fn nlos_frame_default() -> NlosFrame {
    FrameSpec::default().into()
}

/// Combined Rayleigh + Mie phase function at scattering cosine `mu`, per sr.
///
/// # Safety
/// `atm` and `out_value` must be valid pointers or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_combined_phase(
    mu: f64,
    atm: *const NlosAtmosphere,
    out_value: *mut f64,
) -> NlosStatus {
    guard(|| {
        let a: AtmosphereParams = (*deref(atm, "atm")?).into();
        let v = atmosphere::combined_phase(mu, &a)?;
        *out(out_value, "out_value")? = v;
        Ok(())
    })
}

/// Monte Carlo impulse response. The result depends only on the inputs and
/// `seed`, not on the number of worker threads.
///
/// # Safety
/// All pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_simulate_impulse_response(
    geometry: *const NlosGeometry,
    atm: *const NlosAtmosphere,
    transport: *const NlosTransport,
    seed: u64,
    out_ir: *mut *mut NlosImpulseResponse,
) -> NlosStatus {
    guard(|| {
        let g: Geometry = (*deref(geometry, "geometry")?).into();
        let a: AtmosphereParams = (*deref(atm, "atm")?).into();
        let t: TransportConfig = (*deref(transport, "transport")?).into();
        let slot = out(out_ir, "out_ir")?;
        let ir = channel::simulate_impulse_response(&g, &a, &t, seed)?;
        *slot = boxed(NlosImpulseResponse(ir));
        Ok(())
    })
}

/// Wrap caller-supplied arrival probabilities (per launched photon, bins
/// starting at emission) as an impulse response.
///
/// # Safety
/// `bins` must point to `len` readable doubles; `out_ir` must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_impulse_response_from_bins(
    bins: *const f64,
    len: usize,
    bin_width: f64,
    out_ir: *mut *mut NlosImpulseResponse,
) -> NlosStatus {
    guard(|| {
        let values = slice(bins, len, "bins")?;
        if len == 0 {
            return Err(Error::Empty("bins".into()).into());
        }
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(fail(
                NlosStatus::InvalidParameter,
                "`bin_width` must be > 0",
            ));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(fail(
                NlosStatus::InvalidParameter,
                "`bins` must be finite and >= 0",
            ));
        }
        let slot = out(out_ir, "out_ir")?;
        let ir = ImpulseResponse {
            bins: values.to_vec(),
            ..ImpulseResponse::zeros(bin_width, len, 1)
        };
        *slot = boxed(NlosImpulseResponse(ir));
        Ok(())
    })
}

/// # Safety
/// `ir` must come from this library and not have been freed, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_impulse_response_free(ir: *mut NlosImpulseResponse) {
    if !ir.is_null() {
        drop(Box::from_raw(ir));
    }
}

/// Number of bins; 0 for NULL.
///
/// # Safety
/// `ir` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_impulse_response_len(ir: *const NlosImpulseResponse) -> usize {
    ir.as_ref().map_or(0, |h| h.0.bins.len())
}

/// Bin width in seconds; NaN for NULL.
///
/// # Safety
/// `ir` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_impulse_response_bin_width(ir: *const NlosImpulseResponse) -> f64 {
    ir.as_ref().map_or(f64::NAN, |h| h.0.bin_width)
}

/// Total arrival probability per launched photon; NaN for NULL.
///
/// # Safety
/// `ir` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_impulse_response_total(ir: *const NlosImpulseResponse) -> f64 {
    ir.as_ref().map_or(f64::NAN, |h| h.0.total())
}

/// Copy the bins into `buffer`, which must hold at least
/// `nlos_impulse_response_len` values.
///
/// # Safety
/// `buffer` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nlos_impulse_response_copy_bins(
    ir: *const NlosImpulseResponse,
    buffer: *mut f64,
    capacity: usize,
) -> NlosStatus {
    guard(|| copy_into(&deref(ir, "ir")?.0.bins, buffer, capacity))
}

/// Copy the per-bin squared standard errors.
///
/// # Safety
/// `buffer` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nlos_impulse_response_copy_variance(
    ir: *const NlosImpulseResponse,
    buffer: *mut f64,
    capacity: usize,
) -> NlosStatus {
    guard(|| copy_into(&deref(ir, "ir")?.0.variance, buffer, capacity))
}

/// Boundaries of the response support at `threshold_fraction` of its peak.
///
/// # Safety
/// Pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_pulse_broadening(
    ir: *const NlosImpulseResponse,
    threshold_fraction: f64,
    out_result: *mut NlosBroadening,
) -> NlosStatus {
    guard(|| {
        let h = deref(ir, "ir")?;
        let slot = out(out_result, "out_result")?;
        let b = channel::pulse_broadening(&h.0, threshold_fraction)?;
        *slot = NlosBroadening {
            left_boundary: b.left_boundary,
            right_boundary: b.right_boundary,
            broadening: b.broadening,
        };
        Ok(())
    })
}

/// Analytic OOK bit error rate under the ML counting threshold. The
/// threshold itself is written to `out_threshold` when that is not NULL.
///
/// # Safety
/// `out_ber` must be valid or NULL; `out_threshold` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_ook_ber(
    lambda_s: f64,
    background_rate: f64,
    window_length: f64,
    out_ber: *mut f64,
    out_threshold: *mut u64,
) -> NlosStatus {
    guard(|| {
        let slot = out(out_ber, "out_ber")?;
        let point = OokOperatingPoint::new(lambda_s, background_rate, window_length)?;
        let ber = detection::ook_ber_analytic(&point)?;
        if !out_threshold.is_null() {
            *out_threshold = detection::ml_threshold(&point)?;
        }
        *slot = ber;
        Ok(())
    })
}

/// Pulse energy, J, giving `target_lambda_s` expected signal photoelectrons
/// through `ir` with the other parameters of `source`.
///
/// # Safety
/// Pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_calibrate_pulse_energy(
    ir: *const NlosImpulseResponse,
    source: *const NlosSource,
    target_lambda_s: f64,
    out_energy: *mut f64,
) -> NlosStatus {
    guard(|| {
        let h = deref(ir, "ir")?;
        let s: SourceDetectorParams = (*deref(source, "source")?).into();
        let slot = out(out_energy, "out_energy")?;
        *slot = signal::calibrate_pulse_energy(&h.0, &s, target_lambda_s)?;
        Ok(())
    })
}

/// Draw one chip-binned photoelectron trace.
///
/// # Safety
/// Pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_generate_trace(
    ir: *const NlosImpulseResponse,
    source: *const NlosSource,
    frame: *const NlosFrame,
    seed: u64,
    out_trace: *mut *mut NlosTrace,
) -> NlosStatus {
    guard(|| {
        let h = deref(ir, "ir")?;
        let s: SourceDetectorParams = (*deref(source, "source")?).into();
        let f: FrameSpec = (*deref(frame, "frame")?).into();
        let slot = out(out_trace, "out_trace")?;
        let rate = signal::signal_rate(&h.0, &s)?;
        let trace = signal::generate_trace(&rate, &s, &f, seed)?;
        *slot = boxed(NlosTrace(trace));
        Ok(())
    })
}

/// Wrap measured per-chip counts as a trace with no known truth window.
///
/// # Safety
/// `counts` must point to `len` readable values; `out_trace` valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_trace_from_counts(
    counts: *const u32,
    len: usize,
    chip_duration: f64,
    out_trace: *mut *mut NlosTrace,
) -> NlosStatus {
    guard(|| {
        let values = slice(counts, len, "counts")?;
        if len == 0 {
            return Err(Error::Empty("counts".into()).into());
        }
        if !(chip_duration.is_finite() && chip_duration > 0.0) {
            return Err(fail(
                NlosStatus::InvalidParameter,
                "`chip_duration` must be > 0",
            ));
        }
        let slot = out(out_trace, "out_trace")?;
        *slot = boxed(NlosTrace(PhotoelectronTrace {
            chip_duration,
            counts: values.to_vec(),
            truth_window: None,
        }));
        Ok(())
    })
}

/// # Safety
/// `trace` must come from this library and not have been freed, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_trace_free(trace: *mut NlosTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of chips; 0 for NULL.
///
/// # Safety
/// `trace` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_trace_len(trace: *const NlosTrace) -> usize {
    trace.as_ref().map_or(0, |h| h.0.counts.len())
}

/// # Safety
/// `buffer` must point to `capacity` writable values.
#[no_mangle]
pub unsafe extern "C" fn nlos_trace_copy_counts(
    trace: *const NlosTrace,
    buffer: *mut u32,
    capacity: usize,
) -> NlosStatus {
    guard(|| copy_into(&deref(trace, "trace")?.0.counts, buffer, capacity))
}

/// True pulse window of a synthesized trace. Returns `NLOS_STATUS_NO_SIGNAL`
/// when the trace carries no pulse or was built from raw counts.
///
/// # Safety
/// Pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_trace_truth(
    trace: *const NlosTrace,
    out_start: *mut f64,
    out_end: *mut f64,
) -> NlosStatus {
    guard(|| {
        let h = deref(trace, "trace")?;
        let s = out(out_start, "out_start")?;
        let e = out(out_end, "out_end")?;
        let (a, b) = h.0.truth_window.ok_or(Error::NoSignal)?;
        *s = a;
        *e = b;
        Ok(())
    })
}

/// Correlation template from the mean of `count` impulse responses.
///
/// # Safety
/// `responses` must point to `count` live handles.
#[no_mangle]
pub unsafe extern "C" fn nlos_build_template(
    responses: *const *const NlosImpulseResponse,
    count: usize,
    chip_duration: f64,
    boundary_fraction: f64,
    out_template: *mut *mut NlosTemplate,
) -> NlosStatus {
    guard(|| {
        let handles = slice(responses, count, "responses")?;
        let irs = handles
            .iter()
            .map(|&p| deref(p, "responses[i]").map(|h| h.0.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let slot = out(out_template, "out_template")?;
        let t = localization::build_template(&irs, chip_duration, boundary_fraction)?;
        *slot = boxed(NlosTemplate(t));
        Ok(())
    })
}

/// Template from explicit chip values; normalized to unit sum.
///
/// # Safety
/// `values` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn nlos_template_from_values(
    values: *const f64,
    len: usize,
    chip_duration: f64,
    out_template: *mut *mut NlosTemplate,
) -> NlosStatus {
    guard(|| {
        let v = slice(values, len, "values")?;
        let slot = out(out_template, "out_template")?;
        *slot = boxed(NlosTemplate(PulseTemplate::new(chip_duration, v.to_vec())?));
        Ok(())
    })
}

/// # Safety
/// `template` must come from this library and not have been freed, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_template_free(template: *mut NlosTemplate) {
    if !template.is_null() {
        drop(Box::from_raw(template));
    }
}

/// Number of template chips; 0 for NULL.
///
/// # Safety
/// `template` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_template_len(template: *const NlosTemplate) -> usize {
    template.as_ref().map_or(0, |h| h.0.len())
}

/// # Safety
/// `buffer` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nlos_template_copy_values(
    template: *const NlosTemplate,
    buffer: *mut f64,
    capacity: usize,
) -> NlosStatus {
    guard(|| copy_into(&deref(template, "template")?.0.values, buffer, capacity))
}

/// Smallest window count threshold whose background-only exceedance
/// probability is at most `false_alarm_probability`.
///
/// # Safety
/// `out_threshold` must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_neyman_pearson_threshold(
    background_rate: f64,
    window_duration: f64,
    false_alarm_probability: f64,
    out_threshold: *mut u64,
) -> NlosStatus {
    guard(|| {
        let slot = out(out_threshold, "out_threshold")?;
        *slot = localization::neyman_pearson_threshold(
            background_rate,
            window_duration,
            false_alarm_probability,
        )?;
        Ok(())
    })
}

/// Default correlation threshold for `template` under `background_rate`.
///
/// # Safety
/// Pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_default_correlation_threshold(
    template: *const NlosTemplate,
    background_rate: f64,
    out_threshold: *mut f64,
) -> NlosStatus {
    guard(|| {
        let h = deref(template, "template")?;
        let slot = out(out_threshold, "out_threshold")?;
        *slot = localization::default_correlation_threshold(&h.0, background_rate);
        Ok(())
    })
}

/// Sliding-window counting localizer. Returns `NLOS_STATUS_NOT_FOUND` when
/// no window exceeds `threshold`.
///
/// # Safety
/// Pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_localize_counting(
    trace: *const NlosTrace,
    window_chips: usize,
    threshold: u64,
    out_window: *mut NlosWindow,
) -> NlosStatus {
    guard(|| {
        let h = deref(trace, "trace")?;
        let slot = out(out_window, "out_window")?;
        match localization::localize_counting(&h.0, window_chips, threshold)? {
            Some(w) => {
                *slot = w.into();
                Ok(())
            }
            None => Err(fail(
                NlosStatus::NotFound,
                "no window exceeded the threshold",
            )),
        }
    })
}

/// Template-matching localizer. Returns `NLOS_STATUS_NOT_FOUND` when the
/// correlation never exceeds `threshold`.
///
/// # Safety
/// Pointers must be valid or NULL.
#[no_mangle]
pub unsafe extern "C" fn nlos_localize_correlation(
    trace: *const NlosTrace,
    template: *const NlosTemplate,
    threshold: f64,
    end_rule: NlosCorrelationEnd,
    out_window: *mut NlosWindow,
) -> NlosStatus {
    guard(|| {
        let h = deref(trace, "trace")?;
        let t = deref(template, "template")?;
        let slot = out(out_window, "out_window")?;
        let rule = match end_rule {
            NlosCorrelationEnd::WindowStart => CorrelationEnd::WindowStart,
            NlosCorrelationEnd::WindowEnd => CorrelationEnd::WindowEnd,
        };
        match localization::localize_correlation(&h.0, &t.0, threshold, rule)? {
            Some(w) => {
                *slot = w.into();
                Ok(())
            }
            None => Err(fail(
                NlosStatus::NotFound,
                "correlation never exceeded the threshold",
            )),
        }
    })
}
