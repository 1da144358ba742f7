//! C ABI over `stc-core`.
//!
//! Objects cross the boundary as opaque handles created by a `*_new`,
//! `*_read`, `*_load` or producing call and released with the matching
//! `*_free`. Every fallible call returns an [`StcStatus`]; the message of the
//! most recent failure on the calling thread is available through
//! [`stc_last_error`]. Panics never unwind into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use stc_core::audio::{self, AudioClip};
use stc_core::toolkit::Converter;
use stc_core::vocoder::{self, stcf, VocoderFrames};
use stc_core::{features, StcError, Technique};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Format = 3,
    Io = 4,
    Config = 5,
    Data = 6,
    Training = 7,
    Unsupported = 8,
    Utf8 = 9,
    Panic = 10,
}

/// Technique codes accepted wherever a `technique` argument appears.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StcTechnique {
    Chest = 0,
    Falsetto = 1,
    Whistle = 2,
    Raspy = 3,
}

/// Mono audio clip.
pub struct StcAudio(AudioClip);

/// Vocoder parameters on the 5 ms frame grid.
pub struct StcFrames(VocoderFrames);

/// A loaded conversion model.
pub struct StcConverter(Converter);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &StcError) -> StcStatus {
    match e {
        StcError::Format(_) | StcError::Json(_) => StcStatus::Format,
        StcError::Unsupported(_) => StcStatus::Unsupported,
        StcError::Argument(_) => StcStatus::InvalidArgument,
        StcError::Config(_) => StcStatus::Config,
        StcError::Data(_) => StcStatus::Data,
        StcError::Training(_) => StcStatus::Training,
        StcError::Io(_) => StcStatus::Io,
    }
}

struct Fail(StcStatus, String);

impl From<StcError> for Fail {
    fn from(e: StcError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(StcStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> StcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StcStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            StcStatus::Panic
        }
    }
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(StcStatus::Utf8, "path is not valid UTF-8".into()))
}

unsafe fn out<T>(slot: *mut *mut T, value: T) -> Result<(), Fail> {
    if slot.is_null() {
        return Err(null("output pointer"));
    }
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn technique(code: u32) -> Result<Technique, Fail> {
    Technique::from_index(code as usize)
        .ok_or_else(|| Fail(StcStatus::InvalidArgument, format!("unknown technique code {code}")))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL, or
/// 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn stc_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn stc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a technique name such as `"whistle"` into its code.
///
/// # Safety
/// `name` must be a NUL-terminated string; `code` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stc_technique_parse(name: *const c_char, code: *mut u32) -> StcStatus {
    guard(|| {
        let name = path(name)?;
        let t: Technique = name.parse()?;
        if code.is_null() {
            return Err(null("code"));
        }
        *code = t.index() as u32;
        Ok(())
    })
}

/// Copies `len` samples into a new clip.
///
/// # Safety
/// `samples` must point to `len` readable floats; `clip` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stc_audio_new(
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    clip: *mut *mut StcAudio,
) -> StcStatus {
    guard(|| {
        if samples.is_null() && len > 0 {
            return Err(null("samples"));
        }
        let data = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(samples, len).to_vec()
        };
        out(clip, StcAudio(AudioClip::new(data, sample_rate)?))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `clip` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stc_audio_read_wav(file: *const c_char, clip: *mut *mut StcAudio) -> StcStatus {
    guard(|| out(clip, StcAudio(audio::read_wav(path(file)?)?)))
}

/// # Safety
/// `clip` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn stc_audio_write_wav(clip: *const StcAudio, file: *const c_char) -> StcStatus {
    guard(|| Ok(audio::write_wav(&get(clip, "clip")?.0, path(file)?)?))
}

/// Number of samples; 0 for a null handle.
///
/// # Safety
/// `clip` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stc_audio_len(clip: *const StcAudio) -> usize {
    clip.as_ref().map_or(0, |c| c.0.len())
}

/// Sample rate in Hz; 0 for a null handle.
///
/// # Safety
/// `clip` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stc_audio_sample_rate(clip: *const StcAudio) -> u32 {
    clip.as_ref().map_or(0, |c| c.0.sample_rate())
}

/// Borrowed pointer to the samples, valid until the clip is freed.
///
/// # Safety
/// `clip` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stc_audio_samples(clip: *const StcAudio) -> *const f64 {
    clip.as_ref().map_or(ptr::null(), |c| c.0.samples().as_ptr())
}

/// # Safety
/// `clip` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stc_audio_free(clip: *mut StcAudio) {
    if !clip.is_null() {
        drop(Box::from_raw(clip));
    }
}

/// Vocoder analysis; the clip is resampled to the analysis rate first.
///
/// # Safety
/// `clip` must be a live handle; `frames` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stc_analyze(clip: *const StcAudio, frames: *mut *mut StcFrames) -> StcStatus {
    guard(|| {
        let clip = get(clip, "clip")?.0.to_analysis_rate()?;
        out(frames, StcFrames(vocoder::analyze(&clip)?))
    })
}

/// # Safety
/// `frames` must be a live handle; `clip` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stc_synthesize(frames: *const StcFrames, clip: *mut *mut StcAudio) -> StcStatus {
    guard(|| out(clip, StcAudio(vocoder::synthesize(&get(frames, "frames")?.0)?)))
}

/// New frames with every voiced F0 multiplied by `2^(semitones / 12)`.
///
/// # Safety
/// `frames` must be a live handle; `shifted` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stc_frames_pitch_shift(
    frames: *const StcFrames,
    semitones: f64,
    shifted: *mut *mut StcFrames,
) -> StcStatus {
    guard(|| {
        if !semitones.is_finite() {
            return Err(Fail(StcStatus::InvalidArgument, "semitones must be finite".into()));
        }
        out(shifted, StcFrames(get(frames, "frames")?.0.pitch_shifted(semitones)))
    })
}

/// Frame count; 0 for a null handle.
///
/// # Safety
/// `frames` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stc_frames_len(frames: *const StcFrames) -> usize {
    frames.as_ref().map_or(0, |f| f.0.len())
}

/// Borrowed F0 track in Hz (0 = unvoiced), `stc_frames_len` values.
///
/// # Safety
/// `frames` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stc_frames_f0(frames: *const StcFrames) -> *const f64 {
    frames.as_ref().map_or(ptr::null(), |f| f.0.f0.as_ptr())
}

/// Writes an STCF file including the 60-dimensional network features.
///
/// # Safety
/// `frames` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn stc_frames_write(frames: *const StcFrames, file: *const c_char) -> StcStatus {
    guard(|| {
        let frames = &get(frames, "frames")?.0;
        let feats = features::encode(frames, None)?;
        stcf::write(
            path(file)?,
            &stcf::StcfFile {
                frames: frames.clone(),
                features: Some(feats.to_chunk()),
            },
        )?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `frames` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stc_frames_read(file: *const c_char, frames: *mut *mut StcFrames) -> StcStatus {
    guard(|| out(frames, StcFrames(stcf::read(path(file)?)?.frames)))
}

/// # Safety
/// `frames` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stc_frames_free(frames: *mut StcFrames) {
    if !frames.is_null() {
        drop(Box::from_raw(frames));
    }
}

/// Loads a trained checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `converter` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stc_converter_load(file: *const c_char, converter: *mut *mut StcConverter) -> StcStatus {
    guard(|| out(converter, StcConverter(Converter::load(path(file)?)?)))
}

/// Converts `clip` toward `technique` (an [`StcTechnique`] code) and shifts
/// F0 by `semitones`.
///
/// # Safety
/// `converter` and `clip` must be live handles; `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stc_converter_convert(
    converter: *const StcConverter,
    clip: *const StcAudio,
    technique_code: u32,
    semitones: f64,
    result: *mut *mut StcAudio,
) -> StcStatus {
    guard(|| {
        let conv = get(converter, "converter")?;
        let clip = get(clip, "clip")?;
        let target = technique(technique_code)?;
        if !semitones.is_finite() {
            return Err(Fail(StcStatus::InvalidArgument, "semitones must be finite".into()));
        }
        out(result, StcAudio(conv.0.convert_clip(&clip.0, target, semitones)?.audio))
    })
}

/// # Safety
/// `converter` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stc_converter_free(converter: *mut StcConverter) {
    if !converter.is_null() {
        drop(Box::from_raw(converter));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_error() -> String {
        let mut buf = vec![0 as c_char; 256];
        let n = unsafe { stc_last_error(buf.as_mut_ptr(), buf.len()) };
        let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
        assert_eq!(n, s.len());
        s
    }

    #[test]
    fn technique_codes_match_the_core_order() {
        for t in Technique::ALL {
            let name = CString::new(t.name()).unwrap();
            let mut code = 99;
            assert_eq!(unsafe { stc_technique_parse(name.as_ptr(), &mut code) }, StcStatus::Ok);
            assert_eq!(code, t.index() as u32);
        }
        assert_eq!(StcTechnique::Whistle as u32, Technique::Whistle.index() as u32);
        let bad = CString::new("belting").unwrap();
        let mut code = 0;
        assert_eq!(
            unsafe { stc_technique_parse(bad.as_ptr(), &mut code) },
            StcStatus::InvalidArgument
        );
        assert!(last_error().contains("chest, falsetto, whistle, raspy"));
    }

    #[test]
    fn null_handles_are_reported() {
        let mut frames = ptr::null_mut();
        assert_eq!(unsafe { stc_analyze(ptr::null(), &mut frames) }, StcStatus::NullPointer);
        assert!(frames.is_null());
        assert_eq!(last_error(), "clip is null");
        assert_eq!(unsafe { stc_audio_len(ptr::null()) }, 0);
        unsafe { stc_audio_free(ptr::null_mut()) };
    }

    #[test]
    fn truncated_error_buffer_is_terminated() {
        let mut clip = ptr::null_mut();
        let missing = CString::new("/nonexistent/dir/x.wav").unwrap();
        assert_ne!(unsafe { stc_audio_read_wav(missing.as_ptr(), &mut clip) }, StcStatus::Ok);
        let mut buf = [1 as c_char; 4];
        let n = unsafe { stc_last_error(buf.as_mut_ptr(), buf.len()) };
        assert!(n > 3);
        assert_eq!(buf[3], 0);
    }
}
