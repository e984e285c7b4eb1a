//! Thin safe wrappers over the system BLAS/LAPACK (OpenBLAS).
//!
//! All buffers handed to LAPACK here are column-major. Callers in
//! `decomp` take care of the row-major <-> column-major bookkeeping.

use std::ffi::CStr;
use std::os::raw::{c_char, c_int};
use std::sync::Once;

use cblas_sys::{CBLAS_LAYOUT, CBLAS_TRANSPOSE, CBLAS_UPLO};

use crate::error::{Error, Result};

extern "C" {
    fn openblas_set_num_threads(num_threads: c_int);
    fn openblas_get_num_threads() -> c_int;
    fn openblas_get_corename() -> *const c_char;
}

/// Kernel sets that give wrong LAPACK results in the distro OpenBLAS
/// (0.3.20, dynamic-arch build): blocked QR, SVD and symmetric eigensolves
/// of order above ~30 return non-orthogonal factors. Plain GEMM/SYRK calls
/// are unaffected, so the failure is silent unless checked.
const AVOIDED_CORES: &[&str] = &["SkylakeX", "Cooperlake", "SapphireRapids"];
const FALLBACK_CORE: &str = "Haswell";

static BACKEND: Once = Once::new();

/// Runs once before the first BLAS/LAPACK call. On a dynamic-arch OpenBLAS
/// that picked one of `AVOIDED_CORES`, re-initialises it with
/// `FALLBACK_CORE`. An explicit `OPENBLAS_CORETYPE` is left alone.
fn backend() {
    BACKEND.call_once(|| {
        if std::env::var_os("OPENBLAS_CORETYPE").is_some() {
            return;
        }
        let detected = core_name();
        if !AVOIDED_CORES.iter().any(|c| detected.eq_ignore_ascii_case(c)) {
            return;
        }
        let (Some(quit), Some(init)) = (symbol(c"gotoblas_dynamic_quit"), symbol(c"gotoblas_dynamic_init")) else {
            log::warn!("OpenBLAS core {detected} has known LAPACK defects and cannot be switched; set OPENBLAS_CORETYPE={FALLBACK_CORE}");
            return;
        };
        std::env::set_var("OPENBLAS_CORETYPE", FALLBACK_CORE);
        unsafe {
            quit();
            init();
        }
        log::info!("OpenBLAS core {detected} replaced by {}", core_name());
    });
}

fn symbol(name: &CStr) -> Option<unsafe extern "C" fn()> {
    let p = unsafe { libc::dlsym(libc::RTLD_DEFAULT, name.as_ptr()) };
    (!p.is_null()).then(|| unsafe { std::mem::transmute::<*mut libc::c_void, unsafe extern "C" fn()>(p) })
}

fn core_name() -> String {
    let p = unsafe { openblas_get_corename() };
    if p.is_null() {
        return String::from("unknown");
    }
    unsafe { CStr::from_ptr(p) }.to_string_lossy().trim().to_string()
}

/// Kernel set the backend is running on.
pub(crate) fn active_core() -> String {
    backend();
    core_name()
}

pub(crate) fn set_num_threads(n: usize) {
    backend();
    let n = n.clamp(1, c_int::MAX as usize) as c_int;
    unsafe { openblas_set_num_threads(n) }
}

pub(crate) fn num_threads() -> usize {
    backend();
    unsafe { openblas_get_num_threads().max(1) as usize }
}

fn to_int(n: usize, what: &str) -> Result<c_int> {
    c_int::try_from(n).map_err(|_| Error::Dimension(format!("{what} = {n} exceeds LAPACK index range")))
}

fn ch(c: u8) -> *const c_char {
    // LAPACK reads a single character; a static byte is enough.
    match c {
        b'N' => b"N".as_ptr() as *const c_char,
        b'T' => b"T".as_ptr() as *const c_char,
        b'S' => b"S".as_ptr() as *const c_char,
        b'V' => b"V".as_ptr() as *const c_char,
        b'I' => b"I".as_ptr() as *const c_char,
        b'L' => b"L".as_ptr() as *const c_char,
        b'U' => b"U".as_ptr() as *const c_char,
        _ => unreachable!("unsupported LAPACK flag"),
    }
}

/// Row-major `C = op(A)·op(B)` where `op(A)` is `m×k` and `op(B)` is `k×n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    trans_a: bool,
    trans_b: bool,
    m: usize,
    n: usize,
    k: usize,
    a: &[f64],
    lda: usize,
    b: &[f64],
    ldb: usize,
    c: &mut [f64],
) {
    debug_assert_eq!(c.len(), m * n);
    backend();
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let ta = if trans_a {
        CBLAS_TRANSPOSE::CblasTrans
    } else {
        CBLAS_TRANSPOSE::CblasNoTrans
    };
    let tb = if trans_b {
        CBLAS_TRANSPOSE::CblasTrans
    } else {
        CBLAS_TRANSPOSE::CblasNoTrans
    };
    unsafe {
        cblas_sys::cblas_dgemm(
            CBLAS_LAYOUT::CblasRowMajor,
            ta,
            tb,
            m as c_int,
            n as c_int,
            k as c_int,
            1.0,
            a.as_ptr(),
            lda as c_int,
            b.as_ptr(),
            ldb as c_int,
            0.0,
            c.as_mut_ptr(),
            n as c_int,
        );
    }
}

/// Gram matrix of a row-major `rows×cols` buffer: `AᵀA` when `transpose`
/// is true (`cols×cols`), otherwise `AAᵀ` (`rows×rows`). Both triangles
/// are filled on return.
pub(crate) fn gram(a: &[f64], rows: usize, cols: usize, transpose: bool) -> Vec<f64> {
    backend();
    let (n, k) = if transpose { (cols, rows) } else { (rows, cols) };
    let mut out = vec![0.0; n * n];
    let trans = if transpose {
        CBLAS_TRANSPOSE::CblasTrans
    } else {
        CBLAS_TRANSPOSE::CblasNoTrans
    };
    unsafe {
        cblas_sys::cblas_dsyrk(
            CBLAS_LAYOUT::CblasRowMajor,
            CBLAS_UPLO::CblasUpper,
            trans,
            n as c_int,
            k as c_int,
            1.0,
            a.as_ptr(),
            cols as c_int,
            0.0,
            out.as_mut_ptr(),
            n as c_int,
        );
    }
    for i in 0..n {
        for j in 0..i {
            out[i * n + j] = out[j * n + i];
        }
    }
    out
}

pub(crate) struct RawSvd {
    /// `m×k` column-major.
    pub u: Vec<f64>,
    pub s: Vec<f64>,
    /// `k×n` column-major.
    pub vt: Vec<f64>,
}

/// Thin divide-and-conquer SVD (`dgesdd`, `jobz = 'S'`) of a column-major `m×n` buffer.
pub(crate) fn gesdd(mut a: Vec<f64>, m: usize, n: usize) -> Result<RawSvd> {
    backend();
    let k = m.min(n);
    let (mi, ni, ki) = (to_int(m, "rows")?, to_int(n, "cols")?, to_int(k, "rank")?);
    let mut s = vec![0.0; k];
    let mut u = vec![0.0; m * k];
    let mut vt = vec![0.0; k * n];
    let mut iwork = vec![0 as c_int; 8 * k.max(1)];
    let mut info: c_int = 0;
    let mut wq = 0.0f64;
    let query: c_int = -1;
    let ldvt = ki.max(1);
    unsafe {
        lapack_sys::dgesdd_(
            ch(b'S'),
            &mi,
            &ni,
            a.as_mut_ptr(),
            &mi,
            s.as_mut_ptr(),
            u.as_mut_ptr(),
            &mi,
            vt.as_mut_ptr(),
            &ldvt,
            &mut wq,
            &query,
            iwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!(
            "dgesdd workspace query failed (info = {info})"
        )));
    }
    let lwork = (wq as usize).max(1);
    let mut work = vec![0.0; lwork];
    let lwork_i = to_int(lwork, "workspace")?;
    unsafe {
        lapack_sys::dgesdd_(
            ch(b'S'),
            &mi,
            &ni,
            a.as_mut_ptr(),
            &mi,
            s.as_mut_ptr(),
            u.as_mut_ptr(),
            &mi,
            vt.as_mut_ptr(),
            &ldvt,
            work.as_mut_ptr(),
            &lwork_i,
            iwork.as_mut_ptr(),
            &mut info,
        );
    }
    match info {
        0 => Ok(RawSvd { u, s, vt }),
        i if i > 0 => Err(Error::Numerical(format!("SVD did not converge (dgesdd info = {i})"))),
        i => Err(Error::Numerical(format!("dgesdd rejected argument {}", -i))),
    }
}

/// Householder QR of a column-major `m×n` buffer (`m ≥ n`).
/// Returns `(q, r)`: `q` is `m×n` column-major, `r` is `n×n` column-major upper triangular.
pub(crate) fn geqrf_orgqr(mut a: Vec<f64>, m: usize, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    backend();
    let (mi, ni) = (to_int(m, "rows")?, to_int(n, "cols")?);
    let mut tau = vec![0.0; n];
    let mut info: c_int = 0;
    let mut wq = 0.0f64;
    let query: c_int = -1;
    unsafe {
        lapack_sys::dgeqrf_(
            &mi,
            &ni,
            a.as_mut_ptr(),
            &mi,
            tau.as_mut_ptr(),
            &mut wq,
            &query,
            &mut info,
        );
    }
    let lwork = (wq as usize).max(n).max(1);
    let mut work = vec![0.0; lwork];
    let lwork_i = to_int(lwork, "workspace")?;
    unsafe {
        lapack_sys::dgeqrf_(
            &mi,
            &ni,
            a.as_mut_ptr(),
            &mi,
            tau.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork_i,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dgeqrf failed (info = {info})")));
    }
    let mut r = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..=j {
            r[j * n + i] = a[j * m + i];
        }
    }
    unsafe {
        lapack_sys::dorgqr_(
            &mi,
            &ni,
            &ni,
            a.as_mut_ptr(),
            &mi,
            tau.as_ptr(),
            &mut wq,
            &query,
            &mut info,
        );
    }
    let lwork = (wq as usize).max(n).max(1);
    if work.len() < lwork {
        work.resize(lwork, 0.0);
    }
    let lwork_i = to_int(work.len(), "workspace")?;
    unsafe {
        lapack_sys::dorgqr_(
            &mi,
            &ni,
            &ni,
            a.as_mut_ptr(),
            &mi,
            tau.as_ptr(),
            work.as_mut_ptr(),
            &lwork_i,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dorgqr failed (info = {info})")));
    }
    Ok((a, r))
}

/// Largest `k` eigenpairs of a symmetric `n×n` matrix (`dsyevr`, index range).
/// Eigenvalues come back ascending; eigenvectors are `n×k` column-major.
pub(crate) fn syevr_top(mut a: Vec<f64>, n: usize, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    debug_assert!(k >= 1 && k <= n);
    backend();
    let ni = to_int(n, "order")?;
    let il = to_int(n - k + 1, "index")?;
    let iu = ni;
    let mut found: c_int = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n * k];
    let mut isuppz = vec![0 as c_int; 2 * k];
    let mut info: c_int = 0;
    let mut wq = 0.0f64;
    let mut iwq: c_int = 0;
    let query: c_int = -1;
    let zero = 0.0f64;
    unsafe {
        lapack_sys::dsyevr_(
            ch(b'V'),
            ch(b'I'),
            ch(b'L'),
            &ni,
            a.as_mut_ptr(),
            &ni,
            &zero,
            &zero,
            &il,
            &iu,
            &zero,
            &mut found,
            w.as_mut_ptr(),
            z.as_mut_ptr(),
            &ni,
            isuppz.as_mut_ptr(),
            &mut wq,
            &query,
            &mut iwq,
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!(
            "dsyevr workspace query failed (info = {info})"
        )));
    }
    let lwork = (wq as usize).max(1);
    let liwork = (iwq as usize).max(1);
    let mut work = vec![0.0; lwork];
    let mut iwork = vec![0 as c_int; liwork];
    let (lwork_i, liwork_i) = (to_int(lwork, "workspace")?, to_int(liwork, "workspace")?);
    unsafe {
        lapack_sys::dsyevr_(
            ch(b'V'),
            ch(b'I'),
            ch(b'L'),
            &ni,
            a.as_mut_ptr(),
            &ni,
            &zero,
            &zero,
            &il,
            &iu,
            &zero,
            &mut found,
            w.as_mut_ptr(),
            z.as_mut_ptr(),
            &ni,
            isuppz.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork_i,
            iwork.as_mut_ptr(),
            &liwork_i,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dsyevr failed (info = {info})")));
    }
    if found as usize != k {
        return Err(Error::Numerical(format!(
            "dsyevr returned {found} eigenpairs, expected {k}"
        )));
    }
    w.truncate(k);
    Ok((w, z))
}
