//! Dense symmetric eigensolver backed by the system LAPACK (`dsyevd`).

use crate::error::{Error, Result};

extern "C" {
    fn dsyevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );
}

/// Eigenvalues (ascending) of a symmetric matrix stored densely in `a`
/// (`n * n` entries; the storage order is irrelevant for a symmetric matrix).
///
/// With `compute_vectors`, `a` is overwritten with the orthonormal
/// eigenvectors in column-major order: eigenvector `j` is `a[j*n..(j+1)*n]`.
pub fn eigh_inplace(a: &mut [f64], n: usize, compute_vectors: bool) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(Error::invalid("a", "matrix buffer length must be n*n"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let jobz = if compute_vectors { b'V' } else { b'N' };
    let uplo = b'L';
    let n_i = n as i32;
    let mut w = vec![0.0f64; n];
    let mut info: i32 = 0;
    // Workspace query.
    let mut work_query = [0.0f64; 1];
    let mut iwork_query = [0i32; 1];
    let minus_one = -1i32;
    unsafe {
        dsyevd_(
            &jobz,
            &uplo,
            &n_i,
            a.as_mut_ptr(),
            &n_i,
            w.as_mut_ptr(),
            work_query.as_mut_ptr(),
            &minus_one,
            iwork_query.as_mut_ptr(),
            &minus_one,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!(
            "dsyevd workspace query failed (info = {info})"
        )));
    }
    let lwork = work_query[0] as i32;
    let liwork = iwork_query[0];
    let mut work = vec![0.0f64; lwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        dsyevd_(
            &jobz,
            &uplo,
            &n_i,
            a.as_mut_ptr(),
            &n_i,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Numerical(format!(
            "dsyevd failed to converge (info = {info})"
        )));
    }
    Ok(w)
}
