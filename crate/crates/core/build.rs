use std::path::Path;

/// Locate a LAPACK implementation for the dense symmetric eigensolver.
///
/// Set `FRONTLAB_LAPACK_DIR` / `FRONTLAB_LAPACK_LIB` to override the probe.
fn main() {
    println!("cargo:rerun-if-env-changed=FRONTLAB_LAPACK_DIR");
    println!("cargo:rerun-if-env-changed=FRONTLAB_LAPACK_LIB");

    if let Ok(dir) = std::env::var("FRONTLAB_LAPACK_DIR") {
        println!("cargo:rustc-link-search=native={dir}");
    }
    if let Ok(lib) = std::env::var("FRONTLAB_LAPACK_LIB") {
        println!("cargo:rustc-link-lib=dylib={lib}");
        return;
    }

    // Prefer OpenBLAS (bundles LAPACK), fall back to reference LAPACK.
    let openblas_dirs = [
        "/usr/lib/x86_64-linux-gnu/openblas-pthread",
        "/usr/lib/x86_64-linux-gnu/openblas-openmp",
        "/usr/lib/x86_64-linux-gnu/openblas-serial",
        "/usr/lib/x86_64-linux-gnu",
        "/usr/lib64",
        "/usr/lib",
        "/opt/homebrew/opt/openblas/lib",
    ];
    for dir in openblas_dirs {
        if Path::new(dir).join("libopenblas.so").exists()
            || Path::new(dir).join("libopenblas.dylib").exists()
        {
            println!("cargo:rustc-link-search=native={dir}");
            println!("cargo:rustc-link-lib=dylib=openblas");
            return;
        }
    }
    let lapack_dirs = [
        "/usr/lib/x86_64-linux-gnu/lapack",
        "/usr/lib/x86_64-linux-gnu",
        "/usr/lib64",
        "/usr/lib",
    ];
    for dir in lapack_dirs {
        if Path::new(dir).join("liblapack.so").exists() {
            println!("cargo:rustc-link-search=native={dir}");
            println!("cargo:rustc-link-lib=dylib=lapack");
            println!("cargo:rustc-link-lib=dylib=blas");
            return;
        }
    }
    // Last resort: assume the linker can find it by name.
    println!("cargo:rustc-link-lib=dylib=lapack");
}
