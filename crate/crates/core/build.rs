fn main() {
    // LAPACK/BLAS come from the system OpenBLAS.
    println!("cargo:rustc-link-lib=openblas");
}
