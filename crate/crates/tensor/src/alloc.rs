//! Allocator settings for graph evaluation.
//!
//! Evaluation allocates and frees many multi-megabyte buffers per pass. With
//! glibc defaults those go straight to `mmap`/`munmap`, and every reuse pays
//! for fresh zeroed pages. Raising the mmap and trim thresholds keeps freed
//! buffers in the heap for the next pass.

use std::sync::Once;

static TUNE: Once = Once::new();

pub(crate) fn tune_once() {
    TUNE.call_once(tune);
}

#[cfg(all(target_os = "linux", target_env = "gnu"))]
fn tune() {
    // 32 MiB is the largest mmap threshold glibc accepts on 64-bit targets.
    unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 32 << 20);
        libc::mallopt(libc::M_TRIM_THRESHOLD, 1 << 30);
    }
}

#[cfg(not(all(target_os = "linux", target_env = "gnu")))]
fn tune() {}
