//! Knot annotations, square crops with re-parameterized ellipses, and
//! board-level dataset splits.

mod crop;
mod schema;
mod split;
mod via;

pub use crop::{
    generate_crops, reparameterize, reparameterize_inverse, write_crops, CropPolicy, CropRecord,
    DEFAULT_OUT_SIZE,
};
pub use schema::{
    load_annotation_dir, load_annotations, save_annotation, AnnotatedImage, AnnotationFile,
    KnotAnnotation, Surface,
};
pub use split::{split, split_with_ratios, Split, DEFAULT_RATIOS};
pub use via::{board_and_surface, import_via};

/// FNV-1a; used to derive per-image RNG streams that are stable across
/// platforms and toolchain versions.
pub(crate) fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
