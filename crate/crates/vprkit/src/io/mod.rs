//! Bit-exact file formats: PGM images, "VPRD" descriptor matrices,
//! "VPRB" boolean matrices, and index-pair text files.

mod pairs;
mod pgm;
mod vprb;
mod vprd;

pub use pairs::{
    pairs_from_str, pairs_to_string, place_ids_from_str, place_ids_to_string, read_pairs,
    write_pairs,
};
pub use pgm::{load_pgm, parse_pgm, pgm_bytes, write_pgm};
pub use vprb::{bool_matrix_from_bytes, bool_matrix_to_bytes, read_bool_matrix, write_bool_matrix};
pub use vprd::{
    descriptors_from_bytes, descriptors_to_bytes, read_descriptors, read_similarity,
    write_descriptors, write_similarity,
};
