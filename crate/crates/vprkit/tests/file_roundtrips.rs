//! File-level round trips through real paths, complementing the byte-level
//! tests inside the io module.

use vprkit::data::{DescriptorMatrix, GrayImage};
use vprkit::io;

#[test]
fn pgm_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("image.pgm");
    let data: Vec<f64> = (0..30).map(|i| (i * 8 % 256) as f64 / 255.0).collect();
    let image = GrayImage::new(5, 6, data).unwrap();
    io::write_pgm(&image, &path).unwrap();
    let back = io::load_pgm(&path).unwrap();
    assert_eq!(back, image);
}

#[test]
fn descriptor_file_round_trip_with_labels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("descriptors.vprd");
    let m = DescriptorMatrix::new(3, 2, vec![0.5, -1.5, 2.0, 0.0, -0.25, 8.0])
        .unwrap()
        .with_labels(vec!["a".into(), "b".into(), "a".into()])
        .unwrap();
    io::write_descriptors(&m, &path).unwrap();
    assert_eq!(io::read_descriptors(&path).unwrap(), m);
}

#[test]
fn similarity_file_preserves_exclusion_sentinels() {
    use vprkit::data::{MetricTag, SimilarityMatrix};
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("similarity.vprd");
    let s = SimilarityMatrix::new(
        2,
        2,
        vec![0.5, f64::NEG_INFINITY, -0.25, 1.0],
        MetricTag::Refined,
    )
    .unwrap();
    io::write_similarity(&s, &path).unwrap();
    let back = io::read_similarity(&path).unwrap();
    assert_eq!(back.values(), s.values());
    assert_eq!(back.metric(), MetricTag::External);
}

#[test]
fn bool_matrix_and_pair_files() {
    let dir = tempfile::tempdir().unwrap();
    let bool_path = dir.path().join("matches.vprb");
    let values = vec![true, false, true, true, false, false];
    io::write_bool_matrix(2, 3, &values, &bool_path).unwrap();
    assert_eq!(io::read_bool_matrix(&bool_path).unwrap(), (2, 3, values));

    let pairs_path = dir.path().join("pairs.txt");
    let pairs = vec![(0, 0), (2, 1), (7, 3)];
    io::write_pairs(&pairs, &pairs_path).unwrap();
    assert_eq!(io::read_pairs(&pairs_path).unwrap(), pairs);
}

#[test]
fn missing_files_report_their_path() {
    let err = io::load_pgm("/nonexistent/image.pgm").unwrap_err();
    assert!(err.to_string().contains("/nonexistent/image.pgm"));
}
