//! Field files against a hand-written corpus.

use std::sync::Arc;

use screenfb::field::ScalarField;
use screenfb::geometry::{Grid, Polygon};
use screenfb::io::{format_field, parse_field, sha256_hex};

const PLANE: &str = include_str!("data/plane_square.field");
const TRIANGLE: &str = include_str!("data/triangle.field");

#[test]
fn plane_on_square_matches_corpus() {
    let g = Arc::new(Grid::build(&Polygon::square(1.0), 0.5).unwrap());
    let u = ScalarField::from_fn(g, |p| p[0] + 2.0 * p[1]);
    let text = format_field(&u, "u");
    assert_eq!(text, PLANE);
    assert_eq!(
        sha256_hex(text.as_bytes()),
        "c1512ac6fbb6912db36a1fa2baec83bb95abdf3f337f8d93f035fd555c1ea4f2"
    );
}

#[test]
fn triangle_mask_writes_na() {
    let poly = Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
    let g = Arc::new(Grid::build(&poly, 0.5).unwrap());
    let u = ScalarField::from_fn(g, |p| p[0]);
    let text = format_field(&u, "u");
    assert_eq!(text, TRIANGLE);
    assert_eq!(
        sha256_hex(text.as_bytes()),
        "af421e62a8aacd061c9794d0795ca6bde62b63b1f48fd4647bf60511c94285fc"
    );
}

#[test]
fn corpus_parses_and_reformats() {
    for text in [PLANE, TRIANGLE] {
        let file = parse_field(text).unwrap();
        let kind = file.header.kind.clone();
        let f = file.into_scalar().unwrap();
        assert_eq!(format_field(&f, &kind), text);
    }
    let tri = parse_field(TRIANGLE).unwrap();
    assert_eq!(tri.values.iter().filter(|v| v.is_none()).count(), 3);
    assert_eq!(tri.values[4], Some(0.5));
}
