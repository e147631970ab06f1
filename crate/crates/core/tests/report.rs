use gridstudies_core::report::{
    histogram_svg, line_svg, scatter_svg, summary_lines, Histogram, ReportError, Series, Style,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn style() -> Style {
    Style::new("Chart <1> & co", "x", "y")
}

fn count(doc: &roxmltree::Document, tag: &str) -> usize {
    doc.descendants().filter(|n| n.has_tag_name(tag)).count()
}

fn parse(svg: &str) -> roxmltree::Document<'_> {
    let doc = roxmltree::Document::parse(svg).expect("well-formed SVG");
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    doc
}

#[test]
fn two_point_series_is_one_polyline_with_two_vertices() {
    let svg = line_svg(&[Series::new("v", vec![(0.0, 1.0), (2.0, -1.0)])], &style()).unwrap();
    let doc = parse(&svg);
    let lines: Vec<_> = doc
        .descendants()
        .filter(|n| n.has_tag_name("polyline"))
        .collect();
    assert_eq!(lines.len(), 1);
    let pts = lines[0].attribute("points").unwrap();
    assert_eq!(pts.split_whitespace().count(), 2);
}

#[test]
fn title_is_escaped() {
    let svg = line_svg(
        &[Series::new("a&b", vec![(0.0, 0.0), (1.0, 1.0)])],
        &style(),
    )
    .unwrap();
    let doc = parse(&svg);
    let texts: Vec<&str> = doc.descendants().filter_map(|n| n.text()).collect();
    assert!(texts.contains(&"Chart <1> & co"));
    assert!(texts.contains(&"a&b"));
}

#[test]
fn histogram_bars_sum_to_sample_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let v: Vec<f64> = (0..50_000).map(|_| rng.random::<f64>().ln()).collect();
    let (svg, h) = histogram_svg("samples", &v, 40, &style()).unwrap();
    assert_eq!(h.total(), 50_000);
    let doc = parse(&svg);
    let bars: Vec<usize> = doc
        .descendants()
        .filter_map(|n| n.attribute("data-count"))
        .map(|c| c.parse().unwrap())
        .collect();
    assert_eq!(bars.len(), 40);
    assert_eq!(bars.iter().sum::<usize>(), 50_000);
}

#[test]
fn scatter_has_one_marker_per_point() {
    let groups = [
        Series::new("Stable", (0..23).map(|k| (k as f64, 1.0)).collect()),
        Series::new("Unstable", (0..9).map(|k| (k as f64, 2.0)).collect()),
    ];
    let doc_text = scatter_svg(&groups, &style()).unwrap();
    let doc = parse(&doc_text);
    assert_eq!(count(&doc, "circle"), 32);
}

#[test]
fn empty_inputs_are_errors() {
    assert!(matches!(
        line_svg(&[], &style()),
        Err(ReportError::Empty(_))
    ));
    assert!(matches!(
        line_svg(&[Series::new("e", vec![])], &style()),
        Err(ReportError::Empty(_))
    ));
    assert!(matches!(
        scatter_svg(&[Series::new("e", vec![])], &style()),
        Err(ReportError::Empty(_))
    ));
    assert!(matches!(
        Histogram::new(&[], 10),
        Err(ReportError::Empty(_))
    ));
    assert!(Histogram::new(&[1.0], 0).is_err());
    assert!(Histogram::new(&[1.0, f64::NAN], 4).is_err());
    assert!(line_svg(&[Series::new("n", vec![(0.0, f64::INFINITY)])], &style()).is_err());
}

#[test]
fn constant_samples_fill_first_bin() {
    let h = Histogram::new(&[3.0; 7], 5).unwrap();
    assert_eq!(h.counts, vec![7, 0, 0, 0, 0]);
}

#[test]
fn summary_is_label_value_lines() {
    let s = summary_lines(&[("runs", 3), ("failures", 0)]);
    assert_eq!(s, "runs = 3\nfailures = 0\n");
}

proptest! {
    #[test]
    fn histogram_counts_every_sample(
        v in prop::collection::vec(-1e6f64..1e6, 1..400),
        bins in 1usize..60,
    ) {
        let h = Histogram::new(&v, bins).unwrap();
        prop_assert_eq!(h.counts.len(), bins);
        prop_assert_eq!(h.total(), v.len());
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert_eq!(h.lo, lo);
        // the maximum lands in the last bin
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            prop_assert!(h.counts[bins - 1] >= 1);
        }
    }

    #[test]
    fn line_chart_is_well_formed(
        pts in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50),
        name in "[a-zA-Z<>&\" ]{0,12}",
    ) {
        let svg = line_svg(&[Series::new(&name, pts.clone())], &style()).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let poly = doc.descendants().find(|n| n.has_tag_name("polyline")).unwrap();
        prop_assert_eq!(poly.attribute("points").unwrap().split_whitespace().count(), pts.len());
    }
}
