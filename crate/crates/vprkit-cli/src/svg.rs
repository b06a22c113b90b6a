//! Precision-recall plot emitted as plain SVG markup. An output artifact,
//! not a UI: fixed size, no interaction, deterministic text.

use vprkit::evaluation::PrCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

fn x(recall: f64) -> f64 {
    MARGIN_LEFT + recall * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
}

fn y(precision: f64) -> f64 {
    HEIGHT - MARGIN_BOTTOM - precision * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
}

pub fn pr_curve_svg(curve: &PrCurve, title: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">precision-recall: {}</text>\n",
        WIDTH / 2.0,
        title
    ));

    // grid and tick labels every 0.25
    for i in 0..=4 {
        let v = i as f64 * 0.25;
        out.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#dddddd\"/>\n",
            x(v),
            y(0.0),
            x(v),
            y(1.0)
        ));
        out.push_str(&format!(
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#dddddd\"/>\n",
            x(0.0),
            y(v),
            x(1.0),
            y(v)
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{v:.2}</text>\n",
            x(v),
            y(0.0) + 20.0
        ));
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">{v:.2}</text>\n",
            x(0.0) - 8.0,
            y(v) + 4.0
        ));
    }

    // axes
    out.push_str(&format!(
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        x(0.0),
        y(0.0),
        x(1.0),
        y(0.0)
    ));
    out.push_str(&format!(
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        x(0.0),
        y(0.0),
        x(0.0),
        y(1.0)
    ));
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">recall</text>\n",
        (x(0.0) + x(1.0)) / 2.0,
        HEIGHT - 10.0
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">precision</text>\n",
        (y(0.0) + y(1.0)) / 2.0,
        (y(0.0) + y(1.0)) / 2.0
    ));

    // the curve itself, in sweep order (descending threshold)
    let points: Vec<String> = curve
        .points()
        .map(|(r, p)| format!("{:.4},{:.4}", x(r), y(p)))
        .collect();
    if points.len() == 1 {
        let (r, p) = curve.points().next().unwrap();
        out.push_str(&format!(
            "<circle cx=\"{:.4}\" cy=\"{:.4}\" r=\"3\" fill=\"#1f6fb2\"/>\n",
            x(r),
            y(p)
        ));
    } else {
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"2\"/>\n",
            points.join(" ")
        ));
    }
    out.push_str("</svg>\n");
    out
}
