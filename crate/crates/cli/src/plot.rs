//! Static SVG rendering for the projection-family statistics.

use auctionkit::reductions::ca::Claim25Report;

/// "num/den" (or plain integer) to f64; plot coordinates only, the
/// report keeps the exact strings.
fn rat_str_f64(s: &str) -> f64 {
    match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().unwrap_or(0.0);
            let d: f64 = d.trim().parse().unwrap_or(1.0);
            if d == 0.0 {
                0.0
            } else {
                n / d
            }
        }
        None => s.trim().parse().unwrap_or(0.0),
    }
}

/// Grouped bars per level: empirical miss rate (filled) against the
/// coverage bound (dashed outline).
pub fn claim25_svg(runs: &[Claim25Report]) -> String {
    const WIDTH: f64 = 560.0;
    const HEIGHT: f64 = 330.0;
    const LEFT: f64 = 64.0;
    const RIGHT: f64 = 16.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 46.0;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\">\n"
    ));
    svg.push_str(&format!(
        "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"20\" font-size=\"13\" text-anchor=\"middle\">\
         projection family miss rate against the coverage bound</text>\n",
        WIDTH / 2.0
    ));

    if runs.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }

    let mut ymax: f64 = 0.001;
    for r in runs {
        ymax = ymax.max(rat_str_f64(&r.miss_rate)).max(rat_str_f64(&r.miss_bound));
    }
    ymax *= 1.25;

    let x0 = LEFT;
    let y0 = TOP + plot_h;
    let y_of = |v: f64| y0 - (v / ymax) * plot_h;

    // Axes and horizontal grid lines with tick labels.
    for i in 0..=4 {
        let v = ymax * (i as f64) / 4.0;
        let y = y_of(v);
        svg.push_str(&format!(
            "  <line x1=\"{x0:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" \
             stroke=\"#dddddd\"/>\n",
            x0 + plot_w
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\">{v:.4}</text>\n",
            x0 - 6.0,
            y + 3.5
        ));
    }
    svg.push_str(&format!(
        "  <line x1=\"{x0:.1}\" y1=\"{TOP:.1}\" x2=\"{x0:.1}\" y2=\"{y0:.1}\" stroke=\"#333333\"/>\n"
    ));
    svg.push_str(&format!(
        "  <line x1=\"{x0:.1}\" y1=\"{y0:.1}\" x2=\"{:.1}\" y2=\"{y0:.1}\" stroke=\"#333333\"/>\n",
        x0 + plot_w
    ));

    let group_w = plot_w / runs.len() as f64;
    let bar_w = (group_w * 0.28).min(48.0);
    for (i, r) in runs.iter().enumerate() {
        let gx = x0 + group_w * (i as f64);
        let rate = rat_str_f64(&r.miss_rate);
        let bound = rat_str_f64(&r.miss_bound);
        let rate_x = gx + group_w / 2.0 - bar_w - 3.0;
        let bound_x = gx + group_w / 2.0 + 3.0;
        svg.push_str(&format!(
            "  <rect x=\"{rate_x:.1}\" y=\"{:.1}\" width=\"{bar_w:.1}\" height=\"{:.1}\" \
             fill=\"#4878a8\"/>\n",
            y_of(rate),
            y0 - y_of(rate)
        ));
        svg.push_str(&format!(
            "  <rect x=\"{bound_x:.1}\" y=\"{:.1}\" width=\"{bar_w:.1}\" height=\"{:.1}\" \
             fill=\"none\" stroke=\"#b0513a\" stroke-dasharray=\"4 2\"/>\n",
            y_of(bound),
            y0 - y_of(bound)
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"9\" text-anchor=\"middle\">{}</text>\n",
            rate_x + bar_w / 2.0,
            y_of(rate) - 3.0,
            r.miss_rate
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">ell {}</text>\n",
            gx + group_w / 2.0,
            y0 + 16.0,
            r.ell
        ));
    }

    // Legend.
    let lx = x0 + plot_w - 150.0;
    svg.push_str(&format!(
        "  <rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"#4878a8\"/>\n",
        TOP + 2.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\">miss rate</text>\n",
        lx + 15.0,
        TOP + 11.0
    ));
    svg.push_str(&format!(
        "  <rect x=\"{lx:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"none\" \
         stroke=\"#b0513a\" stroke-dasharray=\"4 2\"/>\n",
        TOP + 17.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\">coverage bound</text>\n",
        lx + 15.0,
        TOP + 26.0
    ));
    svg.push_str("</svg>\n");
    svg
}
