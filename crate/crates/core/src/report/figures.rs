//! Pure figure renderers over in-memory data.

use super::svg::{diverging, mix, tick, Scale, Svg, PALETTE};
use crate::explain::{BeeswarmRecord, ImportanceEntry, PdpCurve};
use crate::metrics::RocCurve;

pub const HISTOGRAM_BINS: usize = 40;

struct Panel {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn axes(svg: &mut Svg, p: &Panel, xs: Scale, ys: Scale, xlabel: &str, ylabel: &str) {
    svg.outline(p.x, p.y, p.w, p.h);
    let (x0, x1) = xs.domain();
    let (y0, y1) = ys.domain();
    for v in ticks(x0, x1, 5) {
        let px = xs.map(v);
        svg.line(px, p.y + p.h, px, p.y + p.h + 3.0, "#333333", false);
        svg.text(px, p.y + p.h + 13.0, 8.0, "middle", &tick(round_sig(v)));
    }
    for v in ticks(y0, y1, 5) {
        let py = ys.map(v);
        svg.line(p.x - 3.0, py, p.x, py, "#333333", false);
        svg.text(p.x - 5.0, py + 3.0, 8.0, "end", &tick(round_sig(v)));
    }
    if !xlabel.is_empty() {
        svg.text(p.x + p.w / 2.0, p.y + p.h + 26.0, 10.0, "middle", xlabel);
    }
    if !ylabel.is_empty() {
        svg.vertical_text(p.x - 32.0, p.y + p.h / 2.0, 10.0, ylabel);
    }
}

/// Round to three significant digits for tick labels.
fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return 0.0;
    }
    let mag = 10f64.powi(v.abs().log10().floor() as i32 - 2);
    (v / mag).round() * mag
}

/// Bin counts over `[min, max]`; a constant column lands in the first bin.
pub fn histogram_counts(values: &[f64], bins: usize) -> (f64, f64, Vec<usize>) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0; bins];
    if values.is_empty() {
        return (0.0, 1.0, counts);
    }
    let width = (hi - lo) / bins as f64;
    for &v in values {
        let b = if width > 0.0 { ((v - lo) / width).floor() as usize } else { 0 };
        counts[b.min(bins - 1)] += 1;
    }
    (lo, hi, counts)
}

#[allow(clippy::too_many_arguments)]
fn bar_panel(svg: &mut Svg, p: &Panel, lo: f64, hi: f64, counts: &[usize], fill: &str, xlabel: &str, ylabel: &str) {
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let xs = Scale::new(lo, hi, p.x, p.x + p.w);
    let ys = Scale::new(0.0, top, p.y + p.h, p.y);
    let (d0, d1) = xs.domain();
    let bw = (d1 - d0) / counts.len() as f64;
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let x = xs.map(d0 + bw * i as f64);
        let y = ys.map(c as f64);
        svg.rect(x, y, xs.map(d0 + bw * (i + 1) as f64) - x, p.y + p.h - y, fill);
    }
    axes(svg, p, xs, ys, xlabel, ylabel);
}

pub fn histogram_grid(panels: &[(String, Vec<f64>)], bins: usize) -> String {
    let cols = 4usize;
    let rows = panels.len().div_ceil(cols).max(1);
    let (pw, ph) = (220.0, 140.0);
    let mut svg = Svg::new(cols as f64 * (pw + 60.0) + 20.0, rows as f64 * (ph + 70.0) + 20.0);
    for (i, (name, values)) in panels.iter().enumerate() {
        let p = Panel {
            x: 60.0 + (i % cols) as f64 * (pw + 60.0),
            y: 40.0 + (i / cols) as f64 * (ph + 70.0),
            w: pw,
            h: ph,
        };
        let (lo, hi, counts) = histogram_counts(values, bins);
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        svg.text(p.x + pw / 2.0, p.y - 8.0, 11.0, "middle", name);
        bar_panel(&mut svg, &p, lo, hi, &counts, PALETTE[0], "", if i % cols == 0 { "Count" } else { "" });
    }
    svg.finish()
}

fn integer_counts(values: &[u32]) -> Vec<usize> {
    let top = values.iter().copied().max().unwrap_or(0) as usize;
    let mut counts = vec![0; top + 1];
    for &v in values {
        counts[v as usize] += 1;
    }
    counts
}

pub fn burden_distribution(burden: &[u32], affected: &[u32]) -> String {
    let mut svg = Svg::new(640.0, 300.0);
    let panels = [
        (Panel { x: 60.0, y: 40.0, w: 240.0, h: 200.0 }, burden, "Burden score", PALETTE[0]),
        (Panel { x: 370.0, y: 40.0, w: 240.0, h: 200.0 }, affected, "Affected systems", PALETTE[1]),
    ];
    for (p, values, label, fill) in panels {
        let counts = integer_counts(values);
        let hi = counts.len() as f64 - 0.5;
        svg.text(p.x + p.w / 2.0, p.y - 10.0, 11.0, "middle", label);
        bar_panel(&mut svg, &p, -0.5, hi, &counts, fill, label, "Patients");
    }
    svg.finish()
}

/// `cells[i][j]` is the correlation of variables i and j; `None` for undefined (constant) pairs.
pub fn correlation_heatmap(names: &[String], cells: &[Vec<Option<f64>>]) -> String {
    let n = names.len();
    let cell = 16.0;
    let (left, top) = (70.0, 70.0);
    let mut svg = Svg::new(left + n as f64 * cell + 110.0, top + (n as f64 * cell).max(100.0) + 30.0);
    for (i, row) in cells.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let fill = v.map_or_else(|| "#cccccc".to_string(), diverging);
            svg.rect(left + j as f64 * cell, top + i as f64 * cell, cell, cell, &fill);
        }
    }
    for (i, name) in names.iter().enumerate() {
        svg.text(left - 4.0, top + (i as f64 + 0.7) * cell, 8.0, "end", name);
        svg.vertical_text(left + (i as f64 + 0.5) * cell, top - 30.0, 8.0, name);
    }
    svg.outline(left, top, n as f64 * cell, n as f64 * cell);
    // Colour bar spanning [-1, 1].
    let (bx, bh) = (left + n as f64 * cell + 30.0, (n as f64 * cell).max(100.0));
    let steps = 20;
    for k in 0..steps {
        let r = 1.0 - 2.0 * (k as f64 + 0.5) / steps as f64;
        svg.rect(bx, top + bh * k as f64 / steps as f64, 14.0, bh / steps as f64 + 0.5, &diverging(r));
    }
    svg.outline(bx, top, 14.0, bh);
    for (r, label) in [(1.0, "+1"), (0.0, "0"), (-1.0, "-1")] {
        svg.text(bx + 18.0, top + bh * (1.0 - r) / 2.0 + 3.0, 8.0, "start", label);
    }
    svg.finish()
}

pub fn roc_plot(curves: &[(String, RocCurve)]) -> String {
    let mut svg = Svg::new(520.0, 460.0);
    let p = Panel { x: 60.0, y: 30.0, w: 380.0, h: 380.0 };
    let xs = Scale::new(0.0, 1.0, p.x, p.x + p.w);
    let ys = Scale::new(0.0, 1.0, p.y + p.h, p.y);
    svg.line(xs.map(0.0), ys.map(0.0), xs.map(1.0), ys.map(1.0), "#888888", true);
    for (k, (name, roc)) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = roc.fpr.iter().zip(&roc.tpr).map(|(&f, &t)| (xs.map(f), ys.map(t))).collect();
        svg.polyline(&pts, color);
        let ly = p.y + p.h - 20.0 - 16.0 * (curves.len() - 1 - k) as f64;
        svg.line(p.x + p.w - 150.0, ly, p.x + p.w - 130.0, ly, color, false);
        svg.text(p.x + p.w - 125.0, ly + 3.0, 9.0, "start", &format!("{name} (AUC = {:.3})", roc.auc));
    }
    axes(&mut svg, &p, xs, ys, "False positive rate", "True positive rate");
    svg.finish()
}

pub fn importance_bar(entries: &[ImportanceEntry], top: usize) -> String {
    let shown = &entries[..top.min(entries.len())];
    let row_h = 20.0;
    let p = Panel { x: 90.0, y: 20.0, w: 360.0, h: row_h * shown.len().max(1) as f64 };
    let mut svg = Svg::new(500.0, p.h + 60.0);
    let hi = shown.iter().map(|e| e.mean_abs_shap).fold(0.0, f64::max);
    let xs = Scale::new(0.0, if hi > 0.0 { hi } else { 1.0 }, p.x, p.x + p.w);
    for (i, e) in shown.iter().enumerate() {
        let y = p.y + i as f64 * row_h;
        svg.rect(p.x, y + 3.0, xs.map(e.mean_abs_shap) - p.x, row_h - 6.0, PALETTE[0]);
        svg.text(p.x - 4.0, y + row_h * 0.65, 9.0, "end", &e.name);
    }
    svg.outline(p.x, p.y, p.w, p.h);
    let (d0, d1) = xs.domain();
    for v in ticks(d0, d1, 5) {
        let px = xs.map(v);
        svg.line(px, p.y + p.h, px, p.y + p.h + 3.0, "#333333", false);
        svg.text(px, p.y + p.h + 13.0, 8.0, "middle", &tick(round_sig(v)));
    }
    svg.text(p.x + p.w / 2.0, p.y + p.h + 28.0, 10.0, "middle", "mean |SHAP value|");
    svg.finish()
}

/// Deterministic vertical jitter in [-0.5, 0.5) from the row id.
fn jitter(row: usize) -> f64 {
    let h = (row as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    (h >> 40) as f64 / (1u64 << 24) as f64 - 0.5
}

pub fn shap_beeswarm(records: &[BeeswarmRecord], top: usize) -> String {
    let mut features: Vec<(usize, &str)> = records.iter().map(|r| (r.rank, r.feature.as_str())).collect();
    features.sort();
    features.dedup();
    features.truncate(top);
    let row_h = 24.0;
    let p = Panel { x: 90.0, y: 20.0, w: 420.0, h: row_h * features.len().max(1) as f64 };
    let mut svg = Svg::new(620.0, p.h + 60.0);
    let reach = records
        .iter()
        .filter(|r| r.rank <= top)
        .map(|r| r.shap.abs())
        .fold(0.0, f64::max);
    let reach = if reach > 0.0 { reach * 1.05 } else { 1.0 };
    let xs = Scale::new(-reach, reach, p.x, p.x + p.w);
    svg.line(xs.map(0.0), p.y, xs.map(0.0), p.y + p.h, "#888888", false);
    const LOW: [u8; 3] = [0, 139, 251];
    const HIGH: [u8; 3] = [255, 0, 82];
    for (i, &(rank, name)) in features.iter().enumerate() {
        let mine: Vec<&BeeswarmRecord> = records.iter().filter(|r| r.rank == rank).collect();
        let lo = mine.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
        let hi = mine.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
        let cy = p.y + (i as f64 + 0.5) * row_h;
        for r in mine {
            let t = if hi > lo { (r.value - lo) / (hi - lo) } else { 0.5 };
            svg.circle(xs.map(r.shap), cy + jitter(r.row) * row_h * 0.7, 1.8, &mix(LOW, HIGH, t));
        }
        svg.text(p.x - 4.0, cy + 3.0, 9.0, "end", name);
    }
    svg.outline(p.x, p.y, p.w, p.h);
    for v in ticks(-reach, reach, 5) {
        let px = xs.map(v);
        svg.line(px, p.y + p.h, px, p.y + p.h + 3.0, "#333333", false);
        svg.text(px, p.y + p.h + 13.0, 8.0, "middle", &tick(round_sig(v)));
    }
    svg.text(p.x + p.w / 2.0, p.y + p.h + 28.0, 10.0, "middle", "SHAP value (log-odds)");
    // Feature value legend.
    let lx = p.x + p.w + 30.0;
    for k in 0..10 {
        let t = 1.0 - k as f64 / 9.0;
        svg.rect(lx, p.y + 10.0 + k as f64 * 10.0, 10.0, 10.0, &mix(LOW, HIGH, t));
    }
    svg.text(lx + 14.0, p.y + 18.0, 8.0, "start", "High");
    svg.text(lx + 14.0, p.y + 108.0, 8.0, "start", "Low");
    svg.text(lx + 5.0, p.y + 2.0, 8.0, "middle", "Feature value");
    svg.finish()
}

pub fn pdp_panel(curves: &[(String, PdpCurve)]) -> String {
    let (pw, ph) = (220.0, 180.0);
    let mut svg = Svg::new(curves.len().max(1) as f64 * (pw + 70.0) + 20.0, ph + 80.0);
    for (k, (name, c)) in curves.iter().enumerate() {
        let p = Panel { x: 60.0 + k as f64 * (pw + 70.0), y: 30.0, w: pw, h: ph };
        let (x0, x1) = (c.grid[0], *c.grid.last().unwrap_or(&c.grid[0]));
        let lo = c.response.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.response.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = ((hi - lo) * 0.05).max(0.01);
        let xs = Scale::new(x0, x1, p.x, p.x + p.w);
        let ys = Scale::new((lo - pad).max(0.0), (hi + pad).min(1.0), p.y + p.h, p.y);
        let pts: Vec<(f64, f64)> = c.grid.iter().zip(&c.response).map(|(&g, &r)| (xs.map(g), ys.map(r))).collect();
        svg.polyline(&pts, PALETTE[k % PALETTE.len()]);
        svg.text(p.x + pw / 2.0, p.y - 10.0, 11.0, "middle", name);
        axes(&mut svg, &p, xs, ys, name, if k == 0 { "Predicted probability" } else { "" });
    }
    svg.finish()
}
