//! Golden-file tests for every figure kind. Regenerate with `UPDATE_GOLDEN=1`.

use std::path::{Path, PathBuf};

use multisys_core::explain::{BeeswarmRecord, ImportanceEntry, ImportanceRanking, PdpCurve, PdpMethod};
use multisys_core::metrics::roc_auc;
use multisys_core::report::{histogram_counts, render, FigureKind, FigureSpec, LabeledPdp, LabeledRoc, ReportError};

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn check_golden(name: &str, svg: &str) {
    let path = golden_dir().join(format!("{name}.svg"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, svg).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert_eq!(svg, expected, "{name} differs from its golden file");
}

fn features_csv(dir: &Path) -> PathBuf {
    let path = dir.join("features.csv");
    let mut text = String::from("Cr,GLU,Hb,K\n");
    for i in 0..60 {
        let x = i as f64;
        text.push_str(&format!("{},{},{},5\n", 50.0 + (x * 7.3) % 41.0, 3.5 + (x * x * 0.37) % 9.0, 160.0 - x * 0.9));
    }
    std::fs::write(&path, text).unwrap();
    path
}

fn spec(kind: FigureKind, data: PathBuf, dir: &Path) -> FigureSpec {
    FigureSpec { kind, data, output: dir.join(format!("{}.svg", kind.as_str())), columns: None, top: None }
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(value).unwrap()).unwrap();
    path
}

fn roc_data(dir: &Path) -> PathBuf {
    let labels: Vec<bool> = (0..20).map(|i| i % 3 == 0).collect();
    let curves: Vec<LabeledRoc> = [("gb", 1.0), ("rf", 0.6), ("lr", 0.3)]
        .iter()
        .map(|&(model, signal)| {
            let scores: Vec<f64> =
                labels.iter().enumerate().map(|(i, &l)| signal * f64::from(u8::from(l)) + ((i * 7) % 10) as f64 / 10.0).collect();
            LabeledRoc { model: model.into(), curve: roc_auc(&scores, &labels).unwrap() }
        })
        .collect();
    write_json(dir, "roc.json", &curves)
}

fn importance() -> ImportanceRanking {
    let names = ["GLU", "Cr", "TG", "WBC"];
    let values = [2.5, 1.25, 0.75, 0.0];
    ImportanceRanking {
        entries: names
            .iter()
            .zip(values)
            .enumerate()
            .map(|(i, (n, v))| ImportanceEntry { feature: i, name: n.to_string(), mean_abs_shap: v })
            .collect(),
    }
}

fn beeswarm_data(dir: &Path) -> PathBuf {
    let rank = importance();
    let mut records = Vec::new();
    for row in 0..15 {
        for (k, e) in rank.entries.iter().enumerate() {
            let value = ((row * 5 + k * 3) % 11) as f64;
            records.push(BeeswarmRecord {
                row,
                feature: e.name.clone(),
                shap: (value - 5.0) * e.mean_abs_shap / 5.0,
                value,
                rank: k + 1,
            });
        }
    }
    let path = dir.join("beeswarm.csv");
    std::fs::write(&path, multisys_core::explain::beeswarm_csv(&records)).unwrap();
    path
}

fn pdp_data(dir: &Path) -> PathBuf {
    let curve = |feature, f: fn(f64) -> f64| {
        let grid: Vec<f64> = (0..10).map(|i| 2.0 + i as f64).collect();
        let response = grid.iter().map(|&g| f(g)).collect();
        PdpCurve { feature, method: PdpMethod::MeanAnchored, grid, response }
    };
    let curves = vec![
        LabeledPdp { feature: "GLU".into(), curve: curve(0, |g| 1.0 / (1.0 + (-(g - 7.0)).exp())) },
        LabeledPdp { feature: "Cr".into(), curve: curve(1, |g| 0.1 + 0.02 * g) },
        LabeledPdp { feature: "TG".into(), curve: curve(2, |_| 0.3) },
    ];
    write_json(dir, "pdp.json", &curves)
}

fn indices_csv(dir: &Path) -> PathBuf {
    let path = dir.join("indices.csv");
    let mut text = String::from("row,burden_score,affected_systems,target_multi\n");
    for i in 0..40u32 {
        let burden = (i * i) % 6;
        let affected = burden.min(4) / 2 + u32::from(i % 5 == 0);
        text.push_str(&format!("{i},{burden},{affected},{}\n", u8::from(affected >= 2)));
    }
    std::fs::write(&path, text).unwrap();
    path
}

fn all_specs(dir: &Path) -> Vec<FigureSpec> {
    let importance_path = dir.join("importance.csv");
    std::fs::write(&importance_path, importance().to_csv()).unwrap();
    vec![
        spec(FigureKind::HistogramGrid, features_csv(dir), dir),
        spec(FigureKind::BurdenDistribution, indices_csv(dir), dir),
        spec(FigureKind::CorrelationHeatmap, features_csv(dir), dir),
        spec(FigureKind::Roc, roc_data(dir), dir),
        spec(FigureKind::ShapBeeswarm, beeswarm_data(dir), dir),
        spec(FigureKind::ImportanceBar, importance_path, dir),
        spec(FigureKind::PdpPanel, pdp_data(dir), dir),
    ]
}

#[test]
fn every_kind_matches_its_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let specs = all_specs(dir.path());
    assert_eq!(specs.len(), FigureKind::ALL.len());
    for s in &specs {
        let svg = render(s).unwrap();
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
        check_golden(s.kind.as_str(), &svg);
    }
}

#[test]
fn rendering_is_byte_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (x, y) in all_specs(a.path()).iter().zip(all_specs(b.path())) {
        assert_eq!(render(x).unwrap(), render(&y).unwrap());
    }
}

#[test]
fn roc_has_three_curves_and_a_dashed_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let svg = render(&spec(FigureKind::Roc, roc_data(dir.path()), dir.path())).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
    assert_eq!(svg.matches("stroke-dasharray").count(), 1);
    for model in ["gb (AUC", "rf (AUC", "lr (AUC"] {
        assert!(svg.contains(model), "{model}");
    }
}

#[test]
fn histogram_has_forty_bins_and_constant_column_fills_one() {
    let values: Vec<f64> = (0..100).map(f64::from).collect();
    let (_, _, counts) = histogram_counts(&values, 40);
    assert_eq!(counts.len(), 40);
    assert_eq!(counts.iter().sum::<usize>(), 100);
    let (_, _, constant) = histogram_counts(&[5.0; 30], 40);
    assert_eq!(constant.iter().filter(|&&c| c > 0).count(), 1);

    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(FigureKind::HistogramGrid, features_csv(dir.path()), dir.path());
    s.columns = Some(vec!["K".into()]);
    let svg = render(&s).unwrap();
    // Background plus the single occupied bar.
    assert_eq!(svg.matches("<rect").count() - svg.matches("fill=\"none\"").count(), 2);
}

#[test]
fn heatmap_scale_spans_minus_one_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let svg = render(&spec(FigureKind::CorrelationHeatmap, features_csv(dir.path()), dir.path())).unwrap();
    assert!(svg.contains(">+1<") && svg.contains(">-1<"));
    // The constant column has undefined correlations.
    assert!(svg.contains("#cccccc"));
    // Diagonal of a non-constant column is r = 1, the darkest red.
    assert!(svg.contains("#b2182b"));
}

#[test]
fn unresolved_and_malformed_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let missing = spec(FigureKind::Roc, dir.path().join("nope.json"), dir.path());
    assert!(matches!(render(&missing), Err(ReportError::UnresolvedData(_))));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"not\": \"a list\"}").unwrap();
    assert!(matches!(render(&spec(FigureKind::PdpPanel, bad, dir.path())), Err(ReportError::Malformed { .. })));
    let text = dir.path().join("text.csv");
    std::fs::write(&text, "a,b\n1,x\n").unwrap();
    assert!(matches!(render(&spec(FigureKind::HistogramGrid, text, dir.path())), Err(ReportError::Malformed { .. })));
}
