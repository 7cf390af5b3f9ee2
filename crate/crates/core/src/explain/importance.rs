use serde::{Deserialize, Serialize};

use super::{ExplainError, ShapAttribution};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: usize,
    pub name: String,
    pub mean_abs_shap: f64,
}

/// Features ordered by mean |SHAP|, largest first; ties keep feature order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceRanking {
    /// 1-based rank of each feature index.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.entries.len()];
        for (i, e) in self.entries.iter().enumerate() {
            ranks[e.feature] = i + 1;
        }
        ranks
    }

    pub fn top(&self, k: usize) -> &[ImportanceEntry] {
        &self.entries[..k.min(self.entries.len())]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,feature,mean_abs_shap\n");
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", i + 1, e.name, e.mean_abs_shap));
        }
        out
    }
}

pub fn global_importance(attr: &ShapAttribution, names: &[String]) -> Result<ImportanceRanking, ExplainError> {
    let (n, p) = (attr.phi.rows(), attr.phi.cols());
    if n == 0 {
        return Err(ExplainError::NoRows);
    }
    if names.len() != p {
        return Err(ExplainError::NameCount { names: names.len(), features: p });
    }
    let mut sums = vec![0.0; p];
    for row in attr.phi.iter_rows() {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v.abs();
        }
    }
    let mut entries: Vec<ImportanceEntry> = sums
        .into_iter()
        .enumerate()
        .map(|(feature, s)| ImportanceEntry { feature, name: names[feature].clone(), mean_abs_shap: s / n as f64 })
        .collect();
    entries.sort_by(|a, b| b.mean_abs_shap.total_cmp(&a.mean_abs_shap).then(a.feature.cmp(&b.feature)));
    Ok(ImportanceRanking { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmRecord {
    pub row: usize,
    pub feature: String,
    pub shap: f64,
    pub value: f64,
    pub rank: usize,
}

/// Long-format export: one record per (row, feature), rows outer.
pub fn beeswarm_export(
    attr: &ShapAttribution,
    values: &Matrix,
    ranking: &ImportanceRanking,
) -> Result<Vec<BeeswarmRecord>, ExplainError> {
    let (ar, ac) = (attr.phi.rows(), attr.phi.cols());
    if (ar, ac) != (values.rows(), values.cols()) || ranking.entries.len() != ac {
        return Err(ExplainError::ShapeMismatch {
            attr_rows: ar,
            attr_cols: ac,
            value_rows: values.rows(),
            value_cols: values.cols(),
        });
    }
    let ranks = ranking.ranks();
    let mut names = vec![String::new(); ac];
    for e in &ranking.entries {
        names[e.feature] = e.name.clone();
    }
    let mut out = Vec::with_capacity(ar * ac);
    for r in 0..ar {
        for f in 0..ac {
            out.push(BeeswarmRecord {
                row: r,
                feature: names[f].clone(),
                shap: attr.phi.get(r, f),
                value: values.get(r, f),
                rank: ranks[f],
            });
        }
    }
    Ok(out)
}

/// CSV with shortest round-trip float formatting.
pub fn beeswarm_csv(records: &[BeeswarmRecord]) -> String {
    let mut out = String::from("row,feature,shap,value,rank\n");
    for r in records {
        out.push_str(&format!("{},{},{:?},{:?},{}\n", r.row, r.feature, r.shap, r.value, r.rank));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::tree_shap;
    use crate::models::{DecisionTree, Node, TreeEnsemble};

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("f{i}")).collect()
    }

    fn attr(rows: &[[f64; 3]]) -> ShapAttribution {
        ShapAttribution { base_value: 0.0, phi: Matrix::from_rows(rows).unwrap() }
    }

    #[test]
    fn sorted_with_index_tie_break() {
        let a = attr(&[[0.0, -2.0, 2.0], [0.0, 1.0, -1.0]]);
        let rank = global_importance(&a, &names(3)).unwrap();
        let order: Vec<usize> = rank.entries.iter().map(|e| e.feature).collect();
        assert_eq!(order, vec![1, 2, 0]);
        assert_eq!(rank.entries[0].mean_abs_shap, 1.5);
        assert_eq!(rank.entries[2].mean_abs_shap, 0.0);
        assert_eq!(rank.ranks(), vec![3, 1, 2]);
    }

    #[test]
    fn empty_rows_rejected() {
        let a = ShapAttribution { base_value: 0.0, phi: Matrix::zeros(0, 3) };
        assert_eq!(global_importance(&a, &names(3)), Err(ExplainError::NoRows));
    }

    #[test]
    fn duplicated_feature_splits_its_importance() {
        let stump = |feature| {
            DecisionTree::from_nodes(vec![
                Node::Split { feature, threshold: 0.0, left: 1, right: 2, cover: 10 },
                Node::Leaf { value: -1.0, cover: 6 },
                Node::Leaf { value: 2.0, cover: 4 },
            ])
            .unwrap()
        };
        let x = Matrix::from_rows(&[[-1.0, -1.0], [1.0, 1.0], [0.5, 0.5], [-0.2, -0.2]]).unwrap();
        let single = TreeEnsemble::boosting(0.0, 1.0, 2, vec![stump(0)]);
        let original = global_importance(&tree_shap(&single, &x).unwrap(), &names(2)).unwrap();
        let original_total = original.entries.iter().find(|e| e.feature == 0).unwrap().mean_abs_shap;
        // Averaging over the two possible tie-break choices.
        let mut combined = 0.0;
        for f in [0, 1] {
            let e = TreeEnsemble::boosting(0.0, 1.0, 2, vec![stump(f)]);
            let r = global_importance(&tree_shap(&e, &x).unwrap(), &names(2)).unwrap();
            combined += r.entries.iter().map(|e| e.mean_abs_shap).sum::<f64>() / 2.0;
        }
        assert!((combined - original_total).abs() <= 1e-9);
    }

    #[test]
    fn beeswarm_is_lossless_and_consistent() {
        let a = attr(&[[0.1, -std::f64::consts::PI, 1e-17], [0.3, 0.2, -0.7]]);
        let values = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0 / 7.0]]).unwrap();
        let rank = global_importance(&a, &names(3)).unwrap();
        let records = beeswarm_export(&a, &values, &rank).unwrap();
        assert_eq!(records.len(), 6);
        let text = beeswarm_csv(&records);
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        for (rec, parsed) in records.iter().zip(reader.records()) {
            let parsed = parsed.unwrap();
            assert_eq!(parsed[2].parse::<f64>().unwrap(), rec.shap);
            assert_eq!(parsed[3].parse::<f64>().unwrap(), rec.value);
        }
        let top = records.iter().find(|r| r.rank == 1).unwrap();
        assert_eq!(top.feature, rank.entries[0].name);
        assert!(beeswarm_export(&a, &Matrix::zeros(3, 3), &rank).is_err());
    }
}
