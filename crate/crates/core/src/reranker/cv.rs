//! Stratified k-fold cross-validation of the weight learner.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{learn_weights_centered, MetaFeatureVector, RankedList, RerankError, Result, META_DIM};
use crate::evaluation::{ranking_metrics, EvalCounts, EvalReport, RankingMetrics};

/// One labeled image (Difficult labels never become rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub query_id: String,
    pub image_id: String,
    pub original_rank: u32,
    pub features: MetaFeatureVector,
    pub relevant: bool,
    /// Classified inconsistently across repeated clusterings.
    pub intermediate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvParams {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub lambda: f64,
}

impl Default for CvParams {
    fn default() -> Self {
        Self {
            folds: 10,
            repeats: 5,
            seed: 42,
            lambda: super::DEFAULT_LAMBDA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub report: EvalReport,
    /// `fold_of[repeat][row]`: held-out fold of each row (rows sorted by query then image id).
    pub fold_of: Vec<Vec<usize>>,
    /// `(query_id, image_id)` of each row, in the order used by `fold_of`.
    pub rows: Vec<(String, String)>,
    /// Metrics of every held-out fold, repeat-major.
    pub fold_metrics: Vec<RankingMetrics>,
    pub models_trained: usize,
}

/// Fits ridge weights on `rows`, leaving out intermediate rows unless that
/// leaves only one class. Returns the weights and the number of rows used.
pub(crate) fn fit_rows<'a>(rows: impl Iterator<Item = &'a LabeledRow> + Clone, lambda: f64) -> Result<([f64; META_DIM], usize)> {
    let fit = |rows: Vec<&LabeledRow>| -> Result<([f64; META_DIM], usize)> {
        let x: Vec<Vec<f64>> = rows.iter().map(|r| r.features.0.to_vec()).collect();
        let y: Vec<f64> = rows.iter().map(|r| if r.relevant { 1.0 } else { -1.0 }).collect();
        let w = learn_weights_centered(&x, &y, lambda)?;
        Ok((w.try_into().expect("META_DIM weights"), rows.len()))
    };
    let consistent: Vec<&LabeledRow> = rows.clone().filter(|r| !r.intermediate).collect();
    match fit(consistent) {
        Err(RerankError::DegenerateTraining(_)) => fit(rows.collect()),
        other => other,
    }
}

/// Per-query rankings of `rows` under `weights`, averaged into one set of metrics.
fn held_out_metrics(rows: &[&LabeledRow], weights: &[f64; META_DIM]) -> RankingMetrics {
    let mut by_query: BTreeMap<&str, Vec<&LabeledRow>> = BTreeMap::new();
    for r in rows {
        by_query.entry(r.query_id.as_str()).or_default().push(r);
    }
    let per_query: Vec<RankingMetrics> = by_query
        .into_iter()
        .map(|(qid, rows)| {
            let scored = rows
                .iter()
                .map(|r| (r.image_id.clone(), r.original_rank, super::ridge::dot(weights, &r.features.0)))
                .collect();
            let ranked = RankedList::from_scores(qid, scored);
            let relevant: HashSet<&str> = rows.iter().filter(|r| r.relevant).map(|r| r.image_id.as_str()).collect();
            ranking_metrics(&ranked.ids(), &relevant)
        })
        .collect();
    average_metrics(&per_query)
}

fn average_metrics(runs: &[RankingMetrics]) -> RankingMetrics {
    let mean = |vals: Vec<Option<f64>>| {
        let v: Vec<f64> = vals.into_iter().flatten().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let keys: Vec<usize> = runs.first().map(|r| r.precision_at_k.keys().copied().collect()).unwrap_or_default();
    RankingMetrics {
        precision_at_k: keys
            .into_iter()
            .map(|k| (k, mean(runs.iter().map(|r| r.precision_at_k[&k]).collect())))
            .collect(),
        precision_at_recall: mean(runs.iter().map(|r| r.precision_at_recall).collect()),
        average_precision: mean(runs.iter().map(|r| r.average_precision).collect()),
    }
}

/// Repeated stratified k-fold cross-validation over rows pooled across queries.
///
/// Each repeat shuffles the relevant and irrelevant rows separately and deals
/// them round-robin into folds. Every fold trains on the other folds and is
/// evaluated by ranking its held-out rows per query.
pub fn cross_validate(rows: &[LabeledRow], params: &CvParams) -> Result<CvResult> {
    let CvParams { folds, repeats, seed, lambda } = *params;
    if folds < 2 || repeats < 1 {
        return Err(RerankError::InvalidInput("need folds >= 2 and repeats >= 1".into()));
    }
    if rows.len() < folds {
        return Err(RerankError::InsufficientData(format!(
            "{} labeled images for {folds} folds",
            rows.len()
        )));
    }
    let mut order: Vec<&LabeledRow> = rows.iter().collect();
    order.sort_by(|a, b| (&a.query_id, &a.image_id).cmp(&(&b.query_id, &b.image_id)));
    if order.windows(2).any(|w| w[0].query_id == w[1].query_id && w[0].image_id == w[1].image_id) {
        return Err(RerankError::InvalidInput("duplicate labeled image".into()));
    }
    let pos: Vec<usize> = (0..order.len()).filter(|&i| order[i].relevant).collect();
    let neg: Vec<usize> = (0..order.len()).filter(|&i| !order[i].relevant).collect();
    if pos.len() < 2 || neg.len() < 2 {
        return Err(RerankError::InsufficientData(format!(
            "need at least 2 relevant and 2 irrelevant images, have {} and {}",
            pos.len(),
            neg.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = Vec::with_capacity(repeats);
    let mut fold_metrics = Vec::with_capacity(folds * repeats);
    for _ in 0..repeats {
        let (mut p, mut q) = (pos.clone(), neg.clone());
        p.shuffle(&mut rng);
        q.shuffle(&mut rng);
        let mut assign = vec![0usize; order.len()];
        for (slot, &i) in p.iter().chain(&q).enumerate() {
            assign[i] = slot % folds;
        }
        for f in 0..folds {
            let train = (0..order.len()).filter(|&i| assign[i] != f).map(|i| order[i]);
            let (weights, _) = fit_rows(train, lambda)?;
            let test: Vec<&LabeledRow> = (0..order.len()).filter(|&i| assign[i] == f).map(|i| order[i]).collect();
            fold_metrics.push(held_out_metrics(&test, &weights));
        }
        fold_of.push(assign);
    }

    let counts = EvalCounts {
        folds,
        repeats,
        labeled_images: order.len(),
        relevant_images: pos.len(),
        evaluations: 0,
    };
    Ok(CvResult {
        report: EvalReport::from_metrics(&fold_metrics, counts),
        fold_of,
        rows: order.iter().map(|r| (r.query_id.clone(), r.image_id.clone())).collect(),
        models_trained: folds * repeats,
        fold_metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rows(seed: u64, n: usize) -> Vec<LabeledRow> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let relevant = i % 3 == 0;
                let mut f = [0.0; META_DIM];
                f[2] = if rng.random_bool(if relevant { 0.8 } else { 0.1 }) { 1.0 } else { 0.0 };
                f[7] = rng.random_range(0.0..1.0) + if relevant { 0.5 } else { 0.0 };
                f[9] = 1.0;
                LabeledRow {
                    query_id: format!("q{}", i % 2),
                    image_id: format!("i{i:03}"),
                    original_rank: i as u32 + 1,
                    features: MetaFeatureVector(f),
                    relevant,
                    intermediate: i % 17 == 0,
                }
            })
            .collect()
    }

    #[test]
    fn folds_partition_each_repeat() {
        let data = rows(1, 120);
        let res = cross_validate(&data, &CvParams::default()).unwrap();
        assert_eq!(res.fold_of.len(), 5);
        assert_eq!(res.fold_metrics.len(), 50);
        for assign in &res.fold_of {
            let mut sizes = [0usize; 10];
            for &f in assign {
                sizes[f] += 1;
            }
            assert!(sizes.iter().all(|&s| s == 12), "{sizes:?}");
        }
        assert_eq!(res.report.average_precision.n, 50);
        assert_eq!(res.report.counts.evaluations, 50);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let data = rows(2, 60);
        let a = serde_json::to_string(&cross_validate(&data, &CvParams::default()).unwrap()).unwrap();
        let b = serde_json::to_string(&cross_validate(&data, &CvParams::default()).unwrap()).unwrap();
        assert_eq!(a, b);
        let other = CvParams {
            seed: 7,
            ..CvParams::default()
        };
        let c = serde_json::to_string(&cross_validate(&data, &other).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn leave_one_out() {
        let data = rows(3, 12);
        let params = CvParams {
            folds: 12,
            repeats: 1,
            ..CvParams::default()
        };
        let res = cross_validate(&data, &params).unwrap();
        assert_eq!(res.models_trained, 12);
        let mut seen = res.fold_of[0].clone();
        seen.sort();
        assert_eq!(seen, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn too_few_labels() {
        let data = rows(4, 8);
        assert!(matches!(
            cross_validate(&data, &CvParams::default()),
            Err(RerankError::InsufficientData(_))
        ));
        let one_positive: Vec<LabeledRow> = rows(4, 30).into_iter().filter(|r| !r.relevant || r.image_id == "i000").collect();
        assert!(matches!(
            cross_validate(&one_positive, &CvParams::default()),
            Err(RerankError::InsufficientData(_))
        ));
    }

    #[test]
    fn intermediate_rows_fall_back_when_needed() {
        let mut data = rows(5, 10);
        for r in data.iter_mut().filter(|r| r.relevant) {
            r.intermediate = true;
        }
        let (_, used) = fit_rows(data.iter(), 1.0).unwrap();
        assert_eq!(used, 10);
        data[0].intermediate = false;
        let (_, used) = fit_rows(data.iter(), 1.0).unwrap();
        assert_eq!(used, 10 - 3);
    }
}
