//! Topological dissimilarity, joint loss and the adaptive γ scheduler.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::PersistenceDiagram;
use crate::pimage::{image_from_diagram, map_diagram, PersistenceImage, PipelineConfig};
use crate::segmap::SegMap;

pub const DEFAULT_BETA: f64 = 0.05;
pub const DEFAULT_LAMBDA: f64 = 0.0005;
pub const DEFAULT_GAMMA0: f64 = 2.0;
pub const DEFAULT_WARMUP: u64 = 10;

/// How per-image CE and TD values are reduced before the γ update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub beta: f64,
    pub lambda: f64,
    pub gamma0: f64,
    pub warmup_steps: u64,
    pub gamma_min: f64,
    pub reduction: Reduction,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            lambda: DEFAULT_LAMBDA,
            gamma0: DEFAULT_GAMMA0,
            warmup_steps: DEFAULT_WARMUP,
            gamma_min: 0.0,
            reduction: Reduction::Sum,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::param(
                "beta",
                format!("{} must be finite and non-negative", self.beta),
            ));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::param(
                "lambda",
                format!("{} must be finite and non-negative", self.lambda),
            ));
        }
        if !(self.gamma_min.is_finite() && self.gamma_min >= 0.0) {
            return Err(Error::param(
                "gamma-min",
                format!("{} must be non-negative", self.gamma_min),
            ));
        }
        if !(self.gamma0.is_finite() && self.gamma0 >= 1.0 && self.gamma0 >= self.gamma_min) {
            return Err(Error::param(
                "gamma",
                format!(
                    "initial gamma {} must be >= 1 and >= gamma-min",
                    self.gamma0
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub gamma: f64,
    pub ce_total: f64,
    pub td_total: f64,
}

impl StepRecord {
    /// One JSON-lines record.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// `step` counts applied updates; `history[i]` holds γ after update `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerState {
    pub step: u64,
    pub gamma: f64,
    pub history: Vec<StepRecord>,
}

impl SchedulerState {
    pub fn new(config: &LossConfig) -> Self {
        Self {
            step: 0,
            gamma: config.gamma0,
            history: Vec::new(),
        }
    }
}

/// Mean absolute per-cell difference of two normalized images on the same grid.
pub fn topological_dissimilarity(gt: &PersistenceImage, pred: &PersistenceImage) -> Result<f64> {
    if !(gt.normalized && pred.normalized) {
        return Err(Error::Contract(
            "persistence images must be z-normalized".into(),
        ));
    }
    if gt.rows != pred.rows || gt.cols != pred.cols {
        return Err(Error::Contract(format!(
            "persistence image resolutions differ: {}x{} vs {}x{}",
            gt.rows, gt.cols, pred.rows, pred.cols
        )));
    }
    if gt.config != pred.config {
        return Err(Error::Contract(
            "persistence images use different configurations".into(),
        ));
    }
    let total: f64 = gt
        .values
        .iter()
        .zip(&pred.values)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(total / gt.values.len() as f64)
}

pub fn joint_loss(ce: f64, td: f64, beta: f64) -> f64 {
    ce + beta * td
}

/// One scheduler step. During warm-up γ is held and only the step advances.
pub fn scheduler_update(
    state: &SchedulerState,
    ce_total: f64,
    td_total: f64,
    config: &LossConfig,
) -> Result<SchedulerState> {
    if !(ce_total.is_finite() && ce_total >= 0.0) {
        return Err(Error::Contract(format!(
            "ce total {ce_total} must be finite and non-negative"
        )));
    }
    if !(td_total.is_finite() && td_total >= 0.0) {
        return Err(Error::Contract(format!(
            "td total {td_total} must be finite and non-negative"
        )));
    }
    let gamma = if state.step < config.warmup_steps {
        state.gamma
    } else {
        (state.gamma * (1.0 - config.lambda * ce_total * td_total)).max(config.gamma_min)
    };
    let mut next = state.clone();
    next.step += 1;
    next.gamma = gamma;
    next.history.push(StepRecord {
        step: next.step,
        gamma,
        ce_total,
        td_total,
    });
    Ok(next)
}

/// Ground-truth diagrams keyed by source id. Homology is computed once per
/// map; only the rasterization follows γ.
#[derive(Debug, Clone, Default)]
pub struct DiagramCache {
    diagrams: HashMap<String, PersistenceDiagram>,
}

impl DiagramCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.diagrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagrams.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PersistenceDiagram> {
        self.diagrams.get(id)
    }

    pub fn insert(&mut self, id: impl Into<String>, diagram: PersistenceDiagram) {
        self.diagrams.insert(id.into(), diagram);
    }

    /// Cached diagram for `map`, computing it on a miss.
    pub fn diagram_for(
        &mut self,
        map: &SegMap,
        pipeline: &PipelineConfig,
    ) -> Result<&PersistenceDiagram> {
        if !self.diagrams.contains_key(map.source_id()) {
            let d = map_diagram(map, pipeline.bandwidth, pipeline.cap)?;
            self.diagrams.insert(map.source_id().to_string(), d);
        }
        Ok(&self.diagrams[map.source_id()])
    }
}

/// One training image: ground truth, prediction and its externally computed cross entropy.
#[derive(Debug, Clone)]
pub struct EpochSample {
    pub gt: SegMap,
    pub pred: SegMap,
    pub ce: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutcome {
    pub losses: Vec<f64>,
    pub tds: Vec<f64>,
    pub state: SchedulerState,
}

/// Computes every image's TD and joint loss under the current γ, then
/// applies one scheduler update with the reduced CE and TD.
pub fn epoch_loss(
    batch: &[EpochSample],
    state: &SchedulerState,
    config: &LossConfig,
    pipeline: &PipelineConfig,
    cache: &mut DiagramCache,
) -> Result<EpochOutcome> {
    config.validate()?;
    pipeline.validate()?;
    if let Some(first) = batch.first() {
        for s in batch {
            s.gt.ensure_same_shape(&s.pred)?;
            s.gt.ensure_same_shape(&first.gt)?;
        }
    }
    let image_cfg = pipeline.image.with_gamma(state.gamma);

    let missing: Vec<&SegMap> = {
        let mut seen = std::collections::HashSet::new();
        batch
            .iter()
            .map(|s| &s.gt)
            .filter(|gt| cache.get(gt.source_id()).is_none() && seen.insert(gt.source_id()))
            .collect()
    };
    let fresh: Vec<Result<PersistenceDiagram>> = missing
        .par_iter()
        .map(|gt| map_diagram(gt, pipeline.bandwidth, pipeline.cap))
        .collect();
    for (gt, d) in missing.iter().zip(fresh) {
        cache.insert(gt.source_id(), d?);
    }

    let cache_ref = &*cache;
    let tds: Vec<Result<f64>> = batch
        .par_iter()
        .map(|s| {
            let gt_img = image_from_diagram(&cache_ref.diagrams[s.gt.source_id()], &image_cfg)?;
            let pred_diagram = map_diagram(&s.pred, pipeline.bandwidth, pipeline.cap)?;
            let pred_img = image_from_diagram(&pred_diagram, &image_cfg)?;
            topological_dissimilarity(&gt_img, &pred_img)
        })
        .collect();
    let tds = tds.into_iter().collect::<Result<Vec<f64>>>()?;

    let mut losses = Vec::with_capacity(batch.len());
    let (mut ce_total, mut td_total) = (0.0, 0.0);
    for (s, &td) in batch.iter().zip(&tds) {
        losses.push(joint_loss(s.ce, td, config.beta));
        ce_total += s.ce;
        td_total += td;
    }
    if config.reduction == Reduction::Mean && !batch.is_empty() {
        ce_total /= batch.len() as f64;
        td_total /= batch.len() as f64;
    }
    let state = scheduler_update(state, ce_total, td_total, config)?;
    Ok(EpochOutcome { losses, tds, state })
}

/// Mean binary cross entropy of foreground probabilities against a label map.
/// Plumbing for demos; training is outside this crate.
pub fn binary_cross_entropy(gt: &SegMap, foreground_prob: &[f64]) -> Result<f64> {
    if foreground_prob.len() != gt.labels().len() {
        return Err(Error::Contract(format!(
            "probability raster has {} cells, map has {}",
            foreground_prob.len(),
            gt.labels().len()
        )));
    }
    const EPS: f64 = 1e-12;
    let total: f64 = gt
        .labels()
        .iter()
        .zip(foreground_prob)
        .map(|(&l, &p)| {
            let p = p.clamp(EPS, 1.0 - EPS);
            if l > 0 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / foreground_prob.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pimage::{persistence_image, PersistenceImageConfig};

    fn img(values: Vec<f64>) -> PersistenceImage {
        let config = PersistenceImageConfig {
            rows: 2,
            cols: 2,
            ..Default::default()
        };
        PersistenceImage {
            rows: 2,
            cols: 2,
            values,
            normalized: true,
            config,
            warning: None,
        }
    }

    #[test]
    fn td_examples() {
        let a = img(vec![1.0, -1.0, 1.0, -1.0]);
        let b = img(vec![-1.0, 1.0, -1.0, 1.0]);
        assert_eq!(topological_dissimilarity(&a, &a).unwrap(), 0.0);
        assert_eq!(topological_dissimilarity(&a, &b).unwrap(), 2.0);
        assert_eq!(topological_dissimilarity(&b, &a).unwrap(), 2.0);
    }

    #[test]
    fn td_contract_errors() {
        let a = img(vec![0.0; 4]);
        let mut raw = a.clone();
        raw.normalized = false;
        assert!(matches!(
            topological_dissimilarity(&a, &raw),
            Err(Error::Contract(_))
        ));
        let mut other = a.clone();
        other.config.gamma = 1.0;
        assert!(topological_dissimilarity(&a, &other).is_err());
        let mut wide = a.clone();
        wide.cols = 4;
        wide.values = vec![0.0; 8];
        assert!(topological_dissimilarity(&a, &wide).is_err());
    }

    #[test]
    fn joint_loss_examples() {
        assert_eq!(joint_loss(0.7, 0.0, 0.05), 0.7);
        assert!((joint_loss(0.7, 2.0, 0.05) - 0.8).abs() < 1e-15);
        assert_eq!(joint_loss(0.0, 0.0, 3.0), 0.0);
    }

    fn no_warmup() -> LossConfig {
        LossConfig {
            warmup_steps: 0,
            ..Default::default()
        }
    }

    #[test]
    fn scheduler_examples() {
        let cfg = no_warmup();
        let s0 = SchedulerState::new(&cfg);
        let s1 = scheduler_update(&s0, 1.0, 1.0, &cfg).unwrap();
        assert!((s1.gamma - 1.999).abs() < 1e-15);
        assert_eq!(s1.step, 1);
        assert_eq!(s1.history.len(), 1);
        let same = scheduler_update(&s0, 0.0, 5.0, &cfg).unwrap();
        assert_eq!(same.gamma, 2.0);
        // λ·CE·TD = 2 → factor −1 → clamped to the floor
        let clamp = scheduler_update(&s0, 2000.0, 2.0, &cfg).unwrap();
        assert_eq!(clamp.gamma, cfg.gamma_min);
        let floor = LossConfig {
            gamma_min: 0.5,
            ..cfg
        };
        assert_eq!(
            scheduler_update(&s0, 2000.0, 2.0, &floor).unwrap().gamma,
            0.5
        );
        assert!(scheduler_update(&s0, -1.0, 1.0, &cfg).is_err());
        assert!(scheduler_update(&s0, 1.0, f64::NAN, &cfg).is_err());
    }

    #[test]
    fn three_step_trajectory() {
        let cfg = no_warmup();
        let mut s = SchedulerState::new(&cfg);
        let mut by_hand = 2.0f64;
        for expect in [1.999, 1.9980005, 1.99700149975] {
            s = scheduler_update(&s, 1.0, 1.0, &cfg).unwrap();
            by_hand *= 1.0 - 0.0005;
            assert!((s.gamma - expect).abs() < 1e-12);
            assert_eq!(s.gamma, by_hand);
        }
    }

    #[test]
    fn warmup_holds_gamma() {
        let cfg = LossConfig::default();
        let mut s = SchedulerState::new(&cfg);
        for _ in 0..10 {
            s = scheduler_update(&s, 1.0, 1.0, &cfg).unwrap();
            assert_eq!(s.gamma, 2.0);
        }
        s = scheduler_update(&s, 1.0, 1.0, &cfg).unwrap();
        assert!(s.gamma < 2.0);
        assert_eq!(s.step, 11);
    }

    #[test]
    fn json_record_shape() {
        let r = StepRecord {
            step: 3,
            gamma: 1.5,
            ce_total: 0.25,
            td_total: 2.0,
        };
        assert_eq!(
            r.to_json_line(),
            r#"{"step":3,"gamma":1.5,"ce_total":0.25,"td_total":2.0}"#
        );
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::default().validate().is_ok());
        let bad = LossConfig {
            lambda: -1.0,
            ..Default::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(Error::InvalidParameter { name: "lambda", .. })
        ));
        let bad = LossConfig {
            gamma0: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    fn disc_map(id: &str, cx: i64, cy: i64, r: i64) -> SegMap {
        let n = 32;
        let labels = (0..n * n)
            .map(|i| {
                let (x, y) = ((i % n) as i64, (i / n) as i64);
                ((x - cx).pow(2) + (y - cy).pow(2) <= r * r) as u8
            })
            .collect();
        SegMap::new(n as usize, n as usize, labels, id).unwrap()
    }

    #[test]
    fn identical_pairs_leave_gamma() {
        let cfg = no_warmup();
        let pipe = PipelineConfig::default();
        let batch: Vec<EpochSample> = (0..3)
            .map(|i| {
                let m = disc_map(&format!("m{i}"), 10 + i, 16, 5);
                EpochSample {
                    gt: m.clone(),
                    pred: m,
                    ce: 0.0,
                }
            })
            .collect();
        let mut cache = DiagramCache::new();
        let out = epoch_loss(&batch, &SchedulerState::new(&cfg), &cfg, &pipe, &mut cache).unwrap();
        assert_eq!(out.tds, vec![0.0; 3]);
        assert_eq!(out.losses, vec![0.0; 3]);
        assert_eq!(out.state.gamma, 2.0);
        assert_eq!(cache.len(), 3);
    }

    #[test]
    fn cache_is_transparent() {
        let pipe = PipelineConfig::default();
        let gt = disc_map("gt", 16, 16, 6);
        let cold = persistence_image(&gt, &pipe).unwrap();
        let mut cache = DiagramCache::new();
        cache.diagram_for(&gt, &pipe).unwrap();
        let warm = image_from_diagram(cache.diagram_for(&gt, &pipe).unwrap(), &pipe.image).unwrap();
        assert_eq!(cold, warm);
    }

    #[test]
    fn epoch_uses_current_gamma_and_sums() {
        let cfg = no_warmup();
        let pipe = PipelineConfig::default();
        let gt = disc_map("gt", 16, 16, 6);
        let pred = disc_map("pred", 14, 15, 3);
        let batch = vec![
            EpochSample {
                gt: gt.clone(),
                pred: pred.clone(),
                ce: 0.4,
            },
            EpochSample {
                gt: gt.clone(),
                pred: gt.clone(),
                ce: 0.1,
            },
        ];
        let mut cache = DiagramCache::new();
        let state = SchedulerState {
            step: 5,
            gamma: 1.5,
            history: vec![],
        };
        let out = epoch_loss(&batch, &state, &cfg, &pipe, &mut cache).unwrap();
        let image_cfg = pipe.image.with_gamma(1.5);
        let expected_td = topological_dissimilarity(
            &image_from_diagram(&map_diagram(&gt, 1.0, 20.0).unwrap(), &image_cfg).unwrap(),
            &image_from_diagram(&map_diagram(&pred, 1.0, 20.0).unwrap(), &image_cfg).unwrap(),
        )
        .unwrap();
        assert_eq!(out.tds, vec![expected_td, 0.0]);
        assert_eq!(out.losses[0], 0.4 + 0.05 * expected_td);
        let expected_gamma = 1.5 * (1.0 - 0.0005 * (0.4 + 0.1) * expected_td);
        assert_eq!(out.state.gamma, expected_gamma);
        assert_eq!(out.state.step, 6);

        let mean_cfg = LossConfig {
            reduction: Reduction::Mean,
            ..cfg
        };
        let out = epoch_loss(&batch, &state, &mean_cfg, &pipe, &mut cache).unwrap();
        let expected_gamma = 1.5 * (1.0 - 0.0005 * (0.5 / 2.0) * (expected_td / 2.0));
        assert_eq!(out.state.gamma, expected_gamma);
    }

    #[test]
    fn epoch_rejects_mismatched_shapes() {
        let cfg = no_warmup();
        let gt = disc_map("gt", 16, 16, 6);
        let pred = SegMap::empty(8, 8, "p").unwrap();
        let batch = vec![EpochSample { gt, pred, ce: 0.0 }];
        let err = epoch_loss(
            &batch,
            &SchedulerState::new(&cfg),
            &cfg,
            &PipelineConfig::default(),
            &mut DiagramCache::new(),
        );
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn cross_entropy_reference() {
        let gt = SegMap::new(2, 1, vec![1, 0], "g").unwrap();
        let ce = binary_cross_entropy(&gt, &[0.5, 0.5]).unwrap();
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(binary_cross_entropy(&gt, &[0.5]).is_err());
    }
}
