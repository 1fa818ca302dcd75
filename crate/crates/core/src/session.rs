//! Stateful training-loop surface for embedding hosts.
//!
//! A [`Session`] owns the pipeline and loss settings, the scheduler state and
//! the ground-truth diagram cache. Maps arrive as contiguous row-major `u8`
//! buffers. All computation is delegated to the library functions, so a
//! session gives the same numbers as calling them directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{
    self, DiagramCache, EpochSample, LossConfig, Reduction, SchedulerState, StepRecord,
};
use crate::pimage::{self, PersistenceImage, PersistenceImageConfig, PipelineConfig};
use crate::segmap::SegMap;

/// Flat parameter set accepted by [`Session::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionParams {
    pub bandwidth: f64,
    pub cap: f64,
    pub sigma2: f64,
    pub pi_rows: usize,
    pub pi_cols: usize,
    pub extent_birth: f64,
    pub extent_life: f64,
    pub include_dim0: bool,
    pub beta: f64,
    pub lambda: f64,
    pub gamma0: f64,
    pub gamma_min: f64,
    pub warmup: u64,
    pub reduction: Reduction,
}

impl Default for SessionParams {
    fn default() -> Self {
        let pipeline = PipelineConfig::default();
        let loss = LossConfig::default();
        Self {
            bandwidth: pipeline.bandwidth,
            cap: pipeline.cap,
            sigma2: pipeline.image.sigma2,
            pi_rows: pipeline.image.rows,
            pi_cols: pipeline.image.cols,
            extent_birth: pipeline.image.birth_max,
            extent_life: pipeline.image.lifetime_max,
            include_dim0: pipeline.image.include_dim0,
            beta: loss.beta,
            lambda: loss.lambda,
            gamma0: loss.gamma0,
            gamma_min: loss.gamma_min,
            warmup: loss.warmup_steps,
            reduction: loss.reduction,
        }
    }
}

impl SessionParams {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            bandwidth: self.bandwidth,
            cap: self.cap,
            image: PersistenceImageConfig {
                rows: self.pi_rows,
                cols: self.pi_cols,
                birth_max: self.extent_birth,
                lifetime_max: self.extent_life,
                sigma2: self.sigma2,
                gamma: self.gamma0,
                include_dim0: self.include_dim0,
            },
        }
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig {
            beta: self.beta,
            lambda: self.lambda,
            gamma0: self.gamma0,
            warmup_steps: self.warmup,
            gamma_min: self.gamma_min,
            reduction: self.reduction,
        }
    }
}

/// Borrowed view of a row-major label buffer.
#[derive(Debug, Clone, Copy)]
pub struct MapView<'a> {
    pub data: &'a [u8],
    pub width: usize,
    pub height: usize,
}

impl<'a> MapView<'a> {
    pub fn new(data: &'a [u8], width: usize, height: usize) -> Self {
        Self {
            data,
            width,
            height,
        }
    }

    pub fn to_segmap(&self, source_id: impl Into<String>) -> Result<SegMap> {
        SegMap::new(self.width, self.height, self.data.to_vec(), source_id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochResult {
    pub losses: Vec<f64>,
    pub tds: Vec<f64>,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct Session {
    params: SessionParams,
    pipeline: PipelineConfig,
    loss: LossConfig,
    state: SchedulerState,
    cache: DiagramCache,
}

impl Session {
    pub fn new(params: SessionParams) -> Result<Self> {
        let pipeline = params.pipeline();
        let loss = params.loss();
        pipeline.validate()?;
        loss.validate()?;
        let state = SchedulerState::new(&loss);
        Ok(Self {
            params,
            pipeline,
            loss,
            state,
            cache: DiagramCache::new(),
        })
    }

    pub fn params(&self) -> &SessionParams {
        &self.params
    }

    pub fn gamma(&self) -> f64 {
        self.state.gamma
    }

    pub fn step(&self) -> u64 {
        self.state.step
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.state.history
    }

    pub fn cached_diagrams(&self) -> usize {
        self.cache.len()
    }

    /// Z-normalized PI of one map under the session's current γ.
    pub fn persistence_image(&self, map: MapView<'_>) -> Result<PersistenceImage> {
        let seg = map.to_segmap("")?;
        let mut pipeline = self.pipeline;
        pipeline.image.gamma = self.state.gamma;
        pimage::persistence_image(&seg, &pipeline)
    }

    /// TD between two maps under the current γ. Neither map is cached.
    pub fn td(&self, gt: MapView<'_>, pred: MapView<'_>) -> Result<f64> {
        let gt = gt.to_segmap("")?;
        let pred = pred.to_segmap("")?;
        gt.ensure_same_shape(&pred)?;
        let mut pipeline = self.pipeline;
        pipeline.image.gamma = self.state.gamma;
        let a = pimage::persistence_image(&gt, &pipeline)?;
        let b = pimage::persistence_image(&pred, &pipeline)?;
        loss::topological_dissimilarity(&a, &b)
    }

    /// One training epoch: per-image TD and joint loss, then one γ update.
    ///
    /// `gt_ids` names the ground-truth maps so their diagrams are cached
    /// across epochs. Without ids nothing is cached.
    pub fn epoch(
        &mut self,
        gt: &[MapView<'_>],
        pred: &[MapView<'_>],
        ce: &[f64],
        gt_ids: Option<&[&str]>,
    ) -> Result<EpochResult> {
        if gt.len() != pred.len() || gt.len() != ce.len() {
            return Err(Error::Contract(format!(
                "batch lengths differ: {} gt, {} pred, {} ce",
                gt.len(),
                pred.len(),
                ce.len()
            )));
        }
        if let Some(ids) = gt_ids {
            if ids.len() != gt.len() {
                return Err(Error::Contract(format!(
                    "{} ids for {} gt maps",
                    ids.len(),
                    gt.len()
                )));
            }
        }
        let mut batch = Vec::with_capacity(gt.len());
        for i in 0..gt.len() {
            let id = match gt_ids {
                Some(ids) => ids[i].to_string(),
                None => format!("#{i}"),
            };
            batch.push(EpochSample {
                gt: gt[i].to_segmap(id.clone())?,
                pred: pred[i].to_segmap(id)?,
                ce: ce[i],
            });
        }
        let mut scratch = DiagramCache::new();
        let cache = if gt_ids.is_some() {
            &mut self.cache
        } else {
            &mut scratch
        };
        let out = loss::epoch_loss(&batch, &self.state, &self.loss, &self.pipeline, cache)?;
        self.state = out.state;
        Ok(EpochResult {
            losses: out.losses,
            tds: out.tds,
            gamma: self.state.gamma,
        })
    }
}
