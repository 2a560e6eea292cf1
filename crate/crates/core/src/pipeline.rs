//! Two-scale unmixing orchestration: segment, coarsen, solve, replicate,
//! regularize. The homogeneity-driven variant refines the segmentation
//! before handing it to the two-scale solve.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homogeneity;
use crate::scalespace;
use crate::slic::{self, SlicParams};
use crate::solver::{self, SolveResult};
use crate::synth;
use crate::types::{
    self, AbundanceMap, HomogeneityParams, HyperCube, SegmentationMap, SolverParams,
    SpectralLibrary,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PipelineMode {
    /// Two-scale unmixing on a single-scale segmentation.
    Mua,
    /// Hierarchically refined segmentation, then two-scale unmixing.
    Hmua,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    pub slic: SlicParams,
    /// Strictly decreasing superpixel sizes for the refinement rounds.
    /// May be empty, in which case hmua degrades to mua on the initial
    /// segmentation.
    #[serde(default)]
    pub refine_sigmas: Vec<f64>,
    pub homogeneity: HomogeneityParams,
    pub solver: SolverParams,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.slic.validate()?;
        self.homogeneity.validate()?;
        self.solver.validate()?;
        if self.mode == PipelineMode::Hmua && !self.refine_sigmas.is_empty() {
            if self.refine_sigmas[0] >= self.slic.sigma {
                return Err(Error::NonDecreasingSigmas(format!(
                    "first refinement size {} must be below the initial size {}",
                    self.refine_sigmas[0], self.slic.sigma
                )));
            }
            for pair in self.refine_sigmas.windows(2) {
                if pair[1] >= pair[0] {
                    return Err(Error::NonDecreasingSigmas(format!(
                        "{} does not decrease to {}",
                        pair[0], pair[1]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Everything a run reports besides the abundances themselves.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineDiagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_trace: Option<Vec<f64>>,
    pub k_initial: usize,
    pub k_final: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_per_round: Option<Vec<usize>>,
    pub iters_coarse: usize,
    pub iters_fine: usize,
    pub coarse_residual: f64,
    pub fine_residual: f64,
    pub objective_coarse: f64,
    pub objective_fine: f64,
    pub runtime_s: f64,
}

/// Result of a full unmixing run.
#[derive(Debug, Clone)]
pub struct UnmixOutput {
    pub abundances: AbundanceMap,
    pub segmentation: SegmentationMap,
    pub coarse: SolveResult,
    pub fine: SolveResult,
    pub diagnostics: PipelineDiagnostics,
}

/// Two-scale unmixing on a given segmentation: average into superpixels,
/// solve the coarse problem, replicate the estimate back, then solve the
/// regularized original-scale problem.
pub fn mua_unmix(
    cube: &HyperCube,
    lib: &SpectralLibrary,
    seg: &SegmentationMap,
    cfg: &PipelineConfig,
) -> Result<(AbundanceMap, SolveResult, SolveResult)> {
    types::validate(cube, lib)?;
    cfg.validate()?;
    if seg.rows() != cube.rows() || seg.cols() != cube.cols() {
        return Err(Error::DimensionMismatch(format!(
            "segmentation is {}x{}, cube is {}x{}",
            seg.rows(),
            seg.cols(),
            cube.rows(),
            cube.cols()
        )));
    }
    let op = scalespace::build_operator(seg);
    let yc = scalespace::coarsen(&cube.data(), &op)?;
    let coarse = solver::solve_coarse(&yc.view(), lib, cfg.solver.lambda_c, &cfg.solver)?;
    let xd = scalespace::uncoarsen(&coarse.abundances.data(), &op)?;
    let fine = solver::solve_regularized(
        &cube.data(),
        lib,
        &xd.view(),
        cfg.solver.lambda,
        cfg.solver.beta,
        &cfg.solver,
    )?;
    Ok((fine.abundances.clone(), coarse, fine))
}

/// Full homogeneity-driven run: initial oversegmentation, refinement with
/// early stop at full homogeneity, then the two-scale solve on the final
/// segmentation. Also used for plain mua mode, where refinement is skipped.
pub fn hmua_unmix(
    cube: &HyperCube,
    lib: &SpectralLibrary,
    cfg: &PipelineConfig,
) -> Result<UnmixOutput> {
    types::validate(cube, lib)?;
    cfg.validate()?;
    let started = Instant::now();

    let seg0 = slic::slic_segment(cube, &cfg.slic, None)?;
    let k_initial = seg0.label_count();

    let (seg, eta_trace, k_per_round) = match cfg.mode {
        PipelineMode::Mua => (seg0, None, None),
        PipelineMode::Hmua => {
            let (seg, trace) = homogeneity::refine(
                cube,
                &seg0,
                &cfg.refine_sigmas,
                &cfg.slic,
                &cfg.homogeneity,
            )?;
            let k = vec![seg.label_count()];
            (seg, Some(trace), Some(k))
        }
    };

    let (abundances, coarse, fine) = mua_unmix(cube, lib, &seg, cfg)?;
    let diagnostics = PipelineDiagnostics {
        eta_trace: eta_trace.clone(),
        k_initial,
        k_final: seg.label_count(),
        k_per_round,
        iters_coarse: coarse.iterations,
        iters_fine: fine.iterations,
        coarse_residual: coarse.primal_residual.max(coarse.dual_residual),
        fine_residual: fine.primal_residual.max(fine.dual_residual),
        objective_coarse: coarse.objective,
        objective_fine: fine.objective,
        runtime_s: started.elapsed().as_secs_f64(),
    };
    Ok(UnmixOutput {
        abundances,
        segmentation: seg,
        coarse,
        fine,
        diagnostics,
    })
}

/// One evaluated grid point.
#[derive(Debug, Clone, Serialize)]
pub struct GridRow {
    pub index: usize,
    pub config: PipelineConfig,
    pub sre_db: Option<f64>,
    pub runtime_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Evaluate every configuration against the ground truth and rank rows by
/// SRE, best first. Failed points are kept with their error message instead
/// of aborting the search.
pub fn grid_search(
    cube: &HyperCube,
    lib: &SpectralLibrary,
    truth: &AbundanceMap,
    grid: &[PipelineConfig],
) -> Result<Vec<GridRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty parameter grid".into()));
    }
    let mut rows: Vec<GridRow> = grid
        .par_iter()
        .enumerate()
        .map(|(index, cfg)| {
            let started = Instant::now();
            let outcome = hmua_unmix(cube, lib, cfg)
                .and_then(|out| synth::sre(truth, &out.abundances));
            let runtime_s = started.elapsed().as_secs_f64();
            match outcome {
                Ok(sre_db) => GridRow {
                    index,
                    config: cfg.clone(),
                    sre_db: Some(sre_db),
                    runtime_s,
                    error: None,
                },
                Err(e) => GridRow {
                    index,
                    config: cfg.clone(),
                    sre_db: None,
                    runtime_s,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        match (a.sre_db, b.sre_db) {
            (Some(x), Some(y)) => y
                .partial_cmp(&x)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| config_key(&a.config).cmp(&config_key(&b.config)))
                .then(a.index.cmp(&b.index)),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.index.cmp(&b.index),
        }
    });
    Ok(rows)
}

fn config_key(cfg: &PipelineConfig) -> String {
    serde_json::to_string(cfg).unwrap_or_default()
}
