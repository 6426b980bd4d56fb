//! Per-energy density certificates and energy sweeps.
//!
//! A certificate chains three numerical steps: a near-identity power of each
//! of the four generators, the principal logarithms of those powers, and the
//! rank of the Lie algebra they generate. Rank 10 with every power inside the
//! `delta` ball means the powers generate a dense subgroup of Sp(2, ℝ)
//! provided the `delta` ball sits inside the neighborhood where that
//! criterion applies; density in turn separates the top two Lyapunov
//! exponents and makes them positive. The label
//! [`Implication::SeparatedPositiveExponents`] is conditional on that
//! assumption and on exact arithmetic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diophantine::{
    power_in_neighborhood, replay_hit, DiophantineHit, DEFAULT_BIG_M, DEFAULT_DELTA, DEFAULT_RETRIES,
};
use crate::error::{Error, Result};
use crate::liealg::{
    explicit_certificate_path, lie_closure_rank, principal_log_power, LogWitness, DEFAULT_SVD_TOL, DIM,
};
use crate::lyapunov::{
    estimate_spectrum, separation_report, LyapunovEstimate, LyapunovParams, RngSeed, SeparationReport,
};
use crate::model::{generator_set, transfer_matrix, BernoulliConfig, TransferMatrix, DEFAULT_P, ENERGY_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub big_m: u64,
    pub delta: f64,
    pub svd_tol: f64,
    pub max_retries: u32,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            big_m: DEFAULT_BIG_M,
            delta: DEFAULT_DELTA,
            svd_tol: DEFAULT_SVD_TOL,
            max_retries: DEFAULT_RETRIES,
        }
    }
}

impl CertifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.big_m < 4 {
            return Err(Error::InvalidParameter(format!(
                "big_m must be >= 4, got {}",
                self.big_m
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be > 0, got {}",
                self.delta
            )));
        }
        if !(self.svd_tol > 0.0 && self.svd_tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "svd_tol must be in (0, 1), got {}",
                self.svd_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Implication {
    SeparatedPositiveExponents,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCertificate {
    pub e: f64,
    pub certified: bool,
    pub rank: usize,
    pub rank_margin: f64,
    pub closure_depth: usize,
    pub delta: f64,
    pub big_m: u64,
    pub svd_tol: f64,
    /// One per configuration, indexed by [`BernoulliConfig::index`]; `None`
    /// when no power reached the neighborhood.
    pub hits: [Option<DiophantineHit>; 4],
    /// `‖A^m − I‖₂` per configuration.
    pub dists: [Option<f64>; 4],
    pub det_v1: f64,
    pub det_v2: f64,
    pub det_v1_rel: f64,
    pub det_v2_rel: f64,
    pub explicit_independent: bool,
    pub implication: Implication,
    pub diagnostic: Option<String>,
}

impl DensityCertificate {
    fn uncertified(e: f64, cfg: &CertifyConfig, diagnostic: String) -> Self {
        Self {
            e,
            certified: false,
            rank: 0,
            rank_margin: 0.0,
            closure_depth: 0,
            delta: cfg.delta,
            big_m: cfg.big_m,
            svd_tol: cfg.svd_tol,
            hits: [None; 4],
            dists: [None; 4],
            det_v1: 0.0,
            det_v2: 0.0,
            det_v1_rel: 0.0,
            det_v2_rel: 0.0,
            explicit_independent: false,
            implication: Implication::Inconclusive,
            diagnostic: Some(diagnostic),
        }
    }

    /// Exponents `m_ω`, or 0 where no hit was found.
    pub fn exponents(&self) -> [u64; 4] {
        self.hits.map(|h| h.map_or(0, |h| h.m))
    }
}

pub fn certify_energy(e: f64, cfg: &CertifyConfig) -> Result<DensityCertificate> {
    if !(e > ENERGY_FLOOR) || !e.is_finite() {
        return Err(Error::EnergyOutOfRange { e });
    }
    let gens = BernoulliConfig::ALL
        .iter()
        .map(|&w| transfer_matrix(e, w))
        .collect::<Result<Vec<_>>>()?;
    let gens: [TransferMatrix; 4] = gens.try_into().unwrap();
    certify_generators(e, &gens, cfg)
}

/// Certificate for an arbitrary set of four generators (indexed like
/// [`BernoulliConfig::ALL`]).
pub fn certify_generators(e: f64, gens: &[TransferMatrix; 4], cfg: &CertifyConfig) -> Result<DensityCertificate> {
    cfg.validate()?;
    let mut hits = [None; 4];
    let mut misses = Vec::new();
    for (k, t) in gens.iter().enumerate() {
        match power_in_neighborhood(t, cfg.big_m, cfg.delta, cfg.max_retries) {
            Ok(np) => hits[k] = Some(np.hit),
            Err(err @ Error::NeighborhoodMiss { .. }) => {
                misses.push(format!("{}: {err}", BernoulliConfig::ALL[k]));
            }
            Err(err) => return Err(err),
        }
    }
    if !misses.is_empty() {
        let mut cert = DensityCertificate::uncertified(e, cfg, format!("NeighborhoodMiss; {}", misses.join("; ")));
        cert.hits = hits;
        return Ok(cert);
    }
    Ok(certify_from_hits(e, gens, &hits.map(Option::unwrap), cfg))
}

/// Rebuilds a certificate from recorded hits without searching.
pub fn certify_from_hits(
    e: f64,
    gens: &[TransferMatrix; 4],
    hits: &[DiophantineHit; 4],
    cfg: &CertifyConfig,
) -> DensityCertificate {
    let dists: [f64; 4] = std::array::from_fn(|k| replay_hit(&gens[k], &hits[k]).dist);
    let within = dists.iter().all(|d| *d < cfg.delta);

    let mut logs = Vec::with_capacity(4);
    for (t, hit) in gens.iter().zip(hits) {
        match principal_log_power(t, hit) {
            Ok(w) => logs.push(w),
            Err(err) => {
                let mut cert = DensityCertificate::uncertified(e, cfg, format!("{}: {err}", t.omega));
                cert.hits = hits.map(Some);
                cert.dists = dists.map(Some);
                return cert;
            }
        }
    }
    let logs: [LogWitness; 4] = logs.try_into().unwrap();
    let closure = lie_closure_rank(&logs.map(|w| w.la), cfg.svd_tol).expect("four generators, validated tolerance");
    let explicit = explicit_certificate_path(&logs, cfg.svd_tol);
    let certified = closure.rank == DIM && within;

    let diagnostic = if !within {
        Some(format!("power outside delta ball: dists {dists:?}"))
    } else if closure.rank < DIM {
        Some(format!("Lie closure rank {} < {DIM}", closure.rank))
    } else {
        None
    };
    DensityCertificate {
        e,
        certified,
        rank: closure.rank,
        rank_margin: closure.min_kept_sv,
        closure_depth: closure.depth,
        delta: cfg.delta,
        big_m: cfg.big_m,
        svd_tol: cfg.svd_tol,
        hits: hits.map(Some),
        dists: dists.map(Some),
        det_v1: explicit.det_v1,
        det_v2: explicit.det_v2,
        det_v1_rel: explicit.det_v1_rel,
        det_v2_rel: explicit.det_v2_rel,
        explicit_independent: explicit.independent,
        implication: if certified {
            Implication::SeparatedPositiveExponents
        } else {
            Implication::Inconclusive
        },
        diagnostic,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub consistent: bool,
    pub detail: String,
}

/// A certified energy must show statistically separated positive exponents;
/// an uncertified one imposes nothing.
pub fn cross_validate(cert: &DensityCertificate, est: &LyapunovEstimate) -> Result<CrossCheck> {
    if (cert.e - est.e).abs() > 1e-12 * cert.e.abs().max(1.0) {
        return Err(Error::EnergyMismatch {
            cert: cert.e,
            estimate: est.e,
        });
    }
    let sep = separation_report(est);
    let consistent = !cert.certified || sep.significant;
    let detail = match (cert.certified, sep.significant) {
        (false, _) => "certificate inconclusive; no constraint on exponents".to_string(),
        (true, true) => format!(
            "certified and separated: gap12 = {:.6e}, gamma2 = {:.6e}",
            sep.gap12, sep.positivity_margin
        ),
        (true, false) => format!(
            "certified but exponents not significantly separated: gap12 = {:.6e}, gamma2 = {:.6e}, stderrs = {:?}",
            sep.gap12, sep.positivity_margin, est.stderrs
        ),
    };
    Ok(CrossCheck { consistent, detail })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCheckConfig {
    /// Check every `every`-th certified grid point.
    pub every: usize,
    pub p: f64,
    pub params: LyapunovParams,
    pub seed: u64,
}

impl Default for LyapunovCheckConfig {
    fn default() -> Self {
        Self {
            every: 32,
            p: DEFAULT_P,
            params: LyapunovParams::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub e_min: f64,
    pub e_max: f64,
    pub n_grid: usize,
    pub certify: CertifyConfig,
    pub refine_steps: u32,
    /// How many of the lowest local minima of the rank margin to refine.
    pub margin_minima: usize,
    pub lyapunov: Option<LyapunovCheckConfig>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            e_min: 2.1,
            e_max: 20.0,
            n_grid: 512,
            certify: CertifyConfig::default(),
            refine_steps: 20,
            margin_minima: 4,
            lyapunov: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_min > ENERGY_FLOOR && self.e_min < self.e_max && self.e_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 2 < e_min < e_max, got [{}, {}]",
                self.e_min, self.e_max
            )));
        }
        if self.n_grid < 2 {
            return Err(Error::InvalidParameter(format!(
                "n_grid must be >= 2, got {}",
                self.n_grid
            )));
        }
        if let Some(l) = &self.lyapunov {
            l.params.validate()?;
            if l.every == 0 {
                return Err(Error::InvalidParameter("lyapunov check stride must be >= 1".into()));
            }
        }
        self.certify.validate()
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_grid)
            .map(|k| {
                if k + 1 == self.n_grid {
                    self.e_max
                } else {
                    self.e_min + k as f64 * h
                }
            })
            .collect()
    }

    pub fn spacing(&self) -> f64 {
        (self.e_max - self.e_min) / (self.n_grid - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuspectedInterval {
    pub e_lo: f64,
    pub e_hi: f64,
    pub min_rank: usize,
    /// Uncertified grid indices inside the interval.
    pub grid_points: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginMinimum {
    pub grid_index: usize,
    pub e: f64,
    pub rank_margin: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCheck {
    pub e: f64,
    pub estimate: LyapunovEstimate,
    pub separation: SeparationReport,
    pub check: CrossCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub grid: Vec<f64>,
    pub certificates: Vec<DensityCertificate>,
    /// Every extra energy evaluated during refinement, in evaluation order.
    pub refinements: Vec<DensityCertificate>,
    pub suspected_exceptional: Vec<SuspectedInterval>,
    pub near_exceptional: Vec<MarginMinimum>,
    pub lyapunov_checks: Vec<LyapunovCheck>,
}

impl SweepReport {
    pub fn certified_fraction(&self) -> f64 {
        self.certificates.iter().filter(|c| c.certified).count() as f64 / self.certificates.len() as f64
    }
}

fn certify_or_diagnose(e: f64, cfg: &CertifyConfig) -> DensityCertificate {
    certify_energy(e, cfg).unwrap_or_else(|err| DensityCertificate::uncertified(e, cfg, err.to_string()))
}

/// Bisects between a certified and an uncertified energy, returning the final
/// certified-side endpoint and every certificate evaluated.
fn bisect_edge(
    certified_side: f64,
    uncertified_side: f64,
    steps: u32,
    cfg: &CertifyConfig,
) -> (f64, Vec<DensityCertificate>) {
    let (mut good, mut bad) = (certified_side, uncertified_side);
    let mut evaluated = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        let mid = 0.5 * (good + bad);
        let cert = certify_or_diagnose(mid, cfg);
        if cert.certified {
            good = mid;
        } else {
            bad = mid;
        }
        evaluated.push(cert);
    }
    (good, evaluated)
}

/// Narrows onto the smallest rank margin in `[lo, hi]` by repeatedly keeping
/// the half whose midpoint has the lower margin.
fn refine_margin_minimum(lo: f64, hi: f64, steps: u32, cfg: &CertifyConfig) -> Vec<DensityCertificate> {
    let score = |c: &DensityCertificate| if c.certified { c.rank_margin } else { -1.0 };
    let (mut lo, mut hi) = (lo, hi);
    let mut evaluated = Vec::new();
    for _ in 0..steps {
        let quarter = 0.25 * (hi - lo);
        let left = certify_or_diagnose(lo + quarter, cfg);
        let right = certify_or_diagnose(hi - quarter, cfg);
        if score(&left) <= score(&right) {
            hi = 0.5 * (lo + hi);
        } else {
            lo = 0.5 * (lo + hi);
        }
        evaluated.push(left);
        evaluated.push(right);
    }
    evaluated
}

pub fn sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let grid = cfg.grid();
    let certificates: Vec<DensityCertificate> =
        grid.par_iter().map(|&e| certify_or_diagnose(e, &cfg.certify)).collect();

    // Maximal runs of consecutive uncertified grid points.
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    for (k, c) in certificates.iter().enumerate() {
        if c.certified {
            continue;
        }
        match clusters.last_mut() {
            Some((_, end)) if *end + 1 == k => *end = k,
            _ => clusters.push((k, k)),
        }
    }

    let n = grid.len();
    let refined: Vec<(SuspectedInterval, Vec<DensityCertificate>)> = clusters
        .par_iter()
        .map(|&(i, j)| {
            let mut evaluated = Vec::new();
            let e_lo = if i > 0 {
                let (edge, ev) = bisect_edge(grid[i - 1], grid[i], cfg.refine_steps, &cfg.certify);
                evaluated.extend(ev);
                edge
            } else {
                grid[0]
            };
            let e_hi = if j + 1 < n {
                let (edge, ev) = bisect_edge(grid[j + 1], grid[j], cfg.refine_steps, &cfg.certify);
                evaluated.extend(ev);
                edge
            } else {
                grid[n - 1]
            };
            let min_rank = certificates[i..=j]
                .iter()
                .chain(evaluated.iter().filter(|c| !c.certified))
                .map(|c| c.rank)
                .min()
                .unwrap_or(0);
            let interval = SuspectedInterval {
                e_lo,
                e_hi,
                min_rank,
                grid_points: (i..=j).collect(),
            };
            (interval, evaluated)
        })
        .collect();

    let mut refinements = Vec::new();
    let mut suspected: Vec<SuspectedInterval> = Vec::new();
    for (interval, evaluated) in refined {
        refinements.extend(evaluated);
        match suspected.last_mut() {
            // Neighbouring clusters whose brackets touch are one interval.
            Some(prev) if prev.e_hi >= interval.e_lo => {
                prev.e_hi = interval.e_hi;
                prev.min_rank = prev.min_rank.min(interval.min_rank);
                prev.grid_points.extend(interval.grid_points);
            }
            _ => suspected.push(interval),
        }
    }

    // Lowest interior local minima of the margin among certified points.
    let mut minima: Vec<MarginMinimum> = (1..n.saturating_sub(1))
        .filter(|&k| {
            let c = &certificates[k];
            c.certified
                && c.rank_margin <= certificates[k - 1].rank_margin
                && c.rank_margin <= certificates[k + 1].rank_margin
        })
        .map(|k| MarginMinimum {
            grid_index: k,
            e: grid[k],
            rank_margin: certificates[k].rank_margin,
            certified: true,
        })
        .collect();
    minima.sort_by(|a, b| {
        a.rank_margin
            .total_cmp(&b.rank_margin)
            .then(a.grid_index.cmp(&b.grid_index))
    });
    minima.truncate(cfg.margin_minima);
    let near: Vec<(MarginMinimum, Vec<DensityCertificate>)> = minima
        .par_iter()
        .map(|m| {
            let evaluated = refine_margin_minimum(
                grid[m.grid_index - 1],
                grid[m.grid_index + 1],
                cfg.refine_steps,
                &cfg.certify,
            );
            let best = evaluated
                .iter()
                .min_by(|a, b| {
                    let s = |c: &DensityCertificate| if c.certified { c.rank_margin } else { -1.0 };
                    s(a).total_cmp(&s(b))
                })
                .filter(|c| !c.certified || c.rank_margin < m.rank_margin);
            let refined = match best {
                Some(c) => MarginMinimum {
                    grid_index: m.grid_index,
                    e: c.e,
                    rank_margin: c.rank_margin,
                    certified: c.certified,
                },
                None => *m,
            };
            (refined, evaluated)
        })
        .collect();
    let mut near_exceptional = Vec::new();
    for (m, evaluated) in near {
        near_exceptional.push(m);
        refinements.extend(evaluated);
    }

    let mut lyapunov_checks = Vec::new();
    if let Some(lcfg) = &cfg.lyapunov {
        let picks = certificates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.certified)
            .step_by(lcfg.every);
        for (k, cert) in picks {
            let gen = generator_set(cert.e, lcfg.p)?;
            let estimate = estimate_spectrum(&gen, lcfg.params, RngSeed::new(lcfg.seed, k as u64))?;
            let check = cross_validate(cert, &estimate)?;
            lyapunov_checks.push(LyapunovCheck {
                e: cert.e,
                separation: separation_report(&estimate),
                estimate,
                check,
            });
        }
    }

    Ok(SweepReport {
        config: *cfg,
        grid,
        certificates,
        refinements,
        suspected_exceptional: suspected,
        near_exceptional,
        lyapunov_checks,
    })
}
