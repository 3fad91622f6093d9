use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{influence_radius_checked, observed_rate, theoretical_rate, StudyConfig};
use crate::error::{Error, Result};
use crate::geometry::{
    covering_radius, perturbed_lattice, uniform_volumes, voronoi_decompose, Aabb, CellList, ParticleSystem, RectDomain,
    VoronoiDiagram,
};
use crate::indicators::{voronoi_deviation, voronoi_deviation_bound, voronoi_deviation_exact_capped, DeviationKind};
use crate::operators::{AnalyticField, FieldSamples, OperatorKind, Operators};
use crate::par;
use crate::weights::{catalog_weight, RadialWeight};

/// Exact and greedy `d_N` on a small window of one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub n_particles: usize,
    pub window: f64,
    pub exact: f64,
    pub bound: f64,
}

/// Particle positions and indicators of one refinement level. Independent of
/// `m` and of the weight, so it is shared across studies.
#[derive(Clone, Debug)]
pub struct LevelGeometry {
    pub dx: f64,
    pub seed: u64,
    pub coords: Vec<f64>,
    pub volumes: Vec<f64>,
    pub r_n: f64,
    pub d_n: f64,
    pub d_n_kind: DeviationKind,
    pub spot: Option<SpotCheck>,
}

/// Cache of level geometry keyed by spacing, seed, noise and domain.
#[derive(Default)]
pub struct LevelCache {
    levels: HashMap<(u64, u64, u64, String), Arc<LevelGeometry>>,
}

/// Seed of the lattice at spacing `dx`: a fresh stream per level, fixed by the
/// study seed.
fn level_seed(seed: u64, dx: f64) -> u64 {
    let mut z = seed ^ dx.to_bits().rotate_left(17);
    // splitmix64 finalizer
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl LevelCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn get_or_build(
        &mut self,
        domain: &RectDomain,
        dx: f64,
        noise: f64,
        seed: u64,
        lp_cap: usize,
        spot_check: bool,
    ) -> Result<Arc<LevelGeometry>> {
        let key = (dx.to_bits(), seed, noise.to_bits(), format!("{domain:?}"));
        if let Some(level) = self.levels.get(&key) {
            if level.spot.is_some() || !spot_check {
                return Ok(level.clone());
            }
        }
        let level = Arc::new(build_level(domain, dx, noise, seed, lp_cap, spot_check)?);
        self.levels.insert(key, level.clone());
        Ok(level)
    }
}

fn build_level(
    domain: &RectDomain,
    dx: f64,
    noise: f64,
    seed: u64,
    lp_cap: usize,
    spot_check: bool,
) -> Result<LevelGeometry> {
    let start = Instant::now();
    let seed = level_seed(seed, dx);
    let coords = perturbed_lattice(dx, noise, seed, domain)?;
    let n = coords.len() / domain.dim();
    if n == 0 {
        return Err(Error::InvalidParticles(format!("no lattice sites at dx = {dx}")));
    }
    let volumes = uniform_volumes(n, domain);
    let ps = ParticleSystem::new(domain, coords, volumes, domain.extension() * 0.5)?;
    let diagram = voronoi_decompose(&ps, domain)?;
    let r_n = covering_radius(&diagram, ps.coords());
    let mut dev = voronoi_deviation(&ps, &diagram, lp_cap)?;
    dev.plan = None;
    let spot = if spot_check {
        Some(spot_check_deviation(&ps, domain, dx, lp_cap)?)
    } else {
        None
    };
    log::info!(
        "level dx = {dx}: N = {n}, r_N = {r_n:.6e}, d_N ({}) = {:.6e} in {:.2?}",
        dev.kind,
        dev.value,
        start.elapsed()
    );
    let (coords, volumes) = (ps.coords().to_vec(), ps.volumes().to_vec());
    Ok(LevelGeometry {
        dx,
        seed,
        coords,
        volumes,
        r_n,
        d_n: dev.value,
        d_n_kind: dev.kind,
        spot,
    })
}

/// Exact `d_N` on a sub-instance: the particles inside a square window at the
/// centre of the domain (shrunk until at most `cap` remain), their Voronoi
/// cells clipped to the window and their volumes rescaled to its area.
pub fn spot_check_deviation(ps: &ParticleSystem, domain: &RectDomain, dx: f64, cap: usize) -> Result<SpotCheck> {
    let dim = ps.dim();
    let centre: Vec<f64> = domain
        .lower()
        .iter()
        .zip(domain.upper())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let mut half = 0.5 * (cap as f64).powf(1.0 / dim as f64) * 0.9 * dx;
    loop {
        let lower: Vec<f64> = centre.iter().map(|c| c - half).collect();
        let upper: Vec<f64> = centre.iter().map(|c| c + half).collect();
        let window = Aabb::new(lower, upper)?;
        let inside: Vec<usize> = (0..ps.len()).filter(|&i| window.contains(ps.point(i))).collect();
        if inside.len() > cap {
            half *= 0.9;
            continue;
        }
        if inside.is_empty() {
            return Err(Error::InvalidArgument("spot-check window holds no particles".into()));
        }
        let coords: Vec<f64> = inside.iter().flat_map(|&i| ps.point(i).iter().copied()).collect();
        let diagram = VoronoiDiagram::build(dim, &coords, &window)?;
        let raw: Vec<f64> = inside.iter().map(|&i| ps.volumes()[i]).collect();
        let total: f64 = raw.iter().sum();
        let area = window.volume();
        let vols: Vec<f64> = raw.iter().map(|v| v * area / total).collect();
        let sub = ParticleSystem::from_parts(dim, coords, vols, dx)?;
        let exact = voronoi_deviation_exact_capped(&sub, &diagram, cap)?.value;
        let bound = voronoi_deviation_bound(&sub, &diagram)?.value;
        return Ok(SpotCheck {
            n_particles: inside.len(),
            window: 2.0 * half,
            exact,
            bound,
        });
    }
}

/// Outcome of one level of a study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub dx: f64,
    pub h: f64,
    pub n_particles: usize,
    pub r_n: f64,
    pub d_n_kind: DeviationKind,
    pub d_n: f64,
    pub rel_error: Option<f64>,
    /// Set when the level failed; the study carries on with the next one.
    pub failure: Option<String>,
    pub spot: Option<SpotCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    /// Moment order `n` of the weight.
    pub moment_order: u32,
    pub rate_theoretical: Option<f64>,
    pub levels: Vec<LevelResult>,
    /// `rates[k]` between levels `k - 1` and `k`; `None` for the first level
    /// and wherever an error is missing.
    pub rates: Vec<Option<f64>>,
}

impl StudyResult {
    /// Rate between the two finest levels.
    pub fn finest_rate(&self) -> Option<f64> {
        self.rates.last().copied().flatten()
    }
}

/// Largest `|exact|` (Euclidean norm for the gradient) over an
/// `samples x samples` grid of the closed domain.
fn denominator(field: &dyn AnalyticField, kind: OperatorKind, domain: &RectDomain, samples: usize) -> f64 {
    let (lo, hi) = (domain.lower(), domain.upper());
    let dim = domain.dim();
    let total = samples.pow(dim as u32);
    let rows = par::map_indices(total.div_ceil(samples), |chunk| {
        let mut best = 0.0f64;
        let mut x = vec![0.0; dim];
        for flat in chunk * samples..((chunk + 1) * samples).min(total) {
            let mut rest = flat;
            for k in (0..dim).rev() {
                let i = rest % samples;
                rest /= samples;
                x[k] = lo[k] + (hi[k] - lo[k]) * i as f64 / (samples - 1) as f64;
            }
            best = best.max(exact_magnitude(field, kind, &x));
        }
        best
    });
    rows.into_iter().fold(0.0, f64::max)
}

fn exact_magnitude(field: &dyn AnalyticField, kind: OperatorKind, x: &[f64]) -> f64 {
    match kind {
        OperatorKind::Interp => field.value(x).abs(),
        OperatorKind::Grad => field.gradient(x).iter().map(|v| v * v).sum::<f64>().sqrt(),
        OperatorKind::Lap => field.laplacian(x).abs(),
    }
}

fn pointwise_error(field: &dyn AnalyticField, kind: OperatorKind, x: &[f64], approx: &[f64]) -> f64 {
    match kind {
        OperatorKind::Interp => (field.value(x) - approx[0]).abs(),
        OperatorKind::Grad => field
            .gradient(x)
            .iter()
            .zip(approx)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt(),
        OperatorKind::Lap => (field.laplacian(x) - approx[0]).abs(),
    }
}

/// Max over particles in the open domain of the pointwise error of each
/// `(weight, operator)` pair, with one neighbor search per particle.
fn max_errors(
    ps: &ParticleSystem,
    pairs: &[(RadialWeight, OperatorKind)],
    field: &dyn AnalyticField,
    domain: &RectDomain,
) -> Result<Vec<f64>> {
    let ops: Vec<Operators> = pairs
        .iter()
        .map(|(w, _)| Operators::new(ps, w))
        .collect::<Result<_>>()?;
    let samples = FieldSamples::new(ps.points().map(|p| field.value(p)).collect());
    let interior_box = domain.interior();
    let interior: Vec<usize> = (0..ps.len()).filter(|&i| interior_box.contains(ps.point(i))).collect();
    if interior.is_empty() {
        return Err(Error::InvalidParticles("no particles inside the domain".into()));
    }
    let cells = CellList::new(ps.coords(), ps.dim(), ps.h());
    const CHUNK: usize = 512;
    let chunks = par::map_indices(interior.len().div_ceil(CHUNK), |c| {
        let mut best = vec![0.0f64; pairs.len()];
        let mut neigh = Vec::new();
        for &i in &interior[c * CHUNK..((c + 1) * CHUNK).min(interior.len())] {
            let x = ps.point(i);
            cells.neighbors_with_dist2(ps.coords(), x, ps.h(), &mut neigh);
            for (k, (op, (_, kind))) in ops.iter().zip(pairs).enumerate() {
                let approx = op.apply_with_neighbors(*kind, &samples, x, samples.values[i], &neigh);
                let e = pointwise_error(field, *kind, x, &approx);
                // a NaN error must not be hidden by max
                best[k] = if e.is_nan() || best[k].is_nan() {
                    f64::NAN
                } else {
                    best[k].max(e)
                };
            }
        }
        best
    });
    let mut out = vec![0.0f64; pairs.len()];
    for c in chunks {
        for k in 0..out.len() {
            out[k] = if c[k].is_nan() || out[k].is_nan() {
                f64::NAN
            } else {
                out[k].max(c[k])
            };
        }
    }
    Ok(out)
}

/// Relative max error of one operator: max over particles in the open domain
/// of the pointwise error, over the max of the exact quantity on a
/// `samples x samples` grid of the closed domain.
pub fn relative_error(
    ps: &ParticleSystem,
    w: &RadialWeight,
    field: &dyn AnalyticField,
    kind: OperatorKind,
    domain: &RectDomain,
    samples: usize,
) -> Result<f64> {
    let denom = denominator(field, kind, domain, samples);
    if !(denom > 0.0) {
        return Err(Error::InvalidArgument(
            "exact field vanishes on the domain; relative error undefined".into(),
        ));
    }
    Ok(max_errors(ps, &[(w.clone(), kind)], field, domain)?[0] / denom)
}

/// Runs one study with a private level cache.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    let mut cache = LevelCache::new();
    let pair = [(cfg.weight.clone(), cfg.operator)];
    Ok(run_study_matrix(cfg, &pair, &mut cache)?.remove(0))
}

/// Runs the studies `cfg` with each `(weight, operator)` pair substituted,
/// sharing geometry and neighbor searches across pairs.
pub fn run_study_matrix(
    cfg: &StudyConfig,
    pairs: &[(String, OperatorKind)],
    cache: &mut LevelCache,
) -> Result<Vec<StudyResult>> {
    let domain = cfg.validate()?;
    let field = cfg.test_function.field();
    let weights: Vec<(RadialWeight, OperatorKind)> = pairs
        .iter()
        .map(|(name, kind)| Ok((catalog_weight(name)?, *kind)))
        .collect::<Result<_>>()?;
    let denominators: Vec<f64> = weights
        .iter()
        .map(|(_, kind)| denominator(field.as_ref(), *kind, &domain, cfg.denominator_samples))
        .collect();
    if denominators.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidArgument(
            "exact field vanishes on the domain; relative error undefined".into(),
        ));
    }

    let mut per_pair: Vec<Vec<LevelResult>> = vec![Vec::new(); pairs.len()];
    for &dx in &cfg.dx_levels {
        let h = influence_radius_checked(dx, cfg.m, domain.extension())?;
        let outcome = cache
            .get_or_build(&domain, dx, cfg.noise, cfg.seed, cfg.exact_lp_cap, cfg.spot_check)
            .and_then(|level| {
                let ps = ParticleSystem::new(&domain, level.coords.clone(), level.volumes.clone(), h)?;
                let start = Instant::now();
                let errors = max_errors(&ps, &weights, field.as_ref(), &domain)?;
                log::info!(
                    "dx = {dx}, m = {}: {} operator errors in {:.2?}",
                    cfg.m,
                    pairs.len(),
                    start.elapsed()
                );
                Ok((level, errors))
            });
        match outcome {
            Ok((level, errors)) => {
                for k in 0..pairs.len() {
                    let rel = errors[k] / denominators[k];
                    per_pair[k].push(LevelResult {
                        dx,
                        h,
                        n_particles: level.volumes.len(),
                        r_n: level.r_n,
                        d_n_kind: level.d_n_kind,
                        d_n: level.d_n,
                        rel_error: rel.is_finite().then_some(rel),
                        failure: (!rel.is_finite()).then(|| "non-finite error".to_string()),
                        spot: level.spot.clone(),
                    });
                }
            }
            Err(e) => {
                log::warn!("level dx = {dx} failed: {e}");
                for levels in per_pair.iter_mut() {
                    levels.push(LevelResult {
                        dx,
                        h,
                        n_particles: 0,
                        r_n: f64::NAN,
                        d_n_kind: DeviationKind::UpperBound,
                        d_n: f64::NAN,
                        rel_error: None,
                        failure: Some(e.to_string()),
                        spot: None,
                    });
                }
            }
        }
    }

    Ok(pairs
        .iter()
        .zip(&weights)
        .zip(per_pair)
        .map(|(((name, kind), (w, _)), levels)| {
            let rates = (0..levels.len())
                .map(|k| {
                    if k == 0 {
                        return None;
                    }
                    let (a, b) = (&levels[k - 1], &levels[k]);
                    observed_rate(a.rel_error?, a.h, b.rel_error?, b.h).ok()
                })
                .collect();
            StudyResult {
                config: StudyConfig {
                    weight: name.clone(),
                    operator: *kind,
                    ..cfg.clone()
                },
                moment_order: w.moment_order,
                rate_theoretical: theoretical_rate(*kind, cfg.m, w.moment_order),
                levels,
                rates,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{dx_range, table_weights};
    use crate::operators::SineField;

    fn small(m: f64, weight: &str, op: OperatorKind) -> StudyConfig {
        StudyConfig {
            dx_levels: dx_range(5, 6),
            m,
            weight: weight.into(),
            operator: op,
            denominator_samples: 64,
            ..StudyConfig::default()
        }
    }

    #[test]
    fn study_is_reproducible() {
        let cfg = small(3.0, "I1", OperatorKind::Interp);
        let a = run_study(&cfg).unwrap();
        let b = run_study(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.levels.len(), 2);
        assert_eq!(a.levels[0].n_particles, 1521);
        assert!(a.rates[0].is_none() && a.rates[1].is_some());
        assert_eq!(a.rate_theoretical, Some(2.0));
        let spot = a.levels[0].spot.as_ref().unwrap();
        assert!(spot.n_particles <= 40 && spot.exact <= spot.bound + 1e-12);
    }

    #[test]
    fn matrix_matches_single_studies() {
        let cfg = small(5.0, "G1", OperatorKind::Grad);
        let pairs: Vec<(String, OperatorKind)> = table_weights(OperatorKind::Grad)
            .iter()
            .map(|w| (w.to_string(), OperatorKind::Grad))
            .collect();
        let mut cache = LevelCache::new();
        let all = run_study_matrix(&cfg, &pairs, &mut cache).unwrap();
        assert_eq!(cache.len(), 2);
        let single = run_study(&small(5.0, "G2", OperatorKind::Grad)).unwrap();
        assert_eq!(all[1], single);
    }

    #[test]
    fn relative_error_matches_direct_loop() {
        let domain = RectDomain::unit_cube(2, 0.1).unwrap();
        let coords = perturbed_lattice(2f64.powi(-5), 0.25, 9, &domain).unwrap();
        let v = uniform_volumes(coords.len() / 2, &domain);
        let ps = ParticleSystem::new(&domain, coords, v, 0.08125).unwrap();
        let w = catalog_weight("L2").unwrap();
        let rel = relative_error(&ps, &w, &SineField, OperatorKind::Lap, &domain, 32).unwrap();
        let ops = Operators::new(&ps, &w).unwrap();
        let f = FieldSamples::sample(&ps, Arc::new(SineField));
        let mut num = 0.0f64;
        for i in 0..ps.len() {
            let x = ps.point(i);
            if x[0] > 0.0 && x[0] < 1.0 && x[1] > 0.0 && x[1] < 1.0 {
                num = num.max((ops.laplacian(&f, x).unwrap() - SineField.laplacian(x)).abs());
            }
        }
        // 32 x 32 grid of [0,1]^2 reaches |sin| = sin(2 pi 8/31) at best
        let mut den = 0.0f64;
        for i in 0..32 {
            for j in 0..32 {
                let x = [i as f64 / 31.0, j as f64 / 31.0];
                den = den.max(SineField.laplacian(&x).abs());
            }
        }
        assert!((rel - num / den).abs() < 1e-15 * rel.max(1.0));
    }

    #[test]
    fn zero_field_denominator_path() {
        struct Zero;
        impl AnalyticField for Zero {
            fn value(&self, _: &[f64]) -> f64 {
                0.0
            }
            fn gradient(&self, x: &[f64]) -> Vec<f64> {
                vec![0.0; x.len()]
            }
            fn laplacian(&self, _: &[f64]) -> f64 {
                0.0
            }
        }
        let domain = RectDomain::unit_cube(2, 0.1).unwrap();
        let coords = perturbed_lattice(2f64.powi(-4), 0.0, 0, &domain).unwrap();
        let v = uniform_volumes(coords.len() / 2, &domain);
        let ps = ParticleSystem::new(&domain, coords, v, 0.09).unwrap();
        let w = catalog_weight("I1").unwrap();
        assert!(relative_error(&ps, &w, &Zero, OperatorKind::Interp, &domain, 16).is_err());
    }

    #[test]
    fn linear_gradient_reproduction_on_pair() {
        // the two-particle gradient example, through the error machinery
        struct Linear;
        impl AnalyticField for Linear {
            fn value(&self, x: &[f64]) -> f64 {
                x[0]
            }
            fn gradient(&self, _: &[f64]) -> Vec<f64> {
                vec![1.0, 0.0]
            }
            fn laplacian(&self, _: &[f64]) -> f64 {
                0.0
            }
        }
        let ps =
            ParticleSystem::from_parts(2, vec![0.2, 0.0, -0.2, 0.0, 0.0, 0.0], vec![0.05, 0.05, 0.05], 0.5).unwrap();
        let domain = RectDomain::new(vec![-0.01, -0.01], vec![0.01, 0.01], 0.6).unwrap();
        let w = catalog_weight("G1").unwrap();
        let rel = relative_error(&ps, &w, &Linear, OperatorKind::Grad, &domain, 8).unwrap();
        let wh = 6.0 / std::f64::consts::PI * 0.4 * 0.6 / 0.25;
        assert!((rel - (1.0 - 4.0 * 0.05 * wh)).abs() < 1e-14);
    }
}
