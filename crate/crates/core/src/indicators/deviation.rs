use serde::{Deserialize, Serialize};

use super::simplex::{self, SparseColumns};
use crate::error::{Error, Result};
use crate::geometry::{CellList, ParticleSystem, VoronoiDiagram};

/// Default particle-count cap for the exact linear program (`N^2 + N + 1`
/// variables).
pub const DEFAULT_LP_CAP: usize = 40;
/// Marginal residual allowed in a reported plan, relative to the total mass.
pub const PLAN_TOL: f64 = 1e-9;

/// Sparse nonnegative plan `a_ij` with row marginals `|sigma_i|` and column
/// marginals `V_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// `(i, j, a_ij)`, at most one entry per pair.
    pub entries: Vec<(usize, usize, f64)>,
    pub row_targets: Vec<f64>,
    pub col_targets: Vec<f64>,
}

impl TransportPlan {
    pub fn new(entries: Vec<(usize, usize, f64)>, row_targets: Vec<f64>, col_targets: Vec<f64>) -> Self {
        Self {
            entries,
            row_targets,
            col_targets,
        }
    }

    /// Builds a plan from a dense row-major matrix, dropping zeros.
    pub fn from_dense(a: &[f64], row_targets: Vec<f64>, col_targets: Vec<f64>) -> Self {
        let n = row_targets.len();
        let entries = (0..n * n)
            .filter(|&k| a[k] != 0.0)
            .map(|k| (k / n, k % n, a[k]))
            .collect();
        Self {
            entries,
            row_targets,
            col_targets,
        }
    }

    /// Largest marginal violation divided by the total mass.
    pub fn marginal_residual(&self) -> f64 {
        let n = self.row_targets.len();
        let mut rows = vec![0.0; n];
        let mut cols = vec![0.0; n];
        for &(i, j, a) in &self.entries {
            rows[i] += a;
            cols[j] += a;
        }
        let total: f64 = self.row_targets.iter().sum();
        let r = rows.iter().zip(&self.row_targets).map(|(a, b)| (a - b).abs());
        let c = cols.iter().zip(&self.col_targets).map(|(a, b)| (a - b).abs());
        r.chain(c).fold(0.0, f64::max) / total
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries.iter().all(|e| e.2 >= 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationKind {
    Exact,
    UpperBound,
}

impl std::fmt::Display for DeviationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DeviationKind::Exact => "exact",
            DeviationKind::UpperBound => "upper_bound",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationResult {
    pub value: f64,
    pub kind: DeviationKind,
    pub plan: Option<TransportPlan>,
    pub n_particles: usize,
}

fn dist(coords: &[f64], dim: usize, i: usize, j: usize) -> f64 {
    (0..dim)
        .map(|k| (coords[i * dim + k] - coords[j * dim + k]).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn check_inputs(ps: &ParticleSystem, diagram: &VoronoiDiagram) -> Result<()> {
    if diagram.len() != ps.len() || diagram.dim != ps.dim() {
        return Err(Error::InvalidArgument(format!(
            "diagram has {} cells in dimension {}, particle system has {} particles in dimension {}",
            diagram.len(),
            diagram.dim,
            ps.len(),
            ps.dim()
        )));
    }
    if let Some(i) = diagram.volumes.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::ZeroVolumeCell(i));
    }
    Ok(())
}

/// `max_i sum_j (a_ij + a_ji) / |sigma_i| |x_i - x_j|` for the given plan.
pub fn local_deviation(plan: &TransportPlan, ps: &ParticleSystem, diagram: &VoronoiDiagram) -> Result<f64> {
    check_inputs(ps, diagram)?;
    let n = ps.len();
    if plan.row_targets.len() != n {
        return Err(Error::InvalidArgument(
            "plan size does not match the particle system".into(),
        ));
    }
    let mut acc = vec![0.0; n];
    for &(i, j, a) in &plan.entries {
        if i != j {
            let t = a * dist(ps.coords(), ps.dim(), i, j);
            acc[i] += t;
            acc[j] += t;
        }
    }
    Ok(acc.iter().zip(&diagram.volumes).map(|(s, v)| s / v).fold(0.0, f64::max))
}

/// Particle volumes rescaled so that they sum exactly to the diagram volume.
/// The two totals agree to `1e-12` for a valid system; the rescale removes
/// rounding that would make the marginal equations inconsistent.
fn balanced_volumes(ps: &ParticleSystem, diagram: &VoronoiDiagram) -> Vec<f64> {
    let total_v: f64 = ps.volumes().iter().sum();
    let total_s: f64 = diagram.volumes.iter().sum();
    ps.volumes().iter().map(|v| v * total_s / total_v).collect()
}

/// Exact `d_N` from the linear program in `z = (a_11, ..., a_NN, s_1, ..., s_N, q)`.
pub fn voronoi_deviation_exact(ps: &ParticleSystem, diagram: &VoronoiDiagram) -> Result<DeviationResult> {
    voronoi_deviation_exact_capped(ps, diagram, DEFAULT_LP_CAP)
}

pub fn voronoi_deviation_exact_capped(
    ps: &ParticleSystem,
    diagram: &VoronoiDiagram,
    cap: usize,
) -> Result<DeviationResult> {
    check_inputs(ps, diagram)?;
    let n = ps.len();
    if n > cap {
        return Err(Error::TooManyParticles { n, cap });
    }
    let sigma = &diagram.volumes;
    let vols = balanced_volumes(ps, diagram);
    let (coords, dim) = (ps.coords(), ps.dim());

    // rows: 0..n row marginals, n..2n column marginals, 2n..3n q equations
    let mut a = SparseColumns::new(3 * n);
    for i in 0..n {
        for j in 0..n {
            let mut col = vec![(i, 1.0), (n + j, 1.0)];
            if i != j {
                let r = dist(coords, dim, i, j);
                col.push((2 * n + i, r / sigma[i]));
                col.push((2 * n + j, r / sigma[j]));
            }
            a.push(col);
        }
    }
    for i in 0..n {
        a.push(vec![(2 * n + i, 1.0)]);
    }
    a.push((0..n).map(|i| (2 * n + i, -1.0)).collect());
    // q - s_i - sum(...) = 0 is written as s_i + sum(...) - q = 0
    let mut b = Vec::with_capacity(3 * n);
    b.extend_from_slice(sigma);
    b.extend_from_slice(&vols);
    b.extend(std::iter::repeat(0.0).take(n));
    let mut c = vec![0.0; n * n + n + 1];
    c[n * n + n] = 1.0;

    let sol = simplex::solve(&a, &b, &c)?;
    let total: f64 = sigma.iter().sum();
    let scale = total.max(1.0);
    let residual = a.residual(&sol.x, &b);
    if residual > PLAN_TOL * scale {
        return Err(Error::Lp(format!("solution violates the constraints by {residual:e}")));
    }
    let plan = TransportPlan::from_dense(&sol.x[..n * n], sigma.clone(), vols);
    Ok(DeviationResult {
        value: sol.objective.max(0.0),
        kind: DeviationKind::Exact,
        plan: Some(plan),
        n_particles: n,
    })
}

/// Upper bound on `d_N` from a greedy plan: every cell keeps
/// `min(|sigma_i|, V_i)` in place and ships its surplus to the nearest
/// particles whose volume is not yet covered.
pub fn voronoi_deviation_bound(ps: &ParticleSystem, diagram: &VoronoiDiagram) -> Result<DeviationResult> {
    check_inputs(ps, diagram)?;
    let n = ps.len();
    let sigma = &diagram.volumes;
    let vols = balanced_volumes(ps, diagram);
    let dim = ps.dim();

    let mut entries = Vec::with_capacity(2 * n);
    let mut surplus = vec![0.0; n];
    let mut deficit = vec![0.0; n];
    for i in 0..n {
        let keep = sigma[i].min(vols[i]);
        if keep > 0.0 {
            entries.push((i, i, keep));
        }
        surplus[i] = sigma[i] - keep;
        deficit[i] = vols[i] - keep;
    }

    let takers: Vec<usize> = (0..n).filter(|&j| deficit[j] > 0.0).collect();
    if !takers.is_empty() {
        let taker_coords: Vec<f64> = takers.iter().flat_map(|&j| ps.point(j).iter().copied()).collect();
        let bounds = &diagram.bounds;
        let spacing = (bounds.volume() / n as f64).powf(1.0 / dim as f64);
        let grid = CellList::new(&taker_coords, dim, 2.0 * spacing);
        let diameter = bounds.diameter();
        let total: f64 = sigma.iter().sum();
        let negligible = 1e-15 * total;

        let mut found: Vec<(f64, usize)> = Vec::new();
        for i in 0..n {
            let mut radius = 2.0 * spacing;
            while surplus[i] > negligible {
                found.clear();
                grid.for_each_within(&taker_coords, ps.point(i), radius, |k, d2| {
                    if deficit[takers[k]] > 0.0 {
                        found.push((d2, takers[k]));
                    }
                });
                found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                // only the candidates within the radius are known to be nearest
                for &(_, j) in &found {
                    if surplus[i] <= negligible {
                        break;
                    }
                    let moved = surplus[i].min(deficit[j]);
                    entries.push((i, j, moved));
                    surplus[i] -= moved;
                    deficit[j] -= moved;
                }
                if radius > 2.0 * diameter {
                    break;
                }
                radius *= 2.0;
            }
        }
    }
    merge_entries(&mut entries);
    let plan = TransportPlan::new(entries, sigma.clone(), vols);
    let value = local_deviation(&plan, ps, diagram)?;
    Ok(DeviationResult {
        value,
        kind: DeviationKind::UpperBound,
        plan: Some(plan),
        n_particles: n,
    })
}

fn merge_entries(entries: &mut Vec<(usize, usize, f64)>) {
    entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut out: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
    for &e in entries.iter() {
        match out.last_mut() {
            Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
            _ => out.push(e),
        }
    }
    *entries = out;
}

/// Exact value when `N <= cap`, greedy bound otherwise.
pub fn voronoi_deviation(ps: &ParticleSystem, diagram: &VoronoiDiagram, cap: usize) -> Result<DeviationResult> {
    if ps.len() <= cap {
        voronoi_deviation_exact_capped(ps, diagram, cap)
    } else {
        voronoi_deviation_bound(ps, diagram)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Aabb, RectDomain};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two unit cells side by side with sites at distance 1.
    fn two_cells(v: [f64; 2]) -> (ParticleSystem, VoronoiDiagram) {
        let coords = vec![0.5, 0.5, 1.5, 0.5];
        let bounds = Aabb::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let diagram = VoronoiDiagram::build(2, &coords, &bounds).unwrap();
        let ps = ParticleSystem::from_parts(2, coords, v.to_vec(), 0.5).unwrap();
        (ps, diagram)
    }

    fn random_instance(seed: u64, n: usize, voronoi_volumes: bool) -> (ParticleSystem, VoronoiDiagram) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dom = RectDomain::unit_cube(2, 0.1).unwrap();
        let ext = dom.extended();
        let coords: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-0.1..1.1)).collect();
        let diagram = VoronoiDiagram::build(2, &coords, &ext).unwrap();
        let vols = if voronoi_volumes {
            diagram.volumes.clone()
        } else {
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v * 1.44 / s).collect()
        };
        (ParticleSystem::from_parts(2, coords, vols, 0.05).unwrap(), diagram)
    }

    #[test]
    fn two_cell_plans() {
        let (ps, d) = two_cells([1.1, 0.9]);
        let plan = TransportPlan::from_dense(&[1.0, 0.0, 0.1, 0.9], vec![1.0, 1.0], vec![1.1, 0.9]);
        assert!((local_deviation(&plan, &ps, &d).unwrap() - 0.1).abs() < 1e-15);
        let prop: Vec<f64> = [1.1, 0.9, 1.1, 0.9].iter().map(|v| v / 2.0).collect();
        let plan = TransportPlan::from_dense(&prop, vec![1.0, 1.0], vec![1.1, 0.9]);
        assert!(plan.marginal_residual() < 1e-15);
        assert!((local_deviation(&plan, &ps, &d).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_cell_exact_and_greedy() {
        let (ps, d) = two_cells([1.1, 0.9]);
        let exact = voronoi_deviation_exact(&ps, &d).unwrap();
        assert_eq!(exact.kind, DeviationKind::Exact);
        assert!((exact.value - 0.1).abs() < 1e-9);
        let plan = exact.plan.unwrap();
        assert!(plan.marginal_residual() < 1e-9 && plan.is_nonnegative());
        let greedy = voronoi_deviation_bound(&ps, &d).unwrap();
        assert_eq!(greedy.kind, DeviationKind::UpperBound);
        assert!((greedy.value - 0.1).abs() < 1e-12);
    }

    /// One-parameter family of feasible plans `a_11 = t`: the oracle scans it.
    #[test]
    fn two_cell_enumeration_oracle() {
        let (ps, d) = two_cells([1.1, 0.9]);
        let mut best = f64::INFINITY;
        for k in 0..=1000 {
            // a_11 = t, a_12 = 1 - t, a_21 = 1.1 - t, a_22 = t - 0.1, t in [0.1, 1]
            let t = 0.1 + 0.9 * k as f64 / 1000.0;
            let plan = TransportPlan::from_dense(&[t, 1.0 - t, 1.1 - t, t - 0.1], vec![1.0, 1.0], vec![1.1, 0.9]);
            best = best.min(local_deviation(&plan, &ps, &d).unwrap());
        }
        assert!((best - 0.1).abs() < 1e-12);
    }

    #[test]
    fn zero_iff_voronoi_volumes() {
        for seed in 0..8 {
            let (ps, d) = random_instance(seed, 10, true);
            assert!(voronoi_deviation_exact(&ps, &d).unwrap().value < 1e-12);
            assert_eq!(voronoi_deviation_bound(&ps, &d).unwrap().value, 0.0);
            let mut v = d.volumes.clone();
            v[3] += 1e-3;
            v[7] -= 1e-3;
            let ps = ps.with_volumes(v).unwrap();
            assert!(voronoi_deviation_exact(&ps, &d).unwrap().value > 1e-6);
        }
    }

    #[test]
    fn exact_below_greedy_and_random_plans() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..20 {
            let n = 3 + (seed as usize % 10);
            let (ps, d) = random_instance(100 + seed, n, false);
            let exact = voronoi_deviation_exact(&ps, &d).unwrap();
            let greedy = voronoi_deviation_bound(&ps, &d).unwrap();
            assert!(
                exact.value <= greedy.value + 1e-12,
                "{} > {}",
                exact.value,
                greedy.value
            );
            let plan = exact.plan.as_ref().unwrap();
            assert!(plan.marginal_residual() < 1e-9);
            assert!((local_deviation(plan, &ps, &d).unwrap() - exact.value).abs() < 1e-9);
            assert!(greedy.plan.as_ref().unwrap().marginal_residual() < 1e-12);

            // random feasible plans: scaled product plus a cycle perturbation
            let rows = d.volumes.clone();
            let cols = plan.col_targets.clone();
            let total: f64 = rows.iter().sum();
            for _ in 0..5 {
                let mut a: Vec<f64> = (0..n * n).map(|k| rows[k / n] * cols[k % n] / total).collect();
                let (i, j, k, l) = (0, 1, rng.gen_range(0..n), rng.gen_range(0..n));
                if k != l {
                    let e = 0.5 * a[i * n + k].min(a[j * n + l]);
                    a[i * n + k] -= e;
                    a[j * n + l] -= e;
                    a[i * n + l] += e;
                    a[j * n + k] += e;
                }
                let p = TransportPlan::from_dense(&a, rows.clone(), cols.clone());
                assert!(exact.value <= local_deviation(&p, &ps, &d).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn scaling_covariance() {
        let (ps, d) = random_instance(5, 8, false);
        let s = 2.5;
        let coords: Vec<f64> = ps.coords().iter().map(|c| c * s).collect();
        let bounds = Aabb::new(
            d.bounds.lower.iter().map(|c| c * s).collect(),
            d.bounds.upper.iter().map(|c| c * s).collect(),
        )
        .unwrap();
        let d2 = VoronoiDiagram::build(2, &coords, &bounds).unwrap();
        let ps2 =
            ParticleSystem::from_parts(2, coords, ps.volumes().iter().map(|v| v * s * s).collect(), 0.05).unwrap();
        let a = voronoi_deviation_exact(&ps, &d).unwrap().value;
        let b = voronoi_deviation_exact(&ps2, &d2).unwrap().value;
        assert!((b - s * a).abs() < 1e-9 * b.max(1.0));
        let ga = voronoi_deviation_bound(&ps, &d).unwrap().value;
        let gb = voronoi_deviation_bound(&ps2, &d2).unwrap().value;
        assert!((gb - s * ga).abs() < 1e-9 * gb.max(1.0));
    }

    #[test]
    fn cap_is_enforced() {
        let (ps, d) = random_instance(1, 45, false);
        assert!(matches!(
            voronoi_deviation_exact(&ps, &d),
            Err(Error::TooManyParticles { n: 45, cap: 40 })
        ));
        assert_eq!(voronoi_deviation(&ps, &d, 40).unwrap().kind, DeviationKind::UpperBound);
    }

    #[test]
    fn greedy_on_a_large_lattice_is_fast_and_feasible() {
        let dom = RectDomain::unit_cube(2, 0.1).unwrap();
        let c = crate::geometry::perturbed_lattice(2f64.powi(-6), 0.25, 3, &dom).unwrap();
        let n = c.len() / 2;
        let v = crate::geometry::uniform_volumes(n, &dom);
        let ps = ParticleSystem::new(&dom, c, v, 0.05).unwrap();
        let d = crate::geometry::voronoi_decompose(&ps, &dom).unwrap();
        let g = voronoi_deviation_bound(&ps, &d).unwrap();
        assert!(g.plan.unwrap().marginal_residual() < 1e-12);
        assert!(g.value > 0.0 && g.value < 2f64.powi(-6) * 64.0 * (1.0 + 2f64.sqrt()) / std::f64::consts::PI);
    }
}
