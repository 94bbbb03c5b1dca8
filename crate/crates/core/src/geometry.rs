//! Scattered center sets in box domains and their quality metrics:
//! separation radius `q`, fill distance `h` (probe-grid approximation), and
//! mesh ratio `ρ = h/q`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("point {index} lies outside the domain")]
    OutsideDomain { index: usize },
    #[error("points {0} and {1} coincide")]
    DuplicatePoints(usize, usize),
    #[error("operation requires at least {required} points, set has {actual}")]
    TooFewPoints { required: usize, actual: usize },
    #[error("point budget exceeded: level {level} needs {requested} points, budget is {budget}")]
    BudgetExceeded { level: u32, requested: usize, budget: usize },
    #[error("invalid jitter {0}: must lie in [0, 0.5)")]
    InvalidJitter(f64),
    #[error("cannot parse point set: {0}")]
    Parse(String),
}

/// Axis-aligned box domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(GeometryError::InvalidDomain(
                "corner dimensions are empty or mismatched".into(),
            ));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !(hi > lo) {
                return Err(GeometryError::InvalidDomain(format!(
                    "empty interior: lower {lo} !< upper {hi}"
                )));
            }
        }
        Ok(Domain { lower, upper })
    }

    pub fn unit_cube(d: usize) -> Self {
        Domain { lower: vec![0.0; d], upper: vec![1.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn half_widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (b - a)).collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol)
    }

    /// Box shrunk by `margin` on every face.
    pub fn shrink(&self, margin: f64) -> Result<Domain, GeometryError> {
        Domain::new(
            self.lower.iter().map(|v| v + margin).collect(),
            self.upper.iter().map(|v| v - margin).collect(),
        )
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).product()
    }
}

/// Uniform bucket grid over a box, for nearest-neighbor and range queries.
#[derive(Debug, Clone)]
pub(crate) struct BucketGrid {
    dim: usize,
    lower: Vec<f64>,
    cell: f64,
    cells_per_axis: Vec<usize>,
    buckets: Vec<Vec<u32>>,
}

impl BucketGrid {
    pub fn build(dim: usize, coords: &[f64], domain: &Domain) -> Self {
        let n = coords.len() / dim;
        let vol = domain.volume();
        let cell = (vol / n.max(1) as f64).powf(1.0 / dim as f64).max(1e-12);
        let cells_per_axis: Vec<usize> = (0..dim)
            .map(|i| ((domain.side(i) / cell).ceil() as usize).max(1))
            .collect();
        let total: usize = cells_per_axis.iter().product();
        let mut buckets = vec![Vec::new(); total];
        let lower = domain.lower().to_vec();
        for p in 0..n {
            let idx = Self::cell_of(&lower, cell, &cells_per_axis, &coords[p * dim..(p + 1) * dim]);
            buckets[idx].push(p as u32);
        }
        BucketGrid { dim, lower, cell, cells_per_axis, buckets }
    }

    fn cell_of(lower: &[f64], cell: f64, cpa: &[usize], x: &[f64]) -> usize {
        let mut idx = 0;
        for (i, v) in x.iter().enumerate() {
            let c = (((v - lower[i]) / cell).floor() as isize).clamp(0, cpa[i] as isize - 1) as usize;
            idx = idx * cpa[i] + c;
        }
        idx
    }

    fn cell_coords(&self, x: &[f64]) -> Vec<isize> {
        (0..self.dim)
            .map(|i| {
                (((x[i] - self.lower[i]) / self.cell).floor() as isize)
                    .clamp(0, self.cells_per_axis[i] as isize - 1)
            })
            .collect()
    }

    fn bucket_index(&self, c: &[isize]) -> Option<usize> {
        let mut idx = 0usize;
        for i in 0..self.dim {
            if c[i] < 0 || c[i] >= self.cells_per_axis[i] as isize {
                return None;
            }
            idx = idx * self.cells_per_axis[i] + c[i] as usize;
        }
        Some(idx)
    }

    /// Nearest point to `x`, optionally excluding one index. Returns
    /// `(index, distance)`. Exact: shells are expanded until no closer point
    /// can exist.
    pub fn nearest(&self, coords: &[f64], x: &[f64], exclude: Option<usize>) -> (usize, f64) {
        let d = self.dim;
        let home = self.cell_coords(x);
        let max_ring: isize = self.cells_per_axis.iter().map(|&c| c as isize).max().unwrap();
        let mut best = usize::MAX;
        let mut best_d2 = f64::INFINITY;
        for ring in 0..=max_ring {
            if best_d2.sqrt() < (ring - 1) as f64 * self.cell {
                break;
            }
            self.visit_ring(&home, ring, &mut |bucket| {
                for &pi in &self.buckets[bucket] {
                    let pi = pi as usize;
                    if Some(pi) == exclude {
                        continue;
                    }
                    let p = &coords[pi * d..(pi + 1) * d];
                    let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d2 < best_d2 {
                        best_d2 = d2;
                        best = pi;
                    }
                }
            });
        }
        (best, best_d2.sqrt())
    }

    /// Indices of all points within `radius` of `x` (closed ball).
    pub fn within_radius(&self, coords: &[f64], x: &[f64], radius: f64) -> Vec<usize> {
        let d = self.dim;
        let mut lo = vec![0isize; d];
        let mut hi = vec![0isize; d];
        for i in 0..d {
            lo[i] = (((x[i] - radius - self.lower[i]) / self.cell).floor() as isize).max(0);
            hi[i] = (((x[i] + radius - self.lower[i]) / self.cell).floor() as isize)
                .min(self.cells_per_axis[i] as isize - 1);
            if hi[i] < lo[i] {
                return Vec::new();
            }
        }
        let r2 = radius * radius;
        let mut out = Vec::new();
        let mut c = lo.clone();
        'outer: loop {
            if let Some(b) = self.bucket_index(&c) {
                for &pi in &self.buckets[b] {
                    let pi = pi as usize;
                    let p = &coords[pi * d..(pi + 1) * d];
                    let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d2 <= r2 {
                        out.push(pi);
                    }
                }
            }
            for i in (0..d).rev() {
                c[i] += 1;
                if c[i] <= hi[i] {
                    continue 'outer;
                }
                c[i] = lo[i];
                if i == 0 {
                    break 'outer;
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn visit_ring(&self, home: &[isize], ring: isize, f: &mut impl FnMut(usize)) {
        // All cells at Chebyshev distance `ring` from `home`.
        let d = self.dim;
        let mut c = vec![0isize; d];
        self.visit_ring_rec(home, ring, 0, false, &mut c, f);
    }

    #[allow(clippy::too_many_arguments)]
    fn visit_ring_rec(
        &self,
        home: &[isize],
        ring: isize,
        axis: usize,
        pinned: bool,
        c: &mut Vec<isize>,
        f: &mut impl FnMut(usize),
    ) {
        let d = self.dim;
        if axis == d {
            if let Some(b) = self.bucket_index(c) {
                f(b);
            }
            return;
        }
        let remaining_can_pin = axis + 1 < d;
        for off in -ring..=ring {
            let at_edge = off.abs() == ring;
            if !pinned && !at_edge && !remaining_can_pin {
                continue;
            }
            c[axis] = home[axis] + off;
            if c[axis] < 0 || c[axis] >= self.cells_per_axis[axis] as isize {
                continue;
            }
            self.visit_ring_rec(home, ring, axis + 1, pinned || at_edge, c, f);
        }
    }
}

/// A finite center set inside a box domain, with cached quality metrics.
#[derive(Debug, Clone)]
pub struct PointSet {
    domain: Domain,
    dim: usize,
    coords: Vec<f64>,
    grid: BucketGrid,
    separation: f64,
    fill: f64,
    probe_level: u32,
}

impl PointSet {
    /// Wrap an explicit list of points (flat, row-major) after validation;
    /// computes `q` exactly and `h` on a probe grid of `2^probe_level + 1`
    /// nodes per axis.
    pub fn from_coords(
        domain: Domain,
        coords: Vec<f64>,
        probe_level: u32,
    ) -> Result<Self, GeometryError> {
        let dim = domain.dim();
        assert!(coords.len() % dim == 0, "coordinate count must be a multiple of dim");
        let n = coords.len() / dim;
        if n == 0 {
            return Err(GeometryError::TooFewPoints { required: 1, actual: 0 });
        }
        for i in 0..n {
            if !domain.contains(&coords[i * dim..(i + 1) * dim], 1e-12) {
                return Err(GeometryError::OutsideDomain { index: i });
            }
        }
        let grid = BucketGrid::build(dim, &coords, &domain);
        let mut separation = f64::INFINITY;
        if n >= 2 {
            for i in 0..n {
                let (j, dist) = grid.nearest(&coords, &coords[i * dim..(i + 1) * dim], Some(i));
                if dist == 0.0 {
                    return Err(GeometryError::DuplicatePoints(i.min(j), i.max(j)));
                }
                separation = separation.min(dist);
            }
            separation *= 0.5;
        }
        let fill = fill_distance_probe(&domain, dim, &coords, &grid, probe_level);
        Ok(PointSet { domain, dim, coords, grid, separation, fill, probe_level })
    }

    /// Tensor grid of `2^level + 1` nodes per axis with spacing
    /// `2^{-level} × side`, interior nodes displaced by
    /// `jitter × spacing × u`, `u` uniform in `[-1,1]^d` from the seeded
    /// generator. Deterministic in `(level, jitter, seed)`.
    pub fn generate(
        domain: &Domain,
        level: u32,
        jitter: f64,
        seed: u64,
        max_points: usize,
        probe_level: u32,
    ) -> Result<Self, GeometryError> {
        if !(0.0..0.5).contains(&jitter) {
            return Err(GeometryError::InvalidJitter(jitter));
        }
        let d = domain.dim();
        if level > 30 {
            return Err(GeometryError::BudgetExceeded {
                level,
                requested: usize::MAX,
                budget: max_points,
            });
        }
        let nodes_per_axis = (1usize << level) + 1;
        let n = nodes_per_axis
            .checked_pow(d as u32)
            .filter(|&n| n <= max_points)
            .ok_or(GeometryError::BudgetExceeded {
                level,
                requested: nodes_per_axis.saturating_pow(d as u32),
                budget: max_points,
            })?;
        let spacings: Vec<f64> = (0..d).map(|i| domain.side(i) / (1u64 << level) as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coords = Vec::with_capacity(n * d);
        let mut idx = vec![0usize; d];
        loop {
            let boundary = idx.iter().any(|&i| i == 0 || i == nodes_per_axis - 1);
            for axis in 0..d {
                let base = domain.lower()[axis] + idx[axis] as f64 * spacings[axis];
                let u: f64 = rng.random_range(-1.0..1.0);
                let displacement = if boundary { 0.0 } else { jitter * spacings[axis] * u };
                coords.push(base + displacement);
            }
            let mut axis = d;
            loop {
                if axis == 0 {
                    break;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < nodes_per_axis {
                    break;
                }
                idx[axis] = 0;
                if axis == 0 {
                    return PointSet::from_coords(domain.clone(), coords, probe_level);
                }
            }
        }
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Half the minimum pairwise distance. Requires at least two points.
    pub fn separation_radius(&self) -> Result<f64, GeometryError> {
        if self.n() < 2 {
            return Err(GeometryError::TooFewPoints { required: 2, actual: self.n() });
        }
        Ok(self.separation)
    }

    /// Probe-grid fill distance (a lower approximation of the supremum; the
    /// error is at most probe-spacing × √d / 2).
    pub fn fill_distance(&self) -> f64 {
        self.fill
    }

    /// Recompute the fill distance on a finer/coarser probe grid.
    pub fn fill_distance_at(&self, probe_level: u32) -> f64 {
        fill_distance_probe(&self.domain, self.dim, &self.coords, &self.grid, probe_level)
    }

    pub fn probe_level(&self) -> u32 {
        self.probe_level
    }

    pub fn mesh_ratio(&self) -> Result<f64, GeometryError> {
        Ok(self.fill / self.separation_radius()?)
    }

    /// Indices of points within `radius` of `x` (closed ball).
    pub fn within_radius(&self, x: &[f64], radius: f64) -> Vec<usize> {
        self.grid.within_radius(&self.coords, x, radius)
    }

    /// Nearest center to `x` as `(index, distance)`.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        self.grid.nearest(&self.coords, x, None)
    }

    /// Plain-text export: `# d=<d> n=<n>` header, one point per line,
    /// 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!("# d={} n={}\n", self.dim, self.n());
        for i in 0..self.n() {
            let fields: Vec<String> =
                self.point(i).iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&fields.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parse the plain-text format back into a point set over `domain`.
    pub fn from_text(
        domain: Domain,
        text: &str,
        probe_level: u32,
    ) -> Result<Self, GeometryError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| GeometryError::Parse("empty input".into()))?;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| GeometryError::Parse("missing '#' header".into()))?;
        let mut d = None;
        let mut n = None;
        for tok in header.split_whitespace() {
            if let Some(v) = tok.strip_prefix("d=") {
                d = v.parse::<usize>().ok();
            } else if let Some(v) = tok.strip_prefix("n=") {
                n = v.parse::<usize>().ok();
            }
        }
        let d = d.ok_or_else(|| GeometryError::Parse("header missing d=".into()))?;
        let n = n.ok_or_else(|| GeometryError::Parse("header missing n=".into()))?;
        if d != domain.dim() {
            return Err(GeometryError::Parse(format!(
                "dimension mismatch: header d={d}, domain d={}",
                domain.dim()
            )));
        }
        let mut coords = Vec::with_capacity(n * d);
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let vals: Result<Vec<f64>, _> =
                line.split_whitespace().map(|t| t.parse::<f64>()).collect();
            let vals =
                vals.map_err(|e| GeometryError::Parse(format!("line {}: {e}", ln + 2)))?;
            if vals.len() != d {
                return Err(GeometryError::Parse(format!(
                    "line {}: expected {d} coordinates, found {}",
                    ln + 2,
                    vals.len()
                )));
            }
            coords.extend(vals);
        }
        if coords.len() != n * d {
            return Err(GeometryError::Parse(format!(
                "expected {n} points, found {}",
                coords.len() / d
            )));
        }
        PointSet::from_coords(domain, coords, probe_level)
    }
}

fn fill_distance_probe(
    domain: &Domain,
    dim: usize,
    coords: &[f64],
    grid: &BucketGrid,
    probe_level: u32,
) -> f64 {
    let nodes = (1usize << probe_level) + 1;
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut h: f64 = 0.0;
    loop {
        for i in 0..dim {
            x[i] = domain.lower()[i] + idx[i] as f64 * domain.side(i) / (nodes - 1) as f64;
        }
        let (_, dist) = grid.nearest(coords, &x, None);
        h = h.max(dist);
        let mut axis = dim;
        loop {
            if axis == 0 {
                break;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < nodes {
                break;
            }
            idx[axis] = 0;
            if axis == 0 {
                return h;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps_1d(points: &[f64], probe: u32) -> PointSet {
        PointSet::from_coords(Domain::unit_cube(1), points.to_vec(), probe).unwrap()
    }

    #[test]
    fn level_one_grid_is_uniform() {
        let ps = PointSet::generate(&Domain::unit_cube(1), 1, 0.0, 0, 1000, 8).unwrap();
        assert_eq!(ps.n(), 3);
        assert_eq!(ps.point(0), &[0.0]);
        assert_eq!(ps.point(1), &[0.5]);
        assert_eq!(ps.point(2), &[1.0]);
    }

    #[test]
    fn level_zero_square_is_corners() {
        let ps = PointSet::generate(&Domain::unit_cube(2), 0, 0.0, 0, 1000, 6).unwrap();
        assert_eq!(ps.n(), 4);
        assert_eq!(ps.separation_radius().unwrap(), 0.5);
    }

    #[test]
    fn separation_examples() {
        assert_eq!(ps_1d(&[0.0, 1.0], 8).separation_radius().unwrap(), 0.5);
        assert_eq!(ps_1d(&[0.0, 0.5, 1.0], 8).separation_radius().unwrap(), 0.25);
        let ps = ps_1d(&[0.0, 0.1, 1.0], 10);
        assert_eq!(ps.separation_radius().unwrap(), 0.05);
        // h is attained at the midpoint of the (0.1, 1.0) gap: 0.45
        let rho = ps.mesh_ratio().unwrap();
        assert!((rho - 9.0).abs() < 0.02, "rho = {rho}");
    }

    #[test]
    fn fill_distance_examples() {
        let ps = ps_1d(&[0.0, 1.0], 10);
        assert!((ps.fill_distance() - 0.5).abs() < 1e-3);
        let ps = ps_1d(&[0.5], 10);
        assert!((ps.fill_distance() - 0.5).abs() < 1e-9);
        assert!(ps.separation_radius().is_err());
    }

    #[test]
    fn jittered_level3_set() {
        let ps = PointSet::generate(&Domain::unit_cube(1), 3, 0.2, 7, 1000, 10).unwrap();
        assert_eq!(ps.n(), 9);
        // brute-force q on the generated set
        let mut min_d = f64::INFINITY;
        for i in 0..9 {
            for j in 0..i {
                min_d = min_d.min((ps.point(i)[0] - ps.point(j)[0]).abs());
            }
        }
        assert!((ps.separation_radius().unwrap() - min_d / 2.0).abs() < 1e-15);
        assert!(ps.mesh_ratio().unwrap() <= 2.5);
        // endpoints stay clamped
        assert_eq!(ps.point(0)[0], 0.0);
        assert_eq!(ps.point(8)[0], 1.0);
    }

    #[test]
    fn determinism_and_seed_sensitivity() {
        let a = PointSet::generate(&Domain::unit_cube(2), 3, 0.3, 42, 10_000, 6).unwrap();
        let b = PointSet::generate(&Domain::unit_cube(2), 3, 0.3, 42, 10_000, 6).unwrap();
        assert_eq!(a.coords(), b.coords());
        let c = PointSet::generate(&Domain::unit_cube(2), 3, 0.3, 43, 10_000, 6).unwrap();
        assert_ne!(a.coords(), c.coords());
    }

    #[test]
    fn budget_is_enforced() {
        let err = PointSet::generate(&Domain::unit_cube(2), 6, 0.0, 0, 1000, 6).unwrap_err();
        assert!(matches!(err, GeometryError::BudgetExceeded { .. }));
    }

    #[test]
    fn doubling_level_halves_q_and_h() {
        let dom = Domain::unit_cube(2);
        let a = PointSet::generate(&dom, 2, 0.0, 0, 10_000, 8).unwrap();
        let b = PointSet::generate(&dom, 3, 0.0, 0, 10_000, 8).unwrap();
        let qa = a.separation_radius().unwrap();
        let qb = b.separation_radius().unwrap();
        assert!((qa / qb - 2.0).abs() < 1e-12);
        let probe_tol = 1.0 / 256.0 * 2f64.sqrt();
        assert!((a.fill_distance() / b.fill_distance() - 2.0).abs() < 8.0 * probe_tol);
    }

    #[test]
    fn translation_and_scaling_behavior() {
        let pts = [0.1, 0.33, 0.7, 0.95];
        let base = ps_1d(&pts, 10);
        let shifted: Vec<f64> = pts.iter().map(|v| v + 5.0).collect();
        let dom_s = Domain::new(vec![5.0], vec![6.0]).unwrap();
        let ps_s = PointSet::from_coords(dom_s, shifted, 10).unwrap();
        assert!((base.separation_radius().unwrap() - ps_s.separation_radius().unwrap()).abs() < 1e-14);
        assert!((base.fill_distance() - ps_s.fill_distance()).abs() < 1e-12);

        let scaled: Vec<f64> = pts.iter().map(|v| v * 3.0).collect();
        let dom_c = Domain::new(vec![0.0], vec![3.0]).unwrap();
        let ps_c = PointSet::from_coords(dom_c, scaled, 10).unwrap();
        assert!((ps_c.separation_radius().unwrap() - 3.0 * base.separation_radius().unwrap()).abs() < 1e-13);
        assert!((ps_c.fill_distance() - 3.0 * base.fill_distance()).abs() < 1e-10);
    }

    #[test]
    fn mesh_ratio_bound_under_jitter() {
        for (d, level) in [(1usize, 4u32), (2, 3)] {
            for jitter in [0.0, 0.1, 0.3] {
                let ps =
                    PointSet::generate(&Domain::unit_cube(d), level, jitter, 11, 10_000, 8).unwrap();
                let bound = (d as f64).sqrt() * (1.0 + 2.0 * jitter) / (1.0 - 2.0 * jitter);
                let probe_tol = 2f64.powi(-(8i32)) * (d as f64).sqrt();
                let rho = ps.mesh_ratio().unwrap();
                assert!(
                    rho <= bound + probe_tol / ps.separation_radius().unwrap(),
                    "d={d} jitter={jitter}: rho={rho} bound={bound}"
                );
            }
        }
    }

    #[test]
    fn duplicate_points_rejected() {
        let err = PointSet::from_coords(Domain::unit_cube(1), vec![0.2, 0.5, 0.2], 6).unwrap_err();
        assert!(matches!(err, GeometryError::DuplicatePoints(0, 2)));
    }

    #[test]
    fn outside_domain_rejected() {
        let err = PointSet::from_coords(Domain::unit_cube(1), vec![0.2, 1.4], 6).unwrap_err();
        assert!(matches!(err, GeometryError::OutsideDomain { index: 1 }));
    }

    #[test]
    fn text_round_trip() {
        let ps = PointSet::generate(&Domain::unit_cube(2), 2, 0.25, 9, 1000, 8).unwrap();
        let text = ps.to_text();
        assert!(text.starts_with("# d=2 n=25\n"));
        let back = PointSet::from_text(Domain::unit_cube(2), &text, 8).unwrap();
        assert_eq!(ps.coords(), back.coords());
    }

    #[test]
    fn bucket_grid_nearest_matches_brute_force() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let dom = Domain::unit_cube(2);
        let n = 200;
        let coords: Vec<f64> = (0..n * 2).map(|_| rng.random_range(0.0..1.0)).collect();
        let grid = BucketGrid::build(2, &coords, &dom);
        for _ in 0..100 {
            let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let (bi, bd) = grid.nearest(&coords, &x, None);
            let mut exact = (usize::MAX, f64::INFINITY);
            for p in 0..n {
                let dx = coords[2 * p] - x[0];
                let dy = coords[2 * p + 1] - x[1];
                let dist = (dx * dx + dy * dy).sqrt();
                if dist < exact.1 {
                    exact = (p, dist);
                }
            }
            assert_eq!(bi, exact.0);
            assert!((bd - exact.1).abs() < 1e-14);
        }
    }

    #[test]
    fn bucket_grid_range_query_matches_brute_force() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let dom = Domain::unit_cube(2);
        let n = 150;
        let coords: Vec<f64> = (0..n * 2).map(|_| rng.random_range(0.0..1.0)).collect();
        let grid = BucketGrid::build(2, &coords, &dom);
        for _ in 0..50 {
            let x = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let r = rng.random_range(0.05..0.4);
            let got = grid.within_radius(&coords, &x, r);
            let expect: Vec<usize> = (0..n)
                .filter(|p| {
                    let dx = coords[2 * p] - x[0];
                    let dy = coords[2 * p + 1] - x[1];
                    (dx * dx + dy * dy).sqrt() <= r
                })
                .collect();
            assert_eq!(got, expect);
        }
    }
}
