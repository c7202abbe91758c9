//! Poisson point processes, nearest-BS association, tagged-cell scenes and
//! cooperation percolation.
//!
//! The infinite processes of the model are sampled on a disc of radius
//! `R_sim` centred on the typical user. [`default_window_radius`] picks the
//! smallest radius for which the truncated interference tail is below a
//! fixed fraction of the mean interference at the average cell radius.

use std::f64::consts::{LN_2, PI};
use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{CooperationConfig, SystemParams};

/// Expected-count ceiling for a single PPP draw.
pub const DEFAULT_POINT_CAP: f64 = 1e7;

/// Truncated interference tail allowed, relative to the mean interference
/// seen at distance `r` from the tagged BS.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("expected point count {expected:.3e} exceeds the cap {cap:.3e}")]
    TooManyPoints { expected: f64, cap: f64 },
    #[error("{name} must be positive and finite (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("no base station fell inside the sampling window")]
    EmptyNetwork,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn polar(radius: f64, angle: f64) -> Self {
        Self::new(radius * angle.cos(), radius * angle.sin())
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn offset(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy)
    }
}

/// `d^{-η}` from a squared distance.
#[inline]
pub fn path_gain_sq(dist_sq: f64, path_loss_exp: f64) -> f64 {
    if path_loss_exp == 4.0 {
        1.0 / (dist_sq * dist_sq)
    } else {
        dist_sq.powf(-0.5 * path_loss_exp)
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), GeometryError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::NonPositive { name, value })
    }
}

pub fn uniform_in_disc<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    let rad = radius * rng.gen::<f64>().sqrt();
    Point::polar(rad, 2.0 * PI * rng.gen::<f64>())
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0)
}

/// Homogeneous PPP on the disc of radius `window_radius` centred on the origin.
pub fn sample_ppp<R: Rng + ?Sized>(
    density: f64,
    window_radius: f64,
    rng: &mut R,
) -> Result<Vec<Point>, GeometryError> {
    sample_ppp_capped(density, window_radius, DEFAULT_POINT_CAP, rng)
}

pub fn sample_ppp_capped<R: Rng + ?Sized>(
    density: f64,
    window_radius: f64,
    cap: f64,
    rng: &mut R,
) -> Result<Vec<Point>, GeometryError> {
    positive("density", density)?;
    positive("window_radius", window_radius)?;
    let expected = density * PI * window_radius * window_radius;
    if expected > cap {
        return Err(GeometryError::TooManyPoints { expected, cap });
    }
    let n = poisson_count(expected, rng);
    Ok((0..n).map(|_| uniform_in_disc(window_radius, rng)).collect())
}

/// Smallest window radius with a truncated interference tail below
/// `tail_tolerance · μ_Î(r)`, and at least `max(10 r, 5 × mean nearest-BS
/// spacing)`.
pub fn window_radius_for(params: &SystemParams, tail_tolerance: f64) -> f64 {
    let r = params.cell_radius;
    let mean_spacing = 0.5 / params.bs_density.sqrt();
    let base = (10.0 * r).max(5.0 * mean_spacing);
    // tail / μ_Î(r) = (R / r)^{-(η-2)}
    let needed = r * tail_tolerance.powf(-1.0 / (params.path_loss_exp - 2.0));
    base.max(needed * (1.0 + 1e-12))
}

pub fn default_window_radius(params: &SystemParams) -> f64 {
    window_radius_for(params, DEFAULT_TAIL_TOLERANCE)
}

/// Uniform grid over the square `[-half, half]²` for nearest-point queries.
pub struct GridIndex<'a> {
    points: &'a [Point],
    half: f64,
    cell: f64,
    side: usize,
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl<'a> GridIndex<'a> {
    pub fn new(points: &'a [Point], half_width: f64, cell_size: f64) -> Self {
        let half = points
            .iter()
            .fold(half_width, |m, p| m.max(p.x.abs()).max(p.y.abs()))
            * (1.0 + 1e-9);
        let side = ((2.0 * half / cell_size).ceil() as usize).clamp(1, 4096);
        let cell = 2.0 * half / side as f64;
        let mut counts = vec![0usize; side * side + 1];
        let keys: Vec<usize> = points.iter().map(|p| Self::key_of(p, half, cell, side)).collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0usize; points.len()];
        for (i, &k) in keys.iter().enumerate() {
            items[fill[k]] = i;
            fill[k] += 1;
        }
        Self {
            points,
            half,
            cell,
            side,
            starts: counts,
            items,
        }
    }

    fn coord(v: f64, half: f64, cell: f64, side: usize) -> usize {
        (((v + half) / cell).floor().max(0.0) as usize).min(side - 1)
    }

    fn key_of(p: &Point, half: f64, cell: f64, side: usize) -> usize {
        Self::coord(p.y, half, cell, side) * side + Self::coord(p.x, half, cell, side)
    }

    fn bucket(&self, ix: usize, iy: usize) -> &[usize] {
        let k = iy * self.side + ix;
        &self.items[self.starts[k]..self.starts[k + 1]]
    }

    /// Index of the nearest point, ties broken by the lowest index.
    pub fn nearest(&self, q: &Point) -> Option<usize> {
        if self.points.is_empty() {
            return None;
        }
        let cx = Self::coord(q.x, self.half, self.cell, self.side) as isize;
        let cy = Self::coord(q.y, self.half, self.cell, self.side) as isize;
        let side = self.side as isize;
        let mut best: Option<(f64, usize)> = None;
        let mut ring = 0isize;
        loop {
            for iy in (cy - ring)..=(cy + ring) {
                for ix in (cx - ring)..=(cx + ring) {
                    if (iy - cy).abs() != ring && (ix - cx).abs() != ring {
                        continue;
                    }
                    if ix < 0 || iy < 0 || ix >= side || iy >= side {
                        continue;
                    }
                    for &i in self.bucket(ix as usize, iy as usize) {
                        let d = q.dist_sq(&self.points[i]);
                        let better = match best {
                            None => true,
                            Some((bd, bi)) => d < bd || (d == bd && i < bi),
                        };
                        if better {
                            best = Some((d, i));
                        }
                    }
                }
            }
            // Every unvisited cell is at least `ring · cell` away from q.
            if let Some((bd, _)) = best {
                let reach = ring as f64 * self.cell;
                if reach * reach > bd {
                    break;
                }
            }
            ring += 1;
            if ring > side + 1 {
                break;
            }
        }
        best.map(|(_, i)| i)
    }

    /// All pairs within `radius`, assuming `radius ≤ cell size`.
    pub fn for_each_pair_within(&self, radius: f64, mut f: impl FnMut(usize, usize)) {
        let r2 = radius * radius;
        let side = self.side as isize;
        for iy in 0..side {
            for ix in 0..side {
                let here = self.bucket(ix as usize, iy as usize);
                for (dx, dy) in [(0, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
                    let (nx, ny) = (ix + dx, iy + dy);
                    if nx < 0 || ny < 0 || nx >= side || ny >= side {
                        continue;
                    }
                    let there = self.bucket(nx as usize, ny as usize);
                    for (a, &i) in here.iter().enumerate() {
                        let others = if (dx, dy) == (0, 0) { &here[a + 1..] } else { there };
                        for &j in others {
                            if self.points[i].dist_sq(&self.points[j]) <= r2 {
                                f(i, j);
                            }
                        }
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneMode {
    /// Full PPPs with nearest-BS association and random cell loads.
    Exact,
    /// Tagged cell replaced by a ball of radius `r` with exactly `K` users.
    BallApprox,
}

/// One sampled network around a typical user at the origin.
#[derive(Debug, Clone)]
pub struct NetworkRealization {
    pub mode: SceneMode,
    pub bs_points: Vec<Point>,
    pub user_points: Vec<Point>,
    pub typical_user: usize,
    pub tagged_bs_index: usize,
    /// Serving BS of every user.
    pub association: Vec<usize>,
    pub tagged_distance: f64,
    pub window_radius: f64,
    /// Users served by the tagged BS; the typical user comes first.
    pub tagged_cell: Vec<usize>,
    /// Users outside the tagged cell.
    pub external: Vec<usize>,
    /// Number of users served by each BS.
    pub cell_loads: Vec<usize>,
}

impl NetworkRealization {
    pub fn tagged_bs(&self) -> Point {
        self.bs_points[self.tagged_bs_index]
    }

    pub fn intra_eavesdroppers(&self) -> &[usize] {
        &self.tagged_cell[1..]
    }

    pub fn external_eavesdroppers(&self) -> &[usize] {
        &self.external
    }

    /// BSs other than the tagged one that serve at least one user.
    pub fn interferers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.bs_points.len()).filter(move |&b| b != self.tagged_bs_index && self.cell_loads[b] > 0)
    }

    /// CSV dump with columns `kind,x,y,assigned_bs`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "kind,x,y,assigned_bs")?;
        for (i, p) in self.bs_points.iter().enumerate() {
            writeln!(out, "bs,{},{},{}", p.x, p.y, i)?;
        }
        for (u, p) in self.user_points.iter().enumerate() {
            writeln!(out, "user,{},{},{}", p.x, p.y, self.association[u])?;
        }
        Ok(())
    }
}

fn rayleigh_distance<R: Rng + ?Sized>(bs_density: f64, rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.gen::<f64>();
    (-u.ln() / (PI * bs_density)).sqrt()
}

pub fn build_realization<R: Rng + ?Sized>(
    params: &SystemParams,
    mode: SceneMode,
    rng: &mut R,
) -> Result<NetworkRealization, GeometryError> {
    build_realization_in(params, mode, default_window_radius(params), rng)
}

pub fn build_realization_in<R: Rng + ?Sized>(
    params: &SystemParams,
    mode: SceneMode,
    window_radius: f64,
    rng: &mut R,
) -> Result<NetworkRealization, GeometryError> {
    match mode {
        SceneMode::Exact => build_exact(params, window_radius, rng),
        SceneMode::BallApprox => build_ball(params, window_radius, rng),
    }
}

fn build_exact<R: Rng + ?Sized>(
    params: &SystemParams,
    window_radius: f64,
    rng: &mut R,
) -> Result<NetworkRealization, GeometryError> {
    let bs_points = sample_ppp(params.bs_density, window_radius, rng)?;
    if bs_points.is_empty() {
        return Err(GeometryError::EmptyNetwork);
    }
    let mut user_points = sample_ppp(params.user_density, window_radius, rng)?;
    user_points.push(Point::ORIGIN);
    let typical_user = user_points.len() - 1;

    let index = GridIndex::new(&bs_points, window_radius, params.cell_radius);
    let association: Vec<usize> = user_points
        .iter()
        .map(|u| index.nearest(u).expect("non-empty BS set"))
        .collect();
    let tagged_bs_index = association[typical_user];
    let mut cell_loads = vec![0usize; bs_points.len()];
    for &b in &association {
        cell_loads[b] += 1;
    }
    let mut tagged_cell = vec![typical_user];
    let mut external = Vec::new();
    for (u, &b) in association.iter().enumerate() {
        if u == typical_user {
            continue;
        }
        if b == tagged_bs_index {
            tagged_cell.push(u);
        } else {
            external.push(u);
        }
    }
    let tagged_distance = bs_points[tagged_bs_index].norm();
    Ok(NetworkRealization {
        mode: SceneMode::Exact,
        bs_points,
        user_points,
        typical_user,
        tagged_bs_index,
        association,
        tagged_distance,
        window_radius,
        tagged_cell,
        external,
        cell_loads,
    })
}

fn build_ball<R: Rng + ?Sized>(
    params: &SystemParams,
    window_radius: f64,
    rng: &mut R,
) -> Result<NetworkRealization, GeometryError> {
    let k = params.users_per_cell;
    let r = params.cell_radius;
    let y = rayleigh_distance(params.bs_density, rng);
    let c = Point::polar(y, 2.0 * PI * rng.gen::<f64>());

    let mut bs_points = vec![c];
    bs_points.extend(
        sample_ppp(params.bs_density, window_radius, rng)?
            .into_iter()
            .filter(|b| b.norm_sq() > y * y),
    );

    let mut user_points = Vec::with_capacity(k);
    user_points.push(Point::ORIGIN);
    for _ in 1..k {
        let phi = 2.0 * PI * rng.gen::<f64>();
        user_points.push(c.offset(y * phi.cos(), y * phi.sin()));
    }
    let tagged_cell: Vec<usize> = (0..k).collect();
    let first_external = user_points.len();
    user_points.extend(
        sample_ppp(params.user_density, window_radius, rng)?
            .into_iter()
            .filter(|e| e.dist_sq(&c) > r * r),
    );
    let external: Vec<usize> = (first_external..user_points.len()).collect();

    let index = GridIndex::new(&bs_points, window_radius, r);
    let mut association = vec![0usize; user_points.len()];
    for &e in &external {
        association[e] = index.nearest(&user_points[e]).expect("tagged BS present");
    }
    let cell_loads = vec![k; bs_points.len()];
    Ok(NetworkRealization {
        mode: SceneMode::BallApprox,
        bs_points,
        user_points,
        typical_user: 0,
        tagged_bs_index: 0,
        association,
        tagged_distance: y,
        window_radius,
        tagged_cell,
        external,
        cell_loads,
    })
}

/// Distances-only view of a ball-approximation scene: everything the
/// interference and leakage terms depend on.
#[derive(Debug, Clone, Default)]
pub struct BallScene {
    pub tagged_distance: f64,
    /// Squared distances from the origin to the interfering BSs.
    pub interferer_dist_sq: Vec<f64>,
    /// Squared distances from the tagged BS to the external eavesdroppers.
    pub eavesdropper_dist_sq: Vec<f64>,
}

impl BallScene {
    pub fn from_realization(real: &NetworkRealization) -> Self {
        let c = real.tagged_bs();
        Self {
            tagged_distance: real.tagged_distance,
            interferer_dist_sq: real.interferers().map(|b| real.bs_points[b].norm_sq()).collect(),
            eavesdropper_dist_sq: real
                .external
                .iter()
                .map(|&e| real.user_points[e].dist_sq(&c))
                .collect(),
        }
    }
}

/// Sample a ball-approximation scene directly as distances, reusing the
/// buffers of `scene`. A fixed `tagged_distance` conditions on `‖c‖`.
/// Interferers fill `‖c‖ < ‖b‖ ≤ R` around the origin; eavesdroppers fill
/// `r < ‖e − c‖ ≤ R` around the tagged BS.
pub fn sample_ball_scene_into<R: Rng + ?Sized>(
    params: &SystemParams,
    window_radius: f64,
    tagged_distance: Option<f64>,
    rng: &mut R,
    scene: &mut BallScene,
) -> Result<(), GeometryError> {
    positive("window_radius", window_radius)?;
    let y = match tagged_distance {
        Some(y) => {
            positive("tagged_distance", y)?;
            y
        }
        None => rayleigh_distance(params.bs_density, rng),
    };
    let r = params.cell_radius;
    let r2 = window_radius * window_radius;
    let bs_mean = params.bs_density * PI * (r2 - y * y).max(0.0);
    let user_mean = params.user_density * PI * r2;
    if bs_mean.max(user_mean) > DEFAULT_POINT_CAP {
        return Err(GeometryError::TooManyPoints {
            expected: bs_mean.max(user_mean),
            cap: DEFAULT_POINT_CAP,
        });
    }
    scene.tagged_distance = y;
    scene.interferer_dist_sq.clear();
    // PPP restricted to the annulus y < |b| ≤ R.
    let n_bs = poisson_count(bs_mean, rng);
    let span = (r2 - y * y).max(0.0);
    scene
        .interferer_dist_sq
        .extend((0..n_bs).map(|_| y * y + span * rng.gen::<f64>()));

    // Eavesdroppers: PPP on the annulus r < |e − c| ≤ R around the tagged
    // BS, so squared distances are uniform on (r², R²]. Same count law as
    // a window centred on the origin with B(c, r) removed.
    scene.eavesdropper_dist_sq.clear();
    let inner = r * r;
    let span = (r2 - inner).max(0.0);
    let n_users = poisson_count(params.user_density * PI * span, rng);
    scene
        .eavesdropper_dist_sq
        .extend((0..n_users).map(|_| inner + span * rng.gen::<f64>()));
    Ok(())
}

pub fn percolation_threshold(coop: &CooperationConfig) -> f64 {
    8.0 * LN_2 / (coop.coop_radius * coop.coop_radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercolationReport {
    pub threshold_density: f64,
    pub supercritical: bool,
    pub largest_cluster_fraction: f64,
    pub n_users: usize,
}

struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }

    fn largest(&self) -> usize {
        (0..self.parent.len())
            .filter(|&i| self.parent[i] == i)
            .map(|i| self.size[i])
            .max()
            .unwrap_or(0)
    }
}

/// Largest connected component of the random geometric graph on `points`
/// with link distance `radius`, as a fraction of the point count.
pub fn largest_cluster_fraction(points: &[Point], half_width: f64, radius: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let index = GridIndex::new(points, half_width, radius);
    let mut sets = DisjointSet::new(points.len());
    index.for_each_pair_within(radius, |i, j| sets.union(i, j));
    sets.largest() as f64 / points.len() as f64
}

pub fn percolation_report<R: Rng + ?Sized>(
    params: &SystemParams,
    coop: &CooperationConfig,
    window_radius: f64,
    rng: &mut R,
) -> Result<PercolationReport, GeometryError> {
    positive("coop_radius", coop.coop_radius)?;
    let threshold_density = percolation_threshold(coop);
    let users = sample_ppp(params.user_density, window_radius, rng)?;
    Ok(PercolationReport {
        threshold_density,
        supercritical: params.user_density * coop.coop_radius * coop.coop_radius > 8.0 * LN_2,
        largest_cluster_fraction: largest_cluster_fraction(&users, window_radius, coop.link_distance()),
        n_users: users.len(),
    })
}
