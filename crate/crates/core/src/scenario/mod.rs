//! Network topologies: users in a disk, edge nodes in a surrounding ring, and
//! the per-pair radio links derived from them.

pub mod config;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{RadioLink, SystemParams};
use crate::scalar::{within, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserNode<T> {
    pub id: usize,
    /// `(x, y)` in meters.
    pub position: [T; 2],
    /// Maximum local CPU frequency.
    pub f_max_hz: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeNode<T> {
    pub id: usize,
    pub position: [T; 2],
    /// CPU capacity shared by all users the edge must be ready to serve.
    pub h_max_hz: T,
    /// Total transmit power split among users.
    pub p_total_w: T,
    /// Total bandwidth split among users.
    pub b_total_hz: T,
}

/// Log-distance path loss `g0 * (d0 / d)^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainModel<T> {
    pub g0: T,
    pub d0_m: T,
    pub alpha: T,
}

impl<T: Scalar> Default for GainModel<T> {
    fn default() -> Self {
        GainModel {
            g0: T::lit(1e-3),
            d0_m: T::one(),
            alpha: T::lit(3.0),
        }
    }
}

pub fn channel_gain<T: Scalar>(distance_m: T, model: &GainModel<T>) -> Result<T> {
    if !(distance_m > T::zero()) {
        return Err(Error::Domain(format!("distance must be positive, got {distance_m}")));
    }
    Ok(model.g0 * (model.d0_m / distance_m).powf(model.alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry<T> {
    pub user_radius_m: T,
    pub edge_inner_m: T,
    pub edge_outer_m: T,
}

impl<T: Scalar> Default for Geometry<T> {
    fn default() -> Self {
        Geometry {
            user_radius_m: T::lit(500.0),
            edge_inner_m: T::lit(500.0),
            edge_outer_m: T::lit(1000.0),
        }
    }
}

impl<T: Scalar> Geometry<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.user_radius_m > T::zero()
            && self.edge_inner_m > T::zero()
            && self.edge_inner_m < self.edge_outer_m
            && self.edge_outer_m.is_finite())
        {
            return Err(Error::Config(format!(
                "invalid geometry: user radius {}, edge ring [{}, {}]",
                self.user_radius_m, self.edge_inner_m, self.edge_outer_m
            )));
        }
        Ok(())
    }
}

/// Everything needed to draw a random topology besides the seed and system constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig<T> {
    pub n_users: usize,
    pub n_edges: usize,
    pub geometry: Geometry<T>,
    pub f_max_candidates_hz: Vec<T>,
    pub h_max_hz: T,
    pub p_total_w: T,
    pub b_total_hz: T,
    pub gain_model: GainModel<T>,
}

impl<T: Scalar> Default for TopologyConfig<T> {
    fn default() -> Self {
        TopologyConfig {
            n_users: 20,
            n_edges: 4,
            geometry: Geometry::default(),
            f_max_candidates_hz: [0.5e9, 1.0e9, 1.5e9, 2.5e9].iter().map(|&v| T::lit(v)).collect(),
            h_max_hz: T::lit(4e9),
            p_total_w: T::one(),
            b_total_hz: T::lit(20e6),
            gain_model: GainModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario<T> {
    pub params: SystemParams<T>,
    pub users: Vec<UserNode<T>>,
    pub edges: Vec<EdgeNode<T>>,
    pub links: Matrix<RadioLink<T>>,
    pub seed: u64,
}

impl<T: Scalar> Scenario<T> {
    /// Builds links from node positions: path-loss gains plus distance-proportional resource shares.
    pub fn from_nodes(
        params: SystemParams<T>,
        users: Vec<UserNode<T>>,
        edges: Vec<EdgeNode<T>>,
        gain_model: &GainModel<T>,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        if users.is_empty() || edges.is_empty() {
            return Err(Error::Config("scenario needs at least one user and one edge".into()));
        }
        let mut columns = Vec::with_capacity(edges.len());
        for edge in &edges {
            let shares = split_resources(edge, &users)?;
            let mut col = Vec::with_capacity(users.len());
            for (user, (p, b)) in users.iter().zip(shares) {
                let d = distance(user.position, edge.position);
                let g = channel_gain(d, gain_model)?;
                col.push(RadioLink::new(d, g, p, b, params.noise_psd)?);
            }
            columns.push(col);
        }
        let links = Matrix::from_fn(users.len(), edges.len(), |u, n| columns[n][u]);
        let scenario = Scenario {
            params,
            users,
            edges,
            links,
            seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Uses caller-supplied link parameters verbatim; only the rate is recomputed.
    pub fn with_links(
        params: SystemParams<T>,
        users: Vec<UserNode<T>>,
        edges: Vec<EdgeNode<T>>,
        links: Matrix<RadioLink<T>>,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        links.ensure_shape((users.len(), edges.len()), "link matrix")?;
        let scenario = Scenario {
            params,
            users,
            edges,
            links,
            seed,
        };
        scenario.check_nodes()?;
        Ok(scenario)
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.users.len(), self.edges.len())
    }

    pub fn link(&self, user: usize, edge: usize) -> &RadioLink<T> {
        &self.links[(user, edge)]
    }

    fn check_nodes(&self) -> Result<()> {
        if self.users.is_empty() || self.edges.is_empty() {
            return Err(Error::Config("scenario needs at least one user and one edge".into()));
        }
        for u in &self.users {
            if !(u.f_max_hz > T::zero()) {
                return Err(Error::Config(format!("user {} has non-positive f_max", u.id)));
            }
        }
        for e in &self.edges {
            if !(e.h_max_hz > T::zero() && e.p_total_w > T::zero() && e.b_total_hz > T::zero()) {
                return Err(Error::Config(format!("edge {} has non-positive resources", e.id)));
            }
        }
        Ok(())
    }

    /// Checks geometry-consistent links and exact per-edge resource sums.
    pub fn validate(&self) -> Result<()> {
        self.check_nodes()?;
        self.links.ensure_shape(self.shape(), "link matrix")?;
        let tol = T::lit(1e-9).max(T::tol_floor() * T::lit(self.n_users() as f64));
        for (n, edge) in self.edges.iter().enumerate() {
            let mut p_sum = T::zero();
            let mut b_sum = T::zero();
            for (u, user) in self.users.iter().enumerate() {
                let link = self.link(u, n);
                let d = distance(user.position, edge.position);
                if !within(link.distance_m(), d, tol, T::zero()) {
                    return Err(Error::Contract(format!(
                        "link ({u}, {n}) distance {} disagrees with geometry {d}",
                        link.distance_m()
                    )));
                }
                p_sum = p_sum + link.power_w();
                b_sum = b_sum + link.bandwidth_hz();
            }
            if !within(p_sum, edge.p_total_w, tol, T::zero()) || !within(b_sum, edge.b_total_hz, tol, T::zero()) {
                return Err(Error::Contract(format!(
                    "edge {n} resource shares do not sum to totals"
                )));
            }
        }
        Ok(())
    }
}

pub fn distance<T: Scalar>(a: [T; 2], b: [T; 2]) -> T {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Splits an edge's power and bandwidth among users proportionally to their distance.
pub fn split_resources<T: Scalar>(edge: &EdgeNode<T>, users: &[UserNode<T>]) -> Result<Vec<(T, T)>> {
    if users.is_empty() {
        return Err(Error::Contract("cannot split resources among zero users".into()));
    }
    let dists: Vec<T> = users.iter().map(|u| distance(u.position, edge.position)).collect();
    if let Some(i) = dists.iter().position(|&d| !(d > T::zero())) {
        return Err(Error::Domain(format!(
            "user {} is co-located with edge {}",
            users[i].id, edge.id
        )));
    }
    let total = dists.iter().fold(T::zero(), |a, &d| a + d);
    let mut shares: Vec<(T, T)> = dists
        .iter()
        .map(|&d| (edge.p_total_w * d / total, edge.b_total_hz * d / total))
        .collect();
    // Put the rounding residue on the largest share so sums match the totals.
    let (imax, _) = dists
        .iter()
        .enumerate()
        .fold((0, T::zero()), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
    let p_rest = shares
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != imax)
        .fold(T::zero(), |a, (_, s)| a + s.0);
    let b_rest = shares
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != imax)
        .fold(T::zero(), |a, (_, s)| a + s.1);
    shares[imax] = (edge.p_total_w - p_rest, edge.b_total_hz - b_rest);
    Ok(shares)
}

fn sample_disk<T: Scalar>(rng: &mut ChaCha8Rng, radius: f64) -> [T; 2] {
    let r = radius * rng.gen::<f64>().sqrt();
    let phi = std::f64::consts::TAU * rng.gen::<f64>();
    [T::lit(r * phi.cos()), T::lit(r * phi.sin())]
}

fn sample_ring<T: Scalar>(rng: &mut ChaCha8Rng, inner: f64, outer: f64) -> [T; 2] {
    let r = (inner * inner + rng.gen::<f64>() * (outer * outer - inner * inner)).sqrt();
    let phi = std::f64::consts::TAU * rng.gen::<f64>();
    [T::lit(r * phi.cos()), T::lit(r * phi.sin())]
}

/// Draws an area-uniform topology. Deterministic in `seed`.
pub fn generate_topology<T: Scalar>(
    seed: u64,
    topo: &TopologyConfig<T>,
    params: &SystemParams<T>,
) -> Result<Scenario<T>> {
    topo.geometry.validate()?;
    if topo.n_users == 0 || topo.n_edges == 0 {
        return Err(Error::Config("need at least one user and one edge".into()));
    }
    if topo.f_max_candidates_hz.is_empty() || topo.f_max_candidates_hz.iter().any(|&f| !(f > T::zero())) {
        return Err(Error::Config("f_max candidates must be non-empty and positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = &topo.geometry;
    let users: Vec<UserNode<T>> = (0..topo.n_users)
        .map(|id| UserNode {
            id,
            position: sample_disk(&mut rng, g.user_radius_m.as_f64()),
            f_max_hz: *topo.f_max_candidates_hz.choose(&mut rng).expect("non-empty"),
        })
        .collect();
    let edges: Vec<EdgeNode<T>> = (0..topo.n_edges)
        .map(|id| EdgeNode {
            id,
            position: sample_ring(&mut rng, g.edge_inner_m.as_f64(), g.edge_outer_m.as_f64()),
            h_max_hz: topo.h_max_hz,
            p_total_w: topo.p_total_w,
            b_total_hz: topo.b_total_hz,
        })
        .collect();
    Scenario::from_nodes(params.clone(), users, edges, &topo.gain_model, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn user(id: usize, x: f64, y: f64) -> UserNode<f64> {
        UserNode {
            id,
            position: [x, y],
            f_max_hz: 1e9,
        }
    }

    fn edge(x: f64, y: f64) -> EdgeNode<f64> {
        EdgeNode {
            id: 0,
            position: [x, y],
            h_max_hz: 4e9,
            p_total_w: 1.0,
            b_total_hz: 20e6,
        }
    }

    #[test]
    fn default_population_size() {
        let s = generate_topology(7, &TopologyConfig::default(), &SystemParams::<f64>::default()).unwrap();
        assert_eq!(s.shape(), (20, 4));
        s.validate().unwrap();
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = TopologyConfig::default();
        let p = SystemParams::<f64>::default();
        let a = serde_json::to_string(&generate_topology(11, &cfg, &p).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_topology(11, &cfg, &p).unwrap()).unwrap();
        let c = serde_json::to_string(&generate_topology(12, &cfg, &p).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn nodes_respect_geometry_and_candidates() {
        let cfg = TopologyConfig::default();
        let s = generate_topology(3, &cfg, &SystemParams::<f64>::default()).unwrap();
        for u in &s.users {
            assert!(distance(u.position, [0.0, 0.0]) <= 500.0);
            assert!(cfg.f_max_candidates_hz.contains(&u.f_max_hz));
        }
        for e in &s.edges {
            let r = distance(e.position, [0.0, 0.0]);
            assert!((500.0..=1000.0).contains(&r));
        }
    }

    #[test]
    fn invalid_geometry_rejected() {
        let mut cfg = TopologyConfig::<f64>::default();
        cfg.geometry.edge_inner_m = 1200.0;
        let err = generate_topology(1, &cfg, &SystemParams::default()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn split_single_user_gets_everything() {
        let shares = split_resources(&edge(0.0, 0.0), &[user(0, 30.0, 40.0)]).unwrap();
        assert_eq!(shares, vec![(1.0, 20e6)]);
    }

    #[test]
    fn split_equal_distance_halves() {
        let shares = split_resources(&edge(0.0, 0.0), &[user(0, 100.0, 0.0), user(1, 0.0, 100.0)]).unwrap();
        assert_relative_eq!(shares[0].0, 0.5);
        assert_relative_eq!(shares[1].0, 0.5);
        assert_relative_eq!(shares[0].1, 10e6);
    }

    #[test]
    fn split_proportional_to_distance() {
        let shares = split_resources(&edge(0.0, 0.0), &[user(0, 100.0, 0.0), user(1, 300.0, 0.0)]).unwrap();
        assert_relative_eq!(shares[0].0, 0.25, max_relative = 1e-12);
        assert_relative_eq!(shares[1].0, 0.75, max_relative = 1e-12);
        assert_relative_eq!(shares[0].1, 5e6, max_relative = 1e-12);
        assert_relative_eq!(shares[1].1, 15e6, max_relative = 1e-12);
    }

    #[test]
    fn split_rejects_colocated_user() {
        let err = split_resources(&edge(5.0, 5.0), &[user(0, 5.0, 5.0)]).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn gain_power_law() {
        let m = GainModel::<f64>::default();
        assert_relative_eq!(channel_gain(1.0, &m).unwrap(), 1e-3);
        assert_relative_eq!(channel_gain(10.0, &m).unwrap(), 1e-6, max_relative = 1e-12);
        assert_relative_eq!(channel_gain(1000.0, &m).unwrap(), 1e-12, max_relative = 1e-12);
        assert!(channel_gain(0.0, &m).is_err());
        assert!(channel_gain(-1.0, &m).is_err());
    }

    #[test]
    fn radial_distribution_is_area_uniform() {
        let cfg = TopologyConfig::<f64> {
            n_users: 10_000,
            n_edges: 1,
            ..TopologyConfig::default()
        };
        let s = generate_topology(2024, &cfg, &SystemParams::default()).unwrap();
        let mut r: Vec<f64> = s
            .users
            .iter()
            .map(|u| distance(u.position, [0.0, 0.0]) / 500.0)
            .collect();
        r.sort_by(f64::total_cmp);
        let n = r.len() as f64;
        let ks = r
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = x * x;
                (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS statistic {ks}");
    }

    #[test]
    fn rate_decreases_with_distance_at_fixed_shares() {
        let p = SystemParams::<f64>::default();
        let gm = GainModel::default();
        let s = Scenario::from_nodes(
            p.clone(),
            vec![user(0, 200.0, 0.0), user(1, 0.0, 300.0)],
            vec![edge(0.0, 0.0)],
            &gm,
            0,
        )
        .unwrap();
        let link = s.link(0, 0);
        let mut last = link.rate_bps();
        for d in [250.0, 400.0, 800.0, 1500.0] {
            let g = channel_gain(d, &gm).unwrap();
            let moved = RadioLink::new(d, g, link.power_w(), link.bandwidth_hz(), p.noise_psd).unwrap();
            assert!(moved.rate_bps() < last);
            last = moved.rate_bps();
        }
    }

    #[test]
    fn transmission_energy_per_bit_grows_with_distance() {
        // Distance-proportional splitting keeps p/b fixed per edge, so energy per bit depends on gain only.
        let p = SystemParams::<f64>::default();
        let s = Scenario::from_nodes(
            p,
            vec![user(0, 100.0, 0.0), user(1, 0.0, 400.0), user(2, -900.0, 0.0)],
            vec![edge(0.0, 0.0)],
            &GainModel::default(),
            0,
        )
        .unwrap();
        let per_bit: Vec<f64> = (0..3)
            .map(|u| s.link(u, 0).power_w() / s.link(u, 0).rate_bps())
            .collect();
        assert!(per_bit[0] < per_bit[1] && per_bit[1] < per_bit[2]);
    }
}
