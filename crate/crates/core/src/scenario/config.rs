//! JSON configuration. Logarithmic units (dBm, dB) and GHz/MHz are accepted
//! here only and converted to SI once.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{generate_topology, EdgeNode, GainModel, Geometry, Scenario, TopologyConfig, UserNode};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::{db_to_linear, dbm_per_hz_to_w_per_hz, dbm_to_w, QosModel, RadioLink, SystemParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub kappa: f64,
    pub theta_elements: f64,
    pub bits_per_element: f64,
    pub source_image_elements: f64,
    pub noise_psd_dbm_hz: f64,
    pub y1_cycles: f64,
    pub y2_cycles: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            kappa: 1e-28,
            theta_elements: 392.0,
            bits_per_element: 32.0,
            source_image_elements: 784.0,
            noise_psd_dbm_hz: -174.0,
            y1_cycles: 1e7,
            y2_cycles: 2e7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub user_radius_m: f64,
    pub edge_inner_m: f64,
    pub edge_outer_m: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        GeometrySection {
            user_radius_m: 500.0,
            edge_inner_m: 500.0,
            edge_outer_m: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSection {
    pub n_users: usize,
    pub n_edges: usize,
    pub f_max_candidates_ghz: Vec<f64>,
    pub h_max_ghz: f64,
    pub p_total_dbm: f64,
    pub b_total_mhz: f64,
}

impl Default for PopulationSection {
    fn default() -> Self {
        PopulationSection {
            n_users: 20,
            n_edges: 4,
            f_max_candidates_ghz: vec![0.5, 1.0, 1.5, 2.5],
            h_max_ghz: 4.0,
            p_total_dbm: 30.0,
            b_total_mhz: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainSection {
    pub g0_db: f64,
    pub d0_m: f64,
    pub alpha: f64,
}

impl Default for GainSection {
    fn default() -> Self {
        GainSection {
            g0_db: -30.0,
            d0_m: 1.0,
            alpha: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QosSection {
    pub slope: f64,
    pub intercept: f64,
}

impl Default for QosSection {
    fn default() -> Self {
        QosSection {
            slope: 0.873,
            intercept: 0.1006,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub x: f64,
    pub y: f64,
    pub f_max_ghz: f64,
}

/// Per-edge resources fall back to the population section when omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub h_max_ghz: Option<f64>,
    #[serde(default)]
    pub p_total_dbm: Option<f64>,
    #[serde(default)]
    pub b_total_mhz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub gain: f64,
    pub power_w: f64,
    pub bandwidth_hz: f64,
}

/// A topology listed verbatim instead of drawn at random.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub users: Vec<UserSpec>,
    pub edges: Vec<EdgeSpec>,
    /// Optional `users x edges` link table; derived from positions when absent.
    #[serde(default)]
    pub links: Option<Vec<Vec<LinkSpec>>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub system: SystemSection,
    pub geometry: GeometrySection,
    pub population: PopulationSection,
    pub gain_model: GainSection,
    pub qos: QosSection,
    pub seed: u64,
    pub topology: Option<TopologySection>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.system_params::<f64>()?;
        self.qos_model::<f64>()?;
        self.topology_config::<f64>().geometry.validate()?;
        Ok(())
    }

    pub fn system_params<T: Scalar>(&self) -> Result<SystemParams<T>> {
        let s = &self.system;
        let p = SystemParams {
            kappa: T::lit(s.kappa),
            theta_elements: T::lit(s.theta_elements),
            bits_per_element: T::lit(s.bits_per_element),
            source_image_elements: T::lit(s.source_image_elements),
            noise_psd: T::lit(dbm_per_hz_to_w_per_hz(s.noise_psd_dbm_hz)),
            y1_cycles: T::lit(s.y1_cycles),
            y2_cycles: T::lit(s.y2_cycles),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn qos_model<T: Scalar>(&self) -> Result<QosModel<T>> {
        QosModel::new(T::lit(self.qos.slope), T::lit(self.qos.intercept))
    }

    pub fn gain_model<T: Scalar>(&self) -> GainModel<T> {
        GainModel {
            g0: T::lit(db_to_linear(self.gain_model.g0_db)),
            d0_m: T::lit(self.gain_model.d0_m),
            alpha: T::lit(self.gain_model.alpha),
        }
    }

    pub fn topology_config<T: Scalar>(&self) -> TopologyConfig<T> {
        let pop = &self.population;
        TopologyConfig {
            n_users: pop.n_users,
            n_edges: pop.n_edges,
            geometry: Geometry {
                user_radius_m: T::lit(self.geometry.user_radius_m),
                edge_inner_m: T::lit(self.geometry.edge_inner_m),
                edge_outer_m: T::lit(self.geometry.edge_outer_m),
            },
            f_max_candidates_hz: pop.f_max_candidates_ghz.iter().map(|&g| T::lit(g * 1e9)).collect(),
            h_max_hz: T::lit(pop.h_max_ghz * 1e9),
            p_total_w: T::lit(dbm_to_w(pop.p_total_dbm)),
            b_total_hz: T::lit(pop.b_total_mhz * 1e6),
            gain_model: self.gain_model(),
        }
    }

    /// Builds the scenario for `seed`: a random draw, or the verbatim topology if one is listed.
    pub fn scenario<T: Scalar>(&self, seed: u64) -> Result<Scenario<T>> {
        let params = self.system_params::<T>()?;
        let Some(topo) = &self.topology else {
            return generate_topology(seed, &self.topology_config(), &params);
        };
        let pop = &self.population;
        let users: Vec<UserNode<T>> = topo
            .users
            .iter()
            .enumerate()
            .map(|(id, u)| UserNode {
                id,
                position: [T::lit(u.x), T::lit(u.y)],
                f_max_hz: T::lit(u.f_max_ghz * 1e9),
            })
            .collect();
        let edges: Vec<EdgeNode<T>> = topo
            .edges
            .iter()
            .enumerate()
            .map(|(id, e)| EdgeNode {
                id,
                position: [T::lit(e.x), T::lit(e.y)],
                h_max_hz: T::lit(e.h_max_ghz.unwrap_or(pop.h_max_ghz) * 1e9),
                p_total_w: T::lit(dbm_to_w(e.p_total_dbm.unwrap_or(pop.p_total_dbm))),
                b_total_hz: T::lit(e.b_total_mhz.unwrap_or(pop.b_total_mhz) * 1e6),
            })
            .collect();
        match &topo.links {
            None => Scenario::from_nodes(params, users, edges, &self.gain_model(), seed),
            Some(rows) => {
                let mut table = Vec::with_capacity(rows.len());
                for (u, row) in rows.iter().enumerate() {
                    let mut out = Vec::with_capacity(row.len());
                    for (n, l) in row.iter().enumerate() {
                        let (Some(user), Some(edge)) = (users.get(u), edges.get(n)) else {
                            return Err(Error::Config("link table larger than node lists".into()));
                        };
                        let d = super::distance(user.position, edge.position);
                        out.push(RadioLink::new(
                            d,
                            T::lit(l.gain),
                            T::lit(l.power_w),
                            T::lit(l.bandwidth_hz),
                            params.noise_psd,
                        )?);
                    }
                    table.push(out);
                }
                let links = Matrix::from_rows(table).map_err(|e| Error::Config(e.to_string()))?;
                Scenario::with_links(params, users, edges, links, seed)
            }
        }
    }
}
