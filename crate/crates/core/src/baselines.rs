//! Fixed association policies used for comparison. Resources for these are
//! then optimized by the solver in fixed-association mode.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::scenario::Scenario;
use crate::solver::one_hot;

/// Each user on its nearest edge; ties go to the lower edge index.
pub fn min_distance_assignment<T: Scalar>(scenario: &Scenario<T>) -> Matrix<T> {
    let assignment: Vec<usize> = (0..scenario.n_users())
        .map(|u| {
            (1..scenario.n_edges()).fold(0, |best, n| {
                if scenario.link(u, n).distance_m() < scenario.link(u, best).distance_m() {
                    n
                } else {
                    best
                }
            })
        })
        .collect();
    one_hot(&assignment, scenario.n_edges())
}

/// Each user independently uniform over the edges.
pub fn random_assignment<T: Scalar>(scenario: &Scenario<T>, seed: u64) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = scenario.n_edges();
    let assignment: Vec<usize> = (0..scenario.n_users()).map(|_| rng.gen_range(0..edges)).collect();
    one_hot(&assignment, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemParams;
    use crate::scenario::{generate_topology, EdgeNode, GainModel, TopologyConfig, UserNode};
    use crate::solver::assignment_from_x;

    fn fixed_scenario(users: &[[f64; 2]], edges: &[[f64; 2]]) -> Scenario<f64> {
        Scenario::from_nodes(
            SystemParams::default(),
            users
                .iter()
                .enumerate()
                .map(|(id, &position)| UserNode {
                    id,
                    position,
                    f_max_hz: 1e9,
                })
                .collect(),
            edges
                .iter()
                .enumerate()
                .map(|(id, &position)| EdgeNode {
                    id,
                    position,
                    h_max_hz: 4e9,
                    p_total_w: 1.0,
                    b_total_hz: 20e6,
                })
                .collect(),
            &GainModel::default(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn nearest_edge_chosen() {
        let s = fixed_scenario(&[[0.0, 0.0]], &[[600.0, 0.0], [0.0, 900.0]]);
        assert_eq!(assignment_from_x(&min_distance_assignment(&s)).unwrap(), vec![0]);
    }

    #[test]
    fn equidistant_tie_goes_to_first_edge() {
        let s = fixed_scenario(&[[0.0, 0.0]], &[[700.0, 0.0], [0.0, 700.0]]);
        assert_eq!(assignment_from_x(&min_distance_assignment(&s)).unwrap(), vec![0]);
    }

    #[test]
    fn permuting_edges_permutes_choice() {
        let users = [[10.0, 0.0], [-50.0, 30.0], [0.0, -200.0]];
        let edges = [[800.0, 0.0], [-700.0, 100.0], [0.0, -900.0]];
        let a = assignment_from_x(&min_distance_assignment(&fixed_scenario(&users, &edges))).unwrap();
        let perm = [2, 0, 1];
        let permuted: Vec<[f64; 2]> = perm.iter().map(|&i| edges[i]).collect();
        let b = assignment_from_x(&min_distance_assignment(&fixed_scenario(&users, &permuted))).unwrap();
        for (u, &n) in b.iter().enumerate() {
            assert_eq!(perm[n], a[u]);
        }
    }

    #[test]
    fn min_distance_scale_invariant() {
        let users = [[10.0, 0.0], [-50.0, 30.0], [0.0, -200.0], [120.0, 40.0]];
        let edges = [[800.0, 0.0], [-700.0, 100.0], [0.0, -900.0]];
        let a = assignment_from_x(&min_distance_assignment(&fixed_scenario(&users, &edges))).unwrap();
        let scale = |pts: &[[f64; 2]]| pts.iter().map(|p| [p[0] * 0.37, p[1] * 0.37]).collect::<Vec<_>>();
        let b = assignment_from_x(&min_distance_assignment(&fixed_scenario(
            &scale(&users),
            &scale(&edges),
        )))
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_is_seeded_and_one_hot() {
        let s = generate_topology(1, &TopologyConfig::default(), &SystemParams::<f64>::default()).unwrap();
        let a = random_assignment(&s, 42);
        assert_eq!(a, random_assignment(&s, 42));
        assert!(assignment_from_x(&a).is_ok());
        assert!(assignment_from_x(&min_distance_assignment(&s)).is_ok());
    }

    #[test]
    fn single_edge_takes_everyone() {
        let cfg = TopologyConfig::<f64> {
            n_edges: 1,
            ..TopologyConfig::default()
        };
        let s = generate_topology(3, &cfg, &SystemParams::default()).unwrap();
        assert!(assignment_from_x(&random_assignment(&s, 9))
            .unwrap()
            .iter()
            .all(|&n| n == 0));
    }

    #[test]
    fn random_is_uniform_over_edges() {
        let cfg = TopologyConfig::<f64> {
            n_users: 10_000,
            n_edges: 4,
            ..TopologyConfig::default()
        };
        let s = generate_topology(5, &cfg, &SystemParams::default()).unwrap();
        let a = assignment_from_x(&random_assignment(&s, 77)).unwrap();
        let mut counts = [0usize; 4];
        for n in a {
            counts[n] += 1;
        }
        let expected = 2500.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 3 degrees of freedom, 0.1 % critical value
        assert!(chi2 < 16.27, "chi2 {chi2}");
        for c in counts {
            assert!((c as f64 / 10_000.0 - 0.25).abs() <= 0.02);
        }
    }
}
