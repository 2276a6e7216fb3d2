//! Multilayer context graph: one weighted similarity graph per structural
//! scale, connected vertically through each node's copies.

use std::f64::consts::E;

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use super::structural::StructuralDistances;

/// One layer in compressed-row form.
#[derive(Debug, Clone)]
pub struct Layer {
    offsets: Vec<usize>,
    targets: Vec<u32>,
    weights: Vec<f64>,
    pub average_weight: f64,
    /// `ln(Γ(u) + e)` where `Γ(u)` counts u's edges heavier than the layer average.
    pub up_weight: Vec<f64>,
    samplers: Vec<Option<WeightedAliasIndex<f64>>>,
}

impl Layer {
    fn build(n: usize, pairs: &[(u32, u32, f64)]) -> Layer {
        let mut counts = vec![0usize; n];
        for &(u, v, _) in pairs {
            counts[u as usize] += 1;
            counts[v as usize] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + counts[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0u32; offsets[n]];
        let mut weights = vec![0f64; offsets[n]];
        for &(u, v, f) in pairs {
            let w = (-f).exp();
            for (a, b) in [(u, v), (v, u)] {
                let slot = &mut fill[a as usize];
                targets[*slot] = b;
                weights[*slot] = w;
                *slot += 1;
            }
        }
        let average_weight = if pairs.is_empty() {
            0.0
        } else {
            pairs.iter().map(|&(_, _, f)| (-f).exp()).sum::<f64>() / pairs.len() as f64
        };
        let up_weight = (0..n)
            .map(|u| {
                let heavy = weights[offsets[u]..offsets[u + 1]].iter().filter(|&&w| w > average_weight).count();
                (heavy as f64 + E).ln()
            })
            .collect();
        let samplers = (0..n)
            .map(|u| {
                let ws = &weights[offsets[u]..offsets[u + 1]];
                if ws.is_empty() {
                    return None;
                }
                let total: f64 = ws.iter().sum();
                let ws = if total > 0.0 && total.is_finite() { ws.to_vec() } else { vec![1.0; ws.len()] };
                WeightedAliasIndex::new(ws).ok()
            })
            .collect();
        Layer {
            offsets,
            targets,
            weights,
            average_weight,
            up_weight,
            samplers,
        }
    }

    pub fn neighbours(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[u]..self.offsets[u + 1];
        self.targets[r.clone()].iter().map(|&t| t as usize).zip(self.weights[r].iter().copied())
    }

    pub fn has_neighbours(&self, u: usize) -> bool {
        self.offsets[u + 1] > self.offsets[u]
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn sample_neighbour<R: Rng + ?Sized>(&self, u: usize, rng: &mut R) -> Option<usize> {
        let sampler = self.samplers[u].as_ref()?;
        Some(self.targets[self.offsets[u] + sampler.sample(rng)] as usize)
    }
}

/// Transition law of the biased walk at one `(node, layer)` state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    pub within: Vec<(usize, f64)>,
    pub up: f64,
    pub down: f64,
    /// Mass of steps that cannot move anywhere.
    pub stay: f64,
}

#[derive(Debug, Clone)]
pub struct ContextGraph {
    pub node_count: usize,
    pub layers: Vec<Layer>,
}

impl ContextGraph {
    pub fn build(distances: &StructuralDistances) -> ContextGraph {
        let layers = distances
            .layers
            .iter()
            .map(|pairs| Layer::build(distances.node_count, pairs))
            .collect();
        ContextGraph {
            node_count: distances.node_count,
            layers,
        }
    }

    pub fn k_max(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    pub(crate) fn can_go_up(&self, u: usize, k: usize) -> bool {
        k + 1 < self.layers.len() && self.layers[k + 1].has_neighbours(u)
    }

    /// Probability of moving up when a layer change is taken and both
    /// directions are open; the down edge always has weight 1.
    pub fn up_probability(&self, u: usize, k: usize) -> f64 {
        let up = self.layers[k].up_weight[u];
        up / (up + 1.0)
    }

    pub fn step_distribution(&self, u: usize, k: usize, layer_jump_prob: f64) -> StepDistribution {
        let layer = &self.layers[k];
        let total: f64 = layer.neighbours(u).map(|(_, w)| w).sum();
        let (within, jump_mass) = if layer.has_neighbours(u) {
            let within_mass = 1.0 - layer_jump_prob;
            let within = if total > 0.0 {
                layer.neighbours(u).map(|(v, w)| (v, within_mass * w / total)).collect()
            } else {
                let deg = layer.neighbours(u).count() as f64;
                layer.neighbours(u).map(|(v, _)| (v, within_mass / deg)).collect()
            };
            (within, layer_jump_prob)
        } else {
            (Vec::new(), 1.0)
        };
        let up_ok = self.can_go_up(u, k);
        let down_ok = k > 0;
        let (up, down, stay) = match (up_ok, down_ok) {
            (true, true) => {
                let p = self.up_probability(u, k);
                (jump_mass * p, jump_mass * (1.0 - p), 0.0)
            }
            (true, false) => (jump_mass, 0.0, 0.0),
            (false, true) => (0.0, jump_mass, 0.0),
            (false, false) => (0.0, 0.0, jump_mass),
        };
        StepDistribution { within, up, down, stay }
    }
}

#[cfg(test)]
mod tests {
    use super::super::structural::{all_structural_distances, PairSelection};
    use super::*;
    use crate::metrics::fixtures::*;
    use crate::metrics::Topology;

    #[test]
    fn zero_distance_weight_one() {
        let topo = Topology::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
        let ctx = ContextGraph::build(&all_structural_distances(&topo, &PairSelection::default()));
        for layer in &ctx.layers {
            for u in 0..6 {
                assert!(layer.neighbours(u).all(|(_, w)| w == 1.0));
            }
        }
    }

    #[test]
    fn two_nodes_monotone() {
        let d = all_structural_distances(&path(2), &PairSelection::default());
        let ctx = ContextGraph::build(&d);
        let ws: Vec<f64> = ctx.layers.iter().map(|l| l.neighbours(0).next().unwrap().1).collect();
        assert!(ws.windows(2).all(|w| w[1] <= w[0]));
        assert!(ctx.layers.iter().all(|l| l.edge_count() == 1));
    }

    #[test]
    fn layer_sizes_bounded() {
        let topo = star(5);
        let n = topo.len();
        let ctx = ContextGraph::build(&all_structural_distances(&topo, &PairSelection::default()));
        assert!(ctx.layers.iter().all(|l| l.edge_count() <= n * (n - 1) / 2));
    }

    #[test]
    fn within_mass() {
        let topo = path(6);
        let ctx = ContextGraph::build(&all_structural_distances(&topo, &PairSelection::default()));
        for k in 0..ctx.layers.len() {
            for u in 0..topo.len() {
                let d = ctx.step_distribution(u, k, 0.3);
                let within: f64 = d.within.iter().map(|(_, p)| p).sum();
                if ctx.layers[k].has_neighbours(u) {
                    assert!((within - 0.7).abs() < 1e-9);
                }
                assert!((within + d.up + d.down + d.stay - 1.0).abs() < 1e-9);
            }
        }
    }
}
