//! The parameter graph: the product of the per-node factor graphs.
//!
//! A parameter is one factor-graph vertex per node. Parameters are indexed
//! in mixed radix with node 0 as the least significant digit.

use std::sync::Arc;

use thiserror::Error;

use crate::factor::{
    FactorError, FactorGraph, FactorLibrary, FactorVertex, LogicParameter, NodeSignature,
    OrderParameter,
};
use crate::network::RegulatoryNetwork;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParameterError {
    #[error("parameter index {index} out of range (graph has {size} parameters)")]
    IndexOutOfRange { index: u64, size: u64 },
    #[error("node {node} has no factor-graph vertex with the given order and logic")]
    UnknownFactorVertex { node: String },
    #[error("expected {expected} node components, got {got}")]
    ComponentCount { expected: usize, got: usize },
    #[error(transparent)]
    Factor(#[from] FactorError),
}

/// Local factor-graph vertex index for every node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Parameter {
    pub components: Vec<usize>,
}

#[derive(Clone)]
pub struct ParameterGraph {
    network: RegulatoryNetwork,
    factors: Vec<Arc<FactorGraph>>,
    sizes: Vec<u64>,
    size: u64,
}

impl std::fmt::Debug for ParameterGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParameterGraph")
            .field("sizes", &self.sizes)
            .finish()
    }
}

impl ParameterGraph {
    pub fn new(
        network: RegulatoryNetwork,
        library: &FactorLibrary,
    ) -> Result<Self, ParameterError> {
        let factors = network
            .nodes()
            .iter()
            .map(|node| library.get(&NodeSignature::of_node(node)))
            .collect::<Result<Vec<_>, _>>()?;
        let sizes: Vec<u64> = factors.iter().map(|g| g.len() as u64).collect();
        let size = sizes.iter().product();
        Ok(ParameterGraph {
            network,
            factors,
            sizes,
            size,
        })
    }

    pub fn network(&self) -> &RegulatoryNetwork {
        &self.network
    }

    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn factor_sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn factor_graph(&self, node: usize) -> &FactorGraph {
        &self.factors[node]
    }

    /// Total number of candidates the search backend left undecided.
    pub fn undecided(&self) -> usize {
        self.factors.iter().map(|g| g.undecided).sum()
    }

    pub fn vertex(&self, node: usize, local: usize) -> &FactorVertex {
        &self.factors[node].vertices[local]
    }

    pub fn parameter(&self, index: u64) -> Result<Parameter, ParameterError> {
        if index >= self.size {
            return Err(ParameterError::IndexOutOfRange {
                index,
                size: self.size,
            });
        }
        let mut rest = index;
        let components = self
            .sizes
            .iter()
            .map(|&s| {
                let c = rest % s;
                rest /= s;
                c as usize
            })
            .collect();
        Ok(Parameter { components })
    }

    pub fn index(&self, parameter: &Parameter) -> Result<u64, ParameterError> {
        if parameter.components.len() != self.sizes.len() {
            return Err(ParameterError::ComponentCount {
                expected: self.sizes.len(),
                got: parameter.components.len(),
            });
        }
        let mut index = 0u64;
        for (j, (&c, &s)) in parameter
            .components
            .iter()
            .zip(&self.sizes)
            .enumerate()
            .rev()
        {
            if c as u64 >= s {
                return Err(ParameterError::UnknownFactorVertex {
                    node: self.network.node(j).name.clone(),
                });
            }
            index = index * s + c as u64;
        }
        Ok(index)
    }

    /// Looks up a parameter from explicit (order, logic) pairs per node.
    pub fn locate(
        &self,
        components: &[(OrderParameter, LogicParameter)],
    ) -> Result<Parameter, ParameterError> {
        if components.len() != self.factors.len() {
            return Err(ParameterError::ComponentCount {
                expected: self.factors.len(),
                got: components.len(),
            });
        }
        let components = components
            .iter()
            .enumerate()
            .map(|(j, (order, logic))| {
                self.factors[j].find(order, *logic).ok_or_else(|| {
                    ParameterError::UnknownFactorVertex {
                        node: self.network.node(j).name.clone(),
                    }
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(Parameter { components })
    }

    /// Indices of parameters differing from `index` in one node by one
    /// factor-graph edge, ascending.
    pub fn adjacencies(&self, index: u64) -> Result<Vec<u64>, ParameterError> {
        let p = self.parameter(index)?;
        let mut out = Vec::new();
        let mut stride = 1u64;
        for (j, &c) in p.components.iter().enumerate() {
            for &w in self.factors[j].neighbors(c) {
                out.push(index - c as u64 * stride + w as u64 * stride);
            }
            stride *= self.sizes[j];
        }
        out.sort_unstable();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(text: &str) -> ParameterGraph {
        ParameterGraph::new(
            RegulatoryNetwork::parse(text).unwrap(),
            &FactorLibrary::in_memory(),
        )
        .unwrap()
    }

    #[test]
    fn repressilator_size() {
        let g = graph("x1 : ~x3\nx2 : ~x1\nx3 : ~x2");
        assert_eq!(g.factor_sizes(), &[3, 3, 3]);
        assert_eq!(g.size(), 27);
    }

    #[test]
    fn decode_encode_round_trip() {
        let g = graph("x1 : (~x2)(~x3)\nx2 : ~x1\nx3 : ~x2");
        assert_eq!(g.factor_sizes(), &[6, 12, 3]);
        for i in 0..g.size() {
            assert_eq!(g.index(&g.parameter(i).unwrap()).unwrap(), i);
        }
        // node 0 is the least significant digit
        assert_eq!(g.parameter(7).unwrap().components, vec![1, 1, 0]);
        assert!(matches!(
            g.parameter(216),
            Err(ParameterError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn adjacency_is_symmetric() {
        let g = graph("x1 : (~x2)(~x3)\nx2 : ~x1\nx3 : ~x2");
        for i in 0..g.size() {
            for j in g.adjacencies(i).unwrap() {
                assert!(g.adjacencies(j).unwrap().contains(&i));
                let (a, b) = (g.parameter(i).unwrap(), g.parameter(j).unwrap());
                let differ = a
                    .components
                    .iter()
                    .zip(&b.components)
                    .filter(|(x, y)| x != y);
                assert_eq!(differ.count(), 1);
            }
        }
    }

    #[test]
    fn locate_unknown_vertex() {
        let g = graph("x1 : ~x3\nx2 : ~x1\nx3 : ~x2");
        let id = OrderParameter::identity(1);
        // L(off) = +1, L(on) = -1 is not monotone
        let bad = vec![
            (id.clone(), LogicParameter(0b01)),
            (id.clone(), LogicParameter(0)),
            (id, LogicParameter(0)),
        ];
        assert!(matches!(
            g.locate(&bad),
            Err(ParameterError::UnknownFactorVertex { .. })
        ));
    }
}
