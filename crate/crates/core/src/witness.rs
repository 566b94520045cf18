//! Concrete parameters and their relation to combinatorial ones: the
//! assignment `ω`, sampled witnesses, and inequality listings.

use std::ops::{Add, Mul};

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::factor::{LogicParameter, OrderParameter};
use crate::network::{valuation, InputCombination, RegulatoryNetwork};
use crate::parameter::{Parameter, ParameterError, ParameterGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WitnessError {
    #[error("parameter is not regular: {0}")]
    NotRegular(String),
    #[error("parameter shape does not match the network")]
    ShapeMismatch,
    #[error(transparent)]
    Parameter(#[from] ParameterError),
}

/// Numeric parameters of a switching system. `low[j][k]`, `high[j][k]` are
/// the levels node `j` receives from its `k`-th source; `theta[i][t]` is the
/// threshold of variable `i` towards its `t`-th target.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteParameter<T> {
    pub gamma: Vec<T>,
    pub low: Vec<Vec<T>>,
    pub high: Vec<Vec<T>>,
    pub theta: Vec<Vec<T>>,
}

impl<T: Clone> ConcreteParameter<T> {
    /// Same value for every edge; handy for symmetric examples.
    pub fn uniform(network: &RegulatoryNetwork, gamma: T, low: T, high: T, theta: T) -> Self {
        let nodes = network.nodes();
        ConcreteParameter {
            gamma: vec![gamma; nodes.len()],
            low: nodes
                .iter()
                .map(|n| vec![low.clone(); n.n_inputs()])
                .collect(),
            high: nodes
                .iter()
                .map(|n| vec![high.clone(); n.n_inputs()])
                .collect(),
            theta: nodes
                .iter()
                .map(|n| vec![theta.clone(); n.n_outputs()])
                .collect(),
        }
    }

    /// Sets the levels and threshold of the edge `source -> target`. Returns
    /// `None` if there is no such edge.
    pub fn set_edge(
        &mut self,
        network: &RegulatoryNetwork,
        source: usize,
        target: usize,
        low: T,
        high: T,
        theta: T,
    ) -> Option<()> {
        let k = network.node(target).source_position(source)?;
        let t = network.node(source).target_position(target)?;
        self.low[target][k] = low;
        self.high[target][k] = high;
        self.theta[source][t] = theta;
        Some(())
    }

    fn fits(&self, network: &RegulatoryNetwork) -> bool {
        let nodes = network.nodes();
        self.gamma.len() == nodes.len()
            && self.low.len() == nodes.len()
            && self.high.len() == nodes.len()
            && self.theta.len() == nodes.len()
            && nodes.iter().enumerate().all(|(j, n)| {
                self.low[j].len() == n.n_inputs()
                    && self.high[j].len() == n.n_inputs()
                    && self.theta[j].len() == n.n_outputs()
            })
    }
}

impl ConcreteParameter<BigRational> {
    pub fn to_f64(&self) -> ConcreteParameter<f64> {
        use num_traits::ToPrimitive;
        let f = |v: &Vec<BigRational>| v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect();
        ConcreteParameter {
            gamma: f(&self.gamma),
            low: self.low.iter().map(f).collect(),
            high: self.high.iter().map(f).collect(),
            theta: self.theta.iter().map(f).collect(),
        }
    }
}

/// Threshold of variable `source` towards `target`, by node index.
pub fn threshold_of<T: Clone>(
    network: &RegulatoryNetwork,
    z: &ConcreteParameter<T>,
    source: usize,
    target: usize,
) -> Option<T> {
    let t = network.node(source).target_position(target)?;
    Some(z.theta[source][t].clone())
}

/// The combinatorial parameter (order and logic per node) of a regular
/// concrete parameter.
pub fn omega<T>(
    network: &RegulatoryNetwork,
    z: &ConcreteParameter<T>,
) -> Result<Vec<(OrderParameter, LogicParameter)>, WitnessError>
where
    T: Clone + PartialOrd + Zero + Add<Output = T> + Mul<Output = T> + std::fmt::Debug,
{
    if !z.fits(network) {
        return Err(WitnessError::ShapeMismatch);
    }
    let not_regular = |m: String| Err(WitnessError::NotRegular(m));
    let mut out = Vec::with_capacity(network.len());
    for (i, node) in network.nodes().iter().enumerate() {
        if !(z.gamma[i] > T::zero()) {
            return not_regular(format!("γ of {} is not positive", node.name));
        }
        for k in 0..node.n_inputs() {
            if !(z.low[i][k] > T::zero()) || !(z.low[i][k] < z.high[i][k]) {
                return not_regular(format!(
                    "levels of edge into {} are not 0 < l < u",
                    node.name
                ));
            }
        }
        let th = &z.theta[i];
        if th.iter().any(|t| !(*t > T::zero())) {
            return not_regular(format!("threshold of {} is not positive", node.name));
        }
        let mut ranks: Vec<usize> = (0..th.len()).collect();
        ranks.sort_by(|&a, &b| {
            th[a]
                .partial_cmp(&th[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        if ranks.windows(2).any(|w| !(th[w[0]] < th[w[1]])) {
            return not_regular(format!("thresholds of {} tie", node.name));
        }
        let order = OrderParameter(ranks);
        let mut tie = false;
        let logic = LogicParameter::from_signs(node.n_inputs(), &order, |a, t| {
            let values = valuation(a, &z.low[i], &z.high[i]).expect("shapes checked");
            let m = node.logic.eval(&values);
            let scaled = z.gamma[i].clone() * th[t].clone();
            if !(m < scaled) && !(m > scaled) {
                tie = true;
            }
            m > scaled
        });
        if tie {
            return not_regular(format!(
                "a production value of {} equals a scaled threshold",
                node.name
            ));
        }
        out.push((order, logic));
    }
    Ok(out)
}

/// `ω` followed by lookup in the parameter graph.
pub fn omega_parameter<T>(
    graph: &ParameterGraph,
    z: &ConcreteParameter<T>,
) -> Result<Parameter, WitnessError>
where
    T: Clone + PartialOrd + Zero + Add<Output = T> + Mul<Output = T> + std::fmt::Debug,
{
    Ok(graph.locate(&omega(graph.network(), z)?)?)
}

/// Rational witness assembled from the factor-graph witnesses, with `γ = 1`.
pub fn sample_parameter(
    graph: &ParameterGraph,
    parameter: &Parameter,
) -> ConcreteParameter<BigRational> {
    let network = graph.network();
    let mut z = ConcreteParameter {
        gamma: vec![BigRational::one(); network.len()],
        low: Vec::new(),
        high: Vec::new(),
        theta: Vec::new(),
    };
    for j in 0..network.len() {
        let v = graph.vertex(j, parameter.components[j]);
        let w = v
            .witness
            .as_ref()
            .expect("factor-graph vertices carry witnesses");
        z.low.push(w.low.clone());
        z.high.push(w.high.clone());
        let rank = v.order.rank_of();
        z.theta
            .push(rank.iter().map(|&r| w.thresholds[r].clone()).collect());
    }
    debug_assert_eq!(omega_parameter(graph, &z).ok().as_ref(), Some(parameter));
    z
}

/// A symbolic quantity in an inequality chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    /// `M_node(v(A))`.
    Production {
        node: usize,
        combination: InputCombination,
    },
    /// `γ_node θ_{target,node}`.
    Threshold { node: usize, target: usize },
}

/// Strictly increasing groups; order within a group is undetermined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub node: usize,
    pub groups: Vec<Vec<Term>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Notation {
    /// `l_{2,1} < γ_2θ_{3,2}`
    Text,
    /// `L[2,1] < G[2]*T[3,2]`
    Machine,
}

/// One chain per node describing the parameter's region.
pub fn inequalities(graph: &ParameterGraph, parameter: &Parameter) -> Vec<Chain> {
    let network = graph.network();
    (0..network.len())
        .map(|i| {
            let node = network.node(i);
            let v = graph.vertex(i, parameter.components[i]);
            let m = node.n_outputs();
            let mut groups: Vec<Vec<Term>> = Vec::new();
            for band in 0..=m {
                let members: Vec<InputCombination> = InputCombination::all(node.n_inputs())
                    .filter(|&a| v.band.band(a) == band)
                    .collect();
                groups.extend(layer(&members).into_iter().map(|g| {
                    g.into_iter()
                        .map(|a| Term::Production {
                            node: i,
                            combination: a,
                        })
                        .collect()
                }));
                if band < m {
                    let target = node.targets[v.order.0[band]];
                    groups.push(vec![Term::Threshold { node: i, target }]);
                }
            }
            Chain { node: i, groups }
        })
        .collect()
}

/// Splits a band into groups that are strictly ordered: longest-path levels
/// in the componentwise order, merging neighbours that are not fully
/// comparable.
fn layer(members: &[InputCombination]) -> Vec<Vec<InputCombination>> {
    let below = |a: InputCombination, b: InputCombination| a != b && a.precedes(b);
    let mut level = vec![0usize; members.len()];
    // members are in increasing integer order, a linear extension
    for x in 0..members.len() {
        for y in 0..x {
            if below(members[y], members[x]) {
                level[x] = level[x].max(level[y] + 1);
            }
        }
    }
    let depth = level.iter().copied().max().map_or(0, |d| d + 1);
    let mut groups: Vec<Vec<InputCombination>> = Vec::new();
    for d in 0..depth {
        let next: Vec<InputCombination> = members
            .iter()
            .zip(&level)
            .filter(|(_, &l)| l == d)
            .map(|(&a, _)| a)
            .collect();
        match groups.last_mut() {
            Some(last) if !last.iter().all(|&a| next.iter().all(|&b| below(a, b))) => {
                last.extend(next)
            }
            _ => groups.push(next),
        }
    }
    groups
}

fn render_term(network: &RegulatoryNetwork, term: &Term, notation: Notation) -> String {
    match term {
        Term::Threshold { node, target } => match notation {
            Notation::Text => format!("γ_{}θ_{{{},{}}}", node + 1, target + 1, node + 1),
            Notation::Machine => format!("G[{}]*T[{},{}]", node + 1, target + 1, node + 1),
        },
        Term::Production { node, combination } => {
            let record = network.node(*node);
            let factors = record.logic.factors();
            let level = |k: usize| {
                let on = combination.is_on(k);
                let source = record.sources[k].node + 1;
                match (notation, on) {
                    (Notation::Text, false) => format!("l_{{{},{}}}", node + 1, source),
                    (Notation::Text, true) => format!("u_{{{},{}}}", node + 1, source),
                    (Notation::Machine, false) => format!("L[{},{}]", node + 1, source),
                    (Notation::Machine, true) => format!("U[{},{}]", node + 1, source),
                }
            };
            let (plus, times) = match notation {
                Notation::Text => (" + ", ""),
                Notation::Machine => ("+", "*"),
            };
            let parts: Vec<String> = factors
                .iter()
                .map(|f| {
                    let sum = f.iter().map(|&k| level(k)).collect::<Vec<_>>().join(plus);
                    if f.len() > 1 && factors.len() > 1 {
                        format!("({sum})")
                    } else {
                        sum
                    }
                })
                .collect();
            parts.join(times)
        }
    }
}

pub fn render_chain(network: &RegulatoryNetwork, chain: &Chain, notation: Notation) -> String {
    chain
        .groups
        .iter()
        .map(|g| {
            let mut terms: Vec<String> = g
                .iter()
                .map(|t| render_term(network, t, notation))
                .collect();
            terms.sort();
            if terms.len() == 1 {
                terms.pop().unwrap()
            } else {
                format!("{{{}}}", terms.join(", "))
            }
        })
        .collect::<Vec<_>>()
        .join(" < ")
}

fn evaluate<T>(network: &RegulatoryNetwork, z: &ConcreteParameter<T>, term: &Term) -> T
where
    T: Clone + Add<Output = T> + Mul<Output = T>,
{
    match term {
        Term::Threshold { node, target } => {
            let t = network
                .node(*node)
                .target_position(*target)
                .expect("target of node");
            z.gamma[*node].clone() * z.theta[*node][t].clone()
        }
        Term::Production { node, combination } => {
            let values = valuation(*combination, &z.low[*node], &z.high[*node]).expect("shapes");
            network.node(*node).logic.eval(&values)
        }
    }
}

/// True if every element of each group is below every element of the next.
pub fn satisfies<T>(network: &RegulatoryNetwork, chains: &[Chain], z: &ConcreteParameter<T>) -> bool
where
    T: Clone + PartialOrd + Add<Output = T> + Mul<Output = T>,
{
    chains.iter().all(|chain| {
        chain.groups.windows(2).all(|w| {
            w[0].iter().all(|a| {
                let va = evaluate(network, z, a);
                w[1].iter().all(|b| va < evaluate(network, z, b))
            })
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::FactorLibrary;
    use num_bigint::BigInt;

    fn pg(text: &str) -> ParameterGraph {
        ParameterGraph::new(
            RegulatoryNetwork::parse(text).unwrap(),
            &FactorLibrary::in_memory(),
        )
        .unwrap()
    }

    fn q(p: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(d))
    }

    #[test]
    fn self_activator_regions() {
        let g = pg("x : x");
        let z = ConcreteParameter::uniform(g.network(), 1.0, 1.0, 3.0, 2.0);
        let p = omega_parameter(&g, &z).unwrap();
        // (-,+): L(off) = -1, L(on) = +1
        assert_eq!(g.vertex(0, p.components[0]).band.0, vec![0, 1]);
        let tie = ConcreteParameter::uniform(g.network(), 1.0, 1.0, 2.0, 2.0);
        assert!(matches!(
            omega(g.network(), &tie),
            Err(WitnessError::NotRegular(_))
        ));
        let lowest = Parameter {
            components: vec![0],
        };
        let text: Vec<String> = inequalities(&g, &lowest)
            .iter()
            .map(|c| render_chain(g.network(), c, Notation::Text))
            .collect();
        assert_eq!(text, vec!["l_{1,1} < u_{1,1} < γ_1θ_{1,1}"]);
    }

    #[test]
    fn gamma_scaling_invariance() {
        let g = pg("x1 : (~x2)(~x3)\nx2 : ~x1\nx3 : ~x2");
        for i in 0..g.size() {
            let p = g.parameter(i).unwrap();
            let mut z = sample_parameter(&g, &p);
            for (j, gamma) in z.gamma.iter_mut().enumerate() {
                let c = q(j as i64 + 2, 3);
                for t in z.theta[j].iter_mut() {
                    *t = &*t / &c;
                }
                *gamma = c;
            }
            assert_eq!(omega_parameter(&g, &z).unwrap(), p);
        }
    }

    #[test]
    fn sample_round_trip_and_inequalities() {
        let g = pg("x1 : (~x2)(~x3)\nx2 : ~x1\nx3 : ~x2");
        for i in 0..g.size() {
            let p = g.parameter(i).unwrap();
            let z = sample_parameter(&g, &p);
            assert_eq!(omega_parameter(&g, &z).unwrap(), p);
            assert!(satisfies(g.network(), &inequalities(&g, &p), &z));
        }
    }

    #[test]
    fn layering_merges_incomparable() {
        let a = |x| InputCombination(x);
        assert_eq!(
            layer(&[a(0), a(1), a(2)]),
            vec![vec![a(0)], vec![a(1), a(2)]]
        );
        // 1 < 3 but 2 is incomparable to 1 and below 3
        assert_eq!(
            layer(&[a(1), a(2), a(3)]),
            vec![vec![a(1), a(2)], vec![a(3)]]
        );
        assert_eq!(
            layer(&[a(0), a(1), a(4)]),
            vec![vec![a(0)], vec![a(1), a(4)]]
        );
        // 3 is above 1 but not above 6, so all three share a group
        assert_eq!(layer(&[a(1), a(3), a(6)]), vec![vec![a(1), a(6), a(3)]]);
    }
}
