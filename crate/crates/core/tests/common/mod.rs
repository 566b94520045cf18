//! Networks and concrete parameter sets shared by the integration tests.
#![allow(dead_code)]

use dsgrn::network::RegulatoryNetwork;
use dsgrn::witness::ConcreteParameter;

pub const REPRESSILATOR: &str = include_str!("../../../../networks/repressilator.txt");
pub const BISTABLE: &str = include_str!("../../../../networks/bistable.txt");
pub const P53: &str = include_str!("../../../../networks/p53.txt");

pub fn network(text: &str) -> RegulatoryNetwork {
    RegulatoryNetwork::parse(text).expect("fixture network parses")
}

fn edge(
    net: &RegulatoryNetwork,
    z: &mut ConcreteParameter<f64>,
    source: &str,
    target: &str,
    (high, low, theta): (f64, f64, f64),
) {
    let s = net.index_of(source).unwrap();
    let t = net.index_of(target).unwrap();
    z.set_edge(net, s, t, low, high, theta)
        .expect("edge exists");
}

/// γ = 1, l = 0.5, u = 1.5, θ = 1 on every edge.
pub fn repressilator_hill(net: &RegulatoryNetwork) -> ConcreteParameter<f64> {
    ConcreteParameter::uniform(net, 1.0, 0.5, 1.5, 1.0)
}

/// Sample point of the bistable repressilator's FC region.
pub fn bistable_hill(net: &RegulatoryNetwork) -> ConcreteParameter<f64> {
    let mut z = ConcreteParameter::uniform(net, 1.0, 1.0, 2.0, 1.0);
    edge(net, &mut z, "x2", "x1", (2.0, 1.0, 6.0));
    edge(net, &mut z, "x3", "x1", (3.0, 1.0, 2.0));
    edge(net, &mut z, "x1", "x2", (5.0, 1.0, 4.0));
    edge(net, &mut z, "x2", "x3", (4.0, 1.0, 3.0));
    z
}

/// Hill parameters for the p53 network, each edge given as (u, l, θ).
pub fn p53_hill(net: &RegulatoryNetwork) -> ConcreteParameter<f64> {
    let mut z = ConcreteParameter::uniform(net, 1.0, 1.0, 2.0, 1.0);
    edge(net, &mut z, "ATM", "Chk2", (1.0, 0.5, 0.5));
    edge(net, &mut z, "ATM", "p53", (7.0 / 8.0, 7.0 / 32.0, 0.25));
    edge(net, &mut z, "Chk2", "p53", (7.0 / 8.0, 7.0 / 32.0, 0.75));
    edge(net, &mut z, "Mdm2", "p53", (7.0 / 8.0, 21.0 / 32.0, 1.0));
    edge(net, &mut z, "Wip1", "ATM", (1.0, 0.5, 0.5));
    edge(net, &mut z, "Wip1", "Chk2", (2.0, 0.5, 2.0));
    edge(net, &mut z, "p53", "Mdm2", (2.0, 0.5, 1127.0 / 1024.0));
    edge(net, &mut z, "p53", "Wip1", (1.0, 0.25, 539.0 / 512.0));
    z
}
