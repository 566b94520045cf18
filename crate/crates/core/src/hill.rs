//! Smooth counterpart of the switching system: every step function is
//! replaced by a Hill function, integrated with fixed-step RK4.

use thiserror::Error;

use crate::morse::Annotation;
use crate::network::{RegulatoryNetwork, Sign};
use crate::parameter::{Parameter, ParameterGraph};
use crate::phase::{CellGrid, Labeling};
use crate::witness::{omega_parameter, ConcreteParameter, WitnessError};

pub const DEFAULT_STEP: f64 = 1e-2;
pub const DEFAULT_HORIZON: f64 = 500.0;
/// Fraction of the trajectory discarded before looking for oscillations.
pub const TRANSIENT_FRACTION: f64 = 0.5;
/// Threshold crossings each variable needs after the transient.
pub const MIN_CROSSINGS: usize = 4;
/// Last-quarter amplitude must retain this fraction of the post-transient
/// amplitude.
pub const AMPLITUDE_RETENTION: f64 = 0.5;
/// Post-transient amplitudes below this (relative to the variable's mean
/// level) count as converged.
pub const MIN_RELATIVE_AMPLITUDE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HillError {
    #[error("state became non-finite at t = {time}")]
    NonFiniteState { time: f64 },
    #[error("invalid Hill system: {0}")]
    Invalid(String),
}

/// `l + (u - l) x^n / (θ^n + x^n)`.
pub fn hill_activating(x: f64, low: f64, high: f64, theta: f64, n: f64) -> f64 {
    low + (high - low) * switch_fraction(x, theta, n)
}

/// `l + (u - l) θ^n / (θ^n + x^n)`.
pub fn hill_repressing(x: f64, low: f64, high: f64, theta: f64, n: f64) -> f64 {
    low + (high - low) * (1.0 - switch_fraction(x, theta, n))
}

fn switch_fraction(x: f64, theta: f64, n: f64) -> f64 {
    let r = (x.max(0.0) / theta).powf(n);
    if r.is_infinite() {
        1.0
    } else {
        r / (1.0 + r)
    }
}

#[derive(Debug, Clone)]
struct Input {
    source: usize,
    low: f64,
    high: f64,
    theta: f64,
    exponent: f64,
    repressing: bool,
}

#[derive(Debug, Clone)]
pub struct HillSystem {
    network: RegulatoryNetwork,
    gamma: Vec<f64>,
    inputs: Vec<Vec<Input>>,
}

impl HillSystem {
    /// `exponents[j][k]` is the Hill exponent of node `j`'s `k`-th input.
    pub fn new(
        network: &RegulatoryNetwork,
        z: &ConcreteParameter<f64>,
        exponents: &[Vec<f64>],
    ) -> Result<Self, HillError> {
        let mut inputs = Vec::with_capacity(network.len());
        for (j, node) in network.nodes().iter().enumerate() {
            let mut list = Vec::new();
            for (k, s) in node.sources.iter().enumerate() {
                let t = network
                    .node(s.node)
                    .target_position(j)
                    .expect("edge listed at source");
                let input = Input {
                    source: s.node,
                    low: z.low[j][k],
                    high: z.high[j][k],
                    theta: z.theta[s.node][t],
                    exponent: exponents[j][k],
                    repressing: s.sign == Sign::Repression,
                };
                if !(input.exponent >= 1.0) || !(0.0 < input.low && input.low < input.high) {
                    return Err(HillError::Invalid(format!("input {k} of {}", node.name)));
                }
                if !(input.theta > 0.0) {
                    return Err(HillError::Invalid(format!("threshold into {}", node.name)));
                }
                list.push(input);
            }
            inputs.push(list);
        }
        Ok(HillSystem {
            network: network.clone(),
            gamma: z.gamma.clone(),
            inputs,
        })
    }

    /// Same exponent on every edge.
    pub fn uniform(
        network: &RegulatoryNetwork,
        z: &ConcreteParameter<f64>,
        exponent: f64,
    ) -> Result<Self, HillError> {
        let exponents: Vec<Vec<f64>> = network
            .nodes()
            .iter()
            .map(|n| vec![exponent; n.n_inputs()])
            .collect();
        HillSystem::new(network, z, &exponents)
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn rhs(&self, x: &[f64], out: &mut [f64]) {
        let mut values = Vec::new();
        for (j, inputs) in self.inputs.iter().enumerate() {
            values.clear();
            values.extend(inputs.iter().map(|i| {
                let xs = x[i.source];
                if i.repressing {
                    hill_repressing(xs, i.low, i.high, i.theta, i.exponent)
                } else {
                    hill_activating(xs, i.low, i.high, i.theta, i.exponent)
                }
            }));
            out[j] = -self.gamma[j] * x[j] + self.network.node(j).logic.eval(&values);
        }
    }

    pub fn integrate(&self, x0: &[f64], horizon: f64, step: f64) -> Result<Trajectory, HillError> {
        integrate(|x, out| self.rhs(x, out), x0, horizon, step)
    }
}

/// States sampled every `step`, starting at `t = 0`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub step: f64,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn last(&self) -> &[f64] {
        self.states
            .last()
            .expect("trajectory has the initial state")
    }

    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::from("t");
        for n in names {
            out.push_str(&format!(",x_{n}"));
        }
        out.push('\n');
        for (k, s) in self.states.iter().enumerate() {
            out.push_str(&format!("{:.6}", self.time(k)));
            for v in s {
                out.push_str(&format!(",{v:.9}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Classical fixed-step fourth-order Runge-Kutta.
pub fn integrate(
    f: impl Fn(&[f64], &mut [f64]),
    x0: &[f64],
    horizon: f64,
    step: f64,
) -> Result<Trajectory, HillError> {
    if !(step > 0.0) || !(horizon > 0.0) {
        return Err(HillError::Invalid(
            "step and horizon must be positive".into(),
        ));
    }
    let n = x0.len();
    let steps = (horizon / step).round() as usize;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut x = x0.to_vec();
    for s in 0..steps {
        f(&x, &mut k1);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * step * k1[i];
        }
        f(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = x[i] + 0.5 * step * k2[i];
        }
        f(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = x[i] + step * k3[i];
        }
        f(&tmp, &mut k4);
        for i in 0..n {
            x[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(HillError::NonFiniteState {
                time: (s + 1) as f64 * step,
            });
        }
        states.push(x.clone());
    }
    Ok(Trajectory { step, states })
}

fn crossings(series: impl Iterator<Item = f64>, threshold: f64) -> usize {
    let mut count = 0;
    let mut side: Option<bool> = None;
    for v in series {
        if v == threshold {
            continue;
        }
        let above = v > threshold;
        if side.is_some_and(|s| s != above) {
            count += 1;
        }
        side = Some(above);
    }
    count
}

fn amplitude(series: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0.0f64);
    for v in series {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
        n += 1.0;
    }
    (hi - lo, sum / n.max(1.0))
}

/// True if, after discarding the transient, every variable crosses one of
/// its thresholds at least `MIN_CROSSINGS` times and the oscillation does
/// not decay: the last quarter keeps `AMPLITUDE_RETENTION` of the
/// post-transient amplitude.
pub fn detect_oscillation(
    trajectory: &Trajectory,
    thresholds: &[Vec<f64>],
    transient: f64,
) -> bool {
    let len = trajectory.states.len();
    let start = ((len as f64) * transient) as usize;
    let quarter = len - len / 4;
    if start + 2 >= len {
        return false;
    }
    (0..thresholds.len()).all(|i| {
        let series = |from: usize| trajectory.states[from..].iter().map(move |s| s[i]);
        let crossed = thresholds[i]
            .iter()
            .map(|&t| crossings(series(start), t))
            .max()
            .unwrap_or(0);
        let (post, mean) = amplitude(series(start));
        let (last, _) = amplitude(series(quarter.max(start)));
        crossed >= MIN_CROSSINGS
            && post > MIN_RELATIVE_AMPLITUDE * mean.abs().max(1.0)
            && last >= AMPLITUDE_RETENTION * post
    })
}

/// Times of the maxima of `variable` over each complete excursion above
/// `threshold` after the transient.
pub fn peak_times(
    trajectory: &Trajectory,
    variable: usize,
    threshold: f64,
    transient: f64,
) -> Vec<f64> {
    let start = ((trajectory.states.len() as f64) * transient) as usize;
    let mut peaks = Vec::new();
    let mut current: Option<(usize, f64)> = None;
    let mut was_above = trajectory.states[start][variable] > threshold;
    for k in start + 1..trajectory.states.len() {
        let v = trajectory.states[k][variable];
        let above = v > threshold;
        if above && !was_above {
            current = Some((k, v));
        } else if above {
            if let Some((_, best)) = current {
                if v > best {
                    current = Some((k, v));
                }
            }
        } else if was_above {
            if let Some((k_max, _)) = current.take() {
                peaks.push(trajectory.time(k_max));
            }
        }
        was_above = above;
    }
    peaks
}

/// Longest run of consecutive cycles in which a peak of `leader` is
/// followed by a peak of `follower` within half a period.
pub fn lead_cycles(leader: &[f64], follower: &[f64]) -> usize {
    if leader.len() < 2 {
        return 0;
    }
    let period = (leader[leader.len() - 1] - leader[0]) / (leader.len() - 1) as f64;
    let mut best = 0;
    let mut run = 0;
    for &t in leader {
        let lag = follower.iter().find(|&&s| s > t).map(|&s| s - t);
        if lag.is_some_and(|d| d > 0.0 && d < period / 2.0) {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best
}

/// Representative point of a cell: midway between the thresholds bounding
/// it in each dimension (half the lowest threshold below the first, 1.5
/// times the highest above the last).
pub fn cell_center(grid: &CellGrid, z: &ConcreteParameter<f64>, cell: usize) -> Vec<f64> {
    (0..grid.dim())
        .map(|i| {
            let mut th = z.theta[i].clone();
            th.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let c = grid.coordinate(cell, i);
            match (c, th.len()) {
                (0, _) => th[0] / 2.0,
                (c, m) if c == m => th[m - 1] * 1.5,
                (c, _) => (th[c - 1] + th[c]) / 2.0,
            }
        })
        .collect()
}

/// Default initial condition: the centre of a non-attracting cell, taken
/// from a minimal FC Morse set when there is one, raised by 1%.
pub fn default_initial_state(
    graph: &ParameterGraph,
    parameter: &Parameter,
    z: &ConcreteParameter<f64>,
) -> Vec<f64> {
    let labeling = Labeling::new(graph, parameter);
    let grid = labeling.grid();
    let mg = crate::database::parameter_morse_graph(graph, parameter);
    let shape = mg.shape();
    let from_fc = shape
        .minimal()
        .into_iter()
        .filter(|&v| shape.annotations[v] == Annotation::Fc)
        .flat_map(|v| mg.nodes[v].cells.clone())
        .find(|&c| !labeling.is_attracting(c));
    let cell = from_fc
        .or_else(|| (0..grid.n_cells()).find(|&c| !labeling.is_attracting(c)))
        .unwrap_or(0);
    cell_center(grid, z, cell)
        .into_iter()
        .map(|v| v * 1.01)
        .collect()
}

/// Default initial condition for an arbitrary concrete parameter. When the
/// parameter sits on a boundary between regions, thresholds are nudged by a
/// relative 1e-9 (deterministically) to pick the region used for the cell
/// choice; the returned point itself uses the original thresholds.
pub fn initial_state_for(
    graph: &ParameterGraph,
    z: &ConcreteParameter<f64>,
) -> Result<Vec<f64>, HillError> {
    let parameter = match omega_parameter(graph, z) {
        Ok(p) => p,
        Err(WitnessError::NotRegular(_)) => {
            let mut nudged = z.clone();
            let mut k = 0.0;
            for row in &mut nudged.theta {
                for t in row.iter_mut() {
                    k += 1.0;
                    *t *= 1.0 + 1e-9 * k;
                }
            }
            omega_parameter(graph, &nudged).map_err(|e| HillError::Invalid(e.to_string()))?
        }
        Err(e) => return Err(HillError::Invalid(e.to_string())),
    };
    Ok(default_initial_state(graph, &parameter, z))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hill_values() {
        assert!((hill_activating(1.0, 0.5, 1.5, 1.0, 9.0) - 1.0).abs() < 1e-15);
        assert!((hill_repressing(1.0, 0.5, 1.5, 1.0, 9.0) - 1.0).abs() < 1e-15);
        // at x = 2θ the repressing form is within 2^-n (u - l) of l
        for n in [4.0, 8.0, 16.0] {
            let gap = hill_repressing(2.0, 0.5, 1.5, 1.0, n) - 0.5;
            assert!(gap > 0.0 && gap <= 2f64.powf(-n));
        }
        assert_eq!(hill_activating(f64::MAX, 1.0, 2.0, 1.0, 8.0), 2.0);
    }

    #[test]
    fn convergence_to_step_function() {
        // gap to the step value shrinks (roughly halves per unit of n at x = 2θ)
        let gaps: Vec<f64> = [4.0, 8.0, 16.0]
            .iter()
            .map(|&n| 2.0 - hill_activating(2.0, 1.0, 2.0, 1.0, n))
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2]);
        assert!(gaps[1] / gaps[0] < 0.5f64.powi(4) * 1.1);
    }

    #[test]
    fn decay_matches_exponential() {
        let t = integrate(|x, out| out[0] = -x[0], &[1.0], 1.0, 1e-3).unwrap();
        assert!((t.last()[0] - (-1f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn blow_up_is_reported() {
        let r = integrate(|x, out| out[0] = x[0] * x[0], &[1.0], 10.0, 1e-2);
        assert!(matches!(r, Err(HillError::NonFiniteState { .. })));
    }

    #[test]
    fn constant_is_not_oscillating() {
        let t = Trajectory {
            step: 1.0,
            states: vec![vec![1.0]; 100],
        };
        assert!(!detect_oscillation(&t, &[vec![1.0]], 0.5));
    }

    #[test]
    fn sine_is_oscillating() {
        let states = (0..10_000)
            .map(|k| vec![2.0 + (k as f64 * 0.01).sin()])
            .collect();
        let t = Trajectory { step: 0.01, states };
        assert!(detect_oscillation(&t, &[vec![2.0]], 0.5));
        let damped = (0..10_000)
            .map(|k| vec![2.0 + (-(k as f64) * 0.002).exp() * (k as f64 * 0.01).sin()])
            .collect();
        assert!(!detect_oscillation(
            &Trajectory {
                step: 0.01,
                states: damped
            },
            &[vec![2.0]],
            0.5
        ));
    }

    #[test]
    fn leading_peaks() {
        let states = (0..20_000)
            .map(|k| {
                let t = k as f64 * 0.01;
                vec![t.sin(), (t - 0.5).sin()]
            })
            .collect();
        let t = Trajectory { step: 0.01, states };
        let a = peak_times(&t, 0, 0.0, 0.0);
        let b = peak_times(&t, 1, 0.0, 0.0);
        assert!(lead_cycles(&a, &b) >= 3);
        assert_eq!(lead_cycles(&b, &a), 0);
    }
}
