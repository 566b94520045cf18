//! Deciding whether a band function is realized by concrete parameters.
//!
//! A band function is realizable when there are `0 < l_k < u_k` for every
//! input and increasing thresholds such that exactly `b(A)` thresholds lie
//! below `M(v(A))` for every input combination. Thresholds can always be
//! slotted into the gaps, so the question is whether the values of `M`
//! separate consecutive nonempty bands.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{BandFunction, NodeSignature};
use crate::lp::{self, rational, LinearProgram, LpOutcome, Relation};
use crate::network::{valuation, InputCombination, ProductOfSums};

/// Concrete parameters realizing a band function. `thresholds` are listed
/// by rank; `low`/`high` by input position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorWitness {
    pub low: Vec<BigRational>,
    pub high: Vec<BigRational>,
    pub thresholds: Vec<BigRational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Realizability {
    Yes(FactorWitness),
    No,
    Undecided,
}

impl Realizability {
    pub fn is_yes(&self) -> bool {
        matches!(self, Realizability::Yes(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Sum,
    Product,
    Mixed,
}

impl Backend {
    pub fn for_logic(logic: &ProductOfSums) -> Backend {
        if logic.is_sum() {
            Backend::Sum
        } else if logic.is_product() {
            Backend::Product
        } else {
            Backend::Mixed
        }
    }
}

/// Limits for the randomized search used on mixed logics.
#[derive(Debug, Clone)]
pub struct SearchBudget {
    pub starts: usize,
    pub iterations: usize,
    pub seed: u64,
    pub grid_max_denominator: u64,
    pub grid_max_ratio: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            starts: 200,
            iterations: 500,
            seed: 0x5eed,
            grid_max_denominator: 16,
            grid_max_ratio: 64,
        }
    }
}

pub fn realizable(
    signature: &NodeSignature,
    band: &BandFunction,
    budget: &SearchBudget,
) -> Realizability {
    match Backend::for_logic(&signature.logic) {
        Backend::Sum => sum_backend(signature, band),
        Backend::Product => product_backend(signature, band),
        Backend::Mixed => {
            if relaxation_infeasible(signature, band) {
                return Realizability::No;
            }
            if let Some(w) = ratio_grid(signature, band, budget) {
                return Realizability::Yes(w);
            }
            match mixed_search(signature, band, budget) {
                Some(w) => Realizability::Yes(w),
                None => Realizability::Undecided,
            }
        }
    }
}

/// Pairs `(A, A')` with `A` in a nonempty band and `A'` in the next
/// nonempty band above it; `M(A) < M(A')` is required for each.
fn band_pairs(band: &BandFunction) -> Vec<(usize, usize)> {
    let mut levels: Vec<u8> = band.0.clone();
    levels.sort_unstable();
    levels.dedup();
    let mut pairs = Vec::new();
    for w in levels.windows(2) {
        for (a, &ba) in band.0.iter().enumerate() {
            if ba != w[0] {
                continue;
            }
            for (b, &bb) in band.0.iter().enumerate() {
                if bb == w[1] {
                    pairs.push((a, b));
                }
            }
        }
    }
    pairs
}

fn production<T>(logic: &ProductOfSums, combination: usize, low: &[T], high: &[T]) -> T
where
    T: Clone + std::ops::Add<Output = T> + std::ops::Mul<Output = T>,
{
    let values = valuation(InputCombination(combination as u32), low, high)
        .expect("low and high have equal length");
    logic.eval(&values)
}

/// Places thresholds in the gaps between band values. Returns `None` if the
/// values do not separate the bands or the input levels are not valid.
pub(crate) fn witness_from_levels(
    signature: &NodeSignature,
    band: &BandFunction,
    low: Vec<BigRational>,
    high: Vec<BigRational>,
) -> Option<FactorWitness> {
    if low
        .iter()
        .zip(&high)
        .any(|(l, u)| !l.is_positive() || l >= u)
    {
        return None;
    }
    let m = signature.n_outputs;
    let values: Vec<BigRational> = (0..band.0.len())
        .map(|a| production(&signature.logic, a, &low, &high))
        .collect();
    let mut lo: Vec<Option<BigRational>> = vec![None; m + 1];
    let mut hi: Vec<Option<BigRational>> = vec![None; m + 1];
    for (v, &b) in values.iter().zip(&band.0) {
        let b = b as usize;
        if lo[b].as_ref().is_none_or(|x| v < x) {
            lo[b] = Some(v.clone());
        }
        if hi[b].as_ref().is_none_or(|x| v > x) {
            hi[b] = Some(v.clone());
        }
    }
    let nonempty: Vec<usize> = (0..=m).filter(|&b| lo[b].is_some()).collect();
    let mut thresholds = Vec::with_capacity(m);
    let first = nonempty[0];
    let bottom = lo[first].clone().unwrap();
    for t in 0..first {
        thresholds.push(&bottom * rational(t as i64 + 1) / rational(first as i64 + 1));
    }
    for w in nonempty.windows(2) {
        let (below, above) = (hi[w[0]].clone().unwrap(), lo[w[1]].clone().unwrap());
        if below >= above {
            return None;
        }
        let count = (w[1] - w[0]) as i64;
        for t in 0..count {
            thresholds.push(&below + (&above - &below) * rational(t + 1) / rational(count + 1));
        }
    }
    let last = *nonempty.last().unwrap();
    let top = hi[last].clone().unwrap();
    for t in 0..m - last {
        thresholds.push(&top + rational(t as i64 + 1));
    }
    Some(FactorWitness {
        low,
        high,
        thresholds,
    })
}

/// The band function a witness induces, or `None` if the witness is not
/// regular (a threshold equals a value, or levels/thresholds are
/// misordered).
pub fn band_of_witness(signature: &NodeSignature, witness: &FactorWitness) -> Option<BandFunction> {
    let n = signature.n_inputs;
    if witness.low.len() != n || witness.high.len() != n {
        return None;
    }
    if witness.thresholds.len() != signature.n_outputs {
        return None;
    }
    if witness
        .low
        .iter()
        .zip(&witness.high)
        .any(|(l, u)| !l.is_positive() || l >= u)
    {
        return None;
    }
    if witness.thresholds.iter().any(|t| !t.is_positive())
        || witness.thresholds.windows(2).any(|w| w[0] >= w[1])
    {
        return None;
    }
    let mut bands = Vec::with_capacity(1 << n);
    for a in 0..1usize << n {
        let v = production(&signature.logic, a, &witness.low, &witness.high);
        if witness.thresholds.contains(&v) {
            return None;
        }
        bands.push(witness.thresholds.iter().filter(|t| **t < v).count() as u8);
    }
    Some(BandFunction(bands))
}

fn finish(
    signature: &NodeSignature,
    band: &BandFunction,
    w: Option<FactorWitness>,
) -> Realizability {
    match w {
        Some(w) => {
            debug_assert_eq!(band_of_witness(signature, &w).as_ref(), Some(band));
            Realizability::Yes(w)
        }
        None => Realizability::No,
    }
}

/// Adds `l_k >= 1` and `u_k - l_k >= 1` for the variables `[l_k, u_k]` at
/// `offset + 2k`.
fn level_constraints<T: lp::LpScalar>(lp: &mut LinearProgram<T>, offset: usize, count: usize) {
    for k in 0..count {
        let mut c = vec![T::zero(); lp.n_vars];
        c[offset + 2 * k] = T::one();
        lp.add(c, Relation::Ge, T::one());
        let mut c = vec![T::zero(); lp.n_vars];
        c[offset + 2 * k] = T::one().neg();
        c[offset + 2 * k + 1] = T::one();
        lp.add(c, Relation::Ge, T::one());
    }
}

/// Exact decision for a single sum factor: linear in the levels.
pub fn sum_backend(signature: &NodeSignature, band: &BandFunction) -> Realizability {
    let n = signature.n_inputs;
    let mut lp = LinearProgram::<BigRational>::new(2 * n);
    level_constraints(&mut lp, 0, n);
    for (a, b) in band_pairs(band) {
        let mut c = vec![BigRational::zero(); 2 * n];
        for k in 0..n {
            let on = |x: usize| x >> k & 1;
            c[2 * k + on(b)] += BigRational::one();
            c[2 * k + on(a)] -= BigRational::one();
        }
        lp.add(c, Relation::Ge, rational(2));
    }
    lp.minimize(vec![BigRational::one(); 2 * n]);
    let w = match lp.solve() {
        LpOutcome::Optimal { x, .. } => {
            let low = (0..n).map(|k| x[2 * k].clone()).collect();
            let high = (0..n).map(|k| x[2 * k + 1].clone()).collect();
            witness_from_levels(signature, band, low, high)
        }
        _ => None,
    };
    finish(signature, band, w)
}

/// Exact decision for a product of singletons: linear in `log u_k` once each
/// `l_k` is fixed to 1.
pub fn product_backend(signature: &NodeSignature, band: &BandFunction) -> Realizability {
    let n = signature.n_inputs;
    let mut lp = LinearProgram::<BigRational>::new(n);
    for k in 0..n {
        let mut c = vec![BigRational::zero(); n];
        c[k] = BigRational::one();
        lp.add(c, Relation::Ge, BigRational::one());
    }
    for (a, b) in band_pairs(band) {
        let c = (0..n)
            .map(|k| rational((b >> k & 1) as i64 - (a >> k & 1) as i64))
            .collect();
        lp.add(c, Relation::Ge, BigRational::one());
    }
    lp.minimize(vec![BigRational::one(); n]);
    let w = match lp.solve() {
        LpOutcome::Optimal { x, .. } => {
            let scale = x.iter().fold(BigInt::one(), |acc, y| acc.lcm(y.denom()));
            let two = BigInt::from(2);
            let high = x
                .iter()
                .map(|y| {
                    let e = (y * BigRational::from_integer(scale.clone())).to_integer();
                    BigRational::from_integer(num_traits::pow(two.clone(), e.to_usize().unwrap()))
                })
                .collect();
            witness_from_levels(signature, band, vec![BigRational::one(); n], high)
        }
        _ => None,
    };
    finish(signature, band, w)
}

/// Necessary condition: for each factor, the pairs whose input combinations
/// agree outside that factor impose `S_F(A) < S_F(A')`, a linear system in
/// the factor's levels. Returns true when some such system is infeasible,
/// which proves the band function unrealizable.
pub fn relaxation_infeasible(signature: &NodeSignature, band: &BandFunction) -> bool {
    let pairs = band_pairs(band);
    for factor in signature.logic.factors() {
        let mask: usize = factor.iter().map(|&k| 1 << k).sum();
        let f = factor.len();
        let mut lp = LinearProgram::<BigRational>::new(2 * f);
        level_constraints(&mut lp, 0, f);
        let mut any = false;
        for &(a, b) in &pairs {
            if a & !mask != b & !mask {
                continue;
            }
            any = true;
            let mut c = vec![BigRational::zero(); 2 * f];
            for (i, &k) in factor.iter().enumerate() {
                c[2 * i + (b >> k & 1)] += BigRational::one();
                c[2 * i + (a >> k & 1)] -= BigRational::one();
            }
            lp.add(c, Relation::Ge, BigRational::one());
        }
        if any && matches!(lp.solve(), LpOutcome::Infeasible) {
            return true;
        }
    }
    false
}

/// For a logic with exactly one singleton factor and one sum factor, the
/// problem becomes linear once the singleton's ratio `u/l` is fixed. Tries
/// small-denominator ratios in order, screening in floating point.
fn ratio_grid(
    signature: &NodeSignature,
    band: &BandFunction,
    budget: &SearchBudget,
) -> Option<FactorWitness> {
    let factors = signature.logic.factors();
    if factors.len() != 2 {
        return None;
    }
    let (single, sum) = match (factors[0].len(), factors[1].len()) {
        (1, s) if s > 1 => (factors[0][0], &factors[1]),
        (s, 1) if s > 1 => (factors[1][0], &factors[0]),
        _ => return None,
    };
    let pairs = band_pairs(band);
    for q in 1..=budget.grid_max_denominator {
        for p in q + 1..=budget.grid_max_ratio * q {
            if p.gcd(&q) != 1 {
                continue;
            }
            let screen = sum_lp_given_ratio::<f64>(sum, single, &pairs, p as f64 / q as f64);
            if !matches!(screen.solve(), LpOutcome::Optimal { .. }) {
                continue;
            }
            let r = BigRational::new(BigInt::from(p), BigInt::from(q));
            let exact = sum_lp_given_ratio::<BigRational>(sum, single, &pairs, r.clone());
            if let LpOutcome::Optimal { x, .. } = exact.solve() {
                let n = signature.n_inputs;
                let mut low = vec![BigRational::one(); n];
                let mut high = vec![r.clone(); n];
                for (i, &k) in sum.iter().enumerate() {
                    low[k] = x[2 * i].clone();
                    high[k] = x[2 * i + 1].clone();
                }
                if let Some(w) = witness_from_levels(signature, band, low, high) {
                    return Some(w);
                }
            }
        }
    }
    None
}

fn sum_lp_given_ratio<T: lp::LpScalar>(
    sum: &[usize],
    single: usize,
    pairs: &[(usize, usize)],
    ratio: T,
) -> LinearProgram<T> {
    let f = sum.len();
    let mut lp = LinearProgram::<T>::new(2 * f);
    level_constraints(&mut lp, 0, f);
    for &(a, b) in pairs {
        let wa = if a >> single & 1 == 1 {
            ratio.clone()
        } else {
            T::one()
        };
        let wb = if b >> single & 1 == 1 {
            ratio.clone()
        } else {
            T::one()
        };
        let mut c = vec![T::zero(); 2 * f];
        for (i, &k) in sum.iter().enumerate() {
            let ib = 2 * i + (b >> k & 1);
            c[ib] = c[ib].add(&wb);
            let ia = 2 * i + (a >> k & 1);
            c[ia] = c[ia].sub(&wa);
        }
        lp.add(c, Relation::Ge, T::one());
    }
    lp.minimize(vec![T::one(); 2 * f]);
    lp
}

/// Randomized multi-start search in log space maximizing the smallest
/// log-ratio between consecutive bands. Candidates with positive margin are
/// rationalized and checked exactly; only verified witnesses are returned.
pub fn mixed_search(
    signature: &NodeSignature,
    band: &BandFunction,
    budget: &SearchBudget,
) -> Option<FactorWitness> {
    let n = signature.n_inputs;
    let pairs = band_pairs(band);
    let seed = band.0.iter().fold(budget.seed, |h, &b| {
        h.wrapping_mul(31).wrapping_add(b as u64)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logic = &signature.logic;
    let levels = |p: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let low: Vec<f64> = (0..n).map(|k| p[2 * k].exp()).collect();
        let high = (0..n).map(|k| low[k] + p[2 * k + 1].exp()).collect();
        (low, high)
    };
    let margin = |p: &[f64]| -> f64 {
        let (low, high) = levels(p);
        pairs
            .iter()
            .map(|&(a, b)| {
                production(logic, b, &low, &high).ln() - production(logic, a, &low, &high).ln()
            })
            .fold(f64::INFINITY, f64::min)
    };
    for _ in 0..budget.starts {
        let mut p: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut best = margin(&p);
        let mut sigma = 1.0;
        for _ in 0..budget.iterations {
            if best > 1e-3 {
                break;
            }
            let mut q = p.clone();
            for x in &mut q {
                if rng.gen_bool(0.5) {
                    let z: f64 = rng.sample(StandardNormal);
                    *x = (*x + sigma * z).clamp(-12.0, 12.0);
                }
            }
            let value = margin(&q);
            if value >= best {
                p = q;
                best = value;
                sigma = (sigma * 1.2).min(4.0);
            } else {
                sigma = (sigma * 0.95).max(1e-3);
            }
        }
        if best > 0.0 {
            let (low, high) = levels(&p);
            if let Some(w) = rationalize(signature, band, &low, &high) {
                return Some(w);
            }
        }
    }
    None
}

fn rationalize(
    signature: &NodeSignature,
    band: &BandFunction,
    low: &[f64],
    high: &[f64],
) -> Option<FactorWitness> {
    for tol in [1e-2, 1e-3, 1e-4, 1e-6, 1e-9] {
        let lo: Vec<BigRational> = low.iter().map(|&x| approximate(x, tol)).collect();
        let hi: Vec<BigRational> = high.iter().map(|&x| approximate(x, tol)).collect();
        if let Some(w) = witness_from_levels(signature, band, lo, hi) {
            return Some(w);
        }
    }
    let lo = low
        .iter()
        .map(|&x| BigRational::from_float(x))
        .collect::<Option<Vec<_>>>()?;
    let hi = high
        .iter()
        .map(|&x| BigRational::from_float(x))
        .collect::<Option<Vec<_>>>()?;
    witness_from_levels(signature, band, lo, hi)
}

/// Simplest continued-fraction convergent within relative tolerance.
fn approximate(x: f64, tol: f64) -> BigRational {
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut r = x;
    for _ in 0..40 {
        let a = r.floor();
        let (p2, q2) = (a as i64 * p1 + p0, a as i64 * q1 + q0);
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        if ((p1 as f64 / q1 as f64) - x).abs() <= tol * x.abs() || r - a < 1e-12 {
            break;
        }
        r = 1.0 / (r - a);
        if r > 1e9 {
            break;
        }
    }
    if q1 == 0 {
        return BigRational::from_float(x).unwrap_or_else(BigRational::one);
    }
    BigRational::new(BigInt::from(p1), BigInt::from(q1))
}
