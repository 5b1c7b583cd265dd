//! Mutation-only genetic hill climbing over extended Prüfer codes.
//!
//! Every generation each member proposes a single-symbol neighbour and keeps
//! it when the noisy efficiency gain `ΔΛ` is strictly positive.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{normalize, CostPair, EntropyExtremaTable};
use crate::tree::{DirectedTree, ExtendedPrueferCode};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Weight of the comprehension term, in (0, 1).
    pub rho: f64,
    /// Standard deviation of the selection noise, in bits.
    pub sigma: f64,
    pub epochs: usize,
    /// Trajectory sampling stride in epochs.
    pub record_every: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { rho: 0.9, sigma: 0.075, epochs: 400, record_every: 1 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be finite and >= 0, got {}", self.sigma)));
        }
        if self.epochs == 0 || self.record_every == 0 {
            return Err(Error::Config("epochs and record_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub code: ExtendedPrueferCode,
    pub cost: CostPair,
}

impl Member {
    pub fn new(code: ExtendedPrueferCode) -> Result<Self> {
        let cost = CostPair::of(&code.decode())?;
        Ok(Self { code, cost })
    }

    pub fn tree(&self) -> DirectedTree {
        self.code.decode()
    }

    pub fn n(&self) -> usize {
        self.code.n()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Population {
    pub members: Vec<Member>,
    pub epoch: usize,
}

impl Population {
    pub fn from_codes(codes: impl IntoIterator<Item = ExtendedPrueferCode>) -> Result<Self> {
        let members = codes.into_iter().map(Member::new).collect::<Result<Vec<_>>>()?;
        Ok(Self { members, epoch: 0 })
    }

    pub fn from_trees<'a>(trees: impl IntoIterator<Item = &'a DirectedTree>) -> Result<Self> {
        Self::from_codes(trees.into_iter().map(ExtendedPrueferCode::encode).collect::<Result<Vec<_>>>()?)
    }

    /// Mean normalized `(H_ks, H_deg)` over the members.
    pub fn mean_normalized(&self, table: &EntropyExtremaTable) -> Result<(f64, f64)> {
        if self.members.is_empty() {
            return Err(Error::EmptySample);
        }
        let (mut ks, mut deg) = (0.0, 0.0);
        for m in &self.members {
            let h = normalize(m.cost, m.n(), table)?;
            ks += h.h_ks;
            deg += h.h_deg;
        }
        let count = self.members.len() as f64;
        Ok((ks / count, deg / count))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub epoch: usize,
    pub mean_h_deg: f64,
    pub mean_h_ks: f64,
}

/// Population means of the normalized measures at each recorded epoch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub const HEADER: &'static str = "epoch,mean_H_deg,mean_H_ks";

    pub fn last(&self) -> Option<&TrajectoryPoint> {
        self.points.last()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# deptopo optimizer trajectory v1: {}", Self::HEADER)?;
        writeln!(out, "{}", Self::HEADER)?;
        for p in &self.points {
            writeln!(out, "{},{},{}", p.epoch, crate::io::fmt_sig(p.mean_h_deg), crate::io::fmt_sig(p.mean_h_ks))?;
        }
        Ok(())
    }
}

/// Replaces one symbol (root included) by a different uniformly chosen value.
pub fn mutate_code<R: Rng + ?Sized>(code: &ExtendedPrueferCode, rng: &mut R) -> Result<ExtendedPrueferCode> {
    let n = code.n();
    if n < 3 {
        return Err(Error::UnsupportedSize { n, reason: "mutation needs n >= 3" });
    }
    let pos = rng.random_range(0..code.len());
    let old = code.symbol(pos);
    let mut value = rng.random_range(0..n - 1);
    if value >= old {
        value += 1;
    }
    code.with_symbol(pos, value)
}

/// `ΔΛ = ρ(h′_ks − h_ks) − (1−ρ)(h′_deg − h_deg) + ε`.
///
/// Evaluated as a difference of efficiencies, so with `ε = 0` the result is
/// positive exactly when the new efficiency compares greater.
pub fn delta_lambda(old: CostPair, new: CostPair, rho: f64, epsilon: f64) -> f64 {
    (new.efficiency(rho) - old.efficiency(rho)) + epsilon
}

pub fn run<R: Rng + ?Sized>(
    initial: Population,
    config: &OptimizerConfig,
    table: &EntropyExtremaTable,
    rng: &mut R,
) -> Result<(Population, Trajectory)> {
    run_with_observer(initial, config, table, rng, |_| {})
}

/// Like [`run`], calling `observer` after every epoch.
pub fn run_with_observer<R, F>(
    initial: Population,
    config: &OptimizerConfig,
    table: &EntropyExtremaTable,
    rng: &mut R,
    mut observer: F,
) -> Result<(Population, Trajectory)>
where
    R: Rng + ?Sized,
    F: FnMut(&Population),
{
    config.validate()?;
    let noise = Normal::new(0.0, config.sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut population = initial;
    // one stream per member keeps results independent of scheduling
    let mut streams: Vec<ChaCha8Rng> =
        population.members.iter().map(|_| ChaCha8Rng::seed_from_u64(rng.random())).collect();
    let mut trajectory = Trajectory::default();

    for epoch in 1..=config.epochs {
        population.members.par_iter_mut().zip(streams.par_iter_mut()).try_for_each(
            |(member, stream)| -> Result<()> {
                let candidate = mutate_code(&member.code, stream)?;
                let cost = CostPair::of(&candidate.decode())?;
                let epsilon = if config.sigma > 0.0 { noise.sample(stream) } else { 0.0 };
                if delta_lambda(member.cost, cost, config.rho, epsilon) > 0.0 {
                    member.code = candidate;
                    member.cost = cost;
                }
                Ok(())
            },
        )?;
        population.epoch = epoch;
        if epoch % config.record_every == 0 {
            let (mean_h_ks, mean_h_deg) = population.mean_normalized(table)?;
            trajectory.points.push(TrajectoryPoint { epoch, mean_h_deg, mean_h_ks });
        }
        observer(&population);
    }
    Ok((population, trajectory))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::tests::table50;
    use crate::samplers::sample_uniform_code;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn uniform_population(n: usize, size: usize, seed: u64) -> Population {
        let mut r = rng(seed);
        Population::from_codes((0..size).map(|_| sample_uniform_code(n, &mut r).unwrap())).unwrap()
    }

    #[test]
    fn forced_root_replacement() {
        let code = ExtendedPrueferCode::new(vec![0, 0], 0).unwrap();
        let m = code.with_symbol(2, 3).unwrap();
        assert_eq!(m.symbols(), vec![0, 0, 3]);
        assert_eq!(m.root(), 3);
    }

    #[test]
    fn mutation_changes_exactly_one_symbol() {
        let mut r = rng(1);
        for _ in 0..2000 {
            let code = sample_uniform_code(r.random_range(3..30), &mut r).unwrap();
            let m = mutate_code(&code, &mut r).unwrap();
            let diff = code.symbols().iter().zip(m.symbols()).filter(|(a, b)| **a != *b).count();
            assert_eq!(diff, 1);
        }
        let tiny = ExtendedPrueferCode::new(vec![], 0).unwrap();
        assert!(mutate_code(&tiny, &mut r).is_err());
    }

    #[test]
    fn mutation_positions_are_uniform() {
        let code = ExtendedPrueferCode::new(vec![1, 3, 1], 2).unwrap();
        let mut r = rng(9);
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            let m = mutate_code(&code, &mut r).unwrap();
            let pos = (0..4).find(|&p| m.symbol(p) != code.symbol(p)).unwrap();
            counts[pos] += 1;
        }
        let stat: f64 = counts.iter().map(|&c| (c as f64 - 2500.0).powi(2) / 2500.0).sum();
        assert!(stat < ChiSquared::new(3.0).unwrap().inverse_cdf(0.99), "{counts:?}");
    }

    #[test]
    fn delta_lambda_examples() {
        let old = CostPair::new(1.0, 1.0);
        let d = delta_lambda(old, CostPair::new(1.1, 1.5), 0.9, 0.0);
        assert!((d - 0.04).abs() < 1e-12 && d > 0.0);
        assert_eq!(delta_lambda(old, old, 0.9, 0.0), 0.0);
        let d = delta_lambda(old, CostPair::new(0.9, 1.0), 0.9, 0.0);
        assert!((d + 0.09).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let bad = [
            OptimizerConfig { rho: 1.0, ..Default::default() },
            OptimizerConfig { rho: 0.0, ..Default::default() },
            OptimizerConfig { sigma: -0.1, ..Default::default() },
            OptimizerConfig { epochs: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        assert!(OptimizerConfig::default().validate().is_ok());
    }

    #[test]
    fn noiseless_climb_is_monotone() {
        let config = OptimizerConfig { rho: 0.9, sigma: 0.0, epochs: 200, record_every: 10 };
        let pop = uniform_population(12, 30, 4);
        let mut last: Vec<f64> = pop.members.iter().map(|m| m.cost.efficiency(0.9)).collect();
        let (fin, traj) = run_with_observer(pop, &config, table50(), &mut rng(5), |p| {
            for (m, prev) in p.members.iter().zip(last.iter_mut()) {
                let now = m.cost.efficiency(0.9);
                assert!(now >= *prev);
                assert_eq!(m.n(), 12);
                *prev = now;
            }
        })
        .unwrap();
        assert_eq!(fin.epoch, 200);
        assert_eq!(traj.points.len(), 20);
        assert!(traj.points.iter().all(|p| (0.0..=1.0).contains(&p.mean_h_ks)));
    }

    #[test]
    fn runs_are_deterministic() {
        let config = OptimizerConfig { epochs: 50, ..Default::default() };
        let a = run(uniform_population(15, 20, 8), &config, table50(), &mut rng(3)).unwrap();
        let b = run(uniform_population(15, 20, 8), &config, table50(), &mut rng(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn costs_stay_consistent_with_codes() {
        let config = OptimizerConfig { epochs: 30, ..Default::default() };
        let (fin, _) = run(uniform_population(10, 10, 1), &config, table50(), &mut rng(2)).unwrap();
        for m in &fin.members {
            assert_eq!(m.cost, CostPair::of(&m.tree()).unwrap());
        }
    }

    #[test]
    fn trajectory_export() {
        let config = OptimizerConfig { epochs: 20, record_every: 5, ..Default::default() };
        let (_, traj) = run(uniform_population(8, 5, 1), &config, table50(), &mut rng(2)).unwrap();
        let mut buf = Vec::new();
        traj.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with('#'));
        assert_eq!(lines[1], "epoch,mean_H_deg,mean_H_ks");
        assert_eq!(lines.len(), 2 + 4);
        assert!(lines[2].starts_with("5,"));
    }
}
