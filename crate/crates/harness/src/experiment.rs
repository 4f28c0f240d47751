//! Runs a configured experiment: one CSV of per-round metrics per seed
//! and a `summary.json` with aggregates across seeds.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use congestion_bandit::game::{agent_rng, checkpoints, run_dynamics, DynamicsOptions, Game, RoundRecord};
use congestion_bandit::learner::{Learner, RegretTracker, Schedule};
use congestion_bandit::space::AgentSpace;
use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::adversary_costs;
use crate::config::{AdversaryConfig, Mode, Resolved};
use crate::error::{HarnessError, Result};

/// Stream number of the adversary's rng, away from the agents' streams.
const ADVERSARY_STREAM: usize = 1 << 32;

#[derive(Debug, Clone, Serialize)]
struct Row {
    t: u64,
    agent_id: usize,
    realized_cost: f64,
    cum_regret: Option<f64>,
    mu: f64,
    gamma: f64,
    nash_gap: Option<f64>,
    expected_potential: Option<f64>,
}

/// Running statistics of the Nash gap over the evaluated rounds.
#[derive(Debug, Clone, Default)]
struct GapStats {
    horizon: u64,
    epsilon: f64,
    count: u64,
    sum: f64,
    within: u64,
    early: (f64, u64),
    late: (f64, u64),
    late_half: (u64, u64),
    last: Option<f64>,
    min: f64,
}

impl GapStats {
    fn new(horizon: u64, epsilon: f64) -> Self {
        GapStats {
            horizon,
            epsilon,
            min: f64::INFINITY,
            ..Default::default()
        }
    }

    fn push(&mut self, t: u64, gap: f64) {
        let frac = t as f64 / self.horizon as f64;
        let ok = gap <= self.epsilon;
        self.count += 1;
        self.sum += gap;
        self.within += ok as u64;
        self.min = self.min.min(gap);
        if frac <= 0.1 {
            self.early.0 += gap;
            self.early.1 += 1;
        }
        if frac > 0.9 {
            self.late.0 += gap;
            self.late.1 += 1;
        }
        if frac > 0.5 {
            self.late_half.0 += ok as u64;
            self.late_half.1 += 1;
        }
        self.last = Some(gap);
    }

    fn mean((sum, n): (f64, u64)) -> Option<f64> {
        (n > 0).then(|| sum / n as f64)
    }

    fn finish(&self) -> Option<GapSummary> {
        let last = self.last?;
        Some(GapSummary {
            final_gap: last,
            min_gap: self.min,
            mean_gap: self.sum / self.count as f64,
            fraction_within: self.within as f64 / self.count as f64,
            early_mean: Self::mean(self.early),
            late_mean: Self::mean(self.late),
            late_half_fraction_within: (self.late_half.1 > 0)
                .then(|| self.late_half.0 as f64 / self.late_half.1 as f64),
            evaluations: self.count,
        })
    }
}

/// Nash-gap statistics of one seed, over the rounds where the gap was
/// evaluated. The early and late windows are the first and last 10% of
/// rounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSummary {
    pub final_gap: f64,
    pub min_gap: f64,
    pub mean_gap: f64,
    pub fraction_within: f64,
    pub early_mean: Option<f64>,
    pub late_mean: Option<f64>,
    pub late_half_fraction_within: Option<f64>,
    pub evaluations: u64,
}

/// Regret of one agent at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretPoint {
    pub t: u64,
    pub regret: f64,
    pub pseudo_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    /// File name inside the output directory.
    pub csv: String,
    /// Per agent, at the horizon.
    pub final_regret: Vec<f64>,
    pub final_pseudo_regret: Vec<f64>,
    /// Agent 0's regret at every recorded checkpoint.
    pub regret_curve: Vec<RegretPoint>,
    pub gap: Option<GapSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedResult {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<SeedOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    /// Sample standard deviation; 0 for a single value. `None` when empty.
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(MeanStd { mean, std, count: n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    /// Mean over agents of each seed's final regret.
    pub final_regret: Option<MeanStd>,
    pub final_pseudo_regret: Option<MeanStd>,
    pub final_nash_gap: Option<MeanStd>,
    pub time_averaged_gap: Option<MeanStd>,
    pub fraction_gap_within_epsilon: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mode: Mode,
    pub horizon: u64,
    pub stride: u64,
    pub epsilon: f64,
    pub seeds: Vec<SeedResult>,
    pub failed: usize,
    pub aggregates: Aggregates,
}

impl Summary {
    pub fn outcomes(&self) -> impl Iterator<Item = &SeedOutcome> {
        self.seeds.iter().filter_map(|s| s.outcome.as_ref())
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs every seed (in parallel) and writes `seed_<s>.csv` plus
/// `summary.json` into `out` (or the configured output directory).
pub fn run_experiment(resolved: &Resolved, out: Option<&Path>) -> Result<Summary> {
    let config = &resolved.config;
    let out_dir = out.unwrap_or(&config.out_dir).to_path_buf();
    std::fs::create_dir_all(&out_dir).map_err(io(&out_dir))?;

    let target = match config.mode {
        Mode::SelfPlay => Target::SelfPlay(resolved.game.build()?),
        Mode::Adversary => {
            let adversary = config
                .adversary
                .clone()
                .ok_or_else(|| HarnessError::Input("adversary mode without an adversary".into()))?;
            let space = resolved.game.spaces()?.swap_remove(0);
            Target::Adversary(space, adversary)
        }
    };

    let seeds: Vec<SeedResult> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let csv = out_dir.join(format!("seed_{seed}.csv"));
            match run_seed(resolved, &target, seed, &csv) {
                Ok(outcome) => SeedResult {
                    seed,
                    outcome: Some(outcome),
                    error: None,
                },
                Err(e) => {
                    if config.progress {
                        eprintln!("seed {seed}: failed: {e}");
                    }
                    SeedResult {
                        seed,
                        outcome: None,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();

    let summary = summarize(resolved, seeds);
    let path = out_dir.join("summary.json");
    let file = File::create(&path).map_err(io(&path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w).and_then(|_| w.flush()).map_err(io(&path))?;
    Ok(summary)
}

enum Target {
    SelfPlay(Game),
    Adversary(Arc<AgentSpace>, AdversaryConfig),
}

fn summarize(resolved: &Resolved, seeds: Vec<SeedResult>) -> Summary {
    let config = &resolved.config;
    let outcomes: Vec<&SeedOutcome> = seeds.iter().filter_map(|s| s.outcome.as_ref()).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let collect = |f: &dyn Fn(&SeedOutcome) -> Option<f64>| -> Option<MeanStd> {
        MeanStd::of(&outcomes.iter().filter_map(|o| f(o)).collect::<Vec<_>>())
    };
    let aggregates = Aggregates {
        final_regret: collect(&|o| Some(mean(&o.final_regret))),
        final_pseudo_regret: collect(&|o| Some(mean(&o.final_pseudo_regret))),
        final_nash_gap: collect(&|o| o.gap.as_ref().map(|g| g.final_gap)),
        time_averaged_gap: collect(&|o| o.gap.as_ref().map(|g| g.mean_gap)),
        fraction_gap_within_epsilon: collect(&|o| o.gap.as_ref().map(|g| g.fraction_within)),
    };
    Summary {
        mode: config.mode,
        horizon: config.horizon,
        stride: config.stride,
        epsilon: config.epsilon,
        failed: seeds.iter().filter(|s| s.error.is_some()).count(),
        seeds,
        aggregates,
    }
}

/// Prints `seed s: k%` to stderr each time another percent completes.
struct Progress {
    seed: u64,
    horizon: u64,
    shown: u64,
    enabled: bool,
}

impl Progress {
    fn tick(&mut self, t: u64) {
        if !self.enabled {
            return;
        }
        let pct = t * 100 / self.horizon;
        if pct > self.shown {
            self.shown = pct;
            eprintln!("seed {}: {pct}%", self.seed);
        }
    }
}

fn run_seed(resolved: &Resolved, target: &Target, seed: u64, csv: &Path) -> Result<SeedOutcome> {
    let config = &resolved.config;
    let file = File::create(csv).map_err(io(csv))?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    let mut progress = Progress {
        seed,
        horizon: config.horizon,
        shown: 0,
        enabled: config.progress,
    };
    let mut gaps = GapStats::new(config.horizon, config.epsilon);
    let mut curve = Vec::new();
    let mut final_regret = Vec::new();
    let mut final_pseudo = Vec::new();

    let mut emit = |r: &RoundRecord| -> Result<()> {
        if let Some(g) = r.nash_gap {
            gaps.push(r.t, g);
        }
        if let (Some(regret), Some(pseudo)) = (r.agents[0].cum_regret, r.agents[0].pseudo_regret) {
            curve.push(RegretPoint {
                t: r.t,
                regret,
                pseudo_regret: pseudo,
            });
        }
        if r.t == config.horizon {
            final_regret = r.agents.iter().filter_map(|a| a.cum_regret).collect();
            final_pseudo = r.agents.iter().filter_map(|a| a.pseudo_regret).collect();
        }
        for (i, a) in r.agents.iter().enumerate() {
            writer.serialize(Row {
                t: r.t,
                agent_id: i,
                realized_cost: a.realized_cost,
                cum_regret: a.cum_regret,
                mu: a.mu,
                gamma: a.gamma,
                nash_gap: r.nash_gap,
                expected_potential: r.expected_potential,
            })?;
        }
        progress.tick(r.t);
        Ok(())
    };

    match target {
        Target::SelfPlay(game) => {
            let schedules: Vec<Schedule> = (0..game.agents())
                .map(|i| {
                    Schedule::new(
                        config.schedule.variant,
                        game.agents(),
                        game.dim(),
                        game.c_max(),
                        game.space(i).theta(),
                    )
                    .with_overrides(config.schedule.overrides)
                })
                .collect();
            let opts = DynamicsOptions {
                horizon: config.horizon,
                seed,
                stride: config.stride,
                exact_regret: config.exact_regret,
            };
            let mut failure = None;
            let result = run_dynamics(game, &schedules, opts, |r| {
                emit(r).map_err(|e| {
                    let msg = e.to_string();
                    failure = Some(e);
                    congestion_bandit::Error::Invariant(msg)
                })
            });
            if let Some(e) = failure {
                return Err(e);
            }
            result?;
        }
        Target::Adversary(space, adversary) => {
            run_against_adversary(resolved, space, adversary, seed, &mut emit)?;
        }
    }
    writer.flush().map_err(io(csv))?;
    Ok(SeedOutcome {
        seed,
        csv: csv
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        final_regret,
        final_pseudo_regret: final_pseudo,
        regret_curve: curve,
        gap: gaps.finish(),
    })
}

/// One learner against a scripted cost sequence. The adversary sees the
/// learner's marginal before each round; the learner sees only its loss.
fn run_against_adversary(
    resolved: &Resolved,
    space: &Arc<AgentSpace>,
    adversary: &AdversaryConfig,
    seed: u64,
    emit: &mut impl FnMut(&RoundRecord) -> Result<()>,
) -> Result<()> {
    use congestion_bandit::game::AgentRound;

    let config = &resolved.config;
    let schedule = Schedule::new(
        config.schedule.variant,
        1,
        space.dim(),
        adversary.c_max,
        space.theta(),
    )
    .with_overrides(config.schedule.overrides);
    let mut learner = Learner::new(space.clone(), schedule);
    let mut tracker = RegretTracker::new(space.clone());
    let mut rng = agent_rng(seed, 0);
    let mut adv_rng = agent_rng(seed, ADVERSARY_STREAM);
    let marks = checkpoints(config.horizon);
    let mut next_mark = 0;
    for t in 1..=config.horizon {
        let x = learner.marginal();
        let (gamma, mu) = learner.rates();
        let costs = adversary_costs(&adversary.script, t, &x, adversary.c_max, &mut adv_rng);
        let played = learner.sample(&mut rng)?;
        let loss = played.weight(&costs);
        tracker.record(&played, &x, &costs);
        learner.observe(loss)?;
        let due = marks.get(next_mark) == Some(&t);
        if due {
            next_mark += 1;
        }
        let (cum_regret, pseudo_regret) = if due || config.exact_regret {
            (Some(tracker.regret()?), Some(tracker.pseudo_regret()?))
        } else {
            (None, None)
        };
        emit(&RoundRecord {
            t,
            agents: vec![AgentRound {
                realized_cost: loss,
                cum_regret,
                pseudo_regret,
                mu,
                gamma,
            }],
            nash_gap: None,
            expected_potential: None,
        })?;
    }
    Ok(())
}

/// Least-squares slope of `ln y` against `ln t` over the points with
/// `y > 0`. `None` with fewer than two such points.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, y)| *t > 0.0 && *y > 0.0)
        .map(|(t, y)| (t.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
