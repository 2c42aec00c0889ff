use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use semres_core::montecarlo::{decision_profile, sweep_configs, Scoring, SweepAxis, TaskKind, TrialConfig};
use semres_core::theory::{closed_form, linear_decay_front, pareto_front, TheoryPoint};
use semres_core::toy::{estimate_noise_and_resolution, Loss, Profile, SemanticForm, TrainConfig, Trainer, TrajectoryRecord};
use semres_core::{Point, Similarity, SimilaritySource, Space};

use crate::cli::{Cli, Command, FormArg, LossArg, McArgs, ProfileArgs, ScoringArg, TaskArg, TheoryArgs, TrainArgs};
use crate::manifest::RunManifest;
use crate::output::{header, load_table, num, CsvOut};
use crate::parallel;

pub const THEORY_FILE: &str = "theory.csv";
pub const MC_FILE: &str = "mc.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const PROFILE_FILE: &str = "profile.csv";
pub const RESOLUTION_FILE: &str = "resolution.csv";
pub const DECISION_PROFILE_FILE: &str = "decision_profile.csv";

/// Runs the command and writes its manifest. `replay` returns the manifest of
/// the re-run command.
pub fn run(cli: &Cli) -> Result<RunManifest> {
    if cli.workers == 0 {
        bail!("--workers must be at least 1");
    }
    let out = cli.out_dir();
    let outputs = match &cli.command {
        Command::Theory(args) => theory(args, &out)?,
        Command::Mc(args) => mc(args, require_seed(cli)?, cli.workers, &out)?,
        Command::Train(args) => train(args, require_seed(cli)?, &out)?,
        Command::Profile(args) => profile(args, &out)?,
        Command::Replay(args) => return replay(cli, &args.manifest),
    };
    let manifest = RunManifest::new(cli, outputs);
    manifest.write(&out)?;
    Ok(manifest)
}

fn require_seed(cli: &Cli) -> Result<u64> {
    cli.seed
        .ok_or_else(|| anyhow!("`{}` is randomized and needs an explicit --seed", cli.command.name()))
}

fn replay(cli: &Cli, path: &Path) -> Result<RunManifest> {
    let recorded = RunManifest::read(path)?;
    let mut config = recorded.config;
    if matches!(config.command, Command::Replay(_)) {
        bail!("{}: manifest records a replay", path.display());
    }
    if let Some(out) = &cli.out {
        config.out = Some(out.clone());
    }
    run(&config)
}

fn parse_space(s: &str) -> Result<Space> {
    s.parse::<Space>().with_context(|| format!("invalid --space {s:?}"))
}

fn parse_sim(s: &str, space: &Space) -> Result<Similarity> {
    let source = s.parse::<SimilaritySource>().with_context(|| format!("invalid --sim {s:?}"))?;
    Ok(match source {
        SimilaritySource::Inline(sim) => sim,
        SimilaritySource::TablePath(path) => {
            let table = load_table(Path::new(&path))?;
            if space.points() != Some(table.size()) {
                bail!(
                    "table {path} is {n}x{n} but --space {space} has {} points",
                    space.points().map_or("no discrete".to_string(), |p| p.to_string()),
                    n = table.size()
                );
            }
            Similarity::Table(table)
        }
    })
}

fn parse_point(s: &str, space: &Space) -> Result<Point> {
    let bad = || format!("invalid point {s:?} for space {space}");
    let p = match space {
        Space::Circle | Space::Segment => Point::Real(s.trim().parse().with_context(bad)?),
        Space::Torus => {
            let (x, y) = s.split_once(',').with_context(bad)?;
            Point::Planar(x.trim().parse().with_context(bad)?, y.trim().parse().with_context(bad)?)
        }
        Space::DiscreteCircle { .. } | Space::DiscreteSegment { .. } => {
            Point::Index(s.trim().parse().with_context(bad)?)
        }
    };
    if !space.contains(&p) {
        bail!("point {s:?} lies outside space {space}");
    }
    Ok(p)
}

fn write_theory(out: &Path, points: &[TheoryPoint]) -> Result<PathBuf> {
    let mut csv = CsvOut::create(out, THEORY_FILE, &header(&["n", "b_mean", "b_mean_sq", "delta", "p_s", "p_i"]))?;
    for p in points {
        csv.row([
            p.n.to_string(),
            num(p.b_mean),
            num(p.b_mean_sq),
            num(p.delta),
            num(p.p_s),
            num(p.p_i),
        ])?;
    }
    csv.finish()
}

fn theory(args: &TheoryArgs, out: &Path) -> Result<Vec<PathBuf>> {
    let space = parse_space(&args.space)?;
    if args.n.is_empty() {
        bail!("--n needs at least one item count");
    }
    let mut points = Vec::new();
    if args.linear_decay {
        if space != Space::Circle || args.n != [2] || args.delta != 0.0 {
            bail!("--linear-decay has a closed form only for the circle with n = 2 and no noise");
        }
        points = linear_decay_front(args.grid)?;
    } else if space.is_discrete() {
        bail!("no closed form on discrete spaces; use `mc`");
    } else if space.is_homogeneous() {
        for &n in &args.n {
            points.extend(pareto_front(n, args.delta, args.grid)?);
        }
    } else {
        if args.grid < 2 {
            bail!("--grid must be at least 2");
        }
        for &n in &args.n {
            for k in 0..args.grid {
                let eps = space.diameter() * k as f64 / (args.grid - 1) as f64;
                let sim = Similarity::constant(eps, args.delta)?;
                let (p_s, p_i) = closed_form(&space, &sim, n, args.nodes)?
                    .ok_or_else(|| anyhow!("no closed form for n = {n} with noise {}", args.delta))?;
                let m = space.ball_moments(eps, args.nodes)?;
                points.push(TheoryPoint {
                    n,
                    b_mean: m.mean,
                    b_mean_sq: m.mean_sq,
                    delta: args.delta,
                    p_s,
                    p_i,
                });
            }
        }
    }
    Ok(vec![write_theory(out, &points)?])
}

fn mc(args: &McArgs, seed: u64, workers: usize, out: &Path) -> Result<Vec<PathBuf>> {
    let space = parse_space(&args.space)?;
    let sim = parse_sim(&args.sim, &space)?;
    if args.n.is_empty() {
        bail!("--n needs at least one item count");
    }
    let axis = if args.eps.is_empty() {
        SweepAxis::N(args.n.clone())
    } else if args.n.len() > 1 {
        bail!("sweep either --eps or a list of --n, not both");
    } else {
        SweepAxis::Eps(args.eps.clone())
    };
    let base = TrialConfig {
        space,
        sim,
        n: args.n[0],
        task: TaskKind::Similarity,
        trials: args.trials,
        seed,
        scoring: match args.scoring {
            ScoringArg::Expected => Scoring::Expected,
            ScoringArg::Sampled => Scoring::Sampled,
        },
    };
    let tasks: &[TaskKind] = match args.task {
        TaskArg::Similarity => &[TaskKind::Similarity],
        TaskArg::Identification => &[TaskKind::Identification],
        TaskArg::Both => &[TaskKind::Similarity, TaskKind::Identification],
    };
    let mut cols = vec!["param", "task", "n", "estimate", "std_error", "trials", "seed"];
    if args.compare_theory {
        cols.extend(["theory", "z"]);
    }
    let mut csv = CsvOut::create(out, MC_FILE, &header(&cols))?;
    for (param, config) in sweep_configs(&base, &axis)? {
        let theory = if args.compare_theory {
            closed_form(&config.space, &config.sim, config.n, args.nodes)?
        } else {
            None
        };
        for &task in tasks {
            let cfg = TrialConfig { task, ..config.clone() };
            let r = parallel::estimate(&cfg, workers)?;
            let mut row = vec![
                num(param),
                task.name().to_string(),
                cfg.n.to_string(),
                num(r.estimate),
                num(r.std_error),
                r.trials.to_string(),
                r.seed.to_string(),
            ];
            if args.compare_theory {
                match theory {
                    Some((s, i)) => {
                        let t = if task == TaskKind::Similarity { s } else { i };
                        row.push(num(t));
                        row.push(num((r.estimate - t) / r.std_error));
                    }
                    None => row.extend([String::new(), String::new()]),
                }
            }
            csv.row(row)?;
        }
    }
    Ok(vec![csv.finish()?])
}

pub fn train_config(args: &TrainArgs, seed: u64) -> Result<TrainConfig> {
    let mut space = parse_space(&args.space)?;
    if let Some(l) = args.l {
        space = match space {
            Space::DiscreteCircle { .. } => Space::DiscreteCircle { points: l },
            Space::DiscreteSegment { .. } => Space::DiscreteSegment { points: l },
            _ => bail!("--l applies to discrete spaces only"),
        }
        .validated()?;
    }
    Ok(TrainConfig {
        space,
        hidden: args.m,
        loss: match args.loss {
            LossArg::Reconstruction => Loss::Reconstruction,
            LossArg::Semantic => Loss::Semantic,
        },
        semantic_form: match args.form {
            FormArg::Nll => SemanticForm::Nll,
            FormArg::HalfD => SemanticForm::HalfD,
        },
        epochs: args.epochs,
        samples_per_epoch: args.samples_per_epoch,
        batch_size: args.batch_size,
        lr: args.lr,
        weight_decay: args.weight_decay,
        init_low: args.init_low,
        init_high: args.init_high,
        eval_trials: args.eval_trials,
        seed,
        profile_every: args.profile_every,
    })
}

fn train(args: &TrainArgs, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    let config = train_config(args, seed)?;
    let l = config.stimuli();
    let records = Trainer::new(config)?.run()?;
    let mut outputs = vec![write_trajectory(out, &records)?];
    outputs.extend(write_profiles(out, l, &records)?);
    Ok(outputs)
}

fn write_trajectory(out: &Path, records: &[TrajectoryRecord]) -> Result<PathBuf> {
    let mut csv = CsvOut::create(out, TRAJECTORY_FILE, &header(&["epoch", "p_s", "p_i", "loss"]))?;
    for r in records {
        csv.row([r.epoch.to_string(), num(r.p_s), num(r.p_i), num(r.loss)])?;
    }
    csv.finish()
}

fn write_profiles(out: &Path, l: usize, records: &[TrajectoryRecord]) -> Result<Vec<PathBuf>> {
    let with_profile: Vec<_> = records
        .iter()
        .filter_map(|r| r.profile.as_ref().map(|p| (r.epoch, p)))
        .collect();
    let Some((_, first)) = with_profile.first() else {
        return Ok(Vec::new());
    };
    let values = (0..l).map(|k| format!("g{k}"));
    match first {
        Profile::Averaged(_) => {
            let cols: Vec<String> = std::iter::once("epoch".to_string()).chain(values).collect();
            let mut csv = CsvOut::create(out, PROFILE_FILE, &cols)?;
            let mut est = CsvOut::create(out, RESOLUTION_FILE, &header(&["epoch", "delta_hat", "eps_hat"]))?;
            for (epoch, p) in &with_profile {
                if let Profile::Averaged(v) = p {
                    csv.row(std::iter::once(epoch.to_string()).chain(v.iter().map(|x| num(*x))))?;
                    let (d, e) = match estimate_noise_and_resolution(v) {
                        Ok((d, e)) => (num(d), num(e)),
                        Err(_) => (String::new(), String::new()),
                    };
                    est.row([epoch.to_string(), d, e])?;
                }
            }
            Ok(vec![csv.finish()?, est.finish()?])
        }
        Profile::Raw(_) => {
            let cols: Vec<String> = ["epoch".to_string(), "stimulus".to_string()]
                .into_iter()
                .chain(values)
                .collect();
            let mut csv = CsvOut::create(out, PROFILE_FILE, &cols)?;
            for (epoch, p) in &with_profile {
                if let Profile::Raw(t) = p {
                    for i in 0..t.size() {
                        csv.row(
                            [epoch.to_string(), i.to_string()]
                                .into_iter()
                                .chain(t.row(i).iter().map(|x| num(*x))),
                        )?;
                    }
                }
            }
            Ok(vec![csv.finish()?])
        }
    }
}

fn profile(args: &ProfileArgs, out: &Path) -> Result<Vec<PathBuf>> {
    let space = parse_space(&args.space)?;
    let sim = parse_sim(&args.sim, &space)?;
    let x1 = parse_point(&args.x1, &space)?;
    let x2 = parse_point(&args.x2, &space)?;
    let points = decision_profile(&space, &sim, x1, x2, args.grid)?;
    let cols = if space == Space::Torus {
        header(&["probe_x", "probe_y", "d1"])
    } else {
        header(&["probe", "d1"])
    };
    let mut csv = CsvOut::create(out, DECISION_PROFILE_FILE, &cols)?;
    for p in points {
        match p.probe {
            Point::Real(x) => csv.row([num(x), num(p.d1)])?,
            Point::Planar(x, y) => csv.row([num(x), num(y), num(p.d1)])?,
            Point::Index(i) => csv.row([i.to_string(), num(p.d1)])?,
        }
    }
    Ok(vec![csv.finish()?])
}
