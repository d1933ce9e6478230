//! The `warmsim` command line.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{ConfigError, Experiment, ExperimentConfig};
use crate::coupling::{estimate_coupling_tail, fit_envelope, CouplingPlan, EnvelopeForm};
use crate::envelope::{
    check_condition_a, check_condition_b, check_condition_c, check_condition_d, EnvelopePair, MomentVector,
};
use crate::kernel::{simulate, transient_availability, Trajectory};
use crate::rng::{replicate, substream_label, with_threads};

pub const EXIT_OK: i32 = 0;
/// Simulation or numerical failure inside a valid configuration.
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONDITION: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_FIT: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "warmsim", version, about = "Warm-standby reliability simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check envelope conditions a-d on every slot.
    Validate(Args),
    /// Simulate trajectories; writes events.csv and summary.csv.
    Simulate(Args),
    /// Estimate the coupling-time tail; writes tv_curve.csv and fit.txt.
    Couple(Args),
    /// Estimate transient availability; writes availability.csv.
    Availability(Args),
}

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 lets the pool decide.
    #[arg(long, env = "WARMSIM_THREADS")]
    pub threads: Option<usize>,
    /// Overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    pub fn args(&self) -> &Args {
        match self {
            Command::Validate(a) | Command::Simulate(a) | Command::Couple(a) | Command::Availability(a) => a,
        }
    }
}

enum Failure {
    Config(ConfigError),
    Runtime(crate::Error),
    Io(PathBuf, std::io::Error),
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Runtime(e)
    }
}

/// Runs a parsed command line, printing reports to `out` and diagnostics to
/// `err`; returns the process exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let args = cli.command.args();
    let mut report = String::new();
    let result = load(args).and_then(|exp| {
        let report = &mut report;
        with_threads(args.threads.unwrap_or(0), || match &cli.command {
            Command::Validate(_) => cmd_validate(&exp, report),
            Command::Simulate(_) => cmd_simulate(&exp, args, report),
            Command::Couple(_) => cmd_couple(&exp, args, report),
            Command::Availability(_) => cmd_availability(&exp, args, report),
        })
    });
    let _ = out.write_all(report.as_bytes());
    match result {
        Ok(code) => code,
        Err(Failure::Config(e)) => {
            let _ = writeln!(err, "config error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
        Err(Failure::Io(path, e)) => {
            let _ = writeln!(err, "i/o error on {}: {e}", path.display());
            EXIT_IO
        }
    }
}

fn load(args: &Args) -> Result<Experiment, Failure> {
    let mut cfg = ExperimentConfig::from_path(&args.config).map_err(|e| match e {
        ConfigError::Read { source, .. } => Failure::Io(args.config.clone(), source),
        e => Failure::Config(e),
    })?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    cfg.build().map_err(Failure::Config)
}

fn out_dir(exp: &Experiment, args: &Args) -> Result<PathBuf, Failure> {
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&exp.config.output.dir));
    fs::create_dir_all(&dir).map_err(|e| Failure::Io(dir.clone(), e))?;
    Ok(dir)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::Io(path, e))
}

fn say(out: &mut String, text: &str) {
    out.push_str(text);
}

fn cmd_validate(exp: &Experiment, out: &mut String) -> Result<i32, Failure> {
    let mut report = String::new();
    let mut all = true;
    let mut envelopes: Vec<&EnvelopePair> = Vec::new();
    let d_grid = &exp.check_grid.own_clocks;
    for (j, tag, slot) in exp.field.slots() {
        let name = format!("element{} {}", j + 1, tag);
        let Some(env) = &slot.envelope else {
            return Err(Failure::Config(ConfigError::Field {
                field: format!("model.element{}.{}.envelope", j + 1, tag),
                message: "validate needs an envelope on every slot".into(),
            }));
        };
        envelopes.push(env);
        let pf = |ok: bool| if ok { "pass" } else { "FAIL" };

        let a = check_condition_a(|p| slot.hazard(p), env, &exp.check_grid);
        let order = env.ordering_violations(d_grid);
        let a_ok = a.pass() && order.is_empty();
        let _ = writeln!(
            report,
            "{name}: a {} ({} points, {} outside envelope, {} with phi > Q)",
            pf(a_ok),
            a.points_checked,
            a.violations.len(),
            order.len()
        );
        if let Some(v) = a.violations.first() {
            let _ = writeln!(
                report,
                "  first violation: own clock {}, other {} at {}: hazard {} not in [{}, {}]",
                v.point.own_clock, v.point.other_phase, v.point.other_clock, v.hazard, v.lower, v.upper
            );
        }

        let b = check_condition_b(env);
        let integral = b.integral.map_or("diverges".to_string(), |v| format!("{v}"));
        let _ = writeln!(
            report,
            "{name}: b {} (int phi reached {}, divergence {}, order-{} integral {})",
            pf(b.pass()),
            b.cumulative_at_horizon,
            pf(b.divergence_pass),
            env.k,
            integral
        );

        let c = check_condition_c(env)?;
        let _ = writeln!(
            report,
            "{name}: c {} (int Q over (0, {}) = {}, largest passing epsilon {})",
            pf(c.pass()),
            env.epsilon,
            c.integral,
            c.largest_epsilon
        );

        let d = check_condition_d(env, d_grid);
        let _ = writeln!(
            report,
            "{name}: d {} ({} points beyond T = {}, {} with phi = 0)",
            pf(d.pass()),
            d.points_checked,
            env.t_delay,
            d.violations.len()
        );
        all &= a_ok && b.pass() && c.pass() && d.pass();
    }
    let k_min = envelopes.iter().map(|e| e.k).min().unwrap_or(2);
    let ell = f64::from(k_min - 1);
    match MomentVector::from_envelopes([[envelopes[1], envelopes[0]], [envelopes[3], envelopes[2]]], ell) {
        Ok(mv) => {
            let _ = writeln!(
                report,
                "moment vector C({ell}): element1 repair {} working {}; element2 repair {} working {}",
                mv.entries[0][0], mv.entries[0][1], mv.entries[1][0], mv.entries[1][1]
            );
        }
        Err(e) => {
            let _ = writeln!(report, "moment vector C({ell}): unavailable ({e})");
        }
    }
    let _ = writeln!(report, "overall: {}", if all { "pass" } else { "FAIL" });
    say(out, &report);
    Ok(if all { EXIT_OK } else { EXIT_CONDITION })
}

fn cmd_simulate(exp: &Experiment, args: &Args, out: &mut String) -> Result<i32, Failure> {
    let run = &exp.config.run;
    let dir = out_dir(exp, args)?;
    let trajectories: Vec<Trajectory> = replicate(run.replications, run.seed, |_, rng| {
        simulate(&exp.initial, &exp.field, &exp.policy, run.horizon, rng)
    })?;

    let mut events = String::from("wall_time,element,transition,clock_at_event\n");
    for e in trajectories[0].events() {
        let _ = writeln!(
            events,
            "{},{},{},{}",
            e.wall_time,
            e.element + 1,
            e.transition_label(),
            e.clock_at_event
        );
    }
    let mut summary = String::from("replication,longrun_availability,events,seed\n");
    let mut total = 0.0;
    for (i, tr) in trajectories.iter().enumerate() {
        let avail = if run.horizon > 0.0 {
            tr.longrun_availability(run.burn_in)?
        } else if tr.initial().is_available() {
            1.0
        } else {
            0.0
        };
        total += avail;
        let _ = writeln!(
            summary,
            "{i},{avail},{},{}",
            tr.events().len(),
            substream_label(run.seed, i as u64)
        );
    }
    write_file(&dir, "events.csv", &events)?;
    write_file(&dir, "summary.csv", &summary)?;
    say(
        out,
        &format!(
            "{} replications, mean long-run availability {}\nwrote {}\n",
            trajectories.len(),
            total / trajectories.len() as f64,
            dir.display()
        ),
    );
    Ok(EXIT_OK)
}

fn cmd_couple(exp: &Experiment, args: &Args, out: &mut String) -> Result<i32, Failure> {
    let run = &exp.config.run;
    let Some(c) = &exp.config.coupling else {
        return Err(Failure::Config(ConfigError::Field {
            field: "coupling".into(),
            message: "required by the couple command".into(),
        }));
    };
    let horizon = c.horizon.unwrap_or(run.horizon);
    let replications = c.replications.unwrap_or(run.replications);
    let grid = c.time_grid.clone().unwrap_or_else(|| run.time_grid.clone());
    if grid.is_empty() {
        return Err(Failure::Config(ConfigError::Field {
            field: "run.time_grid".into(),
            message: "the couple command needs a nonempty time grid".into(),
        }));
    }
    let dir = out_dir(exp, args)?;
    let plan =
        CouplingPlan::new(c.initial_a.build(), c.initial_b.build(), horizon, replications).with_warm_up(c.warm_up_b);
    let curve = estimate_coupling_tail(&plan, &exp.field, &exp.policy, &grid, run.seed)?;

    let mut csv = String::from("t,bound,ci_radius,n\n");
    for i in 0..curve.t.len() {
        let _ = writeln!(csv, "{},{},{},{}", curve.t[i], curve.bound[i], curve.radius[i], curve.n);
    }
    write_file(&dir, "tv_curve.csv", &csv)?;

    let window = (c.fit_window[0], c.fit_window[1]);
    let form_name = match c.form {
        EnvelopeForm::Polynomial => "polynomial",
        EnvelopeForm::Exponential => "exponential",
    };
    let mut fit_txt = format!(
        "form: {form_name}\nwindow: [{}, {}]\nreplications: {}\n",
        window.0, window.1, curve.n
    );
    let code = match fit_envelope(&curve, c.form, window) {
        Ok(fit) => {
            match fit.form {
                EnvelopeForm::Polynomial => {
                    let _ = writeln!(fit_txt, "K: {}\nell: {}", fit.constant, fit.rate);
                }
                EnvelopeForm::Exponential => {
                    let _ = writeln!(fit_txt, "K_tilde: {}\nbeta: {}", fit.constant, fit.rate);
                }
            }
            let _ = writeln!(
                fit_txt,
                "rmse: {}\nlift: {}\npoints: {}",
                fit.rmse, fit.lift, fit.points
            );
            if fit.form == EnvelopeForm::Exponential {
                exponential_diagnostics(exp, fit.rate, &mut fit_txt)?;
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(fit_txt, "rejected: {e}");
            EXIT_FIT
        }
    };
    write_file(&dir, "fit.txt", &fit_txt)?;
    say(out, &fit_txt);
    Ok(code)
}

/// Exponential abscissa of every declared dominated lifetime, against the
/// fitted rate.
fn exponential_diagnostics(exp: &Experiment, beta: f64, txt: &mut String) -> Result<(), Failure> {
    for (j, tag, slot) in exp.field.slots() {
        let Some(env) = &slot.envelope else {
            continue;
        };
        let alpha = env.dominated().exponential_abscissa()?;
        let note = if alpha > 0.0 && beta < alpha {
            "beta below alpha"
        } else {
            "beta not below alpha"
        };
        let _ = writeln!(txt, "alpha element{} {}: {} ({note})", j + 1, tag, alpha);
    }
    Ok(())
}

fn cmd_availability(exp: &Experiment, args: &Args, out: &mut String) -> Result<i32, Failure> {
    let run = &exp.config.run;
    if run.time_grid.is_empty() {
        return Err(Failure::Config(ConfigError::Field {
            field: "run.time_grid".into(),
            message: "the availability command needs a nonempty time grid".into(),
        }));
    }
    let dir = out_dir(exp, args)?;
    let curve = transient_availability(
        &exp.initial,
        &exp.field,
        &exp.policy,
        &run.time_grid,
        run.replications,
        run.seed,
    )?;
    let mut csv = String::from("t,estimate,stderr,n\n");
    for i in 0..curve.t.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            curve.t[i], curve.estimate[i], curve.stderr[i], curve.n
        );
    }
    write_file(&dir, "availability.csv", &csv)?;
    say(out, &format!("wrote {}\n", dir.join("availability.csv").display()));
    Ok(EXIT_OK)
}
