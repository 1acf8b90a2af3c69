use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use nvsim::dsl::{self, Program};
use nvsim::engine::{
    format_value, linspace, run_point, sweep_delay, InitKind, Mode, Observable, ShotNoise,
    SimOptions, Simulator,
};
use nvsim::experiments::{
    bell_monte_carlo, run_bell, run_bloch, run_cr_sweep, speed_report,
};
use nvsim::model::{evolution_period, PhysicalParams};
use nvsim::Error;

#[derive(Parser)]
#[command(name = "nvsim", version, about = "Electron / 13C register simulator for an NV center")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ideal,
    Full,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Ideal => Mode::Ideal,
            ModeArg::Full => Mode::Full,
        }
    }
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum OutFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dataset {
    Fig2,
    Fig3,
    Fig5,
    Speed,
}

#[derive(clap::Args)]
struct Common {
    /// Pulse fidelity; overrides the file's `mode`.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long, value_enum, default_value = "csv")]
    out: OutFormat,
    /// Shot-noise seed; overrides the file's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Shots per readout; overrides the file's `shots`.
    #[arg(long)]
    shots: Option<u64>,
    /// Parameter file with `key = value` lines.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sequence file.
    Run {
        file: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Regenerate a canned dataset.
    Repro {
        #[arg(value_enum)]
        dataset: Dataset,
        #[command(flatten)]
        common: Common,
        /// Monte Carlo trials for fig5.
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
}

impl Common {
    fn params(&self) -> nvsim::Result<PhysicalParams> {
        match &self.params {
            Some(path) => PhysicalParams::load(path),
            None => Ok(PhysicalParams::default()),
        }
    }

    fn apply(&self, mut opts: SimOptions) -> SimOptions {
        if let Some(mode) = self.mode {
            opts.mode = mode.into();
        }
        match (self.shots, opts.shot_noise.as_mut()) {
            (Some(shots), Some(noise)) => noise.shots = shots,
            (Some(shots), None) => opts.shot_noise = Some(ShotNoise { shots, seed: 0 }),
            _ => {}
        }
        if let (Some(seed), Some(noise)) = (self.seed, opts.shot_noise.as_mut()) {
            noise.seed = seed;
        }
        opts
    }
}

fn read_program(path: &Path) -> nvsim::Result<Program> {
    let bytes = std::fs::read(path)?;
    let mut program = dsl::parse_bytes(&bytes).map_err(Error::Parse)?;
    program.sequence.name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(program)
}

fn run(file: &Path, common: &Common) -> nvsim::Result<String> {
    let program = read_program(file)?;
    let opts = common.apply(program.apply(SimOptions::default()));
    let sim = Simulator::new(common.params()?, opts)?;
    let init = program.init.unwrap_or(InitKind::Ideal);
    let observable = program.measure.unwrap_or(Observable::Fluorescence);
    match program.sweep {
        Some(sweep) => {
            let res = sweep_delay(&sim, &program.sequence, init, &sweep.taus(), observable)?;
            match common.out {
                OutFormat::Csv => Ok(res.to_csv()),
                OutFormat::Json => res.to_json(),
            }
        }
        None => {
            let res = run_point(&sim, &program.sequence, init, observable)?;
            match common.out {
                OutFormat::Csv => Ok(res.to_csv()),
                OutFormat::Json => res.to_json(),
            }
        }
    }
}

fn repro(dataset: Dataset, common: &Common, trials: usize) -> nvsim::Result<String> {
    let params = common.params()?;
    let sim = Simulator::new(params.clone(), common.apply(SimOptions::default()))?;
    match dataset {
        Dataset::Fig3 => {
            let res = run_cr_sweep(&sim, &linspace(0.0, 10.0, 101))?;
            match common.out {
                OutFormat::Csv => Ok(res.to_csv()),
                OutFormat::Json => res.to_json(),
            }
        }
        Dataset::Fig2 => {
            let taus = linspace(0.0, evolution_period(&params)?, 101);
            let control0 = run_bloch(&sim, 0, &taus)?;
            let control1 = run_bloch(&sim, 1, &taus)?;
            match common.out {
                OutFormat::Csv => {
                    let mut out = String::from("tau_us,x0,y0,z0,x1,y1,z1\n");
                    for (a, b) in control0.iter().zip(&control1) {
                        let vals = [a.tau, a.x, a.y, a.z, b.x, b.y, b.z];
                        let cells: Vec<String> = vals.iter().map(|v| format_value(*v)).collect();
                        out.push_str(&cells.join(","));
                        out.push('\n');
                    }
                    Ok(out)
                }
                OutFormat::Json => Ok(serde_json::to_string_pretty(&json!({
                    "electron0": control0,
                    "electron1": control1,
                    "params": params,
                }))?),
            }
        }
        Dataset::Fig5 => {
            let bell = run_bell(&sim)?;
            let mc = bell_monte_carlo(&params, trials, common.seed.unwrap_or(0))?;
            let op = bell.rho.as_operator();
            match common.out {
                OutFormat::Csv => {
                    let mut out = String::from("quantity,value\n");
                    let mut row = |k: &str, v: f64| out.push_str(&format!("{k},{}\n", format_value(v)));
                    row("fidelity", bell.fidelity);
                    row("mc_trials", mc.trials as f64);
                    row("mc_shots", mc.shots as f64);
                    row("mc_mean", mc.mean);
                    row("mc_std", mc.std_dev);
                    row("mc_min", mc.min);
                    row("mc_max", mc.max);
                    for i in 0..4 {
                        for j in 0..4 {
                            row(&format!("rho{i}{j}_re"), op[(i, j)].re);
                            row(&format!("rho{i}{j}_im"), op[(i, j)].im);
                        }
                    }
                    Ok(out)
                }
                OutFormat::Json => {
                    let rho: Vec<Vec<[f64; 2]>> = (0..4)
                        .map(|i| (0..4).map(|j| [op[(i, j)].re, op[(i, j)].im]).collect())
                        .collect();
                    Ok(serde_json::to_string_pretty(&json!({
                        "mode": sim.options().mode,
                        "fidelity": bell.fidelity,
                        "rho": rho,
                        "monte_carlo": mc,
                        "params": params,
                    }))?)
                }
            }
        }
        Dataset::Speed => {
            let report = speed_report(&params)?;
            match common.out {
                OutFormat::Csv => Ok(report.to_csv()),
                OutFormat::Json => Ok(serde_json::to_string_pretty(&report)?),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (result, source) = match &cli.command {
        Command::Run { file, common } => (run(file, common), file.display().to_string()),
        Command::Repro { dataset, common, trials } => (repro(*dataset, common, *trials), String::new()),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(Error::Parse(diags)) => {
            for d in &diags {
                eprintln!("{source}:{d}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_physics() { 2 } else { 1 })
        }
    }
}

