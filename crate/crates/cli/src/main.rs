use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use paraproj::recovery::{cs_demo, CsDemoConfig};
use paraproj::stats::{default_battery, report_csv, BatteryConfig};
use paraproj::{
    adjoint_decimated, forward_decimated, DecimationSchedule, GivensTransform, Lattice, ParaunitarySpec,
    ProjectionSpec, SignalFile, SignalFileError, UnitarySpec,
};

/// Seeded random orthogonal transforms, paraunitary filter banks and
/// adaptive compressive sampling.
#[derive(Debug, Parser)]
#[command(name = "paraproj", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Direction {
    Forward,
    Inverse,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DecimatedDirection {
    Forward,
    Adjoint,
}

#[derive(Debug, Args)]
struct Io {
    /// Input signal file
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    /// Output signal file
    #[arg(long = "out", value_name = "PATH")]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct Transform {
    /// Root seed, 64-bit hex (0x prefix optional)
    #[arg(long, value_parser = parse_seed, default_value = "0x1")]
    seed: u64,
    /// Block size M
    #[arg(long)]
    m: usize,
    /// Angle subsets N_s (default: M)
    #[arg(long)]
    subsets: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dense matrix of the first N rows of a transform, row-major, block size M
    Generate {
        #[command(flatten)]
        t: Transform,
        /// Rows to keep (default: M)
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "out", value_name = "PATH")]
        output: PathBuf,
    },
    /// M-point random orthogonal transform of every block
    Unitary {
        #[arg(value_enum)]
        direction: Direction,
        #[command(flatten)]
        t: Transform,
        #[command(flatten)]
        io: Io,
    },
    /// First N outputs of the transform for every M-sample block
    Project {
        #[command(flatten)]
        t: Transform,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        io: Io,
    },
    /// Transpose of `project`: N-sample blocks back to M samples
    ProjectTranspose {
        #[command(flatten)]
        t: Transform,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        io: Io,
    },
    /// Streamed paraunitary lattice, flushed with K zero blocks
    Paraunitary {
        #[arg(value_enum)]
        direction: Direction,
        #[command(flatten)]
        t: Transform,
        /// Lattice order K
        #[arg(long = "k-order")]
        k_order: usize,
        #[command(flatten)]
        io: Io,
    },
    /// Under-decimated analysis and its adjoint
    Decimated {
        #[arg(value_enum)]
        direction: DecimatedDirection,
        #[command(flatten)]
        t: Transform,
        #[arg(long = "k-order")]
        k_order: usize,
        /// Constant compression: keep one block in every q
        #[arg(long, conflicts_with = "schedule", required_unless_present = "schedule")]
        q: Option<usize>,
        /// Schedule CSV with rows `window_index,q,blocks`
        #[arg(long, value_name = "CSV")]
        schedule: Option<PathBuf>,
        /// Length of the adjoint output in blocks (default: the schedule's span)
        #[arg(long)]
        blocks: Option<usize>,
        #[command(flatten)]
        io: Io,
    },
    /// Statistical battery; CSV `test,statistic,threshold,pass`
    Stats {
        #[arg(long, value_parser = parse_seed)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        /// Members of every ensemble in the battery
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long = "out", value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Throughput and pruning work for q in {1, 2, K+1}
    Bench {
        #[arg(long, value_parser = parse_seed, default_value = "0x1")]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        m: usize,
        #[arg(long = "k-order", default_value_t = 4)]
        k_order: usize,
        /// Input length in blocks
        #[arg(long, default_value_t = 1000)]
        blocks: usize,
        #[arg(long = "out", value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Sparse recovery through the maximally decimated operator
    CsDemo {
        #[arg(long, value_parser = parse_seed)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 16)]
        m: usize,
        #[arg(long = "k-order", default_value_t = 3)]
        k_order: usize,
        #[arg(long, default_value_t = 3)]
        sparsity: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long = "out", value_name = "PATH")]
        output: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    /// Bad arguments, malformed input or a failed check.
    Validation(String),
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Io(_) => 2,
        }
    }
}

impl From<paraproj::Error> for Failure {
    fn from(e: paraproj::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn validation(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
    if digits.is_empty() || digits.len() > 16 {
        return Err(format!("expected 1 to 16 hex digits, got {s:?}"));
    }
    u64::from_str_radix(digits, 16).map_err(|e| format!("{s:?}: {e}"))
}

fn read_signal(path: &Path) -> Result<SignalFile, Failure> {
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    SignalFile::read_from(BufReader::new(file)).map_err(|e| match e {
        SignalFileError::Io(e) => io_failure(path, e),
        other => validation(format!("--in {}: {other}", path.display())),
    })
}

fn write_signal(path: &Path, f: &SignalFile) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| io_failure(path, e))?;
    let mut w = BufWriter::new(file);
    f.write_to(&mut w).map_err(|e| match e {
        SignalFileError::Io(e) => io_failure(path, e),
        other => validation(format!("--out {}: {other}", path.display())),
    })?;
    w.flush().map_err(|e| io_failure(path, e))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| io_failure(p, e)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(format!("stdout: {e}"))),
    }
}

/// Splits the input into blocks of `size`, checking the header's block size.
fn input_blocks(f: &SignalFile, size: usize, flag: &str) -> Result<Vec<Vec<f64>>, Failure> {
    if f.block_size != size {
        return Err(validation(format!(
            "block size: input header says {}, but {flag} is {size}",
            f.block_size
        )));
    }
    f.blocks_of(size).ok_or_else(|| {
        validation(format!(
            "element count: {} samples is not a multiple of {flag} = {size}",
            f.samples.len()
        ))
    })
}

fn unitary_spec(t: &Transform) -> Result<UnitarySpec, Failure> {
    Ok(UnitarySpec::with_subsets(t.m, t.seed, t.subsets.unwrap_or(t.m.max(1)))?)
}

fn paraunitary_spec(t: &Transform, k: usize) -> Result<ParaunitarySpec, Failure> {
    Ok(ParaunitarySpec::with_subsets(t.m, k, t.seed, t.subsets.unwrap_or(t.m.max(1)))?)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate { t, n, output } => {
            let spec = unitary_spec(&t)?;
            let n = n.unwrap_or(t.m);
            ProjectionSpec::new(spec, n)?;
            let u = GivensTransform::new(spec).materialize();
            let rows: Vec<f64> = (0..n).flat_map(|i| u.row(i).iter().copied().collect::<Vec<_>>()).collect();
            write_signal(&output, &SignalFile::new(t.m, rows))
        }
        Command::Unitary { direction, t, io } => {
            let spec = unitary_spec(&t)?;
            let mut f = read_signal(&io.input)?;
            input_blocks(&f, t.m, "--m")?;
            let mut g = GivensTransform::new(spec);
            for block in f.samples.chunks_mut(t.m) {
                match direction {
                    Direction::Forward => g.apply(block)?,
                    Direction::Inverse => g.apply_inverse(block)?,
                }
            }
            write_signal(&io.output, &f)
        }
        Command::Project { t, n, io } => {
            let p = ProjectionSpec::new(unitary_spec(&t)?, n)?;
            let f = read_signal(&io.input)?;
            let mut out = Vec::new();
            for block in input_blocks(&f, t.m, "--m")? {
                out.extend(paraproj::project(&p, &block)?);
            }
            write_signal(&io.output, &SignalFile::new(n, out))
        }
        Command::ProjectTranspose { t, n, io } => {
            let p = ProjectionSpec::new(unitary_spec(&t)?, n)?;
            let f = read_signal(&io.input)?;
            let mut out = Vec::new();
            for block in input_blocks(&f, n, "--n")? {
                out.extend(paraproj::project_transpose(&p, &block)?);
            }
            write_signal(&io.output, &SignalFile::new(t.m, out))
        }
        Command::Paraunitary {
            direction,
            t,
            k_order,
            io,
        } => {
            let spec = paraunitary_spec(&t, k_order)?;
            let f = read_signal(&io.input)?;
            let blocks = input_blocks(&f, t.m, "--m")?;
            let mut lattice = match direction {
                Direction::Forward => Lattice::forward(spec),
                Direction::Inverse => Lattice::inverse(spec),
            };
            let mut out = Vec::with_capacity(blocks.len() + k_order);
            for b in &blocks {
                out.push(lattice.process(b)?);
            }
            out.extend(lattice.flush());
            write_signal(&io.output, &SignalFile::from_blocks(t.m, &out))
        }
        Command::Decimated {
            direction,
            t,
            k_order,
            q,
            schedule,
            blocks,
            io,
        } => {
            let spec = paraunitary_spec(&t, k_order)?;
            let f = read_signal(&io.input)?;
            let input = input_blocks(&f, t.m, "--m")?;
            let sched = match (&schedule, q) {
                (Some(path), _) => {
                    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
                    DecimationSchedule::from_csv(&text)
                        .map_err(|e| validation(format!("--schedule {}: {e}", path.display())))?
                }
                (None, Some(q)) => {
                    let span = match direction {
                        DecimatedDirection::Forward => input.len(),
                        DecimatedDirection::Adjoint => blocks.unwrap_or(input.len() * q),
                    };
                    DecimationSchedule::covering(q, span)?
                }
                (None, None) => return Err(validation("--q or --schedule is required")),
            };
            match direction {
                DecimatedDirection::Forward => {
                    let run = forward_decimated(spec, &input, &sched)?;
                    write_signal(&io.output, &SignalFile::from_blocks(t.m, &run.blocks()))
                }
                DecimatedDirection::Adjoint => {
                    let total = blocks.unwrap_or(sched.total_blocks());
                    let out = adjoint_decimated(spec, &input, &sched, total)?;
                    write_signal(&io.output, &SignalFile::from_blocks(t.m, &out))
                }
            }
        }
        Command::Stats {
            seed,
            alpha,
            trials,
            output,
        } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(validation(format!("--alpha: {alpha} is outside (0, 1)")));
            }
            let mut cfg = BatteryConfig {
                alpha,
                ..BatteryConfig::default()
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = trials {
                cfg.gaussian_count = n;
                cfg.correlation_count = n;
                cfg.cross_count = n;
            }
            let rows = default_battery(&cfg).map_err(|e| validation(format!("--trials: {e}")))?;
            write_text(output.as_deref(), &report_csv(&rows))?;
            if rows.iter().all(|r| r.pass) {
                Ok(())
            } else {
                let failed: Vec<_> = rows.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
                Err(validation(format!("failed: {}", failed.join(", "))))
            }
        }
        Command::Bench {
            seed,
            m,
            k_order,
            blocks,
            output,
        } => {
            let spec = ParaunitarySpec::new(m, k_order, seed)?;
            let mut stream = paraproj::SeedStream::new(seed);
            let input: Vec<Vec<f64>> = (0..blocks)
                .map(|_| (0..m).map(|_| 2.0 * stream.uniform_unit() - 1.0).collect())
                .collect();
            let claimed = if k_order == 0 {
                1.0
            } else {
                k_order as f64 - 1.0 / (2.0 * k_order as f64)
            };
            let mut qs = vec![1, 2, k_order + 1];
            qs.dedup();
            let mut csv = String::from(
                "q,blocks,seconds,samples_per_sec,executed_stages,baseline_stages,stage_ratio,rotation_ratio,claimed_ratio\n",
            );
            for q in qs {
                let sched = DecimationSchedule::covering(q, blocks)?;
                let start = Instant::now();
                let run = forward_decimated(spec, &input, &sched)?;
                let secs = start.elapsed().as_secs_f64();
                let w = run.work_report();
                let _ = writeln!(
                    csv,
                    "{q},{blocks},{secs:.6},{:.1},{},{},{:.6},{:.6},{claimed:.6}",
                    (blocks * m) as f64 / secs.max(1e-12),
                    w.executed_stages,
                    w.baseline_stages,
                    w.stage_ratio(),
                    w.rotation_ratio()
                );
            }
            write_text(output.as_deref(), &csv)
        }
        Command::CsDemo {
            seed,
            m,
            k_order,
            sparsity,
            trials,
            output,
        } => {
            let mut cfg = CsDemoConfig {
                m,
                order: k_order,
                sparsity,
                trials,
                ..CsDemoConfig::default()
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let r = cs_demo(&cfg)?;
            let csv = format!(
                "sparsity,trials,exact_support,rate,measurements,signal_length\n{},{},{},{:.6},{},{}\n",
                sparsity,
                r.trials,
                r.exact_support,
                r.rate(),
                r.measurements,
                r.signal_length
            );
            write_text(output.as_deref(), &csv)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are validation failures; --help and --version succeed
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Validation(msg) => eprintln!("error: {msg}"),
                Failure::Io(msg) => eprintln!("i/o error: {msg}"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
