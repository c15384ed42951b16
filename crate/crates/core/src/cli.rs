//! Command-line surface: `test`, `emit` and `list`.
//!
//! Exit codes: 0 all pass, 1 weak results only, 2 any failure or test not
//! run, 64 usage error, 66 input/output error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::battery::{self, BatteryError, TestConfig, TestId};
use crate::generators::{EmitError, GeneratorId, LcgParams};
use crate::ingest::{self, IngestError, RewindPolicy, WidthMode, WordStream};
use crate::report::{self, Format, Verbosity};
use crate::Width;

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 66;

/// Byte budgets of the size presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizePreset {
    Tiny,
    Small,
    Standard,
    Big,
    Huge,
    Tera,
    Explicit(u64),
}

impl SizePreset {
    pub fn bytes(self) -> u64 {
        match self {
            SizePreset::Tiny => 10_000_000,
            SizePreset::Small => 100_000_000,
            SizePreset::Standard => 1_000_000_000,
            SizePreset::Big => 10_000_000_000,
            SizePreset::Huge => 100_000_000_000,
            SizePreset::Tera => 1_000_000_000_000,
            SizePreset::Explicit(n) => n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Input {
    StdinBinary,
    BinaryFile(PathBuf),
    TextFile(PathBuf),
    Generator {
        id: GeneratorId,
        seed: u64,
        params: Option<LcgParams>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TestInvocation {
    pub input: Input,
    pub width: WidthMode,
    /// Set when the user asked for a width explicitly; generators otherwise
    /// use their native width.
    pub width_explicit: bool,
    pub size: SizePreset,
    pub tests: Vec<TestId>,
    pub rewind: RewindPolicy,
    pub verbosity: Verbosity,
    pub format: Format,
    pub second_level_reps: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmitInvocation {
    pub generator: GeneratorId,
    pub seed: u64,
    pub params: Option<LcgParams>,
    pub width: Width,
    /// `None` streams until the reader goes away.
    pub bytes: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CliInvocation {
    Test(TestInvocation),
    Emit(EmitInvocation),
    List,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments; the message is one line.
    Usage(String),
    /// `--help` / `--version` output.
    Display(String),
}

#[derive(Parser, Debug)]
#[command(
    name = "prngtest",
    version,
    about = "Statistical test battery for pseudorandom number generators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the battery on standard input, a file or a built-in generator.
    Test(TestArgs),
    /// Write a built-in generator's words to standard output (little-endian).
    Emit(EmitArgs),
    /// List tests and generators.
    List,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FileFormat {
    Binary,
    Text,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("input").required(true).args(["stdin32", "stdin64", "stdin", "file", "generator"])))]
#[command(group(ArgGroup::new("size").args(["tiny", "small", "standard", "big", "huge", "tera", "bytes"])))]
#[command(group(ArgGroup::new("width").args(["w32", "w64"])))]
struct TestArgs {
    /// Read 32-bit words from standard input.
    #[arg(long)]
    stdin32: bool,
    /// Read 64-bit words from standard input.
    #[arg(long)]
    stdin64: bool,
    /// Read standard input, word width chosen automatically (64-bit).
    #[arg(long)]
    stdin: bool,
    /// Read from a file.
    #[arg(short = 'f', long)]
    file: Option<PathBuf>,
    /// Format of --file.
    #[arg(long, value_enum, default_value = "binary", requires = "file")]
    format: FileFormat,
    /// Test a built-in generator (see `list`).
    #[arg(short = 'g', long)]
    generator: Option<String>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Constants for `-g lcg`, as a,c,m.
    #[arg(long)]
    lcg: Option<String>,
    /// Word width for binary files and generators.
    #[arg(long)]
    w32: bool,
    #[arg(long)]
    w64: bool,
    /// Run all tests (the default when no -d is given).
    #[arg(short = 'a', long = "all")]
    all: bool,
    /// Run one test by name or index; repeatable.
    #[arg(short = 'd', long = "test", conflicts_with = "all")]
    tests: Vec<String>,
    /// 10 MB
    #[arg(long)]
    tiny: bool,
    /// 100 MB
    #[arg(long)]
    small: bool,
    /// 1 GB (default)
    #[arg(long)]
    standard: bool,
    /// 10 GB
    #[arg(long)]
    big: bool,
    /// 100 GB
    #[arg(long)]
    huge: bool,
    /// 1 TB
    #[arg(long)]
    tera: bool,
    /// Explicit byte budget.
    #[arg(long)]
    bytes: Option<u64>,
    /// Re-read a file from the start when it runs out.
    #[arg(long, overrides_with = "no_rewind")]
    rewind: bool,
    /// Stop at end of input (default).
    #[arg(long = "no-rewind")]
    no_rewind: bool,
    /// Print every result, not only anomalies.
    #[arg(long)]
    full: bool,
    /// Print level: -p1 is the same as --full.
    #[arg(short = 'p', value_name = "LEVEL")]
    print_level: Option<u8>,
    /// Emit a JSON report.
    #[arg(long)]
    json: bool,
    /// Second-level repetitions per test (0 = off, otherwise >= 5).
    #[arg(long, default_value_t = 0)]
    reps: usize,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("width").args(["w32", "w64"])))]
struct EmitArgs {
    #[arg(short = 'g', long)]
    generator: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Constants for `-g lcg`, as a,c,m.
    #[arg(long)]
    lcg: Option<String>,
    #[arg(long)]
    w32: bool,
    /// 64-bit words (default).
    #[arg(long)]
    w64: bool,
    /// Stop after this many bytes; without it, emit until the pipe closes.
    #[arg(long)]
    bytes: Option<u64>,
}

fn parse_generator(
    name: &str,
    lcg: Option<&str>,
) -> Result<(GeneratorId, Option<LcgParams>), CliError> {
    let id: GeneratorId = name.parse().map_err(|e| CliError::Usage(format!("{e}")))?;
    let params = lcg
        .map(|s| s.parse::<LcgParams>())
        .transpose()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if params.is_some() && id != GeneratorId::Lcg {
        return Err(CliError::Usage("--lcg only applies to -g lcg".into()));
    }
    Ok((id, params))
}

/// Parses a full argument vector (including the program name).
pub fn parse_args<I, T>(argv: I) -> Result<CliInvocation, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp
        | clap::error::ErrorKind::DisplayVersion
        | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            CliError::Display(e.to_string())
        }
        _ => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ")
                .to_string();
            CliError::Usage(first)
        }
    })?;
    match cli.command {
        Command::List => Ok(CliInvocation::List),
        Command::Emit(a) => {
            let (generator, params) = parse_generator(&a.generator, a.lcg.as_deref())?;
            let width = if a.w32 { Width::W32 } else { Width::W64 };
            if let Some(b) = a.bytes {
                if b % width.bytes() as u64 != 0 {
                    return Err(CliError::Usage(format!(
                        "--bytes {b} is not a multiple of the {}-byte word",
                        width.bytes()
                    )));
                }
            }
            Ok(CliInvocation::Emit(EmitInvocation {
                generator,
                seed: a.seed,
                params,
                width,
                bytes: a.bytes,
            }))
        }
        Command::Test(a) => test_invocation(a).map(CliInvocation::Test),
    }
}

fn test_invocation(a: TestArgs) -> Result<TestInvocation, CliError> {
    let flag_width = if a.w32 {
        Some(Width::W32)
    } else if a.w64 {
        Some(Width::W64)
    } else {
        None
    };
    let (input, width) = if a.stdin32 {
        (Input::StdinBinary, WidthMode::Fixed(Width::W32))
    } else if a.stdin64 {
        (Input::StdinBinary, WidthMode::Fixed(Width::W64))
    } else if a.stdin {
        (
            Input::StdinBinary,
            flag_width.map_or(WidthMode::Auto, WidthMode::Fixed),
        )
    } else if let Some(path) = a.file {
        let input = match a.format {
            FileFormat::Binary => Input::BinaryFile(path),
            FileFormat::Text => Input::TextFile(path),
        };
        (input, flag_width.map_or(WidthMode::Auto, WidthMode::Fixed))
    } else if let Some(name) = a.generator.as_deref() {
        let (id, params) = parse_generator(name, a.lcg.as_deref())?;
        (
            Input::Generator {
                id,
                seed: a.seed,
                params,
            },
            flag_width.map_or(WidthMode::Auto, WidthMode::Fixed),
        )
    } else {
        return Err(CliError::Usage(
            "choose an input: --stdin32, --stdin64, --stdin, -f or -g".into(),
        ));
    };
    if a.lcg.is_some() && a.generator.is_none() {
        return Err(CliError::Usage("--lcg only applies to -g lcg".into()));
    }

    let size = if a.tiny {
        SizePreset::Tiny
    } else if a.small {
        SizePreset::Small
    } else if a.big {
        SizePreset::Big
    } else if a.huge {
        SizePreset::Huge
    } else if a.tera {
        SizePreset::Tera
    } else if let Some(n) = a.bytes {
        if n == 0 {
            return Err(CliError::Usage("--bytes must be positive".into()));
        }
        SizePreset::Explicit(n)
    } else {
        SizePreset::Standard
    };

    let tests = if a.tests.is_empty() {
        TestId::ORDER.to_vec()
    } else {
        let mut v = Vec::new();
        for t in &a.tests {
            let id: TestId = t
                .parse()
                .map_err(|e: BatteryError| CliError::Usage(e.to_string()))?;
            if !v.contains(&id) {
                v.push(id);
            }
        }
        v
    };

    let verbosity = match (a.full, a.print_level) {
        (true, _) => Verbosity::Full,
        (false, Some(0)) | (false, None) => Verbosity::AnomaliesOnly,
        (false, Some(1)) => Verbosity::Full,
        (false, Some(n)) => return Err(CliError::Usage(format!("-p accepts 0 or 1, got {n}"))),
    };
    if a.reps != 0 && a.reps < 5 {
        return Err(CliError::Usage(format!(
            "--reps must be 0 or at least 5, got {}",
            a.reps
        )));
    }

    Ok(TestInvocation {
        input,
        width,
        width_explicit: flag_width.is_some() || a.stdin32 || a.stdin64,
        size,
        tests,
        rewind: if a.rewind {
            RewindPolicy::Rewind
        } else {
            RewindPolicy::StopWithWarning
        },
        verbosity,
        format: if a.json { Format::Json } else { Format::Text },
        second_level_reps: a.reps,
    })
}

/// Process-level standard streams, injectable for tests.
pub struct Stdio<'a> {
    pub stdin: Box<dyn Read + Send>,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

/// Runs a parsed invocation and returns the process exit code.
pub fn run(invocation: CliInvocation, io: Stdio<'_>) -> i32 {
    match invocation {
        CliInvocation::List => {
            let _ = write_list(io.stdout);
            0
        }
        CliInvocation::Emit(e) => run_emit(e, io),
        CliInvocation::Test(t) => run_test(t, io),
    }
}

fn write_list(out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "tests (run in this order):")?;
    for t in TestId::ORDER {
        writeln!(out, "  {}  {:<26}{}", t.index(), t.name(), t.description())?;
    }
    writeln!(out, "generators:")?;
    for g in GeneratorId::ALL {
        writeln!(out, "  {:<16}{}", g.name(), g.description())?;
    }
    out.flush()
}

fn run_emit(e: EmitInvocation, io: Stdio<'_>) -> i32 {
    let mut generator = match e.generator.build(e.seed, e.params) {
        Ok(g) => g,
        Err(err) => {
            let _ = writeln!(io.stderr, "prngtest: {err}");
            return EXIT_USAGE;
        }
    };
    let mut out = BufWriter::with_capacity(1 << 16, io.stdout);
    let outcome = match e.bytes {
        Some(n) => generator.emit_stream(e.width, n, &mut out).map(|_| ()),
        None => Err(EmitError::Sink(generator.emit_forever(e.width, &mut out))),
    };
    let outcome = outcome.and_then(|_| out.flush().map_err(EmitError::Sink));
    match outcome {
        Ok(()) => 0,
        // the reader is done with us
        Err(EmitError::Sink(err)) if err.kind() == io::ErrorKind::BrokenPipe => 0,
        Err(EmitError::Sink(err)) => {
            let _ = writeln!(io.stderr, "prngtest: write failed: {err}");
            EXIT_IO
        }
        Err(err @ EmitError::UnalignedBudget { .. }) => {
            let _ = writeln!(io.stderr, "prngtest: {err}");
            EXIT_USAGE
        }
    }
}

fn open_stream(
    t: &TestInvocation,
    stdin: Box<dyn Read + Send>,
) -> Result<(WordStream, String), OpenError> {
    let budget = t.size.bytes();
    let (stream, what) = match &t.input {
        Input::StdinBinary => (
            WordStream::from_reader(stdin, t.width, budget)?,
            "stdin".to_string(),
        ),
        Input::BinaryFile(path) => (
            WordStream::open_file(path, t.width, budget)?,
            format!("binary file {}", path.display()),
        ),
        Input::TextFile(path) => {
            let file = File::open(path).map_err(IngestError::from)?;
            let (_, stream) = ingest::parse_text(BufReader::new(file))?;
            (
                stream.with_budget(budget),
                format!("text file {}", path.display()),
            )
        }
        Input::Generator { id, seed, params } => {
            let g = id
                .build(*seed, *params)
                .map_err(|e| OpenError::Usage(e.to_string()))?;
            let width = match t.width {
                WidthMode::Fixed(w) => w,
                WidthMode::Auto => g.native_width(),
            };
            let what = format!("generator {}", g.describe());
            (WordStream::from_generator(g, width, budget), what)
        }
    };
    let descriptor = format!("{what}, {} words, budget {} bytes", stream.width(), budget);
    Ok((stream.with_rewind_policy(t.rewind), descriptor))
}

/// Failure before a report exists.
#[derive(Debug)]
enum OpenError {
    Usage(String),
    Io(IngestError),
}

impl From<IngestError> for OpenError {
    fn from(e: IngestError) -> Self {
        OpenError::Io(e)
    }
}

fn run_test(t: TestInvocation, io: Stdio<'_>) -> i32 {
    let (mut stream, descriptor) = match open_stream(&t, io.stdin) {
        Ok(s) => s,
        Err(OpenError::Usage(msg)) => {
            let _ = writeln!(io.stderr, "prngtest: {msg}");
            return EXIT_USAGE;
        }
        Err(OpenError::Io(e)) => {
            let _ = writeln!(io.stderr, "prngtest: cannot read input: {e}");
            return EXIT_IO;
        }
    };
    let cfg = TestConfig {
        second_level_reps: t.second_level_reps,
        ..TestConfig::default()
    };
    let report = match battery::run_battery(&mut stream, &cfg, &t.tests, &descriptor) {
        Ok(r) => r,
        Err(BatteryError::Ingest(e)) => {
            let _ = writeln!(io.stderr, "prngtest: cannot read input: {e}");
            return EXIT_IO;
        }
        Err(e) => {
            let _ = writeln!(io.stderr, "prngtest: {e}");
            return EXIT_USAGE;
        }
    };
    for w in &report.warnings {
        let _ = writeln!(io.stderr, "warning: {w}");
    }
    let text = report::render(&report, t.format, t.verbosity);
    match io
        .stdout
        .write_all(text.as_bytes())
        .and_then(|_| io.stdout.flush())
    {
        Ok(()) => report::exit_code(&report),
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => report::exit_code(&report),
        Err(e) => {
            let _ = writeln!(io.stderr, "prngtest: write failed: {e}");
            EXIT_IO
        }
    }
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    match parse_args(argv) {
        Ok(inv) => run(
            inv,
            Stdio {
                stdin: Box::new(io::stdin()),
                stdout: &mut out,
                stderr: &mut err,
            },
        ),
        Err(CliError::Display(text)) => {
            let _ = write!(out, "{text}");
            0
        }
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "prngtest: {msg}");
            let _ = writeln!(err, "try 'prngtest --help'");
            EXIT_USAGE
        }
    }
}
