use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use quasispec_core::arithmetic::{FrequencyRecord, Precision};
use quasispec_core::io::Format;
use quasispec_core::potential::Potential;
use quasispec_core::Error;

use crate::commands::{dispatch, Context, Outcome, Plot};
use crate::{Cli, Command};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Serialize)]
struct ErrorRecord {
    code: &'static str,
    message: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    params: Value,
    alpha: Option<FrequencyRecord>,
    potential: Option<Potential>,
    precision: &'static str,
    threads: usize,
    status: &'static str,
    error: Option<ErrorRecord>,
    summary: Value,
    data_file: Option<String>,
    rows: usize,
    /// Wall-clock time of the run; the only field that varies between
    /// identical runs.
    timestamp: String,
}

struct Paths {
    data: PathBuf,
    manifest: PathBuf,
    stem: PathBuf,
}

impl Paths {
    fn new(out: Option<&Path>, command: &str, format: Format) -> Self {
        let data = out
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(format!("{command}.{}", format.extension())));
        let stem = data.with_extension("");
        Paths {
            manifest: sibling(&stem, "manifest.json"),
            data,
            stem,
        }
    }
}

/// `<stem>.<suffix>`
fn sibling(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn exit_code(err: &Error) -> u8 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INVALID
    }
}

fn command_params(cli: &Cli) -> Value {
    let args = match &cli.command {
        Command::Resonances(a) => serde_json::to_value(a),
        Command::Lyapunov(a) => serde_json::to_value(a),
        Command::Mfunction(a) => serde_json::to_value(a),
        Command::Subordinacy(a) => serde_json::to_value(a),
        Command::Holder(a) => serde_json::to_value(a),
        Command::Ids(a) => serde_json::to_value(a),
        Command::Thouless(a) => serde_json::to_value(a),
        Command::Gaps(a) => serde_json::to_value(a),
        Command::TxOracle(a) => serde_json::to_value(a),
        Command::Reduce(a) => serde_json::to_value(a),
    };
    json!({
        "common": serde_json::to_value(&cli.common).unwrap_or(Value::Null),
        "command": args.unwrap_or(Value::Null),
    })
}

fn gnuplot_stub(data: &Path, plot: &Plot) -> String {
    let file = data.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned());
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\n");
    match (plot.logx, plot.logy) {
        (true, true) => s.push_str("set logscale xy\n"),
        (true, false) => s.push_str("set logscale x\n"),
        (false, true) => s.push_str("set logscale y\n"),
        (false, false) => {}
    }
    s.push_str(&format!("set xlabel '{}'\nset ylabel '{}'\n", plot.x, plot.y));
    s.push_str(&format!(
        "plot '{file}' using '{}':'{}' with linespoints\npause -1\n",
        plot.x, plot.y
    ));
    s
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_table(path: &Path, outcome: &Outcome, format: Format) -> Result<(), Error> {
    let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    (outcome.table.write)(format, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Runs the command, writes the artifacts and returns the exit status.
pub fn run(cli: &Cli) -> u8 {
    let common = &cli.common;
    let format = common.format.0;
    let precision = common.precision.map_or(Precision::Extended, |p| p.0);
    let paths = Paths::new(common.out.as_deref(), cli.command.name(), format);

    let mut manifest = Manifest {
        tool: "quasispec",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        params: command_params(cli),
        alpha: None,
        potential: None,
        precision: precision.as_str(),
        threads: 0,
        status: "ok",
        error: None,
        summary: Value::Null,
        data_file: None,
        rows: 0,
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    };

    let result = execute(cli, precision, &paths, &mut manifest);
    let code = match &result {
        Ok(()) => EXIT_OK,
        Err(err) => {
            manifest.status = "failed";
            manifest.error = Some(ErrorRecord {
                code: err.code(),
                message: err.to_string(),
            });
            eprintln!("quasispec {}: {err}", cli.command.name());
            exit_code(err)
        }
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    if let Err(err) = write_file(&paths.manifest, text.as_bytes()) {
        eprintln!("quasispec: {err}");
        return code.max(EXIT_INVALID);
    }
    code
}

fn execute(cli: &Cli, precision: Precision, paths: &Paths, manifest: &mut Manifest) -> Result<(), Error> {
    let common = &cli.common;
    let format = common.format.0;
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    manifest.threads = rayon::current_num_threads();
    if common.gnuplot_stub && format != Format::Csv {
        return Err(Error::InvalidArgument("--gnuplot-stub needs --format csv".into()));
    }

    let ctx = Context::new(common, precision)?;
    manifest.alpha = Some(ctx.freq.to_record());
    manifest.potential = Some(ctx.potential.clone());

    let outcome = dispatch(&cli.command, &ctx)?;
    write_table(&paths.data, &outcome, format)?;
    manifest.data_file = Some(paths.data.display().to_string());
    manifest.rows = outcome.table.rows;
    manifest.summary = outcome.summary.clone();
    for (suffix, contents) in &outcome.extra {
        write_file(&sibling(&paths.stem, suffix), contents.as_bytes())?;
    }
    if common.gnuplot_stub {
        let script = gnuplot_stub(&paths.data, &outcome.table.plot);
        write_file(&sibling(&paths.stem, "gp"), script.as_bytes())?;
    }
    match outcome.error {
        Some(err) => Err(err),
        None => Ok(()),
    }
}
