//! `quasispec`: reproducible spectral experiments on quasiperiodic
//! Schrödinger operators, written as CSV or JSON tables with a run manifest.

// `!(x > 0.0)` rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use quasispec_core::arithmetic::Precision;
use quasispec_core::io::Format;

const AFTER_HELP: &str = "\
Every run writes the data file and <stem>.manifest.json next to it. The
manifest echoes the resolved parameters, tool version and precision, and
on failure an error record {code, message}.

Exit status: 0 on success, 2 on invalid input, 3 when a numerical method
fails to converge (rows computed before the failure are still written).";

#[derive(Debug, Parser)]
#[command(name = "quasispec", version, about, after_help = AFTER_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Frequency: `golden`, `silver`, a decimal string, or `cf:a1,a2,...`
    #[arg(long, global = true, default_value = "golden")]
    pub alpha: String,
    /// Continued-fraction depth used when expanding the frequency
    #[arg(long, global = true, default_value_t = 20)]
    pub cf_depth: usize,
    /// Phase theta
    #[arg(long, global = true, default_value_t = 0.0, allow_negative_numbers = true)]
    pub theta: f64,
    /// Potential family: amo, free or trigpoly
    #[arg(long, global = true, default_value = "amo")]
    pub potential: String,
    /// Coupling for `--potential amo`: v(x) = 2 lambda cos(2 pi x)
    #[arg(long, global = true, default_value_t = 0.5, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Modes for `--potential trigpoly` as `k:re[:im],...` (k >= 0)
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub coeffs: Option<String>,
    /// Read the potential from a JSON file instead
    #[arg(long, global = true)]
    pub potential_json: Option<PathBuf>,
    /// Relative tolerance of the m-function recursion
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol: f64,
    /// Output format
    #[arg(long, global = true, default_value = "csv", value_parser = parse_format)]
    pub format: FormatArg,
    /// Data file; defaults to `<command>.<format>`
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for grid sweeps (output does not depend on this)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also write `<stem>.gp`, a gnuplot script for the CSV output
    #[arg(long, global = true)]
    pub gnuplot_stub: bool,
    /// Floating model for frequency arithmetic: double or extended
    #[arg(long, global = true, env = "QUASISPEC_PRECISION", value_parser = parse_precision)]
    pub precision: Option<PrecisionArg>,
    /// Permit spectral parameters with Im z below 1e-6
    #[arg(long, global = true)]
    pub allow_tiny_eps: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct FormatArg(pub Format);

#[derive(Debug, Clone, Copy)]
pub struct PrecisionArg(pub Precision);

impl std::fmt::Display for FormatArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0.extension())
    }
}

impl std::fmt::Display for PrecisionArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.0.as_str())
    }
}

fn parse_format(s: &str) -> Result<FormatArg, String> {
    s.parse().map(FormatArg).map_err(|e: quasispec_core::Error| e.to_string())
}

fn parse_precision(s: &str) -> Result<PrecisionArg, String> {
    s.parse().map(PrecisionArg).map_err(|e: quasispec_core::Error| e.to_string())
}

impl Serialize for FormatArg {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl Serialize for PrecisionArg {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resonant indices n_j of theta.
    ///
    /// Columns: j, n, distance = ||2 theta - n alpha||. The manifest summary
    /// holds the repulsion pairs (|n_{j+1}|, ||2 theta - n_j alpha||).
    Resonances(ResonanceArgs),
    /// Finite-n Lyapunov exponent on an energy grid.
    ///
    /// Columns: E, n, lyapunov.
    Lyapunov(LyapunovArgs),
    /// Half-line and whole-line Weyl functions at E + i eps.
    ///
    /// Columns: E, eps, mplus_re, mplus_im, mminus_re, mminus_im, M_re, M_im,
    /// est_error (seed spread of the slower half-line), depth.
    Mfunction(MFunctionArgs),
    /// Subordinacy profile along k.
    ///
    /// Columns: k, norm_P, det_P, eps_k = 1/(2 sqrt det_P), psi_mplus,
    /// ratio_jl = psi(m+(E + i eps_k)) / (2 eps_k ||P||), ratio_blabl.
    /// Rows with eps_k < 1e-6 are dropped unless --allow-tiny-eps is given.
    Subordinacy(SubordinacyArgs),
    /// Local Hölder ladder of the spectral measure at E.
    ///
    /// Columns: E, eps, w = 2 eps Im M(E + i eps), ImM. The window proxy w
    /// bounds mu(E - eps, E + eps) for the measure mu = mu^{e_{-1}} + mu^{e_0}
    /// from above; the fit reports the exponent of w in eps. The measures
    /// mu^{e_k} of other sites are not computed separately: they follow
    /// from the shift identity mu^{e_k}_x = mu^{e_0}_{x + k alpha}.
    Holder(HolderArgs),
    /// Integrated density of states.
    ///
    /// Columns: E, N.
    Ids(IdsArgs),
    /// Thouless formula: log potential of dN against the Lyapunov exponent.
    ///
    /// Columns: E, integral, lyapunov, residual = |integral - lyapunov|.
    Thouless(ThoulessArgs),
    /// Spectral gaps read off IDS plateaus.
    ///
    /// Columns: E_left, E_right, N_plateau. The manifest summary carries the
    /// nearest gap label k with its distance |N - {k alpha}|.
    Gaps(GapsArgs),
    /// Twisted-cocycle matrix X by closed form and by brute force.
    ///
    /// Columns: method (closed or brute), k, x1_re, x1_im, x2, detX, normX,
    /// invnormX.
    #[command(name = "tx-oracle")]
    TxOracle(TxArgs),
    /// Conjugate a perturbed Schrödinger cocycle back to Schrödinger form.
    ///
    /// Columns: iteration, w_norm, ratio = ||w_m|| / ||w_{m-1}||^2, residual.
    /// The conjugacy B is written to <stem>.B.json as
    /// {"band": eps, "entries": [[[k, re, im], ...] x 4]}.
    Reduce(ReduceArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Resonances(_) => "resonances",
            Command::Lyapunov(_) => "lyapunov",
            Command::Mfunction(_) => "mfunction",
            Command::Subordinacy(_) => "subordinacy",
            Command::Holder(_) => "holder",
            Command::Ids(_) => "ids",
            Command::Thouless(_) => "thouless",
            Command::Gaps(_) => "gaps",
            Command::TxOracle(_) => "tx-oracle",
            Command::Reduce(_) => "reduce",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ResonanceArgs {
    /// Resonance strength: ||2 theta - n alpha|| <= exp(-|n| eps0)
    #[arg(long, default_value_t = 0.1)]
    pub eps0: f64,
    /// Largest |n| scanned
    #[arg(long, default_value_t = 10_000)]
    pub scan_limit: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EnergyArg {
    /// Energy `E` or grid `lo:hi:points`
    #[arg(long = "e", allow_hyphen_values = true)]
    pub e: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LyapunovArgs {
    #[command(flatten)]
    pub energy: EnergyArg,
    /// Horizon n
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Phases averaged along one orbit
    #[arg(long, default_value_t = 32)]
    pub phases: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MFunctionArgs {
    #[command(flatten)]
    pub energy: EnergyArg,
    /// Imaginary part of the spectral parameter
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SubordinacyArgs {
    /// Energy E
    #[arg(long = "e", default_value_t = 0.0, allow_negative_numbers = true)]
    pub e: f64,
    /// Largest horizon k
    #[arg(long, default_value_t = 1000)]
    pub k_max: usize,
    /// Geometric ratio of the k list
    #[arg(long, default_value_t = 1.5)]
    pub k_ratio: f64,
    /// Relative widening of the ratio_jl bracket
    #[arg(long, default_value_t = 0.05)]
    pub slack: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct HolderArgs {
    /// Energy E
    #[arg(long = "e", default_value_t = 0.0, allow_negative_numbers = true)]
    pub e: f64,
    /// Smallest eps of the geometric ladder
    #[arg(long, default_value_t = 1e-4)]
    pub eps_min: f64,
    /// Largest eps of the geometric ladder
    #[arg(long, default_value_t = 1e-1)]
    pub eps_max: f64,
    /// Ladder points
    #[arg(long, default_value_t = 16)]
    pub points: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IdsArgs {
    #[command(flatten)]
    pub energy: EnergyArg,
    /// Points of the default grid over the spectral range
    #[arg(long, default_value_t = 2001)]
    pub points: usize,
    /// Box size
    #[arg(long, default_value_t = 2000)]
    pub size: usize,
    /// `box` (finite box at theta) or `average` (phase average)
    #[arg(long, default_value = "box")]
    pub method: String,
    /// Phases for `--method average`
    #[arg(long, default_value_t = 64)]
    pub phases: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ThoulessArgs {
    #[command(flatten)]
    pub ids: IdsArgs,
    /// Energies at which the formula is checked (`E` or `lo:hi:points`)
    #[arg(long, allow_hyphen_values = true)]
    pub check: Option<String>,
    /// Lyapunov horizon
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Lyapunov phases
    #[arg(long = "lyapunov-phases", default_value_t = 32)]
    pub lyapunov_phases: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GapsArgs {
    #[command(flatten)]
    pub ids: IdsArgs,
    /// Plateau tolerance; defaults to 1/(2 size)
    #[arg(long)]
    pub plateau_tol: Option<f64>,
    /// Largest |k| searched for gap labels
    #[arg(long, default_value_t = 50)]
    pub label_max: i64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TxArgs {
    /// Horizon k
    #[arg(long, default_value_t = 200)]
    pub k: u64,
    /// Resonant mode r of the twist
    #[arg(long, default_value_t = 3, allow_negative_numbers = true)]
    pub r: i64,
    /// Real part of the twist amplitude t_r
    #[arg(long, default_value_t = 0.7, allow_negative_numbers = true)]
    pub t_hat: f64,
    /// Imaginary part of the twist amplitude
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub t_hat_im: f64,
    /// Evaluation phase x
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReduceArgs {
    /// Energy entering the symbol E - v
    #[arg(long = "e", default_value_t = 3.0, allow_negative_numbers = true)]
    pub e: f64,
    /// Analyticity band
    #[arg(long, default_value_t = 0.05)]
    pub band: f64,
    /// Norm of the built-in perturbation w in A = A^{(E - v)} e^w
    #[arg(long, default_value_t = 1e-3)]
    pub size: f64,
    /// Read A from a JSON file instead
    #[arg(long)]
    pub cocycle: Option<PathBuf>,
    /// Conjugation steps allowed
    #[arg(long, default_value_t = 8)]
    pub max_iter: usize,
    /// Stop once ||w|| falls below this
    #[arg(long = "reduce-tol", default_value_t = 1e-13)]
    pub reduce_tol: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(output::run(&cli))
}
