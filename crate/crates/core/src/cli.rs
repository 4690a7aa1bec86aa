//! Command-line front end: tables, sweeps and simulations written as CSV or
//! JSON.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{empirical_strength, sample_trials};
use crate::optimizer::{
    additivity_comparison, conjectured_optimum, figure1_sweep, optimize_cglmp_exact,
    ConjecturedOptions, ExactOptions, OptimizationReport, SweepMode, EXACT_MAX_DIM,
};
use crate::quantum::{
    cglmp_behavior, cglmp_measurements, entropy_of_entanglement, maximally_entangled,
    quantum_behavior, three_level_state, Party, SchmidtState, SettingsDistribution,
};
use crate::strength::min_kl_local;

/// Schmidt coefficient of the two equal levels in the three-level benchmark state.
pub const TABLE1_GAMMA: f64 = 0.617;

#[derive(Debug, Parser)]
#[command(name = "bellstrength", version, about = "Statistical strength of CGLMP Bell tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Subcommand)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Table1,
    Figure1,
    Optimize,
    Additivity,
    Simulate,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Strength and entanglement of the three d = 3 benchmark states.
    Table1(Common),
    /// Optimal strength and entanglement for d = --d ..= --d-max.
    Figure1(Common),
    /// Optimal state for a single d.
    Optimize(Common),
    /// Independent copies of the optimal test against one larger test.
    Additivity(Common),
    /// Sampled runs of the optimal test at growing trial counts.
    Simulate(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Auto,
    Exact,
    Conjectured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Dimension (lower end of the range for figure1).
    #[arg(long)]
    pub d: Option<usize>,
    /// Upper end of the figure1 range.
    #[arg(long)]
    pub d_max: Option<usize>,
    /// Certificate tolerance of every local fit.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 2)]
    pub copies: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Trial counts for simulate, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub trials: Option<Vec<u64>>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// Resolved settings of one run, echoed into every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub d: usize,
    pub d_max: usize,
    pub tol: f64,
    pub mode: ModeArg,
    pub copies: usize,
    pub seed: u64,
    pub trials: Vec<u64>,
    pub out: Option<PathBuf>,
    pub format: Format,
}

const DEFAULT_TRIALS: [u64; 4] = [1_000, 10_000, 100_000, 1_000_000];

impl RunConfig {
    pub fn from_cli(command: CommandKind, c: &Common) -> Result<Self> {
        let d = c.d.unwrap_or(match command {
            CommandKind::Table1 => 3,
            CommandKind::Additivity => 4,
            _ => 2,
        });
        let d_max = c.d_max.unwrap_or(match command {
            CommandKind::Figure1 => 16,
            _ => d,
        });
        let config = Self {
            command,
            d,
            d_max,
            tol: c.tol,
            mode: c.mode,
            copies: c.copies,
            seed: c.seed,
            trials: c.trials.clone().unwrap_or_else(|| DEFAULT_TRIALS.to_vec()),
            out: c.out.clone(),
            format: c.format,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("tolerance {} must be > 0", self.tol)));
        }
        if self.command != CommandKind::Table1 && self.d < 2 {
            return Err(Error::InvalidDimension(self.d));
        }
        if self.d_max < self.d {
            return Err(Error::InvalidParameter(format!(
                "d-max {} is below d {}",
                self.d_max, self.d
            )));
        }
        if self.copies == 0 {
            return Err(Error::InvalidParameter("copies must be >= 1".into()));
        }
        if self.trials.is_empty() || self.trials.contains(&0) {
            return Err(Error::InvalidParameter("trial counts must be >= 1".into()));
        }
        Ok(())
    }
}

/// One output row. The first five columns are shared by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub d: usize,
    pub divergence_bits: Option<f64>,
    pub entanglement_bits: Option<f64>,
    pub mode: String,
    pub certificate_gap: Option<f64>,
    pub row: String,
    /// Schmidt coefficients, descending, separated by `;`.
    pub coefficients: String,
    pub parameter: Option<f64>,
    pub consistency_residual: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub reference_bits: Option<f64>,
    pub converged: bool,
    pub note: String,
}

impl Record {
    fn blank(d: usize, row: impl Into<String>, mode: impl Into<String>) -> Self {
        Self {
            d,
            divergence_bits: None,
            entanglement_bits: None,
            mode: mode.into(),
            certificate_gap: None,
            row: row.into(),
            coefficients: String::new(),
            parameter: None,
            consistency_residual: None,
            trials: None,
            seed: None,
            reference_bits: None,
            converged: false,
            note: String::new(),
        }
    }

    fn failed(d: usize, row: impl Into<String>, mode: impl Into<String>, e: &Error) -> Self {
        Self {
            note: e.to_string(),
            ..Self::blank(d, row, mode)
        }
    }

    fn from_report(row: impl Into<String>, r: &OptimizationReport) -> Self {
        Self {
            divergence_bits: Some(r.divergence_bits),
            entanglement_bits: Some(r.entanglement_bits),
            certificate_gap: r.certificate_gap,
            coefficients: join_coeffs(&r.best_state),
            parameter: r.parameter,
            consistency_residual: Some(r.consistency_residual),
            converged: r.converged,
            ..Self::blank(r.dim, row, r.mode.to_string())
        }
    }

    fn rounded(mut self) -> Self {
        for x in [
            &mut self.divergence_bits,
            &mut self.entanglement_bits,
            &mut self.certificate_gap,
            &mut self.parameter,
            &mut self.consistency_residual,
            &mut self.reference_bits,
        ] {
            *x = x.map(round_sig9);
        }
        self
    }
}

fn join_coeffs(s: &SchmidtState) -> String {
    s.sorted_descending()
        .coeffs()
        .iter()
        .map(|c| format_sig9(*c))
        .collect::<Vec<_>>()
        .join(";")
}

/// `x` printed with 9 significant digits.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        format!("{:.*}", (8 - exp).max(0) as usize, x)
    } else {
        format!("{x:.8e}")
    }
}

pub fn round_sig9(x: f64) -> f64 {
    format_sig9(x).parse().unwrap_or(x)
}

/// Everything a command produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Output {
    pub config: RunConfig,
    pub records: Vec<Record>,
}

impl Output {
    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.converged)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut text = String::new();
        let echo = serde_json::to_value(&self.config)?;
        if let serde_json::Value::Object(map) = echo {
            for (k, v) in map {
                text.push_str(&format!("# {k}={v}\n"));
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        text.push_str(&String::from_utf8_lossy(&body));
        Ok(text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn render(&self) -> Result<String> {
        match self.config.format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Reads a CSV file written by [`Output::to_csv`].
pub fn parse_csv(text: &str) -> Result<Output> {
    let mut fields = serde_json::Map::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let (k, v) = line[1..]
            .trim()
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("bad config line {line:?}")))?;
        fields.insert(k.to_string(), serde_json::from_str(v)?);
    }
    let config: RunConfig = serde_json::from_value(serde_json::Value::Object(fields))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let records = reader.deserialize().collect::<std::result::Result<Vec<Record>, _>>()?;
    Ok(Output { config, records })
}

pub fn parse_json(text: &str) -> Result<Output> {
    Ok(serde_json::from_str(text)?)
}

/// Reads an output file in either format.
pub fn read_output(path: &Path) -> Result<Output> {
    let text = fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        parse_json(&text)
    } else {
        parse_csv(&text)
    }
}

/// Writes `text` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn optimize(d: usize, mode: ModeArg, tol: f64) -> Result<OptimizationReport> {
    let exact = match mode {
        ModeArg::Auto => d <= EXACT_MAX_DIM,
        ModeArg::Exact => true,
        ModeArg::Conjectured => false,
    };
    if exact {
        optimize_cglmp_exact(
            d,
            &ExactOptions {
                inner_tol: tol.min(1e-10),
                ..ExactOptions::default()
            },
        )
    } else {
        conjectured_optimum(d, &ConjecturedOptions::default())
    }
}

fn fixed_state_record(row: &str, state: &SchmidtState, tol: f64) -> Record {
    let d = state.dim();
    match cglmp_behavior(state).and_then(|q| min_kl_local(&q, tol)) {
        Ok(fit) => Record {
            divergence_bits: Some(fit.divergence_bits),
            entanglement_bits: Some(entropy_of_entanglement(state)),
            certificate_gap: Some(fit.certificate_gap),
            coefficients: join_coeffs(state),
            converged: true,
            ..Record::blank(d, row, "exact")
        },
        Err(e) => Record::failed(d, row, "exact", &e),
    }
}

fn cmd_table1(config: &RunConfig) -> Vec<Record> {
    let mut rows = Vec::new();
    match maximally_entangled(3) {
        Ok(s) => rows.push(fixed_state_record("maximally_entangled", &s, config.tol)),
        Err(e) => rows.push(Record::failed(3, "maximally_entangled", "exact", &e)),
    }
    match three_level_state(TABLE1_GAMMA) {
        Ok(s) => rows.push(fixed_state_record("max_violation", &s, config.tol)),
        Err(e) => rows.push(Record::failed(3, "max_violation", "exact", &e)),
    }
    rows.push(match optimize(3, config.mode, config.tol) {
        Ok(r) => Record::from_report("optimal", &r),
        Err(e) => Record::failed(3, "optimal", "exact", &e),
    });
    rows
}

fn cmd_figure1(config: &RunConfig) -> Result<Vec<Record>> {
    let mode = match config.mode {
        ModeArg::Auto => SweepMode::Auto,
        ModeArg::Exact => SweepMode::Exact,
        ModeArg::Conjectured => SweepMode::Conjectured,
    };
    Ok(figure1_sweep(config.d, config.d_max, mode, config.tol)?
        .into_iter()
        .map(|row| match row.result {
            Ok(r) => Record::from_report("optimal", &r),
            Err(e) => Record::failed(row.d, "optimal", "failed", &e),
        })
        .collect())
}

fn cmd_optimize(config: &RunConfig) -> Vec<Record> {
    vec![match optimize(config.d, config.mode, config.tol) {
        Ok(r) => Record::from_report("optimal", &r),
        Err(e) => Record::failed(config.d, "optimal", "failed", &e),
    }]
}

fn cmd_additivity(config: &RunConfig) -> Vec<Record> {
    let (d, k) = (config.d, config.copies);
    let a = match additivity_comparison(d, k, config.tol) {
        Ok(a) => a,
        Err(e) => return vec![Record::failed(d, "product", "failed", &e)],
    };
    let big = a.comparison_dim;
    let mut rows = vec![
        Record {
            divergence_bits: Some(a.single_bits),
            converged: true,
            ..Record::blank(d, "single_copy", "optimal")
        },
        Record {
            divergence_bits: Some(a.product_bits),
            certificate_gap: a.verified_certificate_gap,
            reference_bits: a.verified_bits,
            converged: a.verified_bits.is_none_or(|v| (v - a.product_bits).abs() < 1e-6),
            note: match a.product_wins {
                Some(true) => "product_wins".into(),
                Some(false) => "single_test_wins".into(),
                None => String::new(),
            },
            ..Record::blank(big, format!("{k}_copies"), "product")
        },
    ];
    if let Some(u) = a.unrestricted_bits {
        rows.push(Record {
            divergence_bits: Some(u),
            converged: true,
            note: "all local models of the combined test".into(),
            ..Record::blank(big, format!("{k}_copies_unrestricted"), "exact")
        });
    }
    if let Some(c) = a.comparison_bits {
        rows.push(Record {
            divergence_bits: Some(c),
            converged: true,
            ..Record::blank(big, "single_test", "conjectured")
        });
    }
    rows
}

fn cmd_simulate(config: &RunConfig) -> Vec<Record> {
    let d = config.d;
    let report = match optimize(d, config.mode, config.tol) {
        Ok(r) => r,
        Err(e) => return vec![Record::failed(d, "asymptotic", "failed", &e)],
    };
    let behavior = cglmp_measurements(d, Party::Alice).and_then(|alice| {
        let bob = cglmp_measurements(d, Party::Bob)?;
        quantum_behavior(&report.state, &alice, &bob, &SettingsDistribution::uniform(2))
    });
    let q = match behavior {
        Ok(q) => q,
        Err(e) => return vec![Record::failed(d, "asymptotic", "failed", &e)],
    };
    config
        .trials
        .iter()
        .map(|&n| {
            let row = format!("N={n}");
            match sample_trials(&q, n, config.seed).and_then(|c| empirical_strength(&c, config.tol)) {
                Ok(fit) => Record {
                    divergence_bits: Some(fit.divergence_bits),
                    entanglement_bits: Some(report.entanglement_bits),
                    certificate_gap: Some(fit.certificate_gap),
                    coefficients: join_coeffs(&report.best_state),
                    trials: Some(n),
                    seed: Some(config.seed),
                    reference_bits: Some(report.divergence_bits),
                    consistency_residual: Some((fit.divergence_bits - report.divergence_bits).abs()),
                    converged: true,
                    ..Record::blank(d, row, "empirical")
                },
                Err(e) => Record::failed(d, row, "empirical", &e),
            }
        })
        .collect()
}

/// Runs one command and returns its output, without writing it.
pub fn execute(config: &RunConfig) -> Result<Output> {
    config.validate()?;
    let records = match config.command {
        CommandKind::Table1 => cmd_table1(config),
        CommandKind::Figure1 => cmd_figure1(config)?,
        CommandKind::Optimize => cmd_optimize(config),
        CommandKind::Additivity => cmd_additivity(config),
        CommandKind::Simulate => cmd_simulate(config),
    };
    Ok(Output {
        config: config.clone(),
        records: records.into_iter().map(Record::rounded).collect(),
    })
}

/// Parses arguments, runs the command and writes its output. Returns
/// whether every row converged.
pub fn run<I, T>(args: I) -> Result<bool>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            e.print()?;
            return Ok(true);
        }
        Err(e) => return Err(Error::Usage(e.to_string())),
    };
    let (kind, common) = match &cli.command {
        Command::Table1(c) => (CommandKind::Table1, c),
        Command::Figure1(c) => (CommandKind::Figure1, c),
        Command::Optimize(c) => (CommandKind::Optimize, c),
        Command::Additivity(c) => (CommandKind::Additivity, c),
        Command::Simulate(c) => (CommandKind::Simulate, c),
    };
    let config = RunConfig::from_cli(kind, common)?;
    let output = execute(&config)?;
    let text = output.render()?;
    match &config.out {
        Some(path) => write_atomic(path, &text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(output.all_converged())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig9(0.0462738470), "0.0462738470");
        assert_eq!(format_sig9(1.58496250072), "1.58496250");
        assert_eq!(format_sig9(123.456), "123.456000");
        assert_eq!(format_sig9(1.5e-10), "1.50000000e-10");
        assert_eq!(round_sig9(0.123456789123), 0.123456789);
    }

    fn config(command: CommandKind) -> RunConfig {
        RunConfig {
            command,
            d: 2,
            d_max: 3,
            tol: 1e-9,
            mode: ModeArg::Auto,
            copies: 2,
            seed: 5,
            trials: vec![1000],
            out: None,
            format: Format::Csv,
        }
    }

    #[test]
    fn csv_and_json_round_trip() {
        let out = execute(&config(CommandKind::Figure1)).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(parse_csv(&out.to_csv().unwrap()).unwrap(), out);
        assert_eq!(parse_json(&out.to_json().unwrap()).unwrap(), out);
        let header = out.to_csv().unwrap();
        let first = header.lines().find(|l| !l.starts_with('#')).unwrap();
        assert!(first.starts_with("d,divergence_bits,entanglement_bits,mode,certificate_gap,"));
    }

    #[test]
    fn bad_configs_rejected() {
        let mut c = config(CommandKind::Figure1);
        c.tol = 0.0;
        assert!(execute(&c).is_err());
        let mut c = config(CommandKind::Figure1);
        c.d_max = 1;
        assert!(execute(&c).is_err());
        assert!(run(["bellstrength", "figure1", "--format", "xml"]).is_err());
    }
}
