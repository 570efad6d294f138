//! Command-line front end for the `lyaptrek` library: model-file I/O,
//! the three covariance routes, trek reports, the last-variance lower
//! bound, and generators for the built-in model families.
//!
//! Node indices on the command line are **1-based**. Exit codes: 0 on
//! success, 2 for input or model errors, 3 for numeric failures
//! (instability, non-convergence, singular systems).

// `!(x >= 0.0)` rejects NaN, unlike `x < 0.0`; matrix loops index on
// purpose because the indices are the mathematics.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lyaptrek::{
    enumerate_base_treks, sigma_acyclic, sigma_series, solve_lyapunov, trek_term, trek_weight,
    variance_lower_bound, DenseMatrix, Error, MixedGraph,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "lyaptrek",
    version,
    about = "Steady-state covariance of Gaussian Markov processes",
    long_about = "Computes the steady-state covariance of dX = M X dt + C^(1/2) dW via a \
                  dense Lyapunov solve, a certified power series, or exact trek \
                  polynomials, plus trek reports, a last-variance lower bound, and \
                  model generators. Node indices on the command line are 1-based."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the steady-state covariance of a model file
    Solve(SolveArgs),
    /// List treks between two nodes with their series terms
    Treks(TreksArgs),
    /// Lower-bound the last marginal variance of a triangular model
    Bound(BoundArgs),
    /// Write model files for the built-in families
    Gen(GenArgs),
}

#[derive(clap::Args)]
struct SolveArgs {
    /// Model file (JSON with fields d, M, C and optional name, node_labels)
    model: PathBuf,
    /// Covariance route
    #[arg(long, value_enum, default_value_t = Method::Kron)]
    method: Method,
    /// Tolerance for the series and acyclic routes (ignored by kron)
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Pretty)]
    format: Format,
}

#[derive(Copy, Clone, ValueEnum)]
enum Method {
    /// Dense Lyapunov solve via Kronecker vectorization
    Kron,
    /// Globally convergent power series with a certified tail bound
    Series,
    /// Exact finite trek polynomials (acyclic drift graphs only)
    Acyclic,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Kron => "kron",
            Method::Series => "series",
            Method::Acyclic => "acyclic",
        }
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Json,
    Csv,
    Pretty,
}

#[derive(clap::Args)]
struct TreksArgs {
    /// Model file (JSON with fields d, M, C)
    model: PathBuf,
    /// Trek source node (1-based)
    #[arg(long)]
    from: usize,
    /// Trek target node (1-based)
    #[arg(long)]
    to: usize,
    /// Largest trek length to enumerate
    #[arg(long = "max-len")]
    max_len: usize,
    /// Render an aligned table instead of csv
    #[arg(long)]
    table: bool,
}

#[derive(clap::Args)]
struct BoundArgs {
    /// Model file (JSON with fields d, M, C)
    model: PathBuf,
    /// Emit a csv sweep over the leading sub-models instead of the report
    #[arg(long)]
    sweep: bool,
}

#[derive(clap::Args)]
struct GenArgs {
    #[command(subcommand)]
    family: GenFamily,
}

#[derive(Subcommand)]
enum GenFamily {
    /// Chain: unit decay, sub-diagonal weight zeta, diffusion gamma * I
    Path {
        /// Number of nodes
        #[arg(long)]
        d: usize,
        /// Weight of every edge along the chain
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        zeta: f64,
        /// Diffusion strength (C = gamma * I)
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        /// Write here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One factor node driving independent indicators
    Factor {
        /// Drift diagonal, comma separated
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        m_diag: Vec<f64>,
        /// Factor loadings, comma separated (one per indicator; omit when d = 1)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        loadings: Vec<f64>,
        /// Diffusion diagonal, comma separated
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        c_diag: Vec<f64>,
        /// Write here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Built-in five-node cyclic example
    Example13 {
        /// Write here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// On-disk model schema. Matrices are nested row arrays; numbers are
/// written as shortest round-trip decimals, so generate-then-parse
/// reproduces every entry bit-exactly.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    d: usize,
    #[serde(rename = "M")]
    m: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_labels: Option<Vec<String>>,
}

struct LoadedModel {
    file: ModelFile,
    m: DenseMatrix,
    c: DenseMatrix,
}

#[derive(Debug)]
enum CliError {
    /// Unusable invocation or file: bad paths, malformed JSON,
    /// inconsistent shapes, invalid generator parameters.
    Input(String),
    /// The library rejected the model or failed numerically.
    Model(Error),
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        CliError::Model(err)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "{msg}"),
            CliError::Model(err) => write!(f, "{err}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Model(err) => match err {
                Error::NotStable
                | Error::NoConvergence { .. }
                | Error::SingularSystem
                | Error::SingularIminusB => 3,
                _ => 2,
            },
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Treks(args) => cmd_treks(args),
        Command::Bound(args) => cmd_bound(args),
        Command::Gen(args) => cmd_gen(args),
    }
}

fn load_model(path: &Path) -> Result<LoadedModel, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|err| CliError::Input(format!("cannot read {}: {err}", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|err| CliError::Input(format!("invalid model file {}: {err}", path.display())))?;
    let shape_ok =
        |rows: &[Vec<f64>]| rows.len() == file.d && rows.iter().all(|row| row.len() == file.d);
    if !shape_ok(&file.m) || !shape_ok(&file.c) {
        return Err(CliError::Input(format!(
            "matrix shapes in {} do not match d = {}",
            path.display(),
            file.d
        )));
    }
    if let Some(labels) = &file.node_labels {
        if labels.len() != file.d {
            return Err(CliError::Input(format!(
                "node_labels length {} does not match d = {}",
                labels.len(),
                file.d
            )));
        }
    }
    let m = DenseMatrix::from_rows(&file.m)?;
    let c = DenseMatrix::from_rows(&file.c)?;
    Ok(LoadedModel { file, m, c })
}

fn cmd_solve(args: SolveArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let (sigma, diagnostics): (DenseMatrix, Vec<(&'static str, serde_json::Value)>) =
        match args.method {
            Method::Kron => {
                let report = solve_lyapunov(&model.m, &model.c)?;
                (
                    report.sigma,
                    vec![("residual_norm", json!(report.residual_norm))],
                )
            }
            Method::Series => {
                let result = sigma_series(&model.m, &model.c, args.tol)?;
                (
                    result.sigma,
                    vec![
                        ("terms_used", json!(result.terms_used)),
                        ("tail_bound", json!(result.tail_bound)),
                        ("scale_applied", json!(result.scale_applied)),
                    ],
                )
            }
            Method::Acyclic => (sigma_acyclic(&model.m, &model.c, args.tol)?, Vec::new()),
        };

    match args.format {
        Format::Json => {
            let mut obj = json!({
                "method": args.method.name(),
                "d": sigma.rows(),
                "sigma": sigma.to_rows(),
            });
            if let Some(name) = &model.file.name {
                obj["name"] = json!(name);
            }
            for (key, value) in diagnostics {
                obj[key] = value;
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&obj).expect("json output")
            );
        }
        Format::Csv => {
            print!("{}", matrix_csv(&sigma));
            for (key, value) in &diagnostics {
                println!("# {key} = {value}");
            }
        }
        Format::Pretty => {
            print!(
                "{}",
                matrix_pretty(&sigma, model.file.node_labels.as_deref())
            );
            for (key, value) in &diagnostics {
                println!("{key} = {value}");
            }
        }
    }
    Ok(())
}

/// Full-precision comma-separated rows (shortest round-trip decimals).
fn matrix_csv(sigma: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..sigma.rows() {
        let row: Vec<String> = (0..sigma.cols())
            .map(|j| format!("{}", sigma.at(i, j)))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Aligned 8-decimal rows, with a leading label column when the model
/// file carries node labels.
fn matrix_pretty(sigma: &DenseMatrix, labels: Option<&[String]>) -> String {
    let cells: Vec<Vec<String>> = (0..sigma.rows())
        .map(|i| {
            (0..sigma.cols())
                .map(|j| format!("{:.8}", sigma.at(i, j)))
                .collect()
        })
        .collect();
    let width = cells.iter().flatten().map(String::len).max().unwrap_or(0);
    let label_width = labels
        .map(|ls| ls.iter().map(String::len).max().unwrap_or(0))
        .unwrap_or(0);
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        if let Some(ls) = labels {
            out.push_str(&format!("{:>label_width$}  ", ls[i]));
        }
        let body: Vec<String> = row.iter().map(|s| format!("{s:>width$}")).collect();
        out.push_str(&body.join("  "));
        out.push('\n');
    }
    out
}

/// Converts a 1-based command-line node index to the 0-based library
/// index, rejecting 0 and out-of-range values.
fn node_index(value: usize, d: usize) -> Result<usize, CliError> {
    if value == 0 {
        return Err(CliError::Input(
            "node indices are 1-based; 0 is not a valid node".into(),
        ));
    }
    if value > d {
        return Err(CliError::Input(format!(
            "node {value} out of range: the model has {d} nodes"
        )));
    }
    Ok(value - 1)
}

const TREK_HEADERS: [&str; 6] = ["trek", "omega", "factorization", "l", "n", "term"];

fn cmd_treks(args: TreksArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let d = model.m.rows();
    let i = node_index(args.from, d)?;
    let j = node_index(args.to, d)?;
    let graph = MixedGraph::from_matrices(&model.m, &model.c)?;
    let treks = enumerate_base_treks(&graph, i, j, args.max_len)?;

    let mut rows: Vec<[String; 6]> = Vec::with_capacity(treks.len() + 1);
    let mut total = 0.0;
    for tau in &treks {
        let omega = trek_weight(&model.m, &model.c, tau)?;
        let term = trek_term(&model.m, &model.c, tau)?;
        total += term;
        let factorization = format!(
            "({} choose {})/2^{} * {}",
            tau.l(),
            tau.n(),
            tau.l() + 1,
            omega
        );
        let (omega_text, term_text) = if args.table {
            (format!("{omega:.8}"), format!("{term:.8}"))
        } else {
            (format!("{omega}"), format!("{term}"))
        };
        rows.push([
            tau.render(),
            omega_text,
            factorization,
            tau.l().to_string(),
            tau.n().to_string(),
            term_text,
        ]);
    }

    if args.table {
        rows.push([
            "total".into(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            format!("{total:.8}"),
        ]);
        print!("{}", render_table(&TREK_HEADERS, &rows));
    } else {
        println!("{}", TREK_HEADERS.join(","));
        for row in &rows {
            println!("{}", row.join(","));
        }
        println!("total,,,,,{total}");
    }
    Ok(())
}

/// Space-padded table; numeric columns right-aligned.
fn render_table(headers: &[&str; 6], rows: &[[String; 6]]) -> String {
    const RIGHT_ALIGNED: [bool; 6] = [false, true, false, true, true, true];
    let mut widths: [usize; 6] = [0; 6];
    for (k, header) in headers.iter().enumerate() {
        widths[k] = header.len();
    }
    for row in rows {
        for (k, cell) in row.iter().enumerate() {
            widths[k] = widths[k].max(cell.len());
        }
    }
    let format_row = |cells: &[String; 6]| -> String {
        let mut parts = Vec::with_capacity(6);
        for (k, cell) in cells.iter().enumerate() {
            let w = widths[k];
            parts.push(if RIGHT_ALIGNED[k] {
                format!("{cell:>w$}")
            } else {
                format!("{cell:<w$}")
            });
        }
        let mut line = parts.join("  ");
        line.truncate(line.trim_end().len());
        line
    };
    let header_row: [String; 6] = headers.map(str::to_string);
    let mut out = format_row(&header_row);
    out.push('\n');
    for row in rows {
        out.push_str(&format_row(row));
        out.push('\n');
    }
    out
}

fn cmd_bound(args: BoundArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    if args.sweep {
        println!("d,sigma_dd,bound");
        for k in 1..=model.m.rows() {
            let mk = model.m.leading_block(k)?;
            let ck = model.c.leading_block(k)?;
            let bound = variance_lower_bound(&mk, &ck)?;
            let sigma = solve_lyapunov(&mk, &ck)?.sigma;
            println!("{k},{},{bound}", sigma.at(k - 1, k - 1));
        }
    } else {
        let bound = variance_lower_bound(&model.m, &model.c)?;
        let sigma = solve_lyapunov(&model.m, &model.c)?.sigma;
        let d = model.m.rows();
        let sigma_dd = sigma.at(d - 1, d - 1);
        println!("sigma_dd = {sigma_dd}");
        println!("bound = {bound}");
        println!("slack = {}", sigma_dd - bound);
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<(), CliError> {
    let (file, out) = match args.family {
        GenFamily::Path {
            d,
            zeta,
            gamma,
            out,
        } => (path_model_file(d, zeta, gamma)?, out),
        GenFamily::Factor {
            m_diag,
            loadings,
            c_diag,
            out,
        } => (factor_model_file(&m_diag, &loadings, &c_diag)?, out),
        GenFamily::Example13 { out } => (example13_model_file(), out),
    };
    let text = format!(
        "{}\n",
        serde_json::to_string_pretty(&file).expect("model serialization")
    );
    match out {
        Some(path) => fs::write(&path, text)
            .map_err(|err| CliError::Input(format!("cannot write {}: {err}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn path_model_file(d: usize, zeta: f64, gamma: f64) -> Result<ModelFile, CliError> {
    if d == 0 {
        return Err(CliError::Input("--d must be at least 1".into()));
    }
    if !zeta.is_finite() {
        return Err(CliError::Input("--zeta must be finite".into()));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(CliError::Input(
            "--gamma must be finite and nonnegative".into(),
        ));
    }
    let mut m = vec![vec![0.0; d]; d];
    let mut c = vec![vec![0.0; d]; d];
    for i in 0..d {
        m[i][i] = -1.0;
        c[i][i] = gamma;
        if i > 0 {
            m[i][i - 1] = zeta;
        }
    }
    Ok(ModelFile {
        d,
        m,
        c,
        name: Some(format!("path-{d}")),
        node_labels: None,
    })
}

fn factor_model_file(
    m_diag: &[f64],
    loadings: &[f64],
    c_diag: &[f64],
) -> Result<ModelFile, CliError> {
    let d = m_diag.len();
    if d == 0 {
        return Err(CliError::Input("--m-diag needs at least one entry".into()));
    }
    if loadings.len() != d - 1 {
        return Err(CliError::Input(format!(
            "--loadings needs {} entries for {} nodes, got {}",
            d - 1,
            d,
            loadings.len()
        )));
    }
    if c_diag.len() != d {
        return Err(CliError::Input(format!(
            "--c-diag needs {d} entries, got {}",
            c_diag.len()
        )));
    }
    for &value in m_diag {
        if !(value < 0.0) {
            return Err(CliError::Input("--m-diag entries must be negative".into()));
        }
    }
    for &value in c_diag {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(CliError::Input(
                "--c-diag entries must be finite and nonnegative".into(),
            ));
        }
    }
    let mut m = vec![vec![0.0; d]; d];
    let mut c = vec![vec![0.0; d]; d];
    for i in 0..d {
        m[i][i] = m_diag[i];
        c[i][i] = c_diag[i];
        if i > 0 {
            m[i][0] = loadings[i - 1];
        }
    }
    Ok(ModelFile {
        d,
        m,
        c,
        name: Some(format!("factor-{d}")),
        node_labels: None,
    })
}

fn example13_model_file() -> ModelFile {
    ModelFile {
        d: 5,
        m: vec![
            vec![-1.0, 0.5, 0.0, 0.2, 0.0],
            vec![-1.0, -1.0, 0.2, 0.0, 0.0],
            vec![0.0, 0.0, -1.0, 0.5, 0.0],
            vec![0.0, 0.0, 0.0, -1.0, 1.0],
            vec![0.0, 0.0, 1.0, 0.0, -1.0],
        ],
        c: (0..5)
            .map(|i| (0..5).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect(),
        name: Some("example13".into()),
        node_labels: Some((1..=5).map(|k| format!("x{k}")).collect()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_index_is_one_based() {
        assert_eq!(node_index(1, 5).unwrap(), 0);
        assert_eq!(node_index(5, 5).unwrap(), 4);
        assert!(matches!(node_index(0, 5), Err(CliError::Input(_))));
        assert!(matches!(node_index(6, 5), Err(CliError::Input(_))));
    }

    #[test]
    fn exit_codes_partition_the_error_space() {
        assert_eq!(CliError::Input("bad".into()).exit_code(), 2);
        assert_eq!(CliError::Model(Error::NotStable).exit_code(), 3);
        assert_eq!(
            CliError::Model(Error::NoConvergence { terms: 7 }).exit_code(),
            3
        );
        assert_eq!(CliError::Model(Error::SingularSystem).exit_code(), 3);
        assert_eq!(CliError::Model(Error::SingularIminusB).exit_code(), 3);
        assert_eq!(
            CliError::Model(Error::NotStable).to_string(),
            "drift matrix is not stable"
        );
        assert_eq!(CliError::Model(Error::CyclicGraph).exit_code(), 2);
        assert_eq!(CliError::Model(Error::EmptyMatrix).exit_code(), 2);
    }

    #[test]
    fn path_generator_validates_and_builds_the_chain() {
        let file = path_model_file(3, 0.5, 2.0).unwrap();
        assert_eq!(file.d, 3);
        assert_eq!(file.m[0], vec![-1.0, 0.0, 0.0]);
        assert_eq!(file.m[1], vec![0.5, -1.0, 0.0]);
        assert_eq!(file.m[2], vec![0.0, 0.5, -1.0]);
        assert_eq!(file.c[1], vec![0.0, 2.0, 0.0]);
        assert!(matches!(
            path_model_file(0, 1.0, 1.0),
            Err(CliError::Input(_))
        ));
        assert!(matches!(
            path_model_file(2, 1.0, -1.0),
            Err(CliError::Input(_))
        ));
        assert!(matches!(
            path_model_file(2, f64::INFINITY, 1.0),
            Err(CliError::Input(_))
        ));
    }

    #[test]
    fn factor_generator_validates_lengths_and_signs() {
        let file = factor_model_file(&[-1.0, -0.5], &[0.7], &[1.0, 0.25]).unwrap();
        assert_eq!(file.m[1], vec![0.7, -0.5]);
        assert_eq!(file.c[0], vec![1.0, 0.0]);
        assert!(matches!(
            factor_model_file(&[], &[], &[]),
            Err(CliError::Input(_))
        ));
        assert!(matches!(
            factor_model_file(&[-1.0, -0.5], &[], &[1.0, 1.0]),
            Err(CliError::Input(_))
        ));
        assert!(matches!(
            factor_model_file(&[-1.0, -0.5], &[0.7], &[1.0]),
            Err(CliError::Input(_))
        ));
        assert!(matches!(
            factor_model_file(&[-1.0, 0.5], &[0.7], &[1.0, 1.0]),
            Err(CliError::Input(_))
        ));
        assert!(matches!(
            factor_model_file(&[-1.0, -0.5], &[0.7], &[1.0, -1.0]),
            Err(CliError::Input(_))
        ));
    }

    #[test]
    fn built_in_example_solves_and_round_trips() {
        let file = example13_model_file();
        let text = serde_json::to_string_pretty(&file).unwrap();
        let back: ModelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.d, 5);
        assert_eq!(back.m, file.m);
        assert_eq!(back.c, file.c);
        let m = DenseMatrix::from_rows(&back.m).unwrap();
        let c = DenseMatrix::from_rows(&back.c).unwrap();
        let sigma = solve_lyapunov(&m, &c).unwrap().sigma;
        assert!((sigma.at(0, 0) - 0.496).abs() < 5e-4);
    }

    #[test]
    fn csv_and_pretty_renderers_format_entries() {
        let sigma = DenseMatrix::from_rows(&[vec![0.5, -0.25], vec![-0.25, 1.0]]).unwrap();
        assert_eq!(matrix_csv(&sigma), "0.5,-0.25\n-0.25,1\n");
        let plain = matrix_pretty(&sigma, None);
        assert_eq!(
            plain,
            " 0.50000000  -0.25000000\n-0.25000000   1.00000000\n"
        );
        let labels = vec!["x1".to_string(), "x2".to_string()];
        let labeled = matrix_pretty(&sigma, Some(&labels));
        assert!(labeled.starts_with("x1   0.50000000"));
    }

    #[test]
    fn trek_table_aligns_and_keeps_column_order() {
        let rows = vec![[
            "1<-4-o4->3".to_string(),
            "0.10000000".to_string(),
            "(2 choose 1)/2^3 * 0.1".to_string(),
            "2".to_string(),
            "1".to_string(),
            "0.02500000".to_string(),
        ]];
        let table = render_table(&TREK_HEADERS, &rows);
        let mut lines = table.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("trek"));
        let columns: Vec<&str> = header.split_whitespace().collect();
        assert_eq!(
            columns,
            vec!["trek", "omega", "factorization", "l", "n", "term"]
        );
        assert!(lines.next().unwrap().contains("1<-4-o4->3"));
    }
}
