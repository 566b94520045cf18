//! Command-line front end: build, query and inspect Morse graph databases.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dsgrn::database::{parameter_morse_graph, Database, DatabaseError, Query};
use dsgrn::factor::{FactorError, FactorLibrary, NodeSignature};
use dsgrn::hill::{self, HillError, HillSystem};
use dsgrn::network::{NetworkError, RegulatoryNetwork};
use dsgrn::parameter::{Parameter, ParameterError, ParameterGraph};
use dsgrn::phase::{domain_graph, render_edges, Labeling};
use dsgrn::witness::{inequalities, render_chain, sample_parameter, Notation, WitnessError};

#[derive(Parser)]
#[command(
    name = "dsgrn",
    version,
    about = "Parameter graphs and Morse graph databases for switching networks"
)]
struct Cli {
    /// Output style.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a network and print each node's signature.
    Validate { network: PathBuf },
    /// Print the factor graph sizes and the parameter graph size.
    Size { network: PathBuf },
    /// Compute the Morse graph of every parameter and save a database.
    Build {
        network: PathBuf,
        /// Database directory to create.
        #[arg(short, long)]
        output: PathBuf,
        /// Worker threads.
        #[arg(short, long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        jobs: u32,
    },
    /// List the parameters whose Morse graph matches a query.
    Query {
        database: PathBuf,
        #[arg(short, long)]
        query: String,
        /// Print only the count.
        #[arg(long)]
        count: bool,
    },
    /// Show one parameter of a database or network.
    Inspect {
        source: PathBuf,
        #[command(flatten)]
        parameter: ParameterArg,
        #[arg(long, group = "view")]
        inequalities: bool,
        #[arg(long, group = "view")]
        domaingraph: bool,
        #[arg(long, group = "view")]
        morsegraph: bool,
    },
    /// Print a concrete parameter inside a parameter's region.
    Sample {
        source: PathBuf,
        #[command(flatten)]
        parameter: ParameterArg,
    },
    /// Integrate the Hill model at a sampled parameter and print CSV.
    #[command(disable_help_flag = true)]
    Simulate {
        /// Print help.
        #[arg(long, action = clap::ArgAction::Help)]
        help: Option<bool>,
        source: PathBuf,
        #[command(flatten)]
        parameter: ParameterArg,
        /// Hill exponent used on every edge.
        #[arg(short = 'n', long)]
        hill: f64,
        /// Integration horizon.
        #[arg(short = 'T', long, default_value_t = hill::DEFAULT_HORIZON)]
        horizon: f64,
        /// RK4 step size.
        #[arg(short = 'h', long, default_value_t = hill::DEFAULT_STEP)]
        step: f64,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',')]
        x0: Option<Vec<f64>>,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ParameterArg {
    /// Parameter index.
    #[arg(short = 'p', long = "parameter")]
    index: u64,
}

#[derive(Debug)]
struct CliError {
    code: &'static str,
    message: String,
}

impl CliError {
    fn new(code: &'static str, message: impl Display) -> Self {
        CliError {
            code,
            message: message.to_string(),
        }
    }
}

impl From<NetworkError> for CliError {
    fn from(e: NetworkError) -> Self {
        let code = match e {
            NetworkError::Syntax { .. } => "SyntaxError",
            NetworkError::RepressingSelfEdge { .. } => "RepressingSelfEdge",
            NetworkError::DuplicateEdge { .. } => "DuplicateEdge",
            NetworkError::DanglingNode { .. } => "DanglingNode",
            NetworkError::LogicSourceMismatch { .. } => "LogicSourceMismatch",
            NetworkError::UnknownIdentifier { .. } => "UnknownIdentifier",
            NetworkError::DuplicateNode { .. } => "DuplicateNode",
            NetworkError::ArityMismatch { .. } => "ArityMismatch",
        };
        CliError::new(code, e)
    }
}

impl From<FactorError> for CliError {
    fn from(e: FactorError) -> Self {
        let code = match e {
            FactorError::ThresholdInconsistent { .. } => "ThresholdInconsistent",
            FactorError::BackendBudgetExhausted { .. } => "BackendBudgetExhausted",
            FactorError::Unsupported(_) => "Unsupported",
            FactorError::BadSignature(_) => "BadSignature",
            FactorError::Cache { .. } => "CacheError",
        };
        CliError::new(code, e)
    }
}

impl From<ParameterError> for CliError {
    fn from(e: ParameterError) -> Self {
        match e {
            ParameterError::Factor(f) => f.into(),
            ParameterError::IndexOutOfRange { .. } => CliError::new("IndexOutOfRange", e),
            ParameterError::UnknownFactorVertex { .. } => CliError::new("UnknownFactorVertex", e),
            ParameterError::ComponentCount { .. } => CliError::new("ComponentCount", e),
        }
    }
}

impl From<DatabaseError> for CliError {
    fn from(e: DatabaseError) -> Self {
        let code = match e {
            DatabaseError::Io { .. } => "IoError",
            DatabaseError::FormatVersionMismatch(_) => "FormatVersionMismatch",
            DatabaseError::ChecksumMismatch => "ChecksumMismatch",
            DatabaseError::Corrupt(_) => "Corrupt",
            DatabaseError::MalformedQuery(_) => "MalformedQuery",
        };
        CliError::new(code, e)
    }
}

impl From<WitnessError> for CliError {
    fn from(e: WitnessError) -> Self {
        match e {
            WitnessError::Parameter(p) => p.into(),
            WitnessError::NotRegular(_) => CliError::new("NotRegular", e),
            WitnessError::ShapeMismatch => CliError::new("ShapeMismatch", e),
        }
    }
}

impl From<HillError> for CliError {
    fn from(e: HillError) -> Self {
        let code = match e {
            HillError::NonFiniteState { .. } => "NonFiniteState",
            HillError::Invalid(_) => "InvalidHillSystem",
        };
        CliError::new(code, e)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new("IoError", format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error[{}]: {}", e.code, e.message);
            ExitCode::FAILURE
        }
    }
}

fn read_network(path: &Path) -> Result<RegulatoryNetwork, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Ok(RegulatoryNetwork::parse(&text)?)
}

fn parameter_graph(network: RegulatoryNetwork) -> Result<ParameterGraph, CliError> {
    Ok(ParameterGraph::new(network, &FactorLibrary::from_env())?)
}

/// A network file, or a database directory carrying its network.
struct Source {
    graph: ParameterGraph,
    database: Option<Database>,
}

fn open_source(path: &Path) -> Result<Source, CliError> {
    if path.is_dir() {
        let database = Database::load(path)?;
        let graph = parameter_graph(database.network())?;
        Ok(Source {
            graph,
            database: Some(database),
        })
    } else {
        let network = read_network(path)?;
        Ok(Source {
            graph: parameter_graph(network)?,
            database: None,
        })
    }
}

fn run(cli: Cli, out: &mut impl Write) -> Result<(), CliError> {
    let machine = cli.format == Format::Machine;
    let w = |e: std::io::Error| CliError::new("IoError", e);
    match cli.command {
        Command::Validate { network } => {
            let net = read_network(&network)?;
            for node in net.nodes() {
                let sig = NodeSignature::of_node(node);
                if machine {
                    writeln!(out, "node={} signature={sig}", node.name).map_err(w)?;
                } else {
                    writeln!(out, "{} {sig}", node.name).map_err(w)?;
                }
            }
            if machine {
                writeln!(out, "nodes={} edges={}", net.len(), net.edge_count()).map_err(w)?;
            } else {
                writeln!(out, "ok: {} nodes, {} edges", net.len(), net.edge_count()).map_err(w)?;
            }
        }
        Command::Size { network } => {
            let net = read_network(&network)?;
            let graph = parameter_graph(net)?;
            let sizes: Vec<String> = graph.factor_sizes().iter().map(u64::to_string).collect();
            if machine {
                writeln!(out, "sizes={}", sizes.join(",")).map_err(w)?;
                writeln!(out, "total={}", graph.size()).map_err(w)?;
                writeln!(out, "undecided={}", graph.undecided()).map_err(w)?;
            } else {
                writeln!(out, "{} | total {}", sizes.join(" "), graph.size()).map_err(w)?;
            }
        }
        Command::Build {
            network,
            output,
            jobs,
        } => {
            let net = read_network(&network)?;
            let graph = parameter_graph(net)?;
            let start = Instant::now();
            let database = Database::build(&graph, jobs as usize);
            database.save(&output)?;
            let ms = start.elapsed().as_millis();
            if machine {
                writeln!(out, "total={}", database.len()).map_err(w)?;
                writeln!(out, "morse_graphs={}", database.morse_graphs().len()).map_err(w)?;
                writeln!(out, "wall_clock_ms={ms}").map_err(w)?;
            } else {
                writeln!(
                    out,
                    "built {} parameters, {} distinct Morse graphs in {ms} ms -> {}",
                    database.len(),
                    database.morse_graphs().len(),
                    output.display()
                )
                .map_err(w)?;
            }
        }
        Command::Query {
            database,
            query,
            count,
        } => {
            let database = Database::load(&database)?;
            let query: Query = query.parse()?;
            let hits = database.query(&query);
            if !count {
                for i in &hits {
                    if machine {
                        writeln!(out, "index={i}").map_err(w)?;
                    } else {
                        writeln!(out, "{i}").map_err(w)?;
                    }
                }
            }
            if machine {
                writeln!(out, "count={}", hits.len()).map_err(w)?;
            } else {
                writeln!(out, "count {}", hits.len()).map_err(w)?;
            }
        }
        Command::Inspect {
            source,
            parameter,
            inequalities: ineq,
            domaingraph,
            morsegraph,
        } => {
            let source = open_source(&source)?;
            let graph = &source.graph;
            let p = graph.parameter(parameter.index)?;
            if ineq {
                let notation = if machine {
                    Notation::Machine
                } else {
                    Notation::Text
                };
                for chain in inequalities(graph, &p) {
                    writeln!(out, "{}", render_chain(graph.network(), &chain, notation))
                        .map_err(w)?;
                }
            } else if domaingraph {
                let labeling = Labeling::new(graph, &p);
                write!(out, "{}", render_edges(&domain_graph(&labeling))).map_err(w)?;
            } else if morsegraph {
                let shape = morse_shape(&source, &p, parameter.index);
                if machine {
                    writeln!(out, "morsegraph={}", shape.canonical_form()).map_err(w)?;
                } else {
                    write!(out, "{}", shape.render_text()).map_err(w)?;
                }
            } else {
                summary(out, &source, &p, parameter.index, machine).map_err(w)?;
            }
        }
        Command::Sample { source, parameter } => {
            let source = open_source(&source)?;
            let p = source.graph.parameter(parameter.index)?;
            let z = sample_parameter(&source.graph, &p);
            let net = source.graph.network();
            for (name, value) in concrete_entries(net, &z, machine) {
                if machine {
                    writeln!(out, "{name}={value}").map_err(w)?;
                } else {
                    writeln!(out, "{name} = {value}").map_err(w)?;
                }
            }
        }
        Command::Simulate {
            source,
            parameter,
            hill: n,
            horizon,
            step,
            x0,
            csv,
            ..
        } => {
            let source = open_source(&source)?;
            let graph = &source.graph;
            let p = graph.parameter(parameter.index)?;
            let z = sample_parameter(graph, &p).to_f64();
            let net = graph.network();
            let x0 = match x0 {
                Some(x) if x.len() != net.len() => {
                    return Err(CliError::new(
                        "ArityMismatch",
                        format!(
                            "--x0 has {} values, network has {} nodes",
                            x.len(),
                            net.len()
                        ),
                    ))
                }
                Some(x) => x,
                None => hill::default_initial_state(graph, &p, &z),
            };
            let system = HillSystem::uniform(net, &z, n)?;
            let trajectory = system.integrate(&x0, horizon, step)?;
            let oscillates =
                hill::detect_oscillation(&trajectory, &z.theta, hill::TRANSIENT_FRACTION);
            let names: Vec<String> = net.nodes().iter().map(|n| n.name.clone()).collect();
            let text = trajectory.to_csv(&names);
            let verdict = if machine {
                format!("oscillation={oscillates}")
            } else {
                format!("oscillation: {}", if oscillates { "yes" } else { "no" })
            };
            match csv {
                Some(path) => {
                    std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
                    writeln!(out, "{verdict}").map_err(w)?;
                }
                None => {
                    out.write_all(text.as_bytes()).map_err(w)?;
                    eprintln!("{verdict}");
                }
            }
        }
    }
    Ok(())
}

fn morse_shape(source: &Source, p: &Parameter, index: u64) -> dsgrn::morse::MorseShape {
    match source
        .database
        .as_ref()
        .and_then(|db| db.assignment(index).map(|id| db.shape(id).clone()))
    {
        Some(shape) => shape,
        None => parameter_morse_graph(&source.graph, p)
            .shape()
            .to_canonical(),
    }
}

fn summary(
    out: &mut impl Write,
    source: &Source,
    p: &Parameter,
    index: u64,
    machine: bool,
) -> std::io::Result<()> {
    let graph = &source.graph;
    let net = graph.network();
    let shape = morse_shape(source, p, index);
    let adjacent = graph.adjacencies(index).unwrap_or_default();
    let adjacent: Vec<String> = adjacent.iter().map(u64::to_string).collect();
    if machine {
        writeln!(out, "index={index}")?;
    } else {
        writeln!(out, "parameter {index}")?;
    }
    for (j, &local) in p.components.iter().enumerate() {
        let v = graph.vertex(j, local);
        let order: Vec<String> = v
            .order
            .0
            .iter()
            .map(|&t| net.node(net.node(j).targets[t]).name.clone())
            .collect();
        if machine {
            writeln!(
                out,
                "node={} vertex={local} logic={} order={}",
                net.node(j).name,
                v.logic.to_hex(),
                order.join(",")
            )?;
        } else {
            writeln!(
                out,
                "  {}: vertex {local}, logic {}, thresholds {}",
                net.node(j).name,
                v.logic.to_hex(),
                order.join(" < ")
            )?;
        }
    }
    if machine {
        writeln!(out, "morsegraph={}", shape.canonical_form())?;
        writeln!(out, "adjacent={}", adjacent.join(","))?;
    } else {
        writeln!(out, "morse graph {}", shape.canonical_form())?;
        writeln!(out, "adjacent {}", adjacent.join(" "))?;
    }
    Ok(())
}

/// Named entries of a concrete parameter, indexed `target,source` (1-based)
/// as in the inequality notation.
fn concrete_entries<T: Display>(
    net: &RegulatoryNetwork,
    z: &dsgrn::witness::ConcreteParameter<T>,
    machine: bool,
) -> Vec<(String, String)> {
    let mut entries = Vec::new();
    for (j, g) in z.gamma.iter().enumerate() {
        let name = if machine {
            format!("G[{}]", j + 1)
        } else {
            format!("γ_{}", j + 1)
        };
        entries.push((name, g.to_string()));
    }
    for (j, node) in net.nodes().iter().enumerate() {
        for (k, s) in node.sources.iter().enumerate() {
            let (l, u) = if machine {
                (
                    format!("L[{},{}]", j + 1, s.node + 1),
                    format!("U[{},{}]", j + 1, s.node + 1),
                )
            } else {
                (
                    format!("l_{{{},{}}}", j + 1, s.node + 1),
                    format!("u_{{{},{}}}", j + 1, s.node + 1),
                )
            };
            entries.push((l, z.low[j][k].to_string()));
            entries.push((u, z.high[j][k].to_string()));
        }
    }
    for (i, node) in net.nodes().iter().enumerate() {
        for (t, &target) in node.targets.iter().enumerate() {
            let name = if machine {
                format!("T[{},{}]", target + 1, i + 1)
            } else {
                format!("θ_{{{},{}}}", target + 1, i + 1)
            };
            entries.push((name, z.theta[i][t].to_string()));
        }
    }
    entries
}
