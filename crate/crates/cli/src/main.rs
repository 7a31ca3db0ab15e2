mod suites;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mixmap::entropy::{self, Units};
use mixmap::markov_graph::{build_truncated_graph, extension_graph, subgraph_hn, GraphFormat};
use mixmap::{build_map, Error, MapParams};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "mixmap", version, about = "Build, verify and measure the mixing interval maps")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct MapArgs {
    #[arg(long, default_value_t = 14.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1)]
    r: u32,
}

impl MapArgs {
    fn params(&self) -> Result<MapParams, Error> {
        MapParams::new(self.lambda, self.r)
    }
}

#[derive(Args, Clone)]
struct Output {
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Output {
    fn emit(&self, text: &str) -> Result<(), Error> {
        match &self.out {
            Some(p) => Ok(fs::write(p, text)?),
            None => {
                print!("{text}");
                if !text.ends_with('\n') {
                    println!();
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
    Dot,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Smoothness,
    Monotone,
    Markov,
    Mixing,
    Coding,
    EntropyChain,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    SubgraphExact,
    Spectral,
    LoopCount,
    SeparatedUpper,
    SeparatedLocal,
    Transience,
    DerivativeRadius,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the map, print the level constants and optionally save it.
    Build {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 4)]
        n_max: u32,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        #[command(flatten)]
        out: Output,
    },
    /// Run verification suites; exit 1 on failure.
    Verify {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, value_enum, default_value = "all")]
        suite: Vec<Suite>,
        #[arg(long, default_value_t = 6)]
        n_max: u32,
        #[arg(long = "N", default_value_t = 6)]
        big_n: u32,
        /// Level range for the entropy chain, `a..b` or a single level.
        #[arg(long, default_value = "1..8")]
        n: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Export a truncation, `H_n` or the extension graph.
    Graph {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long = "N", default_value_t = 1)]
        big_n: u32,
        /// `H` selects the subgraph `H_n`.
        #[arg(long)]
        subgraph: Option<String>,
        #[arg(long, default_value_t = 1)]
        n: u32,
        /// Use the extension graph of the modified map.
        #[arg(long)]
        extension: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        out: Output,
    },
    /// Entropy reports.
    Entropy {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, value_enum, default_value = "subgraph-exact")]
        method: Method,
        #[arg(long, default_value_t = 2)]
        n: u32,
        #[arg(long = "N", default_value_t = 4)]
        big_n: u32,
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        /// Defaults to half a lap width at level `n`.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        bits: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[command(flatten)]
        out: Output,
    },
    /// Histogram of the measure `μ_n`.
    Measure {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 2)]
        n: u32,
        #[arg(long, default_value_t = 100)]
        bins: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[command(flatten)]
        out: Output,
    },
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(_) | Error::DerivativeOrder { .. } | Error::InvalidVertex(_) | Error::Parse(_) => {
                Failure::Config(e)
            }
            e => Failure::Runtime(e),
        }
    }
}

fn bad_format(f: Format, what: &str) -> Failure {
    let name = f.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    Failure::Config(Error::InvalidParams(format!("format {name} is not available for {what}")))
}

fn parse_range(s: &str) -> Result<Vec<u32>, Error> {
    let bad = || Error::InvalidParams(format!("bad level range {s:?}"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a.parse().map_err(|_| bad())?, b.trim_start_matches('=').parse().map_err(|_| bad())?),
        None => {
            let a = s.parse().map_err(|_| bad())?;
            (a, a)
        }
    };
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn build_cmd(map: &MapArgs, n_max: u32, format: Format, out: &Output) -> Result<(), Failure> {
    let params = map.params()?;
    let m = build_map(&params, n_max)?;
    let levels: Vec<_> = (1..=n_max).map(|n| params.level(n)).collect();
    match format {
        Format::Table => {
            println!("{:>3}  {:>10}  {:>12}  {:>16}  {:>14}  {:>14}", "n", "x_n", "y_n", "M_n", "k_n", "w_n");
            for lc in &levels {
                let osc = lc.oscillations.as_ref().map_or("-".into(), |m| m.to_string());
                println!(
                    "{:>3}  {:>10.6}  {:>12.6}  {:>16}  {:>14.6e}  {:>14.10}",
                    lc.n,
                    lc.x_f64(),
                    lc.y_f64(),
                    osc,
                    lc.k,
                    lc.w_f64()
                );
            }
        }
        Format::Json => {
            let rows: Vec<Value> = levels
                .iter()
                .map(|lc| {
                    json!({
                        "n": lc.n,
                        "x": lc.x.to_string(),
                        "y": lc.y.to_string(),
                        "M": lc.oscillations.as_ref().map(|m| m.to_string()),
                        "k": lc.k,
                        "w": lc.w.to_string(),
                    })
                })
                .collect();
            let doc = json!({ "params": params, "levels": rows });
            println!("{}", serde_json::to_string_pretty(&doc).map_err(Error::from)?);
        }
        f => return Err(bad_format(f, "build")),
    }
    if out.out.is_some() {
        out.emit(&m.to_json()?)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn verify_cmd(
    map: &MapArgs,
    suites: &[Suite],
    n_max: u32,
    big_n: u32,
    n: &str,
    trials: usize,
    seed: u64,
    out: &Output,
) -> Result<bool, Failure> {
    let params = map.params()?;
    let levels = parse_range(n)?;
    let all = suites.iter().any(|s| matches!(s, Suite::All));
    let chosen: Vec<Suite> = if all {
        vec![Suite::Smoothness, Suite::Monotone, Suite::Markov, Suite::Mixing, Suite::Coding, Suite::EntropyChain]
    } else {
        suites.to_vec()
    };
    let m = build_map(&params, n_max.max(big_n).max(8))?;
    let mut reports = serde_json::Map::new();
    let mut ok = true;
    for s in chosen {
        let (name, r) = match s {
            Suite::Smoothness => ("smoothness", suites::smoothness(&m)?),
            Suite::Monotone => ("monotone", suites::monotone(&m, n_max)?),
            Suite::Markov => ("markov", suites::markov(&m, big_n)?),
            Suite::Mixing => ("mixing", suites::mixing(&m, trials, seed)?),
            Suite::Coding => ("coding", suites::coding(&m, trials, seed)?),
            Suite::EntropyChain => ("entropy-chain", suites::entropy_chain(&m, &levels)?),
            Suite::All => unreachable!(),
        };
        log::info!("suite {name}: {}", if r.passes { "pass" } else { "FAIL" });
        ok &= r.passes;
        reports.insert(name.into(), json!({ "passes": r.passes, "report": r.report, "failures": r.failures }));
    }
    let doc = json!({ "params": params, "passes": ok, "suites": reports });
    out.emit(&serde_json::to_string_pretty(&doc).map_err(Error::from)?)?;
    if !ok {
        let manifest: Vec<Value> = doc["suites"]
            .as_object()
            .unwrap()
            .iter()
            .filter(|(_, v)| v["passes"] == false)
            .map(|(k, v)| json!({ "suite": k, "failures": v["failures"] }))
            .collect();
        eprintln!("{}", serde_json::to_string(&json!({ "failed": manifest })).map_err(Error::from)?);
    }
    Ok(ok)
}

#[allow(clippy::too_many_arguments)]
fn graph_cmd(
    map: &MapArgs,
    big_n: u32,
    subgraph: Option<&str>,
    n: u32,
    extension: bool,
    format: Format,
    out: &Output,
) -> Result<(), Failure> {
    let params = map.params()?;
    let g = match (subgraph, extension) {
        (Some("H"), false) => subgraph_hn(&params, n)?,
        (Some(other), _) => {
            return Err(Failure::Config(Error::InvalidParams(format!(
                "unknown subgraph {other:?} (only H), and not with --extension"
            ))))
        }
        (None, true) => extension_graph(&params)?.truncation(big_n)?,
        (None, false) => build_truncated_graph(&params, big_n)?,
    };
    let fmt = match format {
        Format::Json => GraphFormat::Json,
        Format::Dot => GraphFormat::Dot,
        f => return Err(bad_format(f, "graph")),
    };
    out.emit(&g.export(fmt)?)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn entropy_cmd(
    map: &MapArgs,
    method: Method,
    n: u32,
    big_n: u32,
    p: u32,
    epsilon: f64,
    delta: Option<f64>,
    bits: bool,
    format: Format,
    out: &Output,
) -> Result<(), Failure> {
    let params = map.params()?;
    let units = if bits { Units::Bits } else { Units::Nats };
    let report = match method {
        Method::SubgraphExact => entropy::entropy_subgraph_exact(&params, n)?,
        Method::Spectral => entropy::entropy_spectral(&build_truncated_graph(&params, big_n)?, 1_000_000, 1e-13)?,
        Method::LoopCount => entropy::entropy_loop_count(&build_truncated_graph(&params, big_n)?, 200)?,
        Method::SeparatedUpper => entropy::separated_upper_bound(&params, n, epsilon)?,
        Method::SeparatedLocal => {
            let m = build_map(&params, n)?;
            let lc = params.level(n);
            let d0 = mixmap::scalar::rational_to_f64(&lc.width()) / lc.oscillations_f64();
            entropy::local_entropy_lower(&m, n, p, delta.unwrap_or(d0 / 2.0))?.0
        }
        Method::Transience => {
            let ns: Vec<u32> = (3..=big_n.max(3)).collect();
            let t = entropy::transience_evidence(&params, &ns)?;
            if format != Format::Json {
                return Err(bad_format(format, "transience"));
            }
            out.emit(&serde_json::to_string_pretty(&t).map_err(Error::from)?)?;
            return Ok(());
        }
        Method::DerivativeRadius => {
            let m = build_map(&params, 8)?;
            let d = entropy::spectral_radius_of_derivative(&m, 5, 20_000)?;
            if format != Format::Json {
                return Err(bad_format(format, "derivative-radius"));
            }
            out.emit(&serde_json::to_string_pretty(&d).map_err(Error::from)?)?;
            return Ok(());
        }
    };
    let text = match format {
        Format::Json => report.to_json(units)?,
        Format::Csv => report.trace_csv(units)?,
        f => return Err(bad_format(f, "entropy")),
    };
    out.emit(&text)?;
    Ok(())
}

fn measure_cmd(map: &MapArgs, n: u32, bins: usize, format: Format, out: &Output) -> Result<(), Failure> {
    let params = map.params()?;
    let mu = entropy::measure_mu_n(&params, n, bins)?;
    let text = match format {
        Format::Csv => mu.histogram_csv()?,
        Format::Json => serde_json::to_string_pretty(&mu).map_err(Error::from)?,
        f => return Err(bad_format(f, "measure")),
    };
    out.emit(&text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match &cli.cmd {
        Cmd::Build { map, n_max, format, out } => build_cmd(map, *n_max, *format, out).map(|_| true),
        Cmd::Verify { map, suite, n_max, big_n, n, trials, seed, out } => {
            verify_cmd(map, suite, *n_max, *big_n, n, *trials, *seed, out)
        }
        Cmd::Graph { map, big_n, subgraph, n, extension, format, out } => {
            graph_cmd(map, *big_n, subgraph.as_deref(), *n, *extension, *format, out).map(|_| true)
        }
        Cmd::Entropy { map, method, n, big_n, p, epsilon, delta, bits, format, out } => {
            entropy_cmd(map, *method, *n, *big_n, *p, *epsilon, *delta, *bits, *format, out).map(|_| true)
        }
        Cmd::Measure { map, n, bins, format, out } => measure_cmd(map, *n, *bins, *format, out).map(|_| true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("MIXMAP_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
