use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use jacobi2_core::catalog::{Library, Space};
use jacobi2_core::suite::{self, dims_escalate, EnginePool, RunConfig, Status, MAX_TRUNC};
use jacobi2_core::{Engine, Error, GroupId, SymplecticMat, Value};

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Parser, Debug)]
#[command(name = "jacobi2", version, about = "Exact Fourier expansions and Witt-condition checks for degree-two Siegel and Jacobi forms")]
struct Cli {
    /// Truncation N: exponents of τ11 and τ22 up to N.
    #[arg(long, global = true, env = "JACOBI2_TRUNC", default_value_t = 4)]
    trunc: u32,
    /// Largest truncation rank checks may escalate to.
    #[arg(long, global = true, env = "JACOBI2_CEILING", default_value_t = 8)]
    ceiling: u32,
    /// Comma-separated glob filter over check names.
    #[arg(long, global = true, env = "JACOBI2_SUITE")]
    suite: Option<String>,
    /// Group (gamma2, gamma0_2, gamma0_3psi, gamma0_4psi, gamma00_2psi or a level prefix).
    #[arg(long, global = true, env = "JACOBI2_GROUP")]
    group: Option<String>,
    /// Write output here instead of stdout.
    #[arg(long, global = true, env = "JACOBI2_OUT")]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = "JACOBI2_FORMAT", value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Worker threads.
    #[arg(long, global = true, env = "JACOBI2_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the expansion of a named form or an S-expression.
    Series { name: String },
    /// Run the verification suite.
    Verify {
        /// Glob filter over check names, e.g. "level4.*".
        filter: Option<String>,
        /// Exit 0 when the only non-passing checks are inconclusive.
        #[arg(long, env = "JACOBI2_ALLOW_INCONCLUSIVE")]
        allow_inconclusive: bool,
        /// List the selected check names without running them.
        #[arg(long)]
        list: bool,
    },
    /// Predicted Hilbert coefficients against computed ranks.
    Dims { group: String, space: String, k: i64 },
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("jacobi2: {msg}");
    ExitCode::from(2)
}

fn emit(cli: &Cli, text: &str) -> Result<(), Error> {
    match &cli.out {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn split_filter(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn suggestions(name: &str) -> Vec<String> {
    let lib = Library::standard();
    let needle = name.rsplit('.').next().unwrap_or(name).to_ascii_lowercase();
    let mut v: Vec<String> = lib.names().filter(|n| n.to_ascii_lowercase().contains(&needle)).map(String::from).collect();
    if v.is_empty() && !needle.is_empty() {
        let head: String = needle.chars().take(if needle.len() > 2 { 2 } else { 1 }).collect();
        let scope = name.rsplit_once('.').map(|(s, _)| s).unwrap_or("");
        v = lib
            .names()
            .filter(|n| n.starts_with(scope) && n.rsplit('.').next().unwrap_or(n).to_ascii_lowercase().starts_with(&head))
            .map(String::from)
            .collect();
    }
    v.sort();
    v.truncate(12);
    v
}

fn cmd_series(cli: &Cli, name: &str) -> ExitCode {
    if cli.trunc < 1 || cli.trunc > MAX_TRUNC {
        return config_error(format!("trunc must lie in 1..={MAX_TRUNC}"));
    }
    let scope = match &cli.group {
        Some(g) => match g.parse::<GroupId>() {
            Ok(g) => g.prefix().to_string(),
            Err(e) => return config_error(e),
        },
        None => String::new(),
    };
    let lib = Library::standard();
    let expr = match lib.parse(name, &scope) {
        Ok(e) => e,
        Err(e) => {
            let s = suggestions(name);
            let hint = if s.is_empty() { String::new() } else { format!("\ncandidates: {}", s.join(", ")) };
            return config_error(format!("{e}{hint}"));
        }
    };
    let engine = Engine::new(cli.trunc);
    let id = SymplecticMat::identity();
    let value = match engine.eval(&expr, &id) {
        Ok(v) => v,
        Err(e) => return config_error(e),
    };
    let text = match (&*value, cli.format) {
        (Value::Scalar(s), Format::Json) => {
            let w = s.witt();
            let mut j = json!({
                "schema": "jacobi2.series/1",
                "name": name,
                "N": cli.trunc,
                "kind": "scalar",
                "witt_zero": w.is_zero(),
                "series": s.to_json(),
            });
            if let Some(wt) = &expr.weight {
                j["weight"] = json!(wt.to_string());
            }
            serde_json::to_string_pretty(&j).unwrap() + "\n"
        }
        (Value::Sym2(h), Format::Json) => {
            let j = json!({
                "schema": "jacobi2.series/1",
                "name": name,
                "N": cli.trunc,
                "kind": "sym2",
                "witt_zero": h.witt().is_zero(),
                "series": h.to_json(),
            });
            serde_json::to_string_pretty(&j).unwrap() + "\n"
        }
        (Value::Scalar(s), Format::Table) => {
            let mut t = format!("{name}  N = {}  W = 0: {}\n", cli.trunc, if s.witt().is_zero() { "yes" } else { "no" });
            t.push_str(&table_terms(s));
            t
        }
        (Value::Sym2(h), Format::Table) => {
            let mut t = format!("{name}  N = {}  W = 0: {}\n", cli.trunc, if h.witt().is_zero() { "yes" } else { "no" });
            for (c, s) in [("h20", &h.h20), ("h11", &h.h11), ("h02", &h.h02)] {
                t.push_str(&format!("[{c}]\n"));
                t.push_str(&table_terms(s));
            }
            t
        }
    };
    match emit(cli, &text) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => config_error(e),
    }
}

fn table_terms(s: &jacobi2_core::FourierSeries) -> String {
    let d = s.denom() as i64;
    let show = |x: i32| {
        let r = jacobi2_core::Rat::frac(x as i64, d);
        r.to_string()
    };
    let mut keys: Vec<_> = s.terms().collect();
    keys.sort_by_key(|(k, _)| (k.a + k.c, k.a, k.b));
    let mut t = String::new();
    for (k, v) in keys {
        t.push_str(&format!("{:>6} {:>6} {:>6}  {}\n", show(k.a), show(k.b), show(k.c), v));
    }
    if t.is_empty() {
        t.push_str("0\n");
    }
    t
}

fn cmd_verify(cli: &Cli, filter: &Option<String>, allow_inconclusive: bool, list: bool) -> ExitCode {
    let mut f = Vec::new();
    if let Some(s) = &cli.suite {
        f.extend(split_filter(s));
    }
    if let Some(s) = filter {
        f.extend(split_filter(s));
    }
    if let Some(g) = &cli.group {
        match g.parse::<GroupId>() {
            Ok(g) => f.push(format!("*{}*", g.prefix())),
            Err(e) => return config_error(e),
        }
    }
    let config = RunConfig { trunc: cli.trunc, ceiling: cli.ceiling, filter: f, jobs: cli.jobs };
    if let Err(e) = config.validate() {
        return config_error(e);
    }
    if list {
        let names: String = suite::select(&config).iter().map(|c| format!("{}\n", c.name)).collect();
        return match emit(cli, &names) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => config_error(e),
        };
    }
    let report = match suite::run(&config) {
        Ok(r) => r,
        Err(e) => return config_error(e),
    };
    if report.results.is_empty() {
        return config_error("no checks match the filter");
    }
    let text = match cli.format {
        Format::Json => report.to_json() + "\n",
        Format::Table => report.to_table(),
    };
    if let Err(e) = emit(cli, &text) {
        return config_error(e);
    }
    if let Some(r) = report.results.iter().find(|r| r.status == Status::Fail) {
        eprintln!("first failure: {} ({})", r.check, r.first_mismatch.as_deref().unwrap_or(""));
    }
    ExitCode::from(report.exit_code(allow_inconclusive) as u8)
}

fn cmd_dims(cli: &Cli, group: &str, space: &str, k: i64) -> ExitCode {
    let g: GroupId = match group.parse() {
        Ok(g) => g,
        Err(e) => return config_error(e),
    };
    let sp: Space = match space.parse() {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    if cli.trunc < 1 || cli.trunc > cli.ceiling || cli.ceiling > MAX_TRUNC {
        return config_error(format!("need 1 <= trunc <= ceiling <= {MAX_TRUNC}"));
    }
    if k < 0 {
        return config_error("K must be nonnegative");
    }
    let pool = EnginePool::default();
    let (n, rows, outcome) = match dims_escalate(&pool, g, sp, k, cli.trunc, cli.ceiling) {
        Ok(x) => x,
        Err(e) => return config_error(e),
    };
    let row_status = |r: &jacobi2_core::jacobi::DimRow| {
        if r.spanning as i64 != r.in_scope {
            "mismatch"
        } else if r.rank as i64 != r.in_scope {
            "inconclusive"
        } else {
            "ok"
        }
    };
    let text = match cli.format {
        Format::Json => {
            let j = json!({
                "schema": "jacobi2.dims/1",
                "group": g.id(),
                "space": sp.name(),
                "K": k,
                "N": n,
                "status": outcome.status,
                "rows": rows.iter().map(|r| {
                    let mut v = serde_json::to_value(r).unwrap();
                    v["status"] = json!(row_status(r));
                    v
                }).collect::<Vec<_>>(),
            });
            serde_json::to_string_pretty(&j).unwrap() + "\n"
        }
        Format::Table => {
            let mut t = format!("{} {} up to weight {k} at N = {n}\n", g.display(), sp.name());
            t.push_str("weight  predicted  in_scope  spanning  rank  status\n");
            for r in &rows {
                t.push_str(&format!(
                    "{:>6}  {:>9}  {:>8}  {:>8}  {:>4}  {}\n",
                    r.weight,
                    r.predicted,
                    r.in_scope,
                    r.spanning,
                    r.rank,
                    row_status(r)
                ));
            }
            t
        }
    };
    if let Err(e) = emit(cli, &text) {
        return config_error(e);
    }
    ExitCode::from(match outcome.status {
        Status::Pass => 0,
        Status::Fail => 1,
        Status::Inconclusive => 3,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Series { name } => cmd_series(&cli, name),
        Command::Verify { filter, allow_inconclusive, list } => cmd_verify(&cli, filter, *allow_inconclusive, *list),
        Command::Dims { group, space, k } => cmd_dims(&cli, group, space, *k),
    }
}
