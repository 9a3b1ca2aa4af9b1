//! `notebridge`: run the sync server, administer users, classes and
//! documents, export notes, and run analyses and simulations.

mod failure;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use notebridge_analytics::{
    analyze_paired, paired_csv, paired_table, read_pair_map, read_paired_csv, read_usage_log, summarize_usage,
    usage_csv, usage_table,
};
use notebridge_core::export_txt;
use notebridge_server::{load_document_state, ws, Role, ServerConfig, Store, SyncServer};
use notebridge_sim::{run_fuzz, run_scripted, NetConfig, Scenario};

use failure::Failure;

#[derive(Parser)]
#[command(name = "notebridge", version, about = "Collaborative lecture notes: server, admin and analysis tools")]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true, env = "NOTEBRIDGE_CONFIG")]
    config: Option<PathBuf>,
    /// Storage directory (overrides the config file).
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the websocket sync server.
    Serve {
        #[arg(long)]
        addr: Option<String>,
        #[arg(long)]
        snapshot_every: Option<u64>,
    },
    #[command(subcommand)]
    User(UserCmd),
    #[command(subcommand)]
    Class(ClassCmd),
    #[command(subcommand)]
    Doc(DocCmd),
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Run a scripted scenario or a random fuzz session against the server logic.
    Simulate(SimulateArgs),
}

#[derive(Subcommand)]
enum UserCmd {
    /// Create an account and print its login token.
    Add {
        #[arg(long)]
        name: String,
        #[arg(long, value_enum)]
        role: RoleArg,
    },
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Swd,
    Pnt,
}

impl From<RoleArg> for Role {
    fn from(r: RoleArg) -> Role {
        match r {
            RoleArg::Swd => Role::Swd,
            RoleArg::Pnt => Role::Pnt,
        }
    }
}

#[derive(Subcommand)]
enum ClassCmd {
    Add {
        #[arg(long)]
        name: String,
    },
    Enroll {
        #[arg(long)]
        class: String,
        #[arg(long)]
        user: String,
    },
}

#[derive(Subcommand)]
enum DocCmd {
    List {
        #[arg(long)]
        class: String,
    },
    Create {
        #[arg(long)]
        class: String,
        #[arg(long)]
        title: String,
        #[arg(long)]
        user: String,
    },
    Delete {
        #[arg(long)]
        doc: String,
        #[arg(long)]
        user: String,
    },
    /// Write the plain-text export of a document.
    Export {
        #[arg(long)]
        doc: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Table,
    Csv,
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Per-pair usage counts from a usage log.
    Usage {
        #[arg(long)]
        log: PathBuf,
        /// CSV with columns pair,user[,class].
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Median, IQR and Wilcoxon signed-rank test per questionnaire item.
    Paired {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("mode").required(true).args(["scenario", "fuzz"]))]
struct SimulateArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    fuzz: bool,
    #[arg(long, default_value_t = 5, requires = "fuzz")]
    clients: usize,
    #[arg(long, default_value_t = 200, requires = "fuzz")]
    ops: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    drop_prob: Option<f64>,
    #[arg(long)]
    duplicate_prob: Option<f64>,
    #[arg(long)]
    reorder_window: Option<usize>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = ServerConfig::load(cli.config.as_deref())?;
    // simulations only persist when a directory is named explicitly
    let sim_dir = cli.data_dir.clone();
    if let Some(dir) = cli.data_dir {
        config.data_dir = dir;
    }
    match cli.command {
        Command::Serve { addr, snapshot_every } => {
            if let Some(a) = addr {
                config.addr = a;
            }
            if let Some(n) = snapshot_every {
                config.snapshot_every = n;
            }
            serve(config)
        }
        Command::User(cmd) => {
            let store = open_store(&config)?;
            match cmd {
                UserCmd::Add { name, role } => {
                    let (user, token) = store.create_user(&name, role.into())?;
                    println!("{}\t{}\t{}", user.user_id, user.role, token);
                }
                UserCmd::List => {
                    for u in store.users() {
                        println!("{}\t{}\t{}", u.user_id, u.role, u.display_name);
                    }
                }
            }
            Ok(())
        }
        Command::Class(cmd) => {
            let store = open_store(&config)?;
            let class = match cmd {
                ClassCmd::Add { name } => store.create_class(&name)?,
                ClassCmd::Enroll { class, user } => store.enroll(&class, &user)?,
            };
            let members: Vec<&str> = class.members.iter().map(String::as_str).collect();
            println!("{}\t{}\t{}", class.class_id, class.name, members.join(","));
            Ok(())
        }
        Command::Doc(cmd) => doc(&open_store(&config)?, cmd),
        Command::Analyze(cmd) => analyze(cmd),
        Command::Simulate(args) => simulate(args, sim_dir),
    }
}

fn open_store(config: &ServerConfig) -> Result<Store, Failure> {
    Ok(Store::open(&config.data_dir, config.durability())?)
}

fn serve(config: ServerConfig) -> Result<(), Failure> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let store = Arc::new(open_store(&config)?);
    let hub = Arc::new(SyncServer::new(store, config.sync()));
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&config.addr).await?;
        println!("listening on ws://{}/ws, data in {}", listener.local_addr()?, config.data_dir.display());
        let heartbeat = Duration::from_millis(config.heartbeat_ms);
        tokio::select! {
            served = ws::serve_on(listener, hub, heartbeat) => served?,
            _ = tokio::signal::ctrl_c() => {}
        }
        Ok(())
    })
}

fn doc(store: &Store, cmd: DocCmd) -> Result<(), Failure> {
    match cmd {
        DocCmd::List { class } => {
            for d in store.list_documents(&class)? {
                println!("{}\t{}\t{}", d.doc_id, d.created_by, d.title);
            }
        }
        DocCmd::Create { class, title, user } => {
            let d = store.create_document(&class, &title, &user, ws::now_ms())?;
            println!("{}\t{}", d.doc_id, d.title);
        }
        DocCmd::Delete { doc, user } => {
            let d = store.delete_document(&doc, &user)?;
            println!("{}\tdeleted", d.doc_id);
        }
        DocCmd::Export { doc, out } => {
            let (state, seq) = load_document_state(store, &doc)?;
            let bytes = export_txt(&state.document());
            std::fs::write(&out, &bytes).map_err(|e| Failure::io(&out, e))?;
            println!("{doc}: {} bytes at seq {seq} -> {}", bytes.len(), out.display());
        }
    }
    Ok(())
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::io(path, e))
}

fn analyze(cmd: AnalyzeCmd) -> Result<(), Failure> {
    match cmd {
        AnalyzeCmd::Usage { log, pairs, format } => {
            let events = read_usage_log(BufReader::new(open(&log)?))?;
            let pairs = read_pair_map(open(&pairs)?)?;
            let rows = summarize_usage(&events, &pairs)?;
            match format {
                Format::Table => println!("{}", usage_table(&rows)),
                Format::Csv => print!("{}", usage_csv(&rows)),
            }
        }
        AnalyzeCmd::Paired { csv, format } => {
            let items = read_paired_csv(open(&csv)?)?;
            let rows = analyze_paired(&items)?;
            match format {
                Format::Table => println!("{}", paired_table(&rows)),
                Format::Csv => print!("{}", paired_csv(&rows)),
            }
        }
    }
    Ok(())
}

fn simulate(args: SimulateArgs, data_dir: Option<PathBuf>) -> Result<(), Failure> {
    let tune = |mut net: NetConfig| {
        net.seed = args.seed;
        if let Some(p) = args.drop_prob {
            net.drop_prob = p;
        }
        if let Some(p) = args.duplicate_prob {
            net.duplicate_prob = p;
        }
        if let Some(w) = args.reorder_window {
            net.reorder_window = w;
        }
        net
    };
    let report = match &args.scenario {
        Some(path) => {
            let scenario = Scenario::load(path)?;
            let net = tune(scenario.net.clone().unwrap_or_default());
            let run = run_scripted(&scenario, Some(net), data_dir.as_deref())?;
            if data_dir.is_some() {
                println!("document:   {}", run.doc_id);
            }
            run.report
        }
        None => run_fuzz(args.clients, args.ops, tune(NetConfig::default()))?,
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        println!("{report}");
    }
    if report.converged {
        Ok(())
    } else {
        Err(Failure::new("diverged", "replicas did not converge"))
    }
}
