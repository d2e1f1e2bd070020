use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use privhub::analyzer::analyze;
use privhub::hub::client::HubClient;
use privhub::hub::http::{self, HubHandle};
use privhub::hub::{FilterSpec, Hub, RewriteBody, RewriteRequest};
use privhub::manifest::{parse_manifest, serialize_manifest, validate_manifest, Manifest};
use privhub::operators::{OperatorKind, RecordingTransport, Transport};
use privhub::rewriter::{apply_plan, canonical_diff};
use privhub::runtime::{
    default_data_dir, ClockMode, DriverCatalog, EgressFilter, EgressLedger, GroupBy, NetTransport, Runtime,
    VirtualClock, HOUR_MS,
};

/// Writes to stdout; a closed pipe (`privhub ... | head`) ends the process quietly.
fn emit(args: std::fmt::Arguments<'_>) {
    use std::io::Write;
    if let Err(e) = std::io::stdout().lock().write_fmt(args) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        panic!("writing to stdout: {e}");
    }
}

macro_rules! out {
    ($($t:tt)*) => { emit(format_args!($($t)*)) };
}

macro_rules! outln {
    () => { emit(format_args!("\n")) };
    ($($t:tt)*) => { emit(format_args!("{}\n", format_args!($($t)*))) };
}


#[derive(Parser)]
#[command(name = "privhub", version, about = "Privacy-mediating smart home hub")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Type-check a manifest and print its descriptions and permissions.
    /// Exits non-zero when the manifest is invalid.
    Analyze {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print the validation report.
    Validate { manifest: PathBuf },
    /// Rewrite a manifest file, or an installed app when --hub is given.
    Rewrite {
        /// Manifest path, or app id with --hub.
        target: String,
        #[command(subcommand)]
        op: RewriteOp,
        #[arg(long, global = true)]
        dry_run: bool,
        /// Write the rewritten manifest here instead of stdout.
        #[arg(long, short, global = true)]
        out: Option<PathBuf>,
        #[command(flatten)]
        remote: Remote,
    },
    /// Run manifests on a simulated clock against the fixture drivers.
    Simulate(SimulateArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Talk to a running hub.
    Client {
        #[command(flatten)]
        remote: Remote,
        #[command(subcommand)]
        cmd: ClientCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Remote {
    #[arg(long, env = "PRIVHUB_URL")]
    hub: Option<String>,
    #[arg(long, env = "PRIVHUB_TOKEN")]
    token: Option<String>,
}

#[derive(Subcommand, Clone)]
enum RewriteOp {
    /// Lower how often an inject node fires.
    RateLimit {
        #[arg(long)]
        node: String,
        /// New interval in minutes.
        #[arg(long, conflicts_with = "interval_ms")]
        minutes: Option<u64>,
        #[arg(long)]
        interval_ms: Option<u64>,
    },
    /// Block a network node during time-of-day windows such as 17:00-19:00.
    Schedule {
        #[arg(long)]
        node: String,
        #[arg(long = "window", required = true, value_parser = parse_window)]
        windows: Vec<(u64, u64)>,
    },
    /// Put a filter after a node.
    Filter {
        #[arg(long)]
        after: String,
        #[arg(long)]
        kind: OperatorKind,
        #[arg(long, default_value = "")]
        id: String,
        /// Filter properties as a JSON object.
        #[arg(long, default_value = "{}")]
        props: String,
    },
}

#[derive(Args)]
struct SimulateArgs {
    manifests: Vec<PathBuf>,
    #[arg(long, default_value_t = 24)]
    hours: u64,
    /// Deny a permission ("face image" or "face image → HelloVisitor.com").
    /// Everything else is allowed.
    #[arg(long)]
    deny: Vec<String>,
    /// Append ledger records to this file.
    #[arg(long)]
    ledger: Option<PathBuf>,
    #[arg(long, value_parser = parse_group_by, default_value = "content")]
    group_by: GroupBy,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8642")]
    addr: SocketAddr,
    #[arg(long, value_enum, default_value_t = ClockArg::Simulated)]
    clock: ClockArg,
    #[arg(long, env = "PRIVHUB_TOKEN")]
    token: Option<String>,
    /// Send every delivery to this address instead of the real destination.
    #[arg(long)]
    sink: Option<SocketAddr>,
    /// Record deliveries in memory instead of opening connections.
    #[arg(long, conflicts_with = "sink")]
    offline: bool,
    /// Ledger file. Defaults to egress.ndjson in the data directory.
    #[arg(long)]
    ledger: Option<PathBuf>,
    /// Install these manifests at startup.
    #[arg(long)]
    install: Vec<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClockArg {
    Simulated,
    Real,
}

#[derive(Subcommand)]
enum ClientCmd {
    Apps,
    App { id: String },
    Install {
        manifest: PathBuf,
        /// node=driver
        #[arg(long = "bind", value_parser = parse_binding)]
        bindings: Vec<(String, String)>,
    },
    Uninstall { id: String },
    Description { id: String },
    Label { id: String },
    Permissions { id: String },
    /// Allow or deny one permission.
    SetPermission {
        id: String,
        permission: String,
        #[arg(long, conflicts_with = "deny", required_unless_present = "deny")]
        allow: bool,
        #[arg(long)]
        deny: bool,
    },
    Inject { id: String, node: String },
    Egress {
        #[arg(long)]
        app: Option<String>,
        #[arg(long)]
        content: Option<String>,
        #[arg(long)]
        from: Option<u64>,
        #[arg(long)]
        to: Option<u64>,
        #[arg(long, value_parser = parse_group_by, default_value = "none")]
        group_by: GroupBy,
    },
    Clock,
    /// Advance the simulated clock.
    Advance {
        #[arg(long, conflicts_with = "ms")]
        hours: Option<u64>,
        #[arg(long)]
        ms: Option<u64>,
    },
    Drivers,
}

fn parse_group_by(s: &str) -> Result<GroupBy, String> {
    s.parse().map_err(|e: privhub::runtime::LedgerError| e.to_string())
}

fn parse_binding(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .ok_or_else(|| format!("expected node=driver, got {s:?}"))
}

fn parse_clock(s: &str) -> Result<u64, String> {
    let (h, m) = s.split_once(':').ok_or_else(|| format!("expected HH:MM, got {s:?}"))?;
    let h: u64 = h.parse().map_err(|_| format!("bad hour in {s:?}"))?;
    let m: u64 = m.parse().map_err(|_| format!("bad minute in {s:?}"))?;
    if h > 24 || m > 59 || (h == 24 && m > 0) {
        return Err(format!("{s:?} is not a time of day"));
    }
    Ok((h * 60 + m) * 60_000)
}

/// `17:00-19:00`; a window may wrap past midnight.
fn parse_window(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once('-').ok_or_else(|| format!("expected HH:MM-HH:MM, got {s:?}"))?;
    Ok((parse_clock(a)?, parse_clock(b)?))
}

impl RewriteOp {
    fn request(&self) -> Result<RewriteRequest, String> {
        Ok(match self.clone() {
            RewriteOp::RateLimit {
                node,
                minutes,
                interval_ms,
            } => RewriteRequest::RateLimit {
                node,
                interval_ms: interval_ms
                    .or(minutes.map(|m| m * 60_000))
                    .ok_or("give --minutes or --interval-ms")?,
            },
            RewriteOp::Schedule { node, windows } => RewriteRequest::Schedule { node, windows },
            RewriteOp::Filter { after, kind, id, props } => {
                let properties: Map<String, Value> =
                    serde_json::from_str(&props).map_err(|e| format!("--props: {e}"))?;
                RewriteRequest::Filter {
                    after,
                    filter: FilterSpec { kind, id, properties },
                }
            }
        })
    }
}

fn read_manifest(path: &Path) -> Result<Manifest, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_manifest(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn print_json(v: &impl serde::Serialize) {
    outln!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn client(remote: &Remote) -> Result<HubClient, String> {
    let url = remote.hub.clone().unwrap_or_else(|| "http://127.0.0.1:8642".into());
    Ok(HubClient::new(&url, remote.token.clone()))
}

fn analyze_cmd(path: &Path, format: Format) -> Result<ExitCode, String> {
    let m = read_manifest(path)?;
    let report = validate_manifest(&m);
    let analysis = analyze(&m);
    match format {
        Format::Json => print_json(&json!({
            "valid": report.is_installable(),
            "validation": report,
            "analysis": analysis.to_json(&m),
        })),
        Format::Text => {
            out!("{}", analysis.render_text(&m));
            for (level, list) in [("error", &report.errors), ("warning", &report.warnings)] {
                for i in list {
                    eprintln!("{level} {:?} [{}]: {}", i.code, i.nodes.join(", "), i.message);
                }
            }
        }
    }
    Ok(if report.is_installable() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn validate_cmd(path: &Path) -> Result<ExitCode, String> {
    let report = validate_manifest(&read_manifest(path)?);
    print_json(&report);
    Ok(if report.is_installable() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn rewrite_cmd(target: &str, op: &RewriteOp, dry_run: bool, out: Option<&Path>, remote: &Remote) -> Result<ExitCode, String> {
    let request = op.request()?;
    if remote.hub.is_some() {
        let resp = client(remote)?
            .rewrite(target, &RewriteBody { request, dry_run })
            .map_err(|e| e.to_string())?;
        print_json(&resp);
        return Ok(ExitCode::SUCCESS);
    }
    let before = read_manifest(Path::new(target))?;
    let plan = request.plan(&before).map_err(|e| e.to_string())?;
    let after = apply_plan(&before, &plan).map_err(|e| e.to_string())?;
    if dry_run {
        out!("{}", canonical_diff(&before, &after));
        return Ok(ExitCode::SUCCESS);
    }
    let text = serialize_manifest(&after);
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()))?,
        None => outln!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate_cmd(a: &SimulateArgs) -> Result<ExitCode, String> {
    let catalog = DriverCatalog::new(default_data_dir());
    let registry = Arc::new(catalog.registry().map_err(|e| e.to_string())?);
    let transport = Arc::new(RecordingTransport::new());
    let mut rt = Runtime::new(Arc::new(catalog), registry, transport.clone());
    if let Some(p) = &a.ledger {
        rt = rt.with_ledger(EgressLedger::open(p).map_err(|e| e.to_string())?);
    }
    let mut hub = Hub::new(rt);
    for path in &a.manifests {
        let view = hub
            .install(read_manifest(path)?, BTreeMap::new())
            .map_err(|e| format!("{}: {e}", path.display()))?;
        hub.allow_all(&view.id).map_err(|e| e.to_string())?;
        for d in &a.deny {
            // A deny that names no permission of this app is fine.
            let _ = hub.set_permission(&view.id, d, false);
        }
    }
    let run = hub.advance(a.hours * HOUR_MS).map_err(|e| e.to_string())?;
    let report = hub.egress(&EgressFilter {
        group_by: a.group_by,
        ..Default::default()
    });
    match a.format {
        Format::Json => print_json(&json!({
            "emits": run.emits,
            "connections": transport.connections(),
            "report": report,
        })),
        Format::Text => {
            outln!("simulated {} h, {} provider emits, {} connections", a.hours, run.emits, transport.connections());
            outln!("{:<40} {:>8} {:>12} {:>8}", "group", "items", "bytes", "blocked");
            for r in report.rows.iter().chain([&report.total]) {
                outln!("{:<40} {:>8} {:>12} {:>8}", r.group, r.items, r.bytes, r.blocked_items);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn serve_cmd(a: &ServeArgs) -> Result<ExitCode, String> {
    let catalog = DriverCatalog::new(default_data_dir());
    let registry = Arc::new(catalog.registry().map_err(|e| e.to_string())?);
    let transport: Arc<dyn Transport> = if a.offline {
        Arc::new(RecordingTransport::new())
    } else {
        let t = NetTransport::new(Duration::from_secs(5));
        Arc::new(match a.sink {
            Some(s) => t.with_sink(s),
            None => t,
        })
    };
    let ledger_path = a.ledger.clone().unwrap_or_else(|| default_data_dir().join("egress.ndjson"));
    let clock = match a.clock {
        ClockArg::Simulated => VirtualClock::simulated(0),
        ClockArg::Real => VirtualClock::real(),
    };
    let rt = Runtime::new(Arc::new(catalog), registry, transport)
        .with_clock(clock)
        .with_ledger(EgressLedger::open(&ledger_path).map_err(|e| e.to_string())?);
    let mut hub = Hub::new(rt);
    for path in &a.install {
        let view = hub
            .install(read_manifest(path)?, BTreeMap::new())
            .map_err(|e| format!("{}: {e}", path.display()))?;
        eprintln!("installed {} as {}", path.display(), view.id);
    }
    let mode = hub.clock().mode;
    let handle = HubHandle::spawn(hub);
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(a.addr).await.map_err(|e| e.to_string())?;
        eprintln!(
            "listening on http://{} ({} clock, ledger {})",
            a.addr,
            if mode == ClockMode::Simulated { "simulated" } else { "real" },
            ledger_path.display()
        );
        http::serve(listener, handle, a.token.clone()).await.map_err(|e| e.to_string())
    })?;
    Ok(ExitCode::SUCCESS)
}

fn client_cmd(remote: &Remote, cmd: &ClientCmd) -> Result<ExitCode, String> {
    let c = client(remote)?;
    let v = match cmd {
        ClientCmd::Apps => c.apps(),
        ClientCmd::App { id } => c.app(id),
        ClientCmd::Install { manifest, bindings } => {
            let text = std::fs::read_to_string(manifest).map_err(|e| format!("{}: {e}", manifest.display()))?;
            c.install(&text, bindings)
        }
        ClientCmd::Uninstall { id } => c.uninstall(id),
        ClientCmd::Description { id } => c.description(id),
        ClientCmd::Label { id } => c.label(id),
        ClientCmd::Permissions { id } => c.permissions(id),
        ClientCmd::SetPermission {
            id,
            permission,
            allow,
            ..
        } => c.set_permission(id, permission, *allow),
        ClientCmd::Inject { id, node } => c.inject(id, node),
        ClientCmd::Egress {
            app,
            content,
            from,
            to,
            group_by,
        } => c.egress(&EgressFilter {
            app: app.clone(),
            content: content.clone(),
            from: *from,
            to: *to,
            group_by: *group_by,
        }),
        ClientCmd::Clock => c.clock(),
        ClientCmd::Advance { hours, ms } => c.advance(ms.or(hours.map(|h| h * HOUR_MS)).unwrap_or(HOUR_MS)),
        ClientCmd::Drivers => c.drivers(),
    }
    .map_err(|e| e.to_string())?;
    if !v.is_null() {
        print_json(&v);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Analyze { manifest, format } => analyze_cmd(manifest, *format),
        Cmd::Validate { manifest } => validate_cmd(manifest),
        Cmd::Rewrite {
            target,
            op,
            dry_run,
            out,
            remote,
        } => rewrite_cmd(target, op, *dry_run, out.as_deref(), remote),
        Cmd::Simulate(a) => simulate_cmd(a),
        Cmd::Serve(a) => serve_cmd(a),
        Cmd::Client { remote, cmd } => client_cmd(remote, cmd),
    };
    res.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
