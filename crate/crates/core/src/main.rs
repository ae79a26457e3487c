use std::path::{Path, PathBuf};
use std::sync::Arc;

use errors::{fail, Result};
use appgate::apkcheck::{build_serial_db, parse_apk, repack_check};
use appgate::bench::{batch_amortization, compare_storage, mechanism_ratio, upload_timing, GasBench};
use appgate::gateway::{parse_address, Config, Gateway, MarketEnv, UploadRequest};
use appgate::ledger::GasSchedule;
use appgate::market::fixtures::{FixtureCorpus, CHECKSUM_MARKETS};
use appgate::testkit::{random_records, typical_record};
use clap::{Parser, Subcommand};
use rand::SeedableRng;

/// Minimal boxed-error plumbing for the binary.
mod errors {
    pub type Result<T> = std::result::Result<T, Box<dyn std::error::Error + Send + Sync>>;

    pub fn fail<T>(msg: impl Into<String>) -> Result<T> {
        Err(msg.into().into())
    }
}

#[derive(Parser)]
#[command(name = "appgate", version, about = "App-delegation gateway")]
struct Cli {
    /// TOML configuration; defaults apply when omitted.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the JSON API.
    Serve {
        #[arg(long)]
        listen: Option<std::net::SocketAddr>,
    },
    /// Upload the app behind a market page.
    Upload {
        page_url: String,
        /// Donation transaction paying for the upload.
        #[arg(long)]
        fee_tx: Option<String>,
    },
    /// Fetch a stored app through the fastest gateway.
    Download {
        package: String,
        version: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Pin every indexed app at the consortium pinners.
    Sync,
    /// Run one refresh pass through the public gateways.
    Refresh,
    /// Manage upload permission.
    Whitelist {
        #[command(subcommand)]
        action: WhitelistAction,
    },
    /// Official signing-certificate serials.
    Serialdb {
        #[command(subcommand)]
        action: SerialdbAction,
    },
    /// Gas and timing measurements.
    Bench {
        #[command(subcommand)]
        which: BenchKind,
    },
    /// Market adapter diagnostics.
    Market {
        #[command(subcommand)]
        action: MarketAction,
    },
    /// APK diagnostics.
    Apk {
        #[command(subcommand)]
        action: ApkAction,
    },
    /// Write the built-in fixture markets to a directory.
    Fixtures { dir: PathBuf },
}

#[derive(Subcommand)]
enum WhitelistAction {
    Add { address: String },
    Remove { address: String },
}

#[derive(Subcommand)]
enum SerialdbAction {
    /// Import serials from every official .apk in a directory.
    Import { dir: PathBuf },
}

#[derive(Subcommand)]
enum BenchKind {
    /// Log-path versus storage-word gas, batching, typical upload.
    Gas {
        #[arg(long, default_value_t = 140)]
        records: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Per-phase upload timings over fixture markets.
    Timing {
        #[arg(long, default_value_t = 20)]
        uploads: usize,
        /// Simulated market round-trip per request, in milliseconds.
        #[arg(long, default_value_t = 20)]
        latency_ms: u64,
    },
}

#[derive(Subcommand)]
enum MarketAction {
    /// Resolve, download and vet a page without storing anything.
    Test { page_url: String },
}

#[derive(Subcommand)]
enum ApkAction {
    /// Print manifest fields and the signing-certificate serial.
    Inspect { file: PathBuf },
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    Ok(match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    })
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    if let Err(err) = run(Cli::parse()) {
        eprintln!("error: {err}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Serve { listen } => serve(config, listen),
        Command::Upload { page_url, fee_tx } => {
            let gw = Gateway::from_config(&config)?;
            let mut req = UploadRequest::new(page_url);
            if let Some(tx) = fee_tx {
                req = req.with_fee(tx.parse()?);
            }
            print_json(&gw.upload(&req)?)
        }
        Command::Download {
            package,
            version,
            output,
        } => {
            let gw = Gateway::from_config(&config)?;
            let got = gw.download(&package, &version)?;
            let path = output.unwrap_or_else(|| PathBuf::from(format!("{package}-{version}.apk")));
            std::fs::write(&path, &got.bytes)?;
            println!("{} via {} -> {}", got.content_id, got.served_by.name, path.display());
            Ok(())
        }
        Command::Sync => {
            let gw = Gateway::from_config(&config)?;
            for (pinner, report) in gw.sync()? {
                println!(
                    "{pinner}: indexed {} newly pinned {} failures {}",
                    report.indexed,
                    report.newly_pinned.len(),
                    report.failures.len()
                );
            }
            Ok(())
        }
        Command::Refresh => {
            let gw = Gateway::from_config(&config)?;
            let report = gw.refresh();
            println!("fetched {} failures {}", report.fetched, report.failures.len());
            Ok(())
        }
        Command::Whitelist { action } => {
            let gw = Gateway::from_config(&config)?;
            let tx = match action {
                WhitelistAction::Add { address } => gw.whitelist_add(parse_address(&address))?,
                WhitelistAction::Remove { address } => gw.whitelist_remove(parse_address(&address))?,
            };
            println!("{tx}");
            Ok(())
        }
        Command::Serialdb {
            action: SerialdbAction::Import { dir },
        } => {
            let mut apks = Vec::new();
            for entry in std::fs::read_dir(&dir)? {
                let path = entry?.path();
                if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("apk")) {
                    apks.push(std::fs::read(&path)?);
                }
            }
            let db = build_serial_db(&apks)?;
            if config.data_dir.is_none() {
                eprintln!("warning: no data_dir configured; imported serials are not kept");
            }
            let added = Gateway::from_config(&config)?.import_serials(&db)?;
            println!("{} apks, {} new serials", apks.len(), added.len());
            Ok(())
        }
        Command::Bench {
            which: BenchKind::Gas { records, seed },
        } => bench_gas(records, seed),
        Command::Bench {
            which: BenchKind::Timing { uploads, latency_ms },
        } => bench_timing(&config, uploads, latency_ms),
        Command::Market {
            action: MarketAction::Test { page_url },
        } => print_json(&Gateway::from_config(&config)?.dry_run(&page_url)?),
        Command::Apk {
            action: ApkAction::Inspect { file },
        } => {
            let summary = parse_apk(&std::fs::read(&file)?)?;
            let env = MarketEnv::load(&config.markets)?;
            println!("package  {}", summary.package_name);
            println!("version  {}", summary.version_name);
            println!("serial   {:#x}", summary.cert_serial);
            println!("repack   {}", repack_check(&summary, &env.serial_db));
            Ok(())
        }
        Command::Fixtures { dir } => {
            let corpus = FixtureCorpus::standard();
            corpus.write_dir(&dir)?;
            for app in corpus.apps() {
                println!("{}\t{}", app.market_id, app.page_url);
            }
            Ok(())
        }
    }
}

fn serve(mut config: Config, listen: Option<std::net::SocketAddr>) -> Result<()> {
    if let Some(addr) = listen {
        config.listen = addr;
    }
    // The blocking HTTP client must be built outside the async runtime.
    let gw = Arc::new(Gateway::from_config(&config)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(config.listen).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        appgate::api::serve(gw, listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })?;
    Ok(())
}

fn bench_gas(records: usize, seed: u64) -> Result<()> {
    let schedule = GasSchedule::ETHEREUM;
    println!(
        "mechanism   sstore_set/log_base = {}/{} = {:.2}",
        schedule.sstore_set,
        schedule.log_base,
        mechanism_ratio(&schedule)
    );
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let recs = random_records(&mut rng, records.max(100));
    let cmp = compare_storage(&recs[..records.max(1)])?;
    println!(
        "storage     {} records: log {:.0} gas, baseline {:.0} gas, mean ratio {:.2}",
        cmp.records, cmp.mean_log_gas, cmp.mean_baseline_gas, cmp.mean_ratio
    );
    for p in batch_amortization(&recs, &[1, 10, 50, 100])? {
        println!(
            "batch {:>3}   singles {} gas, batch {} gas, ratio {:.2}",
            p.size, p.singles_gas, p.batch_gas, p.ratio
        );
    }
    let gas = GasBench::default().single(&typical_record())?;
    println!(
        "typical     {gas} gas = {:.8} ether at an assumed gas price of 1 gwei",
        gas as f64 * 1e-9
    );
    Ok(())
}

fn bench_timing(config: &Config, uploads: usize, latency_ms: u64) -> Result<()> {
    if uploads == 0 {
        return fail("--uploads must be positive");
    }
    let mut corpus = FixtureCorpus::new();
    let urls: Vec<String> = (0..uploads)
        .map(|i| {
            let market = CHECKSUM_MARKETS[i % CHECKSUM_MARKETS.len()];
            corpus
                .publish(market, &format!("com.bench.app{i}"), "1.0", 0x1000u32 + i as u32)
                .page_url
        })
        .collect();
    corpus.web.set_latency(std::time::Duration::from_millis(latency_ms));
    let mut config = config.clone();
    config.data_dir = None;
    config.fees.enabled = false;
    let gw = Gateway::open(&config, MarketEnv::from_corpus(&corpus))?;
    let report = upload_timing(&gw, &urls)?;
    print!("{}", report.to_table());
    println!(
        "overhead {:.2}% of retrieve time, max |phase sum - total| / total {:.2}%",
        report.overhead_percent,
        report.max_sum_deviation * 100.0
    );
    Ok(())
}
