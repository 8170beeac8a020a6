use clap::Parser;
use tracing_subscriber::EnvFilter;

use objrestore_service::cli::{self, Cli, Command};
use objrestore_service::Config;

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Serve { config } => serve(config.as_deref()),
        other => cli::report(cli::run(other)),
    };
    std::process::exit(code);
}

fn serve(path: Option<&std::path::Path>) -> i32 {
    let config = match Config::load(path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config: {e}");
            return 2;
        }
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("runtime: {e}");
            return 1;
        }
    };
    match runtime.block_on(objrestore_service::http::serve(config)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("server: {e}");
            1
        }
    }
}
