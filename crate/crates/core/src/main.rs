use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = spillover::cli::Cli::parse();
    if let Err(e) = spillover::cli::run(cli) {
        eprintln!("{}", spillover::cli::error_json(&e));
        std::process::exit(e.exit_code());
    }
}
