use clap::Parser;

fn main() {
    let cli = ccfs_cli::Cli::parse();
    if let Err(err) = ccfs_cli::run(cli) {
        eprintln!("error: {}", err.message());
        std::process::exit(err.exit_code());
    }
}
