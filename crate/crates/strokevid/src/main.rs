use clap::Parser;

fn main() {
    let cli = strokevid::cli::Cli::parse();
    if let Err(e) = strokevid::cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
