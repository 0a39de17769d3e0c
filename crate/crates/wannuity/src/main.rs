use clap::Parser;

fn main() {
    let cli = wannuity::cli::Cli::parse();
    std::process::exit(wannuity::cli::run(cli));
}
