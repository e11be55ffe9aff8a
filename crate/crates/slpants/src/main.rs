use clap::Parser;

fn main() {
    std::process::exit(slpants::cli::run(slpants::cli::Cli::parse()));
}
