use clap::Parser;

fn main() {
    let cli = hdg_adapt::cli::Cli::parse();
    std::process::exit(hdg_adapt::cli::main_with(cli));
}
