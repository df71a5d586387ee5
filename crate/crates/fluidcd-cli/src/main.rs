use clap::Parser;

fn main() {
    let cli = fluidcd_cli::Cli::parse();
    std::process::exit(fluidcd_cli::run(cli));
}
