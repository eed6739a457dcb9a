use clap::Parser;

fn main() {
    let cli = derand_lab_cli::Cli::parse();
    std::process::exit(derand_lab_cli::main_with(cli));
}
