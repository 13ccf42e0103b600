use clap::Parser;

fn main() {
    let cli = mhgrn_cli::Cli::parse();
    std::process::exit(mhgrn_cli::run(cli));
}
