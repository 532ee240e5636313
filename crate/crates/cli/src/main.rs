use clap::Parser;

fn main() {
    // clap itself exits with code 2 on unparseable flags, matching our
    // usage-error convention.
    let cli = manycov_cli::args::Cli::parse();
    if let Err(failure) = manycov_cli::run(cli) {
        eprintln!("error: {}", failure.message());
        std::process::exit(failure.code());
    }
}
