use clap::Parser;

fn main() {
    let args = uavsim::cli::Args::parse();
    std::process::exit(uavsim::cli::execute(&args));
}
