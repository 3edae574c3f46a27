use clap::Parser;

fn main() -> std::process::ExitCode {
    grail_harness::cli::run(grail_harness::cli::Cli::parse())
}
