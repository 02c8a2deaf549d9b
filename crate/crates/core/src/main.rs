use clap::Parser;

fn main() -> std::process::ExitCode {
    kgsim::cli::main_with(kgsim::cli::Cli::parse())
}
