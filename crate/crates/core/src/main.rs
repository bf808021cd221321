use clap::Parser;

fn main() -> std::process::ExitCode {
    cno::cli::main_with(cno::cli::Cli::parse())
}
