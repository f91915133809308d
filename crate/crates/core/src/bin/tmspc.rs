use std::process::ExitCode;

fn main() -> ExitCode {
    tmspc::cli::run(std::env::args_os())
}
