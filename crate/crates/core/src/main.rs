use std::process::ExitCode;

fn main() -> ExitCode {
    multivec::cli::run(std::env::args_os())
}
