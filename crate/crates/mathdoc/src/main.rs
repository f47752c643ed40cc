use std::process::ExitCode;

fn main() -> ExitCode {
    mathdoc::cli::main()
}
