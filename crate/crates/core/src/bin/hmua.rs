use std::process::ExitCode;

fn main() -> ExitCode {
    hmua_core::cli::main()
}
