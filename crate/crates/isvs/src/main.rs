use std::process::ExitCode;

fn main() -> ExitCode {
    isvs::cli::main_entry()
}
