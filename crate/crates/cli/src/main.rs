use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(dscofs_cli::run(std::env::args_os()))
}
