use std::process::ExitCode;

fn main() -> ExitCode {
    cpfilter::cli::main()
}
