fn main() -> std::process::ExitCode {
    smoothing_averse::cli::main_entry(std::env::args_os())
}
