fn main() -> std::process::ExitCode {
    elgauss_cli::main_with_args(std::env::args_os())
}
