fn main() -> std::process::ExitCode {
    latentforge::cli::run(std::env::args_os())
}
