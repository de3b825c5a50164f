fn main() -> std::process::ExitCode {
    rcprobe_cli::main_with_args(std::env::args_os())
}
