fn main() -> std::process::ExitCode {
    cskl::cli::main_exit()
}
