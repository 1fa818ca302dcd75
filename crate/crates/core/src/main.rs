fn main() -> std::process::ExitCode {
    topopi::cli::main()
}
