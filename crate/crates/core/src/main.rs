fn main() -> std::process::ExitCode {
    qeraser::cli::main()
}
