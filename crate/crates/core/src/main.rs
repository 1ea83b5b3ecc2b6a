fn main() -> std::process::ExitCode {
    distreg::cli::main()
}
