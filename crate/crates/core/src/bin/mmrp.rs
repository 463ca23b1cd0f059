fn main() -> std::process::ExitCode {
    mmrp::cli::main()
}
