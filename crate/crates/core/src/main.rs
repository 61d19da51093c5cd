fn main() -> std::process::ExitCode {
    propaug::cli::main()
}
