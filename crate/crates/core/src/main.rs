fn main() -> std::process::ExitCode {
    annoqual::cli::main()
}
