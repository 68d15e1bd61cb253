fn main() -> std::process::ExitCode {
    nulgi::cli::main()
}
