fn main() -> std::process::ExitCode {
    nvrelax::cli::main()
}
