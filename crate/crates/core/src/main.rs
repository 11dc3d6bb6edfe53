fn main() -> std::process::ExitCode {
    riskcap::cli_io::main()
}
