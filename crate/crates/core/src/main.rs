fn main() -> std::process::ExitCode {
    bzscr::cli::run()
}
