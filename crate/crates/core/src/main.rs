fn main() {
    std::process::exit(flatopt::cli::run_cli(std::env::args_os()));
}
