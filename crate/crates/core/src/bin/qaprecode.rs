fn main() {
    std::process::exit(qaprecode::cli::run_cli(std::env::args_os()));
}
