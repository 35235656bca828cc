fn main() {
    std::process::exit(gbfl::cli::run_cli(std::env::args_os()));
}
