fn main() {
    std::process::exit(irregts::cli::run_command(std::env::args_os()));
}
