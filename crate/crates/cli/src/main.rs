fn main() {
    std::process::exit(spdense_cli::run(std::env::args_os()));
}
