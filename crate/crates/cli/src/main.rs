fn main() {
    std::process::exit(intermittency_cli::run(std::env::args_os()));
}
