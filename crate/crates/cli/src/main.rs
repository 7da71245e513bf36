fn main() {
    std::process::exit(mvgrf_cli::run(std::env::args_os()));
}
