fn main() {
    std::process::exit(isodelay::cli::run(std::env::args_os()));
}
