fn main() {
    std::process::exit(psm::cli::run(std::env::args_os()));
}
