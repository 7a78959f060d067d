fn main() {
    std::process::exit(freelab::cli::run(std::env::args_os()));
}
