fn main() {
    std::process::exit(pyric::cli::run(std::env::args_os()));
}
