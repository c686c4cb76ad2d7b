fn main() {
    std::process::exit(epidp::cli::run(std::env::args_os()));
}
