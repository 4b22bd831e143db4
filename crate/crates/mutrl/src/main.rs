fn main() {
    std::process::exit(mutrl::cli::run(std::env::args_os()));
}
