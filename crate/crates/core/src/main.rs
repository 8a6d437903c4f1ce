fn main() {
    std::process::exit(homeospline::cli::run(std::env::args_os()));
}
