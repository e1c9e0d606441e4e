fn main() {
    std::process::exit(divimark::cli::run(std::env::args_os()));
}
