fn main() {
    std::process::exit(sspace::cli::run(std::env::args_os()));
}
