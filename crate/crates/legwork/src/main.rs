fn main() {
    std::process::exit(legwork::cli::run(std::env::args_os()));
}
