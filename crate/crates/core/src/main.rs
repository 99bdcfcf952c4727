fn main() {
    std::process::exit(vnlearn::cli::run(std::env::args_os()));
}
