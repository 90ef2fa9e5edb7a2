fn main() {
    std::process::exit(raf::cli::run(std::env::args_os()));
}
