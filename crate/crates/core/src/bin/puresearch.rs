fn main() {
    std::process::exit(puresearch::app::cli::run(std::env::args_os()));
}
