fn main() {
    std::process::exit(veriprop::cli::run(std::env::args_os()));
}
