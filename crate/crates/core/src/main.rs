fn main() {
    std::process::exit(spanflow::cli::run(std::env::args_os()));
}
