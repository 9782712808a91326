fn main() {
    std::process::exit(heavybranch::cli::run(std::env::args_os()));
}
