fn main() {
    std::process::exit(rankprune::cli::run(std::env::args_os()));
}
