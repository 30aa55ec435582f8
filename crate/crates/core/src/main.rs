fn main() {
    std::process::exit(coalg::cli::run(std::env::args()));
}
