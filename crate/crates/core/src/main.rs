fn main() {
    std::process::exit(wincount::cli::run());
}
