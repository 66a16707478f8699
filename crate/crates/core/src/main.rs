fn main() {
    std::process::exit(dpda::cli::run());
}
