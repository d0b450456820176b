fn main() {
    std::process::exit(datkit::cli::run());
}
