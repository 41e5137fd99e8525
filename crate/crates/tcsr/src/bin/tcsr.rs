fn main() {
    std::process::exit(tcsr::cli::run());
}
