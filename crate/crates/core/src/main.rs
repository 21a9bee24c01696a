fn main() {
    std::process::exit(flpc::cli::run());
}
