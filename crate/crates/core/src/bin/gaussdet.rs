fn main() {
    std::process::exit(gaussdet::cli::run());
}
