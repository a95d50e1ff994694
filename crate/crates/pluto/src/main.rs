fn main() {
    std::process::exit(pluto::cli::run());
}
