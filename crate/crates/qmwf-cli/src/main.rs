fn main() {
    std::process::exit(qmwf_cli::run());
}
