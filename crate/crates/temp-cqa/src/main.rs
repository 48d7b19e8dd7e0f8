fn main() {
    std::process::exit(temp_cqa::cli::run());
}
