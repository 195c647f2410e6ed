fn main() {
    std::process::exit(cpdcert::cli::main_with_args());
}
