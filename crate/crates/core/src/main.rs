fn main() {
    std::process::exit(qest::cli::main_with_args(std::env::args_os()));
}
