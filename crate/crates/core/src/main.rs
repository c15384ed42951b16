fn main() {
    std::process::exit(prngtest::cli::main_with_args(std::env::args_os()));
}
