fn main() {
    std::process::exit(ift_core::cli::main_with_args(std::env::args_os()));
}
