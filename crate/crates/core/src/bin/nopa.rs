fn main() {
    std::process::exit(nopa::cli::main_with_args(std::env::args_os()));
}
