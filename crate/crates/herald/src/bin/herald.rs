fn main() {
    std::process::exit(herald::cli::main_with_args(std::env::args_os()));
}
