fn main() {
    std::process::exit(xdiff::cli::main_with_args(std::env::args_os()));
}
