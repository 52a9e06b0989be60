fn main() {
    std::process::exit(r0kit::cli::main_with_args(std::env::args_os()));
}
