fn main() {
    std::process::exit(quadnet::cli::main_with_args(std::env::args_os()));
}
