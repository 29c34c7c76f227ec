fn main() {
    std::process::exit(adapense::cli::main_with_args(std::env::args_os()));
}
