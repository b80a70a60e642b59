fn main() {
    std::process::exit(edpmed_cli::main_with_args(std::env::args_os()));
}
