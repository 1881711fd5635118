fn main() {
    std::process::exit(macneto::cli::main_with_args(std::env::args_os()));
}
