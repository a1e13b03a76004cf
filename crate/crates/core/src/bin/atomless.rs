fn main() {
    std::process::exit(atomless::cli::main_with_args(std::env::args_os()));
}
