fn main() {
    std::process::exit(milnor_cycles::cli::main_with_args(std::env::args_os()));
}
