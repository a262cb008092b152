fn main() {
    std::process::exit(kinetic_mlmc::cli::main_with_args(std::env::args_os()));
}
