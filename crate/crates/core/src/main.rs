fn main() {
    std::process::exit(rsf::cli::main_with_args(std::env::args_os()));
}
