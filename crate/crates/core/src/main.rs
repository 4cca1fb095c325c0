fn main() {
    std::process::exit(rsbb::cli::main_with_args(std::env::args_os()));
}
