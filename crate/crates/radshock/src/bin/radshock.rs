fn main() {
    std::process::exit(radshock::cli::main_with_args(std::env::args().skip(1)));
}
