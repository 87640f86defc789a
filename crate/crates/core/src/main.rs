fn main() {
    std::process::exit(csgames::cli::main_with_args(std::env::args()));
}
