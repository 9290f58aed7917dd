fn main() {
    std::process::exit(noncon::cli::main_from_env());
}
