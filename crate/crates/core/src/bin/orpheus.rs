fn main() {
    std::process::exit(orpheus::cli::main_from_env());
}
