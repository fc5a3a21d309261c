fn main() {
    std::process::exit(hullthresh::cli::main_with_env());
}
