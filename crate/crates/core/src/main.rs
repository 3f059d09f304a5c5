fn main() {
    std::process::exit(robust_tree::cli::main());
}
