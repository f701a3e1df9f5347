fn main() {
    std::process::exit(reichlab::cli::main());
}
