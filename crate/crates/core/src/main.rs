fn main() {
    std::process::exit(hd_delta::cli::main());
}
