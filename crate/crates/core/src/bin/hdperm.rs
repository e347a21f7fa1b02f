fn main() {
    std::process::exit(hdperm::cli::main());
}
