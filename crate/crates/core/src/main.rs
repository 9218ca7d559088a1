fn main() {
    std::process::exit(lifecycle::cli::main_entry());
}
