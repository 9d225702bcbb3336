fn main() {
    std::process::exit(spinfade::cli::main_entry());
}
