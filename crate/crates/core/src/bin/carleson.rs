fn main() {
    std::process::exit(carleson::cli::main_entry());
}
