fn main() {
    std::process::exit(perisolve::cli::main_entry());
}
