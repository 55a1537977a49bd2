fn main() {
    std::process::exit(tembed::cli::main_exit_code());
}
