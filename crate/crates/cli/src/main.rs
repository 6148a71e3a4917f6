fn main() {
    std::process::exit(semmap::cli::main_with(std::env::args_os()));
}
