fn main() {
    std::process::exit(trotter_core::cli::run(std::env::args_os()));
}
