fn main() {
    std::process::exit(flexocp::cli::run(std::env::args_os()));
}
